//! Core of the robot-instruction signal synthesizer: problem specs, prompt
//! templates, the completion gateway with fixture record/replay, a strict SVG
//! engine, the compositor, the synthesis pipeline and trial metrics.

// `!(a < b)` is deliberate where NaN must take the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod composer;
pub mod domain;
pub mod extraction;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod prompting;
pub mod scripted;
pub mod svg;
