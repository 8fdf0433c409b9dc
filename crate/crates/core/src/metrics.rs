//! Trial scoring, success and timing tables, ratings, and Fisher's exact
//! test on 2x2 tables.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{canvas_to_physical, EnvironmentConfig, PhysicalPoint, ProblemSpec, SignalModality};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no trials to aggregate")]
    EmptyInput,
    #[error("trial {index}: {reason}")]
    InvalidTrial { index: usize, reason: String },
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("rating {0} outside [-5, 5]")]
    OutOfRange(i64),
    #[error("trial log line {line}: {reason}")]
    Log { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub spec: ProblemSpec,
    pub modality: SignalModality,
    pub chosen_description: String,
    pub chosen_color: String,
    /// Meters, in table coordinates.
    pub placed_position: PhysicalPoint,
    /// Judged by the experimenter.
    pub orientation_ok: bool,
    /// Judged by the experimenter.
    pub instruction_ok: bool,
    /// Seconds from signal display to first touch.
    pub comprehension_time: f64,
    /// Seconds from signal display to task completion.
    pub completion_time: f64,
}

impl TrialOutcome {
    pub fn check(&self) -> Result<(), String> {
        let (a, b) = (self.comprehension_time, self.completion_time);
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err("times must be finite and non-negative".into());
        }
        if b < a {
            return Err("completion precedes comprehension".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Om1Verdict {
    pub desc_ok: bool,
    pub color_ok: bool,
    pub pos_ok: bool,
    pub inst_ok: bool,
    pub ori_ok: bool,
}

impl Om1Verdict {
    /// In [`TABLE_COLUMNS`] order.
    pub fn criteria(&self) -> [bool; 5] {
        [self.desc_ok, self.color_ok, self.pos_ok, self.inst_ok, self.ori_ok]
    }

    pub fn overall(&self) -> f64 {
        self.criteria().iter().filter(|c| **c).count() as f64 / 5.0
    }
}

fn same_text(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// A placement fails only when it lands strictly beyond the tolerance.
pub fn score_placement(outcome: &TrialOutcome, env: &EnvironmentConfig) -> Om1Verdict {
    let pos_ok = canvas_to_physical(outcome.spec.goal_position, env)
        .map(|goal| goal.distance(&outcome.placed_position) <= env.placement_tolerance)
        .unwrap_or(false);
    Om1Verdict {
        desc_ok: same_text(&outcome.chosen_description, &outcome.spec.object_description),
        color_ok: same_text(&outcome.chosen_color, &outcome.spec.object_color),
        pos_ok,
        inst_ok: outcome.instruction_ok,
        ori_ok: outcome.orientation_ok,
    }
}

pub const TABLE_COLUMNS: [&str; 6] = ["Desc", "Col", "Pos", "Inst", "Ori", "All"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub modality: SignalModality,
    pub trials: usize,
    /// Percent per criterion, in [`TABLE_COLUMNS`] order without "All".
    pub percent: [f64; 5],
    /// Unweighted mean of the five criterion percents.
    pub all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub rows: Vec<SuccessRow>,
}

impl SuccessTable {
    pub fn row(&self, m: SignalModality) -> Option<&SuccessRow> {
        self.rows.iter().find(|r| r.modality == m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("Modality,{}\n", TABLE_COLUMNS.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.percent.iter().chain([&r.all]).map(|v| format!("{v:.1}")).collect();
            out.push_str(&format!("{},{}\n", r.modality, cells.join(",")));
        }
        out
    }
}

fn checked(trials: &[TrialOutcome]) -> Result<(), MetricsError> {
    if trials.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for (index, t) in trials.iter().enumerate() {
        t.check().map_err(|reason| MetricsError::InvalidTrial { index, reason })?;
    }
    Ok(())
}

pub fn aggregate_success(trials: &[TrialOutcome], env: &EnvironmentConfig) -> Result<SuccessTable, MetricsError> {
    checked(trials)?;
    let mut rows = Vec::new();
    for m in SignalModality::ALL {
        let mine: Vec<_> = trials.iter().filter(|t| t.modality == m).collect();
        if mine.is_empty() {
            continue;
        }
        let mut passes = [0usize; 5];
        for t in &mine {
            for (p, ok) in passes.iter_mut().zip(score_placement(t, env).criteria()) {
                *p += usize::from(ok);
            }
        }
        let percent = passes.map(|p| 100.0 * p as f64 / mine.len() as f64);
        let all = percent.iter().sum::<f64>() / 5.0;
        rows.push(SuccessRow { modality: m, trials: mine.len(), percent, all });
    }
    Ok(SuccessTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single sample.
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(MeanSd { mean, sd, n })
    }
}

impl fmt::Display for MeanSd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1} ± {:.1}", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub modality: SignalModality,
    pub comprehension: MeanSd,
    pub completion: MeanSd,
    pub warnings: Vec<String>,
}

pub fn timing_stats(trials: &[TrialOutcome]) -> Result<Vec<TimingRow>, MetricsError> {
    checked(trials)?;
    let mut rows = Vec::new();
    for m in SignalModality::ALL {
        let mine: Vec<_> = trials.iter().filter(|t| t.modality == m).collect();
        let times = |f: fn(&TrialOutcome) -> f64| mine.iter().map(|t| f(t)).collect::<Vec<_>>();
        let (Some(comprehension), Some(completion)) =
            (MeanSd::of(&times(|t| t.comprehension_time)), MeanSd::of(&times(|t| t.completion_time)))
        else {
            continue;
        };
        let mut warnings = Vec::new();
        if mine.len() == 1 {
            warnings.push(format!("{m}: single trial, standard deviation reported as 0"));
        }
        rows.push(TimingRow { modality: m, comprehension, completion, warnings });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RatingScale {
    #[serde(rename = "SM4")]
    Sm4,
    #[serde(rename = "SM5")]
    Sm5,
    #[serde(rename = "SM6")]
    Sm6,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub signal_id: String,
    pub scale: RatingScale,
    pub value: i8,
}

pub const RATING_MIN: i64 = -5;
pub const RATING_MAX: i64 = 5;

impl Rating {
    pub fn new(signal_id: impl Into<String>, scale: RatingScale, value: i64) -> Result<Rating, MetricsError> {
        if !(RATING_MIN..=RATING_MAX).contains(&value) {
            return Err(MetricsError::OutOfRange(value));
        }
        Ok(Rating { signal_id: signal_id.into(), scale, value: value as i8 })
    }
}

pub fn rating_summary(ratings: &[Rating], scale: RatingScale) -> Option<MeanSd> {
    let values: Vec<f64> = ratings.iter().filter(|r| r.scale == scale).map(|r| f64::from(r.value)).collect();
    MeanSd::of(&values)
}

pub fn read_trials_jsonl(reader: impl BufRead) -> Result<Vec<TrialOutcome>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::Log { line: i + 1, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TrialOutcome =
            serde_json::from_str(&line).map_err(|e| MetricsError::Log { line: i + 1, reason: e.to_string() })?;
        out.push(t);
    }
    Ok(out)
}

pub fn write_trials_jsonl(trials: &[TrialOutcome], mut w: impl Write) -> std::io::Result<()> {
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// `[[a, b], [c, d]]`: rows are modalities, columns success and failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn transpose(&self) -> Self {
        Self { a: self.a, b: self.c, c: self.b, d: self.d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    /// `ad / bc`; infinite when `bc = 0 < ad`, NaN when both are zero.
    pub odds_ratio: f64,
    pub p_two_sided: f64,
    /// A row or column total is zero; `p` is 1 by convention.
    pub degenerate: bool,
}

/// Relative slack when deciding whether a table is as extreme as the
/// observed one.
pub const FISHER_TIE_TOLERANCE: f64 = 1e-12;

/// Two-sided Fisher exact test: sums the hypergeometric probabilities of
/// every table with the observed margins that is no more likely than the
/// observed table.
pub fn fisher_exact(t: ContingencyTable) -> Result<FisherResult, MetricsError> {
    let n = t.total();
    if n == 0 {
        return Err(MetricsError::EmptyTable);
    }
    let (ad, bc) = ((t.a * t.d) as f64, (t.b * t.c) as f64);
    let odds_ratio = if bc == 0.0 {
        if ad > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        }
    } else {
        ad / bc
    };
    let (r1, r2, c1) = (t.a + t.b, t.c + t.d, t.a + t.c);
    let c2 = t.b + t.d;
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return Ok(FisherResult { odds_ratio, p_two_sided: 1.0, degenerate: true });
    }
    // cell `a` ranges over [lo, hi]; weights by ratio recurrence from w(lo) = 1
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let mut w = Vec::with_capacity((hi - lo + 1) as usize);
    let mut cur = 1.0f64;
    w.push(cur);
    for x in lo..hi {
        let (x, r1, r2, c1) = (x as f64, r1 as f64, r2 as f64, c1 as f64);
        cur *= (r1 - x) * (c1 - x) / ((x + 1.0) * (r2 - c1 + x + 1.0));
        w.push(cur);
    }
    let total: f64 = w.iter().sum();
    let observed = w[(t.a - lo) as usize];
    let mut extreme: Vec<f64> = w.iter().copied().filter(|&p| p <= observed * (1.0 + FISHER_TIE_TOLERANCE)).collect();
    extreme.sort_by(f64::total_cmp);
    let p = (extreme.iter().sum::<f64>() / total).min(1.0);
    Ok(FisherResult { odds_ratio, p_two_sided: p, degenerate: false })
}
