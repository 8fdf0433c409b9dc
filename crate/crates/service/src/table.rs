//! Test-set tables as CSV with a fixed header, and the batch runner over them.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sigsynth_core::domain::{CanvasPoint, ProblemSpec, SignalModality};
use sigsynth_core::pipeline::{PipelineError, SignalBundle, Synthesizer};

use crate::ServiceError;

pub const TABLE_HEADER: [&str; 7] = ["structure", "object", "color", "goal_x", "goal_y", "orientation", "instruction"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    structure: String,
    object: String,
    color: String,
    goal_x: i32,
    goal_y: i32,
    orientation: String,
    instruction: String,
}

pub fn read_table(reader: impl Read) -> Result<Vec<ProblemSpec>, ServiceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| ServiceError::Table(e.to_string()))?;
    if header.iter().ne(TABLE_HEADER) {
        return Err(ServiceError::Table(format!(
            "header must be {}, got {}",
            TABLE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize::<Row>()
        .map(|r| {
            let r = r.map_err(|e| ServiceError::Table(e.to_string()))?;
            Ok(ProblemSpec {
                structure: r.structure,
                object_description: r.object,
                object_color: r.color,
                goal_position: CanvasPoint::new(r.goal_x, r.goal_y),
                goal_orientation: r.orientation,
                instruction: r.instruction,
            })
        })
        .collect()
}

pub fn load_table(path: impl AsRef<Path>) -> Result<Vec<ProblemSpec>, ServiceError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| ServiceError::Table(format!("{}: {e}", path.display())))?;
    read_table(f)
}

pub fn write_table(rows: &[ProblemSpec], writer: impl Write) -> Result<(), ServiceError> {
    // explicit header so an empty table still reads back
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(TABLE_HEADER).map_err(|e| ServiceError::Table(e.to_string()))?;
    for s in rows {
        w.serialize(Row {
            structure: s.structure.clone(),
            object: s.object_description.clone(),
            color: s.object_color.clone(),
            goal_x: s.goal_position.x,
            goal_y: s.goal_position.y,
            orientation: s.goal_orientation.clone(),
            instruction: s.instruction.clone(),
        })
        .map_err(|e| ServiceError::Table(e.to_string()))?;
    }
    w.flush().map_err(|e| ServiceError::Table(e.to_string()))
}

/// Seeded presentation-order shuffle. Order only; rows are untouched.
pub fn shuffled(rows: &[ProblemSpec], seed: u64) -> Vec<ProblemSpec> {
    let mut out = rows.to_vec();
    out.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RowOutcome {
    Ok { bundle: Box<SignalBundle> },
    Failed { stage: Option<String>, error: String, fixture_miss: bool, partial_id: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSetRow {
    pub index: usize,
    pub structure: String,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSetReport {
    pub modality: SignalModality,
    pub temperature: f64,
    pub rows: Vec<TestSetRow>,
}

impl TestSetReport {
    pub fn bundles(&self) -> impl Iterator<Item = &SignalBundle> {
        self.rows.iter().filter_map(|r| match &r.outcome {
            RowOutcome::Ok { bundle } => Some(bundle.as_ref()),
            RowOutcome::Failed { .. } => None,
        })
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r.outcome, RowOutcome::Failed { .. })).count()
    }
}

pub fn outcome_of(result: Result<SignalBundle, PipelineError>) -> RowOutcome {
    match result {
        Ok(bundle) => RowOutcome::Ok { bundle: Box::new(bundle) },
        Err(e) => RowOutcome::Failed {
            stage: match &e {
                PipelineError::StageFailed { stage, .. } => Some(stage.as_str().to_string()),
                _ => None,
            },
            fixture_miss: e.is_fixture_miss(),
            partial_id: e.partial().map(|b| b.id.clone()),
            error: e.to_string(),
        },
    }
}

/// One row per input in order; failures are collected, not fatal.
pub fn run_testset(
    synth: &Synthesizer,
    rows: &[ProblemSpec],
    modality: SignalModality,
    temperature: f64,
) -> TestSetReport {
    let rows = synth
        .run_test_set(rows, modality, temperature)
        .into_iter()
        .zip(rows)
        .enumerate()
        .map(|(index, (result, spec))| TestSetRow { index, structure: spec.structure.clone(), outcome: outcome_of(result) })
        .collect();
    TestSetReport { modality, temperature, rows }
}
