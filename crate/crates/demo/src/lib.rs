//! Browser bindings. The pipeline runs against the scripted backend, so the
//! page works with no network and no key. Plain functions carry the logic and
//! are tested natively; the `#[wasm_bindgen]` wrappers only convert errors.

use std::sync::Arc;

use sigsynth_core::composer::{map_doc_to_display, nls_card, Calibration, DisplayTarget};
use sigsynth_core::domain::{CanvasPoint, EnvironmentConfig, ProblemSpec, SignalModality};
use sigsynth_core::metrics::{fisher_exact, ContingencyTable};
use sigsynth_core::pipeline::Synthesizer;
use sigsynth_core::prompting::{PromptEnvelope, StageId, TemplateSet};
use sigsynth_core::scripted::ScriptedBackend;
use sigsynth_core::svg::{parse_svg, serialize, SvgSource};
use wasm_bindgen::prelude::*;

/// The workspace templates, compiled in.
pub fn bundled_templates() -> Result<TemplateSet, String> {
    let text = |stage: StageId, pre: &str, post: &str| PromptEnvelope {
        stage,
        pre: pre.trim_end_matches(['\n', '\r']).into(),
        post: post.trim_end_matches(['\n', '\r']).into(),
    };
    TemplateSet::new(
        "v1",
        vec![
            text(
                StageId::TaskManager,
                include_str!("../../../templates/v1/task_manager.pre.txt"),
                include_str!("../../../templates/v1/task_manager.post.txt"),
            ),
            text(StageId::Nlss, include_str!("../../../templates/v1/nlss.pre.txt"), include_str!("../../../templates/v1/nlss.post.txt")),
            text(
                StageId::ObjVss,
                include_str!("../../../templates/v1/objvss.pre.txt"),
                include_str!("../../../templates/v1/objvss.post.txt"),
            ),
            text(
                StageId::InstVss,
                include_str!("../../../templates/v1/instvss.pre.txt"),
                include_str!("../../../templates/v1/instvss.post.txt"),
            ),
        ],
    )
    .map_err(|e| e.to_string())
}

/// Runs the staged pipeline offline and returns JSON with the display SVG
/// (composite for visual modalities, text card for NLS), bullets and plan.
#[allow(clippy::too_many_arguments)]
pub fn preview(
    structure: &str,
    object: &str,
    color: &str,
    goal_x: i32,
    goal_y: i32,
    orientation: &str,
    instruction: &str,
    modality: &str,
) -> Result<String, String> {
    let env = EnvironmentConfig::default();
    let modality: SignalModality = modality.parse().map_err(|e: sigsynth_core::domain::DomainError| e.to_string())?;
    let synth = Synthesizer::new(Arc::new(ScriptedBackend::new(env.clone())), bundled_templates()?, env.clone());
    let spec = ProblemSpec {
        structure: structure.into(),
        object_description: object.into(),
        object_color: color.into(),
        goal_position: CanvasPoint::new(goal_x, goal_y),
        goal_orientation: orientation.into(),
        instruction: instruction.into(),
    };
    let bundle = synth.synthesize(spec, modality, 0.0).map_err(|e| e.to_string())?;
    let svg = match &bundle.composite {
        Some(c) => c.to_svg_string(),
        None => serialize(&nls_card(&bundle.bullets, &env).map_err(|e| e.to_string())?.0).0,
    };
    Ok(serde_json::json!({
        "id": bundle.id,
        "svg": svg,
        "bullets": bundle.bullets,
        "plan": bundle.plan.map(|p| serde_json::json!({
            "start": p.start,
            "goal": p.goal,
            "orientation_deg": p.orientation_deg,
        })),
    })
    .to_string())
}

/// Warps an SVG through a row-major 3x3 homography onto a projector frame of
/// `width` x `height`; returns RGBA bytes.
pub fn display_rgba(svg: &str, homography: &[f64], width: u32, height: u32) -> Result<Vec<u8>, String> {
    let h: [f64; 9] = homography.try_into().map_err(|_| format!("homography needs 9 numbers, got {}", homography.len()))?;
    let cal = Calibration {
        homography: [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]],
        target: DisplayTarget::Projector { width, height },
    };
    let doc = parse_svg(&SvgSource(svg.into())).map_err(|e| e.to_string())?;
    Ok(map_doc_to_display(&doc, &cal).map_err(|e| e.to_string())?.image.pixels)
}

/// Fisher's exact test on [[a, b], [c, d]] as JSON.
pub fn fisher(a: u32, b: u32, c: u32, d: u32) -> Result<String, String> {
    let r = fisher_exact(ContingencyTable::new(a.into(), b.into(), c.into(), d.into())).map_err(|e| e.to_string())?;
    let odds = if r.odds_ratio.is_finite() { serde_json::json!(r.odds_ratio) } else { serde_json::json!(r.odds_ratio.to_string()) };
    Ok(serde_json::json!({ "odds_ratio": odds, "p_two_sided": r.p_two_sided, "degenerate": r.degenerate }).to_string())
}

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn compose_preview(
    structure: &str,
    object: &str,
    color: &str,
    goal_x: i32,
    goal_y: i32,
    orientation: &str,
    instruction: &str,
    modality: &str,
) -> Result<String, JsValue> {
    preview(structure, object, color, goal_x, goal_y, orientation, instruction, modality).map_err(js)
}

#[wasm_bindgen]
pub fn render_display(svg: &str, homography: &[f64], width: u32, height: u32) -> Result<Vec<u8>, JsValue> {
    display_rgba(svg, homography, width, height).map_err(js)
}

#[wasm_bindgen]
pub fn fisher_exact_test(a: u32, b: u32, c: u32, d: u32) -> Result<String, JsValue> {
    fisher(a, b, c, d).map_err(js)
}
