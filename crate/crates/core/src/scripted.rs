//! A deterministic stand-in for the language model. It reads the labeled
//! fields that our own prompts carry and answers each stage in the reply
//! format the templates ask for, with some of the chatter real replies have
//! (prose around tags, code fences). Used to author fixture corpora and to
//! run the pipeline offline.

use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;

use crate::domain::{normalize_orientation, CanvasPoint, EnvironmentConfig};
use crate::gateway::{BackendKind, CompletionBackend, CompletionRequest, CompletionResult, GatewayError};
use crate::prompting::StageId;
use crate::svg::Rgba;

#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    env: EnvironmentConfig,
}

impl ScriptedBackend {
    pub fn new(env: EnvironmentConfig) -> Self {
        Self { env }
    }
}

#[derive(Debug, Default)]
struct Fields {
    structure: Option<String>,
    object: Option<String>,
    color: Option<String>,
    goal: Option<CanvasPoint>,
    orientation: Option<String>,
    instruction: Option<String>,
}

fn labeled(text: &str, labels: &str) -> Option<String> {
    let re = Regex::new(&format!(r"(?m)^\s*(?:{labels})\s*:\s*(.+?)\s*$")).ok()?;
    re.captures(text).map(|c| c[1].to_string())
}

fn goal_pattern() -> &'static Regex {
    static P: OnceLock<Regex> = OnceLock::new();
    P.get_or_init(|| Regex::new(r"(?m)^\s*Goal position[^:]*:\s*\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]").expect("goal pattern"))
}

fn structure_pattern() -> &'static Regex {
    static P: OnceLock<Regex> = OnceLock::new();
    P.get_or_init(|| Regex::new(r#"structure "([^"]+)""#).expect("structure pattern"))
}

fn read_fields(prompt: &str) -> Fields {
    Fields {
        structure: structure_pattern().captures(prompt).map(|c| c[1].to_string()).or_else(|| labeled(prompt, "Structure")),
        object: labeled(prompt, "Object description|Object"),
        color: labeled(prompt, "Object color|Color"),
        goal: goal_pattern()
            .captures(prompt)
            .and_then(|c| Some(CanvasPoint::new(c[1].parse().ok()?, c[2].parse().ok()?))),
        orientation: labeled(prompt, "Goal orientation|Orientation"),
        instruction: labeled(prompt, "Placing instruction|Instruction"),
    }
}

fn missing(what: &str) -> GatewayError {
    GatewayError::MalformedResponse(format!("scripted responder: prompt carries no {what}"))
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        req.validate()?;
        let f = read_fields(&req.prompt);
        let text = match req.stage {
            StageId::TaskManager => task_manager_reply(&f)?,
            StageId::Nlss => nlss_reply(&f)?,
            StageId::ObjVss => objvss_reply(&f, req.temperature)?,
            StageId::InstVss => instvss_reply(&f, &self.env, req.temperature)?,
        };
        Ok(CompletionResult {
            text,
            model_id: req.model_id.clone(),
            latency: Duration::ZERO,
            backend: BackendKind::Scripted,
        })
    }
}

fn task_manager_reply(f: &Fields) -> Result<String, GatewayError> {
    let object = f.object.as_deref().ok_or_else(|| missing("object"))?;
    let color = f.color.as_deref().ok_or_else(|| missing("color"))?;
    let goal = f.goal.ok_or_else(|| missing("goal"))?;
    let ori = f.orientation.as_deref().ok_or_else(|| missing("orientation"))?;
    let inst = f.instruction.as_deref().ok_or_else(|| missing("instruction"))?;
    let structure = f.structure.as_deref().unwrap_or("the structure");
    Ok(format!(
        "Here are the three prompts.\n\n\
         <NLSS>\nSummarize in four bullets what the human must do to help finish {structure}.\n\
         Object: {object}\nColor: {color}\nGoal position: [{gx}, {gy}]\nOrientation: {ori}\nInstruction: {inst}\n</NLSS>\n\n\
         <OBJVSS>\nDraw a simple icon of the object.\nObject: {object}\nColor: {color}\n</OBJVSS>\n\n\
         <INSTVSS>\nPlan the placement on the canvas.\nGoal position: [{gx}, {gy}]\nOrientation: {ori}\nInstruction: {inst}\n</INSTVSS>\n",
        gx = goal.x,
        gy = goal.y,
    ))
}

fn nlss_reply(f: &Fields) -> Result<String, GatewayError> {
    let object = f.object.as_deref().ok_or_else(|| missing("object"))?;
    let color = f.color.as_deref().ok_or_else(|| missing("color"))?;
    let goal = f.goal.ok_or_else(|| missing("goal"))?;
    let ori = f.orientation.as_deref().ok_or_else(|| missing("orientation"))?;
    let inst = f.instruction.as_deref().ok_or_else(|| missing("instruction"))?;
    let turn = match normalize_orientation(ori) {
        Ok(0.0) => "Keep its current orientation.".to_string(),
        Ok(d) => format!("Rotate it {d} degrees clockwise."),
        Err(_) => format!("Orient it: {ori}."),
    };
    Ok(format!(
        "- Pick up the {} {}.\n- Move it to position [{}, {}] on the table.\n- {turn}\n- Place it {}.",
        color.to_lowercase(),
        object.to_lowercase(),
        goal.x,
        goal.y,
        inst.to_lowercase(),
    ))
}

fn color_of(name: &str) -> Rgba {
    Rgba::parse(&name.trim().to_lowercase()).unwrap_or(Rgba::rgb(200, 200, 200))
}

fn lighter(c: Rgba) -> Rgba {
    let up = |v: u8| v + (255 - v) / 2;
    Rgba::rgb(up(c.r), up(c.g), up(c.b))
}

fn icon_body(object: &str, main: &str, light: &str) -> String {
    let o = object.to_lowercase();
    if o.contains("arm") {
        format!(
            r##"<rect x="60" y="170" width="90" height="25" fill="#c0c0c0"/><rect x="95" y="90" width="18" height="80" fill="{main}"/><rect x="95" y="35" width="18" height="60" fill="{main}" transform="rotate(30 104 95)"/><circle cx="104" cy="95" r="10" fill="#c0c0c0"/><rect x="120" y="20" width="30" height="12" fill="{light}"/>"##
        )
    } else if o.contains("rocket") {
        format!(
            r##"<path d="M105 15 C135 45 140 95 135 150 L75 150 C70 95 75 45 105 15 Z" fill="{main}"/><circle cx="105" cy="80" r="14" fill="{light}"/><polygon points="75,115 45,165 75,150" fill="{main}"/><polygon points="135,115 165,165 135,150" fill="{main}"/><polygon points="88,150 105,195 122,150" fill="#ffa500"/>"##
        )
    } else if o.contains("cuboid") || o.contains("box") || o.contains("block") {
        format!(
            r##"<polygon points="45,75 135,75 165,45 75,45" fill="{light}"/><rect x="45" y="75" width="90" height="100" fill="{main}"/><polygon points="135,75 165,45 165,145 135,175" fill="{main}" fill-opacity="0.7"/>"##
        )
    } else if o.contains("wall") || o.contains("robot") {
        format!(
            r##"<rect x="55" y="95" width="100" height="70" fill="{main}"/><rect x="75" y="50" width="60" height="35" rx="8" ry="8" fill="{light}"/><circle cx="92" cy="67" r="9" fill="#202020"/><circle cx="118" cy="67" r="9" fill="#202020"/><rect x="100" y="85" width="10" height="10" fill="#808080"/><rect x="40" y="165" width="130" height="25" rx="10" ry="10" fill="#808080"/>"##
        )
    } else if o.contains("cylinder") || o.contains("can") {
        format!(
            r##"<rect x="60" y="50" width="90" height="120" fill="{main}"/><ellipse cx="105" cy="170" rx="45" ry="18" fill="{main}"/><ellipse cx="105" cy="50" rx="45" ry="18" fill="{light}"/>"##
        )
    } else if o.contains("mobile") || o.contains("phone") {
        format!(
            r##"<rect x="65" y="20" width="80" height="170" rx="12" ry="12" fill="{main}"/><rect x="73" y="38" width="64" height="125" fill="{light}"/><circle cx="105" cy="176" r="6" fill="#202020"/>"##
        )
    } else if o.contains("house") {
        format!(
            r##"<polygon points="30,100 105,30 180,100" fill="{light}"/><rect x="50" y="100" width="110" height="85" fill="{main}"/><rect x="92" y="135" width="26" height="50" fill="#402010"/><rect x="62" y="115" width="20" height="20" fill="#ffffe0"/>"##
        )
    } else if o.contains("bunny") || o.contains("rabbit") {
        format!(
            r##"<ellipse cx="85" cy="55" rx="12" ry="40" fill="{main}"/><ellipse cx="125" cy="55" rx="12" ry="40" fill="{main}"/><circle cx="105" cy="110" r="38" fill="{main}"/><ellipse cx="105" cy="170" rx="50" ry="32" fill="{main}"/><circle cx="92" cy="104" r="5" fill="#202020"/><circle cx="118" cy="104" r="5" fill="#202020"/><circle cx="105" cy="120" r="5" fill="{light}"/>"##
        )
    } else {
        format!(r##"<circle cx="105" cy="105" r="80" fill="{main}"/><circle cx="105" cy="105" r="40" fill="{light}"/>"##)
    }
}

fn objvss_reply(f: &Fields, temperature: f64) -> Result<String, GatewayError> {
    let object = f.object.as_deref().ok_or_else(|| missing("object"))?;
    let color = color_of(f.color.as_deref().ok_or_else(|| missing("color"))?);
    let body = icon_body(object, &color.to_string(), &lighter(color).to_string());
    // warmer replies add an outline whose weight grows with temperature
    let outline = if temperature > 0.0 {
        format!(
            "\n  <rect x=\"4\" y=\"4\" width=\"202\" height=\"202\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>",
            lighter(color),
            (temperature * 6.0).round().max(1.0)
        )
    } else {
        String::new()
    };
    Ok(format!(
        "Here is a simple icon of the {}:\n\n```svg\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"210\" height=\"210\">\n  <!-- {} -->\n  {body}{outline}\n</svg>\n```\n",
        object.to_lowercase(),
        object,
    ))
}

fn start_for(goal: CanvasPoint, instruction: &str, env: &EnvironmentConfig) -> CanvasPoint {
    let inst = instruction.to_lowercase();
    let half = i32::try_from(env.icon_edge / 2).unwrap_or(105);
    let (w, h) = (env.canvas_width as i32, env.canvas_height as i32);
    let clamp = |v: i32, max: i32| v.clamp(half.min(max / 2), (max - half).max(max / 2));
    let reach = 400;
    let p = if inst.contains("right") {
        CanvasPoint::new(clamp(goal.x + reach, w), goal.y)
    } else if inst.contains("left") {
        CanvasPoint::new(clamp(goal.x - reach, w), goal.y)
    } else if inst.contains("top") || inst.contains("down") {
        CanvasPoint::new(goal.x, clamp(goal.y - reach, h))
    } else {
        CanvasPoint::new(goal.x, clamp(goal.y + reach, h))
    };
    if p == goal {
        // the goal already sits on the edge the motion starts from
        CanvasPoint::new(if goal.x < w / 2 { goal.x + half } else { goal.x - half }, goal.y)
    } else {
        p
    }
}

fn trajectory_points(start: CanvasPoint, goal: CanvasPoint, zigzag: bool) -> Vec<(f64, f64)> {
    let (sx, sy, gx, gy) = (f64::from(start.x), f64::from(start.y), f64::from(goal.x), f64::from(goal.y));
    if !zigzag {
        return vec![(sx, sy), (gx, gy)];
    }
    let (dx, dy) = (gx - sx, gy - sy);
    let len = dx.hypot(dy);
    let (nx, ny) = (-dy / len * 30.0, dx / len * 30.0);
    let steps = 6;
    (0..=steps)
        .map(|i| {
            let t = f64::from(i) / f64::from(steps);
            let side = if i == 0 || i == steps { 0.0 } else if i % 2 == 1 { 1.0 } else { -1.0 };
            (sx + dx * t + nx * side, sy + dy * t + ny * side)
        })
        .collect()
}

fn instvss_reply(f: &Fields, env: &EnvironmentConfig, temperature: f64) -> Result<String, GatewayError> {
    let goal = f.goal.ok_or_else(|| missing("goal"))?;
    let inst = f.instruction.as_deref().ok_or_else(|| missing("instruction"))?;
    let ori = f.orientation.as_deref().ok_or_else(|| missing("orientation"))?;
    let deg = normalize_orientation(ori).unwrap_or(0.0);
    let start = start_for(goal, inst, env);
    let pts = trajectory_points(start, goal, inst.to_lowercase().contains("zig"));
    let points: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", x.round(), y.round())).collect();
    let (px, py) = pts[pts.len() - 2];
    let (gx, gy) = (f64::from(goal.x), f64::from(goal.y));
    let (dx, dy) = (gx - px, gy - py);
    let len = dx.hypot(dy);
    let (ux, uy) = (dx / len, dy / len);
    let head = [
        (gx, gy),
        (gx - ux * 40.0 - uy * 20.0, gy - uy * 40.0 + ux * 20.0),
        (gx - ux * 40.0 + uy * 20.0, gy - uy * 40.0 - ux * 20.0),
    ];
    let head: Vec<String> = head.iter().map(|(x, y)| format!("{},{}", x.round(), y.round())).collect();
    let stroke = if temperature > 0.5 { "#ffff66" } else { "#ffffff" };
    Ok(format!(
        "START: [{}, {}]\nGOAL: [{}, {}]\nORIENTATION_DEG: {deg}\n\n```svg\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n  \
         <polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"8\"/>\n  \
         <polygon points=\"{}\" fill=\"{stroke}\"/>\n</svg>\n```\n",
        start.x,
        start.y,
        goal.x,
        goal.y,
        env.canvas_width,
        env.canvas_height,
        points.join(" "),
        head.join(" "),
    ))
}
