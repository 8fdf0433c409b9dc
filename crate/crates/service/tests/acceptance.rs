//! Acceptance criteria 1-8. Each criterion runs against an oracle that does
//! not share code with the implementation under test, prints one PASS/FAIL
//! line, and the process exits non-zero if any criterion fails.

mod common;

use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use common::root;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sigsynth_core::composer::{compose_signal, GOAL_ICON_ID};
use sigsynth_core::domain::{canvas_to_physical, normalize_orientation, CanvasPoint, EnvironmentConfig, ProblemSpec, SignalModality};
use sigsynth_core::extraction::{
    extract_bullets, extract_instruction_plan, extract_svg_block, split_task_manager, InstructionPlan,
};
use sigsynth_core::metrics::{aggregate_success, fisher_exact, read_trials_jsonl, write_trials_jsonl, ContingencyTable, TrialOutcome};
use sigsynth_core::svg::{decode_png, parse_svg, rasterize, sanitize, serialize, RasterImage, SanitizePolicy, Shape, SvgSource};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(n: u32, name: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let elapsed = started.elapsed();
    let result = result.and_then(|d| {
        if elapsed <= budget {
            Ok(d)
        } else {
            Err(format!("{d}; took {:.2} s, budget {:.0} s", elapsed.as_secs_f64(), budget.as_secs_f64()))
        }
    });
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n} [{tag}] {name} ({:.3} s): {detail}", elapsed.as_secs_f64());
    result.is_ok()
}

// ---------------------------------------------------------------------------
// 1. Robot arm icon listing

fn icon_listing() -> Check {
    let text = std::fs::read_to_string(root().join("crates/core/tests/data/robot_arm_icon.svg")).map_err(|e| e.to_string())?;
    // oracle: count opening tags in the raw text
    let tag_count = |tag: &str| Regex::new(&format!(r"<{tag}\b")).unwrap().find_iter(&text).count();
    let (want_rect, want_circle) = (tag_count("rect"), tag_count("circle"));
    ensure((want_rect, want_circle) == (9, 4), || format!("listing has {want_rect} rect / {want_circle} circle tags"))?;

    let doc = parse_svg(&SvgSource(text.clone())).map_err(|e| e.to_string())?;
    ensure((doc.width, doc.height) == (250.0, 250.0), || format!("size {}x{}", doc.width, doc.height))?;
    let shapes = doc.shapes();
    let rects = shapes.iter().filter(|e| matches!(e.shape, Shape::Rect { .. })).count();
    let circles = shapes.iter().filter(|e| matches!(e.shape, Shape::Circle { .. })).count();
    ensure(shapes.len() == 13 && rects == want_rect && circles == want_circle, || {
        format!("parsed {} shapes ({rects} rect, {circles} circle)", shapes.len())
    })?;

    let policy = SanitizePolicy { strip_background: true, ..SanitizePolicy::default() };
    let clean = sanitize(&doc, &policy);
    ensure(clean.shapes().len() == 12, || format!("sanitized to {} shapes", clean.shapes().len()))?;

    for d in [&doc, &clean] {
        let again = parse_svg(&serialize(d)).map_err(|e| e.to_string())?;
        ensure(&again == d, || "serialize/parse round trip changed the document".into())?;
    }
    Ok("250x250, 13 shapes (9 rect, 4 circle), 12 after background strip, round trip identical".into())
}

// ---------------------------------------------------------------------------
// 2. Goal icon center preservation

/// Test-side affine matrices [a b c d e f], independent of the engine.
type M = [f64; 6];

fn mul(l: &M, r: &M) -> M {
    [
        l[0] * r[0] + l[2] * r[1],
        l[1] * r[0] + l[3] * r[1],
        l[0] * r[2] + l[2] * r[3],
        l[1] * r[2] + l[3] * r[3],
        l[0] * r[4] + l[2] * r[5] + l[4],
        l[1] * r[4] + l[3] * r[5] + l[5],
    ]
}

/// Parses an SVG transform attribute (translate, scale, rotate, matrix).
fn oracle_transform(attr: &str) -> M {
    let re = Regex::new(r"(\w+)\s*\(([^)]*)\)").unwrap();
    let mut m: M = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    for c in re.captures_iter(attr) {
        let v: Vec<f64> = c[2].split(|ch: char| ch == ',' || ch.is_whitespace()).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect();
        let t: M = match (&c[1], v.as_slice()) {
            ("translate", [x]) => [1.0, 0.0, 0.0, 1.0, *x, 0.0],
            ("translate", [x, y]) => [1.0, 0.0, 0.0, 1.0, *x, *y],
            ("scale", [s]) => [*s, 0.0, 0.0, *s, 0.0, 0.0],
            ("scale", [sx, sy]) => [*sx, 0.0, 0.0, *sy, 0.0, 0.0],
            ("matrix", [a, b, c2, d, e, f]) => [*a, *b, *c2, *d, *e, *f],
            ("rotate", args) => {
                let (deg, cx, cy) = match args {
                    [d] => (*d, 0.0, 0.0),
                    [d, x, y] => (*d, *x, *y),
                    _ => panic!("rotate arity"),
                };
                let (s, co) = deg.to_radians().sin_cos();
                let r = [co, s, -s, co, 0.0, 0.0];
                mul(&mul(&[1.0, 0.0, 0.0, 1.0, cx, cy], &r), &[1.0, 0.0, 0.0, 1.0, -cx, -cy])
            }
            (name, _) => panic!("unexpected transform {name}"),
        };
        m = mul(&m, &t);
    }
    m
}

/// Goal group transform, read back from the serialized composite.
fn goal_transform(svg: &str) -> M {
    let tag = Regex::new(&format!(r#"<g\b[^>]*\bid="{GOAL_ICON_ID}"[^>]*>"#)).unwrap();
    let g = tag.find(svg).expect("goal group").as_str();
    let attr = Regex::new(r#"\btransform="([^"]*)""#).unwrap();
    oracle_transform(attr.captures(g).map(|c| c.get(1).unwrap().as_str()).unwrap_or(""))
}

fn plan(start: CanvasPoint, goal: CanvasPoint, deg: f64) -> InstructionPlan {
    InstructionPlan {
        start,
        goal,
        orientation_deg: deg,
        trajectory: SvgSource(format!(
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="1400" height="700"><polyline points="{},{} {},{}" stroke="#ffffff" stroke-width="6" fill="none"/></svg>"##,
            start.x, start.y, goal.x, goal.y
        )),
    }
}

fn center_preservation() -> Check {
    let env = EnvironmentConfig::default();
    ensure(env.icon_edge == 210, || format!("icon edge {}", env.icon_edge))?;
    // a 250-unit icon with a disc at its frame center
    let icon = parse_svg(&SvgSource(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="250" height="250"><circle cx="125" cy="125" r="20" fill="#00ff00"/><rect x="10" y="10" width="40" height="20" fill="#0000ff"/></svg>"##.into(),
    ))
    .map_err(|e| e.to_string())?;
    let frame_center = (125.0, 125.0);

    // Z-problem: rendered disc centroid
    let z = compose_signal(&icon, &plan(CanvasPoint::new(896, 100), CanvasPoint::new(496, 100), 35.0), &env).map_err(|e| e.to_string())?;
    let img = rasterize(&z.doc, 1400, 700).map_err(|e| e.to_string())?;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.pixel(x, y);
            if [p.r, p.g, p.b, p.a] == [0, 255, 0, 255] {
                sx += f64::from(x) + 0.5;
                sy += f64::from(y) + 0.5;
                n += 1.0;
            }
        }
    }
    ensure(n > 0.0, || "goal disc not rendered".into())?;
    let (cx, cy) = (sx / n, sy / n);
    let rendered_err = (cx - 496.0).hypot(cy - 100.0);
    ensure(rendered_err <= 0.5, || format!("Z rendered center ({cx:.3}, {cy:.3})"))?;
    let m = goal_transform(&z.to_svg_string());
    let mapped = (m[0] * frame_center.0 + m[2] * frame_center.1 + m[4], m[1] * frame_center.0 + m[3] * frame_center.1 + m[5]);
    ensure((mapped.0 - 496.0).hypot(mapped.1 - 100.0) <= 0.5, || format!("Z frame center maps to {mapped:?}"))?;

    // 100 random (goal, angle) pairs
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let goal = CanvasPoint::new(rng.gen_range(0..1400), rng.gen_range(0..700));
        let start = if goal.x < 700 { CanvasPoint::new(goal.x + 300, goal.y) } else { CanvasPoint::new(goal.x - 300, goal.y) };
        let deg = rng.gen_range(-360.0..360.0);
        let sig = compose_signal(&icon, &plan(start, goal, deg), &env).map_err(|e| format!("pair {i}: {e}"))?;
        let m = goal_transform(&sig.to_svg_string());
        let (x, y) = (m[0] * frame_center.0 + m[2] * frame_center.1 + m[4], m[1] * frame_center.0 + m[3] * frame_center.1 + m[5]);
        let err = (x - f64::from(goal.x)).hypot(y - f64::from(goal.y));
        worst = worst.max(err);
        ensure(err <= 0.5, || format!("pair {i}: goal {goal} at {deg} deg maps to ({x}, {y})"))?;
        let (ax, ay) = sig.goal_icon_center().ok_or("no goal group")?;
        ensure((ax - x).hypot(ay - y) <= 1e-6, || format!("pair {i}: goal_icon_center disagrees"))?;
    }
    Ok(format!("Z rendered center off by {rendered_err:.3} cell; 100 random pairs, worst {worst:.2e} cell"))
}

// ---------------------------------------------------------------------------
// 3. Test-set determinism through the CLI

fn offline_config(dir: &Path) -> PathBuf {
    let r = root();
    // an unroutable endpoint so any accidental live call fails loudly
    let cfg = format!(
        "endpoint = \"http://127.0.0.1:9/unreachable\"\napi_key_env = \"SIGSYNTH_ACCEPTANCE_NO_KEY\"\ntemplate_dir = {:?}\nfixture_path = {:?}\ntable = {:?}\nstore_path = \"store.redb\"\nbackend = \"fixture\"\ncalibration = \"identity.cal\"\n",
        r.join("templates/v1"),
        r.join("fixtures/completions.jsonl"),
        r.join("data/testset.csv"),
    );
    std::fs::write(dir.join("identity.cal"), "# identity\n1 0 0\n0 1 0\n0 0 1\ntarget projector 1400 700\n").unwrap();
    let path = dir.join("sigsynth.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn sigsynth() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sigsynth"));
    c.env_remove("SISCO_API_KEY");
    c
}

/// Expected rows: structure, goal, orientation text, orientation degrees.
const TEST_SET: [(&str, (i32, i32), &str, f64); 6] = [
    ("S", (496, 262), "90 deg", 90.0),
    ("Z", (452, 306), "45", 45.0),
    ("U", (396, 336), "same", 0.0),
    ("O", (598, 170), "no change", 0.0),
    ("R", (612, 414), "-pi/4", -45.0),
    ("K", (496, 152), "45 degrees", 45.0),
];

fn testset_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = offline_config(dir.path());
    let mut reports = Vec::new();
    for run in ["run1", "run2"] {
        let out = sigsynth()
            .args(["--config", cfg.to_str().unwrap(), "testset", "--modality", "all", "--json", "--out-dir", run])
            .current_dir(dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{run}: {}", String::from_utf8_lossy(&out.stderr)))?;
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        reports.push(v);
    }
    let list = |run: &str| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir.path().join(run))
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let (a, b) = (list("run1"), list("run2"));
    ensure(a.len() == 18, || format!("{} signal files", a.len()))?;
    ensure(a == b, || "signal files differ between runs".into())?;

    let reports = reports[0].as_array().ok_or("report list")?;
    let mut visual = 0;
    for report in reports {
        let rows = report["rows"].as_array().ok_or("report rows")?;
        ensure(rows.len() == 6, || format!("{} rows", rows.len()))?;
        if report["modality"] == "NLS" {
            continue;
        }
        visual += 1;
        for (row, (s, (gx, gy), pi_text, deg)) in rows.iter().zip(TEST_SET) {
            ensure(row["status"] == "ok" && row["structure"] == s, || format!("row {s}: {row}"))?;
            let p = &row["bundle"]["plan"];
            ensure(p["goal"]["x"] == gx && p["goal"]["y"] == gy, || format!("row {s}: goal {}", p["goal"]))?;
            let got = p["orientation_deg"].as_f64().ok_or("orientation")?;
            let normalized = normalize_orientation(pi_text).map_err(|e| e.to_string())?;
            ensure(got == deg && normalized == deg, || format!("row {s}: extracted {got}, normalized {normalized}, expected {deg}"))?;
        }
    }
    ensure(visual == 2, || format!("{visual} visual reports"))?;
    Ok("18 signals (6 rows x 3 modalities) byte-identical across 2 runs; goals and orientations match the test set (\"no change\" -> 0, \"-pi/4\" -> -45)".into())
}

// ---------------------------------------------------------------------------
// 4. Extraction robustness

const WORDS: [&str; 16] = [
    "pick", "the", "red", "rocket", "place", "it", "near", "goal", "rotate", "slowly", "insert", "from", "right", "cylinder",
    "green", "table",
];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(3..10);
    let mut s: Vec<&str> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
    s[0] = "Pick";
    format!("{}.", s.join(" "))
}

fn random_svg(rng: &mut ChaCha8Rng) -> String {
    let mut body = String::new();
    for _ in 0..rng.gen_range(1..5) {
        match rng.gen_range(0..3) {
            0 => body.push_str(&format!(
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#{:06x}"/>"##,
                rng.gen_range(0..100), rng.gen_range(0..100), rng.gen_range(1..100), rng.gen_range(1..100), rng.gen_range(0..0xffffff)
            )),
            1 => body.push_str(&format!(
                r##"<circle cx="{}" cy="{}" r="{}" fill="#{:06x}"/>"##,
                rng.gen_range(0..200), rng.gen_range(0..200), rng.gen_range(1..50), rng.gen_range(0..0xffffff)
            )),
            _ => body.push_str(&format!(
                r##"<polyline points="{},{} {},{} {},{}" stroke="#ffffff" fill="none"/>"##,
                rng.gen_range(0..200), rng.gen_range(0..200), rng.gen_range(0..200), rng.gen_range(0..200), rng.gen_range(0..200), rng.gen_range(0..200)
            )),
        }
        body.push('\n');
    }
    format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"200\" height=\"200\">\n{body}</svg>")
}

fn prose(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..4) {
        0 => String::new(),
        1 => "Sure! Here is the result:\n\n".into(),
        2 => format!("{}\n", sentence(rng)),
        _ => "Certainly. Note: values are in canvas cells.\n\n".into(),
    }
}

fn fence(rng: &mut ChaCha8Rng, body: &str) -> String {
    match rng.gen_range(0..4) {
        0 => format!("```svg\n{body}\n```"),
        1 => format!("```xml\n{body}\n```"),
        2 => format!("```\n{body}\n```"),
        _ => body.to_string(),
    }
}

fn crlf(rng: &mut ChaCha8Rng, text: String) -> String {
    if rng.gen_bool(0.3) {
        text.replace('\n', "\r\n")
    } else {
        text
    }
}

fn decorated_variant(rng: &mut ChaCha8Rng, env: &EnvironmentConfig, i: usize) -> Result<(), String> {
    // task manager triple
    let triple = [sentence(rng), sentence(rng), sentence(rng)];
    let tags = ["NLSS", "OBJVSS", "INSTVSS"];
    let mut tm = prose(rng);
    for (tag, body) in tags.iter().zip(&triple) {
        let t = match rng.gen_range(0..3) {
            0 => tag.to_string(),
            1 => tag.to_lowercase(),
            _ => format!(" {tag} "),
        };
        tm.push_str(&format!("<{t}>\n  {body}\n</{t}>\n{}", if rng.gen_bool(0.5) { "\n" } else { "" }));
    }
    tm.push_str(&prose(rng));
    let tm = crlf(rng, tm);
    let split = split_task_manager(&tm).map_err(|e| format!("variant {i} split: {e}"))?;
    ensure([split.nlss_prompt, split.objvss_prompt, split.instvss_prompt] == triple, || format!("variant {i}: wrong triple"))?;

    // bullets
    let bullets: Vec<String> = (0..4).map(|_| sentence(rng)).collect();
    let style = rng.gen_range(0..5);
    let mut text = prose(rng);
    for (k, b) in bullets.iter().enumerate() {
        let marker = match style {
            0 => "-".to_string(),
            1 => "*".to_string(),
            2 => "•".to_string(),
            3 => format!("{}.", k + 1),
            _ => format!("{})", k + 1),
        };
        let indent = if rng.gen_bool(0.3) { "  " } else { "" };
        text.push_str(&format!("{indent}{marker} {b}{}\n", if rng.gen_bool(0.3) { "  " } else { "" }));
    }
    text.push_str(&prose(rng));
    let text = crlf(rng, text);
    let got = extract_bullets(&text).map_err(|e| format!("variant {i} bullets: {e}"))?;
    ensure(got == bullets, || format!("variant {i}: bullets {got:?}"))?;

    // icon block
    let svg = random_svg(rng);
    let (head, body, tail) = (prose(rng), fence(rng, &svg), prose(rng));
    let reply = crlf(rng, format!("{head}{body}\n{tail}"));
    let want_svg = if reply.contains('\r') { svg.replace('\n', "\r\n") } else { svg.clone() };
    let block = extract_svg_block(&reply).map_err(|e| format!("variant {i} svg: {e}"))?;
    ensure(block.0 == want_svg, || format!("variant {i}: extracted block differs"))?;
    let want_doc = parse_svg(&SvgSource(svg)).map_err(|e| e.to_string())?;
    ensure(parse_svg(&block).map_err(|e| e.to_string())? == want_doc, || format!("variant {i}: block parses differently"))?;

    // instruction plan
    let goal = CanvasPoint::new(rng.gen_range(0..env.canvas_width as i32), rng.gen_range(0..env.canvas_height as i32));
    let start = CanvasPoint::new((goal.x + rng.gen_range(1..1399)) % env.canvas_width as i32, rng.gen_range(0..env.canvas_height as i32));
    let deg = f64::from(rng.gen_range(-3600..3600)) / 10.0;
    let point = |rng: &mut ChaCha8Rng, label: &str, p: CanvasPoint| match rng.gen_range(0..3) {
        0 => format!("{label}: [{}, {}]", p.x, p.y),
        1 => format!("{} = {},{}", label.to_lowercase(), p.x, p.y),
        _ => format!("{label}:[{},{}]", p.x, p.y),
    };
    let mut labels = [point(rng, "START", start), point(rng, "GOAL", goal), format!("ORIENTATION_DEG: {deg}")];
    if rng.gen_bool(0.5) {
        labels.swap(0, 1);
    }
    let traj = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="1400" height="700"><polyline points="{},{} {},{}" stroke="#fff"/><text x="5" y="20">GOAL: [1, 1]</text></svg>"##,
        start.x, start.y, goal.x, goal.y
    );
    let (head, body, tail) = (prose(rng), fence(rng, &traj), prose(rng));
    let reply = crlf(rng, format!("{head}{}\n\n{body}\n{tail}", labels.join("\n")));
    let plan = extract_instruction_plan(&reply, env).map_err(|e| format!("variant {i} plan: {e}"))?;
    ensure(plan.start == start && plan.goal == goal && plan.orientation_deg == deg, || {
        format!("variant {i}: plan {:?} {:?} {} vs {start:?} {goal:?} {deg}", plan.start, plan.goal, plan.orientation_deg)
    })?;
    ensure(plan.trajectory.0 == traj, || format!("variant {i}: trajectory differs"))?;
    Ok(())
}

fn exercise_all(text: &str, env: &EnvironmentConfig) {
    let _ = split_task_manager(text);
    let _ = extract_bullets(text);
    let _ = extract_svg_block(text);
    let _ = extract_instruction_plan(text, env);
    let _ = parse_svg(&SvgSource(text.to_string()));
}

fn extraction_robustness() -> Check {
    let env = EnvironmentConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let tokens = ["<svg", "</svg>", "<svg/>", "<NLSS>", "</NLSS>", "<OBJVSS>", "</INSTVSS>", "GOAL: [", "START=", "ORIENTATION_DEG:", "- ", "1. ", "```", "\"", ">", "<rect x=\"", "<!--", "-->", "\r\n", "width=\"1e308\""];
    let mut panics = 0;
    let mut inputs = 0;
    for k in 0..1500 {
        let text = if k < 1000 {
            let len = rng.gen_range(0..512);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            (0..rng.gen_range(1..40)).map(|_| {
                if rng.gen_bool(0.6) { tokens[rng.gen_range(0..tokens.len())].to_string() } else { rng.gen_range(0..2000).to_string() }
            }).collect()
        };
        inputs += 1;
        if catch_unwind(AssertUnwindSafe(|| exercise_all(&text, &env))).is_err() {
            panics += 1;
        }
    }
    ensure(panics == 0, || format!("{panics} of {inputs} arbitrary inputs panicked"))?;
    let mut bad = Vec::new();
    for i in 0..100 {
        match catch_unwind(AssertUnwindSafe(|| decorated_variant(&mut rng, &env, i))) {
            Ok(Ok(())) => {}
            Ok(Err(e)) => bad.push(e),
            Err(_) => bad.push(format!("variant {i} panicked")),
        }
    }
    ensure(bad.is_empty(), || format!("{} of 100 variants failed; first: {}", bad.len(), bad[0]))?;
    Ok(format!("{inputs} arbitrary inputs without panic; 100 decorated variants extracted exactly"))
}

// ---------------------------------------------------------------------------
// 5. Fisher exact test

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Exact two-sided p by enumerating every table with the same margins, in
/// integer arithmetic.
fn oracle_p(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let weight = |x: u64| binom(r1, x) * binom(r2, c1 - x);
    let observed = weight(a);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let tail: u128 = (lo..=hi).map(weight).filter(|w| *w <= observed).sum();
    let total: u128 = (lo..=hi).map(weight).sum();
    tail as f64 / total as f64
}

fn fisher_oracle() -> Check {
    let mut tables = 0u64;
    let mut worst: f64 = 0.0;
    for n in 1..=40u64 {
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let d = n - a - b - c;
                    let got = fisher_exact(ContingencyTable::new(a, b, c, d)).map_err(|e| format!("[[{a},{b}],[{c},{d}]]: {e}"))?;
                    let want = oracle_p(a, b, c, d);
                    let rel = (got.p_two_sided - want).abs() / want;
                    worst = worst.max(rel);
                    ensure(rel <= 1e-12, || format!("[[{a},{b}],[{c},{d}]]: p {} vs oracle {want}", got.p_two_sided))?;
                    tables += 1;
                }
            }
        }
    }
    ensure(tables >= 10_000, || format!("only {tables} tables"))?;
    let even = fisher_exact(ContingencyTable::new(5, 5, 5, 5)).map_err(|e| e.to_string())?.p_two_sided;
    ensure((even - 1.0).abs() <= 1e-12, || format!("[[5,5],[5,5]] p = {even}"))?;
    let split = fisher_exact(ContingencyTable::new(0, 5, 5, 0)).map_err(|e| e.to_string())?.p_two_sided;
    ensure((split - 2.0 / 252.0).abs() <= 1e-12 * (2.0 / 252.0), || format!("[[0,5],[5,0]] p = {split}"))?;
    Ok(format!("{tables} tables with 1 <= total <= 40, worst relative error {worst:.1e}; [[5,5],[5,5]] -> 1, [[0,5],[5,0]] -> 2/252"))
}

// ---------------------------------------------------------------------------
// 6. Success-table arithmetic

fn synthetic_trials(modality: SignalModality, passes: [usize; 5], env: &EnvironmentConfig) -> Vec<TrialOutcome> {
    let spec = ProblemSpec {
        structure: "Z".into(),
        object_description: "Rocket".into(),
        object_color: "Red".into(),
        goal_position: CanvasPoint::new(496, 100),
        goal_orientation: "35 deg".into(),
        instruction: "insert from right".into(),
    };
    let goal = canvas_to_physical(spec.goal_position, env).unwrap();
    (0..42)
        .map(|i| {
            let ok = |k: usize| i < passes[k];
            let mut placed = goal;
            if !ok(2) {
                placed.x += 0.25;
            } else if i % 2 == 0 {
                placed.y += 0.05;
            }
            TrialOutcome {
                spec: spec.clone(),
                modality,
                chosen_description: if ok(0) { "rocket".into() } else { "House".into() },
                chosen_color: if ok(1) { " RED ".into() } else { "Green".into() },
                placed_position: placed,
                instruction_ok: ok(3),
                orientation_ok: ok(4),
                comprehension_time: 2.0,
                completion_time: 30.0,
            }
        })
        .collect()
}

fn success_table() -> Check {
    let env = EnvironmentConfig::default();
    let mut trials = synthetic_trials(SignalModality::VsIntPro, [41, 41, 42, 42, 38], &env);
    trials.extend(synthetic_trials(SignalModality::Nls, [41, 42, 31, 28, 31], &env));
    // through the log format, as real trial logs arrive
    let mut log = Vec::new();
    write_trials_jsonl(&trials, &mut log).map_err(|e| e.to_string())?;
    let trials = read_trials_jsonl(log.as_slice()).map_err(|e| e.to_string())?;
    let table = aggregate_success(&trials, &env).map_err(|e| e.to_string())?;
    let printed = [
        (SignalModality::VsIntPro, [97.6, 97.6, 100.0, 100.0, 90.5], 97.1),
        (SignalModality::Nls, [97.6, 100.0, 73.8, 66.7, 73.8], 82.4),
    ];
    for (m, cells, all) in printed {
        let row = table.row(m).ok_or_else(|| format!("no {m} row"))?;
        for (k, (got, want)) in row.percent.iter().zip(cells).enumerate() {
            ensure((got - want).abs() <= 0.05, || format!("{m} column {k}: {got} vs {want}"))?;
        }
        ensure((row.all - all).abs() <= 0.05, || format!("{m} All: {} vs {all}", row.all))?;
    }
    let csv = table.to_csv();
    Ok(format!("rows reproduced within 0.05: {}", csv.lines().skip(1).collect::<Vec<_>>().join(" | ")))
}

// ---------------------------------------------------------------------------
// 7. Rasterizer

fn raster(svg: &str, w: u32, h: u32) -> RasterImage {
    rasterize(&parse_svg(&SvgSource(svg.into())).unwrap(), w, h).unwrap()
}

fn rasterizer_oracle() -> Check {
    let mut areas = Vec::new();
    for r in [10.0f64, 25.0, 50.0, 100.0] {
        let img = raster(&format!(r##"<svg xmlns="http://www.w3.org/2000/svg" width="256" height="256"><circle cx="128" cy="128" r="{r}" fill="#ffffff"/></svg>"##), 256, 256);
        let count = img.pixels.chunks(4).filter(|p| p[3] > 0).count() as f64;
        let want = std::f64::consts::PI * r * r;
        let rel = (count - want).abs() / want;
        ensure(rel <= 0.02, || format!("r={r}: {count} px vs {want:.1}"))?;
        areas.push(format!("r={r}: {:.2}%", rel * 100.0));
    }

    let full = raster(r##"<svg xmlns="http://www.w3.org/2000/svg" width="64" height="48"><rect x="0" y="0" width="64" height="48" fill="#336699"/></svg>"##, 64, 48);
    ensure(full.pixels.chunks(4).all(|p| p == [0x33, 0x66, 0x99, 0xff]), || "full-viewport rect not exact".into())?;
    let empty = raster(r##"<svg xmlns="http://www.w3.org/2000/svg" width="64" height="48"></svg>"##, 64, 48);
    ensure(empty.pixels.iter().all(|&v| v == 0), || "empty document painted pixels".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    for i in 0..20 {
        let a: f64 = rng.gen_range(-360.0..360.0);
        let b: f64 = rng.gen_range(-360.0..360.0);
        let shape = |t: String| {
            format!(r##"<svg xmlns="http://www.w3.org/2000/svg" width="256" height="256"><polygon points="100,60 190,90 150,180 80,140" fill="#ff8800" transform="{t}"/><circle cx="170" cy="100" r="12" fill="#00ffff" transform="{t}"/></svg>"##)
        };
        let chained = raster(&shape(format!("rotate({a} 128 128) rotate({b} 128 128)")), 256, 256);
        let single = raster(&shape(format!("rotate({} 128 128)", a + b)), 256, 256);
        let diff = chained.pixels.iter().zip(&single.pixels).filter(|(x, y)| x != y).count();
        ensure(diff == 0, || format!("pair {i} ({a}, {b}): {diff} bytes differ"))?;
    }
    Ok(format!("circle area {}; full rect and empty doc exact; 20 rotation pairs with zero diff", areas.join(", ")))
}

// ---------------------------------------------------------------------------
// 8. Service contract over real HTTP

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server(dir: &Path) -> Result<(Server, String), String> {
    let cfg = offline_config(dir);
    let mut child = sigsynth()
        .args(["--config", cfg.to_str().unwrap(), "serve", "--port", "0"])
        .current_dir(dir)
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stderr = child.stderr.take().ok_or("no stderr")?;
    let server = Server(child);
    let mut line = String::new();
    BufReader::new(stderr).read_line(&mut line).map_err(|e| e.to_string())?;
    let base = line
        .split_whitespace()
        .find(|w| w.starts_with("http://"))
        .ok_or_else(|| format!("unexpected server output: {line:?}"))?
        .to_string();
    Ok((server, base))
}

fn service_contract() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_server, base) = start_server(dir.path())?;
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let post = |path: &str, body: serde_json::Value| -> Result<(u16, Vec<u8>), String> {
        let mut res = agent
            .post(&format!("{base}{path}"))
            .header("content-type", "application/json")
            .send(body.to_string())
            .map_err(|e| e.to_string())?;
        Ok((res.status().as_u16(), res.body_mut().read_to_vec().map_err(|e| e.to_string())?))
    };
    let get = |path: &str| -> Result<(u16, Vec<u8>), String> {
        let mut res = agent.get(&format!("{base}{path}")).call().map_err(|e| e.to_string())?;
        Ok((res.status().as_u16(), res.body_mut().read_to_vec().map_err(|e| e.to_string())?))
    };

    let z = serde_json::json!({
        "spec": {
            "structure": "Z",
            "object_description": "Rocket",
            "object_color": "Red",
            "goal_position": { "x": 496, "y": 100 },
            "goal_orientation": "35 deg",
            "instruction": "insert from right"
        },
        "modality": "VSIntPro"
    });
    let (status, body) = post("/v1/signals", z)?;
    ensure(status == 200, || format!("POST /v1/signals -> {status}: {}", String::from_utf8_lossy(&body)))?;
    let bundle: serde_json::Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    let bullets = bundle["bullets"].as_array().map(Vec::len).unwrap_or(0);
    ensure(bullets == 4, || format!("{bullets} bullets"))?;
    let svg = bundle["composite"]["svg"].as_str().ok_or("composite svg missing")?;
    let doc = parse_svg(&SvgSource(svg.into())).map_err(|e| e.to_string())?;
    ensure((doc.width, doc.height) == (1400.0, 700.0), || format!("composite {}x{}", doc.width, doc.height))?;
    let id = bundle["id"].as_str().ok_or("id")?;

    let (status, png) = get(&format!("/v1/signals/{id}/raster.png?target=projector"))?;
    ensure(status == 200, || format!("raster -> {status}"))?;
    let served = decode_png(&png).map_err(|e| e.to_string())?;
    let direct = rasterize(&doc, 1400, 700).map_err(|e| e.to_string())?;
    ensure(served == direct, || "identity-calibrated raster differs from direct rasterization".into())?;

    let (status, _) = get("/v1/signals/0123456789abcdef0123456789abcdef")?;
    ensure(status == 404, || format!("unknown id -> {status}"))?;
    let (status, _) = post(&format!("/v1/signals/{id}/ratings"), serde_json::json!({ "scale": "SM6", "value": -6 }))?;
    ensure((400..500).contains(&status), || format!("rating -6 -> {status}"))?;
    Ok(format!("200 with 4 bullets and 1400x700 composite; identity raster equal; unknown id 404; rating -6 {status}"))
}

fn main() {
    let results = [
        run(1, "robot arm icon listing", Duration::from_secs(1), icon_listing),
        run(2, "goal icon center preservation", Duration::from_secs(10), center_preservation),
        run(3, "test-set determinism", Duration::from_secs(5), testset_determinism),
        run(4, "extraction robustness", Duration::from_secs(120), extraction_robustness),
        run(5, "Fisher exact oracle", Duration::from_secs(30), fisher_oracle),
        run(6, "success-table arithmetic", Duration::from_secs(5), success_table),
        run(7, "rasterizer oracle", Duration::from_secs(60), rasterizer_oracle),
        run(8, "service contract", Duration::from_secs(60), service_contract),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
