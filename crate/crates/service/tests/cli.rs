mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::root;
use sigsynth_core::svg::{decode_png, parse_svg, rasterize, SvgSource};

fn sigsynth(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigsynth")).args(args).current_dir(cwd).output().unwrap()
}

/// A config in a scratch dir pointing at the shipped templates and fixtures.
fn scratch_config(dir: &Path) -> std::path::PathBuf {
    let r = root();
    let cfg = format!(
        "template_dir = {:?}\nfixture_path = {:?}\ntable = {:?}\nstore_path = \"store.redb\"\nbackend = \"fixture\"\n",
        r.join("templates/v1"),
        r.join("fixtures/completions.jsonl"),
        r.join("data/testset.csv"),
    );
    let path = dir.join("sigsynth.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

const Z_ARGS: [&str; 13] = [
    "synth", "--structure", "Z", "--object", "Rocket", "--color", "Red", "--goal", "496,100", "--orientation", "35 deg",
    "--instruction", "insert from right",
];

#[test]
fn synth_writes_composite_and_prints_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scratch_config(dir.path());
    let mut args = vec!["--config", cfg.to_str().unwrap()];
    args.extend(Z_ARGS);
    args.extend(["--out", "z.svg", "--persist"]);
    let out = sigsynth(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(bundle["bullets"].as_array().unwrap().len(), 4);
    let svg = std::fs::read_to_string(dir.path().join("z.svg")).unwrap();
    assert_eq!(svg, bundle["composite"]["svg"].as_str().unwrap());

    let export = sigsynth(&["--config", cfg.to_str().unwrap(), "export"], dir.path());
    assert!(export.status.success());
    let dump: serde_json::Value = serde_json::from_slice(&export.stdout).unwrap();
    assert_eq!(dump["bundles"][0]["id"], bundle["id"]);
}

#[test]
fn synth_with_missing_fixture_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scratch_config(dir.path());
    let mut args = vec!["--config", cfg.to_str().unwrap()];
    args.extend(Z_ARGS);
    args.extend(["--temperature", "0.3"]);
    let out = sigsynth(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fixture"));
}

#[test]
fn testset_replays_every_modality() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scratch_config(dir.path());
    let out = sigsynth(&["--config", cfg.to_str().unwrap(), "testset", "--modality", "all", "--out-dir", "svgs"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains("\tok\t")).count(), 18);
    assert_eq!(std::fs::read_dir(dir.path().join("svgs")).unwrap().count(), 18);
    assert!(stdout.contains("VSIntPro\tR\tok\tgoal [612, 414] orientation -45"));
}

#[test]
fn render_identity_projector_matches_rasterizer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scratch_config(dir.path());
    let mut args = vec!["--config", cfg.to_str().unwrap()];
    args.extend(Z_ARGS);
    args.extend(["--out", "z.svg"]);
    assert!(sigsynth(&args, dir.path()).status.success());
    let out = sigsynth(&["--config", cfg.to_str().unwrap(), "render", "--input", "z.svg", "--out", "z.png"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = decode_png(&std::fs::read(dir.path().join("z.png")).unwrap()).unwrap();
    let doc = parse_svg(&SvgSource(std::fs::read_to_string(dir.path().join("z.svg")).unwrap())).unwrap();
    assert_eq!(img, rasterize(&doc, 1400, 700).unwrap());

    std::fs::write(dir.path().join("cal.txt"), "# shift\n1 0 25\n0 1 0\n0 0 1\ntarget projector 800 400\n").unwrap();
    let out = sigsynth(&["render", "--input", "z.svg", "--calibration", "cal.txt", "--out", "p.png"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = decode_png(&std::fs::read(dir.path().join("p.png")).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (800, 400));
}

#[test]
fn record_fixtures_fills_only_missing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let r = root();
    let table = r.join("data/z_problem.csv");
    let args = ["record-fixtures", "--source", "scripted", "--table", table.to_str().unwrap(), "--fixtures", "f.jsonl", "--modality", "VSM"];
    let cfg = scratch_config(dir.path());
    let mut full = vec!["--config", cfg.to_str().unwrap()];
    full.extend(args);
    let first = sigsynth(&full, dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stderr).contains("recorded 4 new responses"));
    let second = sigsynth(&full, dir.path());
    assert!(String::from_utf8_lossy(&second.stderr).contains("recorded 0 new responses"));
    assert_eq!(std::fs::read_to_string(dir.path().join("f.jsonl")).unwrap().lines().count(), 4);
}

#[test]
fn fisher_and_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = sigsynth(&["fisher", "5", "5", "5", "5"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("p_two_sided=1"));
    let out = sigsynth(&["synth", "--backend", "carrier-pigeon"], dir.path());
    assert!(!out.status.success());
    let out = sigsynth(&["testset", "--backend", "fixture:nope.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
