use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use sigsynth_core::composer::{Calibration, DisplayTarget};
use sigsynth_core::domain::{CanvasPoint, ProblemSpec, SignalModality};
use sigsynth_core::gateway::{CompletionBackend, FixtureStore};
use sigsynth_core::metrics::{aggregate_success, fisher_exact, read_trials_jsonl, timing_stats, ContingencyTable};
use sigsynth_core::pipeline::SignalBundle;
use sigsynth_core::scripted::ScriptedBackend;
use sigsynth_core::svg::{self, SvgSource};
use sigsynth_service::api::{render_bundle, router, AppState};
use sigsynth_service::backend::{build_backend, build_synthesizer, live_backend, FillingBackend};
use sigsynth_service::config::{BackendSpec, ServiceConfig};
use sigsynth_service::store::SignalStore;
use sigsynth_service::table::{load_table, run_testset, shuffled, RowOutcome};
use sigsynth_service::ServiceError;

const DEFAULT_CONFIG: &str = "sigsynth.toml";

#[derive(Parser)]
#[command(name = "sigsynth", version, about = "Synthesize natural-language and visual robot instruction signals")]
struct Cli {
    /// Service config (TOML). Defaults to ./sigsynth.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one signal and print the bundle as JSON.
    Synth(SynthArgs),
    /// Map an SVG (or a stored signal) onto a display and write a PNG.
    Render(RenderArgs),
    /// Run every row of a test-set table.
    Testset(TestsetArgs),
    /// Record model responses for test-set tables into the fixture file.
    RecordFixtures(RecordArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Dump the signal store as JSON.
    Export(ExportArgs),
    /// Success and timing tables from a trial log.
    Metrics(MetricsArgs),
    /// Two-sided Fisher exact test on a 2x2 table [[a, b], [c, d]].
    Fisher { a: u64, b: u64, c: u64, d: u64 },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    structure: String,
    #[arg(long)]
    object: String,
    #[arg(long)]
    color: String,
    /// Goal cell as X,Y.
    #[arg(long, value_parser = parse_point)]
    goal: CanvasPoint,
    #[arg(long)]
    orientation: String,
    #[arg(long)]
    instruction: String,
    #[arg(long, default_value = "VSIntPro")]
    modality: SignalModality,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// live | scripted | fixture | fixture:PATH (default from config).
    #[arg(long)]
    backend: Option<BackendSpec>,
    /// Composite SVG output; NLS writes the text card.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also persist the bundle in the configured store.
    #[arg(long)]
    persist: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// SVG file to render.
    #[arg(long, conflicts_with = "signal")]
    input: Option<PathBuf>,
    /// Stored signal id to render.
    #[arg(long)]
    signal: Option<String>,
    /// Calibration file; identity when absent.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// monitor | projector, for identity calibration.
    #[arg(long, default_value = "projector")]
    target: String,
    /// Display size WxH for identity calibration; canvas size by default.
    #[arg(long, value_parser = parse_size)]
    size: Option<(u32, u32)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TestsetArgs {
    /// Table CSV (default from config).
    #[arg(long)]
    table: Option<PathBuf>,
    /// A modality or "all".
    #[arg(long, default_value = "VSIntPro")]
    modality: String,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long)]
    backend: Option<BackendSpec>,
    /// Write each composite SVG here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Shuffle presentation order with this seed.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    /// Print the full report as JSON instead of one line per row.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RecordArgs {
    /// Table CSVs to record; repeatable (default from config).
    #[arg(long)]
    table: Vec<PathBuf>,
    /// A modality or "all".
    #[arg(long, default_value = "all")]
    modality: String,
    /// Comma-separated temperatures.
    #[arg(long, value_delimiter = ',', default_value = "0.0")]
    temperatures: Vec<f64>,
    /// Where responses come from: live or scripted.
    #[arg(long, default_value = "live")]
    source: String,
    /// Fixture file (default from config).
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    backend: Option<BackendSpec>,
}

#[derive(Args)]
struct ExportArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Line-delimited JSON trial log.
    #[arg(long)]
    trials: PathBuf,
}

fn parse_point(s: &str) -> Result<CanvasPoint, String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let p = |v: &str| v.trim().parse::<i32>().map_err(|e| format!("{v:?}: {e}"));
    Ok(CanvasPoint::new(p(x)?, p(y)?))
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let p = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(w)?, p(h)?))
}

fn parse_modalities(s: &str) -> Result<Vec<SignalModality>, ServiceError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(SignalModality::ALL.to_vec());
    }
    Ok(vec![s.parse()?])
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, ServiceError> {
    match path {
        Some(p) => ServiceConfig::load(p),
        None if Path::new(DEFAULT_CONFIG).is_file() => ServiceConfig::load(DEFAULT_CONFIG),
        None => Ok(ServiceConfig::default()),
    }
}

fn backend_for(cfg: &ServiceConfig, flag: Option<&BackendSpec>) -> Result<(BackendSpec, Arc<dyn CompletionBackend>), ServiceError> {
    let spec = match flag {
        Some(s) => s.clone(),
        None => cfg.backend_spec()?,
    };
    let backend = build_backend(&spec, cfg)?;
    Ok((spec, backend))
}

fn backend_label(spec: &BackendSpec, cfg: &ServiceConfig) -> String {
    match spec {
        BackendSpec::Live => "live".into(),
        BackendSpec::Scripted => "scripted".into(),
        BackendSpec::Fixture(p) => format!("fixture:{}", p.as_deref().unwrap_or(&cfg.fixture_path).display()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn bundle_svg(bundle: &SignalBundle, cfg: &ServiceConfig) -> Result<Option<String>, ServiceError> {
    if let Some(c) = &bundle.composite {
        return Ok(Some(c.to_svg_string()));
    }
    if bundle.bullets.is_empty() {
        return Ok(None);
    }
    let (doc, _) = sigsynth_core::composer::nls_card(&bundle.bullets, &cfg.environment_config()?)?;
    Ok(Some(svg::serialize(&doc).0))
}

fn cmd_synth(cfg: &ServiceConfig, a: SynthArgs) -> Result<(), ServiceError> {
    let (_, backend) = backend_for(cfg, a.backend.as_ref())?;
    let synth = build_synthesizer(cfg, backend)?;
    let spec = ProblemSpec {
        structure: a.structure,
        object_description: a.object,
        object_color: a.color,
        goal_position: a.goal,
        goal_orientation: a.orientation,
        instruction: a.instruction,
    };
    let bundle = synth.synthesize(spec, a.modality, a.temperature)?;
    if a.persist {
        SignalStore::open(&cfg.store_path)?.put_bundle(&bundle)?;
    }
    if let Some(out) = &a.out {
        if let Some(text) = bundle_svg(&bundle, cfg)? {
            write_file(out, text.as_bytes())?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&bundle).expect("bundle serializes"));
    Ok(())
}

fn cmd_render(cfg: &ServiceConfig, a: RenderArgs) -> Result<(), ServiceError> {
    let env = cfg.environment_config()?;
    let cal = match &a.calibration {
        Some(p) => Calibration::load(p)?,
        None => {
            let (width, height) = a.size.unwrap_or((env.canvas_width, env.canvas_height));
            let target = match a.target.as_str() {
                "monitor" => DisplayTarget::Monitor { width, height },
                "projector" => DisplayTarget::Projector { width, height },
                other => return Err(ServiceError::Config(format!("target {other:?}: expected monitor or projector"))),
            };
            Calibration::identity(target)
        }
    };
    let frame = match (&a.input, &a.signal) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            let doc = svg::parse_svg(&SvgSource(text))?;
            sigsynth_core::composer::map_doc_to_display(&doc, &cal)?
        }
        (None, Some(id)) => {
            let bundle = SignalStore::open(&cfg.store_path)?
                .get_bundle(id)?
                .ok_or_else(|| ServiceError::Store(format!("signal {id} not found")))?;
            render_bundle(&bundle, &env, &cal)?
        }
        (None, None) => return Err(ServiceError::Config("render needs --input or --signal".into())),
    };
    write_file(&a.out, &frame.image.to_png()?)?;
    eprintln!("wrote {} ({}x{})", a.out.display(), frame.image.width, frame.image.height);
    Ok(())
}

fn cmd_testset(cfg: &ServiceConfig, a: TestsetArgs) -> Result<bool, ServiceError> {
    let mut rows = load_table(a.table.as_deref().unwrap_or(&cfg.table))?;
    if let Some(seed) = a.shuffle_seed {
        rows = shuffled(&rows, seed);
    }
    let (_, backend) = backend_for(cfg, a.backend.as_ref())?;
    let synth = build_synthesizer(cfg, backend)?;
    let mut all_ok = true;
    let mut reports = Vec::new();
    for modality in parse_modalities(&a.modality)? {
        let report = run_testset(&synth, &rows, modality, a.temperature);
        all_ok &= report.failures() == 0;
        for row in &report.rows {
            match &row.outcome {
                RowOutcome::Ok { bundle } => {
                    if let Some(dir) = &a.out_dir {
                        if let Some(text) = bundle_svg(bundle, cfg)? {
                            let name = format!("{:02}_{}_{}.svg", row.index, row.structure, modality);
                            write_file(&dir.join(name), text.as_bytes())?;
                        }
                    }
                    if !a.json {
                        let plan = bundle
                            .plan
                            .as_ref()
                            .map(|p| format!("goal {} orientation {}", p.goal, p.orientation_deg))
                            .unwrap_or_else(|| format!("{} bullets", bundle.bullets.len()));
                        println!("{modality}\t{}\tok\t{plan}\t{}", row.structure, bundle.id);
                    }
                }
                RowOutcome::Failed { error, .. } => {
                    if !a.json {
                        println!("{modality}\t{}\tFAILED\t{error}", row.structure);
                    }
                }
            }
        }
        reports.push(report);
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&reports).expect("report serializes"));
    }
    Ok(all_ok)
}

fn cmd_record(cfg: &ServiceConfig, a: RecordArgs) -> Result<bool, ServiceError> {
    let path = a.fixtures.clone().unwrap_or_else(|| cfg.fixture_path.clone());
    let store = Arc::new(FixtureStore::open(&path)?);
    let inner: Arc<dyn CompletionBackend> = match a.source.as_str() {
        "live" => Arc::new(live_backend(cfg)),
        "scripted" => Arc::new(ScriptedBackend::new(cfg.environment_config()?)),
        other => return Err(ServiceError::Config(format!("source {other:?}: expected live or scripted"))),
    };
    let filling = Arc::new(FillingBackend::new(inner, store.clone()));
    let synth = build_synthesizer(cfg, filling.clone())?;
    let tables = if a.table.is_empty() { vec![cfg.table.clone()] } else { a.table.clone() };
    let mut failures = 0;
    for table in &tables {
        let rows = load_table(table)?;
        for modality in parse_modalities(&a.modality)? {
            for &t in &a.temperatures {
                for (spec, result) in rows.iter().zip(synth.run_test_set(&rows, modality, t)) {
                    if let Err(e) = result {
                        failures += 1;
                        eprintln!("{} {modality} t={t}: {e}", spec.structure);
                    }
                }
            }
        }
    }
    store.compact()?;
    eprintln!("recorded {} new responses; {} entries in {}", filling.recorded(), store.len(), path.display());
    Ok(failures == 0)
}

fn cmd_serve(cfg: &ServiceConfig, a: ServeArgs) -> Result<(), ServiceError> {
    let (spec, backend) = backend_for(cfg, a.backend.as_ref())?;
    let synth = build_synthesizer(cfg, backend)?;
    let projector = match &cfg.calibration {
        Some(p) => Calibration::load(p)?,
        None => AppState::identity_projector(synth.env()),
    };
    let table = if cfg.table.is_file() { load_table(&cfg.table)? } else { Vec::new() };
    let state = AppState {
        synth: Arc::new(synth),
        store: Arc::new(SignalStore::open(&cfg.store_path)?),
        table: Arc::new(table),
        projector,
        backend: backend_label(&spec, cfg),
        ui_dir: Some(cfg.ui_dir.clone()),
    };
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| ServiceError::Config(format!("address: {e}")))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        // the bound address, so callers passing port 0 can find the server
        eprintln!("listening on http://{} ({})", listener.local_addr()?, state.backend);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}

fn cmd_export(cfg: &ServiceConfig, a: ExportArgs) -> Result<(), ServiceError> {
    let export = SignalStore::open(&cfg.store_path)?.export()?;
    let text = serde_json::to_string_pretty(&export).expect("export serializes");
    match &a.out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_metrics(cfg: &ServiceConfig, a: MetricsArgs) -> Result<(), ServiceError> {
    let f = std::fs::File::open(&a.trials)?;
    let trials = read_trials_jsonl(std::io::BufReader::new(f))?;
    let table = aggregate_success(&trials, &cfg.environment_config()?)?;
    print!("{}", table.to_csv());
    println!();
    println!("Modality,Comprehension,Completion");
    for row in timing_stats(&trials)? {
        println!("{},{},{}", row.modality, row.comprehension, row.completion);
        for w in &row.warnings {
            eprintln!("warning: {} {w}", row.modality);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, ServiceError> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => cmd_synth(&cfg, a).map(|_| true),
        Command::Render(a) => cmd_render(&cfg, a).map(|_| true),
        Command::Testset(a) => cmd_testset(&cfg, a),
        Command::RecordFixtures(a) => cmd_record(&cfg, a),
        Command::Serve(a) => cmd_serve(&cfg, a).map(|_| true),
        Command::Export(a) => cmd_export(&cfg, a).map(|_| true),
        Command::Metrics(a) => cmd_metrics(&cfg, a).map(|_| true),
        Command::Fisher { a, b, c, d } => {
            let r = fisher_exact(ContingencyTable::new(a, b, c, d))?;
            println!("odds_ratio={} p_two_sided={} degenerate={}", r.odds_ratio, r.p_two_sided, r.degenerate);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
