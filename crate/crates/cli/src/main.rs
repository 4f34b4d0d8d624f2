use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use semilocal::config::{PredictorKind, RunConfig, Smoothing};
use semilocal::eval::{associate_tracks, evaluate, plot_records, EvalInputs};
use semilocal::io::{self, PredLine, RecordingMetadata, RecordingReader};
use semilocal::pipeline::{self, StreamOptions};
use semilocal::scenario::{self, Preset, ScenarioSpec};
use semilocal::tracking::{TrackState, Tracker};
use semilocal::AlertEvent;

#[derive(Parser)]
#[command(name = "semilocal", version, about = "Egocentric pedestrian collision warning")]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording (.rec) and its ground truth (.truth).
    Simulate(SimulateArgs),
    /// Process a recording; write alerts (.alerts) and predictions (.pred).
    Run(RunArgs),
    /// Score alerts and predictions against ground truth (.metrics).
    Eval(EvalArgs),
    /// Replay a recording on a wall clock and report per-frame latency.
    Stream(StreamArgs),
    /// Summarize a recording.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// easy, hard, uncontrolled or custom.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds of simulated time.
    #[arg(long)]
    duration: Option<f64>,
    /// Scenario description (JSON); replaces the preset.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Output prefix; writes PREFIX.rec and PREFIX.truth.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    /// Disable every sensor noise source.
    #[arg(long)]
    noiseless: bool,
    #[arg(long)]
    depth_sigma_near: Option<f64>,
    #[arg(long)]
    depth_sigma_far: Option<f64>,
    #[arg(long)]
    pixel_jitter: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    confidence_sigma: Option<f64>,
}

#[derive(Args)]
struct PipelineFlags {
    #[arg(long, value_parser = parse_smoothing)]
    smoothing: Option<Smoothing>,
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorKind>,
    /// Safety radius (m).
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "FILE")]
    rec: Option<PathBuf>,
    /// Output prefix; writes PREFIX.alerts and PREFIX.pred.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    alerts: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    truth: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pred: Option<PathBuf>,
    /// Latency report from `stream`.
    #[arg(long, value_name = "FILE")]
    latency: Option<PathBuf>,
    /// Also write plot-ready per-track series (JSON lines).
    #[arg(long, value_name = "FILE")]
    plot: Option<PathBuf>,
    /// Metrics file to write.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long, value_name = "FILE")]
    rec: Option<PathBuf>,
    /// Playback speed relative to the native frame rate; 0 = as fast as possible.
    #[arg(long)]
    rate: Option<f64>,
    /// Per-frame processing budget (ms) checked against the p99 latency.
    #[arg(long)]
    budget_ms: Option<f64>,
    /// Artificial extra processing time per frame (ms).
    #[arg(long)]
    slowdown_ms: Option<f64>,
    /// Output prefix; writes PREFIX.alerts, PREFIX.pred and PREFIX.latency.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long, value_name = "FILE")]
    rec: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: scenario::ScenarioError| e.to_string())
}

fn parse_smoothing(s: &str) -> Result<Smoothing, String> {
    match s {
        "off" => Ok(Smoothing::Off),
        "causal" => Ok(Smoothing::Causal),
        "batch" => Ok(Smoothing::Batch),
        _ => Err(format!("unknown smoothing {s:?} (expected off, causal or batch)")),
    }
}

fn parse_predictor(s: &str) -> Result<PredictorKind, String> {
    match s {
        "cv" => Ok(PredictorKind::Cv),
        "saturating-cv" => Ok(PredictorKind::SaturatingCv),
        _ => Err(format!("unknown predictor {s:?} (expected cv or saturating-cv)")),
    }
}

enum Failure {
    Usage(String),
    Input(anyhow::Error),
    Budget(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Budget(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}\n\nFor more information, try '--help'."),
                Failure::Input(e) => eprintln!("error: {e:#}"),
                Failure::Budget(m) => eprintln!("budget violated: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, Failure> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Input(e.into()))?,
        None => RunConfig::default(),
    };
    for kv in sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(cfg)
}

/// Re-checks the configuration after flag overrides.
fn checked(cfg: RunConfig) -> Result<RunConfig, Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn required(flag: &str, v: Option<PathBuf>) -> Result<PathBuf, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing --{flag} (flag or config key)")))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes every output or none: on failure, files already written by this
/// call are removed again.
fn write_outputs(outputs: Vec<(PathBuf, Box<dyn FnOnce(&Path) -> io::Result<()> + '_>)>) -> anyhow::Result<()> {
    let mut done: Vec<PathBuf> = Vec::new();
    for (path, write) in outputs {
        if let Err(e) = write(&path) {
            for p in &done {
                let _ = std::fs::remove_file(p);
            }
            return Err(anyhow::Error::new(e).context(format!("writing {}", path.display())));
        }
        done.push(path);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let cfg = load_config(cli.config.as_deref(), &cli.set)?;
    match cli.command {
        Command::Simulate(a) => simulate(cfg, a),
        Command::Run(a) => run(cfg, a),
        Command::Eval(a) => eval(cfg, a),
        Command::Stream(a) => stream(cfg, a),
        Command::Inspect(a) => inspect(cfg, a),
    }
}

fn simulate(mut cfg: RunConfig, a: SimulateArgs) -> Outcome {
    if let Some(v) = a.preset {
        cfg.preset = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.duration.is_some() {
        cfg.duration = a.duration;
    }
    if a.spec.is_some() {
        cfg.spec = a.spec;
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    cfg.noiseless |= a.noiseless;
    for (slot, v) in [
        (&mut cfg.depth_sigma_near, a.depth_sigma_near),
        (&mut cfg.depth_sigma_far, a.depth_sigma_far),
        (&mut cfg.pixel_jitter, a.pixel_jitter),
        (&mut cfg.dropout, a.dropout),
        (&mut cfg.confidence_sigma, a.confidence_sigma),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    let cfg = checked(cfg)?;

    let spec = match &cfg.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut spec: ScenarioSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if a.seed.is_some() {
                spec.seed = cfg.seed;
            }
            if let Some(d) = a.duration {
                spec.duration = d;
            }
            spec.noise = cfg.noise(&spec.noise);
            spec.validate().with_context(|| format!("invalid scenario {}", path.display()))?;
            spec
        }
        None => cfg.scenario().map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let sc = scenario::generate(&spec).context("generating scenario")?;
    let prefix = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}_seed{}", spec.preset.as_str(), spec.seed)));
    let rec = with_ext(&prefix, "rec");
    let truth = with_ext(&prefix, "truth");
    let meta: RecordingMetadata = sc.header.metadata.clone();
    write_outputs(vec![
        (rec.clone(), Box::new(|p: &Path| io::write_recording(p, &sc.header, &sc.frames))),
        (truth.clone(), Box::new(|p: &Path| io::write_truth(p, &meta, &sc.truth))),
    ])?;
    println!(
        "simulated {} seed {}: {} frames, {} pedestrians, {} collision intervals",
        spec.preset.as_str(),
        spec.seed,
        sc.frames.len(),
        sc.truth.pedestrians.len(),
        sc.truth.intervals.len()
    );
    println!("wrote {} and {}", rec.display(), truth.display());
    Ok(())
}

fn apply_pipeline_flags(cfg: &mut RunConfig, f: &PipelineFlags) {
    if let Some(v) = f.smoothing {
        cfg.smoothing = v;
    }
    if let Some(v) = f.predictor {
        cfg.predictor = v;
    }
    if let Some(v) = f.radius {
        cfg.radius = v;
    }
}

fn read_rec(path: &Path) -> anyhow::Result<(io::RecordingHeader, Vec<semilocal::FrameRecord>)> {
    io::read_recording(path).with_context(|| format!("reading {}", path.display()))
}

fn default_prefix(rec: &Path) -> PathBuf {
    rec.with_extension("")
}

fn run(mut cfg: RunConfig, a: RunArgs) -> Outcome {
    if a.rec.is_some() {
        cfg.rec = a.rec;
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    apply_pipeline_flags(&mut cfg, &a.pipeline);
    let cfg = checked(cfg)?;
    let rec = required("rec", cfg.rec.clone())?;
    let (header, frames) = read_rec(&rec)?;
    let pipeline = cfg.build_pipeline(&header).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = pipeline::run(pipeline, &frames).context("processing recording")?;
    let prefix = cfg.out.clone().unwrap_or_else(|| default_prefix(&rec));
    let alerts = with_ext(&prefix, "alerts");
    let pred = with_ext(&prefix, "pred");
    let (ah, ph) = (cfg.alerts_header(), cfg.pred_header());
    write_outputs(vec![
        (alerts.clone(), Box::new(|p: &Path| io::write_alerts(p, &ah, &out.events))),
        (pred.clone(), Box::new(|p: &Path| io::write_pred(p, &ph, &out.dump))),
    ])?;
    println!(
        "{} frames, {} predictions, {} alert events",
        frames.len(),
        out.predictions,
        out.events.len()
    );
    println!("wrote {} and {}", alerts.display(), pred.display());
    Ok(())
}

fn eval(mut cfg: RunConfig, a: EvalArgs) -> Outcome {
    for (slot, v) in [
        (&mut cfg.alerts, a.alerts),
        (&mut cfg.truth, a.truth),
        (&mut cfg.pred, a.pred),
        (&mut cfg.latency, a.latency),
        (&mut cfg.plot, a.plot),
        (&mut cfg.out, a.out),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    let mut cfg = checked(cfg)?;
    let alerts_path = required("alerts", cfg.alerts.clone())?;
    let truth_path = required("truth", cfg.truth.clone())?;
    let pred_path = required("pred", cfg.pred.clone())?;
    let (ah, events) = io::read_alerts(&alerts_path).with_context(|| format!("reading {}", alerts_path.display()))?;
    let (_, truth) = io::read_truth(&truth_path).with_context(|| format!("reading {}", truth_path.display()))?;
    let (ph, pred) = io::read_pred(&pred_path).with_context(|| format!("reading {}", pred_path.display()))?;
    let latency = match &cfg.latency {
        Some(p) => Some(
            io::read_latency(p)
                .with_context(|| format!("reading {}", p.display()))?
                .1
                .iter()
                .map(|s| s.ms)
                .collect::<Vec<f64>>(),
        ),
        None => None,
    };

    // the predictor that produced the dump drives the equivalence check
    cfg.observe_window = ph.observe_window;
    cfg.horizon = ph.horizon;
    cfg.predictor = parse_predictor(&ph.predictor).map_err(|e| Failure::Input(anyhow::anyhow!(e)))?;
    cfg.smoothing = parse_smoothing(&ph.smoothing).map_err(|e| Failure::Input(anyhow::anyhow!(e)))?;
    let predictor = cfg.build_predictor().context("predictor from prediction header")?;

    let report = evaluate(
        &EvalInputs {
            events: &events,
            horizon_seconds: ah.horizon_seconds,
            pred: &pred,
            step: ph.step,
            truth: &truth,
            latency_ms: latency.as_deref(),
            match_tolerance: cfg.match_tolerance,
            assoc_gate: cfg.assoc_gate,
        },
        predictor.as_ref(),
        &cfg.smoother(),
    );
    let metrics = cfg.out.clone().unwrap_or_else(|| alerts_path.with_extension("metrics"));
    let mut outputs: Vec<(PathBuf, Box<dyn FnOnce(&Path) -> io::Result<()>>)> =
        vec![(metrics.clone(), Box::new(|p: &Path| io::write_metrics(p, &report)))];
    if let Some(plot) = cfg.plot.clone() {
        let tracks: Vec<&io::TrackRecord> = pred
            .iter()
            .filter_map(|l| match l {
                PredLine::Track(t) => Some(t),
                _ => None,
            })
            .collect();
        let map = associate_tracks(&tracks, &truth, cfg.assoc_gate);
        let records = plot_records(&pred, &truth, &map);
        outputs.push((plot, Box::new(move |p: &Path| io::write_json_lines(p, &records))));
    }
    write_outputs(outputs)?;

    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "precision {}  recall {}  f1 {}",
        show(report.precision),
        show(report.recall),
        show(report.f1)
    );
    println!("ade {} m  fde {} m", show(report.ade), show(report.fde));
    println!(
        "equivalence residual max {} m over {} instants",
        report.equivalence_residual_max.map_or("n/a".into(), |x| format!("{x:.3e}")),
        report.counts.equivalence_instants
    );
    if report.latency_p99_ms.is_some() {
        println!(
            "latency p50 {} ms  p99 {} ms",
            show(report.latency_p50_ms),
            show(report.latency_p99_ms)
        );
    }
    println!("wrote {}", metrics.display());
    Ok(())
}

fn describe(e: &AlertEvent) -> String {
    let mut s = format!("t={:8.3}s  track {:>4}  {:<8}", e.t, e.track_id, e.kind.as_str());
    if let Some(tier) = e.tier {
        s.push_str(&format!(" {:<6}", tier.as_str()));
    }
    if let Some(ttc) = e.ttc {
        s.push_str(&format!(" ttc {ttc:.2}s"));
    }
    if let Some(d) = e.min_distance {
        s.push_str(&format!(" min {d:.2}m"));
    }
    s
}

fn stream(mut cfg: RunConfig, a: StreamArgs) -> Outcome {
    if a.rec.is_some() {
        cfg.rec = a.rec;
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    if let Some(v) = a.rate {
        cfg.rate = v;
    }
    if a.budget_ms.is_some() {
        cfg.budget_ms = a.budget_ms;
    }
    if let Some(v) = a.slowdown_ms {
        cfg.slowdown_ms = v;
    }
    apply_pipeline_flags(&mut cfg, &a.pipeline);
    let cfg = checked(cfg)?;
    let rec = required("rec", cfg.rec.clone())?;
    let (header, frames) = read_rec(&rec)?;
    let pipeline = cfg.build_pipeline(&header).map_err(|e| Failure::Usage(e.to_string()))?;
    let opts = StreamOptions {
        rate: cfg.rate,
        slowdown: Duration::from_secs_f64(cfg.slowdown_ms / 1e3),
    };
    let out = pipeline::stream(pipeline, &frames, opts, |e| println!("{}", describe(e)))
        .context("processing recording")?;

    let prefix = cfg.out.clone().unwrap_or_else(|| default_prefix(&rec));
    let alerts = with_ext(&prefix, "alerts");
    let pred = with_ext(&prefix, "pred");
    let latency = with_ext(&prefix, "latency");
    let (ah, ph) = (cfg.alerts_header(), cfg.pred_header());
    write_outputs(vec![
        (alerts.clone(), Box::new(|p: &Path| io::write_alerts(p, &ah, &out.run.events))),
        (pred.clone(), Box::new(|p: &Path| io::write_pred(p, &ph, &out.run.dump))),
        (latency.clone(), Box::new(|p: &Path| io::write_latency(p, cfg.rate, &out.latency))),
    ])?;

    let ms: Vec<f64> = out.latency.iter().map(|s| s.ms).collect();
    let stats = semilocal::eval::latency_stats(&ms).ok();
    match stats {
        Some((p50, p99)) => println!(
            "{} frames  latency p50 {p50:.3} ms  p99 {p99:.3} ms  max queue depth {}",
            ms.len(),
            out.max_queue_depth
        ),
        None => println!("0 frames"),
    }
    println!("wrote {}, {} and {}", alerts.display(), pred.display(), latency.display());
    if let (Some(budget), Some((_, p99))) = (cfg.budget_ms, stats) {
        if p99 > budget {
            let over = ms.iter().filter(|&&m| m > budget).count();
            return Err(Failure::Budget(format!(
                "p99 {p99:.3} ms exceeds {budget} ms ({over} of {} frames over budget)",
                ms.len()
            )));
        }
    }
    Ok(())
}

fn inspect(mut cfg: RunConfig, a: InspectArgs) -> Outcome {
    if a.rec.is_some() {
        cfg.rec = a.rec;
    }
    let cfg = checked(cfg)?;
    let rec = required("rec", cfg.rec.clone())?;
    let file = std::fs::File::open(&rec).with_context(|| format!("opening {}", rec.display()))?;
    let mut reader = RecordingReader::new(std::io::BufReader::new(file)).with_context(|| format!("reading {}", rec.display()))?;
    let header = reader.header().clone();
    let mut tracker = Tracker::new(cfg.tracker(), header.intrinsics);
    let mut confirmed = BTreeSet::new();
    let (mut frames, mut detections, mut first_t, mut last_t) = (0u64, 0usize, None, None);
    while let Some(f) = reader.next_frame().with_context(|| format!("reading {}", rec.display()))? {
        frames += 1;
        detections += f.detections.len();
        first_t.get_or_insert(f.t);
        last_t = Some(f.t);
        tracker.associate(&f).context("tracking")?;
        confirmed.extend(
            tracker
                .tracks()
                .iter()
                .filter(|t| t.state() == TrackState::Confirmed)
                .map(|t| t.id()),
        );
    }
    let m = &header.metadata;
    let k = &header.intrinsics;
    println!("file              {}", rec.display());
    println!("format version    {}", header.format_version);
    println!("preset            {}", m.preset);
    println!("seed              {}", m.seed);
    println!("generator         {}", m.generator_version);
    println!(
        "camera            {}x{} fx {} fy {} cx {} cy {}",
        k.width, k.height, k.fx, k.fy, k.cx, k.cy
    );
    println!("native fps        {}", header.native_fps);
    println!("frames            {frames}");
    println!("duration          {:.3} s", frames as f64 / header.native_fps);
    if let (Some(a), Some(b)) = (first_t, last_t) {
        println!("time span         {a:.3} .. {b:.3} s");
    }
    println!("detections        {detections}");
    println!("tracks (estimate) {}", confirmed.len());
    Ok(())
}
