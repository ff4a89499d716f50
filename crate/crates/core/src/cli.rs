//! Command-line front end: `gen`, `train`, `sample`, `eval`, `ablate`, `plot`.
//!
//! Every command that writes an artifact also writes `<artifact>.manifest.json`
//! holding the argument vector, the effective configuration, the seed, the
//! crate version, a SHA-256 fingerprint of the input dataset and timestamps.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{export, gen_dataset, ingest, write_jsonl, Condition, ConditionMode, ObservationSet, SemicircleConfig};
use crate::error::Error;
use crate::evaluation::{aggregate, evaluate_model, evaluate_model_on, run_ablation, EvalProtocol, EvalReport};
use crate::sampling::SurrogateModel;
use crate::training::{train_with, TrainFailure, TrainingConfig, Variant};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
    #[error(transparent)]
    Train(#[from] TrainFailure),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        let lib = match self {
            CliError::Usage(_) => return EXIT_USAGE,
            CliError::Run(e) => e,
            CliError::Train(f) => &f.source,
        };
        match lib {
            e if e.is_numeric() => EXIT_NUMERIC,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "clot", version, about = "Conditional Lagrangian transport surrogates between sparse anchor distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic observation file.
    Gen(GenArgs),
    /// Train a transport bundle and write a checkpoint.
    Train(TrainArgs),
    /// Draw samples from a checkpoint at interpolation times.
    Sample(SampleArgs),
    /// Score checkpoints against truth samples.
    Eval(EvalArgs),
    /// Train and score the four Lagrangian variants over several seeds.
    Ablate(AblateArgs),
    /// Render anchor samples and model trajectories as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Semicircle,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = Preset::Semicircle)]
    preset: Preset,
    /// Samples per condition and anchor time.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Comma-separated anchor times.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    times: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    r_nom: Option<f64>,
    #[arg(long)]
    sigma_rad: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// TOML file with `TrainingConfig` keys; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// One of K_I, K_theta, K_I-U, K_theta-U.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_outer: Option<usize>,
    #[arg(long)]
    n_inner: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Treat continuous-condition records as matched by `key`.
    #[arg(long)]
    matched: bool,
    /// Trace path; defaults to `<out>.trace.jsonl`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    /// Normalized times (comma-separated).
    #[arg(long, value_delimiter = ',', num_args = 1.., required_unless_present = "lambda", conflicts_with = "lambda")]
    t: Vec<f64>,
    /// Raw hyperparameter values, mapped through the dataset's time map.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    lambda: Vec<f64>,
    /// Condition: an integer id, or comma-separated reals. Repeatable.
    #[arg(long, required = true)]
    cond: Vec<String>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint; repeat for several runs of one variant.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Observation file with truth samples; defaults to fresh semicircle draws.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.75])]
    times: Vec<f64>,
    /// Generated and truth samples per cell without `--truth`.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    bandwidth: f64,
    #[arg(long, default_value_t = EvalProtocol::default().seed)]
    seed: u64,
    /// Report label; defaults to the first checkpoint's variant.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Optional flat CSV table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_outer: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.75])]
    times: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    model: PathBuf,
    /// Samples to scatter; defaults to the checkpoint's anchors.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Trajectories per condition.
    #[arg(long, default_value_t = 8)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Canvas edge in pixels.
    #[arg(long, default_value_t = 640.0)]
    size: f64,
}

/// Everything needed to re-run a command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub code_version: String,
    /// SHA-256 of the input dataset file, when there is one.
    pub dataset_fingerprint: Option<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

impl RunManifest {
    fn new(args: &[String], config: serde_json::Value, seed: u64, dataset_fingerprint: Option<String>) -> Self {
        Self {
            args: args.to_vec(),
            config,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_fingerprint,
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    fn write(&self, artifact: &Path) -> Result<(), Error> {
        fs::write(manifest_path(artifact), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    fn finish(mut self, artifact: &Path) -> Result<(), Error> {
        self.finished_unix = Some(unix_now());
        self.write(artifact)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// `<artifact>.manifest.json` next to the artifact.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Hex SHA-256 of a file's bytes.
pub fn fingerprint(path: &Path) -> Result<String, Error> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Parses and runs one command line (`args[0]` is the program name).
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match cli.command {
        Command::Gen(a) => cmd_gen(a, &argv),
        Command::Train(a) => cmd_train(a, &argv),
        Command::Sample(a) => cmd_sample(a, &argv),
        Command::Eval(a) => cmd_eval(a, &argv),
        Command::Ablate(a) => cmd_ablate(a, &argv),
        Command::Plot(a) => cmd_plot(a, &argv),
    }
}

/// [`run`] with errors printed to stderr; returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(args) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprint!("{msg}"),
                other => eprintln!("error: {other}"),
            }
            e.exit_code()
        }
    }
}

fn cmd_gen(a: GenArgs, argv: &[String]) -> Result<(), CliError> {
    let Preset::Semicircle = a.preset;
    let mut cfg = SemicircleConfig {
        n: a.n,
        times: a.times,
        seed: a.seed,
        ..SemicircleConfig::default()
    };
    if let Some(v) = a.r_nom {
        cfg.r_nom = v;
    }
    if let Some(v) = a.sigma_rad {
        cfg.sigma_rad = v;
    }
    if let Some(v) = a.kappa {
        cfg.kappa_ang = v;
    }
    let manifest = RunManifest::new(argv, serde_json::to_value(&cfg).map_err(Error::from)?, a.seed, None);
    let set = gen_dataset(&cfg)?;
    export(&set, &a.out)?;
    manifest.finish(&a.out)?;
    println!("wrote {} records to {}", set.len(), a.out.display());
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<TrainingConfig, Error> {
    match path {
        Some(p) => TrainingConfig::from_toml(&fs::read_to_string(p)?),
        None => Ok(TrainingConfig::default()),
    }
}

fn cmd_train(a: TrainArgs, argv: &[String]) -> Result<(), CliError> {
    let data = ingest(&a.data, a.matched)?;
    let mut cfg = load_config(a.config.as_deref())?;
    let variant = a.variant.as_deref().map(Variant::parse).transpose()?;
    if let Some(v) = variant {
        cfg = cfg.with_variant(v);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_outer {
        cfg.n_outer = n;
    }
    if let Some(n) = a.n_inner {
        cfg.n_inner = n;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = Some(b);
    }
    cfg.validate()?;

    let fp = fingerprint(&a.data)?;
    let manifest = RunManifest::new(argv, serde_json::to_value(&cfg).map_err(Error::from)?, cfg.seed, Some(fp.clone()));
    manifest.write(&a.out)?;

    let trace_path = a.trace.unwrap_or_else(|| {
        let mut name = a.out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".trace.jsonl");
        a.out.with_file_name(name)
    });
    let mut trace = BufWriter::new(fs::File::create(&trace_path).map_err(Error::from)?);
    let mut trace_err: Option<std::io::Error> = None;
    let n_outer = cfg.n_outer;
    let outcome = train_with(&data, &cfg, |r| {
        let line = serde_json::to_string(r).expect("trace record serializes");
        if let Err(e) = writeln!(trace, "{line}").and_then(|_| trace.flush()) {
            trace_err.get_or_insert(e);
        }
        if (r.outer + 1) % 10 == 0 || r.outer + 1 == n_outer {
            eprintln!("outer {}/{n_outer}: dual {:?} metric {:.4}", r.outer + 1, r.dual, r.metric);
        }
    });
    trace.flush().map_err(Error::from)?;
    if let Some(e) = trace_err {
        return Err(Error::from(e).into());
    }
    let (bundle, _) = outcome?;

    let mut model = SurrogateModel::new(bundle, data, cfg)?;
    model.provenance.insert("dataset_sha256".into(), fp);
    model.provenance.insert("code_version".into(), env!("CARGO_PKG_VERSION").into());
    if let Some(v) = variant {
        model.provenance.insert("variant".into(), v.name().into());
    }
    model.save(&a.out)?;
    manifest.finish(&a.out)?;
    println!("wrote checkpoint {} and trace {}", a.out.display(), trace_path.display());
    Ok(())
}

fn parse_condition(text: &str, mode: ConditionMode) -> Result<Condition, Error> {
    let bad = || Error::Validation(format!("cannot parse condition `{text}`"));
    match mode {
        ConditionMode::Discrete => text.trim().parse().map(Condition::Discrete).map_err(|_| bad()),
        ConditionMode::Continuous => text
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()
            .map(Condition::Continuous),
    }
}

fn cmd_sample(a: SampleArgs, argv: &[String]) -> Result<(), CliError> {
    let model = SurrogateModel::load(&a.model)?;
    let map = model.time_map();
    let times: Vec<f64> = if a.t.is_empty() {
        for &l in &a.lambda {
            let (lo, hi) = model.time_range();
            if !(map.to_time(l) >= lo && map.to_time(l) <= hi) {
                return Err(Error::Extrapolation {
                    value: l,
                    min: map.to_lambda(lo),
                    max: map.to_lambda(hi),
                }
                .into());
            }
        }
        a.lambda.iter().map(|&l| map.to_time(l)).collect()
    } else {
        a.t.clone()
    };
    let conds = a
        .cond
        .iter()
        .map(|c| parse_condition(c, model.anchors.mode()))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest::new(
        argv,
        serde_json::json!({ "model": a.model, "times": times, "conditions": conds, "n": a.n }),
        a.seed,
        Some(fingerprint(&a.model)?),
    );
    let mut records = Vec::new();
    for x in &conds {
        for &t in &times {
            records.extend(model.sample_records(x, t, a.n, a.seed)?);
        }
    }
    write_jsonl(&a.out, &records)?;
    manifest.finish(&a.out)?;
    println!("wrote {} samples to {}", records.len(), a.out.display());
    Ok(())
}

fn write_report(reports: &[EvalReport], out: &Path, table: Option<&Path>) -> Result<(), Error> {
    let json = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(reports)?
    };
    fs::write(out, json + "\n")?;
    if let Some(path) = table {
        let mut text = String::from("variant,t,condition,metric,mean,se\n");
        for row in reports.iter().flat_map(|r| r.flat_rows()) {
            text.push_str(&row);
            text.push('\n');
        }
        fs::write(path, text)?;
    }
    for r in reports {
        println!("{}: NLL {} CD {} W2 {} over {} run(s)", r.variant, r.nll, r.cd, r.w2, r.runs);
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs, argv: &[String]) -> Result<(), CliError> {
    let truth = a.truth.as_deref().map(|p| ingest(p, false)).transpose()?;
    let protocol = EvalProtocol {
        times: a.times.clone(),
        n_samples: a.n,
        bandwidth: a.bandwidth,
        seed: a.seed,
        ..EvalProtocol::default()
    };
    let manifest = RunManifest::new(
        argv,
        serde_json::to_value(&protocol).map_err(Error::from)?,
        a.seed,
        a.truth.as_deref().map(fingerprint).transpose()?,
    );
    let mut runs = Vec::new();
    let mut name = a.name.clone();
    let start = Instant::now();
    for path in &a.models {
        let model = SurrogateModel::load(path)?;
        if name.is_none() {
            name = model.provenance.get("variant").cloned();
        }
        let run_seed = model.config.seed;
        let cells = match &truth {
            Some(t) => evaluate_model_on(&model, t, &a.times, a.bandwidth, run_seed)?,
            None => evaluate_model(&model, &protocol, run_seed)?,
        };
        runs.push(cells);
    }
    let secs = start.elapsed().as_secs_f64() / a.models.len() as f64;
    let report = aggregate(name.as_deref().unwrap_or("model"), &runs, Vec::new(), secs);
    write_report(&[report], &a.out, a.table.as_deref())?;
    manifest.finish(&a.out)?;
    Ok(())
}

fn cmd_ablate(a: AblateArgs, argv: &[String]) -> Result<(), CliError> {
    let data = ingest(&a.data, false)?;
    let mut base = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        base.seed = s;
    }
    if let Some(n) = a.n_outer {
        base.n_outer = n;
    }
    let variants: Vec<Variant> = if a.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variants.iter().map(|v| Variant::parse(v)).collect::<Result<_, _>>()?
    };
    let configs: Vec<(String, TrainingConfig)> = variants.iter().map(|v| (v.name().to_string(), base.clone().with_variant(*v))).collect();
    for (_, c) in &configs {
        c.validate()?;
    }
    let protocol = EvalProtocol {
        times: a.times.clone(),
        n_samples: a.n,
        ..EvalProtocol::default()
    };
    let manifest = RunManifest::new(
        argv,
        serde_json::json!({ "base": base, "variants": variants.iter().map(|v| v.name()).collect::<Vec<_>>(), "runs": a.runs, "protocol": protocol }),
        base.seed,
        Some(fingerprint(&a.data)?),
    );
    manifest.write(&a.out)?;
    let reports = run_ablation(&data, &configs, a.runs, &protocol, |name, r, cells| match cells {
        Some(c) => {
            let cd = c.iter().map(|(_, m)| m.cd).sum::<f64>() / c.len() as f64;
            eprintln!("{name} run {r}: mean CD {cd:.4}");
        }
        None => eprintln!("{name} run {r}: failed"),
    });
    write_report(&reports, &a.out, a.table.as_deref())?;
    manifest.finish(&a.out)?;
    Ok(())
}

const HUES: [f64; 8] = [210.0, 20.0, 130.0, 280.0, 45.0, 330.0, 175.0, 0.0];

/// Polyline of the chained model trajectory from `y0` at the first anchor to
/// the last, `per_segment` points per interval.
pub fn trajectory(model: &SurrogateModel, x: &Condition, y0: &[f64], per_segment: usize) -> crate::Result<Vec<Vec<f64>>> {
    let b = &model.bundle;
    let mut pts = Vec::new();
    let mut y = y0.to_vec();
    for k in 0..b.num_intervals() {
        let next = b.predict_map(k, &y, x)?;
        let seg = b.predict_path(&y, &next, x)?.polyline(per_segment);
        pts.extend(seg.into_iter().skip(usize::from(k > 0)));
        y = next;
    }
    Ok(pts)
}

/// SVG scatter of `samples` (hue by condition, lightness by time) with
/// `paths` model trajectories per condition.
pub fn render_svg(model: &SurrogateModel, samples: &ObservationSet, paths: usize, seed: u64, size: f64) -> crate::Result<String> {
    if samples.dim_y() != 2 || model.bundle.dim() != 2 {
        return Err(Error::Validation("plotting needs 2-D outputs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = model.anchors.groups();
    let mut lines: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let sources = model.anchors.samples(0, &g.condition);
        for y0 in sources.choose_multiple(&mut rng, paths) {
            lines.push((gi, trajectory(model, &g.condition, y0, 64)?));
        }
    }
    let hue_of = |x: &Condition| groups.iter().position(|g| &g.condition == x).map_or(0.0, |i| HUES[i % HUES.len()]);

    let all = samples.records().iter().map(|r| &r.y).chain(lines.iter().flat_map(|(_, l)| l.iter()));
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.1;
    let centre = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let px = |p: &[f64]| {
        (
            size * (0.5 + (p[0] - centre[0]) / span),
            size * (0.5 - (p[1] - centre[1]) / span),
        )
    };
    let (t0, t1) = model.time_range();

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<g id="samples">"#);
    for r in samples.records() {
        let (cx, cy) = px(&r.y);
        let light = 75.0 - 45.0 * ((r.t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.2" fill="hsl({:.0},65%,{light:.0}%)" fill-opacity="0.8"/>"#,
            hue_of(&r.x)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g id="trajectories" fill="none" stroke-width="1.3">"#);
    for (gi, line) in &lines {
        let pts: Vec<String> = line
            .iter()
            .map(|p| {
                let (x, y) = px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="condition-{}" stroke="hsl({:.0},70%,30%)" points="{}"/>"#,
            groups[*gi].condition,
            HUES[gi % HUES.len()],
            pts.join(" ")
        );
    }
    let _ = writeln!(svg, "</g>");
    for (gi, g) in groups.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="10" y="{}" font-family="sans-serif" font-size="12" fill="hsl({:.0},70%,35%)">x = {}</text>"#,
            18 + 16 * gi,
            HUES[gi % HUES.len()],
            g.condition
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn cmd_plot(a: PlotArgs, argv: &[String]) -> Result<(), CliError> {
    let model = SurrogateModel::load(&a.model)?;
    let samples = match &a.data {
        Some(p) => ingest(p, false)?,
        None => model.anchors.clone(),
    };
    let manifest = RunManifest::new(
        argv,
        serde_json::json!({ "model": a.model, "data": a.data, "paths": a.paths, "size": a.size }),
        a.seed,
        a.data.as_deref().map(fingerprint).transpose()?,
    );
    let svg = render_svg(&model, &samples, a.paths, a.seed, a.size)?;
    fs::write(&a.out, svg).map_err(Error::from)?;
    manifest.finish(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
