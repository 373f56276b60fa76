use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use reidtrack::io::{
    load_features, parse_detections, parse_ground_truth, parse_results, write_detections, write_features,
    write_ground_truth, write_results, DatasetPaths, DetectionParseOptions, GtParseOptions,
};
use reidtrack::synth::{generate, ScenarioKind, ScenarioSpec};
use reidtrack::{evaluate, run_sequence, AssociationMode, Detection, EvalReport, GtRecord, RunConfig, SequenceData};

#[derive(Parser)]
#[command(name = "reidtrack", version, about = "Particle-filter multi-object tracker with re-ID appearance fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a detection file and write a results file.
    Track(TrackArgs),
    /// Score a results file against ground truth (CLEAR MOT).
    Eval(EvalArgs),
    /// Write a synthetic scenario as det.txt, gt.txt and features.txt.
    Synth(SynthArgs),
    /// Run several association modes over several seeds and tabulate mean metrics.
    Compare(CompareArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Detection file (MOTChallenge layout).
    #[arg(long)]
    det: PathBuf,
    /// Feature sidecar for the detections.
    #[arg(long)]
    features: Option<PathBuf>,
    /// key=value configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Drop detections below this confidence.
    #[arg(long, default_value_t = 0.0)]
    conf_threshold: f64,
    /// Overrides tracker.rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Take the most likely association instead of sampling.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    input: InputArgs,
    /// posonly, apponly or posapp; overrides association.mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<AssociationMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    res: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Where to write the key=value report; defaults to `<res>.eval`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// crossing, occlusion, parallel, crowd or crowd:N.
    #[arg(long, value_parser = parse_kind)]
    kind: ScenarioKind,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    frames: Option<u64>,
    /// Detection center noise, pixels.
    #[arg(long)]
    det_noise: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Expected false detections per frame.
    #[arg(long)]
    clutter: Option<f64>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    feature_noise: Option<f64>,
    /// Minimum distance between identity centroids.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    occlusion_frames: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    gt: PathBuf,
    /// Histogram sidecar; adds a `poshist` row (PosApp on histogram features).
    #[arg(long)]
    hist_features: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Comma-separated rows to run; defaults to every applicable one.
    #[arg(long, value_delimiter = ',', value_parser = parse_row)]
    modes: Option<Vec<Row>>,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
}

/// Failure with its exit status: 1 internal, 2 usage or input.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<reidtrack::Error> for Failure {
    fn from(e: reidtrack::Error) -> Self {
        use reidtrack::Error as E;
        let code = match e {
            E::DegenerateInnovation | E::DegenerateFeatureAverage | E::NoTracks | E::FrameMismatch { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn parse_mode(s: &str) -> Result<AssociationMode, String> {
    s.parse().map_err(|e: reidtrack::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    s.parse().map_err(|e: reidtrack::Error| e.to_string())
}

/// A compare row: an association mode, or PosApp on the histogram sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Row {
    Mode(AssociationMode),
    PosHist,
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Row::Mode(m) => m.fmt(f),
            Row::PosHist => f.write_str("poshist"),
        }
    }
}

fn parse_row(s: &str) -> Result<Row, String> {
    if s.eq_ignore_ascii_case("poshist") {
        Ok(Row::PosHist)
    } else {
        parse_mode(s).map(Row::Mode)
    }
}

fn load_config(input: &InputArgs) -> CliResult<RunConfig> {
    let mut cfg = match &input.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = input.seed {
        cfg.tracker.rng_seed = seed;
    }
    cfg.tracker.deterministic |= input.deterministic;
    Ok(cfg)
}

fn load_detections(input: &InputArgs) -> CliResult<Vec<Detection>> {
    let opts = DetectionParseOptions {
        conf_threshold: input.conf_threshold,
    };
    Ok(parse_detections(&input.det, &opts)?)
}

fn with_features(dets: Vec<Detection>, path: &Path) -> CliResult<SequenceData> {
    Ok(SequenceData::new(load_features(path, dets)?, None)?)
}

fn feature_required(mode: impl fmt::Display) -> Failure {
    Failure::input(format!("feature required: mode {mode} needs a feature sidecar (--features)"))
}

fn cmd_track(args: TrackArgs) -> CliResult {
    let mut cfg = load_config(&args.input)?;
    if let Some(mode) = args.mode {
        cfg.association.mode = mode;
    }
    cfg.validate()?;
    let mode = cfg.association.mode;
    let dets = load_detections(&args.input)?;
    let seq = match &args.input.features {
        Some(path) => with_features(dets, path)?,
        None if mode.uses_appearance() => return Err(feature_required(mode)),
        None => SequenceData::new(dets, None)?,
    };
    let out = run_sequence(&seq, &cfg)?;
    write_results(&args.out, &out)?;
    eprintln!("{} frames tracked ({mode}) -> {}", out.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult {
    let gt: Vec<GtRecord> = parse_ground_truth(&args.gt, &GtParseOptions::default())?;
    let res = parse_results(&args.res)?;
    let report = evaluate(&gt, &res, args.iou)?;
    println!("{report}");
    let path = args.report.unwrap_or_else(|| {
        let mut p = args.res.into_os_string();
        p.push(".eval");
        PathBuf::from(p)
    });
    std::fs::write(&path, report.to_key_values())
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult {
    let d = ScenarioSpec::default();
    let spec = ScenarioSpec {
        kind: args.kind,
        seed: args.seed,
        frames: args.frames.unwrap_or(d.frames),
        det_noise_pos: args.det_noise.unwrap_or(d.det_noise_pos),
        det_dropout: args.dropout.unwrap_or(d.det_dropout),
        clutter_rate: args.clutter.unwrap_or(d.clutter_rate),
        feature_dim: args.feature_dim.unwrap_or(d.feature_dim),
        feature_noise: args.feature_noise.unwrap_or(d.feature_noise),
        identity_separation: args.separation.unwrap_or(d.identity_separation),
        occlusion_frames: args.occlusion_frames.unwrap_or(d.occlusion_frames),
    };
    let scenario = generate::<f64>(&spec)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::input(format!("{}: {e}", args.out_dir.display())))?;
    let paths = DatasetPaths::in_dir(&args.out_dir);
    write_detections(&paths.det, &scenario.detections)?;
    write_ground_truth(&paths.gt, &scenario.ground_truth)?;
    write_features(&paths.features, &scenario.detections, spec.feature_dim)?;
    eprintln!(
        "{} ({} frames, {} detections) -> {}",
        spec.kind,
        spec.frames,
        scenario.detections.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Mean metrics of one compare row.
struct RowSummary {
    row: Row,
    mota: f64,
    motp: f64,
    fp: f64,
    fn_: f64,
    idsw: f64,
}

fn summarize(row: Row, reports: &[EvalReport]) -> RowSummary {
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    RowSummary {
        row,
        mota: mean(|r| r.mota),
        motp: mean(|r| r.motp),
        fp: mean(|r| r.fp as f64),
        fn_: mean(|r| r.fn_ as f64),
        idsw: mean(|r| r.id_switches as f64),
    }
}

fn cmd_compare(args: CompareArgs) -> CliResult {
    if args.seeds == 0 {
        return Err(Failure::input("--seeds must be at least 1"));
    }
    let base = load_config(&args.input)?;
    base.validate()?;
    let gt: Vec<GtRecord> = parse_ground_truth(&args.gt, &GtParseOptions::default())?;
    let dets = load_detections(&args.input)?;
    let plain = SequenceData::new(dets.clone(), None)?;
    let reid = args.input.features.as_deref().map(|p| with_features(dets.clone(), p)).transpose()?;
    let hist = args.hist_features.as_deref().map(|p| with_features(dets, p)).transpose()?;

    let explicit = args.modes.is_some();
    let wanted = args.modes.unwrap_or_else(|| {
        let mut all: Vec<Row> = AssociationMode::ALL.iter().map(|&m| Row::Mode(m)).collect();
        all.push(Row::PosHist);
        all
    });
    let mut rows: Vec<(Row, &SequenceData, AssociationMode)> = Vec::new();
    for row in wanted {
        let (seq, mode) = match row {
            Row::Mode(AssociationMode::PosOnly) => (Some(&plain), AssociationMode::PosOnly),
            Row::Mode(m) => (reid.as_ref(), m),
            Row::PosHist => (hist.as_ref(), AssociationMode::PosApp),
        };
        let applicable = seq.filter(|s| mode != AssociationMode::AppOnly || s.all_have_features());
        match applicable {
            Some(seq) => rows.push((row, seq, mode)),
            None if explicit => return Err(feature_required(row)),
            None => eprintln!("skipping {row}: features missing"),
        }
    }

    let jobs: Vec<(usize, u64)> = (0..rows.len()).flat_map(|r| (0..args.seeds).map(move |k| (r, k))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(r, k)| {
            let (_, seq, mode) = rows[r];
            let mut cfg = base;
            cfg.association.mode = mode;
            cfg.tracker.rng_seed = base.tracker.rng_seed.wrapping_add(k);
            let out = run_sequence(seq, &cfg)?;
            Ok(evaluate(&gt, &out, args.iou)?)
        })
        .collect::<CliResult<Vec<EvalReport>>>()?;

    println!("{:<8} {:>8} {:>8} {:>10} {:>10} {:>8}", "mode", "MOTA", "MOTP", "FP", "FN", "IDSW");
    for (r, chunk) in reports.chunks(args.seeds as usize).enumerate() {
        let s = summarize(rows[r].0, chunk);
        println!(
            "{:<8} {:>8.3} {:>8.3} {:>10.1} {:>10.1} {:>8.1}",
            s.row.to_string(),
            s.mota,
            s.motp,
            s.fp,
            s.fn_,
            s.idsw
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
