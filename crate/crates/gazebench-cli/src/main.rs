//! Batch front end for the gazebench library. Every subcommand takes an
//! explicit `--seed` and writes its artifacts atomically, so repeated runs
//! with the same inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use gazebench::calib::{
    block_calibration_sweep, run_calibration_sim, split_dataset, BlockSweepConfig,
    CalibrationSimConfig, DatasetTargets,
};
use gazebench::fitts::{
    fit_line, generate_trial_sequence, index_of_difficulty, replay_adaptive, summarize_session,
    synthesize_trace, Modality, OperatorModel, TrialResult,
};
use gazebench::formats::config::ParamMap;
use gazebench::formats::csvio::{
    dataset_from_csv, dataset_to_csv, fit_to_csv, histograms_from_csv, histograms_to_csv,
    measures_to_csv, metrics_from_csv, metrics_to_csv, summary_to_csv, trace_from_csv,
    trace_to_csv, trials_from_csv, trials_to_csv, MeasureRow, MetricsRow, TrialRow,
};
use gazebench::formats::model::write_model;
use gazebench::formats::records::{parse_frame_manifest, parse_gaze_stream};
use gazebench::formats::{pgm, write_atomic};
use gazebench::houghvision::{
    classify_circles, detect_circles, measure_separation, preprocess, HoughParams,
    PreprocessParams, PxToCm,
};
use gazebench::nnmap::{
    evaluate_classifier, init_network, train, NetworkSpec, OutputKind, StopRule, TrainConfig,
};
use gazebench::pathmetrics::{efficiency_metrics, EfficiencyReport, TaskAxis};
use gazebench::plot::{
    grouped_bars_svg, histogram_svg, radial_stacked_svg, scatter_with_trend, BarGroup,
    RadialSector,
};
use gazebench::synth::SyntheticGazeModel;
use gazebench::tracelab::{AuditConfig, BoundaryParams, BoundaryRule, IntensityHistogram};
use gazebench::Error;

#[derive(Parser)]
#[command(
    name = "gazebench",
    version,
    about = "Gaze interaction simulation and analysis toolkit",
    after_help = "Exit codes: 1 runtime failure, 2 usage error, 3 unreadable input, \
                  4 malformed record, 5 parameter out of range.\n\
                  Any parameter flag can also come from --config (key = value lines) or \
                  from GAZEBENCH_* environment variables; flags win over the environment, \
                  which wins over the file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a calibration session and write the dataset as CSV
    CalibSim(CalibSimArgs),
    /// Train a gaze mapping network on a calibration dataset
    Train(TrainArgs),
    /// Synthesize a pointing session: trial table plus per-trial traces
    Simulate(SimulateArgs),
    /// Summarize a trial table: per-condition stats and the MT-on-ID fit
    Fitts(FittsArgs),
    /// Compute path efficiency metrics for every trace in a trial table
    Pathmetrics(PathmetricsArgs),
    /// Audit a recorded gaze stream against its frame manifest
    Audit(AuditArgs),
    /// Detect gaze and target circles in PGM images and measure separation
    Hough(HoughArgs),
    /// Render an SVG chart from previously emitted CSV files
    Plot(PlotArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CalibSim(args) => cmd_calib_sim(args),
        Command::Train(args) => cmd_train(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fitts(args) => cmd_fitts(args),
        Command::Pathmetrics(args) => cmd_pathmetrics(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Hough(args) => cmd_hough(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_)) => 3,
        Some(Error::Parse { .. }) => 4,
        Some(Error::InvalidParams(_)) => 5,
        _ => 1,
    }
}

/// Merged parameter sources: config file under environment overrides.
/// Explicit flags are resolved on top by the per-key accessors.
struct Overlay {
    map: ParamMap,
}

impl Overlay {
    fn load(config: Option<&PathBuf>) -> anyhow::Result<Self> {
        let mut map = match config {
            Some(path) => ParamMap::parse(&read_text(path)?)?,
            None => ParamMap::new(),
        };
        map.apply_env(std::env::vars());
        Ok(Overlay { map })
    }

    fn f64(&self, key: &str, flag: Option<f64>, default: f64) -> anyhow::Result<f64> {
        Ok(match flag {
            Some(v) => v,
            None => self.map.get_f64(key)?.unwrap_or(default),
        })
    }

    fn usize(&self, key: &str, flag: Option<usize>, default: usize) -> anyhow::Result<usize> {
        Ok(match flag {
            Some(v) => v,
            None => self.map.get_usize(key)?.unwrap_or(default),
        })
    }

    fn u32(&self, key: &str, flag: Option<u32>, default: u32) -> anyhow::Result<u32> {
        let v = self.usize(key, flag.map(|v| v as usize), default as usize)?;
        u32::try_from(v)
            .map_err(|_| Error::InvalidParams(format!("`{key}` is out of range")).into())
    }

    fn text(&self, key: &str, flag: Option<String>, default: &str) -> String {
        flag.unwrap_or_else(|| self.map.get(key).unwrap_or(default).to_string())
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(Error::Io)
        .with_context(|| format!("reading {}", path.display()))
}

fn read_bytes(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path)
        .map_err(Error::Io)
        .with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(Error::Io)
                .with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CalibSimArgs {
    /// Dataset flavor: `screen` (shrinking-marker session, six gaze inputs)
    /// or `block` (block sweep, three gaze inputs with block labels)
    #[arg(long, default_value = "screen")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Observer noise as an on-screen pixel sigma
    #[arg(long)]
    noise_px: Option<f64>,
    /// Rows recorded per block in block mode
    #[arg(long)]
    samples_per_block: Option<usize>,
}

fn cmd_calib_sim(args: CalibSimArgs) -> anyhow::Result<()> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let noise_px = overlay.f64("noise_px", args.noise_px, 0.0)?;
    let model = SyntheticGazeModel::default_panel();
    let noise_std = model.component_std_for_px(noise_px);

    let mode = overlay.text("mode", Some(args.mode), "screen");
    let data = match mode.as_str() {
        "screen" => {
            let cfg = CalibrationSimConfig { noise_std, ..CalibrationSimConfig::default() };
            run_calibration_sim(&model, &cfg, args.seed)?
        }
        "block" => {
            let mut cfg = BlockSweepConfig { noise_std, ..BlockSweepConfig::default() };
            cfg.samples_per_block =
                overlay.usize("samples_per_block", args.samples_per_block, cfg.samples_per_block)?;
            block_calibration_sweep(&model, &cfg, args.seed)?
        }
        other => {
            return Err(Error::InvalidParams(format!(
                "mode must be `screen` or `block`, got `{other}`"
            ))
            .into())
        }
    };

    write_out(&args.out, dataset_to_csv(&data).as_bytes())?;
    println!(
        "calib-sim: {} rows, {} inputs each -> {}",
        data.len(),
        data.input_dim(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct TrainArgs {
    /// Dataset CSV produced by calib-sim
    data: PathBuf,
    /// Output model path
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Regression stop gate on training loss
    #[arg(long)]
    loss_threshold: Option<f64>,
    /// Regression stop gate on training R squared
    #[arg(long)]
    r2_target: Option<f64>,
    /// Classification stop gate on evaluation accuracy
    #[arg(long)]
    accuracy_target: Option<f64>,
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let data = dataset_from_csv(&read_text(&args.data)?)?;

    let mut cfg = TrainConfig { seed: args.seed, ..TrainConfig::default() };
    cfg.max_epochs = overlay.usize("epochs", args.epochs, cfg.max_epochs)?;
    cfg.learning_rate = overlay.f64("learning_rate", args.learning_rate, cfg.learning_rate)?;
    cfg.batch_size = overlay.usize("batch_size", args.batch_size, cfg.batch_size)?;
    cfg.loss_threshold = overlay.f64("loss_threshold", args.loss_threshold, cfg.loss_threshold)?;
    cfg.r2_target = overlay.f64("r2_target", args.r2_target, cfg.r2_target)?;
    cfg.accuracy_target =
        overlay.f64("accuracy_target", args.accuracy_target, cfg.accuracy_target)?;
    cfg.screen[0] = overlay.f64("screen_w", None, cfg.screen[0])?;
    cfg.screen[1] = overlay.f64("screen_h", None, cfg.screen[1])?;

    let trained = match data.targets() {
        DatasetTargets::Screen(_) => {
            let spec = NetworkSpec {
                input_dim: data.input_dim(),
                hidden_dims: vec![32, 16],
                output_dim: 2,
                output_kind: OutputKind::Regression,
            };
            let net = init_network(spec, args.seed)?;
            train(net, &data, None, &cfg)?
        }
        DatasetTargets::Block(labels) => {
            let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(2);
            let (train_split, val_split, test_split) =
                split_dataset(&data, [0.70, 0.15, 0.15], args.seed)?;
            let spec = NetworkSpec {
                input_dim: data.input_dim(),
                hidden_dims: vec![256, 128],
                output_dim: classes,
                output_kind: OutputKind::Classification,
            };
            let net = init_network(spec, args.seed)?;
            let net = train(net, &train_split, Some(&val_split), &cfg)?;
            if !test_split.is_empty() {
                let test_acc = evaluate_classifier(&net, &test_split)?;
                println!("train: held-out test accuracy {test_acc:.4}");
            }
            net
        }
    };

    write_out(&args.out, write_model(&trained).as_bytes())?;
    let report = trained.report.as_ref().expect("training always attaches a report");
    let gate = match report.stop {
        StopRule::LossAndR2 => "loss and R2 gate",
        StopRule::Accuracy => "accuracy gate",
        StopRule::EpochCap => "epoch cap",
    };
    println!(
        "train: {} params, {} epochs, final loss {:.6e}, stopped on {gate} -> {}",
        trained.param_count(),
        report.epochs,
        report.final_loss,
        args.out.display()
    );
    if let Some(r2) = report.r_squared {
        println!("train: R2 on the training split {r2:.4}");
    }
    if let Some(acc) = report.accuracy {
        println!("train: evaluation accuracy {acc:.4}");
    }
    Ok(())
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    /// Output directory; receives trials.csv and a traces/ subdirectory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which sessions to emit: `nonadaptive`, `adaptive`, or `both`
    #[arg(long)]
    modality: Option<String>,
    /// Movement time noise sigma in milliseconds
    #[arg(long)]
    mt_noise_ms: Option<f64>,
    /// Click scatter along the task normal in pixels
    #[arg(long)]
    jitter_px: Option<f64>,
    /// Nearest-target snap radius used by the adaptive replay
    #[arg(long)]
    snap_radius_px: Option<f64>,
    /// Operator intercept in milliseconds
    #[arg(long)]
    intercept_ms: Option<f64>,
    /// Operator slope in milliseconds per bit
    #[arg(long)]
    slope_ms_per_bit: Option<f64>,
}

/// Derives a stable per-trial seed from the session seed.
fn trial_seed(session_seed: u64, index: usize) -> u64 {
    session_seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let modality = overlay.text("modality", args.modality.clone(), "both");
    let (want_nonadaptive, want_adaptive) = match modality.as_str() {
        "both" => (true, true),
        other => match Modality::parse(other)? {
            Modality::NonAdaptive => (true, false),
            Modality::Adaptive => (false, true),
        },
    };

    let mut op = OperatorModel::default();
    op.mt_noise_ms = overlay.f64("mt_noise_ms", args.mt_noise_ms, op.mt_noise_ms)?;
    op.jitter_px = overlay.f64("jitter_px", args.jitter_px, op.jitter_px)?;
    op.intercept_ms = overlay.f64("intercept_ms", args.intercept_ms, op.intercept_ms)?;
    op.slope_ms_per_bit =
        overlay.f64("slope_ms_per_bit", args.slope_ms_per_bit, op.slope_ms_per_bit)?;
    let snap_radius =
        overlay.f64("snap_radius_px", args.snap_radius_px, f64::INFINITY)?;

    let specs = generate_trial_sequence(args.seed);
    let mut rows: Vec<TrialRow> = Vec::new();
    let mut artifacts: Vec<(PathBuf, String)> = Vec::new();

    let results: Vec<TrialResult> = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| synthesize_trace(&op, spec, trial_seed(args.seed, i)))
        .collect::<gazebench::Result<_>>()?;

    if want_nonadaptive {
        for (i, result) in results.iter().enumerate() {
            let rel = format!("traces/trial_{i:03}_nonadaptive.csv");
            artifacts.push((args.out.join(&rel), trace_to_csv(&result.trace)));
            rows.push(TrialRow::from_result(rows.len(), result, rel));
        }
    }
    if want_adaptive {
        for (i, result) in results.iter().enumerate() {
            let replay = replay_adaptive(result, snap_radius)?;
            let rel = format!("traces/trial_{i:03}_adaptive.csv");
            artifacts.push((args.out.join(&rel), trace_to_csv(&replay.trace)));
            rows.push(TrialRow::from_result(rows.len(), &replay, rel));
        }
    }

    for (path, text) in &artifacts {
        write_out(path, text.as_bytes())?;
    }
    let trials_path = args.out.join("trials.csv");
    write_out(&trials_path, trials_to_csv(&rows).as_bytes())?;
    println!(
        "simulate: {} trials ({} traces) -> {}",
        rows.len(),
        artifacts.len(),
        trials_path.display()
    );
    Ok(())
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FittsArgs {
    /// Trial table produced by simulate
    trials: PathBuf,
    /// Output directory for summary.csv and fit.csv; defaults next to the input
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one modality: `nonadaptive`, `adaptive`, or `all`
    #[arg(long)]
    modality: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_fitts(args: FittsArgs) -> anyhow::Result<()> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let modality = overlay.text("modality", args.modality.clone(), "all");
    let filter = match modality.as_str() {
        "all" => None,
        other => Some(Modality::parse(other)?),
    };

    let rows = trials_from_csv(&read_text(&args.trials)?)?;
    let results: Vec<TrialResult> = rows
        .into_iter()
        .filter(|r| filter.map_or(true, |m| r.spec.modality == m))
        .map(|r| r.into_result(Vec::new()))
        .collect();
    let summary = summarize_session(&results)?;

    let out_dir = args.out.unwrap_or_else(|| parent_dir(&args.trials));
    let summary_path = out_dir.join("summary.csv");
    let fit_path = out_dir.join("fit.csv");
    write_out(&summary_path, summary_to_csv(&summary).as_bytes())?;
    write_out(&fit_path, fit_to_csv(&summary).as_bytes())?;
    println!(
        "fitts: {} trials, r {:.4}, slope {:.2} ms/bit, intercept {:.2} ms, miss rate {:.4}",
        summary.trial_count,
        summary.pearson_r,
        summary.slope_ms_per_bit,
        summary.intercept_ms,
        summary.miss_rate
    );
    println!("fitts: wrote {} and {}", summary_path.display(), fit_path.display());
    Ok(())
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PathmetricsArgs {
    /// Trial table produced by simulate; traces resolve relative to it
    trials: PathBuf,
    /// Output CSV path; defaults to metrics.csv next to the input
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_pathmetrics(args: PathmetricsArgs) -> anyhow::Result<()> {
    let _ = Overlay::load(args.config.as_ref())?;
    let rows = trials_from_csv(&read_text(&args.trials)?)?;
    if rows.is_empty() {
        return Err(Error::EmptyData("trial table has no rows".into()).into());
    }
    let base = parent_dir(&args.trials);

    let mut out_rows = Vec::with_capacity(rows.len());
    for row in &rows {
        let trace = trace_from_csv(&read_text(&base.join(&row.trace_file))?)?;
        let axis = TaskAxis {
            source_px: row.source_px,
            target_center_px: row.target_px,
            target_width_px: row.spec.width_px,
        };
        let report = efficiency_metrics(&trace, &axis)?;
        out_rows.push(MetricsRow {
            trace_file: row.trace_file.clone(),
            samples: trace.len(),
            report,
        });
    }

    let out_path = args.out.unwrap_or_else(|| parent_dir(&args.trials).join("metrics.csv"));
    write_out(&out_path, metrics_to_csv(&out_rows).as_bytes())?;
    println!("pathmetrics: {} traces -> {}", out_rows.len(), out_path.display());
    Ok(())
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct AuditArgs {
    /// Line-delimited gaze record stream
    #[arg(long)]
    gaze: PathBuf,
    /// Frame manifest |(pts_us, file) per line|
    #[arg(long)]
    frames: PathBuf,
    /// Directory of frame PGMs; enables the intensity analysis
    #[arg(long)]
    images_dir: Option<PathBuf>,
    /// Output directory for report.txt and histograms.csv
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Intensity split point for the darkness fractions
    #[arg(long)]
    intensity_threshold: Option<f64>,
    #[arg(long)]
    histogram_bins: Option<usize>,
    /// Valid records examined on each side of a cluster
    #[arg(long)]
    boundary_count: Option<usize>,
    /// Gaze coordinates below this count as boundary evidence
    #[arg(long)]
    boundary_lo: Option<f64>,
    /// Gaze coordinates above this count as boundary evidence
    #[arg(long)]
    boundary_hi: Option<f64>,
    /// Witness test: `either-axis` or `both-axes`
    #[arg(long)]
    boundary_rule: Option<String>,
}

fn cmd_audit(args: AuditArgs) -> anyhow::Result<()> {
    let overlay = Overlay::load(args.config.as_ref())?;
    let boundary = BoundaryParams {
        count: overlay.usize("boundary_count", args.boundary_count, 3)?,
        lo: overlay.f64("boundary_lo", args.boundary_lo, 0.2)?,
        hi: overlay.f64("boundary_hi", args.boundary_hi, 0.8)?,
        rule: BoundaryRule::parse(&overlay.text(
            "boundary_rule",
            args.boundary_rule.clone(),
            BoundaryRule::EitherAxis.as_str(),
        ))?,
    };
    let cfg = AuditConfig {
        boundary,
        histogram_bins: overlay.usize("histogram_bins", args.histogram_bins, 32)?,
        intensity_threshold: overlay.f64(
            "intensity_threshold",
            args.intensity_threshold,
            131.0,
        )?,
    };

    let gaze = parse_gaze_stream(&read_text(&args.gaze)?)?;
    let frames = parse_frame_manifest(&read_text(&args.frames)?)?;

    let intensities: Vec<Option<f64>> = match &args.images_dir {
        None => Vec::new(),
        Some(dir) => {
            if !dir.is_dir() {
                return Err(anyhow::Error::from(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("image directory {} does not exist", dir.display()),
                ))));
            }
            frames
                .iter()
                .map(|entry| {
                    let path = dir.join(&entry.file);
                    match fs::read(&path) {
                        Err(_) => {
                            eprintln!("audit: skipping missing frame {}", path.display());
                            Ok(None)
                        }
                        Ok(bytes) => pgm::decode(&bytes)
                            .map(|img| Some(img.mean_intensity()))
                            .with_context(|| format!("decoding {}", path.display())),
                    }
                })
                .collect::<anyhow::Result<_>>()?
        }
    };

    let report = gazebench::tracelab::audit_report(&gaze, &frames, &intensities, &cfg)?;
    let text = report.render_text();
    write_out(&args.out.join("report.txt"), text.as_bytes())?;

    let mut series: Vec<(&str, &IntensityHistogram)> = Vec::new();
    if let Some(h) = &report.hist_category1 {
        series.push(("category1", h));
    }
    if let Some(h) = &report.hist_category2 {
        series.push(("category2", h));
    }
    if !series.is_empty() {
        write_out(&args.out.join("histograms.csv"), histograms_to_csv(&series).as_bytes())?;
    }

    print!("{text}");
    Ok(())
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct HoughArgs {
    /// Input PGM images
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    r_min: Option<u32>,
    #[arg(long)]
    r_max: Option<u32>,
    /// Accumulator score floor as a fraction of the circle perimeter
    #[arg(long)]
    acc_threshold: Option<f64>,
    /// Center and radius gap below which two detections merge
    #[arg(long)]
    min_dist: Option<f64>,
    /// Radii below this are gaze marker candidates
    #[arg(long)]
    gaze_r_max: Option<f64>,
    /// Radii at or above this are target outline candidates
    #[arg(long)]
    target_r_min: Option<f64>,
    /// Pixel span of the scale reference object
    #[arg(long)]
    ref_px: Option<f64>,
    /// Physical size of the scale reference object in centimeters
    #[arg(long)]
    ref_cm: Option<f64>,
    /// Eye-to-screen distance in centimeters for the visual angle
    #[arg(long)]
    eye_distance_cm: Option<f64>,
}

fn cmd_hough(args: HoughArgs) -> anyhow::Result<()> {
    let overlay = Overlay::load(args.config.as_ref())?;

    let pp_default = PreprocessParams::default();
    let pp = PreprocessParams {
        gaussian_size: overlay.u32("gaussian_size", None, pp_default.gaussian_size)?,
        gaussian_sigma: overlay.f64("gaussian_sigma", None, pp_default.gaussian_sigma)?,
        block_size: overlay.u32("block_size", None, pp_default.block_size)?,
        offset: overlay.f64("offset", None, pp_default.offset)?,
        opening_size: overlay.u32("opening_size", None, pp_default.opening_size)?,
    };
    let hp_default = HoughParams::default();
    let hp = HoughParams {
        r_min: overlay.u32("r_min", args.r_min, hp_default.r_min)?,
        r_max: overlay.u32("r_max", args.r_max, hp_default.r_max)?,
        acc_threshold: overlay.f64("acc_threshold", args.acc_threshold, hp_default.acc_threshold)?,
        min_dist: overlay.f64("min_dist", args.min_dist, hp_default.min_dist)?,
    };
    let gaze_r_max = overlay.f64("gaze_r_max", args.gaze_r_max, 30.0)?;
    let target_r_min = overlay.f64("target_r_min", args.target_r_min, 40.0)?;
    let scale = PxToCm::new(
        overlay.f64("ref_px", args.ref_px, 59.0)?,
        overlay.f64("ref_cm", args.ref_cm, 2.2)?,
    )?;
    let eye_distance_cm = overlay.f64("eye_distance_cm", args.eye_distance_cm, 320.0)?;

    let mut rows = Vec::with_capacity(args.images.len());
    for path in &args.images {
        let img = pgm::decode(&read_bytes(path)?)
            .with_context(|| format!("decoding {}", path.display()))?;
        let cleaned = preprocess(&img, &pp)?;
        let detections = detect_circles(&cleaned, &hp)?;
        let classified = classify_circles(&detections, gaze_r_max, target_r_min)?;
        let distance = match (&classified.gaze, &classified.target) {
            (Some(g), Some(t)) => Some(measure_separation(g, t, &scale, eye_distance_cm)?),
            _ => None,
        };
        rows.push(MeasureRow {
            file: path.to_string_lossy().into_owned(),
            gaze: classified.gaze,
            target: classified.target,
            distance,
        });
    }

    write_out(&args.out, measures_to_csv(&rows).as_bytes())?;
    let measured = rows.iter().filter(|r| r.distance.is_some()).count();
    println!(
        "hough: {} images, {} with both circles -> {}",
        rows.len(),
        measured,
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PlotArgs {
    /// Chart kind: `mt-vs-id`, `intensity-histogram`, `metric-bars`, or `radial-stacked`
    #[arg(long)]
    kind: String,
    /// Trial table (mt-vs-id, radial-stacked; optional for metric-bars)
    #[arg(long)]
    trials: Option<PathBuf>,
    /// Metrics CSV from pathmetrics (metric-bars, radial-stacked)
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Histogram CSV from audit (intensity-histogram)
    #[arg(long)]
    histograms: Option<PathBuf>,
    /// Output SVG path
    #[arg(long)]
    out: PathBuf,
    /// Chart title override
    #[arg(long)]
    title: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

const METRIC_NAMES: [&str; 7] = ["MV", "ME", "MO", "ODC", "MDC", "TAC", "RE"];

fn metric_values(report: &EfficiencyReport) -> [f64; 7] {
    [
        report.mv,
        report.me,
        report.mo,
        report.odc as f64,
        report.mdc as f64,
        report.tac as f64,
        report.re as f64,
    ]
}

fn require_input<'a>(path: &'a Option<PathBuf>, flag: &str, kind: &str) -> anyhow::Result<&'a Path> {
    path.as_deref().ok_or_else(|| {
        Error::InvalidParams(format!("plot kind `{kind}` needs the `{flag}` input")).into()
    })
}

fn cmd_plot(args: PlotArgs) -> anyhow::Result<()> {
    let _ = Overlay::load(args.config.as_ref())?;
    let svg = match args.kind.as_str() {
        "mt-vs-id" => plot_mt_vs_id(&args)?,
        "intensity-histogram" => plot_intensity_histogram(&args)?,
        "metric-bars" => plot_metric_bars(&args)?,
        "radial-stacked" => plot_radial_stacked(&args)?,
        other => {
            return Err(Error::InvalidParams(format!(
                "kind must be one of mt-vs-id, intensity-histogram, metric-bars, \
                 radial-stacked; got `{other}`"
            ))
            .into())
        }
    };
    write_out(&args.out, svg.as_bytes())?;
    println!("plot: {} -> {}", args.kind, args.out.display());
    Ok(())
}

fn plot_mt_vs_id(args: &PlotArgs) -> anyhow::Result<String> {
    let trials = require_input(&args.trials, "--trials", "mt-vs-id")?;
    let rows = trials_from_csv(&read_text(trials)?)?;
    let mut points = Vec::with_capacity(rows.len());
    for row in &rows {
        let id = index_of_difficulty(row.spec.distance_px, row.spec.width_px)?;
        points.push((id, row.movement_time_ms));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let trend = fit_line(&xs, &ys)?;
    let title = args.title.as_deref().unwrap_or("Movement time vs index of difficulty");
    Ok(scatter_with_trend(title, "ID (bits)", "MT (ms)", &points, Some(trend))?)
}

fn plot_intensity_histogram(args: &PlotArgs) -> anyhow::Result<String> {
    let path = require_input(&args.histograms, "--histograms", "intensity-histogram")?;
    let series = histograms_from_csv(&read_text(path)?)?;
    let borrowed: Vec<(&str, &IntensityHistogram)> =
        series.iter().map(|(name, hist)| (name.as_str(), hist)).collect();
    let title = args.title.as_deref().unwrap_or("Frame intensity distribution");
    Ok(histogram_svg(title, &borrowed)?)
}

/// Pairs each metrics row with the trial that produced it, keyed on the
/// trace file column the two tables share.
fn join_metrics_to_trials(
    metrics: &[MetricsRow],
    trials: &[TrialRow],
) -> anyhow::Result<Vec<(usize, usize)>> {
    let mut by_file: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        by_file.insert(t.trace_file.as_str(), i);
    }
    metrics
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            by_file.get(m.trace_file.as_str()).map(|&ti| (mi, ti)).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "metrics row `{}` has no matching trial",
                    m.trace_file
                ))
                .into()
            })
        })
        .collect()
}

fn plot_metric_bars(args: &PlotArgs) -> anyhow::Result<String> {
    let metrics_path = require_input(&args.metrics, "--metrics", "metric-bars")?;
    let metrics = metrics_from_csv(&read_text(metrics_path)?)?;
    if metrics.is_empty() {
        return Err(Error::EmptyData("metrics table has no rows".into()).into());
    }

    // With a trial table the bars split by modality; without it everything
    // lands in one series.
    let mut series_names: Vec<String> = Vec::new();
    let mut sums: Vec<[f64; 7]> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut add = |name: &str, values: [f64; 7]| {
        let idx = match series_names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                series_names.push(name.to_string());
                sums.push([0.0; 7]);
                counts.push(0);
                series_names.len() - 1
            }
        };
        for (acc, v) in sums[idx].iter_mut().zip(values) {
            *acc += v;
        }
        counts[idx] += 1;
    };

    match &args.trials {
        Some(trials_path) => {
            let trials = trials_from_csv(&read_text(trials_path)?)?;
            for (mi, ti) in join_metrics_to_trials(&metrics, &trials)? {
                add(trials[ti].spec.modality.as_str(), metric_values(&metrics[mi].report));
            }
        }
        None => {
            for m in &metrics {
                add("all", metric_values(&m.report));
            }
        }
    }

    let groups: Vec<BarGroup> = METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| BarGroup {
            label: name.to_string(),
            values: sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c == 0 { 0.0 } else { s[k] / c as f64 })
                .collect(),
        })
        .collect();
    let title = args.title.as_deref().unwrap_or("Path efficiency metrics");
    Ok(grouped_bars_svg(title, &series_names, &groups)?)
}

fn plot_radial_stacked(args: &PlotArgs) -> anyhow::Result<String> {
    let metrics_path = require_input(&args.metrics, "--metrics", "radial-stacked")?;
    let trials_path = require_input(&args.trials, "--trials", "radial-stacked")?;
    let metrics = metrics_from_csv(&read_text(metrics_path)?)?;
    let trials = trials_from_csv(&read_text(trials_path)?)?;

    // Condition key: width and distance bits. Values: per-metric sums and a
    // count, kept separately per modality.
    type Acc = BTreeMap<(u64, u64), ([f64; 7], usize)>;
    let mut halves: [Acc; 2] = [BTreeMap::new(), BTreeMap::new()];
    for (mi, ti) in join_metrics_to_trials(&metrics, &trials)? {
        let trial = &trials[ti];
        let half = match trial.spec.modality {
            Modality::NonAdaptive => 0,
            Modality::Adaptive => 1,
        };
        let key = (trial.spec.width_px.to_bits(), trial.spec.distance_px.to_bits());
        let entry = halves[half].entry(key).or_insert(([0.0; 7], 0));
        // Band thickness is a magnitude, and the offset metric is signed.
        for (acc, v) in entry.0.iter_mut().zip(metric_values(&metrics[mi].report)) {
            *acc += v.abs();
        }
        entry.1 += 1;
    }

    // Sector order is difficulty ascending, shared between the halves.
    let mut keys: Vec<(u64, u64)> =
        halves.iter().flat_map(|h| h.keys().copied()).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut ordered: Vec<((u64, u64), f64)> = Vec::with_capacity(keys.len());
    for key in keys {
        let (w, d) = (f64::from_bits(key.0), f64::from_bits(key.1));
        ordered.push((key, index_of_difficulty(d, w)?));
    }
    ordered.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut means: [Vec<[f64; 7]>; 2] = [Vec::new(), Vec::new()];
    for (side, acc) in halves.iter().enumerate() {
        for (key, _) in &ordered {
            let m = match acc.get(key) {
                Some((sums, n)) => {
                    let mut v = *sums;
                    for x in &mut v {
                        *x /= *n as f64;
                    }
                    v
                }
                None => [0.0; 7],
            };
            means[side].push(m);
        }
    }

    // Each band is normalized by its own maximum so one metric cannot
    // swamp the stack.
    let mut maxima = [0.0f64; 7];
    for side in &means {
        for v in side {
            for (m, x) in maxima.iter_mut().zip(v) {
                *m = m.max(*x);
            }
        }
    }
    let sectors = |side: &Vec<[f64; 7]>| -> Vec<RadialSector> {
        side.iter()
            .zip(&ordered)
            .map(|(v, (_, id))| RadialSector {
                label: format!("ID {id:.2}"),
                values: v
                    .iter()
                    .zip(maxima)
                    .map(|(x, m)| if m > 0.0 { x / m } else { 0.0 })
                    .collect(),
            })
            .collect()
    };

    let band_names: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    let title = args.title.as_deref().unwrap_or("Path efficiency by difficulty");
    Ok(radial_stacked_svg(
        title,
        &band_names,
        Modality::NonAdaptive.as_str(),
        &sectors(&means[0]),
        Modality::Adaptive.as_str(),
        &sectors(&means[1]),
    )?)
}
