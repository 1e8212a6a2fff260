use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ellipse_servo::config::{ConfigError, ConfigOverrides, RunConfig, RunManifest};
use ellipse_servo::metrics::{
    cross_arena_normalized, normalize, summarize, summarize_traces, MetricsOptions,
    SensitivityReport,
};
use ellipse_servo::protocol::{CommandLink, MockTransport, BAUD_RATE};
use ellipse_servo::telemetry::{self, LogRow};
use ellipse_servo::trial::{run_batch, Sample};
use ellipse_servo::{step, ImagePoint, Sector};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_TRACKING_LOST: u8 = 2;
pub const EXIT_IO: u8 = 3;

pub const OUT_DIR_ENV: &str = "ELLIPSE_SERVO_OUT_DIR";

/// Mock serial buffer for replays; roomy enough that a 30 Hz log never
/// backs up at 9600 bps.
const REPLAY_BUFFER_BYTES: usize = 256;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

#[derive(Debug, Parser)]
#[command(
    name = "ellipse-servo",
    version,
    about = "Elliptical ROI pan/tilt tracking: simulate, replay, report"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a batch of simulated trials and write telemetry, a summary and a manifest.
    Simulate(SimulateArgs),
    /// Run a recorded coordinate log through the controller.
    Replay(ReplayArgs),
    /// Summarize telemetry CSVs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Flat TOML config file; flags take precedence over its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub roi_frac_x: Option<f64>,
    #[arg(long)]
    pub roi_frac_y: Option<f64>,
    /// Gimbal command magnitude.
    #[arg(long)]
    pub rate_rad_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "manifest")]
    pub arena: Option<u32>,
    #[arg(long, conflicts_with = "manifest")]
    pub trials: Option<usize>,
    /// First seed; trial i uses seed + i.
    #[arg(long, conflicts_with = "manifest")]
    pub seed: Option<u64>,
    #[arg(long, visible_alias = "duration", conflicts_with = "manifest")]
    pub duration_s: Option<f64>,
    #[arg(long, visible_alias = "dt", conflicts_with = "manifest")]
    pub dt_s: Option<f64>,
    /// Horizontal field of view.
    #[arg(long, conflicts_with = "manifest")]
    pub fov_deg: Option<f64>,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Rerun the batch recorded in a manifest.
    #[arg(long, conflicts_with_all = ["config", "roi_frac_x", "roi_frac_y", "rate_rad_s"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// CSV of `t,x,y` rows, pixels from the top-left corner; header optional.
    pub log: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Resend an unchanged command after this long; 0 disables.
    #[arg(long)]
    pub keepalive_s: Option<f64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Telemetry CSVs summarized together.
    #[arg(required_unless_present_any = ["group", "fixture"], conflicts_with = "group")]
    pub files: Vec<PathBuf>,
    /// A comma-separated set of CSVs summarized as one arena; repeat per arena.
    #[arg(long, value_name = "CSV,CSV,...")]
    pub group: Vec<String>,
    /// Per-arena `MEAN_S:N` pair to include in the cross-arena value; repeatable.
    #[arg(long)]
    pub fixture: Vec<String>,
}

/// Batch summary, written by `simulate` and printed by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub n: usize,
    pub n_per_trial: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_s: Option<f64>,
    pub success: bool,
    pub yaw_active_s: f64,
    pub pitch_active_s: f64,
    pub overlap_s: f64,
    pub per_peak_s: Vec<f64>,
}

impl From<&SensitivityReport<f64>> for Summary {
    fn from(r: &SensitivityReport<f64>) -> Self {
        Summary {
            trials: r.trials,
            n: r.n,
            n_per_trial: r.n_per_trial,
            mean_s: r.mean_s,
            normalized_s: r.normalized_s,
            success: r.success,
            yaw_active_s: r.yaw_active_s,
            pitch_active_s: r.pitch_active_s,
            overlap_s: r.overlap_s,
            per_peak_s: r.per_peak_s.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct GroupSummary {
    files: Vec<String>,
    #[serde(flatten)]
    summary: Summary,
}

#[derive(Debug, Serialize)]
struct FixtureSummary {
    mean_s: f64,
    n_per_trial: f64,
    normalized_s: f64,
}

#[derive(Debug, Serialize)]
struct MultiReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_arena_normalized_s: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    group: Vec<GroupSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fixture: Vec<FixtureSummary>,
}

/// Exit status for a failed command.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|c| {
        c.is::<Usage>()
            || c.downcast_ref::<ConfigError>()
                .is_some_and(ConfigError::is_usage)
    });
    if usage {
        EXIT_USAGE
    } else {
        EXIT_IO
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Replay(a) => replay(a),
        Command::Report(a) => report(a),
    }
}

fn load_overrides(o: &Overrides) -> Result<ConfigOverrides> {
    let file = match &o.config {
        Some(p) => ConfigOverrides::load(p)?,
        None => ConfigOverrides::default(),
    };
    Ok(file.overlay(ConfigOverrides {
        roi_frac_x: o.roi_frac_x,
        roi_frac_y: o.roi_frac_y,
        rate_rad_s: o.rate_rad_s,
        ..Default::default()
    }))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("summary serializes")
}

fn simulate(a: SimulateArgs) -> Result<u8> {
    let cfg = match &a.manifest {
        Some(path) => RunManifest::load(path)?.config,
        None => {
            let o = load_overrides(&a.overrides)?.overlay(ConfigOverrides {
                arena: a.arena,
                trials: a.trials,
                seed: a.seed,
                duration_s: a.duration_s,
                dt_s: a.dt_s,
                fov_deg: a.fov_deg,
                ..Default::default()
            });
            RunConfig::resolve(o)?
        }
    };
    let seeds = cfg.seeds();
    let records =
        run_batch(&cfg.trial_config()?, seeds.len(), &seeds).map_err(ConfigError::from)?;

    create_dir(&a.out_dir)?;
    let mut artifacts = Vec::with_capacity(records.len() + 1);
    for (i, (r, seed)) in records.iter().zip(&seeds).enumerate() {
        let name = format!("trial_{i:03}_seed_{seed}.csv");
        telemetry::write_telemetry_file(&a.out_dir.join(&name), &r.samples)?;
        artifacts.push(name);
    }
    let report = summarize(&records, MetricsOptions::default());
    let summary = Summary::from(&report);
    write_file(&a.out_dir.join("summary.toml"), &to_toml(&summary))?;
    artifacts.push("summary.toml".to_string());
    let manifest = RunManifest::new(cfg, artifacts)?;
    write_file(&a.out_dir.join("manifest.toml"), &manifest.to_toml())?;

    print!("{}", to_toml(&summary));
    if summary.success {
        Ok(EXIT_OK)
    } else {
        eprintln!("tracking lost in at least one trial");
        Ok(EXIT_TRACKING_LOST)
    }
}

fn replay(a: ReplayArgs) -> Result<u8> {
    let o = load_overrides(&a.overrides)?.overlay(ConfigOverrides {
        keepalive_s: a.keepalive_s,
        ..Default::default()
    });
    let cfg = RunConfig::resolve(o)?;
    let controller = cfg.controller()?;
    let frame = controller.frame();
    let roi = *controller.roi();
    let rows = telemetry::read_log_file(&a.log)?;

    let samples: Vec<Sample<f64>> = rows
        .iter()
        .map(|&LogRow { t, x, y }| {
            let p = ImagePoint::from_raw(y, x, frame);
            let cmd = step(p, &controller);
            Sample {
                t,
                x: p.x,
                y: p.y,
                p: roi.relative_position(p),
                sector: Sector::classify(p.to_polar().theta),
                yaw_cmd: cmd.yaw_rate,
                pitch_cmd: cmd.pitch_rate,
                visible: frame.contains(p),
            }
        })
        .collect();

    let keepalive = (cfg.keepalive_s > 0.0).then_some(cfg.keepalive_s);
    let mut link = CommandLink::new(
        MockTransport::new(BAUD_RATE, REPLAY_BUFFER_BYTES),
        keepalive,
    );
    for s in &samples {
        let cmd = ellipse_servo::GimbalCommand::new(s.yaw_cmd, s.pitch_cmd);
        link.submit(&cmd, s.t)
            .with_context(|| format!("sending the command at t = {}", s.t))?;
    }

    create_dir(&a.out_dir)?;
    let stem = a
        .log
        .file_stem()
        .map_or("replay".into(), |s| s.to_string_lossy().into_owned());
    let commands = a.out_dir.join(format!("{stem}_commands.csv"));
    telemetry::write_telemetry_file(&commands, &samples)?;
    let mut log = String::new();
    for f in link.transport().log() {
        log.push_str(&format!("{}\t{}\n", f.t, f.text));
    }
    let frames = a.out_dir.join(format!("{stem}_frames.log"));
    write_file(&frames, &log)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "rows = {}", samples.len())?;
    writeln!(out, "frames = {}", link.transport().log().len())?;
    writeln!(out, "wire_bytes = {}", link.transport().total_bytes())?;
    writeln!(out, "commands = {:?}", commands.display().to_string())?;
    writeln!(out, "frame_log = {:?}", frames.display().to_string())?;
    Ok(EXIT_OK)
}

fn summarize_files(files: &[PathBuf]) -> Result<Summary> {
    let mut traces = Vec::with_capacity(files.len());
    for f in files {
        let samples = telemetry::read_telemetry_file(f)?;
        let dt = telemetry::infer_dt(&samples, f)?;
        traces.push((samples, dt));
    }
    let refs: Vec<(&[Sample<f64>], f64)> =
        traces.iter().map(|(s, dt)| (s.as_slice(), *dt)).collect();
    Ok(Summary::from(&summarize_traces(
        &refs,
        MetricsOptions::default(),
    )))
}

fn parse_fixture(s: &str) -> Result<(f64, f64)> {
    let bad = || Usage(format!("--fixture expects MEAN_S:N with N > 0, got '{s}'"));
    let (m, n) = s.split_once(':').ok_or_else(bad)?;
    let m: f64 = m.trim().parse().map_err(|_| bad())?;
    let n: f64 = n.trim().parse().map_err(|_| bad())?;
    if !(m.is_finite() && n.is_finite() && n > 0.0) {
        return Err(bad().into());
    }
    Ok((m, n))
}

fn report(a: ReportArgs) -> Result<u8> {
    let fixtures = a
        .fixture
        .iter()
        .map(|s| parse_fixture(s))
        .collect::<Result<Vec<_>>>()?;
    if a.group.is_empty() && fixtures.is_empty() {
        print!("{}", to_toml(&summarize_files(&a.files)?));
        return Ok(EXIT_OK);
    }

    let mut sets: Vec<Vec<PathBuf>> = Vec::new();
    if !a.files.is_empty() {
        sets.push(a.files.clone());
    }
    for g in &a.group {
        let files: Vec<PathBuf> = g
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(PathBuf::from)
            .collect();
        if files.is_empty() {
            return Err(Usage(format!("--group '{g}' names no files")).into());
        }
        sets.push(files);
    }

    let mut group = Vec::with_capacity(sets.len());
    for files in &sets {
        group.push(GroupSummary {
            files: files.iter().map(|f| f.display().to_string()).collect(),
            summary: summarize_files(files)?,
        });
    }
    let fixture: Vec<FixtureSummary> = fixtures
        .iter()
        .map(|&(mean_s, n)| FixtureSummary {
            mean_s,
            n_per_trial: n,
            normalized_s: normalize(mean_s, n).expect("n is positive"),
        })
        .collect();
    let per_arena: Vec<Option<f64>> = group
        .iter()
        .map(|g| g.summary.normalized_s)
        .chain(fixture.iter().map(|f| Some(f.normalized_s)))
        .collect();
    let out = MultiReport {
        cross_arena_normalized_s: cross_arena_normalized(&per_arena),
        group,
        fixture,
    };
    print!("{}", to_toml(&out));
    Ok(EXIT_OK)
}
