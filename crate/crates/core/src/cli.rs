//! Command-line front end. Exit codes: 0 success, 2 usage or configuration
//! error, 1 runtime failure.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ablation::{self, AblationRow, ARMS};
use crate::checkpoint;
use crate::config::{self, Preset};
use crate::env::rollout_log::{read_records, write_records};
use crate::env::{CubeEnv, DrConfig};
use crate::error::Error;
use crate::numerics::SeededRng;
use crate::trainer::score::split_episodes;
use crate::trainer::{evaluate, score_episode, AgentPolicy, EpochMetrics, TrainConfig, Trainer};

pub const SEED_ENV: &str = "TRAJHER_SEED";

#[derive(Debug, Parser)]
#[command(name = "trajher", version, about = "Goal-trajectory cube carrying with asymmetric hindsight relabeling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the two-stage curriculum, writing metrics, events and checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the exploiting policy.
    Eval(EvalArgs),
    /// Score a rollout log.
    Score(ScoreArgs),
    /// Compare reward/relabeling presets at equal env-step budgets.
    Ablation(AblationArgs),
    /// Print the canonical configuration text.
    DumpConfig(DumpArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Configuration file; defaults apply when omitted.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long, default_value = "final", value_parser = parse_preset)]
    pub preset: Preset,
    /// Continue from `<out>/last.bin`.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many epochs in this invocation.
    #[arg(long)]
    pub epochs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub episodes: usize,
    #[arg(long)]
    pub stuck_recovery: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluate under domain randomization.
    #[arg(long)]
    pub dr: bool,
    /// Rollout log path; defaults to `eval_rollouts.jsonl` beside the checkpoint.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, default_value = "ablation")]
    pub out: PathBuf,
    /// Env steps per arm and seed.
    #[arg(long, default_value_t = 2_000_000)]
    pub budget_steps: u64,
    /// First seed; arms use seeds `seed..seed+k`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Success level compared between arms.
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    Preset::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
        format!("unknown preset {s:?}; expected one of {}", names.join(", "))
    })
}

/// Failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Score(a) => cmd_score(&a.log, out),
        Command::Ablation(a) => cmd_ablation(&a, out, err),
        Command::DumpConfig(a) => cmd_dump_config(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

/// Reads and parses a configuration file, or returns defaults for `None`.
pub fn load_config(path: Option<&Path>) -> CliResult<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    config::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Seed from the flag, else from the environment variable, else `fallback`.
pub fn resolve_seed(flag: Option<u64>, fallback: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(fallback),
    }
}

fn append_line(path: &Path, line: &str) -> CliResult<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    f.flush()?;
    Ok(())
}

/// Drops metrics rows beyond `epoch`, e.g. written after the last checkpoint.
fn truncate_metrics(path: &Path, epoch: u64) -> CliResult<()> {
    let text = fs::read_to_string(path)?;
    let mut kept = String::new();
    for line in text.lines() {
        let row_epoch = line.split(',').next().and_then(|f| f.parse::<u64>().ok());
        if row_epoch.is_none_or(|e| e <= epoch) {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    if kept != text {
        fs::write(path, kept)?;
    }
    Ok(())
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.preset.apply(&mut cfg);
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    cfg.validate()?;

    fs::create_dir_all(&a.out)?;
    let metrics_path = a.out.join("metrics.csv");
    let events_path = a.out.join("events.log");
    let last_path = a.out.join("last.bin");

    let mut trainer = if a.resume {
        let ckpt = checkpoint::load(&last_path)
            .map_err(|e| CliError::Runtime(format!("cannot resume from {}: {e}", last_path.display())))?;
        if ckpt.digest != config::digest(&cfg) {
            return Err(CliError::Runtime(format!(
                "config drift: {} was written with config digest {}, current config has {}",
                last_path.display(),
                ckpt.digest,
                config::digest(&cfg)
            )));
        }
        if ckpt.buffer.is_none() {
            return Err(CliError::Runtime(format!("{} holds no replay buffer", last_path.display())));
        }
        let t = ckpt.into_trainer()?;
        truncate_metrics(&metrics_path, t.progress.epoch)?;
        t
    } else {
        if metrics_path.exists() {
            return Err(CliError::Usage(format!(
                "{} already holds a run; pass --resume or choose another --out",
                a.out.display()
            )));
        }
        let mut f = BufWriter::new(File::create(&metrics_path)?);
        writeln!(f, "# {}", a.preset.describe(&cfg))?;
        writeln!(f, "# config_digest {}", config::digest(&cfg))?;
        writeln!(f, "{}", EpochMetrics::CSV_HEADER)?;
        f.flush()?;
        File::create(&events_path)?;
        Trainer::new(cfg)?
    };

    let mut ran = 0u64;
    while a.epochs.is_none_or(|n| ran < n) {
        let Some(outcome) = trainer.next_epoch()? else { break };
        ran += 1;
        let m = &outcome.metrics;
        append_line(&metrics_path, &m.csv_row())?;
        for e in &outcome.events {
            append_line(&events_path, &e.to_string())?;
        }
        checkpoint::save(&a.out.join(format!("epoch_{:04}.bin", m.epoch)), &trainer, false)?;
        checkpoint::save(&last_path, &trainer, true)?;
        let _ = writeln!(
            err,
            "epoch {} {} env_steps {} eval_success {}",
            m.epoch, m.stage, m.env_steps, m.eval_success_rate
        );
    }
    if trainer.is_finished() {
        checkpoint::save(&a.out.join("final.bin"), &trainer, false)?;
    }
    writeln!(
        out,
        "{} epochs, {} env steps, stage {}",
        trainer.progress.epoch,
        trainer.progress.env_steps,
        trainer.progress.stage.label()
    )?;
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.episodes == 0 {
        return Err(CliError::Usage("--episodes must be positive".into()));
    }
    let seed = resolve_seed(a.seed, 0)?;
    let ckpt = checkpoint::load(&a.checkpoint)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", a.checkpoint.display())))?;
    let cfg = ckpt.config;
    let dr = DrConfig {
        enabled: a.dr,
        ..cfg.dr
    };
    let mut env = CubeEnv::new(cfg.env, dr, cfg.her.reward)?;
    let mut policy = AgentPolicy {
        agent: &ckpt.agent,
        exploration: cfg.exploration,
    };
    let mut rng = SeededRng::new(seed);
    let report = evaluate(&mut policy, &mut env, a.episodes, a.stuck_recovery, cfg.score, &mut rng)?;

    let log_path = a
        .log
        .clone()
        .unwrap_or_else(|| a.checkpoint.with_file_name("eval_rollouts.jsonl"));
    let mut w = BufWriter::new(File::create(&log_path)?);
    for ep in &report.episodes {
        write_records(&mut w, &ep.records)?;
    }
    w.flush()?;

    for (i, ep) in report.episodes.iter().enumerate() {
        writeln!(
            out,
            "episode {i} success {} score {:.6} injected_steps {}",
            ep.success,
            ep.score,
            ep.injected_steps.len()
        )?;
    }
    let wins = report.episodes.iter().filter(|e| e.success).count();
    writeln!(out, "success_rate {:.4} ({wins}/{})", report.success_rate, a.episodes)?;
    writeln!(out, "score {:.6} ± {:.6}", report.score_mean, report.score_std)?;
    writeln!(out, "log {}", log_path.display())?;
    Ok(())
}

pub fn cmd_score(path: &Path, out: &mut dyn Write) -> CliResult<()> {
    let f = File::open(path).map_err(|e| CliError::Usage(format!("cannot open log {}: {e}", path.display())))?;
    let records = read_records(BufReader::new(f)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let episodes = split_episodes(&records).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if episodes.is_empty() {
        return Err(CliError::Runtime(format!("{}: log holds no episodes", path.display())));
    }
    let cfg = crate::trainer::ScoreConfig::default();
    let mut total = 0.0;
    for ep in &episodes {
        let s = score_episode(ep, cfg)?;
        writeln!(out, "episode {} score {s:.6}", ep[0].episode)?;
        total += s;
    }
    writeln!(out, "mean {:.6}", total / episodes.len() as f64)?;
    Ok(())
}

pub fn cmd_ablation(a: &AblationArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be positive".into()));
    }
    let base = load_config(a.config.as_deref())?;
    let first_seed = resolve_seed(a.seed, base.seed)?;
    let epochs = ablation::epochs_for_budget(&base, a.budget_steps);
    if epochs == 0 {
        return Err(CliError::Usage(format!(
            "--budget-steps {} is below one epoch ({} steps)",
            a.budget_steps,
            base.steps_per_epoch()
        )));
    }
    fs::create_dir_all(&a.out)?;
    let csv = a.out.join("ablation.csv");
    fs::write(&csv, format!("{}\n", ablation::CSV_HEADER))?;

    let mut rows = Vec::new();
    for arm in ARMS {
        for seed in first_seed..first_seed + a.seeds {
            let cfg = ablation::arm_config(&base, arm, seed);
            ablation::run_arm(cfg, epochs, |m| {
                let row = AblationRow {
                    arm,
                    seed,
                    epoch: m.epoch,
                    env_steps: m.env_steps,
                    eval_success: m.eval_success_rate,
                };
                append_line(&csv, &row.csv_row()).map_err(|e| Error::Input(e.to_string()))?;
                let _ = writeln!(err, "{}", row.csv_row());
                rows.push(row);
                Ok(())
            })?;
        }
    }

    let mut summary = String::new();
    summary.push_str(&format!(
        "budget {} env steps per run ({epochs} epochs), seeds {first_seed}..{}\n",
        epochs * base.steps_per_epoch(),
        first_seed + a.seeds
    ));
    let fmt_steps = |s: Option<u64>| s.map_or("never".to_string(), |v| v.to_string());
    for arm in ARMS {
        let curve = ablation::median_curve(&rows, arm);
        let end = curve.last().map_or(f64::NAN, |c| c.1);
        summary.push_str(&format!(
            "{} median_final_success {end} steps_to_0.5 {} steps_to_{} {}\n",
            arm.name(),
            fmt_steps(ablation::first_reaching(&curve, 0.5)),
            a.threshold,
            fmt_steps(ablation::first_reaching(&curve, a.threshold)),
        ));
    }
    let c = ablation::compare(&rows, a.threshold);
    summary.push_str(&format!(
        "final first reaches 0.5 at {}; her-standard median there {:?}; lower {}\n",
        fmt_steps(c.final_half_steps),
        c.standard_at_half,
        c.lower_at_half
    ));
    summary.push_str(&format!(
        "steps to {}: final {} her-standard {}; final no slower {}\n",
        a.threshold,
        fmt_steps(c.final_threshold_steps),
        fmt_steps(c.standard_threshold_steps),
        c.no_slower
    ));
    fs::write(a.out.join("summary.txt"), &summary)?;
    write!(out, "{summary}")?;
    Ok(())
}

pub fn cmd_dump_config(a: &DumpArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(p) = a.preset {
        p.apply(&mut cfg);
    }
    write!(out, "{}", config::to_text(&cfg))?;
    Ok(())
}
