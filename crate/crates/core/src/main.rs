//! Command-line entry point: train, evaluate, replay traces, plot metrics.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use merge_marl::env::{RewardMode, TrafficMode};
use merge_marl::neural::checkpoint;
use merge_marl::plot::plot_metrics;
use merge_marl::runconfig::RunConfig;
use merge_marl::trace::{read_trace, TraceWriter};
use merge_marl::trainer::{
    self, run_episode, run_episode_traced, PolicyMode, TrainerConfig,
};

#[derive(Parser)]
#[command(name = "merge-marl", about = "On-ramp merging simulator and trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the greedy policy.
    Eval(EvalArgs),
    /// Print an episode trace as text frames.
    Replay(ReplayArgs),
    /// Render metrics CSV to SVG charts.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Easy,
    Medium,
    Hard,
}

impl From<ModeArg> for TrafficMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Easy => TrafficMode::Easy,
            ModeArg::Medium => TrafficMode::Medium,
            ModeArg::Hard => TrafficMode::Hard,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardModeArg {
    Local,
    Global,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Traffic density level.
    #[arg(long)]
    mode: Option<ModeArg>,
    /// RNG seed for the whole run.
    #[arg(long)]
    seed: Option<u64>,
    /// Supervisor prediction horizon in decision steps.
    #[arg(long)]
    tn: Option<usize>,
    /// Disable the safety supervisor.
    #[arg(long)]
    no_supervisor: bool,
    /// Reward sharing: neighborhood average or global average.
    #[arg(long)]
    reward_mode: Option<RewardModeArg>,
}

impl CommonArgs {
    fn build(&self) -> anyhow::Result<TrainerConfig> {
        let run = match &self.config {
            Some(path) => RunConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        let mut cfg = run.to_trainer();
        if let Some(m) = self.mode {
            cfg.env.mode = m.into();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tn {
            cfg.supervisor.horizon = t;
        }
        if self.no_supervisor {
            cfg.supervisor_enabled = false;
        }
        if let Some(r) = self.reward_mode {
            cfg.env.reward_mode = match r {
                RewardModeArg::Local => RewardMode::Local,
                RewardModeArg::Global => RewardMode::GlobalAverage,
            };
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Warm-start parameters from a checkpoint (curriculum stage).
    #[arg(long)]
    init_from: Option<PathBuf>,
    /// Environment decision steps to train for.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory for metrics and checkpoints.
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
    /// Evaluate every N training episodes.
    #[arg(long)]
    eval_every: Option<usize>,
    /// Greedy episodes per evaluation point.
    #[arg(long)]
    eval_episodes: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of greedy episodes.
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Also dump a JSONL trace of one episode to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// JSONL trace produced by `eval --trace`.
    #[arg(long)]
    trace: PathBuf,
    /// Print every Nth step.
    #[arg(long, default_value_t = 5)]
    every: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// Metrics CSV produced by training.
    #[arg(long)]
    metrics: PathBuf,
    /// Directory for the SVG output.
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = args.common.build()?;
    if let Some(s) = args.steps {
        cfg.total_steps = s;
    }
    if let Some(n) = args.eval_every {
        cfg.eval_every_episodes = n;
    }
    if let Some(n) = args.eval_episodes {
        cfg.eval_episodes = n;
    }
    cfg.init_from = args.init_from;
    cfg.out_dir = Some(args.out.clone());
    let summary = trainer::train(&cfg)?;
    println!(
        "trained {} episodes / {} steps; best eval reward {:.3}; output in {}",
        summary.episodes,
        summary.steps,
        summary.best_eval,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let cfg = args.common.build()?;
    let ckpt = checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    if let Some(path) = &args.trace {
        let mut writer = TraceWriter::create(path)?;
        run_episode_traced(&cfg, &ckpt.params, PolicyMode::Greedy, &mut rng, &mut writer)?;
        writer.finish()?;
        println!("trace written to {}", path.display());
    }

    let mut reward = 0.0;
    let mut speed = 0.0;
    let mut collisions = 0usize;
    let mut interventions = 0usize;
    let mut decisions = 0usize;
    for _ in 0..args.episodes {
        let o = run_episode(&cfg, &ckpt.params, PolicyMode::Greedy, &mut rng, None)?;
        reward += o.return_mean;
        speed += o.avg_speed;
        collisions += usize::from(o.collision);
        interventions += o.interventions;
        decisions += o.decisions;
    }
    let n = args.episodes.max(1) as f64;
    println!("episodes:          {}", args.episodes);
    println!("mean reward:       {:.3}", reward / n);
    println!("mean speed:        {:.2} m/s", speed / n);
    println!("collision rate:    {:.3}", collisions as f64 / n);
    println!(
        "intervention rate: {:.3}",
        if decisions > 0 {
            interventions as f64 / decisions as f64
        } else {
            0.0
        }
    );
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> anyhow::Result<()> {
    let records = read_trace(&args.trace)?;
    if records.is_empty() {
        anyhow::bail!("trace is empty");
    }
    let max_step = records.iter().map(|r| r.step).max().unwrap();
    let every = args.every.max(1);
    // 5 m per column over the 520 m road.
    const COLS: usize = 104;
    for step in (0..=max_step).step_by(every) {
        let frame: Vec<_> = records.iter().filter(|r| r.step == step).collect();
        if frame.is_empty() {
            continue;
        }
        let mut lanes = [[b'.'; COLS], [b'.'; COLS]];
        for r in &frame {
            let col = ((r.x / 5.0) as usize).min(COLS - 1);
            let lane = r.lane.min(1);
            lanes[lane][col] = if r.crashed {
                b'X'
            } else if matches!(r.kind, merge_marl::VehicleKind::Av) {
                b'A'
            } else {
                b'H'
            };
        }
        println!("t = {:5.1} s (step {step})", frame[0].time);
        println!("  main: {}", String::from_utf8_lossy(&lanes[0]));
        println!("  ramp: {}", String::from_utf8_lossy(&lanes[1]));
        for r in &frame {
            if let Some(action) = &r.action {
                println!(
                    "    av {} x {:6.1} v {:5.2} action {:?}{}",
                    r.vehicle_id,
                    r.x,
                    r.speed,
                    action,
                    if r.replaced { " (supervised)" } else { "" }
                );
            }
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Replay(args) => cmd_replay(args),
        Command::Plot(args) => {
            let files = plot_metrics(&args.metrics, &args.out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}
