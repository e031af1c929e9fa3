use std::path::PathBuf;
use std::process::ExitCode;

use cgrl_harness::{
    export_table, metrics, mi, render, report, run_eval, run_training, Checkpoint, ExperimentConfig, ModelId, Result,
    Trajectory,
};
use cgrl_sim::Task;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cgrl", version, about = "Causal graph RL for unsignalized intersections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one (model, task, seed) cell.
    Train {
        /// TOML config; the desk preset when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: ModelId,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint; prints the metrics report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        /// Also write the report and per-episode rows into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record the first episode here for `render`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Collect `*.report.toml` files into a results table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One SVG frame per decision step of a recorded trajectory.
    Render {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rényi entropy, MI and conditional MI of the column blocks of a CSV.
    MiEstimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
    },
}

fn write(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| cgrl_harness::HarnessError::Io { path: path.display().to_string(), source })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, model, task, seed, out } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?.with_model(model),
                None => ExperimentConfig::desk(model),
            };
            cfg.task = task;
            cfg.scenario.ego_task = task;
            let res = run_training(&cfg, seed, Some(&out))?;
            let last = res.checkpoint_paths.last().map(|p| p.display().to_string()).unwrap_or_default();
            println!("trained {} episodes, {} gradient steps; last checkpoint {last}", res.logs.len(), res.checkpoint.step);
        }
        Command::Eval { checkpoint, task, episodes, seed, out, trajectory } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let res = run_eval(&ck, task, episodes, seed, trajectory.is_some())?;
            let text = res.report.to_toml();
            print!("{text}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .map_err(|source| cgrl_harness::HarnessError::Io { path: dir.display().to_string(), source })?;
                let stem = format!("{}-{task}-{seed}", res.report.model);
                write(&dir.join(format!("{stem}.report.toml")), &text)?;
                metrics::write_episode_csv(&dir.join(format!("{stem}.episodes.csv")), &res.logs)?;
            }
            if let (Some(p), Some(t)) = (trajectory, res.trajectory) {
                write(&p, &t.to_toml())?;
            }
        }
        Command::Report { input, out } => {
            let table = export_table(&report::load_reports(&input)?)?;
            write(&out, &table)?;
            print!("{table}");
        }
        Command::Render { log, out } => {
            let text = std::fs::read_to_string(&log)
                .map_err(|source| cgrl_harness::HarnessError::Io { path: log.display().to_string(), source })?;
            let frames = render::render_episode(&Trajectory::from_toml(&text)?, &out)?;
            println!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::MiEstimate { input, alpha } => {
            for line in mi::estimate(&mi::read_blocks(&input)?, alpha)? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
