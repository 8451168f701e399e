use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wagmf_cli::config::OptimizerEntry;
use wagmf_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "wagmf", version, about = "Run weighted adaptive gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute an experiment file; flags override the file's values.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Preset name; repeat to run several. Replaces the file's list.
        #[arg(long = "optimizer")]
        optimizers: Vec<String>,
        /// Comma-separated step-size grid applied to every optimizer.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long = "T")]
        rounds: Option<u64>,
        /// Repeat for several seeds. Replaces the file's list.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        bound_eval: bool,
        #[arg(long)]
        significance: bool,
    },
}

fn apply_flags(cfg: &mut ExperimentConfig, optimizers: Vec<String>, alpha: Vec<f64>, rounds: Option<u64>, seeds: Vec<u64>) -> CliResult<()> {
    if !optimizers.is_empty() {
        let mut entries = Vec::new();
        for name in optimizers {
            let existing = cfg.optimizers.iter().find(|e| e.name == name).cloned();
            entries.push(existing.unwrap_or(OptimizerEntry { name, alphas: Vec::new(), overrides: None }));
        }
        cfg.optimizers = entries;
    }
    if !alpha.is_empty() {
        for e in &mut cfg.optimizers {
            e.alphas = alpha.clone();
        }
    }
    if let Some(t) = rounds {
        cfg.t = t;
    }
    if !seeds.is_empty() {
        cfg.seeds = seeds;
    }
    cfg.validate()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run { config, optimizers, alpha, rounds, seeds, out, bound_eval, significance } = cli.command;
    let result = (|| {
        let mut cfg = ExperimentConfig::load(&config)?;
        cfg.bound_eval |= bound_eval;
        cfg.significance |= significance;
        apply_flags(&mut cfg, optimizers, alpha, rounds, seeds)?;
        let out = out.or_else(|| cfg.out.clone()).ok_or_else(|| CliError::Config("no output directory: pass --out or set `out`".into()))?;
        let report = wagmf_cli::run(&cfg, Some(&out))?;
        for o in &report.summary.optimizers {
            let score = o.best_score.map_or("diverged".to_string(), |s| format!("{s:.6}"));
            eprintln!("{:<16} best alpha {:<8} {} {}", o.name, o.best_alpha, report.summary.metric, score);
        }
        eprintln!("wrote {}", out.display());
        Ok::<_, CliError>(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wagmf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
