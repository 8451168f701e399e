//! Report files written next to the traces.

use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::{run_stem, Report};

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn write_reports(dir: &Path, cfg: &ExperimentConfig, report: &Report) -> CliResult<()> {
    let json = serde_json::to_string_pretty(&report.summary).map_err(CliError::runtime)?;
    std::fs::write(dir.join("summary.json"), json + "\n").map_err(CliError::runtime)?;

    let mut best = writer(&dir.join("best_alpha.csv"))?;
    best.write_record(["optimizer", "best_alpha", "metric", "score"]).map_err(CliError::runtime)?;
    for o in &report.summary.optimizers {
        best.write_record([o.name.clone(), o.best_alpha.to_string(), report.summary.metric.to_string(), opt(o.best_score)])
            .map_err(CliError::runtime)?;
    }
    best.flush().map_err(CliError::runtime)?;

    if cfg.bound_eval {
        let mut w = writer(&dir.join("bounds.csv"))?;
        w.write_record([
            "run", "optimizer", "alpha", "seed", "T", "regret", "thm1_term1", "thm1_term2", "thm1_term3", "thm1_total", "corollary1", "d_inf",
            "g_inf", "beta1", "lambda",
        ])
        .map_err(CliError::runtime)?;
        for r in &report.runs {
            let Some(b) = &r.bound else { continue };
            w.write_record([
                run_stem(cfg.problem.name(), &r.job),
                r.job.name.to_string(),
                r.job.alpha.to_string(),
                r.job.seed.to_string(),
                cfg.t.to_string(),
                b.regret.to_string(),
                b.thm1.term1.to_string(),
                b.thm1.term2.to_string(),
                b.thm1.term3.to_string(),
                b.thm1.total.to_string(),
                opt(b.corollary1),
                b.thm1.d_inf.to_string(),
                b.thm1.g_inf.to_string(),
                b.thm1.beta1.to_string(),
                b.thm1.lambda.to_string(),
            ])
            .map_err(CliError::runtime)?;
        }
        w.flush().map_err(CliError::runtime)?;
    }

    if let Some(tests) = &report.significance {
        let mut w = writer(&dir.join("significance.csv"))?;
        w.write_record(["optimizer_a", "optimizer_b", "t", "p", "significant"]).map_err(CliError::runtime)?;
        for t in tests {
            w.write_record([t.a.clone(), t.b.clone(), t.t.to_string(), t.p.to_string(), t.significant.to_string()])
                .map_err(CliError::runtime)?;
        }
        w.flush().map_err(CliError::runtime)?;
    }
    Ok(())
}
