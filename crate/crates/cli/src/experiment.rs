//! Executing an [`ExperimentConfig`]: one run per (optimizer, alpha, seed).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use wagmf::analysis::{corollary1_bound, regret, students_t_test, thm1_bound, BoundReport};
use wagmf::driver::{Simulation, StepView};
use wagmf::optimizers::{make_preset, Preset, PresetName};
use wagmf::problems::{gaussian_blobs, load_dataset, LossOracle, MinibatchSoftmax, Quadratic, ReddiOnline, ReddiStochastic};
use wagmf::{Error, FeasibleSet, Vector};

use crate::config::{DataSource, ExperimentConfig, ProblemConfig};
use crate::error::{CliError, CliResult};

/// Traces longer than this are subsampled.
pub const MAX_TRACE_ROWS: u64 = 100_000;
/// JSONL iterate sidecars are written only up to this dimension.
pub const SIDECAR_MAX_DIM: usize = 16;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Log every `ceil(T / 1e5)`-th round, and always the last one.
pub fn log_stride(t_total: u64) -> u64 {
    t_total.div_ceil(MAX_TRACE_ROWS).max(1)
}

/// One row of a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: u64,
    pub loss: f64,
    /// `R(t) / t`, absent when the problem has no known optimum.
    pub avg_regret: Option<f64>,
    pub x_norm: f64,
    pub g_norm: f64,
    pub alpha_t: f64,
}

/// A problem ready to run.
pub struct Resolved {
    pub oracle: Arc<dyn LossOracle>,
    pub set: FeasibleSet,
    pub x0: Vector,
    pub comparator: Option<Vector>,
    /// Trailing rows averaged for the loss metric.
    pub loss_window: usize,
    pub oco: bool,
}

pub fn resolve(cfg: &ExperimentConfig) -> CliResult<Resolved> {
    cfg.validate()?;
    let (oracle, loss_window): (Arc<dyn LossOracle>, usize) = match &cfg.problem {
        ProblemConfig::ReddiStochastic => (Arc::new(ReddiStochastic), 1),
        ProblemConfig::ReddiOnline => (Arc::new(ReddiOnline), 1),
        ProblemConfig::Quadratic { a, x_star } => {
            let q = Quadratic::new(Vector::new(a.clone()).map_err(CliError::config)?, Vector::new(x_star.clone()).map_err(CliError::config)?)
                .map_err(CliError::config)?;
            (Arc::new(q), 1)
        }
        ProblemConfig::Softmax { data, reg, batch_size } => {
            let dataset = match data {
                DataSource::Synthetic { n, d, k, separation, seed } => {
                    gaussian_blobs(*n, *d, *k, *separation, *seed).map_err(CliError::config)?
                }
                other => load_dataset(&other.file_format(&cfg.base_dir).expect("file source")).map_err(CliError::runtime)?,
            };
            let o = MinibatchSoftmax::new(Arc::new(dataset), *batch_size, *reg).map_err(CliError::config)?;
            let window = if o.is_stochastic() { o.batches_per_epoch() } else { 1 };
            (Arc::new(o), window)
        }
    };
    let dim = oracle.dim();
    let set = cfg.feasible_or_default().resolve(dim).map_err(CliError::config)?;
    let x0 = match &cfg.x0 {
        Some(x) => {
            let x = Vector::new(x.clone()).map_err(CliError::config)?;
            if x.dim() != dim || !set.contains(x.as_slice()) {
                return Err(CliError::Config(format!("x0 must be a point of the feasible set in dimension {dim}")));
            }
            x
        }
        None => set.project(&wagmf::DiagonalMetric::identity(dim), &Vector::zeros(dim)).map_err(CliError::config)?,
    };
    let comparator = oracle.optimum(&set);
    Ok(Resolved { oracle, set, x0, comparator, loss_window, oco: cfg.problem.is_oco() })
}

#[derive(Debug, Clone)]
pub struct Job {
    pub optimizer: usize,
    pub name: PresetName,
    pub alpha: f64,
    pub seed: u64,
    pub preset: Preset,
}

pub fn jobs(cfg: &ExperimentConfig) -> CliResult<Vec<Job>> {
    let mut out = Vec::new();
    for (i, entry) in cfg.optimizers.iter().enumerate() {
        let name: PresetName = entry.name.parse().map_err(CliError::config)?;
        let overrides = cfg.overrides_for(i);
        let mut alphas = entry.alphas.clone();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        for alpha in alphas {
            let preset = make_preset(name, alpha, Some(&overrides)).map_err(CliError::config)?;
            for &seed in &cfg.seeds {
                out.push(Job { optimizer: i, name, alpha, seed, preset: preset.clone() });
            }
        }
    }
    Ok(out)
}

/// File stem shared by a run's trace and sidecar.
pub fn run_stem(problem: &str, job: &Job) -> String {
    let name = job.name.to_string().replace(['(', ')'], "_").trim_end_matches('_').to_string();
    format!("{problem}_{name}_a{}_s{}", job.alpha, job.seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub regret: f64,
    pub thm1: BoundReport,
    /// Only for `wada` with `lambda < 1`.
    pub corollary1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub job: Job,
    pub rows: Vec<TraceRow>,
    pub final_x: Vec<f64>,
    /// Ranking score, `+inf` for a diverged run.
    pub metric: f64,
    pub diverged: bool,
    pub bound: Option<BoundRow>,
}

/// Score used for step-size selection, computed from the logged rows only:
/// the last average regret for online problems, otherwise the mean loss
/// over the last `window` rows.
pub fn rows_metric(rows: &[TraceRow], oco: bool, window: usize) -> f64 {
    let Some(last) = rows.last() else { return f64::INFINITY };
    let value = if oco {
        last.avg_regret.unwrap_or(f64::INFINITY)
    } else {
        let w = window.clamp(1, rows.len());
        rows[rows.len() - w..].iter().map(|r| r.loss).sum::<f64>() / w as f64
    };
    if value.is_finite() {
        value
    } else {
        f64::INFINITY
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct Sinks {
    csv: csv::Writer<BufWriter<File>>,
    jsonl: Option<BufWriter<File>>,
}

impl Sinks {
    fn open(dir: &Path, stem: &str, dim: usize) -> CliResult<Self> {
        let create = |p: PathBuf| File::create(&p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())));
        let mut csv = csv::Writer::from_writer(BufWriter::new(create(dir.join(format!("{stem}.csv")))?));
        csv.write_record(["t", "loss", "avg_regret", "x_norm", "g_norm", "alpha_t"]).map_err(CliError::runtime)?;
        let jsonl = if dim <= SIDECAR_MAX_DIM { Some(BufWriter::new(create(dir.join(format!("{stem}.jsonl")))?)) } else { None };
        Ok(Self { csv, jsonl })
    }

    fn write(&mut self, row: &TraceRow, x: &[f64]) -> CliResult<()> {
        let avg = row.avg_regret.map(|v| v.to_string()).unwrap_or_default();
        self.csv
            .write_record([row.t.to_string(), row.loss.to_string(), avg, row.x_norm.to_string(), row.g_norm.to_string(), row.alpha_t.to_string()])
            .map_err(CliError::runtime)?;
        if let Some(j) = self.jsonl.as_mut() {
            let line = serde_json::json!({ "t": row.t, "x": x });
            writeln!(j, "{line}").map_err(CliError::runtime)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> CliResult<()> {
        self.csv.flush().map_err(CliError::runtime)?;
        if let Some(j) = self.jsonl.as_mut() {
            j.flush().map_err(CliError::runtime)?;
        }
        Ok(())
    }
}

/// Run one job, streaming its trace into `out` when given.
pub fn run_job(cfg: &ExperimentConfig, problem: &Resolved, job: &Job, out: Option<&Path>) -> CliResult<RunOutcome> {
    let t_total = cfg.t;
    let stride = log_stride(t_total);
    let mut sinks = match out {
        Some(dir) => Some(Sinks::open(dir, &run_stem(cfg.problem.name(), job), problem.oracle.dim())?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut cumulative = 0.0;
    let mut sink_error = None;
    let sim = Simulation {
        preset: &job.preset,
        oracle: problem.oracle.as_ref(),
        set: &problem.set,
        x0: problem.x0.clone(),
        rounds: t_total,
        seed: job.seed,
        comparator: problem.comparator.as_ref(),
    };
    let mut final_x = problem.x0.as_slice().to_vec();
    let observe = |view: &StepView| -> wagmf::Result<()> {
        if let Some(c) = view.comparator_loss {
            cumulative += view.loss - c;
        }
        final_x.clear();
        final_x.extend_from_slice(view.next_x);
        if view.t.is_multiple_of(stride) || view.t == t_total {
            let row = TraceRow {
                t: view.t,
                loss: view.loss,
                avg_regret: view.comparator_loss.map(|_| cumulative / view.t as f64),
                x_norm: norm(view.x),
                g_norm: norm(view.g),
                alpha_t: view.alpha,
            };
            if let Some(s) = sinks.as_mut() {
                if let Err(e) = s.write(&row, view.x) {
                    sink_error = Some(e);
                    return Err(Error::Io { path: "trace".into(), message: "write failed".into() });
                }
            }
            rows.push(row);
        }
        Ok(())
    };

    let (result, trace) = if cfg.bound_eval {
        let mut trace_holder = None;
        let r = record_with(sim, observe).map(|(trace, _)| trace_holder = Some(trace));
        (r, trace_holder)
    } else {
        (sim.run(observe).map(|_| ()), None)
    };
    if let Some(s) = sinks.as_mut() {
        s.flush()?;
    }
    if let Some(e) = sink_error {
        return Err(e);
    }
    let diverged = match result {
        Ok(()) => false,
        Err(Error::Diverged { .. }) | Err(Error::NonFiniteGradient { .. }) | Err(Error::NonFinite { .. }) => true,
        Err(e) => return Err(CliError::runtime(format!("{} (alpha {}, seed {}): {e}", job.name, job.alpha, job.seed))),
    };
    let metric = if diverged { f64::INFINITY } else { rows_metric(&rows, problem.oco, problem.loss_window) };
    let bound = match (trace, problem.comparator.as_ref()) {
        (Some(trace), Some(star)) if !diverged => Some(bounds_for(problem, job, &trace, star)?),
        _ => None,
    };
    Ok(RunOutcome { job: job.clone(), rows, final_x, metric, diverged, bound })
}

/// Run while both observing and keeping the full trace.
fn record_with(
    sim: Simulation<'_>,
    mut observe: impl FnMut(&StepView) -> wagmf::Result<()>,
) -> wagmf::Result<(wagmf::analysis::RunTrace, wagmf::OptimizerState)> {
    let meta = wagmf::analysis::TraceMeta {
        preset: sim.preset.name.to_string(),
        seed: sim.seed,
        problem: sim.oracle.name().to_string(),
        dim: sim.oracle.dim(),
    };
    let mut trace = wagmf::analysis::RunTrace::new(meta, sim.oracle.is_stochastic());
    let state = sim.run(|view| {
        trace.push(view);
        observe(view)
    })?;
    Ok((trace, state))
}

fn bounds_for(problem: &Resolved, job: &Job, trace: &wagmf::analysis::RunTrace, star: &Vector) -> CliResult<BoundRow> {
    let series = regret(trace, problem.oracle.as_ref(), star).map_err(CliError::runtime)?;
    let momentum = job.preset.config.momentum;
    let d_inf = problem.set.diameter_inf();
    let thm1 = thm1_bound(trace, d_inf, momentum.beta1, momentum.lambda).map_err(CliError::runtime)?;
    let corollary1 = if job.name == PresetName::Wada && momentum.lambda < 1.0 {
        Some(
            corollary1_bound(trace.gradients(), thm1.d_inf, thm1.g_inf, job.alpha, momentum.beta1, momentum.lambda, trace.dim())
                .map_err(CliError::runtime)?,
        )
    } else {
        None
    };
    Ok(BoundRow { regret: series.last().map_or(0.0, |p| p.regret), thm1, corollary1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub alpha: f64,
    /// Mean metric over seeds; `None` when any seed diverged.
    pub score: Option<f64>,
    pub per_seed: Vec<SeedResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metric: Option<f64>,
    pub diverged: bool,
    pub final_x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerSummary {
    pub name: String,
    pub best_alpha: f64,
    pub best_score: Option<f64>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub problem: String,
    #[serde(rename = "T")]
    pub t: u64,
    pub metric: &'static str,
    pub optimizers: Vec<OptimizerSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

pub struct Report {
    pub summary: Summary,
    pub runs: Vec<RunOutcome>,
    pub significance: Option<Vec<PairTest>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Smallest mean score wins; ties go to the smaller alpha. `scores` must be
/// sorted by ascending alpha.
pub fn select_best(scores: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &(alpha, score) in scores {
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((alpha, score));
        }
    }
    best
}

pub fn summarize(cfg: &ExperimentConfig, runs: &[RunOutcome]) -> Summary {
    let optimizers = cfg
        .optimizers
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let mine: Vec<&RunOutcome> = runs.iter().filter(|r| r.job.optimizer == i).collect();
            let mut alphas: Vec<f64> = mine.iter().map(|r| r.job.alpha).collect();
            alphas.sort_by(f64::total_cmp);
            alphas.dedup();
            let candidates: Vec<Candidate> = alphas
                .iter()
                .map(|&alpha| {
                    let seeds: Vec<&&RunOutcome> = mine.iter().filter(|r| r.job.alpha == alpha).collect();
                    let mean = seeds.iter().map(|r| r.metric).sum::<f64>() / seeds.len() as f64;
                    Candidate {
                        alpha,
                        score: finite(mean),
                        per_seed: seeds
                            .iter()
                            .map(|r| SeedResult {
                                seed: r.job.seed,
                                metric: finite(r.metric),
                                diverged: r.diverged,
                                final_x: (r.final_x.len() <= SIDECAR_MAX_DIM).then(|| r.final_x.clone()),
                            })
                            .collect(),
                    }
                })
                .collect();
            let scores: Vec<(f64, f64)> = candidates.iter().map(|c| (c.alpha, c.score.unwrap_or(f64::INFINITY))).collect();
            let (best_alpha, best) = select_best(&scores).expect("non-empty grid");
            OptimizerSummary { name: entry.name.parse::<PresetName>().map(|p| p.to_string()).unwrap_or_default(), best_alpha, best_score: finite(best), candidates }
        })
        .collect();
    Summary {
        problem: cfg.problem.name().to_string(),
        t: cfg.t,
        metric: if cfg.problem.is_oco() { "final_avg_regret" } else { "final_loss" },
        optimizers,
    }
}

/// Pairwise t-tests over the per-seed metrics at each optimizer's best alpha.
pub fn significance(summary: &Summary) -> CliResult<Vec<PairTest>> {
    let samples: Vec<(String, Vec<f64>)> = summary
        .optimizers
        .iter()
        .map(|o| {
            let best = o.candidates.iter().find(|c| c.alpha == o.best_alpha).expect("best alpha is a candidate");
            (o.name.clone(), best.per_seed.iter().map(|s| s.metric.unwrap_or(f64::INFINITY)).collect())
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let (a, b) = (&samples[i], &samples[j]);
            if a.1.len() < 2 || b.1.len() < 2 {
                return Err(CliError::Config(format!("insufficient seeds for significance testing: {} and {}", a.1.len(), b.1.len())));
            }
            if a.1.iter().chain(&b.1).any(|v| !v.is_finite()) {
                return Err(CliError::Runtime(format!("cannot test {} vs {}: a run diverged", a.0, b.0)));
            }
            let r = students_t_test(&a.1, &b.1).map_err(CliError::runtime)?;
            out.push(PairTest { a: a.0.clone(), b: b.0.clone(), t: r.t, p: r.p, significant: r.p < SIGNIFICANCE_LEVEL });
        }
    }
    Ok(out)
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var("WAGMF_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Config(format!("WAGMF_THREADS must be a positive integer (got `{v}`)")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(CliError::runtime)
}

/// Run every job and, when `out` is given, write traces and reports there.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> CliResult<Report> {
    let problem = resolve(cfg)?;
    let jobs = jobs(cfg)?;
    let trace_dir = out.map(|o| o.join("traces"));
    if let Some(dir) = &trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    let pool = thread_pool()?;
    let runs: Vec<RunOutcome> =
        pool.install(|| jobs.par_iter().map(|job| run_job(cfg, &problem, job, trace_dir.as_deref())).collect::<CliResult<_>>())?;
    let summary = summarize(cfg, &runs);
    let significance = if cfg.significance { Some(significance(&summary)?) } else { None };
    let report = Report { summary, runs, significance };
    if let Some(dir) = out {
        crate::output::write_reports(dir, cfg, &report)?;
    }
    Ok(report)
}
