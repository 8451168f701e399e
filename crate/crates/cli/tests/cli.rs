use std::path::Path;
use std::process::Command;

use wagmf_cli::experiment::{rows_metric, select_best, significance, Candidate, OptimizerSummary, SeedResult, Summary, TraceRow};
use wagmf_cli::{run, CliError, ExperimentConfig};

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn wagmf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wagmf"))
}

const STOCHASTIC: &str = r#"
T = 2000
seeds = [5]
[problem]
kind = "reddi_stochastic"
[[optimizers]]
name = "adam"
alphas = [0.01]
[[optimizers]]
name = "amsgrad"
alphas = [0.01]
[[optimizers]]
name = "wada"
alphas = [0.01]
"#;

#[test]
fn end_to_end_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STOCHASTIC);
    let out = dir.path().join("out");
    let status = wagmf().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let traces: Vec<_> = std::fs::read_dir(out.join("traces")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(traces.iter().filter(|n| n.ends_with(".csv")).count(), 3);
    assert_eq!(traces.iter().filter(|n| n.ends_with(".jsonl")).count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metric"], "final_avg_regret");
    for o in summary["optimizers"].as_array().unwrap() {
        let x = o["candidates"][0]["per_seed"][0]["final_x"].as_array().unwrap();
        assert_eq!(x.len(), 1);
        assert!(x[0].as_f64().unwrap().abs() <= 1.0);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STOCHASTIC);
    for out in ["a", "b"] {
        let status = wagmf().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join(out)).status().unwrap();
        assert!(status.success());
    }
    let names: Vec<_> = std::fs::read_dir(dir.path().join("a/traces")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(!names.is_empty());
    for n in names {
        let a = std::fs::read(dir.path().join("a/traces").join(&n)).unwrap();
        let b = std::fs::read(dir.path().join("b/traces").join(&n)).unwrap();
        assert!(a == b, "{n:?} differs");
    }
    assert_eq!(std::fs::read(dir.path().join("a/summary.json")).unwrap(), std::fs::read(dir.path().join("b/summary.json")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), "T = 10\noptimizers = []\n[problem]\nkind = \"reddi_online\"\n");
    let out = dir.path().join("out");
    let st = wagmf().args(["run", "--config"]).arg(&empty).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("at least one optimizer"));

    let st = wagmf().args(["run", "--config", "/nonexistent.toml", "--out"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let st = wagmf().args(["run", "--bogus"]).status().unwrap();
    assert_eq!(st.code(), Some(1));

    let missing = write_config(
        dir.path(),
        "T = 10\n[problem]\nkind = \"softmax\"\nreg = 0.0\nbatch_size = 4\ndata = { format = \"csv\", path = \"missing.csv\" }\n[[optimizers]]\nname = \"wada\"\nalphas = [0.1]\n",
    );
    let st = wagmf().args(["run", "--config"]).arg(&missing).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STOCHASTIC);
    let out = dir.path().join("out");
    let st = wagmf()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--optimizer", "adagrad", "--optimizer", "wada", "--alpha", "0.1,0.2", "--T", "300", "--seed", "1", "--seed", "2", "--significance"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(std::fs::read_dir(out.join("traces")).unwrap().count(), 2 * 2 * 2 * 2);
    let sig = std::fs::read_to_string(out.join("significance.csv")).unwrap();
    assert!(sig.starts_with("optimizer_a,optimizer_b,t,p,significant\nadagrad,wada,"));
    let trace = std::fs::read_to_string(out.join("traces/reddi_stochastic_wada_a0.1_s1.csv")).unwrap();
    assert_eq!(trace.lines().count(), 301);
}

#[test]
fn unknown_optimizer_without_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), STOCHASTIC);
    let st = wagmf().args(["run", "--config"]).arg(&cfg).args(["--optimizer", "adamnc", "--out"]).arg(dir.path().join("o")).status().unwrap();
    assert_eq!(st.code(), Some(1));
}

fn quadratic(alphas: &str, seeds: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        "T = 200\nseeds = {seeds}\n[problem]\nkind = \"quadratic\"\na = [1.0, 4.0]\nx_star = [0.5, -2.0]\n[[optimizers]]\nname = \"adagrad\"\nalphas = {alphas}\n"
    ))
    .unwrap()
}

#[test]
fn single_element_grid_wins_trivially() {
    let report = run(&quadratic("[0.05]", "[0]"), None).unwrap();
    assert_eq!(report.summary.optimizers[0].best_alpha, 0.05);
    assert_eq!(report.summary.metric, "final_loss");
}

#[test]
fn grid_search_reports_the_argmin() {
    let report = run(&quadratic("[0.1, 0.001, 0.01]", "[0]"), None).unwrap();
    let o = &report.summary.optimizers[0];
    let alphas: Vec<f64> = o.candidates.iter().map(|c| c.alpha).collect();
    assert_eq!(alphas, vec![0.001, 0.01, 0.1]);
    let min = o.candidates.iter().map(|c| c.score.unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(o.best_score, Some(min));
    let best = o.candidates.iter().find(|c| c.alpha == o.best_alpha).unwrap();
    assert_eq!(best.score, Some(min));
}

#[test]
fn ties_go_to_the_smaller_alpha() {
    assert_eq!(select_best(&[(0.01, 2.0), (0.1, 1.0), (1.0, 1.0)]), Some((0.1, 1.0)));
    assert_eq!(select_best(&[(0.01, f64::INFINITY), (0.1, f64::INFINITY)]), Some((0.01, f64::INFINITY)));
    // A problem with zero gradient everywhere ties every alpha.
    let cfg = ExperimentConfig::from_toml(
        "T = 20\n[problem]\nkind = \"quadratic\"\na = [1.0]\nx_star = [0.0]\n[[optimizers]]\nname = \"wada\"\nalphas = [1.0, 0.5, 0.25]\n",
    )
    .unwrap();
    assert_eq!(run(&cfg, None).unwrap().summary.optimizers[0].best_alpha, 0.25);
}

fn summary_with(a: &[f64], b: &[f64]) -> Summary {
    let opt = |name: &str, ms: &[f64]| OptimizerSummary {
        name: name.into(),
        best_alpha: 0.1,
        best_score: None,
        candidates: vec![Candidate {
            alpha: 0.1,
            score: None,
            per_seed: ms.iter().enumerate().map(|(i, &m)| SeedResult { seed: i as u64, metric: Some(m), diverged: false, final_x: None }).collect(),
        }],
    };
    Summary { problem: "x".into(), t: 1, metric: "final_loss", optimizers: vec![opt("a", a), opt("b", b)] }
}

#[test]
fn significance_table() {
    let same = [0.3, 0.1, 0.2, 0.25];
    let r = significance(&summary_with(&same, &same)).unwrap();
    assert_eq!((r[0].p, r[0].significant), (1.0, false));

    let a = [0.91, 0.87, 0.95, 0.89, 0.93, 0.90, 0.88, 0.94];
    let b = [0.85, 0.83, 0.86, 0.84, 0.88, 0.82, 0.87, 0.85];
    let r = significance(&summary_with(&a, &b)).unwrap();
    assert!(r[0].significant);
    assert!((r[0].p - 0.00033047780225751907).abs() < 1e-8);

    let err = significance(&summary_with(&[1.0], &[2.0])).unwrap_err();
    assert!(matches!(err, CliError::Config(m) if m.contains("insufficient seeds")));
}

#[test]
fn every_round_appears_once_and_subsampling_keeps_the_last() {
    let dir = tempfile::tempdir().unwrap();
    let short = ExperimentConfig::from_toml("T = 500\n[problem]\nkind = \"reddi_online\"\n[[optimizers]]\nname = \"wada\"\nalphas = [0.1]\n").unwrap();
    run(&short, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("traces/reddi_online_wada_a0.1_s0.csv")).unwrap();
    let ts: Vec<u64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ts, (1..=500).collect::<Vec<_>>());

    let long = ExperimentConfig { t: 250_001, ..short };
    let report = run(&long, None).unwrap();
    let ts: Vec<u64> = report.runs[0].rows.iter().map(|r| r.t).collect();
    assert_eq!(ts[0], 3);
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*ts.last().unwrap(), 250_001);
    assert_eq!(ts.len(), 250_001 / 3 + 1);
}

/// Parse a trace CSV back into rows.
fn read_trace(path: &Path) -> Vec<TraceRow> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let f = |i: usize| rec[i].parse::<f64>().unwrap();
            TraceRow {
                t: rec[0].parse().unwrap(),
                loss: f(1),
                avg_regret: (!rec[2].is_empty()).then(|| f(2)),
                x_norm: f(3),
                g_norm: f(4),
                alpha_t: f(5),
            }
        })
        .collect()
}

#[test]
fn selection_is_reproducible_from_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(
        "T = 3000\nseeds = [1, 2]\n[problem]\nkind = \"reddi_stochastic\"\n[[optimizers]]\nname = \"amsgrad\"\nalphas = [0.01, 0.1, 0.5]\n",
    )
    .unwrap();
    let report = run(&cfg, Some(dir.path())).unwrap();
    let mut scores = Vec::new();
    for alpha in [0.01, 0.1, 0.5] {
        let mean = [1, 2]
            .iter()
            .map(|s| rows_metric(&read_trace(&dir.path().join(format!("traces/reddi_stochastic_amsgrad_a{alpha}_s{s}.csv"))), true, 1))
            .sum::<f64>()
            / 2.0;
        scores.push((alpha, mean));
    }
    let (best, score) = select_best(&scores).unwrap();
    let o = &report.summary.optimizers[0];
    assert_eq!(best, o.best_alpha);
    assert_eq!(Some(score), o.best_score);
    let csv = std::fs::read_to_string(dir.path().join("best_alpha.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), format!("amsgrad,{best},final_avg_regret,{score}"));
}

#[test]
fn bound_eval_writes_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(
        "T = 1000\nlambda = 0.99\nbound_eval = true\n[problem]\nkind = \"reddi_online\"\n[[optimizers]]\nname = \"wada\"\nalphas = [0.1]\n[[optimizers]]\nname = \"adagrad\"\nalphas = [0.1]\n",
    )
    .unwrap();
    let report = run(&cfg, Some(dir.path())).unwrap();
    for r in &report.runs {
        let b = r.bound.as_ref().unwrap();
        assert!(b.regret <= b.thm1.total);
        assert_eq!(b.corollary1.is_some(), r.job.name.to_string() == "wada");
    }
    let text = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}
