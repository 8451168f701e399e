//! The experiment file: a TOML document mirroring [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wagmf::optimizers::{make_preset, Overrides, PresetName};
use wagmf::problems::DatasetFormat;
use wagmf::{FeasibleSet, Vector};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    ReddiStochastic,
    ReddiOnline,
    Quadratic { a: Vec<f64>, x_star: Vec<f64> },
    Softmax { data: DataSource, reg: f64, batch_size: usize },
}

impl ProblemConfig {
    /// Online problems rank step sizes by average regret, the rest by loss.
    pub fn is_oco(&self) -> bool {
        matches!(self, ProblemConfig::ReddiStochastic | ProblemConfig::ReddiOnline)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::ReddiStochastic => "reddi_stochastic",
            ProblemConfig::ReddiOnline => "reddi_online",
            ProblemConfig::Quadratic { .. } => "quadratic",
            ProblemConfig::Softmax { .. } => "softmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv { path: PathBuf },
    Idx { images: PathBuf, labels: PathBuf },
    /// Gaussian blobs; see `wagmf::problems::gaussian_blobs`.
    Synthetic { n: usize, d: usize, k: usize, separation: f64, seed: u64 },
}

impl DataSource {
    /// File formats with paths resolved against `base`.
    pub fn file_format(&self, base: &Path) -> Option<DatasetFormat> {
        let resolve = |p: &PathBuf| base.join(p).display().to_string();
        match self {
            DataSource::Csv { path } => Some(DatasetFormat::Csv { path: resolve(path) }),
            DataSource::Idx { images, labels } => Some(DatasetFormat::Idx { images: resolve(images), labels: resolve(labels) }),
            DataSource::Synthetic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeasibleConfig {
    Unconstrained,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `[lo, hi]` in every coordinate.
    Cube { lo: f64, hi: f64 },
}

impl FeasibleConfig {
    pub fn resolve(&self, dim: usize) -> wagmf::Result<FeasibleSet> {
        match self {
            FeasibleConfig::Unconstrained => Ok(FeasibleSet::Unconstrained),
            FeasibleConfig::Box { lo, hi } => {
                if lo.len() != dim {
                    return Err(wagmf::Error::DimMismatch { expected: dim, got: lo.len() });
                }
                FeasibleSet::new_box(Vector::new(lo.clone())?, Vector::new(hi.clone())?)
            }
            FeasibleConfig::Cube { lo, hi } => FeasibleSet::cube(dim, *lo, *hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerEntry {
    pub name: String,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub overrides: Option<Overrides>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub optimizers: Vec<OptimizerEntry>,
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Defaults to `[-1, 1]` for the two synthetic problems, unconstrained otherwise.
    #[serde(default)]
    pub feasible: Option<FeasibleConfig>,
    #[serde(default)]
    pub bound_eval: bool,
    /// Momentum decay `beta_1t = beta_1 * lambda^(t-1)` for every run.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub significance: bool,
    /// Starting point; defaults to the projection of the origin.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory relative dataset paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(CliError::config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn feasible_or_default(&self) -> FeasibleConfig {
        self.feasible.clone().unwrap_or(if self.problem.is_oco() {
            FeasibleConfig::Cube { lo: -1.0, hi: 1.0 }
        } else {
            FeasibleConfig::Unconstrained
        })
    }

    /// Effective overrides for optimizer `i`: the entry's own, with the
    /// experiment-wide `lambda` filled in unless the entry sets one.
    pub fn overrides_for(&self, i: usize) -> Overrides {
        let mut o = self.optimizers[i].overrides.clone().unwrap_or_default();
        if o.lambda.is_none() && self.lambda != 1.0 {
            o.lambda = Some(self.lambda);
        }
        o
    }

    /// Checks that need no data: shapes of lists, names, ranges.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.t < 1 {
            return bad("T must be >= 1".into());
        }
        if self.optimizers.is_empty() {
            return bad("at least one optimizer is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda must lie in (0, 1] (got {})", self.lambda));
        }
        let mut names = Vec::new();
        for (i, entry) in self.optimizers.iter().enumerate() {
            let name: PresetName = entry.name.parse().map_err(CliError::config)?;
            if names.contains(&name.to_string()) {
                return bad(format!("optimizer {name} listed twice"));
            }
            names.push(name.to_string());
            if entry.alphas.is_empty() {
                return bad(format!("optimizer {name} has an empty alpha grid"));
            }
            for &a in &entry.alphas {
                make_preset(name, a, Some(&self.overrides_for(i))).map_err(CliError::config)?;
            }
        }
        if self.significance && self.seeds.len() < 2 {
            return bad(format!("insufficient seeds for significance testing: need >= 2, got {}", self.seeds.len()));
        }
        match &self.problem {
            ProblemConfig::Quadratic { a, x_star } if a.len() != x_star.len() || a.is_empty() => {
                return bad("quadratic: `a` and `x_star` must be non-empty and of equal length".into())
            }
            ProblemConfig::Softmax { reg, batch_size, .. } if !(*reg >= 0.0 && reg.is_finite()) || *batch_size == 0 => {
                return bad("softmax: reg must be >= 0 and batch_size >= 1".into())
            }
            ProblemConfig::Softmax { .. } if self.bound_eval => {
                return bad("bound_eval needs a known optimum; softmax has none".into())
            }
            _ => {}
        }
        if self.bound_eval && self.feasible_or_default() == FeasibleConfig::Unconstrained {
            return bad("bound_eval needs a bounded feasible set".into());
        }
        Ok(())
    }
}
