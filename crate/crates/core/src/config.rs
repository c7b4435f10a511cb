//! Experiment configuration: defaults, `key = value` files and the
//! hyperparameter grid presets.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bf::BfConfig;
use crate::data::RatingFormat;
use crate::error::{CsrrError, Result};
use crate::losses::{CostModel, LossVariant};
use crate::nnm::SolverConfig;

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "CSRR_DATA_DIR";

/// Step sizes and regulariser weights searched by hand: `10⁻⁵ … 10²`.
pub const ETA_GRID: [f64; 8] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
pub const LAMBDA_GRID: [f64; 8] = ETA_GRID;
/// Positive-class costs `0.50, 0.55, …, 0.95`.
pub const C_P_GRID: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
/// Latent dimensions for the factored solver.
pub const LATENT_DIM_GRID: [usize; 9] = [10, 15, 20, 25, 30, 35, 40, 45, 50];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    /// Nuclear-norm solver, type I loss.
    CsrrI,
    /// Nuclear-norm solver, type II loss.
    CsrrII,
    /// Bilinear-factorization solver.
    CsrrE,
    /// Global popularity order.
    PopRank,
    /// Nuclear-norm solver with the sparse component disabled.
    CsrrIV0,
}

impl Solver {
    pub const ALL: [Solver; 5] = [
        Solver::CsrrI,
        Solver::CsrrII,
        Solver::CsrrE,
        Solver::PopRank,
        Solver::CsrrIV0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::CsrrI => "csrr-i",
            Solver::CsrrII => "csrr-ii",
            Solver::CsrrE => "csrr-e",
            Solver::PopRank => "poprank",
            Solver::CsrrIV0 => "csrr-i-v0",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = CsrrError;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CsrrError::InvalidConfig(format!("unknown solver {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub format: RatingFormat,
    /// Ratings strictly above this become positives.
    pub threshold: f64,
    /// Share of each user's positives kept for training.
    pub fraction: f64,
    pub seeds: Vec<u64>,
    pub solver: Solver,
    pub eta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub c_p: f64,
    /// Loss used by `csrr-e`; the other solvers fix their own.
    pub bf_loss: LossVariant,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub latent_dim: usize,
    pub inner_max_iters: usize,
    pub inner_rel_tol: f64,
    pub cutoffs: Vec<usize>,
    /// CSV report destination.
    pub output: Option<PathBuf>,
}

/// `$CSRR_DATA_DIR`, or `data` when unset.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Where the MovieLens-100K ratings file is expected by default.
pub fn default_ml100k_path() -> PathBuf {
    default_data_dir().join("ml-100k").join("u.data")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let bf = BfConfig::default();
        ExperimentConfig {
            dataset: default_ml100k_path(),
            format: RatingFormat::Tab,
            threshold: 3.0,
            fraction: 0.8,
            seeds: (0..5).collect(),
            solver: Solver::CsrrI,
            eta: solver.eta,
            lambda1: solver.lambda1,
            lambda2: solver.lambda2,
            c_p: solver.cost.c_p(),
            bf_loss: LossVariant::TypeI,
            max_iters: solver.max_iters,
            rel_tol: solver.rel_tol,
            latent_dim: bf.latent_dim,
            inner_max_iters: bf.inner_max_iters,
            inner_rel_tol: bf.inner_rel_tol,
            cutoffs: vec![5, 10, 15],
            output: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| CsrrError::InvalidConfig(format!("{key} = {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_value(key, t))
        .collect()
}

impl ExperimentConfig {
    /// Sets one field by its config-file key. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "dataset" => self.dataset = PathBuf::from(value.trim()),
            "format" => self.format = value.parse()?,
            "threshold" => self.threshold = parse_value(&key, value)?,
            "fraction" => self.fraction = parse_value(&key, value)?,
            "seeds" => {
                // a single number is a count, a list names the seeds
                self.seeds = if value.contains(',') {
                    parse_list(&key, value)?
                } else {
                    (0..parse_value::<u64>(&key, value)?).collect()
                }
            }
            "solver" => self.solver = value.parse()?,
            "eta" => self.eta = parse_value(&key, value)?,
            "lambda1" => self.lambda1 = parse_value(&key, value)?,
            "lambda2" => self.lambda2 = parse_value(&key, value)?,
            "c_p" | "cp" => self.c_p = parse_value(&key, value)?,
            "bf_loss" => self.bf_loss = value.parse()?,
            "max_iters" => self.max_iters = parse_value(&key, value)?,
            "rel_tol" => self.rel_tol = parse_value(&key, value)?,
            "latent_dim" => self.latent_dim = parse_value(&key, value)?,
            "inner_max_iters" => self.inner_max_iters = parse_value(&key, value)?,
            "inner_rel_tol" => self.inner_rel_tol = parse_value(&key, value)?,
            "cutoffs" => self.cutoffs = parse_list(&key, value)?,
            "output" => self.output = Some(PathBuf::from(value.trim())),
            _ => return Err(CsrrError::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CsrrError::Parse {
                line: k + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| CsrrError::Parse {
                line: k + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.apply_text(&fs::read_to_string(path)?)
    }

    pub fn loss_variant(&self) -> LossVariant {
        match self.solver {
            Solver::CsrrII => LossVariant::TypeII,
            Solver::CsrrE => self.bf_loss,
            _ => LossVariant::TypeI,
        }
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        CostModel::from_positive_cost(self.loss_variant(), self.c_p)
    }

    pub fn solver_config(&self, seed: u64) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            eta: self.eta,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            seed,
            cost: self.cost_model()?,
            sparse_component: self.solver != Solver::CsrrIV0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bf_config(&self, seed: u64) -> Result<BfConfig> {
        Ok(BfConfig {
            base: self.solver_config(seed)?,
            latent_dim: self.latent_dim,
            inner_max_iters: self.inner_max_iters,
            inner_rel_tol: self.inner_rel_tol,
            box_constraints: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(CsrrError::InvalidConfig(format!(
                "fraction must lie in (0, 1), got {}",
                self.fraction
            )));
        }
        if self.seeds.is_empty() {
            return Err(CsrrError::InvalidConfig("at least one seed is required".into()));
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(CsrrError::InvalidConfig("cutoffs must be non-empty and >= 1".into()));
        }
        if !self.threshold.is_finite() {
            return Err(CsrrError::InvalidConfig("threshold must be finite".into()));
        }
        if self.solver != Solver::PopRank {
            self.solver_config(0)?;
        }
        Ok(())
    }

    /// The configuration as `key = value` lines, readable by
    /// [`apply_text`](Self::apply_text).
    pub fn to_text(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let cutoffs: Vec<String> = self.cutoffs.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "dataset = {}", self.dataset.display());
        let _ = writeln!(out, "format = {}", self.format);
        let _ = writeln!(out, "threshold = {}", self.threshold);
        let _ = writeln!(out, "fraction = {}", self.fraction);
        // a one-element list needs the trailing comma to stay a list
        let _ = writeln!(out, "seeds = {},", join(&seeds));
        let _ = writeln!(out, "solver = {}", self.solver);
        let _ = writeln!(out, "eta = {}", self.eta);
        let _ = writeln!(out, "lambda1 = {}", self.lambda1);
        let _ = writeln!(out, "lambda2 = {}", self.lambda2);
        let _ = writeln!(out, "c_p = {}", self.c_p);
        let _ = writeln!(out, "bf_loss = {}", self.bf_loss);
        let _ = writeln!(out, "max_iters = {}", self.max_iters);
        let _ = writeln!(out, "rel_tol = {}", self.rel_tol);
        let _ = writeln!(out, "latent_dim = {}", self.latent_dim);
        let _ = writeln!(out, "inner_max_iters = {}", self.inner_max_iters);
        let _ = writeln!(out, "inner_rel_tol = {}", self.inner_rel_tol);
        let _ = writeln!(out, "cutoffs = {}", join(&cutoffs));
        if let Some(path) = &self.output {
            let _ = writeln!(out, "output = {}", path.display());
        }
        out
    }
}

/// Named hyperparameter presets accepted by [`ExperimentConfig::apply_preset`].
pub const PRESETS: [&str; 1] = ["ml100k"];

impl ExperimentConfig {
    /// Overwrites the solver hyperparameters with a hand-tuned preset.
    /// `ml100k`: `eta = 0.1`, `lambda1 = 10`, `lambda2 = 1`, `c_p = 0.5`,
    /// `latent_dim = 10`, all drawn from the grids above.
    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        match name {
            "ml100k" => {
                self.eta = 0.1;
                self.lambda1 = 10.0;
                self.lambda2 = 1.0;
                self.c_p = 0.5;
                self.latent_dim = 10;
                Ok(())
            }
            other => Err(CsrrError::InvalidConfig(format!(
                "unknown preset {other:?}, expected one of {PRESETS:?}"
            ))),
        }
    }
}
