//! Train / evaluate pipeline over repeated random splits, and report output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use log::info;

use crate::bf::fit_bf;
use crate::config::{ExperimentConfig, Solver};
use crate::data::{binarize, parse_ratings, pop_rank, split_per_user, RatingDataset};
use crate::error::{CsrrError, Result};
use crate::matrix::ObservationMatrix;
use crate::metrics::{evaluate_order, evaluate_scores, MetricsReport, RankingScores};
use crate::model_file::{ModelFile, ModelPayload};
use crate::nnm::fit;

/// Output of training one solver on one training matrix.
#[derive(Clone, Debug)]
pub enum Trained {
    Model { model: ModelFile, iterations: usize },
    Popularity(Vec<usize>),
}

impl Trained {
    pub fn evaluate(
        &self,
        train: &ObservationMatrix,
        test: &[Vec<usize>],
        cutoffs: &[usize],
    ) -> Result<MetricsReport> {
        match self {
            Trained::Model { model, .. } => evaluate_scores(&model.scores()?, train, test, cutoffs),
            Trained::Popularity(order) => evaluate_order(order, train, test, cutoffs),
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            Trained::Model { iterations, .. } => *iterations,
            Trained::Popularity(_) => 0,
        }
    }
}

/// Fits the configured solver on `train`, seeding its initialisation with `seed`.
pub fn train(cfg: &ExperimentConfig, train: &ObservationMatrix, seed: u64) -> Result<Trained> {
    let echo = || {
        let mut c = cfg.clone();
        c.seeds = vec![seed];
        c.to_text()
    };
    match cfg.solver {
        Solver::PopRank => Ok(Trained::Popularity(pop_rank(train))),
        Solver::CsrrE => {
            let state = fit_bf(train, &cfg.bf_config(seed)?)?;
            Ok(Trained::Model {
                iterations: state.iter,
                model: ModelFile {
                    seed,
                    config: echo(),
                    payload: ModelPayload::Factored {
                        p: state.p,
                        q: state.q,
                        v: state.v,
                    },
                },
            })
        }
        Solver::CsrrI | Solver::CsrrII | Solver::CsrrIV0 => {
            let state = fit(train, &cfg.solver_config(seed)?)?;
            Ok(Trained::Model {
                iterations: state.iter,
                model: ModelFile {
                    seed,
                    config: echo(),
                    payload: ModelPayload::LowRankSparse { u: state.u, v: state.v },
                },
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub report: MetricsReport,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub solver: Solver,
    pub cutoffs: Vec<usize>,
    pub per_seed: Vec<SeedResult>,
    pub ratings: usize,
    pub users: usize,
    pub items: usize,
    /// Rated share of the item × user grid.
    pub rating_density: f64,
    /// Positive share after binarisation.
    pub positive_density: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn field(s: &RankingScores, k: usize) -> f64 {
    [s.precision, s.recall, s.f1, s.ndcg][k]
}

impl ExperimentReport {
    /// Mean and standard deviation over seeds at cutoff `n`.
    pub fn summary(&self, n: usize) -> Option<(RankingScores, RankingScores)> {
        let rows: Vec<&RankingScores> = self.per_seed.iter().map(|r| r.report.at(n)).collect::<Option<_>>()?;
        let stat = |k: usize| mean_std(&rows.iter().map(|s| field(s, k)).collect::<Vec<_>>());
        let (p, r, f, g) = (stat(0), stat(1), stat(2), stat(3));
        Some((
            RankingScores {
                precision: p.0,
                recall: r.0,
                f1: f.0,
                ndcg: g.0,
            },
            RankingScores {
                precision: p.1,
                recall: r.1,
                f1: f.1,
                ndcg: g.1,
            },
        ))
    }

    pub fn mean(&self, n: usize) -> Option<RankingScores> {
        self.summary(n).map(|(m, _)| m)
    }

    /// `solver,seed,N,precision,recall,f1,ndcg` rows per seed, then `mean`
    /// and `std` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["solver", "seed", "N", "precision", "recall", "f1", "ndcg"])?;
        let solver = self.solver.name();
        let mut row = |seed: &str, n: usize, s: &RankingScores| {
            w.write_record([
                solver.to_string(),
                seed.to_string(),
                n.to_string(),
                format!("{:.6}", s.precision),
                format!("{:.6}", s.recall),
                format!("{:.6}", s.f1),
                format!("{:.6}", s.ndcg),
            ])
        };
        for r in &self.per_seed {
            for (&n, s) in &r.report.per_n {
                row(&r.seed.to_string(), n, s)?;
            }
        }
        for &n in &self.cutoffs {
            if let Some((mean, std)) = self.summary(n) {
                row("mean", n, &mean)?;
                row("std", n, &std)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per solver with recall, precision, F1 and NDCG at each cutoff.
    pub fn table(reports: &[ExperimentReport]) -> String {
        let cutoffs = reports.first().map(|r| r.cutoffs.clone()).unwrap_or_default();
        let mut headers = vec!["solver".to_string()];
        for (label, _) in LABELS {
            for n in &cutoffs {
                headers.push(format!("{label}@{n}"));
            }
        }
        let mut rows = vec![headers];
        for r in reports {
            let mut line = vec![r.solver.name().to_string()];
            for (_, k) in LABELS {
                for &n in &cutoffs {
                    line.push(match r.summary(n) {
                        Some((m, s)) => format!("{:.4}±{:.4}", field(&m, k), field(&s, k)),
                        None => "-".into(),
                    });
                }
            }
            rows.push(line);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

const LABELS: [(&str, usize); 4] = [("R", 1), ("P", 0), ("F1", 2), ("NDCG", 3)];

/// Runs the configured solver on every seed of an already-loaded dataset.
pub fn run_on_dataset(cfg: &ExperimentConfig, ds: &RatingDataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    let a = binarize(ds, cfg.threshold);
    if a.positive_count() == 0 {
        return Err(CsrrError::EmptyDataset);
    }
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let start = Instant::now();
        let split = split_per_user(&a, cfg.fraction, seed)?;
        let trained = train(cfg, &split.train, seed)?;
        let report = trained.evaluate(&split.train, &split.test, &cfg.cutoffs)?;
        let seconds = start.elapsed().as_secs_f64();
        if let Some(s) = report.at(cfg.cutoffs[0]) {
            info!(
                "{} seed {seed}: {} iterations, {seconds:.1}s, P@{n} {:.4} R@{n} {:.4} NDCG@{n} {:.4}",
                cfg.solver,
                trained.iterations(),
                s.precision,
                s.recall,
                s.ndcg,
                n = cfg.cutoffs[0],
            );
        }
        per_seed.push(SeedResult {
            seed,
            report,
            iterations: trained.iterations(),
            seconds,
        });
    }
    Ok(ExperimentReport {
        solver: cfg.solver,
        cutoffs: cfg.cutoffs.clone(),
        per_seed,
        ratings: ds.ratings.len(),
        users: ds.n_users(),
        items: ds.n_items(),
        rating_density: ds.density(),
        positive_density: a.density(),
    })
}

/// Loads the dataset, then trains and evaluates once per seed. Writes the CSV
/// report when an output path is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ds = parse_ratings(&cfg.dataset, cfg.format)?;
    info!(
        "{}: {} ratings, {} users, {} items, {} duplicates",
        cfg.dataset.display(),
        ds.ratings.len(),
        ds.n_users(),
        ds.n_items(),
        ds.duplicates
    );
    let report = run_on_dataset(cfg, &ds)?;
    if let Some(path) = &cfg.output {
        report.write_csv(std::fs::File::create(path)?)?;
    }
    Ok(report)
}

/// Per-seed NDCG means keyed by seed, convenient for paired comparisons.
pub fn ndcg_by_seed(report: &ExperimentReport, n: usize) -> BTreeMap<u64, f64> {
    report
        .per_seed
        .iter()
        .filter_map(|r| r.report.at(n).map(|s| (r.seed, s.ndcg)))
        .collect()
}
