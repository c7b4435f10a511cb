use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use csrr::config::{ExperimentConfig, DATA_DIR_ENV};
use csrr::data::{binarize, parse_ratings, split_per_user, write_split_manifest};
use csrr::experiment::{run_experiment, train, ExperimentReport, Trained};
use csrr::metrics::evaluate_scores;
use csrr::model_file::ModelFile;
use csrr::synth::{solver_cross_check, synthetic_solver_config, trend_check, SynthParams};
use csrr::{CsrrError, Result};

#[derive(Parser)]
#[command(name = "csrr", version, about = "Cost-sensitive low-rank plus sparse recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on one split and save the model.
    Fit {
        #[command(flatten)]
        settings: Settings,
        /// Split and initialisation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model destination.
        #[arg(long)]
        model: PathBuf,
        /// Also write the held-out items of the split.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score a saved model on the split it was trained on.
    Evaluate {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train and evaluate over every configured seed.
    Experiment {
        #[command(flatten)]
        settings: Settings,
    },
    /// Solver cross-check and size trend on synthetic data.
    SynthCheck {
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
}

/// Flags mirror the `key = value` config file; flags win over the file.
#[derive(Args, Debug, Default)]
struct Settings {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named hyperparameter preset, applied before the config file.
    #[arg(long)]
    preset: Option<String>,
    /// Ratings file [default: $CSRR_DATA_DIR/ml-100k/u.data]
    #[arg(long)]
    dataset: Option<String>,
    /// tab | double-colon | eachmovie
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    fraction: Option<String>,
    /// A count (`5` means 0..5) or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// csrr-i | csrr-ii | csrr-e | poprank | csrr-i-v0
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    lambda1: Option<String>,
    #[arg(long)]
    lambda2: Option<String>,
    #[arg(long = "c-p")]
    c_p: Option<String>,
    #[arg(long)]
    bf_loss: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    rel_tol: Option<String>,
    #[arg(long)]
    latent_dim: Option<String>,
    #[arg(long)]
    inner_max_iters: Option<String>,
    #[arg(long)]
    inner_rel_tol: Option<String>,
    /// Comma list of N.
    #[arg(long)]
    cutoffs: Option<String>,
    /// CSV report path.
    #[arg(long)]
    output: Option<String>,
}

impl Settings {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        [
            ("dataset", &self.dataset),
            ("format", &self.format),
            ("threshold", &self.threshold),
            ("fraction", &self.fraction),
            ("seeds", &self.seeds),
            ("solver", &self.solver),
            ("eta", &self.eta),
            ("lambda1", &self.lambda1),
            ("lambda2", &self.lambda2),
            ("c_p", &self.c_p),
            ("bf_loss", &self.bf_loss),
            ("max_iters", &self.max_iters),
            ("rel_tol", &self.rel_tol),
            ("latent_dim", &self.latent_dim),
            ("inner_max_iters", &self.inner_max_iters),
            ("inner_rel_tol", &self.inner_rel_tol),
            ("cutoffs", &self.cutoffs),
            ("output", &self.output),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
    }

    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = base;
        if let Some(name) = &self.preset {
            cfg.apply_preset(name)?;
        }
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.overrides() {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fit_command(settings: &Settings, seed: u64, model_path: &PathBuf, manifest: Option<&PathBuf>) -> Result<()> {
    let cfg = settings.resolve(ExperimentConfig::default())?;
    let ds = parse_ratings(&cfg.dataset, cfg.format)?;
    let split = split_per_user(&binarize(&ds, cfg.threshold), cfg.fraction, seed)?;
    if let Some(path) = manifest {
        write_split_manifest(&split, Some(&ds), File::create(path)?)?;
    }
    match train(&cfg, &split.train, seed)? {
        Trained::Model { model, iterations } => {
            model.save(model_path)?;
            info!("{} iterations", iterations);
            println!("saved {} model to {}", cfg.solver, model_path.display());
            Ok(())
        }
        Trained::Popularity(_) => Err(CsrrError::InvalidConfig(
            "poprank has no trained parameters to save; use `experiment`".into(),
        )),
    }
}

fn evaluate_command(settings: &Settings, model_path: &PathBuf) -> Result<()> {
    let model = ModelFile::load(model_path)?;
    let mut stored = ExperimentConfig::default();
    stored.apply_text(&model.config)?;
    let cfg = settings.resolve(stored)?;
    let ds = parse_ratings(&cfg.dataset, cfg.format)?;
    let split = split_per_user(&binarize(&ds, cfg.threshold), cfg.fraction, model.seed)?;
    let report = evaluate_scores(&model.scores()?, &split.train, &split.test, &cfg.cutoffs)?;
    let mut out = io::stdout().lock();
    writeln!(out, "model {} seed {} over {} users", model_path.display(), model.seed, report.users)?;
    writeln!(out, "N\tprecision\trecall\tf1\tndcg")?;
    for (n, s) in &report.per_n {
        writeln!(out, "{n}\t{:.4}\t{:.4}\t{:.4}\t{:.4}", s.precision, s.recall, s.f1, s.ndcg)?;
    }
    Ok(())
}

fn experiment_command(settings: &Settings) -> Result<()> {
    let cfg = settings.resolve(ExperimentConfig::default())?;
    let report = run_experiment(&cfg)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{} ratings, {} users, {} items; rating density {:.4}, positive density {:.4}",
        report.ratings, report.users, report.items, report.rating_density, report.positive_density
    )?;
    writeln!(out, "seeds {:?}, mean ± std", cfg.seeds)?;
    write!(out, "{}", ExperimentReport::table(std::slice::from_ref(&report)))?;
    if let Some(path) = &cfg.output {
        writeln!(out, "report written to {}", path.display())?;
    }
    Ok(())
}

fn synth_check_command(seeds: u64) -> Result<()> {
    let cfg = synthetic_solver_config();
    let seeds: Vec<u64> = (0..seeds).collect();
    let params = SynthParams::default();
    let cross = solver_cross_check((30, 20), params, &cfg, &seeds, 5)?;
    println!(
        "30x20 rank 2: NDCG@5 nuclear {:.4}, factored {:.4}, gap {:.4}",
        cross.nnm_mean(),
        cross.bf_mean(),
        cross.gap()
    );
    let trend = trend_check((20, 16), (80, 64), params, &cfg.base, &seeds)?;
    println!(
        "thresholded loss per entry: 20x16 {:.4}, 80x64 {:.4} ({})",
        trend.small_mean(),
        trend.large_mean(),
        if trend.holds() { "decreasing" } else { "not decreasing" }
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit {
            settings,
            seed,
            model,
            manifest,
        } => fit_command(settings, *seed, model, manifest.as_ref()),
        Command::Evaluate { settings, model } => evaluate_command(settings, model),
        Command::Experiment { settings } => experiment_command(settings),
        Command::SynthCheck { seeds } => synth_check_command(*seeds),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (CsrrError::InvalidConfig(_) | CsrrError::InvalidCost(_) | CsrrError::Parse { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e @ CsrrError::Io(_)) => {
            eprintln!("error: {e} (default data directory comes from ${DATA_DIR_ENV})");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
