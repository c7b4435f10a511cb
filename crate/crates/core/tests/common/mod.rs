//! Reference oracles shared by the integration tests. Nothing here calls the
//! code path it checks.

#![allow(dead_code)]

use std::path::PathBuf;

use csrr::bf::{fit_bf_with_observer, low_rank_part, BfConfig};
use csrr::losses::{CostModel, LossVariant};
use csrr::matrix::{singular_values, DenseMatrix, ObservationMatrix};
use csrr::nnm::{fit_with_observer, SolverConfig};

/// `(f(x + h) − f(x − h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Minimiser of `½(v − a)² + b|v|` over a grid of the given resolution
/// covering `[-|a| - 1, |a| + 1]`.
pub fn grid_soft_threshold(a: f64, b: f64, resolution: f64) -> f64 {
    let radius = a.abs() + 1.0;
    let steps = (2.0 * radius / resolution).ceil() as i64;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=steps {
        let v = -radius + k as f64 * resolution;
        let f = 0.5 * (v - a) * (v - a) + b * v.abs();
        if f < best.0 {
            best = (f, v);
        }
    }
    best.1
}

/// Every 0/1 matrix of the given shape, in binary counting order.
pub fn all_binary(rows: usize, cols: usize) -> Vec<DenseMatrix> {
    let n = rows * cols;
    (0..1u32 << n)
        .map(|bits| DenseMatrix::from_fn(rows, cols, |i, j| ((bits >> (i * cols + j)) & 1) as f64))
        .collect()
}

pub fn observation_of(m: &DenseMatrix) -> ObservationMatrix {
    ObservationMatrix::from_threshold(m, 0.5)
}

/// `(false negatives, false positives)` of `x > q` against `a`, by counting.
pub fn count_mistakes(x: &DenseMatrix, a: &DenseMatrix, q: f64) -> (usize, usize) {
    let mut fn_ = 0;
    let mut fp = 0;
    for (&xv, &av) in x.values().iter().zip(a.values()) {
        let predicted = xv > q;
        if av == 1.0 && !predicted {
            fn_ += 1;
        }
        if av == 0.0 && predicted {
            fp += 1;
        }
    }
    (fn_, fp)
}

/// Numerical rank from singular values.
pub fn numerical_rank(m: &DenseMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(m).unwrap();
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > rel_tol * top.max(f64::MIN_POSITIVE)).count()
}

pub fn within(m: &DenseMatrix, lo: f64, hi: f64) -> bool {
    m.values().iter().all(|&v| v >= lo && v <= hi)
}

/// A fraction of `1 / L`, where `L` bounds the curvature of the loss in the
/// joint `(U, V)` variable.
pub fn stable_step(cost: &CostModel, fraction: f64) -> f64 {
    let curvature = match cost.variant() {
        LossVariant::TypeI => cost.alpha().max(1.0),
        LossVariant::TypeII => 1.0,
    };
    fraction / (2.0 * curvature)
}

/// Problems with invariant violations found while fitting the nuclear-norm
/// solver; empty when all hold.
pub fn nnm_invariant_violations(a: &ObservationMatrix, cfg: &SolverConfig) -> Vec<String> {
    let mut problems = Vec::new();
    let mut taus = Vec::new();
    let mut objectives = Vec::new();
    let result = fit_with_observer(a, cfg, |s| {
        if !within(&s.u, 0.0, 1.0) || !within(&s.v, 0.0, 1.0) {
            problems.push(format!("iterate {} leaves the unit box", s.iter));
        }
        taus.push(s.tau);
        objectives.push(s.objective);
    });
    if let Err(e) = result {
        problems.push(format!("fit failed: {e}"));
        return problems;
    }
    for w in taus.windows(2) {
        let expected = (1.0 + (1.0 + 4.0 * w[0] * w[0]).sqrt()) / 2.0;
        if (w[1] - expected).abs() > 1e-12 * expected || w[1] < w[0] + 0.5 {
            problems.push(format!("momentum {} -> {} breaks the recurrence", w[0], w[1]));
        }
    }
    if objectives.last() > objectives.first() {
        problems.push(format!(
            "objective rose from {} to {}",
            objectives.first().unwrap(),
            objectives.last().unwrap()
        ));
    }
    let mut again = Vec::new();
    fit_with_observer(a, cfg, |s| again.push(s.objective)).unwrap();
    if again.iter().map(|v| v.to_bits()).ne(objectives.iter().map(|v| v.to_bits())) {
        problems.push("refit with the same seed produced different objectives".into());
    }
    problems
}

/// Same as [`nnm_invariant_violations`] for the factored solver, plus the
/// factor box and the rank bound. Endpoint descent is checked only when
/// `descent` is set.
pub fn bf_invariant_violations(a: &ObservationMatrix, cfg: &BfConfig, descent: bool) -> Vec<String> {
    let mut problems = Vec::new();
    let mut objectives = Vec::new();
    let bound = 1.0 / (cfg.latent_dim as f64).sqrt();
    let d = cfg.latent_dim;
    let result = fit_bf_with_observer(a, cfg, |s| {
        if !within(&s.p, 0.0, bound) || !within(&s.q, 0.0, bound) {
            problems.push(format!("factors leave [0, {bound}] at iterate {}", s.iter));
        }
        if !within(&s.v, 0.0, 1.0) {
            problems.push(format!("V leaves the unit box at iterate {}", s.iter));
        }
        let rank = numerical_rank(&low_rank_part(s), 1e-10);
        if rank > d {
            problems.push(format!("rank {rank} exceeds {d} at iterate {}", s.iter));
        }
        objectives.push(s.objective);
    });
    if let Err(e) = result {
        problems.push(format!("fit failed: {e}"));
        return problems;
    }
    if descent && objectives.last() > objectives.first() {
        problems.push(format!(
            "objective rose from {} to {}",
            objectives.first().unwrap(),
            objectives.last().unwrap()
        ));
    }
    let mut again = Vec::new();
    fit_bf_with_observer(a, cfg, |s| again.push(s.objective)).unwrap();
    if again.iter().map(|v| v.to_bits()).ne(objectives.iter().map(|v| v.to_bits())) {
        problems.push("refit with the same seed produced different objectives".into());
    }
    problems
}

/// MovieLens-100K ratings: `$CSRR_DATA_DIR/ml-100k/u.data`, else the
/// repository's `data/ml-100k/u.data`.
pub fn ml100k_path() -> Option<PathBuf> {
    let mut candidates = Vec::new();
    if let Some(dir) = std::env::var_os("CSRR_DATA_DIR") {
        candidates.push(PathBuf::from(dir).join("ml-100k").join("u.data"));
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    candidates.push(root.join("data").join("ml-100k").join("u.data"));
    candidates.into_iter().find(|p| p.is_file())
}
