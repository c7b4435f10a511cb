//! Synthetic low-rank plus sparse ground truth, thresholded positive
//! sampling, and brute-force reference oracles.

use log::debug;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CsrrError, Result};
use crate::bf::{fit_bf, predict_bf, BfConfig};
use crate::losses::{CostModel, LossVariant};
use crate::matrix::{clamp_unit, svd, DenseMatrix, ObservationMatrix};
use crate::metrics::evaluate_scores;
use crate::nnm::{fit, predict, SolverConfig};

#[derive(Clone, Debug)]
pub struct SyntheticTruth {
    /// Ground-truth preferences on `[0, 1]`.
    pub m_true: DenseMatrix,
    /// Scaled low-rank part before outliers and clamping.
    pub low_rank: DenseMatrix,
    /// Signed outlier matrix.
    pub outliers: DenseMatrix,
    /// Every entry of `m_true` above `q`.
    pub y: ObservationMatrix,
    /// Observed subset of `y`.
    pub a: ObservationMatrix,
    pub q: f64,
    pub rho: f64,
    /// Number of positives in `y`.
    pub s: usize,
    pub seed: u64,
}

impl SyntheticTruth {
    /// Per user, the positives of `y` that were not sampled into `a`.
    pub fn held_out(&self) -> Vec<Vec<usize>> {
        (0..self.y.cols())
            .map(|user| {
                self.y
                    .column_positives(user)
                    .into_iter()
                    .filter(|&item| !self.a.is_positive(item, user))
                    .collect()
            })
            .collect()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CsrrError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Draws an `n × m` ground truth of the given rank with
/// `⌊outlier_frac·n·m⌋` outliers, thresholds it at `q` and observes
/// `round(rho·S)` of the resulting positives.
pub fn generate(
    n: usize,
    m: usize,
    rank: usize,
    outlier_frac: f64,
    q: f64,
    rho: f64,
    seed: u64,
) -> Result<SyntheticTruth> {
    if n == 0 || m == 0 || rank == 0 || rank > n.min(m) {
        return Err(CsrrError::InvalidConfig(format!(
            "rank {rank} must lie in [1, {}] for a {n}x{m} matrix",
            n.min(m)
        )));
    }
    check_unit("outlier_frac", outlier_frac)?;
    check_unit("q", q)?;
    check_unit("rho", rho)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = DenseMatrix::from_fn(n, rank, |_, _| rng.gen::<f64>());
    let right = DenseMatrix::from_fn(m, rank, |_, _| rng.gen::<f64>());
    let product = left.matmul_transpose(&right)?;
    let peak = product.max_abs();
    let low_rank = if peak > 0.0 { product.scale(1.0 / peak) } else { product };

    let mut outliers = DenseMatrix::zeros(n, m);
    let count = (outlier_frac * (n * m) as f64).floor() as usize;
    for k in sample(&mut rng, n * m, count) {
        let magnitude = rng.gen_range(0.5..=1.0);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        outliers.values_mut()[k] = sign * magnitude;
    }

    let m_true = clamp_unit(&low_rank.add(&outliers)?);
    let y = ObservationMatrix::from_threshold(&m_true, q);
    let s = y.positive_count();
    let observed = (rho * s as f64).round() as usize;
    let all: Vec<(usize, usize)> = y.positives().collect();
    let mut picked: Vec<(usize, usize)> = sample(&mut rng, s, observed).into_iter().map(|k| all[k]).collect();
    picked.sort_unstable();
    let a = ObservationMatrix::from_positives(n, m, picked)?;

    Ok(SyntheticTruth {
        m_true,
        low_rank,
        outliers,
        y,
        a,
        q,
        rho,
        s,
        seed,
    })
}

/// `α·#{A = 1, X ≤ q} + #{A = 0, X > q}`.
pub fn thresholded_loss(x: &DenseMatrix, truth: &SyntheticTruth, alpha: f64) -> Result<f64> {
    truth.a.ensure_shape(x)?;
    let q = truth.q;
    let (mut misses, mut false_alarms) = (0usize, 0usize);
    for (&v, &positive) in x.values().iter().zip(truth.a.mask()) {
        if positive && v <= q {
            misses += 1;
        } else if !positive && v > q {
            false_alarms += 1;
        }
    }
    Ok(alpha * misses as f64 + false_alarms as f64)
}

/// Minimises `(1/2η)‖U − û‖²_F + λ₁‖U‖_*` by subgradient descent with step
/// `η/(k+1)` for 2·10⁵ iterations, returning the mean of the second half of
/// the iterates. Only meant for matrices up to 3×3.
pub fn brute_force_prox_u(u_hat: &DenseMatrix, eta: f64, lambda1: f64) -> Result<DenseMatrix> {
    const ITERS: usize = 200_000;
    if u_hat.rows() > 3 || u_hat.cols() > 3 {
        return Err(CsrrError::InvalidConfig("brute force prox is limited to 3x3".into()));
    }
    if !(eta > 0.0) || lambda1 < 0.0 {
        return Err(CsrrError::InvalidConfig(format!(
            "need eta > 0 and lambda1 >= 0, got {eta}, {lambda1}"
        )));
    }
    let mut u = u_hat.clone();
    let mut tail = DenseMatrix::zeros(u.rows(), u.cols());
    let tol = 1e-14 * u_hat.frobenius_norm().max(1.0);
    for k in 0..ITERS {
        let decomposition = svd(&u)?;
        let ones: Vec<f64> = decomposition
            .singular
            .iter()
            .map(|&s| if s > tol { 1.0 } else { 0.0 })
            .collect();
        let nuclear_sub = decomposition.recompose(&ones);
        let step = eta / (k + 1) as f64;
        for ((x, &h), &g) in u.values_mut().iter_mut().zip(u_hat.values()).zip(nuclear_sub.values()) {
            *x -= step * ((*x - h) / eta + lambda1 * g);
        }
        if k >= ITERS / 2 {
            for (t, &x) in tail.values_mut().iter_mut().zip(u.values()) {
                *t += x;
            }
        }
    }
    Ok(tail.scale(1.0 / (ITERS - ITERS / 2) as f64))
}

/// Outcome of comparing the fitted model's per-entry thresholded loss at
/// two problem sizes.
#[derive(Clone, Debug)]
pub struct TrendReport {
    pub small: (usize, usize),
    pub large: (usize, usize),
    pub small_losses: Vec<f64>,
    pub large_losses: Vec<f64>,
    /// Constants of the generalisation bound. Not estimated.
    pub c: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
}

impl TrendReport {
    pub fn small_mean(&self) -> f64 {
        mean(&self.small_losses)
    }

    pub fn large_mean(&self) -> f64 {
        mean(&self.large_losses)
    }

    pub fn holds(&self) -> bool {
        self.large_mean() <= self.small_mean()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Clone, Copy, Debug)]
pub struct SynthParams {
    pub rank: usize,
    pub outlier_frac: f64,
    pub q: f64,
    pub rho: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            rank: 2,
            outlier_frac: 0.02,
            q: 0.5,
            rho: 0.5,
        }
    }
}

/// Fits the nuclear-norm solver at both sizes for every seed and records the
/// thresholded loss per entry against the observations.
pub fn trend_check(
    small: (usize, usize),
    large: (usize, usize),
    params: SynthParams,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Result<TrendReport> {
    let alpha = cfg.cost.alpha();
    let run = |(n, m): (usize, usize), seed: u64| -> Result<f64> {
        let truth = generate(n, m, params.rank, params.outlier_frac, params.q, params.rho, seed)?;
        let state = fit(&truth.a, &SolverConfig { seed, ..*cfg })?;
        let loss = thresholded_loss(&predict(&state), &truth, alpha)? / (n * m) as f64;
        debug!("{n}x{m} seed {seed}: {} iterations, loss/entry {loss:.5}", state.iter);
        Ok(loss)
    };
    let small_losses = seeds.iter().map(|&s| run(small, s)).collect::<Result<Vec<_>>>()?;
    let large_losses = seeds.iter().map(|&s| run(large, s)).collect::<Result<Vec<_>>>()?;
    Ok(TrendReport {
        small,
        large,
        small_losses,
        large_losses,
        c: None,
        delta: None,
        gamma: None,
        epsilon: None,
    })
}

/// Solver settings used for the synthetic checks: both solvers learn a
/// useful ranking at 30×20 with these.
pub fn synthetic_solver_config() -> BfConfig {
    BfConfig {
        base: SolverConfig {
            eta: 0.3,
            lambda1: 10.0,
            lambda2: 10.0,
            max_iters: 500,
            cost: CostModel::from_positive_cost(LossVariant::TypeI, 0.8).expect("valid cost"),
            ..SolverConfig::default()
        },
        latent_dim: 2,
        ..BfConfig::default()
    }
}

/// NDCG of the nuclear-norm and factored solvers on the same synthetic
/// problems, ranked against the unobserved true positives.
#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub cutoff: usize,
    pub nnm: Vec<f64>,
    pub bf: Vec<f64>,
}

impl CrossCheck {
    pub fn nnm_mean(&self) -> f64 {
        mean(&self.nnm)
    }

    pub fn bf_mean(&self) -> f64 {
        mean(&self.bf)
    }

    pub fn gap(&self) -> f64 {
        (self.nnm_mean() - self.bf_mean()).abs()
    }
}

pub fn solver_cross_check(
    (n, m): (usize, usize),
    params: SynthParams,
    cfg: &BfConfig,
    seeds: &[u64],
    cutoff: usize,
) -> Result<CrossCheck> {
    let mut out = CrossCheck {
        cutoff,
        nnm: Vec::new(),
        bf: Vec::new(),
    };
    for &seed in seeds {
        let truth = generate(n, m, params.rank, params.outlier_frac, params.q, params.rho, seed)?;
        let test = truth.held_out();
        let base = SolverConfig { seed, ..cfg.base };
        let nnm = fit(&truth.a, &base)?;
        let bf = fit_bf(&truth.a, &BfConfig { base, ..*cfg })?;
        let score = |x: DenseMatrix| -> Result<f64> {
            let report = evaluate_scores(&x, &truth.a, &test, &[cutoff])?;
            Ok(report.at(cutoff).expect("cutoff was requested").ndcg)
        };
        out.nnm.push(score(predict(&nnm))?);
        out.bf.push(score(predict_bf(&bf))?);
        debug!("seed {seed}: nnm {:.4} bf {:.4}", out.nnm.last().unwrap(), out.bf.last().unwrap());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::singular_values;
    use crate::prox::svt;

    #[test]
    fn generation_counts() {
        let t = generate(30, 20, 2, 0.02, 0.5, 0.5, 4).unwrap();
        assert_eq!(t.outliers.values().iter().filter(|&&v| v != 0.0).count(), 12);
        assert_eq!(t.a.positive_count(), (0.5 * t.s as f64).round() as usize);
        assert!(t.a.positives().all(|(i, j)| t.y.is_positive(i, j)));
        for (k, &v) in t.m_true.values().iter().enumerate() {
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(t.y.mask()[k], v > 0.5);
        }
        assert!(t.low_rank.max_abs() <= 1.0);
    }

    #[test]
    fn generation_edge_cases() {
        let t = generate(8, 6, 1, 0.0, 0.5, 1.0, 1).unwrap();
        let sv = singular_values(&t.m_true).unwrap();
        assert!(sv[1] < 1e-10 * sv[0]);
        assert_eq!(t.a, t.y);
        assert!(generate(4, 3, 4, 0.0, 0.5, 1.0, 1).is_err());
        assert!(generate(4, 3, 1, 1.5, 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(12, 9, 2, 0.05, 0.5, 0.7, 42).unwrap();
        let b = generate(12, 9, 2, 0.05, 0.5, 0.7, 42).unwrap();
        assert_eq!(a.m_true, b.m_true);
        assert_eq!(a.a, b.a);
        assert_ne!(generate(12, 9, 2, 0.05, 0.5, 0.7, 43).unwrap().m_true, a.m_true);
    }

    #[test]
    fn thresholded_loss_examples() {
        let mut t = generate(1, 2, 1, 0.0, 0.5, 1.0, 0).unwrap();
        t.a = ObservationMatrix::from_positives(1, 2, [(0, 0)]).unwrap();
        let x = DenseMatrix::new(1, 2, vec![0.4, 0.6]).unwrap();
        assert_eq!(thresholded_loss(&x, &t, 2.0).unwrap(), 3.0);
        assert_eq!(thresholded_loss(&t.a.to_dense(), &t, 2.0).unwrap(), 0.0);
        assert_eq!(thresholded_loss(&x, &t, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn cost_transformation_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (q, gamma) = (0.5, 4.0);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-1.5..2.5);
            assert!(gamma * x * x >= if x > q { 1.0 } else { 0.0 });
            assert!(gamma * (1.0 - x).powi(2) >= if x <= q { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn brute_force_trivial_cases() {
        let u_hat = DenseMatrix::from_rows(&[vec![0.3, -0.2], vec![0.5, 0.1]]).unwrap();
        let same = brute_force_prox_u(&u_hat, 0.5, 0.0).unwrap();
        assert!(same.max_abs_diff(&u_hat).unwrap() < 1e-12);
        assert_eq!(brute_force_prox_u(&DenseMatrix::zeros(3, 3), 0.5, 1.0).unwrap(), DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn brute_force_agrees_with_svt() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u_hat = DenseMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let brute = brute_force_prox_u(&u_hat, 0.5, 1.0).unwrap();
        let exact = svt(&u_hat, 0.5).unwrap();
        assert!(brute.sub(&exact).unwrap().frobenius_norm() < 1e-5);
    }
}
