//! Bilinear-factorization variant of the solver: the low-rank component is
//! written as `PᵀQ` with `P ∈ R^{d×n}`, `Q ∈ R^{d×m}`, so no SVD is needed.
//!
//! The nuclear norm is replaced by `½(‖P‖²_F + ‖Q‖²_F)`. Each outer
//! iteration evaluates the loss subgradient `G` at `X = PᵀQ + V` once, runs
//! the closed-form `P`/`Q` alternation with `G` held fixed, and then takes a
//! soft-thresholded projected step on `V`.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CsrrError, Result};
use crate::losses::{subgradient_matrix, total_loss};
use crate::matrix::{clamp_range, clamp_unit, DenseMatrix, ObservationMatrix};
use crate::nnm::SolverConfig;
use crate::prox::prox_l1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfConfig {
    pub base: SolverConfig,
    /// Inner dimension `d` of the factorization.
    pub latent_dim: usize,
    pub inner_max_iters: usize,
    pub inner_rel_tol: f64,
    /// When false, the factor box `[0, 1/√d]` and the `[0, 1]` projection of
    /// `V` are skipped.
    pub box_constraints: bool,
}

impl Default for BfConfig {
    fn default() -> Self {
        Self {
            base: SolverConfig::default(),
            latent_dim: 10,
            inner_max_iters: 50,
            inner_rel_tol: 1e-4,
            box_constraints: true,
        }
    }
}

impl BfConfig {
    pub fn validate(&self, a: &ObservationMatrix) -> Result<()> {
        self.base.validate()?;
        let limit = a.rows().min(a.cols());
        if self.latent_dim == 0 || self.latent_dim > limit {
            return Err(CsrrError::InvalidConfig(format!(
                "latent_dim must lie in [1, {limit}], got {}",
                self.latent_dim
            )));
        }
        if self.inner_max_iters == 0 {
            return Err(CsrrError::InvalidConfig("inner_max_iters must be >= 1".into()));
        }
        if !(self.inner_rel_tol > 0.0) {
            return Err(CsrrError::InvalidConfig(format!(
                "inner_rel_tol must be positive, got {}",
                self.inner_rel_tol
            )));
        }
        Ok(())
    }

    /// Upper bound on factor entries, `1/√d`.
    pub fn factor_bound(&self) -> f64 {
        1.0 / (self.latent_dim as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct BfState {
    /// `d × n`.
    pub p: DenseMatrix,
    /// `d × m`.
    pub q: DenseMatrix,
    /// `n × m`.
    pub v: DenseMatrix,
    pub iter: usize,
    pub objective: f64,
}

impl BfState {
    /// Factors uniform in `[0, 1/√d]` from the configured seed, `V = 0`.
    pub fn initial(a: &ObservationMatrix, cfg: &BfConfig) -> Result<Self> {
        let (n, m) = a.shape();
        let d = cfg.latent_dim;
        let bound = cfg.factor_bound();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.base.seed);
        let p = DenseMatrix::from_fn(d, n, |_, _| rng.gen_range(0.0..=bound));
        let q = DenseMatrix::from_fn(d, m, |_, _| rng.gen_range(0.0..=bound));
        let v = DenseMatrix::zeros(n, m);
        let objective = objective(&p, &q, &v, a, cfg)?;
        Ok(Self {
            p,
            q,
            v,
            iter: 0,
            objective,
        })
    }
}

/// `PᵀQ`.
pub fn low_rank_part(state: &BfState) -> DenseMatrix {
    state
        .p
        .transpose_matmul(&state.q)
        .expect("factors share the latent dimension")
}

/// `X = PᵀQ + V`.
pub fn predict_bf(state: &BfState) -> DenseMatrix {
    low_rank_part(state)
        .add(&state.v)
        .expect("state components share a shape")
}

/// `loss(PᵀQ + V) + ½λ₁(‖P‖²_F + ‖Q‖²_F) + λ₂‖V‖₁`.
pub fn objective(
    p: &DenseMatrix,
    q: &DenseMatrix,
    v: &DenseMatrix,
    a: &ObservationMatrix,
    cfg: &BfConfig,
) -> Result<f64> {
    let x = p.transpose_matmul(q)?.add(v)?;
    let frob = p.frobenius_norm().powi(2) + q.frobenius_norm().powi(2);
    Ok(total_loss(&x, a, &cfg.base.cost)?
        + 0.5 * cfg.base.lambda1 * frob
        + cfg.base.lambda2 * v.l1_norm())
}

fn factor_steps(
    p: &DenseMatrix,
    q: &DenseMatrix,
    g: &DenseMatrix,
    eta: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    // ∂X/∂P applied to G is Q·Gᵀ (d×n); ∂X/∂Q applied to G is P·G (d×m)
    let p_hat = p.zip_map(&q.matmul_transpose(g)?, |p, d| p - eta * d)?;
    let q_hat = q.zip_map(&p.matmul(g)?, |q, d| q - eta * d)?;
    Ok((p_hat, q_hat))
}

/// Proximal gradient points `(P̂, Q̂)` at the current state.
pub fn pq_gradients(
    state: &BfState,
    a: &ObservationMatrix,
    cfg: &BfConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let g = subgradient_matrix(&predict_bf(state), a, &cfg.base.cost)?;
    factor_steps(&state.p, &state.q, &g, cfg.base.eta)
}

/// Closed-form factor update `clamp_{[0,1/√d]}(P̂ / (1 + ηλ₁))`.
pub fn shrink_factor(hat: &DenseMatrix, cfg: &BfConfig) -> DenseMatrix {
    let shrink = 1.0 / (1.0 + cfg.base.eta * cfg.base.lambda1);
    let scaled = hat.scale(shrink);
    if cfg.box_constraints {
        clamp_range(&scaled, 0.0, cfg.factor_bound())
    } else {
        scaled
    }
}

fn stacked_norm(p: &DenseMatrix, q: &DenseMatrix) -> f64 {
    (p.frobenius_norm().powi(2) + q.frobenius_norm().powi(2)).sqrt()
}

fn inner_loop(
    state: &BfState,
    g: &DenseMatrix,
    cfg: &BfConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut p = state.p.clone();
    let mut q = state.q.clone();
    for k in 0..cfg.inner_max_iters {
        let (p_hat, q_hat) = factor_steps(&p, &q, g, cfg.base.eta)?;
        let p_next = shrink_factor(&p_hat, cfg);
        let q_next = shrink_factor(&q_hat, cfg);
        if !(p_next.is_finite() && q_next.is_finite()) {
            return Err(CsrrError::Divergence {
                iteration: state.iter,
                objective: f64::NAN,
            });
        }
        let change = stacked_norm(&p_next.sub(&p)?, &q_next.sub(&q)?);
        let scale = stacked_norm(&p, &q).max(f64::MIN_POSITIVE);
        p = p_next;
        q = q_next;
        if change / scale < cfg.inner_rel_tol {
            debug!("inner loop converged after {} steps", k + 1);
            break;
        }
    }
    Ok((p, q))
}

/// Alternates the closed-form `P`/`Q` updates with the loss subgradient
/// held at the state's prediction, until the relative change of `(P, Q)`
/// falls below `inner_rel_tol` or `inner_max_iters` is reached.
pub fn inner_solve(state: &BfState, a: &ObservationMatrix, cfg: &BfConfig) -> Result<BfState> {
    let g = subgradient_matrix(&predict_bf(state), a, &cfg.base.cost)?;
    let (p, q) = inner_loop(state, &g, cfg)?;
    let objective = objective(&p, &q, &state.v, a, cfg)?;
    Ok(BfState {
        p,
        q,
        v: state.v.clone(),
        iter: state.iter,
        objective,
    })
}

/// One outer iteration: factor alternation, then the `V` step, both driven
/// by the subgradient at the incoming prediction.
pub fn bf_iterate(state: &BfState, a: &ObservationMatrix, cfg: &BfConfig) -> Result<BfState> {
    let g = subgradient_matrix(&predict_bf(state), a, &cfg.base.cost)?;
    let (p, q) = inner_loop(state, &g, cfg)?;
    let v = if cfg.base.sparse_component {
        let eta = cfg.base.eta;
        let stepped = state.v.zip_map(&g, |v, g| v - eta * g)?;
        let v_tilde = prox_l1(&stepped, eta * cfg.base.lambda2);
        if cfg.box_constraints {
            clamp_unit(&v_tilde)
        } else {
            v_tilde
        }
    } else {
        DenseMatrix::zeros(state.v.rows(), state.v.cols())
    };
    let objective = objective(&p, &q, &v, a, cfg)?;
    Ok(BfState {
        p,
        q,
        v,
        iter: state.iter + 1,
        objective,
    })
}

pub fn fit_bf(a: &ObservationMatrix, cfg: &BfConfig) -> Result<BfState> {
    fit_bf_with_observer(a, cfg, |_| {})
}

pub fn fit_bf_with_observer(
    a: &ObservationMatrix,
    cfg: &BfConfig,
    mut observe: impl FnMut(&BfState),
) -> Result<BfState> {
    cfg.validate(a)?;
    let mut state = BfState::initial(a, cfg)?;
    observe(&state);
    while state.iter < cfg.base.max_iters {
        let next = bf_iterate(&state, a, cfg)?;
        if !next.objective.is_finite() {
            return Err(CsrrError::Divergence {
                iteration: next.iter,
                objective: next.objective,
            });
        }
        let change = (next.objective - state.objective).abs() / state.objective.abs().max(1.0);
        debug!(
            "outer iteration {} objective {:.6} change {:.3e}",
            next.iter, next.objective, change
        );
        state = next;
        observe(&state);
        if change < cfg.base.rel_tol {
            break;
        }
    }
    Ok(state)
}
