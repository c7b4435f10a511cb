//! Accelerated proximal gradient solver for the low-rank plus sparse
//! decomposition `X = U + V` with nuclear-norm and l1 regularisers.
//!
//! Each iteration takes one shared gradient step on `U` and `V`, applies
//! singular value thresholding to `U` and soft thresholding to `V`, then
//! extrapolates with the momentum sequence `τ_{t+1} = (1 + √(1 + 4τ_t²)) / 2`
//! and projects both components back onto `[0, 1]`.

use log::debug;

use crate::error::{CsrrError, Result};
use crate::losses::{subgradient_matrix, total_loss, CostModel, LossVariant};
use crate::matrix::{clamp_unit, nuclear_norm, DenseMatrix, ObservationMatrix};
use crate::prox::{prox_l1, svt};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Step size η.
    pub eta: f64,
    /// Nuclear-norm weight λ₁ (Frobenius weight for the bilinear solver).
    pub lambda1: f64,
    /// l1 weight λ₂ on the sparse component.
    pub lambda2: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub cost: CostModel,
    /// When false the sparse component is pinned to zero.
    pub sparse_component: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            lambda1: 10.0,
            lambda2: 1.0,
            max_iters: 200,
            rel_tol: 1e-5,
            seed: 0,
            cost: CostModel::from_positive_cost(LossVariant::TypeI, 0.8)
                .expect("default cost model is valid"),
            sparse_component: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(CsrrError::InvalidConfig(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(CsrrError::InvalidConfig(format!(
                "regularisers must be non-negative, got lambda1={}, lambda2={}",
                self.lambda1, self.lambda2
            )));
        }
        if self.max_iters == 0 {
            return Err(CsrrError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(CsrrError::InvalidConfig(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NnmState {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub u_tilde: DenseMatrix,
    pub v_tilde: DenseMatrix,
    pub tau: f64,
    pub iter: usize,
    pub objective: f64,
}

impl NnmState {
    /// All four iterates start at zero with `τ₀ = 1`.
    pub fn initial(a: &ObservationMatrix, cfg: &SolverConfig) -> Result<Self> {
        let (n, m) = a.shape();
        let zero = DenseMatrix::zeros(n, m);
        let objective = objective(&zero, &zero, a, cfg)?;
        Ok(Self {
            u: zero.clone(),
            v: zero.clone(),
            u_tilde: zero.clone(),
            v_tilde: zero,
            tau: 1.0,
            iter: 0,
            objective,
        })
    }
}

/// `X = U + V`.
pub fn predict(state: &NnmState) -> DenseMatrix {
    state
        .u
        .add(&state.v)
        .expect("state components share a shape")
}

/// `loss(U + V) + λ₁‖U‖_* + λ₂‖V‖₁`.
pub fn objective(
    u: &DenseMatrix,
    v: &DenseMatrix,
    a: &ObservationMatrix,
    cfg: &SolverConfig,
) -> Result<f64> {
    let x = u.add(v)?;
    let mut value = total_loss(&x, a, &cfg.cost)?;
    if cfg.lambda1 > 0.0 {
        value += cfg.lambda1 * nuclear_norm(u)?;
    }
    if cfg.lambda2 > 0.0 {
        value += cfg.lambda2 * v.l1_norm();
    }
    Ok(value)
}

pub(crate) fn next_tau(tau: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * tau * tau).sqrt()) / 2.0
}

/// Shared gradient step: `(U − ηG, V − ηG)` with `G` the loss subgradient at
/// `X = U + V`.
pub fn gradient_step(
    state: &NnmState,
    a: &ObservationMatrix,
    cfg: &SolverConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let g = subgradient_matrix(&predict(state), a, &cfg.cost)?;
    let eta = cfg.eta;
    let u_hat = state.u.zip_map(&g, |u, g| u - eta * g)?;
    let v_hat = state.v.zip_map(&g, |v, g| v - eta * g)?;
    Ok((u_hat, v_hat))
}

fn extrapolate(fresh: &DenseMatrix, previous: &DenseMatrix, momentum: f64) -> Result<DenseMatrix> {
    let moved = fresh.zip_map(previous, |new, old| new + momentum * (new - old))?;
    Ok(clamp_unit(&moved))
}

/// One accelerated proximal gradient iteration.
pub fn apgl_iterate(
    state: &NnmState,
    a: &ObservationMatrix,
    cfg: &SolverConfig,
) -> Result<NnmState> {
    let (u_hat, v_hat) = gradient_step(state, a, cfg)?;
    let u_tilde = svt(&u_hat, cfg.eta * cfg.lambda1)?;
    let v_tilde = if cfg.sparse_component {
        prox_l1(&v_hat, cfg.eta * cfg.lambda2)
    } else {
        DenseMatrix::zeros(v_hat.rows(), v_hat.cols())
    };

    let tau = next_tau(state.tau);
    let momentum = (state.tau - 1.0) / tau;
    let u = extrapolate(&u_tilde, &state.u_tilde, momentum)?;
    let v = extrapolate(&v_tilde, &state.v_tilde, momentum)?;
    let objective = objective(&u, &v, a, cfg)?;

    Ok(NnmState {
        u,
        v,
        u_tilde,
        v_tilde,
        tau,
        iter: state.iter + 1,
        objective,
    })
}

/// Runs [`apgl_iterate`] until `max_iters` or until the relative objective
/// change drops below `rel_tol`.
pub fn fit(a: &ObservationMatrix, cfg: &SolverConfig) -> Result<NnmState> {
    fit_with_observer(a, cfg, |_| {})
}

/// Like [`fit`], calling `observe` on the initial state and after every
/// iteration.
pub fn fit_with_observer(
    a: &ObservationMatrix,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&NnmState),
) -> Result<NnmState> {
    cfg.validate()?;
    let mut state = NnmState::initial(a, cfg)?;
    observe(&state);
    while state.iter < cfg.max_iters {
        // mistake-driven: nothing to correct once every entry has zero loss
        if total_loss(&predict(&state), a, &cfg.cost)? == 0.0 {
            debug!("zero loss at iteration {}, stopping", state.iter);
            break;
        }
        let next = apgl_iterate(&state, a, cfg)?;
        if !next.objective.is_finite() {
            return Err(CsrrError::Divergence {
                iteration: next.iter,
                objective: next.objective,
            });
        }
        let change = (next.objective - state.objective).abs() / state.objective.abs().max(1.0);
        debug!(
            "iteration {} objective {:.6} change {:.3e}",
            next.iter, next.objective, change
        );
        state = next;
        observe(&state);
        if change < cfg.rel_tol {
            break;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_state(u: f64, v: f64) -> NnmState {
        let one = |x| DenseMatrix::new(1, 1, vec![x]).unwrap();
        NnmState {
            u: one(u),
            v: one(v),
            u_tilde: one(u),
            v_tilde: one(v),
            tau: 1.0,
            iter: 0,
            objective: 0.0,
        }
    }

    fn cfg_with(alpha: f64, eta: f64) -> SolverConfig {
        SolverConfig {
            eta,
            cost: CostModel::from_alpha(LossVariant::TypeI, alpha).unwrap(),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn predict_is_entrywise_sum() {
        let mut s = scalar_state(0.3, 0.4);
        assert_abs_diff_eq!(predict(&s).get(0, 0), 0.7, epsilon = 1e-15);
        s.v = DenseMatrix::zeros(1, 1);
        assert_eq!(predict(&s), s.u);
    }

    #[test]
    fn gradient_step_examples() {
        let positive = ObservationMatrix::from_positives(1, 1, [(0, 0)]).unwrap();
        let (u, v) = gradient_step(&scalar_state(0.2, 0.3), &positive, &cfg_with(2.0, 0.1)).unwrap();
        assert_abs_diff_eq!(u.get(0, 0), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(v.get(0, 0), 0.4, epsilon = 1e-12);

        let negative = ObservationMatrix::empty(1, 1).unwrap();
        let (u, v) = gradient_step(&scalar_state(0.2, 0.2), &negative, &cfg_with(2.0, 0.5)).unwrap();
        assert_abs_diff_eq!(u.get(0, 0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.get(0, 0), 0.0, epsilon = 1e-12);

        // zero loss everywhere leaves the iterate untouched
        let (u, v) = gradient_step(&scalar_state(0.6, 0.4), &positive, &cfg_with(2.0, 0.5)).unwrap();
        assert_eq!((u.get(0, 0), v.get(0, 0)), (0.6, 0.4));
    }

    #[test]
    fn first_momentum_step() {
        assert_abs_diff_eq!(next_tau(1.0), (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next_tau(1.0), 1.618034, epsilon = 1e-6);
        // (τ₀ − 1)/τ₁ = 0 so the first iterate is the clamped prox output
        let a = ObservationMatrix::from_positives(2, 2, [(0, 0), (1, 1)]).unwrap();
        let cfg = SolverConfig { lambda1: 0.5, lambda2: 0.5, ..cfg_with(3.0, 0.1) };
        let s0 = NnmState::initial(&a, &cfg).unwrap();
        let s1 = apgl_iterate(&s0, &a, &cfg).unwrap();
        assert_eq!(s1.u, clamp_unit(&s1.u_tilde));
        assert_eq!(s1.v, clamp_unit(&s1.v_tilde));
        assert_eq!(s1.iter, 1);
    }

    #[test]
    fn zero_loss_fixed_point() {
        let a = ObservationMatrix::from_positives(2, 2, [(0, 1)]).unwrap();
        let cfg = SolverConfig { lambda1: 0.0, lambda2: 0.0, ..cfg_with(2.0, 0.2) };
        let mut s = NnmState::initial(&a, &cfg).unwrap();
        s.u = a.to_dense();
        s.u_tilde = s.u.clone();
        let next = apgl_iterate(&s, &a, &cfg).unwrap();
        assert!(next.u.max_abs_diff(&s.u).unwrap() < 1e-12);
        assert_eq!(next.v, s.v);
        assert!(next.tau > s.tau);
        assert_eq!(next.iter, 1);
    }

    #[test]
    fn all_zero_observations_stay_at_zero() {
        let a = ObservationMatrix::empty(4, 3).unwrap();
        let cfg = SolverConfig { lambda1: 0.01, lambda2: 0.01, ..SolverConfig::default() };
        let s = fit(&a, &cfg).unwrap();
        assert_eq!(s.u, DenseMatrix::zeros(4, 3));
        assert_eq!(s.v, DenseMatrix::zeros(4, 3));
    }

    #[test]
    fn rank_one_full_observation_is_recovered() {
        let a = ObservationMatrix::from_positives(5, 5, (0..5).flat_map(|i| (0..5).map(move |j| (i, j))))
            .unwrap();
        let cfg = SolverConfig {
            eta: 0.2,
            lambda1: 0.01,
            lambda2: 0.01,
            rel_tol: 1e-9,
            ..cfg_with(1.0, 0.2)
        };
        let s = fit(&a, &cfg).unwrap();
        let err = predict(&s).max_abs_diff(&a.to_dense()).unwrap();
        assert!(err <= 0.1, "max entry error {err}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let a = ObservationMatrix::empty(2, 2).unwrap();
        for cfg in [
            SolverConfig { eta: 0.0, ..SolverConfig::default() },
            SolverConfig { lambda1: -1.0, ..SolverConfig::default() },
            SolverConfig { max_iters: 0, ..SolverConfig::default() },
            SolverConfig { rel_tol: 0.0, ..SolverConfig::default() },
        ] {
            assert!(matches!(fit(&a, &cfg), Err(CsrrError::InvalidConfig(_))));
        }
    }

    #[test]
    fn huge_step_reports_divergence_or_stays_boxed() {
        let a = ObservationMatrix::from_positives(3, 3, [(0, 0), (1, 2)]).unwrap();
        let cfg = SolverConfig { eta: 1e300, lambda1: 1e300, ..SolverConfig::default() };
        match fit(&a, &cfg) {
            Err(CsrrError::Divergence { .. }) | Err(CsrrError::NumericFailure { .. }) => {}
            Ok(s) => assert!(s.u.values().iter().all(|v| (0.0..=1.0).contains(v))),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
