//! Cost-sensitive squared losses and their mistake-driven subgradients.
//!
//! Two surrogates of the weighted 0-1 objective are supported:
//!
//! * [`LossVariant::TypeI`] scales the loss on positives by `alpha`:
//!   `alpha * ½(x − 1)²` for `a = 1`, `½x²` for `a = 0`.
//! * [`LossVariant::TypeII`] moves the positive target to `alpha`:
//!   `½(x − alpha)²` for `a = 1`, `½x²` for `a = 0`.
//!
//! `alpha` is the false-negative/false-positive cost ratio `c_p / c_n`.

use std::fmt;
use std::str::FromStr;

use crate::error::{CsrrError, Result};
use crate::matrix::{compensated_sum, DenseMatrix, ObservationMatrix};

const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossVariant {
    TypeI,
    TypeII,
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossVariant::TypeI => "type-i",
            LossVariant::TypeII => "type-ii",
        })
    }
}

impl FromStr for LossVariant {
    type Err = CsrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type-i" | "typei" | "i" | "1" => Ok(LossVariant::TypeI),
            "type-ii" | "typeii" | "ii" | "2" => Ok(LossVariant::TypeII),
            other => Err(CsrrError::InvalidConfig(format!(
                "unknown loss variant {other:?}"
            ))),
        }
    }
}

/// Asymmetric misclassification costs with `c_p + c_n = 1` and `c_n ≤ c_p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    variant: LossVariant,
    c_p: f64,
    c_n: f64,
}

impl CostModel {
    pub fn new(variant: LossVariant, c_p: f64, c_n: f64) -> Result<Self> {
        if !(c_p > 0.0 && c_p <= 1.0 && c_n > 0.0 && c_n <= 1.0) {
            return Err(CsrrError::InvalidCost(format!(
                "costs must lie in (0, 1], got c_p={c_p}, c_n={c_n}"
            )));
        }
        if (c_p + c_n - 1.0).abs() > SUM_TOL {
            return Err(CsrrError::InvalidCost(format!(
                "c_p + c_n must equal 1, got {}",
                c_p + c_n
            )));
        }
        if c_n > c_p {
            return Err(CsrrError::InvalidCost(format!(
                "c_n ({c_n}) must not exceed c_p ({c_p})"
            )));
        }
        Ok(Self { variant, c_p, c_n })
    }

    /// `c_n = 1 − c_p`; `c_p` must lie in `[0.5, 1)`.
    pub fn from_positive_cost(variant: LossVariant, c_p: f64) -> Result<Self> {
        Self::new(variant, c_p, 1.0 - c_p)
    }

    /// Costs normalised from a bias `alpha ≥ 1`: `c_p = alpha / (1 + alpha)`.
    pub fn from_alpha(variant: LossVariant, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(CsrrError::InvalidCost(format!(
                "alpha must be finite and >= 1, got {alpha}"
            )));
        }
        Self::new(variant, alpha / (1.0 + alpha), 1.0 / (1.0 + alpha))
    }

    pub fn variant(&self) -> LossVariant {
        self.variant
    }

    pub fn c_p(&self) -> f64 {
        self.c_p
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn alpha(&self) -> f64 {
        self.c_p / self.c_n
    }

    pub fn with_variant(self, variant: LossVariant) -> Self {
        Self { variant, ..self }
    }
}

/// Weights of the recall/specificity sum together with the class sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumWeights {
    pub mu_p: f64,
    pub mu_n: f64,
    pub t_p: usize,
    pub t_n: usize,
}

impl SumWeights {
    pub fn new(mu_p: f64, mu_n: f64, t_p: usize, t_n: usize) -> Result<Self> {
        if !((0.0..=1.0).contains(&mu_p) && (0.0..=1.0).contains(&mu_n)) {
            return Err(CsrrError::InvalidWeights(format!(
                "weights must lie in [0, 1], got mu_p={mu_p}, mu_n={mu_n}"
            )));
        }
        if (mu_p + mu_n - 1.0).abs() > SUM_TOL {
            return Err(CsrrError::InvalidWeights(format!(
                "mu_p + mu_n must equal 1, got {}",
                mu_p + mu_n
            )));
        }
        Ok(Self { mu_p, mu_n, t_p, t_n })
    }
}

/// Bias that makes the weighted 0-1 objective equivalent to maximising
/// `mu_p · recall + mu_n · specificity`: `mu_p·T_n / (mu_n·T_p)`.
pub fn alpha_from_sum(w: &SumWeights) -> Result<f64> {
    if w.mu_n <= 0.0 || w.t_p == 0 {
        return Err(CsrrError::InvalidWeights(format!(
            "alpha is undefined for mu_n={} and T_p={}",
            w.mu_n, w.t_p
        )));
    }
    Ok(w.mu_p * w.t_n as f64 / (w.mu_n * w.t_p as f64))
}

/// Loss of a single score `x` against label `positive`.
#[inline]
pub fn loss_entry(x: f64, positive: bool, cm: &CostModel) -> f64 {
    let alpha = cm.alpha();
    match (positive, cm.variant) {
        (true, LossVariant::TypeI) => alpha * 0.5 * (x - 1.0) * (x - 1.0),
        (true, LossVariant::TypeII) => 0.5 * (x - alpha) * (x - alpha),
        (false, _) => 0.5 * x * x,
    }
}

/// Mistake-driven subgradient: zero wherever the entry's own loss is zero.
#[inline]
pub fn subgrad_entry(x: f64, positive: bool, cm: &CostModel) -> f64 {
    if loss_entry(x, positive, cm) == 0.0 {
        return 0.0;
    }
    let alpha = cm.alpha();
    match (positive, cm.variant) {
        (true, LossVariant::TypeI) => alpha * (x - 1.0),
        (true, LossVariant::TypeII) => x - alpha,
        (false, _) => x,
    }
}

/// Dense sum of the entry losses over all `n × m` entries; unobserved
/// entries count as label 0.
pub fn total_loss(x: &DenseMatrix, a: &ObservationMatrix, cm: &CostModel) -> Result<f64> {
    a.ensure_shape(x)?;
    Ok(compensated_sum(
        x.values()
            .iter()
            .zip(a.mask())
            .map(|(&v, &p)| loss_entry(v, p, cm)),
    ))
}

/// Entry-wise subgradient matrix `G` of the loss at `x`.
pub fn subgradient_matrix(
    x: &DenseMatrix,
    a: &ObservationMatrix,
    cm: &CostModel,
) -> Result<DenseMatrix> {
    a.ensure_shape(x)?;
    let values = x
        .values()
        .iter()
        .zip(a.mask())
        .map(|(&v, &p)| subgrad_entry(v, p, cm))
        .collect();
    DenseMatrix::new(x.rows(), x.cols(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn type_i(alpha: f64) -> CostModel {
        CostModel::from_alpha(LossVariant::TypeI, alpha).unwrap()
    }

    fn type_ii(alpha: f64) -> CostModel {
        CostModel::from_alpha(LossVariant::TypeII, alpha).unwrap()
    }

    #[test]
    fn alpha_from_sum_examples() {
        let w = SumWeights::new(0.5, 0.5, 10, 90).unwrap();
        assert_abs_diff_eq!(alpha_from_sum(&w).unwrap(), 9.0, epsilon = 1e-12);
        let w = SumWeights::new(0.5, 0.5, 40, 40).unwrap();
        assert_abs_diff_eq!(alpha_from_sum(&w).unwrap(), 1.0, epsilon = 1e-12);
        let w = SumWeights::new(0.9, 0.1, 100, 100).unwrap();
        assert_abs_diff_eq!(alpha_from_sum(&w).unwrap(), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_from_sum_rejects_zero_denominator() {
        let w = SumWeights::new(1.0, 0.0, 10, 10).unwrap();
        assert!(matches!(alpha_from_sum(&w), Err(CsrrError::InvalidWeights(_))));
        let w = SumWeights::new(0.5, 0.5, 0, 10).unwrap();
        assert!(alpha_from_sum(&w).is_err());
    }

    #[test]
    fn cost_model_invariants() {
        assert!(CostModel::new(LossVariant::TypeI, 0.3, 0.7).is_err());
        assert!(CostModel::new(LossVariant::TypeI, 0.8, 0.3).is_err());
        assert!(CostModel::new(LossVariant::TypeI, 1.0, 0.0).is_err());
        assert!(CostModel::from_alpha(LossVariant::TypeI, 0.5).is_err());
        let cm = CostModel::from_positive_cost(LossVariant::TypeI, 0.75).unwrap();
        assert_eq!(cm.alpha(), 3.0);
        assert_abs_diff_eq!(type_i(9.0).alpha(), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_entry(1.0, true, &type_i(3.0)), 0.0);
        assert_abs_diff_eq!(loss_entry(0.5, true, &type_i(2.0)), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(loss_entry(0.5, true, &type_ii(2.0)), 1.125, epsilon = 1e-12);
        for cm in [type_i(2.0), type_ii(2.0)] {
            assert_abs_diff_eq!(loss_entry(0.4, false, &cm), 0.08, epsilon = 1e-12);
        }
    }

    #[test]
    fn subgradient_examples() {
        assert_abs_diff_eq!(subgrad_entry(0.5, true, &type_i(2.0)), -1.0, epsilon = 1e-12);
        assert_eq!(subgrad_entry(1.0, true, &type_i(2.0)), 0.0);
        assert_abs_diff_eq!(subgrad_entry(0.4, false, &type_i(2.0)), 0.4, epsilon = 1e-15);
        assert_eq!(subgrad_entry(0.0, false, &type_ii(5.0)), 0.0);
    }

    #[test]
    fn total_loss_examples() {
        let a = ObservationMatrix::from_positives(2, 3, [(0, 0), (1, 2)]).unwrap();
        assert_eq!(total_loss(&a.to_dense(), &a, &type_i(7.0)).unwrap(), 0.0);

        let x = DenseMatrix::from_rows(&[vec![0.5, 0.4]]).unwrap();
        let a = ObservationMatrix::from_positives(1, 2, [(0, 0)]).unwrap();
        assert_abs_diff_eq!(total_loss(&x, &a, &type_i(2.0)).unwrap(), 0.33, epsilon = 1e-12);

        let zero = ObservationMatrix::empty(2, 2).unwrap();
        assert_eq!(total_loss(&DenseMatrix::zeros(2, 2), &zero, &type_i(2.0)).unwrap(), 0.0);

        assert!(matches!(
            total_loss(&DenseMatrix::zeros(2, 3), &zero, &type_i(2.0)),
            Err(CsrrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn variants_agree_at_unit_alpha() {
        for &x in &[-0.5, 0.0, 0.3, 1.0, 1.7] {
            for &p in &[true, false] {
                assert_eq!(loss_entry(x, p, &type_i(1.0)), loss_entry(x, p, &type_ii(1.0)));
                assert_eq!(
                    subgrad_entry(x, p, &type_i(1.0)),
                    subgrad_entry(x, p, &type_ii(1.0))
                );
            }
        }
    }

    proptest! {
        #[test]
        fn losses_are_convex(
            x1 in -2.0f64..3.0,
            x2 in -2.0f64..3.0,
            t in 0.001f64..0.999,
            positive: bool,
            alpha in 1.0f64..10.0,
            second: bool,
        ) {
            let cm = if second { type_ii(alpha) } else { type_i(alpha) };
            let mid = loss_entry(t * x1 + (1.0 - t) * x2, positive, &cm);
            let chord = t * loss_entry(x1, positive, &cm) + (1.0 - t) * loss_entry(x2, positive, &cm);
            prop_assert!(mid <= chord + 1e-12);
            prop_assert!(loss_entry(x1, positive, &cm) >= 0.0);
        }
    }
}
