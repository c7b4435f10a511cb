//! Top-N ranking metrics and the cost-sensitive scalar metrics.

use std::collections::{BTreeMap, HashSet};

use crate::error::{CsrrError, Result};
use crate::losses::{CostModel, SumWeights};
use crate::matrix::{compensated_sum, DenseMatrix, ObservationMatrix};

/// Candidate items of one user ordered by descending score, ties broken by
/// ascending item index. Training positives are never included.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub user: usize,
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
}

impl RankedList {
    /// Ranks one column of `scores`, skipping the user's training positives.
    pub fn from_scores(scores: &DenseMatrix, train: &ObservationMatrix, user: usize) -> Self {
        let mut items: Vec<usize> = (0..scores.rows())
            .filter(|&i| !train.is_positive(i, user))
            .collect();
        items.sort_by(|&a, &b| {
            scores
                .get(b, user)
                .total_cmp(&scores.get(a, user))
                .then(a.cmp(&b))
        });
        let ranked_scores = items.iter().map(|&i| scores.get(i, user)).collect();
        Self {
            user,
            items,
            scores: ranked_scores,
        }
    }

    /// Serves a global item order, minus the user's training positives.
    pub fn from_order(order: &[usize], train: &ObservationMatrix, user: usize) -> Self {
        let items: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| !train.is_positive(i, user))
            .collect();
        let len = items.len();
        Self {
            user,
            items,
            scores: (0..len).map(|k| (len - k) as f64).collect(),
        }
    }

    fn hits<'a>(
        &'a self,
        relevant: &'a HashSet<usize>,
        n: usize,
    ) -> impl Iterator<Item = bool> + 'a {
        self.items.iter().take(n).map(move |i| relevant.contains(i))
    }
}

/// `(|top-n ∩ relevant| / n, |top-n ∩ relevant| / |relevant|)`, or `None`
/// when the user has no relevant items.
pub fn precision_recall_at_n(
    ranked: &RankedList,
    relevant: &HashSet<usize>,
    n: usize,
) -> Option<(f64, f64)> {
    if relevant.is_empty() || n == 0 {
        return None;
    }
    let hits = ranked.hits(relevant, n).filter(|&h| h).count() as f64;
    Some((hits / n as f64, hits / relevant.len() as f64))
}

pub fn f1_at_n(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Binary-gain NDCG with a `log₂(rank + 1)` discount; the ideal DCG is
/// truncated at `min(n, |relevant|)`.
pub fn ndcg_at_n(ranked: &RankedList, relevant: &HashSet<usize>, n: usize) -> Option<f64> {
    if relevant.is_empty() || n == 0 {
        return None;
    }
    let discount = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
    let dcg = compensated_sum(
        ranked
            .hits(relevant, n)
            .enumerate()
            .filter(|(_, h)| *h)
            .map(|(k, _)| discount(k)),
    );
    let ideal = compensated_sum((0..n.min(relevant.len())).map(discount));
    Some(dcg / ideal)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RankingScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ndcg: f64,
}

/// Ranking metrics per cutoff, averaged over users with a non-empty test set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub per_n: BTreeMap<usize, RankingScores>,
    pub users: usize,
}

impl MetricsReport {
    pub fn at(&self, n: usize) -> Option<&RankingScores> {
        self.per_n.get(&n)
    }
}

/// Scores every user's ranked list against the held-out positives.
/// `test[user]` lists that user's held-out items; empty entries are skipped.
pub fn evaluate_rankings<F>(
    users: usize,
    mut ranked_for: F,
    test: &[Vec<usize>],
    cutoffs: &[usize],
) -> Result<MetricsReport>
where
    F: FnMut(usize) -> RankedList,
{
    if test.len() != users {
        return Err(CsrrError::DimensionMismatch {
            expected: format!("{users} test sets"),
            actual: format!("{} test sets", test.len()),
        });
    }
    if cutoffs.iter().any(|&n| n == 0) {
        return Err(CsrrError::InvalidConfig("cutoffs must be >= 1".into()));
    }
    let mut sums: BTreeMap<usize, [Vec<f64>; 4]> = cutoffs
        .iter()
        .map(|&n| (n, Default::default()))
        .collect();
    let mut counted = 0usize;
    for (user, held_out) in test.iter().enumerate() {
        if held_out.is_empty() {
            continue;
        }
        let relevant: HashSet<usize> = held_out.iter().copied().collect();
        let ranked = ranked_for(user);
        counted += 1;
        for (&n, acc) in sums.iter_mut() {
            let (p, r) = precision_recall_at_n(&ranked, &relevant, n).expect("relevant is non-empty");
            acc[0].push(p);
            acc[1].push(r);
            acc[2].push(f1_at_n(p, r));
            acc[3].push(ndcg_at_n(&ranked, &relevant, n).expect("relevant is non-empty"));
        }
    }
    if counted == 0 {
        return Err(CsrrError::UndefinedMetric("no user has held-out items".into()));
    }
    let mean = |v: &Vec<f64>| compensated_sum(v.iter().copied()) / counted as f64;
    let per_n = sums
        .iter()
        .map(|(&n, acc)| {
            (
                n,
                RankingScores {
                    precision: mean(&acc[0]),
                    recall: mean(&acc[1]),
                    f1: mean(&acc[2]),
                    ndcg: mean(&acc[3]),
                },
            )
        })
        .collect();
    Ok(MetricsReport {
        per_n,
        users: counted,
    })
}

/// Ranks each user's column of `scores`.
pub fn evaluate_scores(
    scores: &DenseMatrix,
    train: &ObservationMatrix,
    test: &[Vec<usize>],
    cutoffs: &[usize],
) -> Result<MetricsReport> {
    train.ensure_shape(scores)?;
    evaluate_rankings(
        scores.cols(),
        |user| RankedList::from_scores(scores, train, user),
        test,
        cutoffs,
    )
}

/// Serves the same global order to every user.
pub fn evaluate_order(
    order: &[usize],
    train: &ObservationMatrix,
    test: &[Vec<usize>],
    cutoffs: &[usize],
) -> Result<MetricsReport> {
    evaluate_rankings(
        train.cols(),
        |user| RankedList::from_order(order, train, user),
        test,
        cutoffs,
    )
}

/// Confusion counts of the classifier `I(X > q)` against a label matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Confusion {
    /// Positives in the truth (`T_p`).
    pub positives: usize,
    /// Negatives in the truth (`T_n`).
    pub negatives: usize,
    /// False negatives (`M_p`).
    pub false_negatives: usize,
    /// False positives (`M_n`).
    pub false_positives: usize,
}

pub fn confusion(predictions: &DenseMatrix, truth: &ObservationMatrix, q: f64) -> Result<Confusion> {
    truth.ensure_shape(predictions)?;
    let mut c = Confusion {
        positives: truth.positive_count(),
        negatives: truth.negative_count(),
        false_negatives: 0,
        false_positives: 0,
    };
    for (&x, &label) in predictions.values().iter().zip(truth.mask()) {
        match (label, x > q) {
            (true, false) => c.false_negatives += 1,
            (false, true) => c.false_positives += 1,
            _ => {}
        }
    }
    Ok(c)
}

/// `mu_p · recall + mu_n · specificity` of `I(X > q)`. Class sizes come from
/// `truth`; only the weights of `w` are used.
pub fn weighted_sum_metric(
    predictions: &DenseMatrix,
    truth: &ObservationMatrix,
    q: f64,
    w: &SumWeights,
) -> Result<f64> {
    let c = confusion(predictions, truth, q)?;
    if c.positives == 0 || c.negatives == 0 {
        return Err(CsrrError::UndefinedMetric(format!(
            "weighted sum needs both classes (T_p={}, T_n={})",
            c.positives, c.negatives
        )));
    }
    let recall = (c.positives - c.false_negatives) as f64 / c.positives as f64;
    let specificity = (c.negatives - c.false_positives) as f64 / c.negatives as f64;
    Ok(w.mu_p * recall + w.mu_n * specificity)
}

/// `c_p · M_p + c_n · M_n` of `I(X > q)`.
pub fn weighted_cost_metric(
    predictions: &DenseMatrix,
    truth: &ObservationMatrix,
    q: f64,
    cm: &CostModel,
) -> Result<f64> {
    let c = confusion(predictions, truth, q)?;
    Ok(cm.c_p() * c.false_negatives as f64 + cm.c_n() * c.false_positives as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossVariant;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn list(items: &[usize]) -> RankedList {
        RankedList {
            user: 0,
            items: items.to_vec(),
            scores: (0..items.len()).rev().map(|k| k as f64).collect(),
        }
    }

    fn set(items: &[usize]) -> HashSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn precision_recall_examples() {
        let ranked = list(&[1, 2, 3, 4, 5, 6, 7]);
        let (p, r) = precision_recall_at_n(&ranked, &set(&[2, 5, 9, 10]), 5).unwrap();
        assert_abs_diff_eq!(p, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-15);
        assert_eq!(precision_recall_at_n(&ranked, &set(&[1, 2, 3]), 3), Some((1.0, 1.0)));
        assert_eq!(precision_recall_at_n(&ranked, &set(&[7]), 5), Some((0.0, 0.0)));
        assert_eq!(precision_recall_at_n(&ranked, &set(&[]), 5), None);
    }

    #[test]
    fn f1_examples() {
        assert_abs_diff_eq!(f1_at_n(0.4, 0.5), 4.0 / 9.0, epsilon = 1e-15);
        assert_eq!(f1_at_n(0.0, 0.0), 0.0);
        assert_eq!(f1_at_n(1.0, 1.0), 1.0);
    }

    #[test]
    fn ndcg_examples() {
        let ranked = list(&[10, 11, 12, 13, 14, 15]);
        let v = ndcg_at_n(&ranked, &set(&[10, 12]), 5).unwrap();
        assert_abs_diff_eq!(v, 0.919721, epsilon = 1e-6);
        assert_abs_diff_eq!(v, 1.5 / (1.0 + 1.0 / 3f64.log2()), epsilon = 1e-15);
        assert_abs_diff_eq!(ndcg_at_n(&ranked, &set(&[10, 11]), 5).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(ndcg_at_n(&ranked, &set(&[99]), 5), Some(0.0));
        assert_eq!(ndcg_at_n(&ranked, &set(&[]), 5), None);
    }

    #[test]
    fn ranking_ties_and_exclusions() {
        let scores = DenseMatrix::from_rows(&[vec![0.5], vec![0.9], vec![0.5], vec![0.9]]).unwrap();
        let train = ObservationMatrix::from_positives(4, 1, [(3, 0)]).unwrap();
        let r = RankedList::from_scores(&scores, &train, 0);
        assert_eq!(r.items, vec![1, 0, 2]);
        assert!(r.scores.windows(2).all(|w| w[0] >= w[1]));
        let r = RankedList::from_order(&[3, 2, 1, 0], &train, 0);
        assert_eq!(r.items, vec![2, 1, 0]);
    }

    #[test]
    fn users_without_test_items_are_skipped() {
        let scores = DenseMatrix::from_fn(4, 3, |i, _| -(i as f64));
        let train = ObservationMatrix::empty(4, 3).unwrap();
        let test = vec![vec![0], vec![], vec![3]];
        let report = evaluate_scores(&scores, &train, &test, &[1]).unwrap();
        assert_eq!(report.users, 2);
        assert_abs_diff_eq!(report.at(1).unwrap().precision, 0.5, epsilon = 1e-15);

        let none = vec![vec![], vec![], vec![]];
        assert!(matches!(
            evaluate_scores(&scores, &train, &none, &[1]),
            Err(CsrrError::UndefinedMetric(_))
        ));
    }

    fn truth() -> ObservationMatrix {
        ObservationMatrix::from_positives(2, 5, [(0, 0), (0, 1), (1, 2), (1, 4), (0, 3)]).unwrap()
    }

    #[test]
    fn weighted_sum_examples() {
        let t = truth();
        let w = SumWeights::new(0.5, 0.5, 5, 5).unwrap();
        assert_eq!(weighted_sum_metric(&t.to_dense(), &t, 0.5, &w).unwrap(), 1.0);
        let all_pos = DenseMatrix::filled(2, 5, 1.0);
        let w = SumWeights::new(0.3, 0.7, 5, 5).unwrap();
        assert_abs_diff_eq!(weighted_sum_metric(&all_pos, &t, 0.5, &w).unwrap(), 0.3, epsilon = 1e-15);

        // 10 entries, 5 positive. Recall 3/5 = 0.6 and specificity 4/5 = 0.8.
        let mut x = t.to_dense();
        x.set(0, 0, 0.0);
        x.set(0, 1, 0.0);
        x.set(1, 0, 1.0);
        let w = SumWeights::new(0.5, 0.5, 5, 5).unwrap();
        assert_abs_diff_eq!(weighted_sum_metric(&x, &t, 0.5, &w).unwrap(), 0.7, epsilon = 1e-15);

        let empty = ObservationMatrix::empty(2, 5).unwrap();
        assert!(weighted_sum_metric(&x, &empty, 0.5, &w).is_err());
    }

    #[test]
    fn weighted_cost_examples() {
        let t = ObservationMatrix::from_positives(4, 5, (0..3).map(|j| (0, j))).unwrap();
        let cm = CostModel::from_positive_cost(LossVariant::TypeI, 0.8).unwrap();
        assert_eq!(weighted_cost_metric(&t.to_dense(), &t, 0.5, &cm).unwrap(), 0.0);
        // three missed positives, ten false alarms
        let mut x = DenseMatrix::zeros(4, 5);
        for k in 0..10 {
            x.set(1 + k / 5, k % 5, 1.0);
        }
        let c = confusion(&x, &t, 0.5).unwrap();
        assert_eq!((c.false_negatives, c.false_positives), (3, 10));
        assert_abs_diff_eq!(weighted_cost_metric(&x, &t, 0.5, &cm).unwrap(), 4.4, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn ranking_metrics_are_scale_invariant(
            raw in proptest::collection::vec(0.0f64..1.0, 24),
            k in 0.01f64..100.0,
        ) {
            let scores = DenseMatrix::new(8, 3, raw).unwrap();
            let train = ObservationMatrix::from_positives(8, 3, [(0, 0), (5, 2)]).unwrap();
            let test = vec![vec![1, 2], vec![3], vec![4, 6, 7]];
            let base = evaluate_scores(&scores, &train, &test, &[1, 3, 5]).unwrap();
            let scaled = evaluate_scores(&scores.scale(k), &train, &test, &[1, 3, 5]).unwrap();
            prop_assert_eq!(&base, &scaled);
            for s in base.per_n.values() {
                for v in [s.precision, s.recall, s.f1, s.ndcg] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            let recalls: Vec<f64> = base.per_n.values().map(|s| s.recall).collect();
            prop_assert!(recalls.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
