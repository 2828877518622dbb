//! Ranking-metric kernels: plain and weighted AUROC, empirical CDF,
//! concordance index, and mean absolute error.
//!
//! AUROC routines sort once and sweep, so they run in O(n log n) while
//! matching a naive double loop to floating-point accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result, Side};

/// How a tied score pair is counted: `Strict` scores it 0 (the literal
/// indicator f(x_i) > f(x_j)), `Half` scores it 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    #[default]
    Strict,
    Half,
}

impl TiePolicy {
    /// Score contributed by a tied pair.
    pub fn tie_score(&self) -> f64 {
        match self {
            TiePolicy::Strict => 0.0,
            TiePolicy::Half => 0.5,
        }
    }
}

impl std::fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TiePolicy::Strict => write!(f, "strict"),
            TiePolicy::Half => write!(f, "half"),
        }
    }
}

impl std::str::FromStr for TiePolicy {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(TiePolicy::Strict),
            "half" => Ok(TiePolicy::Half),
            other => Err(EvalError::InvalidInput(format!("unknown tie policy `{other}`"))),
        }
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(what));
    }
    Ok(())
}

/// Reference scores sorted ascending, with cumulative weight below each
/// distinct value. Shared machinery for the AUC and CDF sweeps.
struct SortedReference {
    /// Distinct scores ascending.
    values: Vec<f64>,
    /// Weight mass at each distinct score.
    mass: Vec<f64>,
    /// mass_below[k] = total weight of values strictly below values[k].
    mass_below: Vec<f64>,
    total: f64,
}

impl SortedReference {
    fn build(scores: &[f64], weights: Option<&[f64]>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut values = Vec::new();
        let mut mass = Vec::new();
        for &i in &order {
            let w = weights.map_or(1.0, |ws| ws[i]);
            match values.last() {
                Some(&last) if last == scores[i] => {
                    *mass.last_mut().unwrap() += w;
                }
                _ => {
                    values.push(scores[i]);
                    mass.push(w);
                }
            }
        }
        let mut mass_below = Vec::with_capacity(mass.len());
        let mut acc = 0.0;
        for &m in &mass {
            mass_below.push(acc);
            acc += m;
        }
        SortedReference { values, mass, mass_below, total: acc }
    }

    /// (weight strictly below `x`, weight exactly at `x`).
    fn below_and_at(&self, x: f64) -> (f64, f64) {
        let idx = self.values.partition_point(|&v| v < x);
        let below = if idx == 0 { 0.0 } else { self.mass_below[idx - 1] + self.mass[idx - 1] };
        let at = if idx < self.values.len() && self.values[idx] == x { self.mass[idx] } else { 0.0 };
        (below, at)
    }
}

/// AUROC of positives against negatives: the fraction of (positive,
/// negative) pairs where the positive outscores the negative, ties
/// counted per `tie`.
pub fn auc(pos_scores: &[f64], neg_scores: &[f64], tie: TiePolicy) -> Result<f64> {
    if pos_scores.is_empty() {
        return Err(EvalError::EmptySide(Side::Positive));
    }
    if neg_scores.is_empty() {
        return Err(EvalError::EmptySide(Side::Negative));
    }
    check_finite(pos_scores, "positive scores")?;
    check_finite(neg_scores, "negative scores")?;
    let reference = SortedReference::build(neg_scores, None);
    let t = tie.tie_score();
    let mut num = 0.0;
    for &s in pos_scores {
        let (below, at) = reference.below_and_at(s);
        num += below + t * at;
    }
    Ok(num / (pos_scores.len() as f64 * neg_scores.len() as f64))
}

/// Self-normalized weighted AUROC.
///
/// Returns sum_{i,j} w+_i w-_j pair(i,j) / sum_{i,j} w+_i w-_j. When
/// `exclude_same_index` is set, both sides must be the same sample list
/// (equal lengths) and pairs with i = j are dropped from numerator and
/// denominator: a sample is not its own comparison partner.
pub fn weighted_auc(
    pos_scores: &[f64],
    pos_weights: &[f64],
    neg_scores: &[f64],
    neg_weights: &[f64],
    tie: TiePolicy,
    exclude_same_index: bool,
) -> Result<f64> {
    if pos_scores.len() != pos_weights.len() {
        return Err(EvalError::LengthMismatch {
            left: pos_scores.len(),
            right: pos_weights.len(),
            context: "positive scores vs weights",
        });
    }
    if neg_scores.len() != neg_weights.len() {
        return Err(EvalError::LengthMismatch {
            left: neg_scores.len(),
            right: neg_weights.len(),
            context: "negative scores vs weights",
        });
    }
    if pos_scores.is_empty() {
        return Err(EvalError::EmptySide(Side::Positive));
    }
    if neg_scores.is_empty() {
        return Err(EvalError::EmptySide(Side::Negative));
    }
    if exclude_same_index && pos_scores.len() != neg_scores.len() {
        return Err(EvalError::LengthMismatch {
            left: pos_scores.len(),
            right: neg_scores.len(),
            context: "exclude_same_index requires matching sample lists",
        });
    }
    check_finite(pos_scores, "positive scores")?;
    check_finite(neg_scores, "negative scores")?;
    check_finite(pos_weights, "positive weights")?;
    check_finite(neg_weights, "negative weights")?;
    if pos_weights.iter().chain(neg_weights.iter()).any(|&w| w < 0.0) {
        return Err(EvalError::InvalidInput("negative pairwise weight".into()));
    }

    let reference = SortedReference::build(neg_scores, Some(neg_weights));
    let t = tie.tie_score();
    let mut num = 0.0;
    for (&s, &w) in pos_scores.iter().zip(pos_weights) {
        let (below, at) = reference.below_and_at(s);
        num += w * (below + t * at);
    }
    let pos_total: f64 = pos_weights.iter().sum();
    let mut denom = pos_total * reference.total;
    if exclude_same_index {
        // A self-pair always ties (same sample, same score): it added
        // t * w+_i * w-_i to the numerator above.
        for ((&wp, &wn), _) in pos_weights.iter().zip(neg_weights).zip(pos_scores) {
            num -= t * wp * wn;
            denom -= wp * wn;
        }
    }
    if denom <= 0.0 {
        return Err(EvalError::DegenerateWeighting);
    }
    Ok(num / denom)
}

/// Empirical CDF of each query score against a reference sample:
/// entry k = (1/|reference|) sum_j pair_score(query_k, reference_j).
pub fn empirical_cdf(
    query_scores: &[f64],
    reference_scores: &[f64],
    tie: TiePolicy,
) -> Result<Vec<f64>> {
    if reference_scores.is_empty() {
        return Err(EvalError::EmptySide(Side::Negative));
    }
    check_finite(query_scores, "query scores")?;
    check_finite(reference_scores, "reference scores")?;
    let reference = SortedReference::build(reference_scores, None);
    let t = tie.tie_score();
    let n = reference_scores.len() as f64;
    Ok(query_scores
        .iter()
        .map(|&s| {
            let (below, at) = reference.below_and_at(s);
            (below + t * at) / n
        })
        .collect())
}

/// Concordance index between estimated and true values: over all
/// unordered pairs with distinct true values, concordant pairs score 1,
/// tied estimates 0.5, discordant 0.
pub fn c_index(estimated_values: &[f64], true_values: &[f64]) -> Result<f64> {
    if estimated_values.len() != true_values.len() {
        return Err(EvalError::LengthMismatch {
            left: estimated_values.len(),
            right: true_values.len(),
            context: "estimated vs true values",
        });
    }
    if estimated_values.len() < 2 {
        return Err(EvalError::InvalidInput("c_index needs at least 2 values".into()));
    }
    check_finite(estimated_values, "estimated values")?;
    check_finite(true_values, "true values")?;
    let n = estimated_values.len();
    let mut comparable = 0u64;
    let mut score = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if true_values[i] == true_values[j] {
                continue;
            }
            comparable += 1;
            let truth_up = true_values[i] < true_values[j];
            match estimated_values[i].partial_cmp(&estimated_values[j]).unwrap() {
                std::cmp::Ordering::Equal => score += 0.5,
                std::cmp::Ordering::Less if truth_up => score += 1.0,
                std::cmp::Ordering::Greater if !truth_up => score += 1.0,
                _ => {}
            }
        }
    }
    if comparable == 0 {
        return Err(EvalError::NoComparablePairs);
    }
    Ok(score / comparable as f64)
}

/// Mean absolute error between parallel vectors.
pub fn mae(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            left: estimates.len(),
            right: truths.len(),
            context: "estimates vs truths",
        });
    }
    if estimates.is_empty() {
        return Err(EvalError::InvalidInput("mae needs at least 1 value".into()));
    }
    let sum: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).abs()).sum();
    Ok(sum / estimates.len() as f64)
}
