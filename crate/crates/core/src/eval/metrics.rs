use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::EntityId;

/// Root mean squared error over `(truth, prediction)` pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("rmse needs at least one pair"));
    }
    let sse: f64 = pairs.iter().map(|&(t, p)| (t - p) * (t - p)).sum();
    Ok((sse / pairs.len() as f64).sqrt())
}

/// Recommended items (first `n` slots) that the user actually liked.
pub fn hitting_set<'a>(
    recommended: &'a [EntityId],
    relevant: &HashSet<EntityId>,
    n: usize,
) -> Vec<&'a EntityId> {
    recommended
        .iter()
        .take(n)
        .filter(|i| relevant.contains(*i))
        .collect()
}

/// `|Hitting| / n`. The denominator stays `n` even when fewer items could be
/// recommended.
pub fn precision_at_n(recommended: &[EntityId], relevant: &HashSet<EntityId>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    hitting_set(recommended, relevant, n).len() as f64 / n as f64
}

/// Rank-position penalty over the `n` recommendation slots: a hit at rank `p`
/// costs `p / n`, every other slot (misses and unfilled slots) costs
/// `(n + 1) / n`. Lower is better; the range is `[(n + 1) / 2, n + 1]`.
pub fn ranking_accumulation(recommended: &[EntityId], relevant: &HashSet<EntityId>, n: usize) -> f64 {
    let nf = n as f64;
    (0..n)
        .map(|slot| match recommended.get(slot) {
            Some(item) if relevant.contains(item) => (slot + 1) as f64 / nf,
            _ => (nf + 1.0) / nf,
        })
        .sum()
}
