//! Sparse pheromone vectors and the algebra every other module builds on.
//!
//! A [`PheromoneVector`] is a map from [`PheromoneType`] to a signed amount,
//! stored as a vector of `(type, amount)` pairs sorted by type. Absent types
//! are zero and an exact zero is never stored. Keeping the entries sorted lets
//! dot products, evaporation and transmission run as single linear merges, and
//! fixes the summation order so every route through the crate produces
//! bit-identical floating-point results.

use std::cmp::Ordering;
use std::fmt;

/// Identifier of one kind of pheromone.
///
/// With unique seeding every user owns a type; with clustered seeding types
/// `0..k` are cluster types and users registered later receive fresh ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PheromoneType(pub u32);

impl fmt::Display for PheromoneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PheromoneVector {
    entries: Vec<(PheromoneType, f64)>,
}

impl PheromoneVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// `{ty: 1.0}`, the seed every user starts from.
    pub fn unit(ty: PheromoneType) -> Self {
        Self {
            entries: vec![(ty, 1.0)],
        }
    }

    /// Builds a vector from arbitrary pairs. Repeated types are summed and
    /// zero amounts are dropped.
    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (PheromoneType, f64)>,
    {
        let mut raw: Vec<_> = entries.into_iter().collect();
        raw.sort_by_key(|&(ty, _)| ty);
        let mut out: Vec<(PheromoneType, f64)> = Vec::with_capacity(raw.len());
        for (ty, amount) in raw {
            match out.last_mut() {
                Some(last) if last.0 == ty => last.1 += amount,
                _ => out.push((ty, amount)),
            }
        }
        out.retain(|&(_, a)| a != 0.0);
        Self { entries: out }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in ascending type order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = (PheromoneType, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(PheromoneType, f64)] {
        &self.entries
    }

    pub fn get(&self, ty: PheromoneType) -> f64 {
        self.entries
            .binary_search_by_key(&ty, |&(t, _)| t)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn contains(&self, ty: PheromoneType) -> bool {
        self.entries.binary_search_by_key(&ty, |&(t, _)| t).is_ok()
    }

    /// Largest `|amount|`, or 0 for the empty vector.
    pub fn max_magnitude(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, &(_, a)| m.max(a.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt()
    }

    /// Sum of products over common types, accumulated in ascending type order.
    pub fn dot(&self, other: &Self) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|&(t, a)| (t, a * c))
                .filter(|&(_, a)| a != 0.0)
                .collect(),
        }
    }

    /// Drops entries with `|amount| < sigma` (and exact zeros). With a cap,
    /// keeps only the `cap` largest magnitudes, ties going to the lower type.
    pub fn cutoff(&self, sigma: f64, cap: Option<usize>) -> Self {
        let mut entries = self.entries.clone();
        enforce_cutoff(&mut entries, sigma, cap);
        Self { entries }
    }

    /// Every entry scaled by its evaporation factor (see [`evaporation_factor`]).
    pub fn evaporated(&self, lambda: f64) -> Self {
        let max = self.max_magnitude();
        Self {
            entries: self
                .entries
                .iter()
                .map(|&(t, a)| (t, a * evaporation_factor(a, max, lambda)))
                .collect(),
        }
    }

    /// One side of a pheromone exchange in a single merge pass:
    /// `cutoff(evaporate(self) + coeff * donor)`.
    ///
    /// Returns the new vector and the number of slots the merge produced,
    /// which is `|self ∪ donor|` when `coeff != 0` and `|self|` otherwise.
    pub(crate) fn evaporate_and_absorb(
        &self,
        lambda: f64,
        donor: &Self,
        coeff: f64,
        sigma: f64,
        cap: Option<usize>,
    ) -> (Self, usize) {
        let max = self.max_magnitude();
        let own = |a: f64| a * evaporation_factor(a, max, lambda);
        let (a, b) = (&self.entries, &donor.entries);
        let mut out = Vec::with_capacity(a.len() + b.len());
        if coeff == 0.0 {
            out.extend(a.iter().map(|&(t, x)| (t, own(x))));
        } else {
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let ord = match (a.get(i), b.get(j)) {
                    (Some(x), Some(y)) => x.0.cmp(&y.0),
                    (Some(_), None) => Ordering::Less,
                    _ => Ordering::Greater,
                };
                match ord {
                    Ordering::Less => {
                        out.push((a[i].0, own(a[i].1)));
                        i += 1;
                    }
                    Ordering::Greater => {
                        out.push((b[j].0, coeff * b[j].1));
                        j += 1;
                    }
                    Ordering::Equal => {
                        out.push((a[i].0, own(a[i].1) + coeff * b[j].1));
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        let touched = out.len();
        enforce_cutoff(&mut out, sigma, cap);
        (Self { entries: out }, touched)
    }
}

/// Multiplicative evaporation factor `exp((|a| + λ) / (M + λ) − 1)` for an
/// entry of amount `a` in a vector whose largest magnitude is `max`.
///
/// The factor is exactly 1 for a maximal entry and lies in `(0, 1)` for the
/// rest, shrinking as the entry gets weaker relative to the strongest one.
pub fn evaporation_factor(amount: f64, max: f64, lambda: f64) -> f64 {
    ((amount.abs() + lambda) / (max + lambda) - 1.0).exp()
}

fn enforce_cutoff(entries: &mut Vec<(PheromoneType, f64)>, sigma: f64, cap: Option<usize>) {
    entries.retain(|&(_, a)| a != 0.0 && a.abs() >= sigma);
    if let Some(k) = cap {
        if entries.len() > k {
            entries.sort_by(|x, y| y.1.abs().total_cmp(&x.1.abs()).then(x.0.cmp(&y.0)));
            entries.truncate(k);
            entries.sort_by_key(|&(t, _)| t);
        }
    }
}

pub fn max_magnitude(ph: &PheromoneVector) -> f64 {
    ph.max_magnitude()
}

pub fn cutoff(ph: &PheromoneVector, sigma: f64, cap: Option<usize>) -> PheromoneVector {
    ph.cutoff(sigma, cap)
}

/// Cosine of two sparse vectors; 0 when either has zero norm.
pub fn cosine_similarity(a: &PheromoneVector, b: &PheromoneVector) -> f64 {
    cosine_with_norms(a.dot(b), a.norm(), b.norm())
}

/// Cosine from a precomputed dot product and norms, clamped to `[-1, 1]`.
pub fn cosine_with_norms(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    // `+ 0.0` folds a negative zero into +0 so ties sort together
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0) + 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(i: u32) -> PheromoneType {
        PheromoneType(i)
    }

    fn ph(pairs: &[(u32, f64)]) -> PheromoneVector {
        PheromoneVector::from_entries(pairs.iter().map(|&(i, a)| (t(i), a)))
    }

    #[test]
    fn max_magnitude_examples() {
        assert_eq!(max_magnitude(&PheromoneVector::new()), 0.0);
        assert_eq!(max_magnitude(&ph(&[(0, 1.0), (1, 0.5)])), 1.0);
        assert_eq!(max_magnitude(&ph(&[(0, -2.0), (1, 0.5)])), 2.0);
    }

    #[test]
    fn cosine_examples() {
        let ab = ph(&[(0, 1.0), (1, 1.0)]);
        assert!((cosine_similarity(&ab, &ab) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&ph(&[(0, 1.0)]), &ph(&[(1, 1.0)])), 0.0);
        let c = cosine_similarity(&ph(&[(0, 1.0)]), &ph(&[(0, 3.0), (1, 4.0)]));
        assert!((c - 0.6).abs() < 1e-12);
        assert_eq!(cosine_similarity(&ph(&[(0, 1.0)]), &ph(&[(0, -1.0)])), -1.0);
        assert_eq!(cosine_similarity(&PheromoneVector::new(), &ab), 0.0);
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(ph(&[(1, 0.4), (2, 0.009)]).cutoff(0.01, None), ph(&[(1, 0.4)]));
        assert_eq!(ph(&[(1, 0.4)]).cutoff(0.01, None), ph(&[(1, 0.4)]));
        assert!(ph(&[(1, -0.005)]).cutoff(0.01, None).is_empty());
    }

    #[test]
    fn cutoff_cap_breaks_ties_by_type() {
        let v = ph(&[(5, 0.5), (2, -0.5), (9, 0.9), (1, 0.1)]);
        assert_eq!(v.cutoff(0.0, Some(2)), ph(&[(2, -0.5), (9, 0.9)]));
    }

    #[test]
    fn from_entries_merges_and_drops_zero() {
        let v = ph(&[(3, 1.0), (1, 0.5), (3, -1.0)]);
        assert_eq!(v.entries(), &[(t(1), 0.5)]);
    }

    #[test]
    fn absorb_counts_union() {
        let a = ph(&[(1, 1.0), (2, 0.5)]);
        let b = ph(&[(2, 1.0), (3, 1.0)]);
        let (_, touched) = a.evaporate_and_absorb(1.0, &b, 0.2, 0.01, None);
        assert_eq!(touched, 3);
        let (_, touched) = a.evaporate_and_absorb(1.0, &b, 0.0, 0.01, None);
        assert_eq!(touched, 2);
    }

    fn arb_vector() -> impl Strategy<Value = PheromoneVector> {
        prop::collection::vec((0u32..12, -3.0f64..3.0), 0..10)
            .prop_map(|v| PheromoneVector::from_entries(v.into_iter().map(|(i, a)| (t(i), a))))
    }

    proptest! {
        #[test]
        fn cosine_self_is_one(a in arb_vector()) {
            prop_assume!(!a.is_empty());
            prop_assert!((cosine_similarity(&a, &a) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(a in arb_vector(), b in arb_vector(), c in 0.01f64..100.0) {
            let ab = cosine_similarity(&a, &b);
            prop_assert!((ab - cosine_similarity(&b, &a)).abs() < 1e-12);
            prop_assert!((cosine_similarity(&a.scaled(c), &b) - ab).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn cutoff_idempotent_and_shrinking(a in arb_vector(), sigma in 0.0f64..2.0, cap in prop::option::of(1usize..6)) {
            let once = a.cutoff(sigma, cap);
            prop_assert_eq!(once.cutoff(sigma, cap), once.clone());
            prop_assert!(once.max_magnitude() <= a.max_magnitude());
            prop_assert!(once.iter().all(|(_, x)| x.abs() >= sigma && x != 0.0));
        }

        #[test]
        fn absorb_matches_composition(a in arb_vector(), b in arb_vector(), coeff in -1.0f64..1.0, sigma in 0.0f64..0.5) {
            let (merged, _) = a.evaporate_and_absorb(1.0, &b, coeff, sigma, None);
            let composed = PheromoneVector::from_entries(
                a.evaporated(1.0).iter().chain(b.scaled(coeff).iter()),
            ).cutoff(sigma, None);
            prop_assert_eq!(merged.len(), composed.len());
            for ((t1, x), (t2, y)) in merged.iter().zip(composed.iter()) {
                prop_assert_eq!(t1, t2);
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
