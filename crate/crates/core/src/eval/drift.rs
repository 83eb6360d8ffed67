//! Synthetic implicit-feedback streams whose user preferences shift over time.
//!
//! Items are split into equal contiguous groups. Every user has a home group;
//! at fraction `τ` of the time span the user's active group is
//! `(home + round(drift_rate · τ)) mod groups`, and every event samples an item
//! from the active group with Zipf-like popularity. `drift_rate = 0` gives a
//! stationary control stream.

use std::collections::HashSet;
use std::ops::Range;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{EntityId, RatingEvent};

#[derive(Clone, Debug, PartialEq)]
pub struct DriftConfig {
    pub users: usize,
    pub items: usize,
    pub events_per_user: usize,
    /// Number of group shifts over the whole span.
    pub drift_rate: f64,
    pub groups: usize,
    /// Timestamps fall in `[0, span)`.
    pub span: i64,
    /// Zipf exponent of item popularity inside a group.
    pub popularity_skew: f64,
    pub seed: u64,
}

impl DriftConfig {
    pub fn new(users: usize, items: usize, events_per_user: usize, drift_rate: f64, seed: u64) -> Self {
        Self {
            users,
            items,
            events_per_user,
            drift_rate,
            groups: 10,
            span: 1_000_000,
            popularity_skew: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParam { name, reason });
        if self.users == 0 || self.events_per_user == 0 {
            return bad("users", "need at least one user and one event per user".into());
        }
        if self.groups == 0 || self.items < self.groups {
            return bad(
                "groups",
                format!("need 1 <= groups <= items, got {} groups for {} items", self.groups, self.items),
            );
        }
        if !(self.drift_rate.is_finite() && self.drift_rate >= 0.0) {
            return bad("drift_rate", format!("must be finite and >= 0, got {}", self.drift_rate));
        }
        if self.span <= 0 {
            return bad("span", format!("must be > 0, got {}", self.span));
        }
        if !(self.popularity_skew.is_finite() && self.popularity_skew >= 0.0) {
            return bad("popularity_skew", format!("must be >= 0, got {}", self.popularity_skew));
        }
        Ok(())
    }
}

/// What the generator knows about preferences.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    config: DriftConfig,
    home: Vec<usize>,
}

impl GroundTruth {
    pub fn user_id(i: usize) -> EntityId {
        EntityId::new(format!("u{i}"))
    }

    pub fn item_id(i: usize) -> EntityId {
        EntityId::new(format!("i{i}"))
    }

    pub fn home_group(&self, user: usize) -> usize {
        self.home[user]
    }

    /// Item indices of group `g`.
    pub fn group_items(&self, g: usize) -> Range<usize> {
        let (n, k) = (self.config.items, self.config.groups);
        (g * n / k)..((g + 1) * n / k)
    }

    pub fn active_group(&self, user: usize, timestamp: i64) -> usize {
        let tau = timestamp as f64 / self.config.span as f64;
        let shift = (self.config.drift_rate * tau).round() as usize;
        (self.home[user] + shift) % self.config.groups
    }

    /// Items of every group the user is active in during `(from, to]`.
    pub fn relevant_items(&self, user: usize, from: i64, to: i64) -> HashSet<EntityId> {
        let lo = (from + 1).max(0);
        let hi = to.min(self.config.span - 1);
        let mut groups = HashSet::new();
        if lo <= hi {
            groups.insert(self.active_group(user, lo));
            groups.insert(self.active_group(user, hi));
            // the shift is monotone in time, so visit each boundary in between
            let (s0, s1) = (self.shift_at(lo), self.shift_at(hi));
            for s in s0..=s1 {
                groups.insert((self.home[user] + s) % self.config.groups);
            }
        }
        groups
            .into_iter()
            .flat_map(|g| self.group_items(g))
            .map(Self::item_id)
            .collect()
    }

    fn shift_at(&self, timestamp: i64) -> usize {
        (self.config.drift_rate * timestamp as f64 / self.config.span as f64).round() as usize
    }
}

#[derive(Clone, Debug)]
pub struct DriftData {
    /// Implicit events sorted by timestamp.
    pub events: Vec<RatingEvent>,
    pub truth: GroundTruth,
}

/// Deterministic for a given configuration.
pub fn generate_drift(config: &DriftConfig) -> Result<DriftData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let home: Vec<usize> = (0..config.users)
        .map(|_| rng.random_range(0..config.groups))
        .collect();
    let truth = GroundTruth {
        config: config.clone(),
        home,
    };
    let samplers: Vec<(Range<usize>, WeightedIndex<f64>)> = (0..config.groups)
        .map(|g| {
            let r = truth.group_items(g);
            let w = (1..=r.len()).map(|rank| (rank as f64).powf(-config.popularity_skew));
            (r, WeightedIndex::new(w).expect("group is non-empty"))
        })
        .collect();

    let mut raw: Vec<(i64, usize, usize)> = Vec::with_capacity(config.users * config.events_per_user);
    for u in 0..config.users {
        for _ in 0..config.events_per_user {
            let t = rng.random_range(0..config.span);
            let (range, dist) = &samplers[truth.active_group(u, t)];
            raw.push((t, u, range.start + dist.sample(&mut rng)));
        }
    }
    raw.sort_unstable();
    let events = raw
        .into_iter()
        .map(|(t, u, i)| RatingEvent::implicit(GroundTruth::user_id(u), GroundTruth::item_id(i), t))
        .collect();
    Ok(DriftData { events, truth })
}
