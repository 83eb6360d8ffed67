use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pheromone::{PheromoneType, PheromoneVector};

/// External user or item identifier.
///
/// Ordering is "natural": purely numeric ids compare by value and sort before
/// everything else, other ids compare lexicographically. Equality is exact
/// string equality, so `"7"` and `"007"` are distinct ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric(&self) -> Option<u64> {
        let s = self.0.as_bytes();
        if s.is_empty() || s.len() > 19 || !s.iter().all(u8::is_ascii_digit) {
            return None;
        }
        self.0.parse().ok()
    }
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// One timestamped preference observation. `value` is `None` for implicit
/// (0/1) feedback.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingEvent {
    pub user: EntityId,
    pub item: EntityId,
    pub value: Option<f64>,
    pub timestamp: i64,
}

impl RatingEvent {
    pub fn explicit(
        user: impl Into<EntityId>,
        item: impl Into<EntityId>,
        value: f64,
        timestamp: i64,
    ) -> Self {
        Self {
            user: user.into(),
            item: item.into(),
            value: Some(value),
            timestamp,
        }
    }

    pub fn implicit(user: impl Into<EntityId>, item: impl Into<EntityId>, timestamp: i64) -> Self {
        Self {
            user: user.into(),
            item: item.into(),
            value: None,
            timestamp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Feedback {
    Explicit,
    Implicit,
}

impl Feedback {
    pub fn as_str(self) -> &'static str {
        match self {
            Feedback::Explicit => "explicit",
            Feedback::Implicit => "implicit",
        }
    }
}

/// How users receive their initial pheromone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Seeding {
    /// One type per user (ACF).
    Unique,
    /// Types are k-means user clusters (IACF).
    Clustered { clusters: usize },
}

impl Seeding {
    pub fn name(self) -> &'static str {
        match self {
            Seeding::Unique => "acf",
            Seeding::Clustered { .. } => "iacf",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Transmission rate.
    pub gamma: f64,
    /// Evaporation control; larger means slower evaporation.
    pub lambda: f64,
    /// Cutoff threshold on `|amount|`.
    pub sigma: f64,
    pub seeding: Seeding,
    pub neighborhood_size: usize,
    pub top_n: usize,
    pub rating_min: f64,
    pub rating_max: f64,
    /// Optional cap on the number of pheromone types one entity may carry.
    pub type_cap: Option<usize>,
    /// Weight neighbor deviations by signed similarity instead of `|s|`.
    pub signed_weighting: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 0.2,
            lambda: 1.0,
            sigma: 0.01,
            seeding: Seeding::Clustered { clusters: 20 },
            neighborhood_size: 20,
            top_n: 20,
            rating_min: 1.0,
            rating_max: 5.0,
            type_cap: None,
            signed_weighting: false,
        }
    }
}

impl ModelParams {
    pub fn acf() -> Self {
        Self {
            seeding: Seeding::Unique,
            ..Self::default()
        }
    }

    pub fn iacf(clusters: usize) -> Self {
        Self {
            seeding: Seeding::Clustered { clusters },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: impl Into<String>) -> Result<()> {
            Err(Error::InvalidParam {
                name,
                reason: reason.into(),
            })
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad("gamma", format!("must be finite and >= 0, got {}", self.gamma));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda", format!("must be finite and > 0, got {}", self.lambda));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad("sigma", format!("must be finite and >= 0, got {}", self.sigma));
        }
        if let Seeding::Clustered { clusters: 0 } = self.seeding {
            return bad("cluster_count", "must be >= 1");
        }
        if self.neighborhood_size == 0 {
            return bad("neighborhood_size", "must be >= 1");
        }
        if self.top_n == 0 {
            return bad("top_n", "must be >= 1");
        }
        if !(self.rating_min.is_finite()
            && self.rating_max.is_finite()
            && self.rating_min < self.rating_max)
        {
            return bad(
                "rating_scale",
                format!("need min < max, got [{}, {}]", self.rating_min, self.rating_max),
            );
        }
        if self.type_cap == Some(0) {
            return bad("type_cap", "must be >= 1");
        }
        Ok(())
    }

    pub fn scale_midpoint(&self) -> f64 {
        (self.rating_min + self.rating_max) / 2.0
    }
}

/// A user's or item's pheromones plus running rating statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityState {
    pub pheromones: PheromoneVector,
    pub rating_count: u64,
    pub rating_sum: f64,
}

impl EntityState {
    pub fn with_pheromones(pheromones: PheromoneVector) -> Self {
        Self {
            pheromones,
            ..Self::default()
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.rating_count > 0).then(|| self.rating_sum / self.rating_count as f64)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GlobalStats {
    pub total_count: u64,
    pub total_sum: f64,
}

impl GlobalStats {
    pub fn mean(&self) -> Option<f64> {
        (self.total_count > 0).then(|| self.total_sum / self.total_count as f64)
    }
}

/// Dense storage for one kind of entity: external ids, an id index, and states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityTable {
    ids: Vec<EntityId>,
    index: HashMap<EntityId, u32>,
    states: Vec<EntityState>,
}

impl EntityTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &EntityId) -> Option<usize> {
        self.index.get(id).map(|&i| i as usize)
    }

    pub fn id(&self, index: usize) -> &EntityId {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[EntityId] {
        &self.ids
    }

    pub fn state(&self, index: usize) -> &EntityState {
        &self.states[index]
    }

    pub fn get(&self, id: &EntityId) -> Option<&EntityState> {
        self.index_of(id).map(|i| &self.states[i])
    }

    pub fn states(&self) -> &[EntityState] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, &EntityState)> {
        self.ids.iter().zip(&self.states)
    }

    pub(crate) fn state_mut(&mut self, index: usize) -> &mut EntityState {
        &mut self.states[index]
    }

    /// Appends a new entity, rejecting duplicates.
    pub(crate) fn insert(
        &mut self,
        kind: &'static str,
        id: EntityId,
        state: EntityState,
    ) -> Result<usize> {
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
        let idx = self.ids.len();
        self.index.insert(id.clone(), idx as u32);
        self.ids.push(id);
        self.states.push(state);
        Ok(idx)
    }
}

/// Complete learned state: entities, global statistics, parameters, and the
/// observed rating matrix needed for neighborhood prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub(crate) params: ModelParams,
    pub(crate) feedback: Feedback,
    pub(crate) users: EntityTable,
    pub(crate) items: EntityTable,
    pub(crate) stats: GlobalStats,
    /// Per user index: item index -> latest observed value (1.0 for implicit).
    pub(crate) ratings: Vec<HashMap<u32, f64>>,
}

impl Model {
    /// An empty model. Users and items are registered by the init functions
    /// or on first sight during training.
    pub fn empty(params: ModelParams, feedback: Feedback) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            feedback,
            users: EntityTable::default(),
            items: EntityTable::default(),
            stats: GlobalStats::default(),
            ratings: Vec::new(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn feedback(&self) -> Feedback {
        self.feedback
    }

    pub fn users(&self) -> &EntityTable {
        &self.users
    }

    pub fn items(&self) -> &EntityTable {
        &self.items
    }

    pub fn stats(&self) -> GlobalStats {
        self.stats
    }

    /// Global mean rating, or the scale midpoint before any rating is seen.
    pub fn global_mean(&self) -> f64 {
        self.stats
            .mean()
            .unwrap_or_else(|| self.params.scale_midpoint())
    }

    pub fn rating(&self, user: usize, item: usize) -> Option<f64> {
        self.ratings[user].get(&(item as u32)).copied()
    }

    pub fn rated_items(&self, user: usize) -> &HashMap<u32, f64> {
        &self.ratings[user]
    }

    pub fn rating_count(&self) -> usize {
        self.ratings.iter().map(HashMap::len).sum()
    }

    /// Freezes a copy for concurrent readers while training continues.
    pub fn snapshot(&self) -> Arc<Model> {
        Arc::new(self.clone())
    }

    /// Type minted for a user registered without a cluster assignment.
    pub(crate) fn fresh_type(&self, user_index: usize) -> PheromoneType {
        let offset = match self.params.seeding {
            Seeding::Unique => 0,
            Seeding::Clustered { clusters } => clusters,
        };
        PheromoneType((offset + user_index) as u32)
    }

    pub(crate) fn add_user(&mut self, id: EntityId, seed: Option<PheromoneType>) -> Result<usize> {
        let idx = self.users.len();
        let ty = seed.unwrap_or_else(|| self.fresh_type(idx));
        let idx = self
            .users
            .insert("user", id, EntityState::with_pheromones(PheromoneVector::unit(ty)))?;
        self.ratings.push(HashMap::new());
        Ok(idx)
    }

    pub(crate) fn add_item(&mut self, id: EntityId) -> Result<usize> {
        self.items.insert("item", id, EntityState::default())
    }

    pub(crate) fn user_or_register(&mut self, id: &EntityId) -> usize {
        match self.users.index_of(id) {
            Some(i) => i,
            None => self
                .add_user(id.clone(), None)
                .expect("id checked absent"),
        }
    }

    pub(crate) fn item_or_register(&mut self, id: &EntityId) -> usize {
        match self.items.index_of(id) {
            Some(i) => i,
            None => self.add_item(id.clone()).expect("id checked absent"),
        }
    }
}
