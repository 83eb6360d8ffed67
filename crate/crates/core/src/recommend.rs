//! Read-only recommendation over a frozen model.
//!
//! Similarities are cosines of pheromone vectors. Rating prediction fuses the
//! deviations of the user's and the item's nearest neighbors around the global
//! mean; ranking orders items by user-item similarity. Every ordering is by
//! similarity descending with ties broken by id ascending.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{EntityId, EntityTable, Feedback, Model};
use crate::pheromone::{cosine_with_norms, PheromoneType};

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub anchor: EntityId,
    pub neighbors: Vec<(EntityId, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub user: EntityId,
    /// Rank of `entries[p]` is `p + 1`.
    pub entries: Vec<(EntityId, f64)>,
}

impl RankedList {
    pub fn items(&self) -> impl Iterator<Item = &EntityId> {
        self.entries.iter().map(|(id, _)| id)
    }
}

/// Per-kind lookup structures: norms, id order and an inverted index from
/// pheromone type to the entities carrying it.
struct Side {
    norms: Vec<f64>,
    id_rank: Vec<u32>,
    postings: HashMap<PheromoneType, Vec<(u32, f64)>>,
}

impl Side {
    fn new(table: &EntityTable, with_postings: bool) -> Self {
        let norms = table.states().iter().map(|s| s.pheromones.norm()).collect();
        let mut order: Vec<usize> = (0..table.len()).collect();
        order.sort_by(|&a, &b| table.id(a).cmp(table.id(b)));
        let mut id_rank = vec![0u32; table.len()];
        for (rank, &idx) in order.iter().enumerate() {
            id_rank[idx] = rank as u32;
        }
        let mut postings: HashMap<PheromoneType, Vec<(u32, f64)>> = HashMap::new();
        if with_postings {
            for (i, s) in table.states().iter().enumerate() {
                for (t, a) in s.pheromones.iter() {
                    postings.entry(t).or_default().push((i as u32, a));
                }
            }
        }
        Self {
            norms,
            id_rank,
            postings,
        }
    }
}

/// Recommendation engine over one model snapshot.
///
/// Construction precomputes norms and an inverted index, so repeated queries
/// cost one pass over the postings of the anchor's types plus one selection.
pub struct Recommender<'m> {
    model: &'m Model,
    users: Side,
    items: Side,
    indexed: bool,
}

impl<'m> Recommender<'m> {
    pub fn new(model: &'m Model) -> Self {
        Self::build(model, true)
    }

    /// Same results computed by scanning every entity with a merge dot
    /// product; no inverted index is built.
    pub fn scanning(model: &'m Model) -> Self {
        Self::build(model, false)
    }

    fn build(model: &'m Model, indexed: bool) -> Self {
        Self {
            model,
            users: Side::new(&model.users, indexed),
            items: Side::new(&model.items, indexed),
            indexed,
        }
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// Dot products of `anchor` (an entry of `from`) against every entity of
    /// `to`. Both routes sum the products in ascending type order, so their
    /// results are bit-identical.
    fn dots(&self, anchor: &crate::pheromone::PheromoneVector, to: &EntityTable, side: &Side) -> Vec<f64> {
        if self.indexed {
            let mut acc = vec![0.0; to.len()];
            for (t, a) in anchor.iter() {
                if let Some(list) = side.postings.get(&t) {
                    for &(e, b) in list {
                        acc[e as usize] += a * b;
                    }
                }
            }
            acc
        } else {
            to.states().iter().map(|s| anchor.dot(&s.pheromones)).collect()
        }
    }

    /// Top `n` same-kind neighbors of user `anchor` (index), anchor excluded.
    pub fn user_neighbors_idx(&self, anchor: usize, n: usize) -> Vec<(usize, f64)> {
        let ph = &self.model.users.state(anchor).pheromones;
        let dots = self.dots(ph, &self.model.users, &self.users);
        let na = self.users.norms[anchor];
        let scored = (0..dots.len())
            .filter(|&i| i != anchor)
            .map(|i| (i, cosine_with_norms(dots[i], na, self.users.norms[i])));
        top_n(scored, n, &self.users.id_rank)
    }

    pub fn item_neighbors_idx(&self, anchor: usize, n: usize) -> Vec<(usize, f64)> {
        let ph = &self.model.items.state(anchor).pheromones;
        let dots = self.dots(ph, &self.model.items, &self.items);
        let na = self.items.norms[anchor];
        let scored = (0..dots.len())
            .filter(|&i| i != anchor)
            .map(|i| (i, cosine_with_norms(dots[i], na, self.items.norms[i])));
        top_n(scored, n, &self.items.id_rank)
    }

    pub fn user_neighbors(&self, user: &EntityId, n: usize) -> Result<NeighborList> {
        let idx = self.model.users.index_of(user).ok_or_else(|| Error::UnknownId {
            kind: "user",
            id: user.to_string(),
        })?;
        Ok(NeighborList {
            anchor: user.clone(),
            neighbors: self.resolve(&self.model.users, self.user_neighbors_idx(idx, n)),
        })
    }

    pub fn item_neighbors(&self, item: &EntityId, n: usize) -> Result<NeighborList> {
        let idx = self.model.items.index_of(item).ok_or_else(|| Error::UnknownId {
            kind: "item",
            id: item.to_string(),
        })?;
        Ok(NeighborList {
            anchor: item.clone(),
            neighbors: self.resolve(&self.model.items, self.item_neighbors_idx(idx, n)),
        })
    }

    fn resolve(&self, table: &EntityTable, list: Vec<(usize, f64)>) -> Vec<(EntityId, f64)> {
        list.into_iter().map(|(i, s)| (table.id(i).clone(), s)).collect()
    }

    /// Rating prediction for known indices given their neighbor lists.
    pub fn fuse(
        &self,
        user: usize,
        item: usize,
        user_neighbors: &[(usize, f64)],
        item_neighbors: &[(usize, f64)],
    ) -> f64 {
        let m = self.model;
        let p = &m.params;
        let global = m.global_mean();
        let weight = |s: f64| if p.signed_weighting { s } else { s.abs() };

        let (mut num, mut den) = (0.0, 0.0);
        for &(n, s) in user_neighbors {
            if let Some(r) = m.rating(n, item) {
                let mean = m.users.state(n).mean().unwrap_or(global);
                num += weight(s) * (r - mean);
                den += s.abs();
            }
        }
        let user_term = if den > 0.0 { num / den } else { 0.0 };

        let (mut num, mut den) = (0.0, 0.0);
        for &(j, s) in item_neighbors {
            if let Some(r) = m.rating(user, j) {
                let mean = m.items.state(j).mean().unwrap_or(global);
                num += weight(s) * (r - mean);
                den += s.abs();
            }
        }
        let item_term = if den > 0.0 { num / den } else { 0.0 };

        (global + user_term + item_term).clamp(p.rating_min, p.rating_max)
    }

    pub fn predict_idx(&self, user: usize, item: usize) -> f64 {
        let n = self.model.params.neighborhood_size;
        let un = self.user_neighbors_idx(user, n);
        let vn = self.item_neighbors_idx(item, n);
        self.fuse(user, item, &un, &vn)
    }

    /// Predicted rating, falling back to the global mean for unknown ids.
    pub fn predict_rating(&self, user: &EntityId, item: &EntityId) -> Result<f64> {
        if self.model.feedback != Feedback::Explicit {
            return Err(Error::ModeMismatch {
                expected: self.model.feedback.as_str(),
                got: "explicit",
            });
        }
        let m = self.model;
        match (m.users.index_of(user), m.items.index_of(item)) {
            (Some(u), Some(v)) => Ok(self.predict_idx(u, v)),
            _ => Ok(m.global_mean().clamp(m.params.rating_min, m.params.rating_max)),
        }
    }

    pub fn rank_items_idx(&self, user: usize, n: usize, exclude_rated: bool) -> Vec<(usize, f64)> {
        let ph = &self.model.users.state(user).pheromones;
        let dots = self.dots(ph, &self.model.items, &self.items);
        let nu = self.users.norms[user];
        let rated = self.model.rated_items(user);
        let scored = (0..dots.len())
            .filter(|&i| !(exclude_rated && rated.contains_key(&(i as u32))))
            .map(|i| (i, cosine_with_norms(dots[i], nu, self.items.norms[i])));
        top_n(scored, n, &self.items.id_rank)
    }

    /// Top `n` items by similarity to the user; empty for an unknown user.
    pub fn rank_items(&self, user: &EntityId, n: usize, exclude_rated: bool) -> RankedList {
        let entries = match self.model.users.index_of(user) {
            Some(u) => self.resolve(&self.model.items, self.rank_items_idx(u, n, exclude_rated)),
            None => Vec::new(),
        };
        RankedList {
            user: user.clone(),
            entries,
        }
    }
}

fn top_n(scored: impl Iterator<Item = (usize, f64)>, n: usize, id_rank: &[u32]) -> Vec<(usize, f64)> {
    let cmp = |a: &(usize, f64), b: &(usize, f64)| -> Ordering {
        b.1.total_cmp(&a.1).then(id_rank[a.0].cmp(&id_rank[b.0]))
    };
    let mut all: Vec<(usize, f64)> = scored.collect();
    if n == 0 {
        return Vec::new();
    }
    if all.len() > n {
        all.select_nth_unstable_by(n - 1, cmp);
        all.truncate(n);
    }
    all.sort_unstable_by(cmp);
    all
}

pub fn user_neighbors(model: &Model, user: &EntityId, n: usize) -> Result<NeighborList> {
    Recommender::scanning(model).user_neighbors(user, n)
}

pub fn item_neighbors(model: &Model, item: &EntityId, n: usize) -> Result<NeighborList> {
    Recommender::scanning(model).item_neighbors(item, n)
}

pub fn predict_rating(model: &Model, user: &EntityId, item: &EntityId) -> Result<f64> {
    Recommender::scanning(model).predict_rating(user, item)
}

pub fn rank_items(model: &Model, user: &EntityId, n: usize, exclude_rated: bool) -> RankedList {
    Recommender::scanning(model).rank_items(user, n, exclude_rated)
}
