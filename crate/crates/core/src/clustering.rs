//! User clustering for clustered pheromone seeding (IACF).
//!
//! Users are clustered by their rating pattern with k-means (k-means++
//! seeding, Lloyd iterations, Euclidean distance with missing ratings as 0).
//! Each user is then seeded with its cluster's pheromone type instead of a
//! type of its own; training proceeds unchanged.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EntityId, Feedback, Model, ModelParams, RatingEvent, Seeding};
use crate::pheromone::PheromoneType;
use crate::training::init_seeded;

/// A user's ratings keyed by item; implicit events contribute 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingPattern {
    pub user: EntityId,
    pub pattern: BTreeMap<EntityId, f64>,
}

/// One pattern per distinct user, ordered by user id. When a user touched an
/// item more than once the latest event wins (ties: the later one in input).
pub fn build_pattern_vectors(events: &[RatingEvent]) -> Vec<RatingPattern> {
    let mut latest: BTreeMap<&EntityId, BTreeMap<EntityId, (i64, f64)>> = BTreeMap::new();
    for e in events {
        let value = e.value.unwrap_or(1.0);
        let slot = latest
            .entry(&e.user)
            .or_default()
            .entry(e.item.clone())
            .or_insert((e.timestamp, value));
        if e.timestamp >= slot.0 {
            *slot = (e.timestamp, value);
        }
    }
    latest
        .into_iter()
        .map(|(user, items)| RatingPattern {
            user: user.clone(),
            pattern: items.into_iter().map(|(i, (_, v))| (i, v)).collect(),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the relative inertia improvement falls below this.
    pub tolerance: f64,
    /// Subtract each user's mean rating before clustering.
    pub mean_center: bool,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iters: 100,
            seed,
            tolerance: 1e-6,
            mean_center: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Clustering {
    assignments: HashMap<EntityId, usize>,
    order: Vec<EntityId>,
    dims: Vec<EntityId>,
    dim_index: HashMap<EntityId, u32>,
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    inertia_history: Vec<f64>,
    mean_center: bool,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn assignment(&self, user: &EntityId) -> Option<usize> {
        self.assignments.get(user).copied()
    }

    /// `(user, cluster)` pairs in the order the patterns were given.
    pub fn assignments(&self) -> impl Iterator<Item = (&EntityId, usize)> {
        self.order.iter().map(|u| (u, self.assignments[u]))
    }

    /// Non-zero coordinates of one centroid, keyed by item.
    pub fn centroid(&self, index: usize) -> Vec<(&EntityId, f64)> {
        self.centroids[index]
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(d, &x)| (&self.dims[d], x))
            .collect()
    }

    /// Sum of squared distances of every user to its centroid.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    /// Inertia after each assignment step.
    pub fn inertia_history(&self) -> &[f64] {
        &self.inertia_history
    }

    /// Writes `user<TAB>cluster` lines in input order.
    pub fn write_assignments<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (user, c) in self.assignments() {
            writeln!(out, "{user}\t{c}")?;
        }
        Ok(())
    }

    /// Builds a clustering from explicit assignments (centroids are the
    /// member means). Mostly useful for tests and for degenerate seedings.
    pub fn from_assignments(patterns: &[RatingPattern], labels: &[usize], k: usize) -> Result<Self> {
        if labels.len() != patterns.len() || labels.iter().any(|&l| l >= k) {
            return Err(Error::Clustering("labels do not match patterns or k".into()));
        }
        let data = SparseData::new(patterns, false);
        let mut centroids = vec![vec![0.0; data.dims.len()]; k];
        update_centroids(&data, labels, &mut centroids);
        let (_, inertia) = assign(&data, &centroids);
        Ok(data.into_clustering(patterns, labels, centroids, inertia, vec![inertia], false))
    }
}

/// Result of routing a newly arriving user.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterAssignment {
    Cluster(usize),
    /// No pattern to go on: the trainer mints a unique type for this user.
    FreshType,
}

/// Nearest centroid by Euclidean distance (ties to the lowest index), or
/// [`ClusterAssignment::FreshType`] without a pattern.
pub fn assign_new_user(pattern: Option<&RatingPattern>, clustering: &Clustering) -> ClusterAssignment {
    let Some(p) = pattern else {
        return ClusterAssignment::FreshType;
    };
    let values = centered(p.pattern.values().copied().collect(), clustering.mean_center);
    let mut x = vec![0.0; clustering.dims.len()];
    let mut outside = 0.0;
    for (item, v) in p.pattern.keys().zip(values) {
        match clustering.dim_index.get(item) {
            Some(&d) => x[d as usize] = v,
            None => outside += v * v,
        }
    }
    let mut best = (f64::INFINITY, 0);
    for (c, centroid) in clustering.centroids.iter().enumerate() {
        let d: f64 = outside
            + x.iter()
                .zip(centroid)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        if d < best.0 {
            best = (d, c);
        }
    }
    ClusterAssignment::Cluster(best.1)
}

pub fn kmeans(vectors: &[RatingPattern], k: usize, max_iters: usize, seed: u64) -> Result<Clustering> {
    kmeans_with(
        vectors,
        &KMeansConfig {
            max_iters,
            ..KMeansConfig::new(k, seed)
        },
    )
}

pub fn kmeans_with(vectors: &[RatingPattern], config: &KMeansConfig) -> Result<Clustering> {
    let k = config.k;
    if k == 0 {
        return Err(Error::Clustering("k must be >= 1".into()));
    }
    if vectors.is_empty() {
        return Err(Error::Empty("k-means needs at least one vector"));
    }
    let data = SparseData::new(vectors, config.mean_center);
    let distinct = data.distinct_rows();
    if k > distinct {
        return Err(Error::Clustering(format!(
            "k = {k} exceeds the {distinct} distinct vectors"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = plus_plus_seeds(&data, k, &mut rng);
    let mut history = Vec::new();
    let mut prev: Option<Vec<usize>> = None;
    let (labels, inertia) = loop {
        let (mut labels, mut inertia) = assign(&data, &centroids);
        if reseed_empty(&data, &mut labels, &mut centroids, k) {
            let (l, i) = assign(&data, &centroids);
            labels = l;
            inertia = i;
        }
        let stable = prev.as_ref() == Some(&labels);
        let small_gain = history.last().is_some_and(|&last: &f64| {
            last > 0.0 && (last - inertia) / last < config.tolerance
        });
        history.push(inertia);
        if stable || small_gain || history.len() > config.max_iters {
            break (labels, inertia);
        }
        update_centroids(&data, &labels, &mut centroids);
        prev = Some(labels);
    };
    Ok(data.into_clustering(vectors, &labels, centroids, inertia, history, config.mean_center))
}

/// Clustered seeding: user `u` starts as `{type(cluster(u)): 1.0}`.
pub fn init_iacf(
    user_ids: &[EntityId],
    item_ids: &[EntityId],
    clustering: &Clustering,
    params: ModelParams,
    feedback: Feedback,
) -> Result<Model> {
    let seeded = user_ids
        .iter()
        .map(|u| {
            clustering
                .assignment(u)
                .map(|c| (u.clone(), PheromoneType(c as u32)))
                .ok_or_else(|| Error::Unassigned(u.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ModelParams {
        seeding: Seeding::Clustered {
            clusters: clustering.k(),
        },
        ..params
    };
    init_seeded(seeded, item_ids, params, feedback)
}

fn centered(mut values: Vec<f64>, mean_center: bool) -> Vec<f64> {
    if mean_center && !values.is_empty() {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter_mut().for_each(|v| *v -= mean);
    }
    values
}

/// Patterns re-indexed onto dense item dimensions.
struct SparseData {
    dims: Vec<EntityId>,
    dim_index: HashMap<EntityId, u32>,
    rows: Vec<Vec<(u32, f64)>>,
    sq_norms: Vec<f64>,
}

impl SparseData {
    fn new(patterns: &[RatingPattern], mean_center: bool) -> Self {
        let mut dims: Vec<EntityId> = patterns
            .iter()
            .flat_map(|p| p.pattern.keys())
            .collect::<HashSet<_>>()
            .into_iter()
            .cloned()
            .collect();
        dims.sort();
        let dim_index: HashMap<EntityId, u32> =
            dims.iter().enumerate().map(|(i, d)| (d.clone(), i as u32)).collect();
        let rows: Vec<Vec<(u32, f64)>> = patterns
            .iter()
            .map(|p| {
                let values = centered(p.pattern.values().copied().collect(), mean_center);
                let mut row: Vec<(u32, f64)> = p
                    .pattern
                    .keys()
                    .zip(values)
                    .map(|(item, v)| (dim_index[item], v))
                    .collect();
                row.sort_by_key(|&(d, _)| d);
                row
            })
            .collect();
        let sq_norms = rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v * v).sum())
            .collect();
        Self {
            dims,
            dim_index,
            rows,
            sq_norms,
        }
    }

    fn distinct_rows(&self) -> usize {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .filter(|&&(_, v)| v != 0.0)
                    .map(|&(d, v)| (d, v.to_bits()))
                    .collect::<Vec<_>>()
            })
            .collect::<HashSet<_>>()
            .len()
    }

    fn dense(&self, row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        for &(d, v) in &self.rows[row] {
            out[d as usize] = v;
        }
        out
    }

    /// Exact squared distance between two rows.
    fn row_distance(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.rows[a], &self.rows[b]);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < x.len() || j < y.len() {
            let (dx, dy) = (x.get(i).map(|e| e.0), y.get(j).map(|e| e.0));
            let diff = match (dx, dy) {
                (Some(a), Some(b)) if a == b => {
                    i += 1;
                    j += 1;
                    x[i - 1].1 - y[j - 1].1
                }
                (Some(a), Some(b)) if a < b => {
                    i += 1;
                    x[i - 1].1
                }
                (Some(_), None) => {
                    i += 1;
                    x[i - 1].1
                }
                _ => {
                    j += 1;
                    y[j - 1].1
                }
            };
            acc += diff * diff;
        }
        acc
    }

    fn into_clustering(
        self,
        patterns: &[RatingPattern],
        labels: &[usize],
        centroids: Vec<Vec<f64>>,
        inertia: f64,
        inertia_history: Vec<f64>,
        mean_center: bool,
    ) -> Clustering {
        let order: Vec<EntityId> = patterns.iter().map(|p| p.user.clone()).collect();
        let assignments = order.iter().cloned().zip(labels.iter().copied()).collect();
        Clustering {
            assignments,
            order,
            dims: self.dims,
            dim_index: self.dim_index,
            centroids,
            inertia,
            inertia_history,
            mean_center,
        }
    }
}

/// k-means++: first center uniform, then each next center drawn with
/// probability proportional to its squared distance from the chosen set.
fn plus_plus_seeds(data: &SparseData, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.rows.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| data.row_distance(i, first))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            unreachable!("fewer distinct vectors than k is rejected up front")
        };
        chosen.push(next);
        let updated: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| nearest[i].min(data.row_distance(i, next)))
            .collect();
        nearest = updated;
    }
    chosen.into_iter().map(|i| data.dense(i)).collect()
}

fn assign(data: &SparseData, centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let c_norms: Vec<f64> = centroids.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let scored: Vec<(usize, f64)> = data
        .rows
        .par_iter()
        .zip(&data.sq_norms)
        .map(|(row, &x_norm)| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let dot: f64 = row.iter().map(|&(d, v)| v * centroid[d as usize]).sum();
                let dist = (x_norm - 2.0 * dot + c_norms[c]).max(0.0);
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            best
        })
        .collect();
    let inertia = scored.iter().map(|&(_, d)| d).sum();
    (scored.into_iter().map(|(c, _)| c).collect(), inertia)
}

/// Moves the farthest point of a multi-member cluster into each empty
/// cluster. Returns whether anything changed.
fn reseed_empty(data: &SparseData, labels: &mut [usize], centroids: &mut [Vec<f64>], k: usize) -> bool {
    let mut changed = false;
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return changed;
        };
        let c_norms: Vec<f64> = centroids.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        let far = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .map(|i| {
                let c = &centroids[labels[i]];
                let dot: f64 = data.rows[i].iter().map(|&(d, v)| v * c[d as usize]).sum();
                (i, (data.sq_norms[i] - 2.0 * dot + c_norms[labels[i]]).max(0.0))
            })
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((point, _)) = far else {
            return changed;
        };
        labels[point] = empty;
        centroids[empty] = data.dense(point);
        changed = true;
    }
}

fn update_centroids(data: &SparseData, labels: &[usize], centroids: &mut [Vec<f64>]) {
    let mut counts = vec![0usize; centroids.len()];
    let mut sums = vec![vec![0.0; data.dims.len()]; centroids.len()];
    for (row, &l) in data.rows.iter().zip(labels) {
        counts[l] += 1;
        for &(d, v) in row {
            sums[l][d as usize] += v;
        }
    }
    for ((centroid, sum), count) in centroids.iter_mut().zip(sums).zip(counts) {
        if count > 0 {
            *centroid = sum.into_iter().map(|s| s / count as f64).collect();
        }
    }
}
