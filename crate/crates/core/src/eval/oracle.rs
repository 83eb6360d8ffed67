//! Brute-force reference for tiny instances.
//!
//! Everything here is dense: one row per entity, one column per pheromone
//! type, all updates written out element by element. Only the engine's public
//! state is read back for comparison.

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{EntityId, Feedback, Model, ModelParams, RatingEvent, Seeding};
use crate::pheromone::PheromoneType;
use crate::recommend::Recommender;
use crate::training::{init_seeded, train_stream};

pub const ORACLE_MAX_USERS: usize = 5;
pub const ORACLE_MAX_ITEMS: usize = 5;
pub const ORACLE_MAX_EVENTS: usize = 20;
pub const AMOUNT_TOLERANCE: f64 = 1e-9;

/// A small, fully specified training scenario.
#[derive(Clone, Debug)]
pub struct TinyInstance {
    pub params: ModelParams,
    pub feedback: Feedback,
    /// Users registered before training, in registration order.
    pub users: Vec<EntityId>,
    /// Cluster of each pre-registered user (clustered seeding only).
    pub clusters: Vec<usize>,
    pub items: Vec<EntityId>,
    pub events: Vec<RatingEvent>,
}

impl TinyInstance {
    /// Random instance within the oracle bounds.
    pub fn random<R: Rng>(rng: &mut R, feedback: Feedback) -> Self {
        let n_users = rng.random_range(1..=ORACLE_MAX_USERS);
        let n_items = rng.random_range(1..=ORACLE_MAX_ITEMS);
        let seeding = if rng.random_bool(0.5) {
            Seeding::Unique
        } else {
            Seeding::Clustered {
                clusters: rng.random_range(1..=3),
            }
        };
        let params = ModelParams {
            gamma: rng.random_range(0.0..0.6),
            lambda: rng.random_range(0.1..3.0),
            sigma: [0.0, 0.001, 0.01, 0.05][rng.random_range(0..4)],
            seeding,
            neighborhood_size: rng.random_range(1..=4),
            top_n: rng.random_range(1..=5),
            type_cap: rng.random_bool(0.3).then(|| rng.random_range(1..=3)),
            signed_weighting: rng.random_bool(0.3),
            ..ModelParams::default()
        };
        let all_users: Vec<EntityId> = (1..=n_users).map(|i| format!("u{i}").into()).collect();
        let all_items: Vec<EntityId> = (1..=n_items).map(|i| format!("i{i}").into()).collect();
        let registered = rng.random_range(0..=n_users);
        let users = all_users[..registered].to_vec();
        let clusters = match seeding {
            Seeding::Clustered { clusters } => {
                (0..registered).map(|_| rng.random_range(0..clusters)).collect()
            }
            Seeding::Unique => Vec::new(),
        };
        let items = all_items[..rng.random_range(0..=n_items)].to_vec();
        let mut ts = 0i64;
        let events = (0..rng.random_range(1..=ORACLE_MAX_EVENTS))
            .map(|_| {
                ts += rng.random_range(0..3);
                let u = all_users[rng.random_range(0..n_users)].clone();
                let v = all_items[rng.random_range(0..n_items)].clone();
                match feedback {
                    Feedback::Explicit => {
                        let value = f64::from(rng.random_range(2..=10u8)) / 2.0;
                        RatingEvent::explicit(u, v, value, ts)
                    }
                    Feedback::Implicit => RatingEvent::implicit(u, v, ts),
                }
            })
            .collect();
        Self {
            params,
            feedback,
            users,
            clusters,
            items,
            events,
        }
    }

    /// Runs the instance through the engine.
    pub fn train_engine(&self) -> Result<Model> {
        let seeds: Vec<(EntityId, PheromoneType)> = match self.params.seeding {
            Seeding::Unique => self
                .users
                .iter()
                .enumerate()
                .map(|(i, u)| (u.clone(), PheromoneType(i as u32)))
                .collect(),
            Seeding::Clustered { .. } => self
                .users
                .iter()
                .zip(&self.clusters)
                .map(|(u, &c)| (u.clone(), PheromoneType(c as u32)))
                .collect(),
        };
        let mut model = init_seeded(seeds, &self.items, self.params.clone(), self.feedback)?;
        train_stream(&mut model, &self.events)?;
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    /// Number of scalar quantities compared.
    pub checked: usize,
    pub first_divergence: Option<String>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.first_divergence.is_none()
    }
}

struct Dense {
    params: ModelParams,
    users: Vec<EntityId>,
    items: Vec<EntityId>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    u_count: Vec<u64>,
    u_sum: Vec<f64>,
    v_count: Vec<u64>,
    v_sum: Vec<f64>,
    count: u64,
    sum: f64,
    rated: Vec<Vec<Option<f64>>>,
}

fn position(ids: &[EntityId], id: &EntityId) -> Option<usize> {
    ids.iter().position(|x| x == id)
}

impl Dense {
    fn replay(inst: &TinyInstance) -> Result<Self> {
        let mut users = inst.users.clone();
        let mut items = inst.items.clone();
        for e in &inst.events {
            if position(&users, &e.user).is_none() {
                users.push(e.user.clone());
            }
            if position(&items, &e.item).is_none() {
                items.push(e.item.clone());
            }
        }
        if users.len() > ORACLE_MAX_USERS
            || items.len() > ORACLE_MAX_ITEMS
            || inst.events.len() > ORACLE_MAX_EVENTS
        {
            return Err(Error::InvalidParam {
                name: "instance",
                reason: format!(
                    "oracle handles at most {ORACLE_MAX_USERS} users, {ORACLE_MAX_ITEMS} items and {ORACLE_MAX_EVENTS} events"
                ),
            });
        }
        let offset = match inst.params.seeding {
            Seeding::Unique => 0,
            Seeding::Clustered { clusters } => clusters,
        };
        let types = offset + users.len();
        let mut u = vec![vec![0.0; types]; users.len()];
        for (i, row) in u.iter_mut().enumerate() {
            let t = match inst.params.seeding {
                Seeding::Clustered { .. } if i < inst.users.len() => inst.clusters[i],
                _ => offset + i,
            };
            row[t] = 1.0;
        }
        let mut d = Dense {
            params: inst.params.clone(),
            u,
            v: vec![vec![0.0; types]; items.len()],
            u_count: vec![0; users.len()],
            u_sum: vec![0.0; users.len()],
            v_count: vec![0; items.len()],
            v_sum: vec![0.0; items.len()],
            count: 0,
            sum: 0.0,
            rated: vec![vec![None; items.len()]; users.len()],
            users,
            items,
        };
        for e in &inst.events {
            d.step(e);
        }
        Ok(d)
    }

    fn global_mean(&self) -> f64 {
        if self.count > 0 {
            self.sum / self.count as f64
        } else {
            (self.params.rating_min + self.params.rating_max) / 2.0
        }
    }

    fn step(&mut self, e: &RatingEvent) {
        let a = position(&self.users, &e.user).unwrap();
        let b = position(&self.items, &e.item).unwrap();
        let p = self.params.clone();
        let (ci, cu) = match e.value {
            Some(r) => {
                let g = self.global_mean();
                let mu = if self.u_count[a] > 0 {
                    self.u_sum[a] / self.u_count[a] as f64
                } else {
                    g
                };
                let mv = if self.v_count[b] > 0 {
                    self.v_sum[b] / self.v_count[b] as f64
                } else {
                    g
                };
                ((r - mu) * p.gamma, (r - mv) * p.gamma)
            }
            None => (p.gamma, p.gamma),
        };
        let old_u = self.u[a].clone();
        let old_v = self.v[b].clone();
        self.v[b] = exchange(&old_v, &old_u, ci, &p);
        self.u[a] = exchange(&old_u, &old_v, cu, &p);
        let s = e.value.unwrap_or(0.0);
        self.u_count[a] += 1;
        self.u_sum[a] += s;
        self.v_count[b] += 1;
        self.v_sum[b] += s;
        self.count += 1;
        self.sum += s;
        self.rated[a][b] = Some(e.value.unwrap_or(1.0));
    }

    fn user_mean(&self, a: usize) -> f64 {
        if self.u_count[a] > 0 {
            self.u_sum[a] / self.u_count[a] as f64
        } else {
            self.global_mean()
        }
    }

    fn item_mean(&self, b: usize) -> f64 {
        if self.v_count[b] > 0 {
            self.v_sum[b] / self.v_count[b] as f64
        } else {
            self.global_mean()
        }
    }

    fn predict(&self, a: usize, b: usize) -> f64 {
        let p = &self.params;
        let g = self.global_mean();
        let w = |s: f64| if p.signed_weighting { s } else { s.abs() };
        let un = neighbors(&self.u, &self.users, a, p.neighborhood_size);
        let (mut num, mut den) = (0.0, 0.0);
        for (n, s) in un {
            if let Some(r) = self.rated[n][b] {
                num += w(s) * (r - self.user_mean(n));
                den += s.abs();
            }
        }
        let tu = if den > 0.0 { num / den } else { 0.0 };
        let vn = neighbors(&self.v, &self.items, b, p.neighborhood_size);
        let (mut num, mut den) = (0.0, 0.0);
        for (j, s) in vn {
            if let Some(r) = self.rated[a][j] {
                num += w(s) * (r - self.item_mean(j));
                den += s.abs();
            }
        }
        let tv = if den > 0.0 { num / den } else { 0.0 };
        let x = g + tu + tv;
        if x < p.rating_min {
            p.rating_min
        } else if x > p.rating_max {
            p.rating_max
        } else {
            x
        }
    }

    fn rank(&self, a: usize, exclude_rated: bool) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.items.len())
            .filter(|&b| !(exclude_rated && self.rated[a][b].is_some()))
            .map(|b| (b, cosine(&self.u[a], &self.v[b])))
            .collect();
        all.sort_by(|x, y| by_similarity(x, y, &self.items));
        all.truncate(self.params.top_n);
        all
    }
}

/// `cutoff(evaporate(own) + coeff * donor)`, column by column.
fn exchange(own: &[f64], donor: &[f64], coeff: f64, p: &ModelParams) -> Vec<f64> {
    let m = own.iter().fold(0.0f64, |m, x| if x.abs() > m { x.abs() } else { m });
    let mut out: Vec<f64> = own
        .iter()
        .zip(donor)
        .map(|(&x, &y)| {
            let f = ((x.abs() + p.lambda) / (m + p.lambda) - 1.0).exp();
            x * f + coeff * y
        })
        .collect();
    for x in out.iter_mut() {
        if x.abs() < p.sigma {
            *x = 0.0;
        }
    }
    if let Some(k) = p.type_cap {
        let mut order: Vec<usize> = (0..out.len()).filter(|&t| out[t] != 0.0).collect();
        order.sort_by(|&s, &t| out[t].abs().partial_cmp(&out[s].abs()).unwrap().then(s.cmp(&t)));
        for &t in order.iter().skip(k) {
            out[t] = 0.0;
        }
    }
    out
}

fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let mut dot = 0.0;
    let (mut nx, mut ny) = (0.0, 0.0);
    for t in 0..x.len() {
        if x[t] != 0.0 && y[t] != 0.0 {
            dot += x[t] * y[t];
        }
        if x[t] != 0.0 {
            nx += x[t] * x[t];
        }
        if y[t] != 0.0 {
            ny += y[t] * y[t];
        }
    }
    let (nx, ny) = (f64::sqrt(nx), f64::sqrt(ny));
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    let c = dot / (nx * ny);
    if c > 1.0 {
        1.0
    } else if c < -1.0 {
        -1.0
    } else if c == 0.0 {
        0.0
    } else {
        c
    }
}

fn by_similarity(x: &(usize, f64), y: &(usize, f64), ids: &[EntityId]) -> Ordering {
    y.1.partial_cmp(&x.1).unwrap().then_with(|| ids[x.0].cmp(&ids[y.0]))
}

fn neighbors(rows: &[Vec<f64>], ids: &[EntityId], anchor: usize, n: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..rows.len())
        .filter(|&i| i != anchor)
        .map(|i| (i, cosine(&rows[anchor], &rows[i])))
        .collect();
    all.sort_by(|x, y| by_similarity(x, y, ids));
    all.truncate(n);
    all
}

/// Replays `instance` densely and compares every pheromone amount, every
/// running statistic, every prediction (explicit mode) and every ranking
/// against `model`, reporting the first disagreement.
pub fn oracle_check(model: &Model, instance: &TinyInstance) -> Result<OracleReport> {
    let dense = Dense::replay(instance)?;
    let mut checked = 0usize;
    let fail = |checked: usize, msg: String| -> Result<OracleReport> {
        Ok(OracleReport {
            checked,
            first_divergence: Some(msg),
        })
    };

    if model.users().ids() != dense.users.as_slice() {
        return fail(checked, format!("user registration order {:?} vs {:?}", model.users().ids(), dense.users));
    }
    if model.items().ids() != dense.items.as_slice() {
        return fail(checked, format!("item registration order {:?} vs {:?}", model.items().ids(), dense.items));
    }

    let sides = [
        ("user", model.users(), &dense.u, &dense.u_count, &dense.u_sum),
        ("item", model.items(), &dense.v, &dense.v_count, &dense.v_sum),
    ];
    for (kind, table, rows, counts, sums) in sides {
        for (i, row) in rows.iter().enumerate() {
            let st = table.state(i);
            let id = table.id(i);
            if let Some((t, _)) = st.pheromones.iter().find(|(t, _)| t.0 as usize >= row.len()) {
                return fail(checked, format!("{kind} {id}: engine carries unknown type {t}"));
            }
            for (t, &want) in row.iter().enumerate() {
                checked += 1;
                let got = st.pheromones.get(PheromoneType(t as u32));
                if (got - want).abs() > AMOUNT_TOLERANCE || (got == 0.0) != (want == 0.0) {
                    return fail(checked, format!("{kind} {id} type {t}: engine {got} vs oracle {want}"));
                }
            }
            checked += 2;
            if st.rating_count != counts[i] || st.rating_sum != sums[i] {
                return fail(checked, format!(
                    "{kind} {id} stats: engine ({}, {}) vs oracle ({}, {})",
                    st.rating_count, st.rating_sum, counts[i], sums[i]
                ));
            }
        }
    }
    checked += 1;
    if model.global_mean() != dense.global_mean() {
        return fail(checked, format!(
            "global mean: engine {} vs oracle {}",
            model.global_mean(),
            dense.global_mean()
        ));
    }

    let rec = Recommender::new(model);
    for a in 0..dense.users.len() {
        let uid = &dense.users[a];
        if model.feedback() == Feedback::Explicit {
            for b in 0..dense.items.len() {
                checked += 1;
                let got = rec.predict_rating(uid, &dense.items[b])?;
                let want = dense.predict(a, b);
                if got.to_bits() != want.to_bits() {
                    return fail(checked, format!(
                        "prediction ({uid}, {}): engine {got} vs oracle {want}",
                        dense.items[b]
                    ));
                }
            }
        }
        for exclude in [true, false] {
            checked += 1;
            let got = rec.rank_items(uid, model.params().top_n, exclude).entries;
            let want: Vec<(EntityId, f64)> = dense
                .rank(a, exclude)
                .into_iter()
                .map(|(b, s)| (dense.items[b].clone(), s))
                .collect();
            let same = got.len() == want.len()
                && got
                    .iter()
                    .zip(&want)
                    .all(|(g, w)| g.0 == w.0 && g.1.to_bits() == w.1.to_bits());
            if !same {
                return fail(checked, format!(
                    "ranking for {uid} (exclude_rated={exclude}): engine {got:?} vs oracle {want:?}"
                ));
            }
        }
    }
    Ok(OracleReport {
        checked,
        first_divergence: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..200 {
            let fb = if round % 2 == 0 {
                Feedback::Explicit
            } else {
                Feedback::Implicit
            };
            let inst = TinyInstance::random(&mut rng, fb);
            let model = inst.train_engine().unwrap();
            let report = oracle_check(&model, &inst).unwrap();
            assert!(report.passed(), "round {round}: {:?}\n{inst:?}", report.first_divergence);
            assert!(report.checked > 0);
        }
    }

    #[test]
    fn detects_a_perturbed_amount() {
        let inst = TinyInstance {
            params: ModelParams::acf(),
            feedback: Feedback::Explicit,
            users: vec!["a".into(), "b".into()],
            clusters: vec![],
            items: vec!["x".into()],
            events: vec![
                RatingEvent::explicit("a", "x", 5.0, 0),
                RatingEvent::explicit("b", "x", 1.0, 1),
            ],
        };
        let mut model = inst.train_engine().unwrap();
        assert!(oracle_check(&model, &inst).unwrap().passed());
        let st = model.users.state_mut(0);
        st.pheromones = st.pheromones.scaled(1.0 + 1e-6);
        let report = oracle_check(&model, &inst).unwrap();
        let msg = report.first_divergence.unwrap();
        assert!(msg.starts_with("user a type 0"), "{msg}");
    }

    #[test]
    fn rejects_oversized_instances() {
        let inst = TinyInstance {
            params: ModelParams::acf(),
            feedback: Feedback::Implicit,
            users: (0..6).map(|i| EntityId::new(format!("u{i}"))).collect(),
            clusters: vec![],
            items: vec![],
            events: vec![],
        };
        let model = Model::empty(ModelParams::acf(), Feedback::Implicit).unwrap();
        assert!(oracle_check(&model, &inst).is_err());
    }
}
