use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::baseline::BiasBaseline;
use super::metrics::{precision_at_n, ranking_accumulation, rmse};
use super::split::{split, HoldoutSplit, SplitStrategy};
use crate::clustering::{build_pattern_vectors, init_iacf, kmeans};
use crate::error::{Error, Result};
use crate::model::{EntityId, Feedback, Model, ModelParams, RatingEvent, Seeding};
use crate::recommend::Recommender;
use crate::training::{init_acf, train_stream, train_unordered};

const KMEANS_MAX_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub enum Algorithm {
    Acf,
    Iacf { clusters: usize, seed: u64 },
    /// Global mean plus user and item offsets; rating prediction only.
    Baseline,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Acf => "acf",
            Algorithm::Iacf { .. } => "iacf",
            Algorithm::Baseline => "baseline",
        }
    }

    /// Same algorithm with its clustering seed shifted by `offset`.
    pub fn reseeded(&self, offset: u64) -> Self {
        match *self {
            Algorithm::Iacf { clusters, seed } => Algorithm::Iacf {
                clusters,
                seed: seed.wrapping_add(offset),
            },
            ref other => other.clone(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// `acf`, `baseline`, or `iacf` (20 clusters, seed 1).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acf" => Ok(Algorithm::Acf),
            "iacf" => Ok(Algorithm::Iacf { clusters: 20, seed: 1 }),
            "baseline" => Ok(Algorithm::Baseline),
            _ => Err(Error::InvalidParam {
                name: "algorithm",
                reason: format!("expected acf, iacf or baseline, got `{s}`"),
            }),
        }
    }
}

/// Initial (untrained) model: unique seeding for ACF, k-means over the
/// patterns of `seed_events` for IACF.
pub fn init_model(
    algorithm: &Algorithm,
    seed_events: &[RatingEvent],
    params: &ModelParams,
    feedback: Feedback,
) -> Result<Model> {
    match *algorithm {
        Algorithm::Acf => init_acf(
            &[],
            &[],
            ModelParams {
                seeding: Seeding::Unique,
                ..params.clone()
            },
            feedback,
        ),
        Algorithm::Iacf { clusters, seed } => {
            let patterns = build_pattern_vectors(seed_events);
            let clustering = kmeans(&patterns, clusters, KMEANS_MAX_ITERS, seed)?;
            let users: Vec<EntityId> = patterns.into_iter().map(|p| p.user).collect();
            init_iacf(&users, &[], &clustering, params.clone(), feedback)
        }
        Algorithm::Baseline => Err(Error::InvalidParam {
            name: "algorithm",
            reason: "the baseline has no pheromone model".into(),
        }),
    }
}

/// Initialises from `train` and trains on it in timestamp order.
pub fn build_model(
    algorithm: &Algorithm,
    train: &[RatingEvent],
    params: &ModelParams,
    feedback: Feedback,
) -> Result<Model> {
    let mut model = init_model(algorithm, train, params, feedback)?;
    train_stream(&mut model, train)?;
    Ok(model)
}

#[derive(Clone, Debug)]
pub struct RatingReport {
    pub algorithm: String,
    pub rmse: f64,
    pub test_pairs: usize,
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

/// Predictions for every test event, in test order. Neighbor lists are
/// computed once per distinct user and item.
pub fn predict_all(model: &Model, test: &[(EntityId, EntityId)]) -> Result<Vec<f64>> {
    let rec = Recommender::new(model);
    let n = model.params().neighborhood_size;
    let users: HashSet<usize> = test
        .iter()
        .filter_map(|(u, _)| model.users().index_of(u))
        .collect();
    let items: HashSet<usize> = test
        .iter()
        .filter_map(|(_, i)| model.items().index_of(i))
        .collect();
    let un: HashMap<usize, Vec<(usize, f64)>> = users
        .into_par_iter()
        .map(|u| (u, rec.user_neighbors_idx(u, n)))
        .collect();
    let vn: HashMap<usize, Vec<(usize, f64)>> = items
        .into_par_iter()
        .map(|v| (v, rec.item_neighbors_idx(v, n)))
        .collect();
    test.par_iter()
        .map(|(u, i)| {
            match (model.users().index_of(u), model.items().index_of(i)) {
                (Some(a), Some(b)) => Ok(rec.fuse(a, b, &un[&a], &vn[&b])),
                _ => rec.predict_rating(u, i),
            }
        })
        .collect()
}

pub fn evaluate_rating(
    algorithm: &Algorithm,
    split: &HoldoutSplit,
    params: &ModelParams,
) -> Result<RatingReport> {
    let truth: Vec<f64> = split
        .test
        .iter()
        .map(|e| {
            e.value.ok_or(Error::ModeMismatch {
                expected: "explicit",
                got: "implicit",
            })
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(EntityId, EntityId)> = split
        .test
        .iter()
        .map(|e| (e.user.clone(), e.item.clone()))
        .collect();

    let start = Instant::now();
    let (predictions, train_seconds) = if *algorithm == Algorithm::Baseline {
        let b = BiasBaseline::fit(&split.train, params.rating_min, params.rating_max);
        let train_seconds = start.elapsed().as_secs_f64();
        let t = Instant::now();
        let p: Vec<f64> = pairs.iter().map(|(u, i)| b.predict(u, i)).collect();
        ((p, t), train_seconds)
    } else {
        let model = build_model(algorithm, &split.train, params, Feedback::Explicit)?;
        let train_seconds = start.elapsed().as_secs_f64();
        let t = Instant::now();
        ((predict_all(&model, &pairs)?, t), train_seconds)
    };
    let (predictions, t) = predictions;
    let predict_seconds = t.elapsed().as_secs_f64();
    let scored: Vec<(f64, f64)> = truth.into_iter().zip(predictions).collect();
    Ok(RatingReport {
        algorithm: algorithm.name().into(),
        rmse: rmse(&scored)?,
        test_pairs: scored.len(),
        train_seconds,
        predict_seconds,
    })
}

/// Mean precision@n and mean ranking accumulation over the users of
/// `relevant`, each ranked against the model with already-seen items excluded.
pub fn score_rankings(
    model: &Model,
    relevant: &BTreeMap<EntityId, HashSet<EntityId>>,
    n: usize,
) -> Result<(f64, f64)> {
    if relevant.is_empty() {
        return Err(Error::Empty("no test users to rank for"));
    }
    let rec = Recommender::new(model);
    let scores: Vec<(f64, f64)> = relevant
        .par_iter()
        .map(|(user, rel)| {
            let list: Vec<EntityId> = rec.rank_items(user, n, true).items().cloned().collect();
            (precision_at_n(&list, rel, n), ranking_accumulation(&list, rel, n))
        })
        .collect();
    let count = scores.len() as f64;
    let p = scores.iter().map(|s| s.0).sum::<f64>() / count;
    let ra = scores.iter().map(|s| s.1).sum::<f64>() / count;
    Ok((p, ra))
}

/// Each user's test items.
pub fn relevant_sets(test: &[RatingEvent]) -> BTreeMap<EntityId, HashSet<EntityId>> {
    let mut out: BTreeMap<EntityId, HashSet<EntityId>> = BTreeMap::new();
    for e in test {
        out.entry(e.user.clone()).or_default().insert(e.item.clone());
    }
    out
}

fn as_implicit(events: &[RatingEvent]) -> Vec<RatingEvent> {
    events
        .iter()
        .map(|e| RatingEvent {
            value: None,
            ..e.clone()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingRun {
    pub run: usize,
    pub precision: f64,
    pub ranking_accumulation: f64,
    pub test_users: usize,
}

#[derive(Clone, Debug)]
pub struct RankingReport {
    pub algorithm: String,
    pub n: usize,
    pub runs: Vec<RankingRun>,
}

impl RankingReport {
    pub fn mean_precision(&self) -> f64 {
        self.runs.iter().map(|r| r.precision).sum::<f64>() / self.runs.len() as f64
    }

    pub fn mean_ranking_accumulation(&self) -> f64 {
        self.runs.iter().map(|r| r.ranking_accumulation).sum::<f64>() / self.runs.len() as f64
    }
}

/// One ranking run on an existing split. Rated values, if any, are dropped:
/// ranking runs on implicit feedback.
pub fn evaluate_ranking_split(
    algorithm: &Algorithm,
    split: &HoldoutSplit,
    params: &ModelParams,
    run: usize,
) -> Result<RankingRun> {
    let train = as_implicit(&split.train);
    let model = build_model(algorithm, &train, params, Feedback::Implicit)?;
    let relevant = relevant_sets(&split.test);
    let (precision, ra) = score_rankings(&model, &relevant, params.top_n)?;
    Ok(RankingRun {
        run,
        precision,
        ranking_accumulation: ra,
        test_users: relevant.len(),
    })
}

/// `runs` independent splits (seeds `strategy seed + run`, runs counted from 0)
/// evaluated at `params.top_n`.
pub fn evaluate_ranking(
    algorithm: &Algorithm,
    events: &[RatingEvent],
    strategy: &SplitStrategy,
    params: &ModelParams,
    runs: usize,
) -> Result<RankingReport> {
    if runs == 0 {
        return Err(Error::InvalidParam {
            name: "runs",
            reason: "must be >= 1".into(),
        });
    }
    let runs = (0..runs)
        .map(|r| {
            let s = split(events, &strategy.reseeded(r as u64))?;
            evaluate_ranking_split(&algorithm.reseeded(r as u64), &s, params, r + 1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankingReport {
        algorithm: algorithm.name().into(),
        n: params.top_n,
        runs,
    })
}

#[derive(Clone, Debug)]
pub struct TemporalConfig {
    pub checkpoints: usize,
    pub algorithm: Algorithm,
    pub params: ModelParams,
    /// Seeds the shuffles of the order-agnostic variant.
    pub shuffle_seed: u64,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self {
            checkpoints: 15,
            algorithm: Algorithm::Iacf { clusters: 20, seed: 1 },
            params: ModelParams::default(),
            shuffle_seed: 1,
        }
    }
}

/// Precision@N after each checkpoint for the incremental model ("time") and
/// for a model retrained from scratch on a shuffled copy of the same prefix
/// ("timeless").
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalReport {
    pub checkpoints: Vec<i64>,
    pub time: Vec<f64>,
    pub timeless: Vec<f64>,
    pub test_users: Vec<usize>,
}

/// Ordinary least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in ys.iter().enumerate() {
        let dx = x as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Checkpoints split `[t_min, t_max]` into `checkpoints + 1` equal spans. After
/// checkpoint `c` both variants have seen every event at or before `t_c` and are
/// scored on the events in `(t_c, t_{c+1}]` (the last window ends at `t_max`).
///
/// The events up to the first checkpoint form a shared warm start: the initial
/// model is clustered on them and trained on them in order, and both variants
/// continue from it. Only the later events are shuffled for the timeless
/// variant, so the clustering prefix gives neither variant an edge. Users first
/// seen after the prefix get fresh types.
pub fn temporal_experiment(events: &[RatingEvent], config: &TemporalConfig) -> Result<TemporalReport> {
    let c = config.checkpoints;
    if c == 0 {
        return Err(Error::InvalidParam {
            name: "checkpoints",
            reason: "must be >= 1".into(),
        });
    }
    if events.len() < c {
        return Err(Error::InvalidParam {
            name: "checkpoints",
            reason: format!("{} events cannot fill {c} checkpoints", events.len()),
        });
    }
    let events = as_implicit(events);
    crate::training::check_order(&events)?;
    let t_min = events[0].timestamp;
    let t_max = events[events.len() - 1].timestamp;
    let span = (t_max - t_min) as i128;
    let checkpoints: Vec<i64> = (1..=c)
        .map(|k| (t_min as i128 + k as i128 * span / (c as i128 + 1)) as i64)
        .collect();
    let upto = |t: i64| events.partition_point(|e| e.timestamp <= t);

    let prefix = upto(checkpoints[0]);
    let mut warm = init_model(
        &config.algorithm,
        &events[..prefix],
        &config.params,
        Feedback::Implicit,
    )?;
    train_stream(&mut warm, &events[..prefix])?;
    let mut incremental = warm.clone();
    let mut trained = prefix;
    let mut report = TemporalReport {
        checkpoints: checkpoints.clone(),
        time: Vec::with_capacity(c),
        timeless: Vec::with_capacity(c),
        test_users: Vec::with_capacity(c),
    };
    for k in 0..c {
        let end = upto(checkpoints[k]);
        let window_end = if k + 1 < c { upto(checkpoints[k + 1]) } else { events.len() };
        train_stream(&mut incremental, &events[trained..end])?;
        trained = end;

        let mut shuffled = events[prefix..end].to_vec();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(
            config.shuffle_seed.wrapping_add(k as u64),
        ));
        let mut timeless = warm.clone();
        train_unordered(&mut timeless, &shuffled)?;

        let relevant = relevant_sets(&events[end..window_end]);
        let n = config.params.top_n;
        let (p_time, p_timeless) = if relevant.is_empty() {
            (0.0, 0.0)
        } else {
            (
                score_rankings(&incremental, &relevant, n)?.0,
                score_rankings(&timeless, &relevant, n)?.0,
            )
        };
        report.time.push(p_time);
        report.timeless.push(p_timeless);
        report.test_users.push(relevant.len());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::drift::{generate_drift, DriftConfig};

    fn ratings() -> Vec<RatingEvent> {
        let mut out = Vec::new();
        let mut ts = 0;
        for u in 0..30 {
            for i in 0..12 {
                if (u * 7 + i * 3) % 4 != 0 {
                    let v = 1.0 + ((u % 3 + i % 5) % 5) as f64;
                    out.push(RatingEvent::explicit(format!("u{u}"), format!("i{i}"), v, ts));
                    ts += 1;
                }
            }
        }
        out
    }

    #[test]
    fn rating_evaluation_runs_for_every_algorithm() {
        let events = ratings();
        let s = split(&events, &SplitStrategy::Random { fraction: 0.1, seed: 3 }).unwrap();
        for alg in [Algorithm::Acf, Algorithm::Iacf { clusters: 4, seed: 1 }, Algorithm::Baseline] {
            let r = evaluate_rating(&alg, &s, &ModelParams::default()).unwrap();
            assert_eq!(r.test_pairs, s.test.len());
            assert!(r.rmse.is_finite() && r.rmse >= 0.0 && r.rmse <= 4.0, "{alg}: {}", r.rmse);
        }
    }

    #[test]
    fn batched_predictions_match_single_queries() {
        let events = ratings();
        let s = split(&events, &SplitStrategy::Random { fraction: 0.2, seed: 1 }).unwrap();
        let model = build_model(&Algorithm::Acf, &s.train, &ModelParams::acf(), Feedback::Explicit).unwrap();
        let mut pairs: Vec<_> = s.test.iter().map(|e| (e.user.clone(), e.item.clone())).collect();
        pairs.push(("ghost".into(), "i1".into()));
        let batch = predict_all(&model, &pairs).unwrap();
        for ((u, i), p) in pairs.iter().zip(batch) {
            assert_eq!(p, crate::recommend::predict_rating(&model, u, i).unwrap());
        }
    }

    #[test]
    fn empty_relevant_sets_score_worst() {
        let model = build_model(&Algorithm::Acf, &as_implicit(&ratings()), &ModelParams::acf(), Feedback::Implicit).unwrap();
        let relevant: BTreeMap<EntityId, HashSet<EntityId>> =
            [("u1".into(), HashSet::new()), ("u2".into(), HashSet::new())].into_iter().collect();
        let (p, ra) = score_rankings(&model, &relevant, 20).unwrap();
        assert_eq!(p, 0.0);
        assert!((ra - 21.0).abs() < 1e-12);
        assert!(score_rankings(&model, &BTreeMap::new(), 20).is_err());
    }

    #[test]
    fn ranking_runs_are_seeded() {
        let events = ratings();
        let st = SplitStrategy::Random { fraction: 0.2, seed: 1 };
        let params = ModelParams { top_n: 5, ..ModelParams::acf() };
        let a = evaluate_ranking(&Algorithm::Acf, &events, &st, &params, 3).unwrap();
        let b = evaluate_ranking(&Algorithm::Acf, &events, &st, &params, 3).unwrap();
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.runs.len(), 3);
        for r in &a.runs {
            assert!((0.0..=1.0).contains(&r.precision));
            assert!(r.ranking_accumulation >= 3.0 && r.ranking_accumulation <= 6.0 + 1e-9);
        }
        assert!(evaluate_ranking(&Algorithm::Baseline, &events, &st, &params, 1).is_err());
    }

    #[test]
    fn slope() {
        assert_eq!(least_squares_slope(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(least_squares_slope(&[2.0, 2.0]), 0.0);
        assert!(least_squares_slope(&[3.0, 1.0, 0.0]) < 0.0);
        assert_eq!(least_squares_slope(&[5.0]), 0.0);
    }

    #[test]
    fn temporal_shapes_and_determinism() {
        let data = generate_drift(&DriftConfig::new(60, 200, 20, 2.0, 5)).unwrap();
        let config = TemporalConfig {
            checkpoints: 5,
            algorithm: Algorithm::Iacf { clusters: 4, seed: 2 },
            ..TemporalConfig::default()
        };
        let a = temporal_experiment(&data.events, &config).unwrap();
        assert_eq!(a.time.len(), 5);
        assert_eq!(a.timeless.len(), 5);
        assert!(a.checkpoints.windows(2).all(|w| w[0] < w[1]));
        assert!(a.time.iter().chain(&a.timeless).all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(a, temporal_experiment(&data.events, &config).unwrap());
    }

    #[test]
    fn temporal_rejects_too_few_events() {
        let events: Vec<_> = (0..3).map(|t| RatingEvent::implicit("u", "i", t)).collect();
        let config = TemporalConfig {
            algorithm: Algorithm::Acf,
            ..TemporalConfig::default()
        };
        assert!(temporal_experiment(&events, &config).is_err());
    }
}
