//! Incremental training: per-event evaporation, pheromone transmission and
//! cutoff, processed strictly in event order.
//!
//! For a rating event `(u, v, r)` with pre-event vectors `U` and `V`:
//!
//! ```text
//! item' = cutoff(evaporate(V) + (r - mean_u) * gamma * U)
//! user' = cutoff(evaporate(U) + (r - mean_v) * gamma * V)
//! ```
//!
//! Implicit events use `gamma` in place of `(r - mean) * gamma`. Both sides read
//! the snapshots taken before the event, so the two updates commute. Means
//! exclude the current event and fall back to the global mean, then to the
//! midpoint of the rating scale.

use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{EntityId, Feedback, Model, ModelParams, RatingEvent};
use crate::pheromone::{PheromoneType, PheromoneVector};

/// Unique seeding: every user gets `{own type: 1.0}`, items start empty.
pub fn init_acf(
    user_ids: &[EntityId],
    item_ids: &[EntityId],
    params: ModelParams,
    feedback: Feedback,
) -> Result<Model> {
    let mut model = Model::empty(params, feedback)?;
    for id in user_ids {
        model.add_user(id.clone(), None)?;
    }
    for id in item_ids {
        model.add_item(id.clone())?;
    }
    Ok(model)
}

/// Shared by both seedings once every user has a seed type.
pub(crate) fn init_seeded(
    users: impl IntoIterator<Item = (EntityId, PheromoneType)>,
    item_ids: &[EntityId],
    params: ModelParams,
    feedback: Feedback,
) -> Result<Model> {
    let mut model = Model::empty(params, feedback)?;
    for (id, ty) in users {
        model.add_user(id, Some(ty))?;
    }
    for id in item_ids {
        model.add_item(id.clone())?;
    }
    Ok(model)
}

pub fn evaporate(ph: &PheromoneVector, lambda: f64) -> PheromoneVector {
    ph.evaporated(lambda)
}

/// Applies one explicit rating. Returns the number of pheromone map slots the
/// update touched.
pub fn apply_explicit(model: &mut Model, event: &RatingEvent) -> Result<usize> {
    validate_event(model, event, 0)?;
    if model.feedback != Feedback::Explicit {
        return Err(Error::ModeMismatch {
            expected: model.feedback.as_str(),
            got: "explicit",
        });
    }
    Ok(apply_unchecked(model, event))
}

/// Applies one implicit (0/1) event. Returns the number of slots touched.
pub fn apply_implicit(model: &mut Model, event: &RatingEvent) -> Result<usize> {
    validate_event(model, event, 0)?;
    if model.feedback != Feedback::Implicit {
        return Err(Error::ModeMismatch {
            expected: model.feedback.as_str(),
            got: "implicit",
        });
    }
    Ok(apply_unchecked(model, event))
}

/// Dispatches on the model's feedback mode.
pub fn apply(model: &mut Model, event: &RatingEvent) -> Result<usize> {
    validate_event(model, event, 0)?;
    Ok(apply_unchecked(model, event))
}

fn validate_event(model: &Model, event: &RatingEvent, index: usize) -> Result<()> {
    let reject = |reason: String| Error::InvalidEvent {
        index,
        user: event.user.to_string(),
        item: event.item.to_string(),
        reason,
    };
    let p = &model.params;
    match (model.feedback, event.value) {
        (Feedback::Explicit, None) => Err(reject("explicit model needs a rating value".into())),
        (Feedback::Implicit, Some(_)) => {
            Err(reject("implicit model got an event carrying a value".into()))
        }
        (Feedback::Explicit, Some(v)) if !(v >= p.rating_min && v <= p.rating_max) => Err(reject(
            format!("value {v} outside [{}, {}]", p.rating_min, p.rating_max),
        )),
        _ => Ok(()),
    }
}

fn apply_unchecked(model: &mut Model, event: &RatingEvent) -> usize {
    let ui = model.user_or_register(&event.user);
    let vi = model.item_or_register(&event.item);
    let p = &model.params;
    let (item_coeff, user_coeff) = match event.value {
        Some(value) => {
            let global = model.global_mean();
            let user_mean = model.users.state(ui).mean().unwrap_or(global);
            let item_mean = model.items.state(vi).mean().unwrap_or(global);
            ((value - user_mean) * p.gamma, (value - item_mean) * p.gamma)
        }
        None => (p.gamma, p.gamma),
    };

    let user_ph = &model.users.state(ui).pheromones;
    let item_ph = &model.items.state(vi).pheromones;
    let (new_item, touched_item) =
        item_ph.evaporate_and_absorb(p.lambda, user_ph, item_coeff, p.sigma, p.type_cap);
    let (new_user, touched_user) =
        user_ph.evaporate_and_absorb(p.lambda, item_ph, user_coeff, p.sigma, p.type_cap);

    let value = event.value.unwrap_or(1.0);
    let sum_delta = event.value.unwrap_or(0.0);
    {
        let user = model.users.state_mut(ui);
        user.pheromones = new_user;
        user.rating_count += 1;
        user.rating_sum += sum_delta;
    }
    {
        let item = model.items.state_mut(vi);
        item.pheromones = new_item;
        item.rating_count += 1;
        item.rating_sum += sum_delta;
    }
    model.stats.total_count += 1;
    model.stats.total_sum += sum_delta;
    model.ratings[ui].insert(vi as u32, value);
    touched_item + touched_user
}

/// Rejects streams whose timestamps decrease, naming the first offending pair.
pub fn check_order(events: &[RatingEvent]) -> Result<()> {
    for (i, pair) in events.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(Error::Unsorted {
                prev_index: i,
                prev_ts: pair[0].timestamp,
                index: i + 1,
                ts: pair[1].timestamp,
            });
        }
    }
    Ok(())
}

/// Throughput summary of one [`train_stream`] call.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub events: usize,
    pub seconds: f64,
    pub touched_entries: usize,
}

impl TrainReport {
    pub fn events_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.events as f64 / self.seconds
        } else {
            0.0
        }
    }

    pub fn mean_touched_entries(&self) -> f64 {
        if self.events == 0 {
            0.0
        } else {
            self.touched_entries as f64 / self.events as f64
        }
    }
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "events={}", self.events)?;
        writeln!(f, "seconds={:.6}", self.seconds)?;
        writeln!(f, "events_per_second={:.1}", self.events_per_second())?;
        write!(f, "mean_touched_entries={:.3}", self.mean_touched_entries())
    }
}

/// Folds the events into the model in order. The whole stream is validated
/// first, so a rejected stream leaves the model untouched.
pub fn train_stream(model: &mut Model, events: &[RatingEvent]) -> Result<TrainReport> {
    check_order(events)?;
    for (i, e) in events.iter().enumerate() {
        validate_event(model, e, i)?;
    }
    let start = Instant::now();
    let touched_entries = events.iter().map(|e| apply_unchecked(model, e)).sum();
    Ok(TrainReport {
        events: events.len(),
        seconds: start.elapsed().as_secs_f64(),
        touched_entries,
    })
}

/// Trains on events in the given order, skipping the timestamp check. Used for
/// the shuffled (order-agnostic) baseline in the temporal experiment.
pub fn train_unordered(model: &mut Model, events: &[RatingEvent]) -> Result<TrainReport> {
    for (i, e) in events.iter().enumerate() {
        validate_event(model, e, i)?;
    }
    let start = Instant::now();
    let touched_entries = events.iter().map(|e| apply_unchecked(model, e)).sum();
    Ok(TrainReport {
        events: events.len(),
        seconds: start.elapsed().as_secs_f64(),
        touched_entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Seeding;
    use crate::pheromone::PheromoneType as T;
    use proptest::prelude::*;

    fn ids(v: &[&str]) -> Vec<EntityId> {
        v.iter().map(|&s| s.into()).collect()
    }

    fn ph(pairs: &[(u32, f64)]) -> PheromoneVector {
        PheromoneVector::from_entries(pairs.iter().map(|&(i, a)| (T(i), a)))
    }

    fn params() -> ModelParams {
        ModelParams::acf()
    }

    fn assert_ph_within(got: &PheromoneVector, want: &[(u32, f64)], tol: f64) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for ((t, a), &(wt, wa)) in got.iter().zip(want) {
            assert_eq!(t, T(wt));
            assert!((a - wa).abs() < tol, "{got:?} vs {want:?}");
        }
    }

    fn assert_ph_close(got: &PheromoneVector, want: &[(u32, f64)]) {
        assert_ph_within(got, want, 1e-9)
    }

    #[test]
    fn init_acf_examples() {
        let m = init_acf(&ids(&["u1"]), &ids(&["v1"]), params(), Feedback::Explicit).unwrap();
        assert_eq!(m.users().get(&"u1".into()).unwrap().pheromones, ph(&[(0, 1.0)]));
        assert!(m.items().get(&"v1".into()).unwrap().pheromones.is_empty());

        let m = init_acf(&[], &ids(&["v1"]), params(), Feedback::Explicit).unwrap();
        assert!(m.users().is_empty());

        let m = init_acf(&ids(&["u1", "u2"]), &[], params(), Feedback::Explicit).unwrap();
        let a = &m.users().state(0).pheromones;
        let b = &m.users().state(1).pheromones;
        assert_eq!((a.len(), b.len()), (1, 1));
        assert_ne!(a.entries()[0].0, b.entries()[0].0);
    }

    #[test]
    fn init_rejects_duplicates() {
        let err = init_acf(&ids(&["u1", "u1"]), &[], params(), Feedback::Explicit).unwrap_err();
        assert!(err.to_string().contains("u1"));
        assert!(init_acf(&[], &ids(&["v", "v"]), params(), Feedback::Explicit).is_err());
    }

    #[test]
    fn evaporate_examples() {
        assert_eq!(evaporate(&ph(&[(0, 1.0)]), 1.0), ph(&[(0, 1.0)]));
        // factor for 0.5 against max 1.0: exp(1.5 / 2 - 1) = exp(-0.25)
        let f = (-0.25f64).exp();
        assert!((f - 0.778_800_783_071_404_9).abs() < 1e-15);
        assert_ph_close(&evaporate(&ph(&[(0, 1.0), (1, 0.5)]), 1.0), &[(0, 1.0), (1, 0.5 * f)]);
        // five-decimal reference values
        assert_ph_within(&evaporate(&ph(&[(0, 1.0), (1, 0.5)]), 1.0), &[(0, 1.0), (1, 0.38940)], 5e-6);
        assert_ph_within(&evaporate(&ph(&[(0, 1.0), (1, -0.5)]), 1.0), &[(0, 1.0), (1, -0.38940)], 5e-6);
        assert!(evaporate(&PheromoneVector::new(), 1.0).is_empty());
    }

    /// User u1 has prior ratings averaging 3.0 on other items, target item
    /// unrated; global mean is 3.0.
    fn primed_explicit() -> Model {
        let mut m = init_acf(&ids(&["u1"]), &ids(&["v1"]), params(), Feedback::Explicit).unwrap();
        m.users.state_mut(0).rating_count = 2;
        m.users.state_mut(0).rating_sum = 6.0;
        m.stats.total_count = 2;
        m.stats.total_sum = 6.0;
        m
    }

    #[test]
    fn apply_explicit_single_event() {
        let mut m = primed_explicit();
        apply_explicit(&mut m, &RatingEvent::explicit("u1", "v1", 5.0, 0)).unwrap();
        assert_ph_close(&m.items().get(&"v1".into()).unwrap().pheromones, &[(0, 0.4)]);
        assert_ph_close(&m.users().get(&"u1".into()).unwrap().pheromones, &[(0, 1.0)]);
        let u = m.users().get(&"u1".into()).unwrap();
        assert_eq!((u.rating_count, u.rating_sum), (3, 11.0));
        assert_eq!(m.stats().total_count, 3);
        assert_eq!(m.rating(0, 0), Some(5.0));
    }

    #[test]
    fn apply_explicit_zero_deviation_only_evaporates() {
        let mut m = primed_explicit();
        m.items.state_mut(0).pheromones = ph(&[(0, 2.0), (7, 1.0)]);
        m.items.state_mut(0).rating_count = 1;
        m.items.state_mut(0).rating_sum = 3.0;
        let before_user = m.users.state(0).pheromones.clone();
        let before_item = m.items.state(0).pheromones.clone();
        apply_explicit(&mut m, &RatingEvent::explicit("u1", "v1", 3.0, 0)).unwrap();
        assert_eq!(m.users.state(0).pheromones, evaporate(&before_user, 1.0));
        assert_eq!(m.items.state(0).pheromones, evaporate(&before_item, 1.0));
    }

    #[test]
    fn apply_explicit_negative_transmission() {
        let mut m = primed_explicit();
        m.users.state_mut(0).rating_sum = 9.0; // mean 4.5
        apply_explicit(&mut m, &RatingEvent::explicit("u1", "v1", 1.0, 0)).unwrap();
        // (1 - 4.5) * 0.2 = -0.7 times U = {0: 1.0}
        assert_ph_close(&m.items.state(0).pheromones, &[(0, -0.7)]);
    }

    #[test]
    fn apply_explicit_rejects_out_of_scale() {
        let mut m = primed_explicit();
        let before = m.clone();
        let err = apply_explicit(&mut m, &RatingEvent::explicit("u1", "v1", 9.0, 0)).unwrap_err();
        assert!(err.to_string().contains("u1"));
        assert_eq!(m, before);
        assert!(apply_explicit(&mut m, &RatingEvent::implicit("u1", "v1", 0)).is_err());
    }

    #[test]
    fn apply_implicit_examples() {
        let mut m =
            init_acf(&ids(&["u1", "u2"]), &ids(&["v1"]), params(), Feedback::Implicit).unwrap();
        m.items.state_mut(0).pheromones = ph(&[(1, 0.5)]);
        apply_implicit(&mut m, &RatingEvent::implicit("u1", "v1", 0)).unwrap();
        assert_ph_close(&m.items.state(0).pheromones, &[(0, 0.2), (1, 0.5)]);
        assert_ph_close(&m.users.state(0).pheromones, &[(0, 1.0), (1, 0.1)]);

        let mut m = init_acf(&ids(&["u1"]), &ids(&["v1"]), params(), Feedback::Implicit).unwrap();
        apply_implicit(&mut m, &RatingEvent::implicit("u1", "v1", 0)).unwrap();
        assert_ph_close(&m.items.state(0).pheromones, &[(0, 0.2)]);
        assert_ph_close(&m.users.state(0).pheromones, &[(0, 1.0)]);
        assert_eq!(m.users.state(0).rating_count, 1);
        assert_eq!(m.users.state(0).rating_sum, 0.0);
    }

    #[test]
    fn apply_implicit_zero_gamma_only_evaporates() {
        let p = ModelParams {
            gamma: 0.0,
            ..params()
        };
        let mut m = init_acf(&ids(&["u1"]), &ids(&["v1"]), p, Feedback::Implicit).unwrap();
        m.users.state_mut(0).pheromones = ph(&[(0, 1.0), (3, 0.5)]);
        m.items.state_mut(0).pheromones = ph(&[(0, 0.3), (2, 0.9)]);
        let (u, v) = (m.users.state(0).pheromones.clone(), m.items.state(0).pheromones.clone());
        apply_implicit(&mut m, &RatingEvent::implicit("u1", "v1", 0)).unwrap();
        assert_eq!(m.users.state(0).pheromones, evaporate(&u, 1.0).cutoff(0.01, None));
        assert_eq!(m.items.state(0).pheromones, evaporate(&v, 1.0).cutoff(0.01, None));
    }

    #[test]
    fn cold_entities_auto_register() {
        let mut m = init_acf(&ids(&["u1"]), &[], params(), Feedback::Implicit).unwrap();
        apply_implicit(&mut m, &RatingEvent::implicit("u9", "v9", 0)).unwrap();
        assert_eq!(m.users().len(), 2);
        assert_eq!(m.users().get(&"u9".into()).unwrap().pheromones.entries()[0].0, T(1));

        let mut m = init_seeded(
            vec![("a".into(), T(0)), ("b".into(), T(0))],
            &[],
            ModelParams::iacf(3),
            Feedback::Implicit,
        )
        .unwrap();
        apply_implicit(&mut m, &RatingEvent::implicit("c", "v", 0)).unwrap();
        // fresh types start after the cluster range
        assert_eq!(m.users().get(&"c".into()).unwrap().pheromones.entries()[0].0, T(5));
        assert_eq!(m.params().seeding, Seeding::Clustered { clusters: 3 });
    }

    #[test]
    fn train_stream_rejects_unsorted_without_mutation() {
        let mut m = init_acf(&[], &[], params(), Feedback::Implicit).unwrap();
        let events = vec![
            RatingEvent::implicit("a", "x", 5),
            RatingEvent::implicit("a", "y", 5),
            RatingEvent::implicit("b", "x", 3),
        ];
        let before = m.clone();
        match train_stream(&mut m, &events) {
            Err(Error::Unsorted {
                prev_index: 1,
                index: 2,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(m, before);
    }

    #[test]
    fn train_stream_trivial_cases() {
        let mut m = init_acf(&ids(&["u"]), &ids(&["v"]), params(), Feedback::Explicit).unwrap();
        let before = m.clone();
        let report = train_stream(&mut m, &[]).unwrap();
        assert_eq!(report.events, 0);
        assert_eq!(m, before);

        let e = RatingEvent::explicit("u", "v", 4.0, 1);
        let mut single = before.clone();
        apply_explicit(&mut single, &e).unwrap();
        train_stream(&mut m, std::slice::from_ref(&e)).unwrap();
        assert_eq!(m, single);
    }

    #[test]
    fn report_format() {
        let r = TrainReport {
            events: 10,
            seconds: 2.0,
            touched_entries: 25,
        };
        let text = r.to_string();
        assert!(text.contains("events=10"));
        assert!(text.contains("events_per_second=5.0"));
        assert!(text.contains("mean_touched_entries=2.500"));
    }

    fn arb_stream(explicit: bool, len: usize) -> impl Strategy<Value = Vec<RatingEvent>> {
        prop::collection::vec((0u8..4, 0u8..5, 1u8..=5), 0..=len).prop_map(move |raw| {
            raw.into_iter()
                .enumerate()
                .map(|(t, (u, v, r))| {
                    let (u, v) = (format!("u{u}"), format!("v{v}"));
                    if explicit {
                        RatingEvent::explicit(u, v, r as f64, t as i64)
                    } else {
                        RatingEvent::implicit(u, v, t as i64)
                    }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn fold_is_associative(events in arb_stream(true, 10), split in 0usize..=10) {
            let split = split.min(events.len());
            let fresh = init_acf(&[], &[], params(), Feedback::Explicit).unwrap();
            let mut whole = fresh.clone();
            train_stream(&mut whole, &events).unwrap();
            let mut parts = fresh;
            train_stream(&mut parts, &events[..split]).unwrap();
            train_stream(&mut parts, &events[split..]).unwrap();
            prop_assert_eq!(whole, parts);
        }

        #[test]
        fn items_never_originate_types(events in arb_stream(false, 30)) {
            let mut m = init_acf(&[], &[], params(), Feedback::Implicit).unwrap();
            train_stream(&mut m, &events).unwrap();
            let user_types: Vec<_> = (0..m.users().len()).map(|i| m.fresh_type(i)).collect();
            for (_, item) in m.items().iter() {
                for (t, _) in item.pheromones.iter() {
                    prop_assert!(user_types.contains(&t));
                }
            }
        }

        #[test]
        fn touched_entries_bounded(events in arb_stream(true, 25)) {
            let mut m = init_acf(&[], &[], params(), Feedback::Explicit).unwrap();
            for e in &events {
                let u = m.users().get(&e.user).map(|s| s.pheromones.clone()).unwrap_or_default();
                let v = m.items().get(&e.item).map(|s| s.pheromones.clone()).unwrap_or_default();
                let union = u.iter().chain(v.iter()).map(|(t, _)| t).collect::<std::collections::BTreeSet<_>>().len();
                // a new user brings its seed type
                let (ul, union) = if u.is_empty() && m.users().get(&e.user).is_none() { (1, union + 1) } else { (u.len(), union) };
                let touched = apply_explicit(&mut m, e).unwrap();
                prop_assert!(touched <= ul + v.len() + union);
            }
        }

        #[test]
        fn both_sides_read_pre_event_snapshots(u in prop::collection::vec((0u32..6, -2.0f64..2.0), 1..6),
                                               v in prop::collection::vec((0u32..6, -2.0f64..2.0), 0..6),
                                               value in 1.0f64..5.0) {
            let u = PheromoneVector::from_entries(u.into_iter().map(|(t, a)| (T(t), a)));
            let v = PheromoneVector::from_entries(v.into_iter().map(|(t, a)| (T(t), a)));
            let mut m = init_acf(&ids(&["u1"]), &ids(&["v1"]), params(), Feedback::Explicit).unwrap();
            m.users.state_mut(0).pheromones = u.clone();
            m.items.state_mut(0).pheromones = v.clone();
            apply(&mut m, &RatingEvent::explicit("u1", "v1", value, 0)).unwrap();
            // no history: both means fall back to the scale midpoint
            let coeff = (value - 3.0) * 0.2;
            let side = |own: &PheromoneVector, donor: &PheromoneVector| {
                let mixed = own.evaporated(1.0).iter().chain(donor.scaled(coeff).iter()).collect::<Vec<_>>();
                PheromoneVector::from_entries(mixed).cutoff(0.01, None)
            };
            let (want_u, want_v) = (side(&u, &v), side(&v, &u));
            for (got, want) in [(&m.users.state(0).pheromones, &want_u), (&m.items.state(0).pheromones, &want_v)] {
                prop_assert_eq!(got.len(), want.len());
                for ((t1, a), (t2, b)) in got.iter().zip(want.iter()) {
                    prop_assert_eq!(t1, t2);
                    prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
                }
            }
        }
    }
}
