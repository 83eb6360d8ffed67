//! Shared fixtures for the criterion benches.

use antcf::eval::{generate_drift, init_model, Algorithm, DriftConfig};
use antcf::{train_stream, Feedback, Model, ModelParams, RatingEvent};

/// Implicit drift stream of `users * events_per_user` events over `items` items.
pub fn stream(users: usize, items: usize, events_per_user: usize) -> Vec<RatingEvent> {
    generate_drift(&DriftConfig::new(users, items, events_per_user, 3.0, 1))
        .expect("valid config")
        .events
}

/// IACF model clustered on `events` but not yet trained.
pub fn untrained(events: &[RatingEvent]) -> Model {
    let alg = Algorithm::Iacf {
        clusters: 20,
        seed: 1,
    };
    init_model(&alg, events, &ModelParams::default(), Feedback::Implicit).expect("clusterable")
}

pub fn trained(events: &[RatingEvent]) -> Model {
    let mut model = untrained(events);
    train_stream(&mut model, events).expect("sorted stream");
    model
}
