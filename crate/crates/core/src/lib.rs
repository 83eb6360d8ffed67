//! Incremental collaborative filtering with pheromone vectors.
//!
//! Users and items carry sparse vectors of typed, signed "pheromones". Every
//! rating event makes the user and the item exchange scaled copies of their
//! vectors, while existing pheromones evaporate relative to the strongest one
//! and entries below a threshold are cut off. Similarities between these
//! vectors drive neighborhood rating prediction and top-N ranking.
//!
//! Two seedings are supported: one pheromone type per user (ACF), or one type
//! per k-means user cluster (IACF). The [`eval`] module holds the metrics,
//! splits, experiments and a brute-force oracle; [`io`] handles datasets and
//! model snapshots.

pub mod clustering;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod pheromone;
pub mod recommend;
pub mod training;

pub use clustering::{
    assign_new_user, build_pattern_vectors, init_iacf, kmeans, kmeans_with, ClusterAssignment,
    Clustering, KMeansConfig, RatingPattern,
};
pub use error::{Error, Result};
pub use model::{
    EntityId, EntityState, EntityTable, Feedback, GlobalStats, Model, ModelParams, RatingEvent,
    Seeding,
};
pub use pheromone::{cosine_similarity, cutoff, max_magnitude, PheromoneType, PheromoneVector};
pub use recommend::{
    item_neighbors, predict_rating, rank_items, user_neighbors, NeighborList, RankedList,
    Recommender,
};
pub use io::{load_csv, load_model, load_movielens, save_model, DatasetDescriptor, DatasetFormat};
pub use training::{
    apply, apply_explicit, apply_implicit, check_order, evaporate, init_acf, train_stream,
    train_unordered, TrainReport,
};
