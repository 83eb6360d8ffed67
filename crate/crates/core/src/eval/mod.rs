//! Metrics, splits, experiment drivers and reference implementations.

pub mod baseline;
pub mod drift;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod split;

pub use baseline::BiasBaseline;
pub use drift::{generate_drift, DriftConfig, DriftData, GroundTruth};
pub use experiment::{
    build_model, evaluate_ranking, evaluate_ranking_split, evaluate_rating, init_model,
    least_squares_slope, predict_all, relevant_sets, score_rankings, temporal_experiment,
    Algorithm, RankingReport, RankingRun, RatingReport, TemporalConfig, TemporalReport,
};
pub use metrics::{hitting_set, precision_at_n, ranking_accumulation, rmse};
pub use oracle::{oracle_check, OracleReport, TinyInstance};
pub use report::{write_csv, ReportRow};
pub use split::{split, HoldoutSplit, SplitStrategy};
