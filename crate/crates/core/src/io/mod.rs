//! Dataset loading and model snapshots.

mod dataset;
mod snapshot;

pub use dataset::{
    load_csv, load_dataset, load_movielens, write_events_csv, DatasetDescriptor, DatasetFormat,
    TimestampUnit,
};
pub use snapshot::{load_model, read_model, save_model, write_model, SNAPSHOT_VERSION};
