//! Distributions, reproducible random streams and historical datasets.

mod dataset;
mod distribution;
mod rng;

pub use dataset::{
    load_dataset, load_dataset_with, parse_dataset, validate_dataset, Dataset, DatasetError,
    ParseMode, ReliabilityPolicy, Row, TimeUnit, Timestamp, ValidationReport,
};
pub use distribution::{sample, DiscreteFinite, Distribution, DistributionError};
pub use rng::{rng_stream, RngStream};
