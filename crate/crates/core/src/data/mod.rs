//! Transaction ingestion, temporal splitting and the synthetic drift generator.

mod drift;
mod log;
mod split;

pub use drift::{generate_drift, DriftConfig, DriftData};
pub use log::{
    format_timestamp, parse_timestamp, parse_transactions, read_transactions, write_transactions,
    ParseStats, Transaction, TransactionLog, SECONDS_PER_DAY,
};
pub use split::{temporal_split, TemporalSplit};
