//! A laboratory for Chord under churn.
//!
//! The crate has two halves that are meant to be checked against each other:
//!
//! * a discrete-event simulation of the Chord join, stabilization and lookup
//!   algorithms under Poisson joins, exponential lifetimes and randomly
//!   scheduled stabilizations ([`protocol`], [`engine`]), measured by
//!   [`observatory`];
//! * steady-state fluid-model predictions for the same quantities: wrong and
//!   failed successor pointers, ring break-up, lookup inconsistency, dead
//!   fingers and the expected lookup cost ([`theory`]).
//!
//! [`lab`] runs parameter sweeps over both and writes comparison tables.
//! Each capability has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run --release --example predict
//! cargo run --release --example churn_trial
//! ```

pub mod engine;
pub mod lab;
pub mod observatory;
pub mod protocol;
pub mod ring;
pub mod theory;

pub use ring::{Bounds, Key, KeySpace, Span};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("key space must have between 1 and {} bits, got {0}", ring::KeySpace::MAX_BITS)]
    InvalidKeySpace(u32),
    #[error("key {value} outside ring of size {size}")]
    KeyOutOfRange { value: u64, size: u64 },
    #[error("finger index {index} outside 1..={fingers}")]
    FingerIndex { index: usize, fingers: usize },
    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("distance {0} outside the solved range")]
    DistanceOutOfRange(u64),
    #[error("trial results disagree on {0}")]
    MismatchedTrials(&'static str),
    #[error("no trial results to aggregate")]
    NoTrials,
    #[error("unknown quantity {0:?}")]
    UnknownQuantity(String),
    #[error("missing counterpart for {0}")]
    MissingCounterpart(String),
    #[error("spec error: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}
