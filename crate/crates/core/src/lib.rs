//! Crop selection and yield prediction pipeline.
//!
//! The crate covers the full path from raw tabular records to a per-crop
//! model comparison: a fixed 46-column feature [`schema`], CSV [`ingest`]
//! with cleaning and min-max normalization, a calibrated synthetic data
//! generator ([`synthgen`]), a from-scratch feedforward network ([`nn`]),
//! three baseline regressors ([`baselines`]) and the evaluation harness
//! ([`eval`]). [`pipeline`] wires them together the way the CLI uses them.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod schema;
pub mod synthgen;

pub use error::{EvalError, IngestError, ModelError, NnError, SchemaError};
pub use schema::{AgroRecord, Crop, District, FeatureVector, LandType, SoilType, NUM_FEATURES};
