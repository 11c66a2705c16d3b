//! Stylometric drift analysis across a temporal boundary.
//!
//! The crate is organised as a pipeline of independent stages:
//!
//! * [`corpus`] loads, filters, splits and samples timestamped documents.
//! * [`stylometry`] extracts per-document style features and the AI-topic share.
//! * [`ai_likeness`] turns per-document log-likelihoods from two scorer models
//!   into a perplexity gap and a within-author AI-likeness index.
//! * [`delta`] aggregates features into standardized per-author change vectors.
//! * [`changepoint`] runs exact penalized segmentation (PELT) on bucketed series.
//! * [`archetypes`] clusters change vectors with HDBSCAN, validates the result
//!   and names the clusters.
//! * [`stats`] holds the fixed-effects regression, HC3 errors, Holm correction
//!   and partial correlation.
//! * [`synth`] generates corpora and change-vector populations with planted
//!   ground truth.

pub mod ai_likeness;
pub mod archetypes;
pub mod changepoint;
pub mod corpus;
pub mod delta;
pub mod stats;
pub mod stylometry;
pub mod synth;
pub mod util;

pub use ai_likeness::{GapRecord, LogProbRecord};
pub use archetypes::{Archetype, ClusterResult, HdbscanConfig, StabilityReport};
pub use changepoint::{PeltConfig, SeriesBreaks, TimeSeries};
pub use corpus::{BoundaryConfig, Document, FilterConfig, Genre, QuotaConfig};
pub use delta::{AuthorDelta, Feature, StandardizationReport};
pub use stats::{PanelRow, RegressionResult};
pub use stylometry::{FeatureRecord, Lexicon};
