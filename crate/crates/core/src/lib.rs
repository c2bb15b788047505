//! # erprobe
//!
//! Event-related-potential probing pipeline. A stimulus schedule is
//! presented while EEG is recorded; every stimulus yields an epoch, epochs
//! are cleaned and vectorized, and a boosted logistic-regression model scores
//! them. Averaging the scores per candidate stimulus reveals which candidate
//! the viewer found relevant, and a confidence margin decides whether the
//! outcome is trusted.
//!
//! Modules, bottom-up:
//!
//! - [`protocol`]: counting and video stimulus schedules, CSV import/export.
//! - [`signal`]: recordings, epoch extraction, baseline, FIR low-pass,
//!   median decimation, channel selection, the full preprocessing chain.
//! - [`blr`]: boosted logistic regression with linear weak learners.
//! - [`probe`]: per-candidate scores, targeted/agnostic decisions, sweeps.
//! - [`sim`]: synthetic ERP cohort generator used as ground truth.

pub mod blr;
pub mod config;
pub mod error;
pub mod probe;
pub mod protocol;
pub mod seed;
pub mod signal;
pub mod sim;

pub use blr::{BoostedModel, Standardizer, TrainConfig, WeakLearner};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use probe::{CandidateScores, Decision, ProbeMode, SweepCurve};
pub use protocol::{ClassLabel, Position, SessionKind, StimulusEvent, StimulusSchedule};
pub use signal::{Epoch, FeatureVector, LabeledDataset, PreprocessConfig, Recording};
pub use sim::{CohortReport, ErpTemplate, SubjectProfile};
