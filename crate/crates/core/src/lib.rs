//! Retention analytics for interactive text-based online courses.
//!
//! The pipeline runs end to end on course interaction logs: ingest and
//! validate logs, correlate learner attributes and engagement with dropout,
//! build chapter-pair prediction datasets, predict dropout with a staged
//! model controller, and drive personalized email interventions whose
//! effect is measured on login behavior. A built-in simulator and scripted
//! model clients make every stage runnable offline.

pub mod courselog;
pub mod cpadp;
pub mod dataset;
pub mod eval;
pub mod hashing;
pub mod intervene;
pub mod predict;
pub mod simkit;
pub mod stats;

pub use courselog::{CourseLog, DAY_MS};
pub use dataset::PredictionInstance;
pub use predict::{PredictionOutcome, Stage};
