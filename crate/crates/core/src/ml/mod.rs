//! Secret-shared model training and its cleartext references.

pub mod dataset;
pub mod engine;
pub mod eval;
pub mod train;

pub use dataset::{DataMeta, Dataset, LabelEncoding, OwnerPart, Split};
pub use engine::{Engine, PlainEngine, Planner};
pub use eval::{float_train, Dense, Model};
pub use train::{train, training_plan, ModelKind, Outcome, TrainConfig};
