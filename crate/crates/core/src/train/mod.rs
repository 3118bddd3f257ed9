//! Optimizers, objectives and training protocols.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod objective;
pub mod schedule;
pub mod trainer;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use mlp::MlpParams;
pub use objective::{catoni_partials, objective_value_and_grad, Objective, ObjectiveEval};
pub use schedule::{Observation, PlateauSchedule};
pub use trainer::{
    bound_report, evaluate, history_to_jsonl, model_outputs, train, Example, HistoryRecord, Method,
    Metrics, Model, TrainConfig, TrainOutcome, TrainState,
};
