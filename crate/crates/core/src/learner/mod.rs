//! The relation extractor, the first-order meta update and the continual
//! training loop with its baseline strategies.

pub mod model;
pub mod train;

pub use model::{merge_optimizer_state, reptile_aggregate, Encoding, ExtractorModel, ModelConfig};
pub use train::{
    evaluate_seen, inner_adapt_relation, train_sequence, train_task, RunState, Strategy, TrainConfig,
};
