//! Greedy transition-based dependency parser conditioned on a treebank vector.

pub mod config;
pub mod io;
pub mod model;
pub mod train;
pub mod transition;

pub use config::{ParserConfig, N_SLOTS};
pub use model::{ParserModel, Params, PreparedSentence, Vocab};
pub use train::{train, TrainReport, TrainingTreebank};
pub use transition::{Action, TransitionSystem};

/// Predicted heads (1-based, 0 = root) and labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseResult {
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
}
