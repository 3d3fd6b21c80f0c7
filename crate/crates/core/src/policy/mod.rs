//! Tabular softmax policies, reference handling, the Gibbs oracle, and training.

mod tabular;
mod train;

pub use tabular::{
    ema_update, gibbs_policy, kl_objective, log_prob, total_variation, EmaParams, PromptRewards, ReferenceMode,
    TabularPolicy, EMA_RHO_RANGE,
};
pub use train::{train, ObjectiveMode, PreparedPair, StepMetrics, TrainConfig, TrainOutcome};
