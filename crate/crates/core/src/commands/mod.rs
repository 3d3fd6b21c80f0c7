//! End-to-end commands behind the command-line tool.

mod calibrate;
mod gradcheck;
mod score;
mod simulate;
mod train;

pub use calibrate::{calibrate_predictions, cmd_calibrate, parse_predictions, CalibrateReport, Prediction};
pub use gradcheck::{
    central_difference, relative_error, run_gradcheck, GradCheck, GradcheckOptions, GradcheckReport,
    GRADCHECK_TOLERANCE, RELATIVE_FLOOR,
};
pub use score::{cmd_score, score_candidate, score_pair, score_records, CandidateScore, ScoredPair};
pub use simulate::{cmd_simulate_noise, simulate_noise, synthetic_graph, win_rate, Method, RetentionReport, RetentionRow};
pub use train::{cmd_train, prepare_training, run_training, Checkpoint, TrainingData};
