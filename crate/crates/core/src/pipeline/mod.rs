//! Training, sliding-window inference and the finite-difference
//! verification suite.

mod config;
mod gradcheck;
mod train;
mod window;

pub use config::TrainConfig;
pub use gradcheck::{kink_aware_difference, run_gradcheck, GradcheckConfig, GradcheckReport, GroupCheck, Sample};
pub use train::{epoch_means, prepare, train, train_from, Case, StepLog, TrainObserver, TrainOutcome};
pub use window::{direct_infer, sliding_window_infer, sliding_window_infer_ordered, SlidingWindowPlan, THRESHOLD};
