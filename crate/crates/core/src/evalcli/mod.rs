//! Training loop, metrics, evaluation, prediction dumps and the command-line
//! front end.

pub mod cli;
mod config;
mod dump;
mod eval;
mod gradcheck;
mod metrics;
mod train;

pub use config::{KvConfig, LrSchedule, TrainConfig};
pub use dump::{format_csv, write_csv, write_pgm, dump_maps, pgm_bytes};
pub use eval::{
    check_compatible, evaluate, predict_sample, sample_maps, EvalConfigEcho, EvalReport, EvalRow,
    EvalSummary, RECALL_THRESHOLDS,
};
pub use gradcheck::{model_grad_check, random_sample, worst_norm_error, ParamCheck};
pub use metrics::{iou, recall_at_1};
pub use train::{sample_gradients, train, StepLog, TrainOutcome};
