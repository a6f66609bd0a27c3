//! Behavior cloning on observable data and the narrow/augmented/mixed
//! generalization experiment.

mod eval;
mod experiment;
mod model;
mod train;

pub use eval::{eval_csv, eval_policy, format_table, run_trial, total, trial_seed, EvalRow, EvalShape, EVAL_CSV_HEADER};
pub use experiment::{
    load_bc_data, normalized_shape, run_experiment, shape_distance, Condition, ConditionResult, ExperimentError,
    ExperimentReport, ExperimentSpec, REFERENCE_TOTALS, SCOPE_NOTES,
};
pub use model::{features, BcCache, BcLayout, BcPolicy, Normalizer, VAR_FLOOR};
pub use train::{dataset_loss, train_bc, BcConfig, BcData, BcError, BcTrainReport};

#[cfg(test)]
mod tests;
