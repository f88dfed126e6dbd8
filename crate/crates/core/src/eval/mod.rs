//! Continual-learning metrics, permutation studies and metric reports.

pub mod metrics;
pub mod record;
pub mod report;
pub mod study;

pub use metrics::{
    accuracy, average_accuracy, average_ranks, error_bound, forgetting_rate, mean, pearson_cc, sample_std, spearman,
    whole_accuracy, Predictor,
};
pub use record::{RunRecord, StepLog};
pub use report::{
    accuracy_table_csv, canonical_json, difficulty_table_csv, position_grid_csv, MetricSummary, MetricsReport,
    RunSummary,
};
pub use study::{
    all_permutations, cyclic_shift_protocol, difficulty_correlation, position_avg_accuracy, run_permutation_study,
    run_study, study_orders, DifficultyCorrelation, ForgettingSummary, PermutationStudy, StudyContext, StudyMode,
    MAX_EXHAUSTIVE_TASKS, RUN_STREAM_BASE,
};
