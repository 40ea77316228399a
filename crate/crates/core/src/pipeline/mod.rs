//! Stage orchestration: configuration, training loop, metrics and artifacts.

mod config;
mod metrics;
mod stages;

pub use config::{Ablations, TrainingConfig};
pub use metrics::{
    average_ranks, evaluate, factor_alignment, reconstruction_mse, spearman, split_ids, MetricsReport,
    HELD_OUT_FRACTION, METRICS_HEADER,
};
pub use stages::{
    ablation_csv, cmd_ablate, cmd_eval, cmd_generate, cmd_init_graph, cmd_score, cmd_train, cmd_traverse,
    init_graph_from_scores, linspace, losses_to_csv, mean_std, train, traversal, AblationRun, TrainLayout, TrainRun,
    TRAVERSE_RANGE, TRAVERSE_STEPS, TRAVERSE_UPSCALE,
};
