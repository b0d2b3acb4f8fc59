//! Orchestration: run configuration, pipeline stages with resumable
//! intermediates, report emission and the comparison studies.

pub mod app1;
pub mod compare;
pub mod config;
pub mod report;

pub use app1::{exact_app1, ExactApp1Solution};
pub use compare::{compare_marginals, compare_restriction, MarginalRow, RestrictionRow};
pub use config::{LossParams, PipelineParams, RunConfig};
pub use report::{
    build_cloud_cache, run_compare_marginals, run_compare_restriction, run_pipeline, run_sweep,
    stage_fit, stage_select, stage_train, stage_validate, OutPaths,
};
