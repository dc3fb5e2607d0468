//! Stage cost prediction and latency-optimal allocation of DSP and LUT
//! resources across the stages of a fully pipelined accelerator.

mod cost;
mod dp;
mod regression;

pub use cost::{
    read_samples, synth_samples, write_samples, CostModel, GeneratorSpec, LinearTarget, Sample, StageConfig,
    StageEstimate, FEATURES, FEATURE_MAP_ID, MODEL_VERSION, TARGETS,
};
pub use dp::{
    brute_force_allocate, dp_allocate, pf_domain, stage_inputs, AllocOptions, AllocationPlan, Budgets, DpStats,
    StageInput, StagePlan, PLAN_VERSION,
};
pub use regression::{fit_ridge, RidgeModel, RidgeOptions};
