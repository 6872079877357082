//! The trainable direction network and the end-to-end feasible pipeline.

pub mod mlp;
pub mod pipeline;
pub mod train;

pub use mlp::{MlpModel, MlpTrace, OutputActivation, DEFAULT_HIDDEN};
pub use pipeline::{network_input, pipeline_backward, pipeline_forward, pipeline_infer, PipelineTrace};
pub use train::{
    pipeline_loss, run_minibatch, train, train_phase1, train_with_interiors, OptimizerConfig, TrainConfig,
    TrainHistory, TrainMode, TrainSample,
};
