//! Training, generation, prompt-density scoring and calibration.

mod bundle;
mod calibrate;
mod config;
mod features;
mod generate;
mod kde;
pub mod predictors;
mod train;

pub use bundle::{InitializerBundle, ModelBundle};
pub use calibrate::{calibrate, pearson, prompts, sig6, Axis, CalibrationConfig, CalibrationReport, PromptRow};
pub use config::{ConfigError, TrainConfig};
pub use features::{step_input, story_samples, Standardizer};
pub use generate::{
    generate, generate_from, sample_masked, sample_start_fragment, GenerateOptions, ModelScorer, NextAction,
    UniformModel,
};
pub use kde::{Kde, DEFAULT_BANDWIDTH};
pub use predictors::{IdentityPredictor, NearestNeighborPredictor, PropertyPredictor, SyntheticPredictor};
pub use train::{
    accuracy, fragment_targets, resample, split_dataset, train, train_initializer, vocab_dims, EpochMetrics, Split,
    Trained,
};
