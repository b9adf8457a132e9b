//! Tensor core, the next-action transformer and the start-fragment initializer.

pub mod gradcheck;
mod initializer;
mod params;
mod tape;
mod tensor;
mod transformer;

pub use initializer::FragmentInitializer;
pub use params::{adam_step, AdamConfig, AdamState, ParamStore, WeightsError};
pub use tape::{softmax_rows, Tape, Var};
pub use tensor::Matrix;
pub use transformer::{geometry_attention, ModelConfig, StepInput, StoryModel, VocabDims};
