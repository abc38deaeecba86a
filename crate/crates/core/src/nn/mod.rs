//! Convolutional channel-denoising network written from scratch: tensors,
//! layers with hand-derived backward passes, Adam, training and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use layers::Mode;
pub use model::{build_model, grid_to_tensor, tensor_to_grid, ArchConfig, ConvSpec, Layer, Model};
pub use tensor::{Real, Tensor};
pub use train::{fit, train, TrainConfig, TrainReport, TrainSample};
