//! Minimal reverse-mode automatic differentiation over dense `f64` tensors,
//! with the layers, optimizer and checkpoint format the pose models need.

pub mod checkpoint;
pub mod gradcheck;
mod graph;
pub mod nn;
pub mod optim;
mod params;
mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use graph::{Gradients, Graph, NodeId};
pub use optim::{lr_schedule, MultiStepSchedule, SgdMomentum};
pub use params::ParamStore;
pub use tensor::Tensor;
