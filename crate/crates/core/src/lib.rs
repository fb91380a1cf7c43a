//! Pose estimation from multi-RRU 5G channel state information.

pub mod alignment;
pub mod autodiff;
pub mod checks;
pub mod csi;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod synth;
mod io;

pub use alignment::{align_nearest, split, AlignedSample, Split, SplitMode, SplitSpec};
pub use csi::{CsiFrame, FeatureTensor, LabeledFrame, MotionKind, Pose2D, StateTag};
pub use dataset::{read_dataset, write_dataset, Dataset};
pub use error::{Error, Result};
pub use features::{extract_features, WindowConfig};
