//! Grid containers, file formats and the image operations shared by every
//! other stage.

pub mod fmap;
mod maps;
pub mod ops;
pub mod pnm;

pub use fmap::{read_tensor, write_tensor, Tensor, TensorData};
pub use maps::{FeatureMap, LabelField, Mask, MaskClass, RgbImage, ScalarMap};
pub use ops::{builtin_features, gradient_magnitude, to_gray};
