//! Minimal reverse-mode training engine: tensors, the layer set of a small
//! VGG-style classifier, softmax cross-entropy and Adam.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod ops;
pub mod rng;
pub mod tensor;

pub use adam::AdamState;
pub use layers::{Init, Layer, LayerSpec, Sequential};
pub use rng::{rng_for, Stream};
pub use tensor::{Scalar, Tensor};
