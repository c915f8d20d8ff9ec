//! Dense `f64` tensors, a reverse-mode differentiation tape and Adam.

pub mod adam;
pub mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use adam::{clip_grad_norm, grad_norm, AdamConfig, AdamState};
pub use params::{ParamId, ParamSet};
pub use tape::{sigmoid, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not match {len} data elements")]
    ShapeData { shape: Vec<usize>, len: usize },
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("every target position is padding")]
    DegenerateBatch,
    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),
    #[error("{0} of an empty operand list")]
    Empty(&'static str),
}
