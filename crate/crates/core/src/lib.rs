//! Product-quantized (PQ) layer execution and accelerator modelling.
//!
//! A PQ layer replaces the matrix product of an unrolled convolution or
//! linear layer with table lookups: every `l_s`-long sub-column of the
//! unrolled input is matched against a small bank of prototypes, and the
//! dot products between weights and prototypes are read from a
//! precomputed table instead of being multiplied out.
//!
//! Modules:
//!
//! * [`shape`]: layer geometry, unrolled dimensions and subspace layout.
//! * [`encoder`]: im2col, distances, hard/soft encoding, prototype fitting,
//!   lookup-table construction and the optional corrector network.
//! * [`inference`]: PQ and dense forward execution and error metrics.
//! * [`quantizer`]: post-training affine quantization of prototypes and
//!   lookup tables, with a saturating 16-bit accumulator.
//! * [`perfmodel`]: the analytical cycle/latency/footprint model and the
//!   parameter sweep engine.

pub mod encoder;
pub mod error;
pub mod inference;
pub mod perfmodel;
pub mod quantizer;
pub mod shape;
pub mod tensor;

pub use error::{PqaError, Result};
pub use shape::{
    derive_unrolled_dims, subspace_layout, LayerKind, LayerSpec, Metric, PQConfig,
    SubspaceLayout, UnrolledDims,
};
pub use tensor::{Matrix, Tensor3};
