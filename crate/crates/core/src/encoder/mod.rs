//! Input unrolling, prototype matching, table construction and fitting.

mod bank;
mod corrector;
mod encode;
mod im2col;
mod kmeans;
mod lut;

pub use bank::PrototypeBank;
pub use corrector::{apply_corrector, fit_corrector, Corrector, CorrectorOptions, CorrectorFit};
pub use encode::{
    compute_distances, encode_hard, encode_hard_with_distances, encode_soft, gather_subvector,
    soft_weights, EncodingResult,
};
pub use im2col::{unroll_im2col, unroll_im2col_grouped, unroll_weights};
pub use kmeans::{fit_prototypes, FitOptions, FitStatus, InitMethod, PrototypeFit};
pub use lut::{build_lut, refit_lut, LutPQ};
