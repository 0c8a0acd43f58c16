//! Graph construction, normalization, eigendecomposition and kernel
//! frequency responses.
//!
//! Frequencies are eigenvalues `λ` of `ℒ = I - Ã`. A kernel that is a
//! polynomial `q(Ã)` is diagonal in any eigenbasis of `ℒ` and has response
//! `q(1 - λ)` there.

mod eigen;
mod graph;
mod response;

pub use eigen::{eigendecompose, SpectralDecomposition, OFF_DIAGONAL_TOL};
pub use graph::{laplacian, normalize_adjacency, normalized_laplacian, ModalityGraph, SYMMETRY_TOL};
pub use response::{
    block_kernel, block_kernel_coeffs, combined_kernel_coeffs, combined_kernel_response, eval_poly,
    frequency_response, gcn_profile, high_kernel_coeffs, high_kernel_response, highpass_kernel,
    low_kernel_coeffs, low_kernel_response, mffbm_kernels, poly_kernel, quoted_combined_response,
    FrequencyResponse, HighPassSign, TheoremKernels,
};
