//! Symmetric linear algebra: dense decompositions and matrix-free iterations.

mod eigen;
mod lanczos;
mod matrix;
mod operator;
mod procrustes;

pub use eigen::{
    eig_sym, eig_sym_leading, eig_sym_with, eigenvalues_sym, spectral_norm,
    spectral_norm_dense, EigenDecomposition,
    EigenMethod, JACOBI_MAX_N,
};
pub use matrix::{Matrix, SymMatrix, SYMMETRY_TOL};
pub use operator::{eig_leading_op, spectral_norm_op, Difference, SymOperator};
pub use procrustes::{orthogonal_align, svd_small, OrthogonalMatrix, Svd};
