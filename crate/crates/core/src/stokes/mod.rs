//! Divergence-free field calculus on rectangles: MAC staggered grid, Leray
//! projector, Stokes operator and its eigenmodes.

mod eigen;
mod grid;
mod modal;
mod ops;
mod projector;

pub use eigen::{
    stokes_eigenpairs, stokes_eigenpairs_dense, stokes_eigenpairs_with, EigenOptions, EigenPair,
    StokesPencil, EIGEN_RESIDUAL_TOL,
};
pub use grid::{interior_len, CellField, MacGrid, PressureField, StaggeredField};
pub use modal::{damped_norm_sq, damping_matrix, face_damping, ModalSystem};
pub use ops::{curl, curl_transpose, divergence, grad_norm_sq, gradient, node_index, vector_laplacian};
pub use projector::{commutator_defect, leray_project, stokes_apply, LerayProjector};
