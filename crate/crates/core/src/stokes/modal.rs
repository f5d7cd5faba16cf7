//! Truncated eigenbasis with the damping coupling matrix.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use super::eigen::EigenPair;
use super::grid::{MacGrid, StaggeredField};
use crate::error::{bail, Result};
use crate::geometry::DampingProfile;

/// Face-centre quadrature of `B_jk = ∫ a φ_j·φ_k dx`. Symmetric positive
/// semidefinite by construction (a weighted Gram matrix).
pub fn damping_matrix(pairs: &[EigenPair], a: &DampingProfile) -> DMatrix<f64> {
    let n = pairs.len();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = pairs[0].phi.grid;
    let weights = face_damping(&g, a);
    let rows = weights.len();
    // columns √a·φ_k over interior faces
    let mut w = DMatrix::zeros(rows, n);
    for (k, p) in pairs.iter().enumerate() {
        for (r, (x, a)) in p.phi.interior_values().iter().zip(&weights).enumerate() {
            w[(r, k)] = x * a.sqrt();
        }
    }
    let mut b = w.tr_mul(&w) * g.cell_area();
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = s;
            b[(j, i)] = s;
        }
    }
    b
}

/// Damping coefficient at interior faces, ordered as
/// [`StaggeredField::interior_values`].
pub fn face_damping(g: &MacGrid, a: &DampingProfile) -> Vec<f64> {
    let domain = g.domain();
    let mut out = Vec::with_capacity(super::grid::interior_len(g));
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.push(a.value(&domain, &g.u_position(i, j)));
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.push(a.value(&domain, &g.v_position(i, j)));
        }
    }
    out
}

/// `‖a^{1/2} f‖²` with the same quadrature as [`damping_matrix`].
pub fn damped_norm_sq(f: &StaggeredField, a: &DampingProfile) -> f64 {
    let g = f.grid;
    let w = face_damping(&g, a);
    f.interior_values()
        .iter()
        .zip(&w)
        .map(|(x, a)| a * x * x)
        .sum::<f64>()
        * g.cell_area()
}

/// Modal reduction of the damped Stokes system: `ü = −Λu − Bu̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSystem {
    /// Eigenpairs in ascending order; empty for synthetic systems.
    pub pairs: Vec<EigenPair>,
    pub lambda: Vec<f64>,
    pub b: DMatrix<f64>,
    pub a_ref: Option<DampingProfile>,
}

impl ModalSystem {
    /// Build from eigenpairs and a damping profile on the pairs' grid.
    pub fn new(pairs: Vec<EigenPair>, a: &DampingProfile) -> Result<Self> {
        if pairs.is_empty() {
            bail!(Precondition, "modal system needs at least one eigenpair");
        }
        let b = damping_matrix(&pairs, a);
        let lambda = pairs.iter().map(|p| p.lambda).collect();
        let ms = ModalSystem {
            pairs,
            lambda,
            b,
            a_ref: Some(a.clone()),
        };
        ms.validate()?;
        Ok(ms)
    }

    /// Synthetic system from eigenvalues and a damping matrix.
    pub fn from_parts(lambda: Vec<f64>, b: DMatrix<f64>) -> Result<Self> {
        let ms = ModalSystem {
            pairs: Vec::new(),
            lambda,
            b,
            a_ref: None,
        };
        ms.validate()?;
        Ok(ms)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lambda.len();
        if n == 0 {
            bail!(Precondition, "modal system needs at least one mode");
        }
        if self.b.nrows() != n || self.b.ncols() != n {
            bail!(
                Precondition,
                "damping matrix is {}x{}, expected {n}x{n}",
                self.b.nrows(),
                self.b.ncols()
            );
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            bail!(Precondition, "eigenvalue {l} is not positive");
        }
        let asym = (&self.b - self.b.transpose()).amax();
        if asym > 1e-12 * self.b.amax().max(1.0) {
            bail!(Precondition, "damping matrix not symmetric (defect {asym:e})");
        }
        if (0..n).any(|i| self.b[(i, i)] < 0.0) {
            bail!(Precondition, "damping matrix has a negative diagonal entry");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn grid(&self) -> Option<MacGrid> {
        self.pairs.first().map(|p| p.phi.grid)
    }

    /// Same modes, damping matrix replaced.
    pub fn with_damping(&self, b: DMatrix<f64>) -> Result<Self> {
        let ms = ModalSystem {
            b,
            ..self.clone()
        };
        ms.validate()?;
        Ok(ms)
    }

    /// Undamped copy.
    pub fn undamped(&self) -> Self {
        let n = self.len();
        ModalSystem {
            b: DMatrix::zeros(n, n),
            ..self.clone()
        }
    }

    /// Smallest eigenvalue of `B`.
    pub fn min_damping_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.b.clone()).eigenvalues.min()
    }

    /// `Σ c_k φ_k` on the grid. Panics for synthetic systems.
    pub fn reconstruct(&self, coeffs: &[f64]) -> StaggeredField {
        let g = self.grid().expect("reconstruction needs eigenfields");
        let mut f = StaggeredField::zeros(g);
        for (c, p) in coeffs.iter().zip(&self.pairs) {
            f.axpy(*c, &p.phi);
        }
        f
    }

    /// L² projection of a field onto the modes, `c_k = ⟨f, φ_k⟩`.
    pub fn coefficients(&self, f: &StaggeredField) -> Vec<f64> {
        self.pairs.iter().map(|p| p.phi.dot(f)).collect()
    }
}
