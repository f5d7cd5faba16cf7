//! Discrete Leray projector.
//!
//! `Πf = f − ∇q` where `q` solves the cell-centred Neumann Poisson problem
//! `div ∇q = div f` with zero mean. The Neumann Laplacian `div ∘ ∇` is a
//! Kronecker sum of 1-D second-difference matrices that are diagonalized by
//! the orthonormal DCT-II, so the solve is exact up to rounding.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::DMatrix;

use super::grid::{CellField, MacGrid, StaggeredField};
use super::ops::{divergence, gradient, vector_laplacian};

/// Cached transforms for one grid.
#[derive(Debug, Clone)]
pub struct LerayProjector {
    grid: MacGrid,
    cx: DMatrix<f64>,
    cy: DMatrix<f64>,
    ex: Vec<f64>,
    ey: Vec<f64>,
}

/// Orthonormal DCT-II matrix `C[k, i]` and the Neumann second-difference
/// eigenvalues `−4 sin²(πk / 2n) / h²`.
fn dct_basis(n: usize, h: f64) -> (DMatrix<f64>, Vec<f64>) {
    let nf = n as f64;
    let c = DMatrix::from_fn(n, n, |k, i| {
        let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        s * (PI * k as f64 * (i as f64 + 0.5) / nf).cos()
    });
    let e = (0..n)
        .map(|k| {
            let s = (PI * k as f64 / (2.0 * nf)).sin();
            -4.0 * s * s / (h * h)
        })
        .collect();
    (c, e)
}

impl LerayProjector {
    pub fn new(grid: MacGrid) -> Self {
        let (cx, ex) = dct_basis(grid.nx, grid.hx());
        let (cy, ey) = dct_basis(grid.ny, grid.hy());
        LerayProjector {
            grid,
            cx,
            cy,
            ex,
            ey,
        }
    }

    pub fn grid(&self) -> MacGrid {
        self.grid
    }

    /// Zero-mean solution of the Neumann problem `div ∇q = r`. The mean of
    /// `r` (the incompatible part) is discarded.
    pub fn solve_neumann(&self, r: &CellField) -> CellField {
        let g = self.grid;
        // column-major nx × ny: entry (i, j) = r[j·nx + i]
        let rm = DMatrix::from_column_slice(g.nx, g.ny, &r.q);
        let mut hat = &self.cx * rm * self.cy.transpose();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let d = self.ex[i] + self.ey[j];
                hat[(i, j)] = if i == 0 && j == 0 { 0.0 } else { hat[(i, j)] / d };
            }
        }
        let q = self.cx.transpose() * hat * &self.cy;
        CellField {
            grid: g,
            q: q.as_slice().to_vec(),
        }
    }

    /// `(Πf, q)` with `f_interior = Πf + ∇q`. Boundary normal faces of `f`
    /// are ignored.
    pub fn project(&self, f: &StaggeredField) -> (StaggeredField, CellField) {
        let fi = f.clone().interior();
        let q = self.solve_neumann(&divergence(&fi));
        let mut p = fi;
        p.axpy(-1.0, &gradient(&q));
        (p, q)
    }

    /// Stokes operator `ΠΔf`.
    pub fn stokes_apply(&self, f: &StaggeredField) -> StaggeredField {
        self.project(&vector_laplacian(f)).0
    }
}

/// One-shot projection; see [`LerayProjector::project`].
pub fn leray_project(f: &StaggeredField) -> (StaggeredField, CellField) {
    LerayProjector::new(f.grid).project(f)
}

/// One-shot Stokes operator `ΠΔf`.
pub fn stokes_apply(f: &StaggeredField) -> StaggeredField {
    LerayProjector::new(f.grid).stokes_apply(f)
}

/// Relative commutator defect `‖ΠΔf − ΔΠf‖ / ‖Δf‖` (interior faces).
pub fn commutator_defect(p: &LerayProjector, f: &StaggeredField) -> f64 {
    let a = p.stokes_apply(f);
    let b = vector_laplacian(&p.project(f).0);
    let scale = vector_laplacian(f).norm();
    if scale == 0.0 {
        0.0
    } else {
        a.sub(&b).norm() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stokes::ops::curl;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn unit(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_field(g: MacGrid, seed: u64) -> StaggeredField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = StaggeredField::zeros(g);
        f.u.iter_mut().for_each(|x| *x = unit(&mut rng));
        f.v.iter_mut().for_each(|x| *x = unit(&mut rng));
        f.interior()
    }

    fn random_mean_zero(g: MacGrid, seed: u64) -> CellField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = CellField::zeros(g);
        c.q.iter_mut().for_each(|x| *x = unit(&mut rng));
        let m = c.mean();
        c.q.iter_mut().for_each(|x| *x -= m);
        c
    }

    #[test]
    fn dct_basis_is_orthonormal_and_diagonalizes() {
        let n = 7;
        let h = 0.3;
        let (c, e) = dct_basis(n, h);
        let id = &c * c.transpose();
        assert!((id - DMatrix::identity(n, n)).norm() < 1e-13);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = if i == 0 || i == n - 1 { -1.0 } else { -2.0 };
            if i + 1 < n {
                d[(i, i + 1)] = 1.0;
                d[(i + 1, i)] = 1.0;
            }
        }
        d /= h * h;
        let diag = &c * d * c.transpose();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { e[i] } else { 0.0 };
                assert!((diag[(i, j)] - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn annihilates_gradients() {
        let g = MacGrid::new(20, 16, 1.0, 0.8).unwrap();
        let p = LerayProjector::new(g);
        let q0 = random_mean_zero(g, 1);
        let f = gradient(&q0);
        let (pf, q) = p.project(&f);
        assert!(pf.norm() <= 1e-10 * f.norm());
        assert!(q.sub_norm(&q0) <= 1e-10 * q0.norm());
    }

    impl CellField {
        fn sub_norm(&self, o: &CellField) -> f64 {
            let mut d = self.clone();
            d.q.iter_mut().zip(&o.q).for_each(|(a, b)| *a -= b);
            d.norm()
        }
    }

    #[test]
    fn leaves_divergence_free_fields_unchanged() {
        let g = MacGrid::square(18).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi: Vec<f64> = (0..g.n_nodes()).map(|_| unit(&mut rng)).collect();
        let f = curl(&g, &psi);
        let (pf, q) = leray_project(&f);
        assert!(pf.sub(&f).norm() <= 1e-10 * f.norm());
        assert!(q.max_abs() <= 1e-10 * f.max_abs());
    }

    /// Dense Neumann Poisson oracle: assemble `div ∘ ∇` column by column and
    /// solve with the mean constraint appended.
    #[test]
    fn matches_dense_poisson_oracle() {
        let g = MacGrid::square(16).unwrap();
        let n = g.n_cells();
        let mut a = DMatrix::zeros(n + 1, n + 1);
        for k in 0..n {
            let mut e = CellField::zeros(g);
            e.q[k] = 1.0;
            let col = divergence(&gradient(&e));
            for m in 0..n {
                a[(m, k)] = col.q[m];
            }
            a[(n, k)] = 1.0;
            a[(k, n)] = 1.0;
        }
        let f = StaggeredField::from_fn(g, |x, _| x, |_, _| 0.0);
        let r = divergence(&f.clone().interior());
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from_slice(&r.q);
        let sol = a.lu().solve(&rhs).unwrap();
        let q_oracle = CellField {
            grid: g,
            q: sol.rows(0, n).iter().copied().collect(),
        };
        let mut p_oracle = f.clone().interior();
        p_oracle.axpy(-1.0, &gradient(&q_oracle));

        let (pf, q) = leray_project(&f);
        assert!(q.sub_norm(&q_oracle) <= 1e-10 * q_oracle.norm());
        assert!(pf.sub(&p_oracle).norm() <= 1e-10 * f.norm());
        // (x, 0) restricted to interior faces is a discrete gradient
        assert!(pf.norm() <= 1e-10 * f.norm());
        assert!(divergence(&pf).max_abs() <= 1e-10 * f.max_abs());
        assert!(q.sum().abs() <= 1e-10 * n as f64 * q.max_abs());
    }

    #[test]
    fn stokes_operator_is_symmetric_negative() {
        let g = MacGrid::new(14, 12, 1.0, 12.0 / 14.0).unwrap();
        let p = LerayProjector::new(g);
        let f = p.project(&random_field(g, 21)).0;
        let w = p.project(&random_field(g, 22)).0;
        let a = p.stokes_apply(&f).dot(&w);
        let b = f.dot(&p.stokes_apply(&w));
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
        assert!(p.stokes_apply(&f).dot(&f) < 0.0);
        assert_eq!(stokes_apply(&StaggeredField::zeros(g)).max_abs(), 0.0);
        let c = commutator_defect(&p, &random_field(g, 23));
        assert!(c.is_finite() && c > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn projector_algebra(seed in any::<u64>(), nx in 3usize..24, ny in 3usize..24) {
            let g = MacGrid::new(nx, ny, 1.0, ny as f64 / nx as f64).unwrap();
            let p = LerayProjector::new(g);
            let f = random_field(g, seed);
            let w = random_field(g, seed.wrapping_add(1));
            let (pf, q) = p.project(&f);
            let ppf = p.project(&pf).0;
            prop_assert!(ppf.sub(&pf).norm() <= 1e-10 * f.norm());
            prop_assert!(divergence(&pf).norm() <= 1e-10 * f.norm() * (nx.max(ny) as f64));
            let pw = p.project(&w).0;
            let (a, b) = (pf.dot(&w), f.dot(&pw));
            prop_assert!((a - b).abs() <= 1e-10 * f.norm() * w.norm());
            prop_assert!(q.sum().abs() <= 1e-10 * (nx * ny) as f64 * q.max_abs());
        }
    }
}
