//! Difference operators on the MAC grid.
//!
//! With boundary normal faces held at zero, `gradient` is exactly minus the
//! adjoint of `divergence` and `vector_laplacian` is symmetric negative
//! definite in the interior-face inner product.

use alloc::vec;
use alloc::vec::Vec;

use super::grid::{CellField, MacGrid, StaggeredField};

/// Centred face-difference divergence, one value per cell. Uses every face
/// value, boundary faces included.
pub fn divergence(f: &StaggeredField) -> CellField {
    let g = f.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut d = CellField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            d.q[g.cell_index(i, j)] = (f.u[g.u_index(i + 1, j)] - f.u[g.u_index(i, j)]) / hx
                + (f.v[g.v_index(i, j + 1)] - f.v[g.v_index(i, j)]) / hy;
        }
    }
    d
}

/// Face gradient of a cell field; boundary normal faces are left at zero.
pub fn gradient(q: &CellField) -> StaggeredField {
    let g = q.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut f = StaggeredField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            f.u[g.u_index(i, j)] = (q.q[g.cell_index(i, j)] - q.q[g.cell_index(i - 1, j)]) / hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            f.v[g.v_index(i, j)] = (q.q[g.cell_index(i, j)] - q.q[g.cell_index(i, j - 1)]) / hy;
        }
    }
    f
}

/// Componentwise 5-point Laplacian with homogeneous Dirichlet data.
///
/// Normal-direction neighbours beyond the last interior face are the wall
/// faces themselves (value 0). Tangential neighbours across a wall are ghost
/// values obtained by odd reflection, `ghost = −value`, which puts the zero
/// at the wall midway between them.
pub fn vector_laplacian(f: &StaggeredField) -> StaggeredField {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut out = StaggeredField::zeros(g);

    let u = |i: usize, j: usize| -> f64 {
        if i == 0 || i == nx {
            0.0
        } else {
            f.u[g.u_index(i, j)]
        }
    };
    for j in 0..ny {
        for i in 1..nx {
            let c = u(i, j);
            let lo = if j == 0 { -c } else { u(i, j - 1) };
            let hi = if j + 1 == ny { -c } else { u(i, j + 1) };
            out.u[g.u_index(i, j)] =
                (u(i + 1, j) - 2.0 * c + u(i - 1, j)) * cx + (hi - 2.0 * c + lo) * cy;
        }
    }

    let v = |i: usize, j: usize| -> f64 {
        if j == 0 || j == ny {
            0.0
        } else {
            f.v[g.v_index(i, j)]
        }
    };
    for j in 1..ny {
        for i in 0..nx {
            let c = v(i, j);
            let lo = if i == 0 { -c } else { v(i - 1, j) };
            let hi = if i + 1 == nx { -c } else { v(i + 1, j) };
            out.v[g.v_index(i, j)] =
                (hi - 2.0 * c + lo) * cx + (v(i, j + 1) - 2.0 * c + v(i, j - 1)) * cy;
        }
    }
    out
}

/// Discrete Dirichlet energy `‖∇f‖²`, the sum of squared first differences
/// matching [`vector_laplacian`]: `⟨−Δf, f⟩ = ‖∇f‖²`. Wall differences
/// (value against its ghost) carry half weight.
pub fn grad_norm_sq(f: &StaggeredField) -> f64 {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut s = 0.0;

    let u = |i: usize, j: usize| -> f64 {
        if i == 0 || i == nx {
            0.0
        } else {
            f.u[g.u_index(i, j)]
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            let d = (u(i + 1, j) - u(i, j)) / hx;
            s += d * d;
        }
        if j > 0 {
            for i in 1..nx {
                let d = (u(i, j) - u(i, j - 1)) / hy;
                s += d * d;
            }
        }
    }
    for i in 1..nx {
        let (a, b) = (2.0 * u(i, 0) / hy, 2.0 * u(i, ny - 1) / hy);
        s += 0.5 * (a * a + b * b);
    }

    let v = |i: usize, j: usize| -> f64 {
        if j == 0 || j == ny {
            0.0
        } else {
            f.v[g.v_index(i, j)]
        }
    };
    for i in 0..nx {
        for j in 0..ny {
            let d = (v(i, j + 1) - v(i, j)) / hy;
            s += d * d;
        }
        if i > 0 {
            for j in 1..ny {
                let d = (v(i, j) - v(i - 1, j)) / hx;
                s += d * d;
            }
        }
    }
    for j in 1..ny {
        let (a, b) = (2.0 * v(0, j) / hx, 2.0 * v(nx - 1, j) / hx);
        s += 0.5 * (a * a + b * b);
    }
    s * g.cell_area()
}

/// Index of interior node `(i, j)`, `1 ≤ i < nx`, `1 ≤ j < ny`.
#[inline]
pub fn node_index(g: &MacGrid, i: usize, j: usize) -> usize {
    (j - 1) * (g.nx - 1) + (i - 1)
}

/// Discrete curl of a nodal stream function (zero on boundary nodes):
/// `u = ∂ψ/∂y`, `v = −∂ψ/∂x`. The result is exactly divergence-free and
/// satisfies the Dirichlet condition on normal faces.
pub fn curl(g: &MacGrid, psi: &[f64]) -> StaggeredField {
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let p = |i: usize, j: usize| -> f64 {
        if i == 0 || j == 0 || i == nx || j == ny {
            0.0
        } else {
            psi[node_index(g, i, j)]
        }
    };
    let mut f = StaggeredField::zeros(*g);
    for j in 0..ny {
        for i in 1..nx {
            f.u[g.u_index(i, j)] = (p(i, j + 1) - p(i, j)) / hy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            f.v[g.v_index(i, j)] = -(p(i + 1, j) - p(i, j)) / hx;
        }
    }
    f
}

/// Euclidean transpose of [`curl`] over interior faces.
pub fn curl_transpose(f: &StaggeredField) -> Vec<f64> {
    let g = f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = vec![0.0; g.n_nodes()];
    let mut add = |i: usize, j: usize, val: f64| {
        if i > 0 && j > 0 && i < nx && j < ny {
            out[node_index(&g, i, j)] += val;
        }
    };
    for j in 0..ny {
        for i in 1..nx {
            let w = f.u[g.u_index(i, j)] / hy;
            add(i, j + 1, w);
            add(i, j, -w);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let w = f.v[g.v_index(i, j)] / hx;
            add(i + 1, j, -w);
            add(i, j, w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    pub(crate) fn unit(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_field(g: MacGrid, seed: u64) -> StaggeredField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = StaggeredField::zeros(g);
        f.u.iter_mut().for_each(|x| *x = unit(&mut rng));
        f.v.iter_mut().for_each(|x| *x = unit(&mut rng));
        f.interior()
    }

    fn random_cells(g: MacGrid, seed: u64) -> CellField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = CellField::zeros(g);
        c.q.iter_mut().for_each(|x| *x = unit(&mut rng));
        c
    }

    #[test]
    fn divergence_examples() {
        let g = MacGrid::square(12).unwrap();
        assert_eq!(divergence(&StaggeredField::zeros(g)).max_abs(), 0.0);
        let f = StaggeredField::from_fn(g, |_, y| (3.0 * y).sin(), |_, _| 0.0);
        assert!(divergence(&f).max_abs() < 1e-13);
        let f = StaggeredField::from_fn(g, |x, _| x, |_, _| 0.0);
        let d = divergence(&f);
        assert!(d.q.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gradient_examples() {
        let g = MacGrid::new(10, 14, 1.0, 1.4).unwrap();
        let c = CellField::from_fn(g, |_, _| 2.5);
        assert!(gradient(&c).max_abs() < 1e-13);
        let c = CellField::from_fn(g, |x, _| x);
        let gr = gradient(&c);
        for j in 0..g.ny {
            for i in 1..g.nx {
                assert!((gr.u[g.u_index(i, j)] - 1.0).abs() < 1e-12);
            }
        }
        assert!(gr.v.iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn gradient_is_minus_divergence_adjoint() {
        let g = MacGrid::new(13, 9, 1.3, 0.9).unwrap();
        for seed in 0..5 {
            let q = random_cells(g, seed);
            let f = random_field(g, 100 + seed);
            let lhs = gradient(&q).dot(&f);
            let rhs = -q.dot(&divergence(&f));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        }
    }

    #[test]
    fn laplacian_of_sine_mode() {
        for n in [16usize, 32, 64] {
            let g = MacGrid::square(n).unwrap();
            let s = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
            let f = StaggeredField::dirichlet_from_fn(g, s, s);
            let mut lf = vector_laplacian(&f);
            lf.axpy(2.0 * PI * PI, &f);
            let err = lf.max_abs();
            let h = 1.0 / n as f64;
            assert!(err < 2.0 * PI.powi(4) / 12.0 * h * h * 2.0, "n={n} err={err}");
        }
        let g = MacGrid::square(8).unwrap();
        assert_eq!(vector_laplacian(&StaggeredField::zeros(g)).max_abs(), 0.0);
    }

    #[test]
    fn laplacian_annihilates_affine_away_from_walls() {
        let g = MacGrid::square(16).unwrap();
        let f = StaggeredField::dirichlet_from_fn(g, |x, y| 1.0 + 2.0 * x - y, |x, y| x + 3.0 * y);
        let lf = vector_laplacian(&f);
        for j in 1..g.ny - 1 {
            for i in 2..g.nx - 1 {
                assert!(lf.u[g.u_index(i, j)].abs() < 1e-9);
            }
        }
        for j in 2..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert!(lf.v[g.v_index(i, j)].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curl_is_divergence_free_and_transpose_matches() {
        let g = MacGrid::new(9, 7, 0.9, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi: Vec<f64> = (0..g.n_nodes()).map(|_| unit(&mut rng)).collect();
        let f = curl(&g, &psi);
        assert!(f.is_dirichlet());
        assert!(divergence(&f).max_abs() < 1e-11 * f.max_abs());
        let w = random_field(g, 11);
        let lhs: f64 = f.interior_values().iter().zip(w.interior_values()).map(|(a, b)| a * b).sum();
        let ct = curl_transpose(&w);
        let rhs: f64 = psi.iter().zip(&ct).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn integration_by_parts(seed in any::<u64>(), nx in 3usize..20, ny in 3usize..20) {
            let g = MacGrid::new(nx, ny, 1.0, ny as f64 / nx as f64).unwrap();
            let f = random_field(g, seed);
            let lhs = -vector_laplacian(&f).dot(&f);
            let rhs = grad_norm_sq(&f);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }

        #[test]
        fn laplacian_is_symmetric(seed in any::<u64>(), nx in 3usize..16, ny in 3usize..16) {
            let g = MacGrid::new(nx, ny, 1.0, 1.0).unwrap();
            let f = random_field(g, seed);
            let w = random_field(g, seed ^ 0x5555);
            let a = vector_laplacian(&f).dot(&w);
            let b = f.dot(&vector_laplacian(&w));
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
        }
    }
}
