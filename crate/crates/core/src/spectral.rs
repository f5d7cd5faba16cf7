//! Spectrum and resolvent of the damped generator, semiclassical
//! observability constants and boundary-trace diagnostics of eigenmodes.

use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::geometry::DampingProfile;
use crate::stokes::{damped_norm_sq, divergence, gradient, vector_laplacian, CellField, EigenPair, ModalSystem};

/// Generator `[[0, I], [−Λ, −B]]` of the modal damped system together with
/// the energy Gram matrix `diag(Λ, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampedGenerator {
    pub lambda: Vec<f64>,
    pub b: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub gram: DMatrix<f64>,
}

impl DampedGenerator {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// The generator in energy-orthonormal coordinates, `R A R⁻¹` with
    /// `R = diag(√Λ, I)` the Cholesky factor of the Gram matrix:
    /// `[[0, √Λ], [−√Λ, −B]]`. Its Euclidean singular values are the
    /// energy-norm singular values of `A`.
    pub fn energy_congruent(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (k, l) in self.lambda.iter().enumerate() {
            let s = l.sqrt();
            m[(k, n + k)] = s;
            m[(n + k, k)] = -s;
        }
        m.view_mut((n, n), (n, n)).copy_from(&(-&self.b));
        m
    }
}

pub fn assemble_generator(ms: &ModalSystem) -> DampedGenerator {
    let n = ms.len();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut gram = DMatrix::zeros(2 * n, 2 * n);
    for (k, l) in ms.lambda.iter().enumerate() {
        a[(k, n + k)] = 1.0;
        a[(n + k, k)] = -l;
        gram[(k, k)] = *l;
        gram[(n + k, n + k)] = 1.0;
    }
    a.view_mut((n, n), (n, n)).copy_from(&(-&ms.b));
    DampedGenerator {
        lambda: ms.lambda.clone(),
        b: ms.b.clone(),
        a,
        gram,
    }
}

/// One point of an imaginary-axis resolvent sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventPoint {
    pub sigma: f64,
    /// Smallest energy-norm singular value of `A − iσ`.
    pub smin: f64,
    /// `1/smin`; `None` when `smin` is zero to working precision.
    pub resolvent_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted by real part descending, then imaginary part ascending.
    pub eigenvalues: Vec<Complex64>,
    pub spectral_abscissa: f64,
    pub resolvent_curve: Vec<ResolventPoint>,
    pub predicted_decay: f64,
}

const SCHUR_MAX_ITER: usize = 100_000;

/// Full dense eigensolve of the generator.
pub fn spectrum(g: &DampedGenerator) -> Result<SpectrumReport> {
    if g.is_empty() {
        bail!(Precondition, "empty generator");
    }
    let Some(schur) = Schur::try_new(g.a.clone(), f64::EPSILON, SCHUR_MAX_ITER) else {
        bail!(Numerical, "Schur iteration did not converge for a {0}x{0} generator", g.a.nrows());
    };
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    if eigenvalues.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        bail!(Numerical, "non-finite generator eigenvalue");
    }
    eigenvalues.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(Ordering::Equal))
    });
    let spectral_abscissa = eigenvalues.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re));
    let mut report = SpectrumReport {
        eigenvalues,
        spectral_abscissa,
        resolvent_curve: Vec::new(),
        predicted_decay: 0.0,
    };
    report.predicted_decay = predicted_decay(&report);
    Ok(report)
}

/// Energy decay-rate prediction `2|abscissa|`, or 0 when the abscissa is not
/// negative.
pub fn predicted_decay(report: &SpectrumReport) -> f64 {
    if report.spectral_abscissa < 0.0 {
        -2.0 * report.spectral_abscissa
    } else {
        0.0
    }
}

/// `smin(A − iσ)` in the energy norm for each `σ`.
pub fn resolvent_sweep(g: &DampedGenerator, sigmas: &[f64]) -> Result<Vec<ResolventPoint>> {
    if let Some(s) = sigmas.iter().find(|s| !s.is_finite()) {
        bail!(Config, "non-finite frequency {s} in resolvent sweep");
    }
    let m = g.energy_congruent();
    let scale = m.amax().max(1.0);
    let mc: DMatrix<Complex64> = m.map(|x| Complex64::new(x, 0.0));
    let mut out = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut shifted = mc.clone();
        for k in 0..shifted.nrows() {
            shifted[(k, k)] -= Complex64::new(0.0, sigma);
        }
        let sv = shifted.singular_values();
        let mut smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if !smin.is_finite() {
            bail!(Numerical, "singular value decomposition failed at sigma = {sigma}");
        }
        if smin <= 64.0 * f64::EPSILON * (scale + sigma.abs()) {
            smin = 0.0;
        }
        out.push(ResolventPoint {
            sigma,
            smin,
            resolvent_norm: (smin > 0.0).then(|| 1.0 / smin),
        });
    }
    Ok(out)
}

/// Observability constant of one eigenmode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalConstant {
    /// Position of the mode in the input list.
    pub index: usize,
    pub h: f64,
    /// `‖φ‖ / ‖a^{1/2}φ‖`; infinite when `a` vanishes on the mode.
    pub obs_constant: f64,
}

/// Per-mode constants `C_k = 1/‖a^{1/2}φ_k‖`, in ascending `h`.
pub fn semiclassical_constants(pairs: &[EigenPair], a: &DampingProfile) -> Vec<SemiclassicalConstant> {
    let mut out: Vec<_> = pairs
        .iter()
        .enumerate()
        .map(|(index, p)| SemiclassicalConstant {
            index,
            h: p.h(),
            obs_constant: obs_constant(p, a),
        })
        .collect();
    out.sort_by(|x, y| x.h.partial_cmp(&y.h).unwrap_or(Ordering::Equal).then(x.index.cmp(&y.index)));
    out
}

fn obs_constant(p: &EigenPair, a: &DampingProfile) -> f64 {
    let d = damped_norm_sq(&p.phi, a);
    if d > 0.0 {
        p.phi.norm() / d.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Boundary-trace quantities of a quasimode `(u, q)` with
/// `−h²Δu − u + h∇q = f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeDiagnostics {
    pub h: f64,
    /// `‖h∂_ν u‖` on the boundary.
    pub boundary_flux_norm: f64,
    /// Largest normal component of `h∂_ν u` on the boundary.
    pub normal_component_defect: f64,
    /// `(‖q‖ in the interior, ‖q‖ on the boundary)`.
    pub pressure_norms: (f64, f64),
    /// `‖u‖ / ‖a^{1/2}u‖`.
    pub obs_constant: f64,
}

/// Quasimode pressure of an eigenpair: `h·q` where `Δφ = −λφ + ∇q`.
pub fn quasimode_pressure(pair: &EigenPair) -> CellField {
    pair.pressure.clone().scaled(pair.h())
}

/// `‖−h²Δφ − φ + h∇q‖` with `q` the quasimode pressure.
pub fn quasimode_residual(pair: &EigenPair) -> f64 {
    let h = pair.h();
    let mut r = vector_laplacian(&pair.phi).scaled(-h * h);
    r.axpy(-1.0, &pair.phi);
    r.axpy(h, &gradient(&quasimode_pressure(pair)));
    r.norm()
}

/// Boundary diagnostics on the MAC grid.
///
/// Tangential components of `∂_ν u` use the second-order one-sided
/// difference through the wall value 0 and the two nearest faces. The normal
/// component is the central difference across the wall, with the ghost face
/// fixed by zero divergence of the mirrored ghost cell; it equals half the
/// divergence of the adjacent boundary cell. Pressure traces extrapolate
/// linearly from the two nearest cell centres.
pub fn quasimode_diagnostics(pair: &EigenPair, q: &CellField, a: &DampingProfile) -> QuasimodeDiagnostics {
    let f = &pair.phi;
    let g = f.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let h = pair.h();
    let div = divergence(&f.clone().interior());
    let one_sided = |near: f64, far: f64, d: f64| -(9.0 * near - far) / (3.0 * d);

    let mut flux_sq = 0.0;
    let mut normal_max = 0.0f64;
    let mut trace_sq = 0.0;
    let mut normal = |c: usize, len: f64, flux_sq: &mut f64| {
        let n = h * 0.5 * div.q[c];
        normal_max = normal_max.max(n.abs());
        *flux_sq += len * n * n;
    };

    // bottom and top walls: tangential u at interior x-nodes, normal v at cells
    for (j0, j1) in [(0, 1), (g.ny - 1, g.ny - 2)] {
        for i in 1..g.nx {
            let t = h * one_sided(f.u[g.u_index(i, j0)], f.u[g.u_index(i, j1)], hy);
            flux_sq += hx * t * t;
        }
        for i in 0..g.nx {
            normal(g.cell_index(i, j0), hx, &mut flux_sq);
            let tr = 1.5 * q.q[g.cell_index(i, j0)] - 0.5 * q.q[g.cell_index(i, j1)];
            trace_sq += hx * tr * tr;
        }
    }
    // left and right walls
    for (i0, i1) in [(0, 1), (g.nx - 1, g.nx - 2)] {
        for j in 1..g.ny {
            let t = h * one_sided(f.v[g.v_index(i0, j)], f.v[g.v_index(i1, j)], hx);
            flux_sq += hy * t * t;
        }
        for j in 0..g.ny {
            normal(g.cell_index(i0, j), hy, &mut flux_sq);
            let tr = 1.5 * q.q[g.cell_index(i0, j)] - 0.5 * q.q[g.cell_index(i1, j)];
            trace_sq += hy * tr * tr;
        }
    }

    QuasimodeDiagnostics {
        h,
        boundary_flux_norm: flux_sq.sqrt(),
        normal_component_defect: normal_max,
        pressure_norms: (q.norm(), trace_sq.sqrt()),
        obs_constant: obs_constant(pair, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve, fit_decay, ModalState};
    use crate::geometry::{DampingShape, Side};
    use crate::stokes::{stokes_eigenpairs, MacGrid, StaggeredField};
    use alloc::vec;
    use proptest::prelude::*;

    fn synthetic(lambda: Vec<f64>, b: DMatrix<f64>) -> DampedGenerator {
        assemble_generator(&ModalSystem::from_parts(lambda, b).unwrap())
    }

    fn close(z: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (z.re - re).abs() <= tol && (z.im - im).abs() <= tol
    }

    #[test]
    fn single_mode_examples() {
        let s = spectrum(&synthetic(vec![4.0], DMatrix::zeros(1, 1))).unwrap();
        assert!(close(s.eigenvalues[0], 0.0, -2.0, 1e-10));
        assert!(close(s.eigenvalues[1], 0.0, 2.0, 1e-10));
        assert_eq!(s.predicted_decay, 0.0);

        let s = spectrum(&synthetic(vec![4.0], DMatrix::from_element(1, 1, 0.2))).unwrap();
        let w = 3.99f64.sqrt();
        assert!(close(s.eigenvalues[0], -0.1, -w, 1e-10));
        assert!(close(s.eigenvalues[1], -0.1, w, 1e-10));
        assert!((s.spectral_abscissa + 0.1).abs() < 1e-10);
        assert!((s.predicted_decay - 0.2).abs() < 1e-10);
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut x = seed | 1;
        let m = DMatrix::from_fn(n, n, |_, _| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        &m * m.transpose()
    }

    #[test]
    fn trace_and_uniform_damping() {
        let b = random_psd(5, 3);
        let g = synthetic(vec![3.0, 5.0, 8.0, 13.0, 21.0], b.clone());
        assert!((g.a.trace() + b.trace()).abs() < 1e-12);

        let c = 0.6;
        let lambda = vec![10.0, 20.0, 30.0];
        let s = spectrum(&synthetic(lambda, DMatrix::identity(3, 3) * c)).unwrap();
        assert!((s.spectral_abscissa + c / 2.0).abs() < 1e-10);
        assert!((s.predicted_decay - c).abs() < 1e-10);
        assert!(s.eigenvalues.iter().all(|z| (z.re + c / 2.0).abs() < 1e-10));
    }

    #[test]
    fn resolvent_matches_dense_inverse() {
        let lambda = vec![2.0, 5.0, 9.0];
        let c = 0.4;
        let g = synthetic(lambda.clone(), DMatrix::identity(3, 3) * c);
        let pts = resolvent_sweep(&g, &[0.0, 1.3]).unwrap();
        for p in &pts {
            // ‖(A − iσ)⁻¹‖ in the energy norm = ‖R (A − iσ)⁻¹ R⁻¹‖₂
            let ac = g.a.map(|x| Complex64::new(x, 0.0))
                - DMatrix::<Complex64>::identity(6, 6) * Complex64::new(0.0, p.sigma);
            let inv = ac.try_inverse().unwrap();
            let r = DMatrix::from_fn(6, 6, |i, j| {
                if i != j {
                    0.0
                } else if i < 3 {
                    lambda[i].sqrt()
                } else {
                    1.0
                }
            });
            let rc = r.map(|x| Complex64::new(x, 0.0));
            let ri = r.try_inverse().unwrap().map(|x| Complex64::new(x, 0.0));
            let norm = (rc * inv * ri).singular_values().max();
            let got = p.resolvent_norm.unwrap();
            assert!((got - norm).abs() <= 1e-10 * norm, "{got} vs {norm}");
        }
    }

    #[test]
    fn resolvent_vanishes_on_undamped_frequencies() {
        let g = synthetic(vec![4.0, 9.0], DMatrix::zeros(2, 2));
        let pts = resolvent_sweep(&g, &[2.0, 3.0, 2.5]).unwrap();
        assert_eq!(pts[0].smin, 0.0);
        assert_eq!(pts[0].resolvent_norm, None);
        assert!(pts[1].smin <= 1e-10);
        assert!((pts[2].smin - 0.5).abs() < 1e-12);
        assert!(resolvent_sweep(&g, &[f64::NAN]).is_err());
    }

    #[test]
    fn resolvent_grows_beyond_spectrum() {
        let b = random_psd(4, 11);
        let g = synthetic(vec![1.0, 4.0, 9.0, 16.0], b);
        let top = 10.0 * 4.0;
        let sigmas: Vec<f64> = (0..8).map(|k| top + 10.0 * k as f64).collect();
        let pts = resolvent_sweep(&g, &sigmas).unwrap();
        assert!(pts.windows(2).all(|w| w[1].smin > w[0].smin));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spectral_invariants(seed in any::<u64>(), n in 1usize..6, s in 0.1f64..5.0, sigma in -10.0f64..10.0) {
            let lambda: Vec<f64> = (0..n).map(|k| 1.0 + 3.0 * k as f64 + (seed % 7) as f64).collect();
            let b = random_psd(n, seed);
            let g = synthetic(lambda.clone(), b.clone());
            let rep = spectrum(&g).unwrap();
            // conjugate symmetry
            for z in &rep.eigenvalues {
                let d = rep.eigenvalues.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d <= 1e-10 * (1.0 + z.norm()));
            }
            prop_assert!(rep.spectral_abscissa <= 1e-10);
            // smin bounded by the distance to the spectrum
            let p = resolvent_sweep(&g, &[sigma]).unwrap()[0];
            let dist = rep.eigenvalues.iter().map(|z| (z - Complex64::new(0.0, sigma)).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(p.smin <= dist * (1.0 + 1e-10) + 1e-12);
            // scaling B ↦ sB at assembly level
            let gs = synthetic(lambda, b * s);
            let direct = spectrum(&gs).unwrap();
            let mut scaled_a = g.a.clone();
            scaled_a.view_mut((n, n), (n, n)).scale_mut(s);
            let via = spectrum(&DampedGenerator { a: scaled_a, ..gs.clone() }).unwrap();
            for (x, y) in direct.eigenvalues.iter().zip(&via.eigenvalues) {
                prop_assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()));
            }
        }
    }

    fn pairs(n: usize, count: usize) -> Vec<EigenPair> {
        stokes_eigenpairs(MacGrid::square(n).unwrap(), count).unwrap()
    }

    #[test]
    fn semiclassical_constants_examples() {
        let p = pairs(24, 20);
        let ones = semiclassical_constants(&p, &DampingProfile::uniform(1.0));
        assert!(ones.iter().all(|c| (c.obs_constant - 1.0).abs() < 1e-10));
        assert!(ones.windows(2).all(|w| w[0].h <= w[1].h));
        let zero = semiclassical_constants(&p, &DampingProfile::zero());
        assert!(zero.iter().all(|c| c.obs_constant == f64::INFINITY));

        let collar = DampingProfile::new(DampingShape::BoundaryCollar { width: 0.1 }, 1.0, 0.0).unwrap();
        let strip =
            DampingProfile::new(DampingShape::SideStrip { side: Side::Left, depth: 0.36 }, 1.0, 0.0).unwrap();
        let cc = semiclassical_constants(&p, &collar);
        let cs = semiclassical_constants(&p, &strip);
        let lower = 1.0 / collar.sup().sqrt();
        assert!(cc.iter().chain(&cs).all(|c| c.obs_constant >= lower));
        assert!(cc.iter().all(|c| c.obs_constant.is_finite()));
    }

    #[test]
    fn collar_spectrum_is_stable_and_predicts_decay() {
        let collar = DampingProfile::new(DampingShape::BoundaryCollar { width: 0.2 }, 1.0, 0.0).unwrap();
        let ms = ModalSystem::new(pairs(24, 2), &collar).unwrap();
        let rep = spectrum(&assemble_generator(&ms)).unwrap();
        assert!(rep.spectral_abscissa < 0.0);
        // two-mode cross-check against the time integrator
        let s0 = ModalState::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let (_, trace) = evolve(&ms, &s0, 60.0, 5e-3, true).unwrap();
        let fit = fit_decay(&trace, (0.0, 60.0)).unwrap();
        let pred = rep.predicted_decay;
        assert!((fit.alpha - pred).abs() <= 0.1 * pred, "alpha {} vs {pred}", fit.alpha);
    }

    #[test]
    fn quasimode_diagnostics_examples() {
        let p = pairs(32, 12);
        let a = DampingProfile::uniform(2.0);
        for pair in &p {
            assert!(quasimode_residual(pair) <= 1e-6);
            let q = quasimode_pressure(pair);
            let d = quasimode_diagnostics(pair, &q, &a);
            assert!(d.normal_component_defect <= 1e-6);
            assert!(d.boundary_flux_norm > 0.0 && d.pressure_norms.0 >= 0.0 && d.pressure_norms.1 >= 0.0);
            assert!((d.obs_constant - 0.5f64.sqrt()).abs() < 1e-10);
            assert!(d.boundary_flux_norm < 10.0);
        }
    }

    /// One-sided wall derivative of a smooth Dirichlet field converges at
    /// second order.
    #[test]
    fn wall_derivative_is_second_order() {
        use core::f64::consts::PI;
        let err = |n: usize| {
            let g = MacGrid::square(n).unwrap();
            // stream function ψ = S(x)S(y), S = sin²(π·)
            let s = |t: f64| (PI * t).sin().powi(2);
            let ds = |t: f64| PI * (2.0 * PI * t).sin();
            let f = StaggeredField::dirichlet_from_fn(g, |x, y| s(x) * ds(y), |x, y| -ds(x) * s(y));
            let pair = EigenPair {
                lambda: 1.0,
                phi: f,
                pressure: CellField::zeros(g),
                residual: 0.0,
            };
            let d = quasimode_diagnostics(&pair, &CellField::zeros(g), &DampingProfile::uniform(1.0));
            // exact: |∂_ν u| = 2π² sin²(π·) on each wall, so the norm is √6·π²
            (d.boundary_flux_norm - 6f64.sqrt() * PI * PI).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }
}
