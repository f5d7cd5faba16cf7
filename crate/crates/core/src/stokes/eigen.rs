//! Lowest eigenpairs of the discrete Stokes operator `−ΠΔ`.
//!
//! Divergence-free Dirichlet fields on the MAC grid are exactly the curls of
//! nodal stream functions vanishing on the boundary, so the restricted
//! eigenproblem becomes the banded symmetric pencil
//!
//! ```text
//! K ψ = λ M ψ,   K = Cᵀ(−Δ)C,   M = CᵀC   (C = curl, weighted inner products)
//! ```
//!
//! solved by block shift-invert Krylov iteration with full
//! M-reorthogonalization and thick restarts. A dense eigensolve of the
//! projected operator `Π(−Δ)Π` on all faces provides an independent route for
//! small grids.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::grid::{interior_len, CellField, MacGrid, StaggeredField};
use super::ops::{curl, curl_transpose, node_index, vector_laplacian};
use super::projector::LerayProjector;
use crate::banded::{assemble_by_probing, BandCholesky, BandedSym, DofLayout};
use crate::error::{bail, Result};

/// Required bound on `‖−ΠΔφ − λφ‖`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Pencil residual below which a stalled iteration is handed to the direct
/// residual check instead of being reported as non-convergent.
const STAGNATION_ACCEPT: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// Eigenvalue of `−ΠΔ`.
    pub lambda: f64,
    /// Unit-norm, divergence-free eigenfield.
    pub phi: StaggeredField,
    /// Pressure from projecting `Δφ`: `Δφ = −λφ + ∇q`.
    pub pressure: CellField,
    /// `‖−ΠΔφ − λφ‖`.
    pub residual: f64,
}

impl EigenPair {
    /// Semiclassical parameter `h = λ^{−1/2}`.
    pub fn h(&self) -> f64 {
        1.0 / self.lambda.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Convergence threshold on the Stokes residual of each Ritz pair.
    pub tol: f64,
    pub max_restarts: usize,
    /// Seed of the random starting block.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-9,
            max_restarts: 60,
            seed: 0x5eed,
        }
    }
}

struct NodeLayout(MacGrid);

impl DofLayout for NodeLayout {
    fn len(&self) -> usize {
        self.0.n_nodes()
    }
    fn components(&self) -> usize {
        1
    }
    fn position(&self, k: usize) -> (i64, i64, usize) {
        let w = self.0.nx - 1;
        ((k % w + 1) as i64, (k / w + 1) as i64, 0)
    }
    fn index(&self, i: i64, j: i64, _c: usize) -> Option<usize> {
        let g = &self.0;
        (i >= 1 && j >= 1 && i < g.nx as i64 && j < g.ny as i64)
            .then(|| node_index(g, i as usize, j as usize))
    }
}

/// Stiffness and mass matrices of the stream-function pencil.
pub struct StokesPencil {
    pub grid: MacGrid,
    pub k: BandedSym,
    pub m: BandedSym,
}

impl StokesPencil {
    pub fn assemble(grid: MacGrid) -> Self {
        let w = grid.cell_area();
        let layout = NodeLayout(grid);
        let k = assemble_by_probing(&layout, 2, |psi, out| {
            let lf = vector_laplacian(&curl(&grid, psi));
            for (o, c) in out.iter_mut().zip(curl_transpose(&lf)) {
                *o = -w * c;
            }
        });
        let m = assemble_by_probing(&layout, 1, |psi, out| {
            for (o, c) in out.iter_mut().zip(curl_transpose(&curl(&grid, psi))) {
                *o = w * c;
            }
        });
        StokesPencil { grid, k, m }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Growing M-orthonormal basis with cached `M·V` and `K·V`.
struct Basis {
    n: usize,
    m: usize,
    v: DMatrix<f64>,
    mv: DMatrix<f64>,
    kv: DMatrix<f64>,
}

impl Basis {
    fn new(n: usize, cap: usize) -> Self {
        Basis {
            n,
            m: 0,
            v: DMatrix::zeros(n, cap),
            mv: DMatrix::zeros(n, cap),
            kv: DMatrix::zeros(n, cap),
        }
    }

    fn cap(&self) -> usize {
        self.v.ncols()
    }

    /// M-orthogonalize `w` against the basis (twice) and append it. Returns
    /// false if `w` is numerically dependent.
    fn push(&mut self, mut w: DVector<f64>, pencil: &StokesPencil) -> bool {
        let before = {
            let mut mw = vec![0.0; self.n];
            pencil.m.matvec(w.as_slice(), &mut mw);
            w.dot(&DVector::from_vec(mw)).max(0.0).sqrt()
        };
        if before == 0.0 {
            return false;
        }
        for _ in 0..2 {
            if self.m > 0 {
                let c = self.mv.columns(0, self.m).tr_mul(&w);
                w -= self.v.columns(0, self.m) * c;
            }
        }
        let mut mw = vec![0.0; self.n];
        pencil.m.matvec(w.as_slice(), &mut mw);
        let nrm = w.dot(&DVector::from_column_slice(&mw)).max(0.0).sqrt();
        if !(nrm > 1e-10 * before) {
            return false;
        }
        let mut kw = vec![0.0; self.n];
        pencil.k.matvec(w.as_slice(), &mut kw);
        let col = self.m;
        self.v.set_column(col, &(w / nrm));
        self.mv
            .set_column(col, &(DVector::from_vec(mw) / nrm));
        self.kv
            .set_column(col, &(DVector::from_vec(kw) / nrm));
        self.m += 1;
        true
    }
}

/// Lowest `count` eigenpairs with default options.
pub fn stokes_eigenpairs(grid: MacGrid, count: usize) -> Result<Vec<EigenPair>> {
    stokes_eigenpairs_with(grid, count, &EigenOptions::default())
}

pub fn stokes_eigenpairs_with(
    grid: MacGrid,
    count: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    let n = grid.n_nodes();
    if count == 0 {
        return Ok(Vec::new());
    }
    if count > n {
        bail!(
            Precondition,
            "requested {count} eigenpairs but the divergence-free subspace has dimension {n}"
        );
    }
    let pencil = StokesPencil::assemble(grid);
    let kc = pencil.k.cholesky()?;
    let mc = pencil.m.cholesky()?;
    let (vals, vecs) = match krylov(&pencil, &kc, &mc, count, opts) {
        Ok(r) => r,
        Err(e) if grid.nx <= 24 && grid.ny <= 24 => {
            let _ = e;
            return stokes_eigenpairs_dense(grid, count);
        }
        Err(e) => return Err(e),
    };
    let proj = LerayProjector::new(grid);
    let mut pairs = Vec::with_capacity(count);
    for (k, _theta) in vals.iter().enumerate() {
        let psi: Vec<f64> = vecs.column(k).iter().copied().collect();
        let phi = curl(&grid, &psi);
        let pair = finish_pair(&proj, phi);
        if !(pair.residual <= EIGEN_RESIDUAL_TOL) {
            bail!(
                Numerical,
                "eigenpair {k} has Stokes residual {:e} above {EIGEN_RESIDUAL_TOL:e}",
                pair.residual
            );
        }
        pairs.push(pair);
    }
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(pairs)
}

/// Normalize, fix the sign, and evaluate `λ`, pressure and residual directly
/// on the grid.
fn finish_pair(proj: &LerayProjector, phi: StaggeredField) -> EigenPair {
    let nrm = phi.norm();
    let mut phi = phi.scaled(1.0 / nrm);
    let big = phi
        .u
        .iter()
        .chain(&phi.v)
        .copied()
        .fold(0.0f64, |b, x| if x.abs() > b.abs() * (1.0 + 1e-9) { x } else { b });
    if big < 0.0 {
        phi.scale(-1.0);
    }
    let lap = vector_laplacian(&phi);
    let lambda = -lap.dot(&phi);
    let (plap, pressure) = proj.project(&lap);
    let mut r = plap;
    r.axpy(lambda, &phi);
    EigenPair {
        lambda,
        residual: r.norm(),
        phi,
        pressure,
    }
}

type Ritz = (Vec<f64>, DMatrix<f64>);

fn krylov(
    pencil: &StokesPencil,
    kc: &BandCholesky,
    mc: &BandCholesky,
    count: usize,
    opts: &EigenOptions,
) -> Result<Ritz> {
    let n = pencil.k.dim();
    let keep = (count + (count / 4).max(8)).min(n);
    let cap = (keep + keep.max(40)).min(n);
    // rounding floor of the pencil residual grows with the grid
    let tol = (opts.tol * (n as f64 / 4000.0).max(1.0).powf(1.5)).min(0.4 * EIGEN_RESIDUAL_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis::new(n, cap);

    // shift-invert application S = K⁻¹M
    let apply = |x: &[f64]| -> DVector<f64> {
        let mut y = vec![0.0; n];
        pencil.m.matvec(x, &mut y);
        kc.solve_in_place(&mut y);
        DVector::from_vec(y)
    };
    let random_vec = |rng: &mut ChaCha8Rng| DVector::from_fn(n, |_, _| random_unit(rng));

    let mut block: Vec<DVector<f64>> = (0..6.min(cap)).map(|_| random_vec(&mut rng)).collect();
    let mut worst = f64::INFINITY;
    // stagnation tracking: the pencil residual has a rounding floor that
    // grows with the grid, so progress is judged relative to the best so far
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    for restart in 0..=opts.max_restarts {
        // expand
        while basis.m < basis.cap() {
            let mut next = Vec::with_capacity(block.len());
            for x in &block {
                if basis.m == basis.cap() {
                    break;
                }
                let w = apply(x.as_slice());
                if basis.push(w, pencil) {
                    next.push(basis.v.column(basis.m - 1).into_owned());
                } else {
                    // breakdown: continue from a fresh random direction
                    let mut tries = 0;
                    while !basis.push(random_vec(&mut rng), pencil) {
                        tries += 1;
                        if tries > 10 {
                            bail!(Numerical, "Krylov basis cannot be extended at size {}", basis.m);
                        }
                    }
                    next.push(basis.v.column(basis.m - 1).into_owned());
                }
            }
            if next.is_empty() {
                break;
            }
            block = next;
        }

        // Rayleigh–Ritz
        let m = basis.m;
        let vm = basis.v.columns(0, m);
        let mut h = vm.tr_mul(&basis.kv.columns(0, m));
        h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let kk = keep.min(m);
        let q = DMatrix::from_fn(m, kk, |r, c| eig.eigenvectors[(r, order[c])]);
        let mut theta: Vec<f64> = order[..kk].iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut y = &vm * &q;
        let mut my = basis.mv.columns(0, m) * &q;
        let mut ky = basis.kv.columns(0, m) * &q;

        let residuals = |theta: &[f64], ky: &DMatrix<f64>, my: &DMatrix<f64>| -> Vec<f64> {
            (0..count)
                .map(|i| {
                    let r: DVector<f64> = ky.column(i) - my.column(i) * theta[i];
                    let mut z = r.as_slice().to_vec();
                    mc.solve_in_place(&mut z);
                    r.dot(&DVector::from_vec(z)).max(0.0).sqrt()
                })
                .collect()
        };
        let mut res = residuals(&theta, &ky, &my);
        if res.iter().all(|r| *r <= STAGNATION_ACCEPT) {
            let p = polish(pencil, kc, &y)?;
            theta = p.theta;
            y = p.y;
            ky = p.ky;
            my = p.my;
            res = residuals(&theta, &ky, &my);
        }
        worst = res.iter().fold(0.0f64, |a, b| a.max(*b));
        let unconverged: Vec<usize> = (0..count).filter(|&i| !(res[i] <= tol)).collect();
        if worst < 0.5 * best {
            best = worst;
            stalled = 0;
        } else {
            stalled += 1;
        }
        let stagnated = stalled >= 3 && worst <= STAGNATION_ACCEPT;
        if unconverged.is_empty() || m == n || stagnated {
            return Ok((theta[..count].to_vec(), y.columns(0, count).into_owned()));
        }
        if restart == opts.max_restarts {
            break;
        }

        // thick restart from the kept Ritz vectors
        basis.v.columns_mut(0, kk).copy_from(&y);
        basis.mv.columns_mut(0, kk).copy_from(&my);
        basis.kv.columns_mut(0, kk).copy_from(&ky);
        basis.m = kk;
        let room = basis.cap() - kk;
        block = unconverged
            .iter()
            .take(room.max(1))
            .map(|&i| y.column(i).into_owned())
            .collect();
    }
    Err(crate::Error::Numerical(format!(
        "shift-invert Krylov did not converge after {} restarts (basis {cap}, worst residual {worst:e}, tol {tol:e})",
        opts.max_restarts
    )))
}

struct Polished {
    theta: Vec<f64>,
    y: DMatrix<f64>,
    ky: DMatrix<f64>,
    my: DMatrix<f64>,
}

/// One shift-invert step on the Ritz block followed by Rayleigh–Ritz on its
/// span. Damps the high-frequency rounding noise that reorthogonalization
/// leaves in late Krylov vectors.
fn polish(pencil: &StokesPencil, kc: &BandCholesky, y: &DMatrix<f64>) -> Result<Polished> {
    let (n, c) = y.shape();
    let mut z = DMatrix::zeros(n, c);
    let mut kz = DMatrix::zeros(n, c);
    let mut mz = DMatrix::zeros(n, c);
    let mut buf = vec![0.0; n];
    for j in 0..c {
        pencil.m.matvec(y.column(j).as_slice(), &mut buf);
        kc.solve_in_place(&mut buf);
        z.set_column(j, &DVector::from_column_slice(&buf));
        pencil.k.matvec(&buf, kz.column_mut(j).as_mut_slice());
        pencil.m.matvec(&buf, mz.column_mut(j).as_mut_slice());
    }
    let a = z.tr_mul(&kz);
    let b = z.tr_mul(&mz);
    let a = (&a + a.transpose()) * 0.5;
    let b = (&b + b.transpose()) * 0.5;
    let Some(chol) = b.cholesky() else {
        bail!(Numerical, "polished Ritz block lost rank");
    };
    let linv = chol.l().try_inverse().expect("triangular factor of SPD matrix");
    let red = &linv * a * linv.transpose();
    let red = (&red + red.transpose()) * 0.5;
    let eig = SymmetricEigen::new(red);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let q = DMatrix::from_fn(c, c, |r, k| eig.eigenvectors[(r, order[k])]);
    let coef = linv.transpose() * q;
    Ok(Polished {
        theta: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        y: z * &coef,
        ky: kz * &coef,
        my: mz * &coef,
    })
}

/// Dense route: eigendecomposition of `Π(−Δ)Π` on all interior faces,
/// discarding the gradient null space. Intended for grids with at most a few
/// thousand faces.
pub fn stokes_eigenpairs_dense(grid: MacGrid, count: usize) -> Result<Vec<EigenPair>> {
    let n = grid.n_nodes();
    if count > n {
        bail!(
            Precondition,
            "requested {count} eigenpairs but the divergence-free subspace has dimension {n}"
        );
    }
    let d = interior_len(&grid);
    let proj = LerayProjector::new(grid);
    let mut a = DMatrix::zeros(d, d);
    let mut e = vec![0.0; d];
    for c in 0..d {
        e[c] = 1.0;
        let f = StaggeredField::from_interior_values(grid, &e);
        e[c] = 0.0;
        let pf = proj.project(&f).0;
        let col = proj.project(&vector_laplacian(&pf)).0.interior_values();
        for (r, val) in col.into_iter().enumerate() {
            a[(r, c)] = -val;
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut order: Vec<usize> = (0..d)
        .filter(|&i| eig.eigenvalues[i] > 1e-9 * top)
        .collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if order.len() < count {
        bail!(
            Numerical,
            "dense route found only {} nonzero eigenvalues, expected {n}",
            order.len()
        );
    }
    let mut pairs = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        let x: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let phi = StaggeredField::from_interior_values(grid, &x);
        pairs.push(finish_pair(&proj, phi));
    }
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(pairs)
}
