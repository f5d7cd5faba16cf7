//! Symmetric banded matrices with a band Cholesky factorization, and
//! assembly of local grid operators by colored probing.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};

/// Symmetric matrix stored as its lower band: row `i` keeps columns
/// `i − bw ..= i` contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

#[inline]
fn at(bw: usize, i: usize, j: usize) -> usize {
    i * (bw + 1) + (j + bw - i)
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[at(self.bw, i, j)]
        }
    }

    /// Set entry `(i, j)` (and its mirror). Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        self.data[at(self.bw, i, j)] = v;
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &self.data[at(bw, i, j0)..=at(bw, i, i)];
            let mut acc = row[row.len() - 1] * x[i];
            for (off, a) in row[..row.len() - 1].iter().enumerate() {
                let j = j0 + off;
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// `A + shift·D` where `D` is another banded matrix (bandwidths may differ).
    pub fn add_scaled(&self, other: &BandedSym, shift: f64) -> BandedSym {
        let bw = self.bw.max(other.bw);
        let mut out = BandedSym::zeros(self.n, bw);
        for i in 0..self.n {
            for j in i.saturating_sub(bw)..=i {
                out.data[at(bw, i, j)] = self.get(i, j) + shift * other.get(i, j);
            }
        }
        out
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[at(bw, i, j)];
                if j > k0 {
                    let ri = &l[at(bw, i, k0)..at(bw, i, j)];
                    let rj = &l[at(bw, j, k0)..at(bw, j, j)];
                    s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                }
                if i == j {
                    if !(s > 0.0) {
                        bail!(
                            Numerical,
                            "band Cholesky: non-positive pivot {s:e} at row {i} of {n}"
                        );
                    }
                    l[at(bw, i, i)] = s.sqrt();
                } else {
                    l[at(bw, i, j)] = s / l[at(bw, j, j)];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Lower factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &self.l[at(bw, i, j0)..at(bw, i, i)];
            let s: f64 = row.iter().zip(&b[j0..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / self.l[at(bw, i, i)];
        }
        // Lᵀx = y, sweeping rows of L so memory access stays contiguous
        for i in (0..n).rev() {
            let xi = b[i] / self.l[at(bw, i, i)];
            b[i] = xi;
            let j0 = i.saturating_sub(bw);
            let row = &self.l[at(bw, i, j0)..at(bw, i, i)];
            for (bj, a) in b[j0..i].iter_mut().zip(row) {
                *bj -= a * xi;
            }
        }
    }

    /// Smallest and largest diagonal entries of `L` (a cheap conditioning hint).
    pub fn pivot_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.n {
            let d = self.l[at(self.bw, i, i)];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }
}

/// Degrees of freedom living on a 2-D index lattice, possibly with several
/// components per lattice site.
pub trait DofLayout {
    fn len(&self) -> usize;
    fn components(&self) -> usize;
    /// `(i, j, component)` of dof `k`.
    fn position(&self, k: usize) -> (i64, i64, usize);
    fn index(&self, i: i64, j: i64, c: usize) -> Option<usize>;
}

/// Recover a symmetric operator whose stencil reaches at most `radius`
/// lattice steps in each direction, using `(2r+1)² · ncomp` probe vectors.
pub fn assemble_by_probing<L, F>(layout: &L, radius: i64, mut apply: F) -> BandedSym
where
    L: DofLayout,
    F: FnMut(&[f64], &mut [f64]),
{
    let n = layout.len();
    let nc = layout.components();
    let p = 2 * radius + 1;
    let mut bw = 0usize;
    for k in 0..n {
        let (i, j, _) = layout.position(k);
        for di in -radius..=radius {
            for dj in -radius..=radius {
                for c in 0..nc {
                    if let Some(m) = layout.index(i + di, j + dj, c) {
                        if m < k {
                            bw = bw.max(k - m);
                        }
                    }
                }
            }
        }
    }
    let mut a = BandedSym::zeros(n, bw);
    let mut probe = vec![0.0; n];
    let mut out = vec![0.0; n];
    for ci in 0..p {
        for cj in 0..p {
            for cc in 0..nc {
                for (k, e) in probe.iter_mut().enumerate() {
                    let (i, j, c) = layout.position(k);
                    *e = if i.rem_euclid(p) == ci && j.rem_euclid(p) == cj && c == cc {
                        1.0
                    } else {
                        0.0
                    };
                }
                apply(&probe, &mut out);
                for m in 0..n {
                    let (im, jm, _) = layout.position(m);
                    let mut di = (ci - im).rem_euclid(p);
                    if di > radius {
                        di -= p;
                    }
                    let mut dj = (cj - jm).rem_euclid(p);
                    if dj > radius {
                        dj -= p;
                    }
                    if let Some(k) = layout.index(im + di, jm + dj, cc) {
                        if k <= m && m - k <= bw {
                            a.data[at(bw, m, k)] = out[m];
                        }
                    }
                }
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    struct Lattice {
        nx: i64,
        ny: i64,
    }

    impl DofLayout for Lattice {
        fn len(&self) -> usize {
            (self.nx * self.ny) as usize
        }
        fn components(&self) -> usize {
            1
        }
        fn position(&self, k: usize) -> (i64, i64, usize) {
            let k = k as i64;
            (k % self.nx, k / self.nx, 0)
        }
        fn index(&self, i: i64, j: i64, _c: usize) -> Option<usize> {
            (i >= 0 && j >= 0 && i < self.nx && j < self.ny).then(|| (j * self.nx + i) as usize)
        }
    }

    /// Dense 13-point biharmonic-like SPD operator used as a probe target.
    fn dense_operator(l: &Lattice) -> DMatrix<f64> {
        let n = l.len();
        let mut lap = DMatrix::zeros(n, n);
        for k in 0..n {
            let (i, j, _) = l.position(k);
            lap[(k, k)] = 4.0;
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(m) = l.index(i + di, j + dj, 0) {
                    lap[(k, m)] = -1.0;
                }
            }
        }
        &lap * &lap + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn probing_recovers_operator_and_cholesky_solves() {
        let l = Lattice { nx: 7, ny: 5 };
        let dense = dense_operator(&l);
        let band = assemble_by_probing(&l, 2, |x, y| {
            let v = &dense * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        });
        for i in 0..l.len() {
            for j in 0..l.len() {
                assert!((band.get(i, j) - dense[(i, j)]).abs() < 1e-14);
            }
        }
        let b: Vec<f64> = (0..l.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut x = b.clone();
        band.cholesky().unwrap().solve_in_place(&mut x);
        let r = &dense * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
        assert!(r.norm() < 1e-12);
        let mut y = vec![0.0; l.len()];
        band.matvec(&x, &mut y);
        for (a, c) in y.iter().zip(&b) {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = BandedSym::zeros(3, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, -1.0);
        a.set(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }
}
