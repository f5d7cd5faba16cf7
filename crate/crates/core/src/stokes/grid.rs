//! MAC grid geometry and the face / cell field containers.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::geometry::{Domain, DomainSpec};
use crate::Vec2;

/// Uniform `nx × ny` cell grid on `[0, width] × [0, height]`.
///
/// Index conventions:
/// * x-faces `u(i, j)`, `i ∈ 0..=nx`, `j ∈ 0..ny`, at `(i·hx, (j+½)·hy)`;
/// * y-faces `v(i, j)`, `i ∈ 0..nx`, `j ∈ 0..=ny`, at `((i+½)·hx, j·hy)`;
/// * cells `(i, j)` at `((i+½)·hx, (j+½)·hy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacGrid {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl MacGrid {
    pub fn new(nx: usize, ny: usize, width: f64, height: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            bail!(Config, "grid needs at least 2 cells per direction, got {nx} x {ny}");
        }
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            bail!(Config, "non-positive grid extent {width} x {height}");
        }
        Ok(MacGrid {
            nx,
            ny,
            width,
            height,
        })
    }

    /// `n × n` grid on the unit square.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    /// Grid on a rectangular domain with `nx` cells across; `ny` is chosen so
    /// cells are as close to square as possible.
    pub fn for_domain(domain: &Domain, nx: usize) -> Result<Self> {
        match domain.spec() {
            DomainSpec::Rectangle { width, height } => {
                let ny = ((nx as f64) * height / width).round().max(2.0) as usize;
                Self::new(nx, ny, width, height)
            }
            DomainSpec::Disk { .. } => {
                bail!(Precondition, "staggered-grid Stokes operators need a rectangle")
            }
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::rectangle(self.width, self.height).expect("validated grid extent")
    }

    pub fn hx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn n_u(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_v(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of interior nodes, which is also the dimension of the discrete
    /// divergence-free subspace.
    pub fn n_nodes(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn u_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn v_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn u_position(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(i as f64 * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn v_position(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.hx(), j as f64 * self.hy())
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }
}

/// Face-centred velocity field. Boundary normal faces (`u` at `i = 0, nx`,
/// `v` at `j = 0, ny`) carry the Dirichlet data; the operators of this module
/// treat them as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggeredField {
    pub grid: MacGrid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StaggeredField {
    pub fn zeros(grid: MacGrid) -> Self {
        StaggeredField {
            grid,
            u: vec![0.0; grid.n_u()],
            v: vec![0.0; grid.n_v()],
        }
    }

    /// Sample `(fu, fv)` at every face, boundary faces included.
    pub fn from_fn<F, G>(grid: MacGrid, fu: F, fv: G) -> Self
    where
        F: Fn(f64, f64) -> f64,
        G: Fn(f64, f64) -> f64,
    {
        let mut f = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                let p = grid.u_position(i, j);
                f.u[grid.u_index(i, j)] = fu(p.x, p.y);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let p = grid.v_position(i, j);
                f.v[grid.v_index(i, j)] = fv(p.x, p.y);
            }
        }
        f
    }

    /// Like [`from_fn`](Self::from_fn) but with boundary normal faces set to 0.
    pub fn dirichlet_from_fn<F, G>(grid: MacGrid, fu: F, fv: G) -> Self
    where
        F: Fn(f64, f64) -> f64,
        G: Fn(f64, f64) -> f64,
    {
        Self::from_fn(grid, fu, fv).interior()
    }

    /// Copy with boundary normal faces zeroed.
    pub fn interior(mut self) -> Self {
        let g = self.grid;
        for j in 0..g.ny {
            self.u[g.u_index(0, j)] = 0.0;
            self.u[g.u_index(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.v[g.v_index(i, 0)] = 0.0;
            self.v[g.v_index(i, g.ny)] = 0.0;
        }
        self
    }

    pub fn is_dirichlet(&self) -> bool {
        let g = self.grid;
        (0..g.ny).all(|j| self.u[g.u_index(0, j)] == 0.0 && self.u[g.u_index(g.nx, j)] == 0.0)
            && (0..g.nx)
                .all(|i| self.v[g.v_index(i, 0)] == 0.0 && self.v[g.v_index(i, g.ny)] == 0.0)
    }

    /// Discrete L² inner product over interior faces.
    pub fn dot(&self, other: &StaggeredField) -> f64 {
        let g = self.grid;
        let mut s = 0.0;
        for j in 0..g.ny {
            for i in 1..g.nx {
                let k = g.u_index(i, j);
                s += self.u[k] * other.u[k];
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                let k = g.v_index(i, j);
                s += self.v[k] * other.v[k];
            }
        }
        s * g.cell_area()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: f64, other: &StaggeredField) {
        for (a, b) in self.u.iter_mut().zip(&other.u) {
            *a += s * b;
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.u.iter_mut().chain(self.v.iter_mut()).for_each(|x| *x *= s);
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale(s);
        self
    }

    /// `self − other`.
    pub fn sub(&self, other: &StaggeredField) -> StaggeredField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Interior face values flattened as `[u interior…, v interior…]`.
    pub fn interior_values(&self) -> Vec<f64> {
        let g = self.grid;
        let mut out = Vec::with_capacity(interior_len(&g));
        for j in 0..g.ny {
            for i in 1..g.nx {
                out.push(self.u[g.u_index(i, j)]);
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                out.push(self.v[g.v_index(i, j)]);
            }
        }
        out
    }

    /// Inverse of [`interior_values`](Self::interior_values).
    pub fn from_interior_values(grid: MacGrid, x: &[f64]) -> Self {
        let mut f = Self::zeros(grid);
        let mut it = x.iter();
        for j in 0..grid.ny {
            for i in 1..grid.nx {
                f.u[grid.u_index(i, j)] = *it.next().expect("length");
            }
        }
        for j in 1..grid.ny {
            for i in 0..grid.nx {
                f.v[grid.v_index(i, j)] = *it.next().expect("length");
            }
        }
        f
    }
}

/// Number of interior (unknown) faces.
pub fn interior_len(g: &MacGrid) -> usize {
    (g.nx - 1) * g.ny + g.nx * (g.ny - 1)
}

/// Cell-centred scalar field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    pub grid: MacGrid,
    pub q: Vec<f64>,
}

/// Pressures are cell-centred scalars.
pub type PressureField = CellField;

impl CellField {
    pub fn zeros(grid: MacGrid) -> Self {
        CellField {
            grid,
            q: vec![0.0; grid.n_cells()],
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: MacGrid, f: F) -> Self {
        let mut c = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let p = grid.cell_center(i, j);
                c.q[grid.cell_index(i, j)] = f(p.x, p.y);
            }
        }
        c
    }

    pub fn dot(&self, other: &CellField) -> f64 {
        self.q.iter().zip(&other.q).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_area()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.q.len() as f64
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.q.iter_mut().for_each(|x| *x *= s);
        self
    }
}
