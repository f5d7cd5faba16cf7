//! Time evolution in the truncated eigenbasis.
//!
//! The modal system `ü = −Λu − Bu̇` is integrated with the implicit midpoint
//! rule. For this scheme the energy `E = ½(|w|² + uᵀΛu)` satisfies
//! `Eⁿ⁺¹ − Eⁿ = −dt·(wⁿ⁺½)ᵀ B wⁿ⁺½` exactly, so accumulating the damping with
//! the same half-step velocity makes the balance `E(T) = E(0) − D(T)` an
//! identity up to linear-solver rounding.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::stokes::ModalSystem;

/// Modal coordinates `u`, velocities `w = u̇` and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

impl ModalState {
    pub fn new(u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if u.len() != w.len() {
            bail!(Precondition, "u has {} entries but w has {}", u.len(), w.len());
        }
        if u.iter().chain(&w).any(|x| !x.is_finite()) {
            bail!(Precondition, "non-finite modal state");
        }
        Ok(ModalState { u, w, t: 0.0 })
    }

    pub fn zeros(n: usize) -> Self {
        ModalState {
            u: vec![0.0; n],
            w: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `(u, w)` stacked into one vector of length `2N`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.len(), self.u.iter().chain(&self.w).copied())
    }

    fn from_stacked(x: &DVector<f64>, t: f64) -> Self {
        let n = x.len() / 2;
        ModalState {
            u: x.rows(0, n).iter().copied().collect(),
            w: x.rows(n, n).iter().copied().collect(),
            t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub e: f64,
    /// Cumulative damping `∫₀ᵗ wᵀBw ds`.
    pub d_cum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub samples: Vec<EnergySample>,
}

impl EnergyTrace {
    pub fn initial_energy(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.e)
    }

    pub fn final_sample(&self) -> Option<&EnergySample> {
        self.samples.last()
    }

    /// Energy at the sample closest to `t`.
    pub fn energy_at(&self, t: f64) -> Option<f64> {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|s| s.e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c0: f64,
    pub alpha: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// `E = ½(Σ w_j² + Σ λ_j u_j²)`.
pub fn energy(ms: &ModalSystem, state: &ModalState) -> f64 {
    0.5 * state
        .u
        .iter()
        .zip(&state.w)
        .zip(&ms.lambda)
        .map(|((u, w), l)| w * w + l * u * u)
        .sum::<f64>()
}

/// Number of steps and the step actually used: `T` is split into
/// `ceil(T/dt)` equal steps.
pub fn step_count(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        bail!(Config, "time step dt must be positive, got {dt}");
    }
    if !(t_end >= dt && t_end.is_finite()) {
        bail!(Config, "horizon T = {t_end} must be at least dt = {dt}");
    }
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_end / n as f64))
}

/// Midpoint stepper for `ẋ = Ax`, `A = [[0, I], [−Λ, −B]]`.
struct Midpoint {
    n: usize,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    plus: DMatrix<f64>,
}

impl Midpoint {
    fn new(lambda: &[f64], b: &DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = lambda.len();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            a[(j, n + j)] = 1.0;
            a[(n + j, j)] = -lambda[j];
        }
        a.view_mut((n, n), (n, n)).copy_from(&(-b));
        let id = DMatrix::identity(2 * n, 2 * n);
        let minus = &id - &a * (0.5 * dt);
        let plus = &id + &a * (0.5 * dt);
        let lu = minus.lu();
        if !lu.is_invertible() {
            bail!(Numerical, "implicit midpoint matrix is singular (dt = {dt})");
        }
        Ok(Midpoint { n, lu, plus })
    }

    fn step(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let rhs = &self.plus * x;
        match self.lu.solve(&rhs) {
            Some(y) if y.iter().all(|v| v.is_finite()) => Ok(y),
            _ => bail!(Numerical, "implicit midpoint solve failed"),
        }
    }
}

fn quad(b: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    w.dot(&(b * w))
}

/// Integrate with dynamics damping `b_dyn` and accumulate `∫ wᵀ b_obs w`.
fn integrate<F: FnMut(&ModalState)>(
    ms: &ModalSystem,
    b_dyn: &DMatrix<f64>,
    b_obs: &DMatrix<f64>,
    state0: &ModalState,
    t_end: f64,
    dt: f64,
    mut observer: F,
) -> Result<(ModalState, EnergyTrace)> {
    if state0.len() != ms.len() {
        bail!(
            Precondition,
            "state has {} modes, system has {}",
            state0.len(),
            ms.len()
        );
    }
    let (steps, dt) = step_count(t_end, dt)?;
    let stepper = Midpoint::new(&ms.lambda, b_dyn, dt)?;
    let n = stepper.n;
    let mut x = state0.stacked();
    let t0 = state0.t;
    let mut d_cum = 0.0;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut state = state0.clone();
    samples.push(EnergySample {
        t: t0,
        e: energy(ms, &state),
        d_cum,
    });
    observer(&state);
    for k in 1..=steps {
        let y = stepper.step(&x)?;
        let wmid = (x.rows(n, n) + y.rows(n, n)) * 0.5;
        d_cum += dt * quad(b_obs, &wmid);
        x = y;
        state = ModalState::from_stacked(&x, t0 + k as f64 * dt);
        samples.push(EnergySample {
            t: state.t,
            e: energy(ms, &state),
            d_cum,
        });
        observer(&state);
    }
    Ok((state, EnergyTrace { samples }))
}

/// Evolve from `state0` over `[t0, t0 + T]`; `B` is dropped when `damped`
/// is false. The trace holds every step.
pub fn evolve(
    ms: &ModalSystem,
    state0: &ModalState,
    t_end: f64,
    dt: f64,
    damped: bool,
) -> Result<(ModalState, EnergyTrace)> {
    evolve_observed(ms, state0, t_end, dt, damped, |_| {})
}

/// [`evolve`] with a callback invoked on every state, the initial one
/// included.
pub fn evolve_observed<F: FnMut(&ModalState)>(
    ms: &ModalSystem,
    state0: &ModalState,
    t_end: f64,
    dt: f64,
    damped: bool,
    observer: F,
) -> Result<(ModalState, EnergyTrace)> {
    let b = if damped {
        ms.b.clone()
    } else {
        DMatrix::zeros(ms.len(), ms.len())
    };
    integrate(ms, &b, &b, state0, t_end, dt, observer)
}

/// `max_t |E(t) − E(0) + D(t)| / E(0)`; zero for a zero trace.
pub fn dissipation_check(trace: &EnergyTrace) -> f64 {
    let e0 = trace.initial_energy();
    if e0 == 0.0 {
        return trace
            .samples
            .iter()
            .fold(0.0f64, |m, s| m.max((s.e + s.d_cum).abs()));
    }
    trace
        .samples
        .iter()
        .fold(0.0f64, |m, s| m.max((s.e - e0 + s.d_cum).abs() / e0))
}

/// Least-squares line through `(t, ln E)` on the window, then `C0` inflated
/// until `E(t) ≤ C0·E(0)·e^{−αt}` holds at every sample of the window.
/// `E(0)` is the first sample of the trace and `t` is measured from it.
pub fn fit_decay(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        bail!(Config, "empty fit window [{lo}, {hi}]");
    }
    let Some(first) = trace.samples.first() else {
        bail!(Precondition, "empty energy trace");
    };
    let (t0, e0) = (first.t, first.e);
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|s| s.t >= lo - 1e-12 && s.t <= hi + 1e-12)
        .map(|s| (s.t - t0, s.e))
        .collect();
    if pts.len() < 2 {
        bail!(Precondition, "fit window [{lo}, {hi}] holds fewer than two samples");
    }
    if !(e0 > 0.0) || pts.iter().any(|p| !(p.1 > 0.0)) {
        bail!(Numerical, "degenerate fit: energy vanishes in window [{lo}, {hi}]");
    }
    let m = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tbar).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tbar) * (p.1.ln() - ybar)).sum();
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    let slope = if stt > 0.0 && !flat { sty / stt } else { 0.0 };
    let icpt = ybar - slope * tbar;
    let ss_tot: f64 = pts.iter().map(|p| (p.1.ln() - ybar).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1.ln() - icpt - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let alpha = -slope;
    let ratio = pts
        .iter()
        .map(|p| p.1 / (e0 * (-alpha * p.0).exp()))
        .fold(1.0f64, f64::max);
    Ok(DecayFit {
        c0: ratio * (1.0 + 1e-12),
        alpha,
        r_squared,
        window,
    })
}

/// Observability Gramian of the undamped flow observed through `B^{1/2}w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    /// `2N × 2N`, acting on stacked `(u, w)`.
    pub g: DMatrix<f64>,
    /// Smallest eigenvalue of `G` relative to the energy inner product
    /// `diag(Λ, I)`.
    pub c_obs: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Gramian {
    /// `x₀ᵀ G x₀`, the observed damping `D[v](T)` of the undamped solution.
    pub fn quadratic_form(&self, state: &ModalState) -> f64 {
        let x = state.stacked();
        x.dot(&(&self.g * &x))
    }
}

/// Gramian accumulated with the evolution scheme itself: each undamped mode
/// is advanced by its 2×2 midpoint propagator and the half-step velocities
/// enter the same quadrature as [`evolve`], so `x₀ᵀGx₀` reproduces
/// [`observation_quadrature`] for every `x₀`.
pub fn observability_gramian(ms: &ModalSystem, t_end: f64, dt: f64) -> Result<Gramian> {
    if !(t_end > 0.0) {
        bail!(Config, "observation horizon T must be positive, got {t_end}");
    }
    let (steps, dt) = step_count(t_end, dt)?;
    let n = ms.len();
    let k = 0.5 * dt;
    // per-mode propagators S = (I − kA)⁻¹(I + kA), A = [[0,1],[−λ,0]]
    let props: Vec<[f64; 4]> = ms
        .lambda
        .iter()
        .map(|&l| {
            let d = 1.0 + k * k * l;
            [
                (1.0 - k * k * l) / d,
                2.0 * k / d,
                -2.0 * k * l / d,
                (1.0 - k * k * l) / d,
            ]
        })
        .collect();
    // rows of the propagated fundamental matrix: (u, w) of mode j as linear
    // forms in (u0_j, w0_j)
    let mut cur: Vec<[f64; 4]> = vec![[1.0, 0.0, 0.0, 1.0]; n];
    let mut guu = DMatrix::zeros(n, n);
    let mut guw = DMatrix::zeros(n, n);
    let mut gww = DMatrix::zeros(n, n);
    let mut a = vec![0.0; n];
    let mut c = vec![0.0; n];
    for _ in 0..steps {
        for j in 0..n {
            let s = &props[j];
            let m = cur[j];
            // next = S·m  (m = [[uu, uw], [wu, ww]])
            let next = [
                s[0] * m[0] + s[1] * m[2],
                s[0] * m[1] + s[1] * m[3],
                s[2] * m[0] + s[3] * m[2],
                s[2] * m[1] + s[3] * m[3],
            ];
            // half-step velocity coefficients on u0_j and w0_j
            a[j] = 0.5 * (m[2] + next[2]);
            c[j] = 0.5 * (m[3] + next[3]);
            cur[j] = next;
        }
        for jj in 0..n {
            for kk in 0..n {
                let bw = dt * ms.b[(jj, kk)];
                if bw == 0.0 {
                    continue;
                }
                guu[(jj, kk)] += bw * a[jj] * a[kk];
                guw[(jj, kk)] += bw * a[jj] * c[kk];
                gww[(jj, kk)] += bw * c[jj] * c[kk];
            }
        }
    }
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(&guu);
    g.view_mut((0, n), (n, n)).copy_from(&guw);
    g.view_mut((n, 0), (n, n)).copy_from(&guw.transpose());
    g.view_mut((n, n), (n, n)).copy_from(&gww);
    let g = (&g + g.transpose()) * 0.5;

    let scale = DVector::from_iterator(
        2 * n,
        ms.lambda
            .iter()
            .map(|l| 1.0 / l.sqrt())
            .chain(core::iter::repeat(1.0).take(n)),
    );
    let mut h = g.clone();
    for r in 0..2 * n {
        for q in 0..2 * n {
            h[(r, q)] *= scale[r] * scale[q];
        }
    }
    let c_obs = if g.amax() == 0.0 {
        0.0
    } else {
        SymmetricEigen::new(h).eigenvalues.min().max(0.0)
    };
    Ok(Gramian {
        g,
        c_obs,
        horizon: t_end,
        dt,
    })
}

/// Direct route for the observed damping of the undamped solution:
/// integrate the full `2N` system with `B` only in the quadrature.
pub fn observation_quadrature(
    ms: &ModalSystem,
    state0: &ModalState,
    t_end: f64,
    dt: f64,
) -> Result<f64> {
    let zero = DMatrix::zeros(ms.len(), ms.len());
    let (_, trace) = integrate(ms, &zero, &ms.b, state0, t_end, dt, |_| {})?;
    Ok(trace.final_sample().map_or(0.0, |s| s.d_cum))
}
