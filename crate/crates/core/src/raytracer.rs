//! Generalized bicharacteristics on the rectangle and the disk.
//!
//! Rays move at unit speed. At a hyperbolic boundary point the normal
//! component of the direction is reversed; at a glancing point on the disk
//! the ray glides along the circle (boundary geodesic), on a flat side it
//! slides straight along the side. Rays that run into a rectangle corner are
//! stopped and reported.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::geometry::{
    BoundaryRegime, DampingProfile, Domain, DomainSpec, GlancingSign, PositiveSet, RegimeTag,
};
use crate::Vec2;

/// `|ξ·ν|` at or below this value is treated as tangential.
pub const GLANCING_DOT_TOL: f64 = 1e-9;
/// Hits within this distance of a rectangle corner stop the ray.
pub const CORNER_TOL: f64 = 1e-9;
/// Allowed deviation of `|ξ|` from 1.
pub const UNIT_SPEED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseRegime {
    Interior,
    AtBoundary(BoundaryRegime),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec2,
    pub xi: Vec2,
    pub regime: PhaseRegime,
    /// Elapsed flow time.
    pub s: f64,
}

impl PhasePoint {
    /// Build a phase point at time 0, classifying boundary positions.
    pub fn new(domain: &Domain, x: Vec2, xi: Vec2) -> Result<Self> {
        Self::at_time(domain, x, xi, 0.0)
    }

    pub fn at_time(domain: &Domain, x: Vec2, xi: Vec2, s: f64) -> Result<Self> {
        if (xi.norm() - 1.0).abs() > UNIT_SPEED_TOL {
            bail!(Precondition, "direction must be a unit vector, |xi| = {}", xi.norm());
        }
        if !domain.contains(&x) {
            bail!(Domain, "point ({}, {}) lies outside the domain", x.x, x.y);
        }
        let regime = if domain.on_boundary(&x) {
            if domain.is_corner(&x, CORNER_TOL) {
                bail!(Classification, "phase point at corner ({}, {})", x.x, x.y);
            }
            PhaseRegime::AtBoundary(ray_regime(domain, &x, &xi))
        } else {
            PhaseRegime::Interior
        };
        Ok(PhasePoint { x, xi, regime, s })
    }

    fn moved(domain: &Domain, x: Vec2, xi: Vec2, s: f64) -> Self {
        let regime = if domain.on_boundary(&x) && !domain.is_corner(&x, CORNER_TOL) {
            PhaseRegime::AtBoundary(ray_regime(domain, &x, &xi))
        } else {
            PhaseRegime::Interior
        };
        PhasePoint { x, xi, regime, s }
    }
}

/// Boundary regime of a unit-speed ray, glancing when `|ξ·ν| ≤ GLANCING_DOT_TOL`.
fn ray_regime(domain: &Domain, x: &Vec2, xi: &Vec2) -> BoundaryRegime {
    let nu = domain.normal_unchecked(x);
    let dn = xi.dot(&nu);
    let xt = xi - dn * nu;
    let xt2 = xt.norm_squared();
    let kappa = domain.curvature();
    let r1 = -2.0 * xt2 * kappa;
    if dn.abs() <= GLANCING_DOT_TOL {
        let sign = if kappa == 0.0 {
            GlancingSign::Flat
        } else {
            GlancingSign::Gliding
        };
        BoundaryRegime {
            tag: RegimeTag::Glancing,
            r0: 0.0,
            r1,
            glancing_sign: Some(sign),
        }
    } else {
        BoundaryRegime {
            tag: RegimeTag::Hyperbolic,
            r0: dn * dn,
            r1,
            glancing_sign: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RayEvent {
    FreeSegment {
        start: Vec2,
        end: Vec2,
        duration: f64,
    },
    Reflection {
        point: Vec2,
        xi_in: Vec2,
        xi_out: Vec2,
    },
    GlideArc {
        start: Vec2,
        end: Vec2,
        duration: f64,
    },
    CornerStop {
        point: Vec2,
    },
    DampedEntry {
        point: Vec2,
        time: f64,
    },
}

impl RayEvent {
    pub fn duration(&self) -> f64 {
        match self {
            RayEvent::FreeSegment { duration, .. } | RayEvent::GlideArc { duration, .. } => {
                *duration
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Corner,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayPath {
    pub events: Vec<RayEvent>,
    pub total_time: f64,
    pub terminated: Termination,
    /// First time with `a(x(s)) > 0`, if reached.
    pub first_entry: Option<f64>,
    pub final_state: PhasePoint,
}

impl RayPath {
    pub fn reflections(&self) -> impl Iterator<Item = &RayEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e, RayEvent::Reflection { .. }))
    }
}

// ---------------------------------------------------------------------------
// Elementary moves

/// Smallest `s > 0` at which `x + sξ` reaches ∂Ω, and the hit point.
pub fn boundary_hit(domain: &Domain, p: &PhasePoint) -> Result<(f64, Vec2)> {
    hit(domain, &p.x, &p.xi)
}

fn hit(domain: &Domain, x: &Vec2, xi: &Vec2) -> Result<(f64, Vec2)> {
    match domain.spec() {
        DomainSpec::Rectangle { width, height } => {
            let axis = |pos: f64, d: f64, hi: f64| -> f64 {
                if d > 0.0 {
                    ((hi - pos) / d).max(0.0)
                } else if d < 0.0 {
                    ((0.0 - pos) / d).max(0.0)
                } else {
                    f64::INFINITY
                }
            };
            let tx = axis(x.x, xi.x, width);
            let ty = axis(x.y, xi.y, height);
            let s = tx.min(ty);
            if !s.is_finite() {
                bail!(Numerical, "ray has no forward boundary intersection");
            }
            let mut p = x + s * xi;
            // snap the coordinate(s) that reached a wall
            if tx <= ty {
                p.x = if xi.x > 0.0 { width } else { 0.0 };
            }
            if ty <= tx {
                p.y = if xi.y > 0.0 { height } else { 0.0 };
            }
            Ok((s, p))
        }
        DomainSpec::Disk { radius } => {
            let b = x.dot(xi);
            let c = x.norm_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                bail!(Numerical, "ray misses the disk (disc = {disc})");
            }
            let s = (-b + disc.sqrt()).max(0.0);
            Ok((s, x + s * xi))
        }
    }
}

/// Straight-line flight for time `s`; the segment must stay in the closed domain.
pub fn advance_free(domain: &Domain, p: &PhasePoint, s: f64) -> Result<PhasePoint> {
    if s < 0.0 {
        bail!(Precondition, "negative flight time {s}");
    }
    if s == 0.0 {
        return Ok(*p);
    }
    let (s_hit, _) = hit(domain, &p.x, &p.xi)?;
    if s > s_hit + 1e-12 {
        bail!(
            Precondition,
            "segment of length {s} leaves the domain after {s_hit}"
        );
    }
    Ok(PhasePoint::moved(domain, p.x + s * p.xi, p.xi, p.s + s))
}

/// Specular reflection `ξ_out = ξ − 2(ξ·ν)ν` at a hyperbolic boundary point.
pub fn reflect(domain: &Domain, p: &PhasePoint) -> Result<PhasePoint> {
    let nu = domain.outward_normal(&p.x)?;
    let dn = p.xi.dot(&nu);
    if dn.abs() <= GLANCING_DOT_TOL {
        bail!(
            Precondition,
            "glancing point (|xi.nu| = {}), use glide instead",
            dn.abs()
        );
    }
    let xi = p.xi - 2.0 * dn * nu;
    Ok(PhasePoint::moved(domain, p.x, xi, p.s))
}

/// Boundary flow at a glancing point: circular arc on the disk, straight
/// slide on a flat side.
pub fn glide(domain: &Domain, p: &PhasePoint, s: f64) -> Result<PhasePoint> {
    let reg = match p.regime {
        PhaseRegime::AtBoundary(r) => r,
        PhaseRegime::Interior => bail!(Precondition, "glide requires a boundary point"),
    };
    match (reg.tag, reg.glancing_sign) {
        (RegimeTag::Glancing, Some(GlancingSign::Gliding | GlancingSign::Flat)) => {}
        (RegimeTag::Glancing, Some(GlancingSign::Transversal)) => {
            bail!(Precondition, "transversal glancing point passes into the interior")
        }
        _ => bail!(Precondition, "glide requires a glancing point, got {:?}", reg.tag),
    }
    if s < 0.0 {
        bail!(Precondition, "negative glide time {s}");
    }
    match domain.spec() {
        DomainSpec::Disk { radius } => {
            let (x, xi) = disk_glide(radius, &p.x, &p.xi, s);
            Ok(PhasePoint::moved(domain, x, xi, p.s + s))
        }
        DomainSpec::Rectangle { .. } => {
            let (to_corner, _) = hit(domain, &p.x, &p.xi)?;
            if s > to_corner + 1e-12 {
                bail!(Precondition, "flat glide of {s} runs past the corner at {to_corner}");
            }
            Ok(PhasePoint::moved(domain, p.x + s * p.xi, p.xi, p.s + s))
        }
    }
}

fn disk_orientation(x: &Vec2, xi: &Vec2) -> f64 {
    // sign of the angular momentum x × ξ
    if x.x * xi.y - x.y * xi.x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn disk_glide(radius: f64, x: &Vec2, xi: &Vec2, s: f64) -> (Vec2, Vec2) {
    let sigma = disk_orientation(x, xi);
    let th = x.y.atan2(x.x) + sigma * s / radius;
    let (sn, cs) = th.sin_cos();
    (
        Vec2::new(radius * cs, radius * sn),
        sigma * Vec2::new(-sn, cs),
    )
}

// ---------------------------------------------------------------------------
// Entry into {a > 0}

/// First `s ∈ [0, len]` with `x + sξ` in the open set, if any.
pub fn line_entry(set: &PositiveSet, x: &Vec2, xi: &Vec2, len: f64) -> Option<f64> {
    let s = match set {
        PositiveSet::Empty => None,
        PositiveSet::All => Some(0.0),
        PositiveSet::Disk { center, radius } => {
            let d = x - center;
            let c = d.norm_squared() - radius * radius;
            if c < 0.0 {
                Some(0.0)
            } else {
                let b = d.dot(xi);
                let disc = b * b - c;
                if disc > 0.0 {
                    let s = -b - disc.sqrt();
                    (s >= 0.0).then_some(s)
                } else {
                    None
                }
            }
        }
        PositiveSet::OutsideDisk { center, radius } => {
            let d = x - center;
            let c = d.norm_squared() - radius * radius;
            if c > 0.0 {
                Some(0.0)
            } else {
                let b = d.dot(xi);
                let disc = (b * b - c).max(0.0);
                Some(-b + disc.sqrt())
            }
        }
        PositiveSet::HalfPlanes(planes) => planes
            .iter()
            .filter_map(|(n, c)| {
                let f0 = n.dot(x) - c;
                let rate = n.dot(xi);
                if f0 < 0.0 {
                    Some(0.0)
                } else if rate < 0.0 {
                    Some(-f0 / rate)
                } else {
                    None
                }
            })
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s)))),
    };
    s.filter(|s| *s <= len)
}

/// First arclength `s ∈ [0, len]` at which a point gliding on the circle of
/// radius `radius` (angle `theta0`, orientation `sigma`) enters the set.
pub fn arc_entry(
    set: &PositiveSet,
    radius: f64,
    theta0: f64,
    sigma: f64,
    len: f64,
) -> Option<f64> {
    // Each elementary set restricted to the circle is {cos(θ − φ) > k}.
    let first = |phi: f64, k: f64| -> Option<f64> {
        if k >= 1.0 {
            return None;
        }
        if k < -1.0 {
            return Some(0.0);
        }
        let alpha = k.acos();
        let psi0 = wrap_angle(theta0 - phi);
        if psi0.abs() < alpha {
            return Some(0.0);
        }
        let target = if sigma > 0.0 { -alpha - psi0 } else { psi0 - alpha };
        Some(radius * crate::rem_euclid(target, 2.0 * PI))
    };
    let s = match set {
        PositiveSet::Empty => None,
        PositiveSet::All => Some(0.0),
        PositiveSet::Disk { center, radius: r } => {
            let cn = center.norm();
            if cn < 1e-300 {
                (radius < *r).then_some(0.0)
            } else {
                let k = (radius * radius + cn * cn - r * r) / (2.0 * radius * cn);
                first(center.y.atan2(center.x), k)
            }
        }
        PositiveSet::OutsideDisk { center, radius: r } => {
            let cn = center.norm();
            if cn < 1e-300 {
                (radius > *r).then_some(0.0)
            } else {
                let k = (radius * radius + cn * cn - r * r) / (2.0 * radius * cn);
                first(center.y.atan2(center.x) + PI, -k)
            }
        }
        PositiveSet::HalfPlanes(planes) => planes
            .iter()
            .filter_map(|(n, c)| first(n.y.atan2(n.x) + PI, -c / radius))
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s)))),
    };
    s.filter(|s| *s <= len)
}

fn wrap_angle(a: f64) -> f64 {
    let w = crate::rem_euclid(a + PI, 2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

// ---------------------------------------------------------------------------
// Tracing

struct Tracer<'a> {
    domain: &'a Domain,
    set: PositiveSet,
    horizon: f64,
    stop_at_entry: bool,
    events: Vec<RayEvent>,
    entry: Option<f64>,
    x: Vec2,
    xi: Vec2,
    s: f64,
}

enum Step {
    Continue,
    Done(Termination),
}

impl<'a> Tracer<'a> {
    /// Straight move of length `len` (must stay in the closed domain),
    /// splitting at the damped entry. `glide` marks a flat-side slide.
    fn straight(&mut self, len: f64, glide: bool) -> Option<Termination> {
        let mut len = len;
        if self.entry.is_none() {
            if let Some(se) = line_entry(&self.set, &self.x, &self.xi, len) {
                if se > 0.0 {
                    let end = self.x + se * self.xi;
                    self.push_move(end, se, glide);
                }
                self.entry = Some(self.s);
                self.events.push(RayEvent::DampedEntry {
                    point: self.x,
                    time: self.s,
                });
                if self.stop_at_entry {
                    return Some(Termination::Horizon);
                }
                len -= se;
            }
        }
        if len > 0.0 {
            let end = self.x + len * self.xi;
            self.push_move(end, len, glide);
        }
        None
    }

    fn push_move(&mut self, end: Vec2, dur: f64, glide: bool) {
        let ev = if glide {
            RayEvent::GlideArc {
                start: self.x,
                end,
                duration: dur,
            }
        } else {
            RayEvent::FreeSegment {
                start: self.x,
                end,
                duration: dur,
            }
        };
        self.events.push(ev);
        self.x = end;
        self.s += dur;
    }

    fn disk_glide_rest(&mut self, radius: f64) -> Termination {
        let len = self.horizon - self.s;
        let sigma = disk_orientation(&self.x, &self.xi);
        let theta0 = self.x.y.atan2(self.x.x);
        let mut remaining = len;
        if self.entry.is_none() {
            if let Some(se) = arc_entry(&self.set, radius, theta0, sigma, len) {
                if se > 0.0 {
                    let (x, xi) = disk_glide(radius, &self.x, &self.xi, se);
                    self.events.push(RayEvent::GlideArc {
                        start: self.x,
                        end: x,
                        duration: se,
                    });
                    self.x = x;
                    self.xi = xi;
                    self.s += se;
                }
                self.entry = Some(self.s);
                self.events.push(RayEvent::DampedEntry {
                    point: self.x,
                    time: self.s,
                });
                if self.stop_at_entry {
                    return Termination::Horizon;
                }
                remaining -= se;
            }
        }
        if remaining > 0.0 {
            let (x, xi) = disk_glide(radius, &self.x, &self.xi, remaining);
            self.events.push(RayEvent::GlideArc {
                start: self.x,
                end: x,
                duration: remaining,
            });
            self.x = x;
            self.xi = xi;
            self.s = self.horizon;
        }
        Termination::Horizon
    }

    /// Boundary handling at the current point. Returns `Done` when the ray
    /// terminates (corner, glide to horizon).
    fn at_boundary(&mut self) -> Result<Step> {
        if self.domain.is_corner(&self.x, CORNER_TOL) {
            self.events.push(RayEvent::CornerStop { point: self.x });
            return Ok(Step::Done(Termination::Corner));
        }
        let nu = self.domain.normal_unchecked(&self.x);
        let dn = self.xi.dot(&nu);
        if dn.abs() <= GLANCING_DOT_TOL {
            return Ok(Step::Done(self.glancing()?));
        }
        if dn > 0.0 {
            let out = self.xi - 2.0 * dn * nu;
            self.events.push(RayEvent::Reflection {
                point: self.x,
                xi_in: self.xi,
                xi_out: out,
            });
            self.xi = out;
        }
        Ok(Step::Continue)
    }

    fn glancing(&mut self) -> Result<Termination> {
        match self.domain.spec() {
            DomainSpec::Disk { radius } => Ok(self.disk_glide_rest(radius)),
            DomainSpec::Rectangle { .. } => {
                // project out the tiny normal component and slide to the corner
                let nu = self.domain.normal_unchecked(&self.x);
                let t = self.xi - self.xi.dot(&nu) * nu;
                self.xi = t / t.norm();
                let (to_corner, corner) = hit(self.domain, &self.x, &self.xi)?;
                let rest = self.horizon - self.s;
                if to_corner >= rest {
                    self.straight(rest, true);
                    return Ok(Termination::Horizon);
                }
                if let Some(t) = self.straight(to_corner, true) {
                    return Ok(t);
                }
                self.x = corner;
                self.events.push(RayEvent::CornerStop { point: corner });
                Ok(Termination::Corner)
            }
        }
    }

    fn run(&mut self) -> Result<Termination> {
        if self.domain.on_boundary(&self.x) {
            if let Step::Done(t) = self.at_boundary()? {
                return Ok(t);
            }
        }
        while self.s < self.horizon {
            let rest = self.horizon - self.s;
            let (s_hit, x_hit) = hit(self.domain, &self.x, &self.xi)?;
            if s_hit >= rest {
                if let Some(t) = self.straight(rest, false) {
                    return Ok(t);
                }
                self.s = self.horizon;
                break;
            }
            if let Some(t) = self.straight(s_hit, false) {
                return Ok(t);
            }
            self.x = x_hit;
            if let Step::Done(t) = self.at_boundary()? {
                return Ok(t);
            }
        }
        Ok(Termination::Horizon)
    }
}

fn run_tracer(
    domain: &Domain,
    damping: &DampingProfile,
    rho0: &PhasePoint,
    horizon: f64,
    stop_at_entry: bool,
) -> Result<RayPath> {
    if !(horizon > 0.0) {
        bail!(Config, "ray horizon must be positive, got {horizon}");
    }
    if (rho0.xi.norm() - 1.0).abs() > UNIT_SPEED_TOL {
        bail!(Precondition, "direction must be a unit vector");
    }
    let mut tr = Tracer {
        domain,
        set: damping.positive_set(domain),
        horizon,
        stop_at_entry,
        events: Vec::new(),
        entry: None,
        x: rho0.x,
        xi: rho0.xi,
        s: 0.0,
    };
    let terminated = tr.run()?;
    let final_state = PhasePoint::moved(domain, tr.x, tr.xi, tr.s);
    Ok(RayPath {
        events: tr.events,
        total_time: tr.s,
        terminated,
        first_entry: tr.entry,
        final_state,
    })
}

/// Full generalized bicharacteristic up to time `horizon` with event history.
pub fn trace(
    domain: &Domain,
    damping: &DampingProfile,
    rho0: &PhasePoint,
    horizon: f64,
) -> Result<RayPath> {
    run_tracer(domain, damping, rho0, horizon, false)
}

/// First time the ray meets `{a > 0}` before `horizon`, plus whether it was
/// stopped at a corner first.
pub fn first_entry_time(
    domain: &Domain,
    damping: &DampingProfile,
    rho0: &PhasePoint,
    horizon: f64,
) -> Result<(Option<f64>, Termination)> {
    let p = run_tracer(domain, damping, rho0, horizon, true)?;
    Ok((p.first_entry, p.terminated))
}

// ---------------------------------------------------------------------------
// Geometric control condition

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampler {
    /// `nx × nx` interior positions times `ndir` directions; on the disk
    /// also `4·nx` boundary points with both gliding orientations.
    Grid { nx: usize, ndir: usize },
    /// `n` uniform interior positions and directions.
    SeededRandom { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GccReport {
    pub horizon: f64,
    pub n_samples: usize,
    pub covered_fraction: f64,
    /// `+∞` when some sampled ray never enters before the horizon.
    pub max_first_entry_time: f64,
    /// Uncovered rays (or the slowest ones when everything is covered).
    pub worst_rays: Vec<PhasePoint>,
    pub corner_terminated: usize,
    pub sampler: Sampler,
}

/// Number of rays kept in [`GccReport::worst_rays`].
pub const WORST_RAYS: usize = 8;

pub fn sample_phase_points(domain: &Domain, sampler: &Sampler) -> Result<Vec<PhasePoint>> {
    let (x0, x1, y0, y1) = domain.bounding_box();
    let mut out = Vec::new();
    match *sampler {
        Sampler::Grid { nx, ndir } => {
            if nx == 0 || ndir == 0 {
                bail!(Config, "grid sampler needs nx >= 1 and ndir >= 1");
            }
            let dirs: Vec<Vec2> = (0..ndir)
                .map(|k| {
                    let (s, c) = (2.0 * PI * k as f64 / ndir as f64).sin_cos();
                    Vec2::new(c, s)
                })
                .collect();
            for j in 0..nx {
                for i in 0..nx {
                    let x = Vec2::new(
                        x0 + (i as f64 + 0.5) * (x1 - x0) / nx as f64,
                        y0 + (j as f64 + 0.5) * (y1 - y0) / nx as f64,
                    );
                    if domain.distance_to_boundary(&x) <= 1e-12 {
                        continue;
                    }
                    for d in &dirs {
                        out.push(PhasePoint::new(domain, x, *d)?);
                    }
                }
            }
            if let DomainSpec::Disk { .. } = domain.spec() {
                let nb = 4 * nx;
                for k in 0..nb {
                    let (p, t) = domain.boundary_point(k as f64 * domain.boundary_length() / nb as f64);
                    out.push(PhasePoint::new(domain, p, t)?);
                    out.push(PhasePoint::new(domain, p, -t)?);
                }
            }
        }
        Sampler::SeededRandom { n, seed } => {
            if n == 0 {
                bail!(Config, "random sampler needs n >= 1");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut unif = || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            while out.len() < n {
                let x = Vec2::new(x0 + (x1 - x0) * unif(), y0 + (y1 - y0) * unif());
                let th = 2.0 * PI * unif();
                if domain.distance_to_boundary(&x) <= 1e-12 {
                    continue;
                }
                let (s, c) = th.sin_cos();
                out.push(PhasePoint::new(domain, x, Vec2::new(c, s))?);
            }
        }
    }
    Ok(out)
}

/// Sampled check that every ray meets `{a > 0}` before `horizon`.
pub fn check_gcc(
    domain: &Domain,
    damping: &DampingProfile,
    horizon: f64,
    sampler: &Sampler,
) -> Result<GccReport> {
    if !(horizon > 0.0) {
        bail!(Config, "GCC horizon must be positive, got {horizon}");
    }
    let samples = sample_phase_points(domain, sampler)?;
    let mut covered = 0usize;
    let mut corner = 0usize;
    let mut uncovered: Vec<PhasePoint> = Vec::new();
    let mut slowest: Vec<(f64, usize)> = Vec::new();
    for (k, rho) in samples.iter().enumerate() {
        let (entry, term) = first_entry_time(domain, damping, rho, horizon)?;
        if term == Termination::Corner {
            corner += 1;
        }
        match entry {
            Some(t) if t < horizon => {
                covered += 1;
                slowest.push((t, k));
            }
            _ => {
                if uncovered.len() < WORST_RAYS {
                    uncovered.push(*rho);
                }
            }
        }
    }
    let n = samples.len();
    let all = covered == n;
    let (max_entry, worst) = if all {
        slowest.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let worst = slowest
            .iter()
            .take(WORST_RAYS)
            .map(|(_, k)| samples[*k])
            .collect();
        (slowest.first().map_or(0.0, |p| p.0), worst)
    } else {
        (f64::INFINITY, uncovered)
    };
    Ok(GccReport {
        horizon,
        n_samples: n,
        covered_fraction: covered as f64 / n as f64,
        max_first_entry_time: max_entry,
        worst_rays: worst,
        corner_terminated: corner,
        sampler: *sampler,
    })
}
