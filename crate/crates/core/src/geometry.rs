//! Planar domains, damping profiles and boundary-point classification.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::Vec2;

/// Tolerance on `r0 = 1 - |ξ'|²` inside which a boundary point is glancing.
pub const GLANCING_R0_TOL: f64 = 1e-9;

/// Distance within which a point counts as lying on the boundary.
pub const ON_BOUNDARY_TOL: f64 = 1e-9;

/// Unvalidated domain description, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// `[0, width] × [0, height]`.
    Rectangle { width: f64, height: f64 },
    /// Disk of the given radius centred at the origin.
    Disk { radius: f64 },
}

/// A validated planar domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    spec: DomainSpec,
}

/// Sides of the bounding box, counter-clockwise from the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

pub fn make_domain(spec: DomainSpec) -> Result<Domain> {
    match spec {
        DomainSpec::Rectangle { width, height } => {
            if !(width > 0.0 && width.is_finite()) {
                bail!(Config, "non-positive width {width}");
            }
            if !(height > 0.0 && height.is_finite()) {
                bail!(Config, "non-positive height {height}");
            }
        }
        DomainSpec::Disk { radius } => {
            if !(radius > 0.0 && radius.is_finite()) {
                bail!(Config, "non-positive radius {radius}");
            }
        }
    }
    Ok(Domain { spec })
}

impl Domain {
    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        make_domain(DomainSpec::Rectangle { width, height })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        make_domain(DomainSpec::Disk { radius })
    }

    pub fn unit_square() -> Self {
        Domain {
            spec: DomainSpec::Rectangle {
                width: 1.0,
                height: 1.0,
            },
        }
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    pub fn is_disk(&self) -> bool {
        matches!(self.spec, DomainSpec::Disk { .. })
    }

    /// `(xmin, xmax, ymin, ymax)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match self.spec {
            DomainSpec::Rectangle { width, height } => (0.0, width, 0.0, height),
            DomainSpec::Disk { radius } => (-radius, radius, -radius, radius),
        }
    }

    pub fn area(&self) -> f64 {
        match self.spec {
            DomainSpec::Rectangle { width, height } => width * height,
            DomainSpec::Disk { radius } => PI * radius * radius,
        }
    }

    pub fn boundary_length(&self) -> f64 {
        match self.spec {
            DomainSpec::Rectangle { width, height } => 2.0 * (width + height),
            DomainSpec::Disk { radius } => 2.0 * PI * radius,
        }
    }

    /// Arclength parametrization of ∂Ω (counter-clockwise). Returns the point
    /// and the unit tangent. For the rectangle `s = 0` is the origin corner.
    pub fn boundary_point(&self, s: f64) -> (Vec2, Vec2) {
        let len = self.boundary_length();
        let s = crate::rem_euclid(s, len);
        match self.spec {
            DomainSpec::Rectangle { width, height } => {
                if s < width {
                    (Vec2::new(s, 0.0), Vec2::new(1.0, 0.0))
                } else if s < width + height {
                    (Vec2::new(width, s - width), Vec2::new(0.0, 1.0))
                } else if s < 2.0 * width + height {
                    (
                        Vec2::new(width - (s - width - height), height),
                        Vec2::new(-1.0, 0.0),
                    )
                } else {
                    (
                        Vec2::new(0.0, height - (s - 2.0 * width - height)),
                        Vec2::new(0.0, -1.0),
                    )
                }
            }
            DomainSpec::Disk { radius } => {
                let th = s / radius;
                let (sn, cs) = th.sin_cos();
                (Vec2::new(radius * cs, radius * sn), Vec2::new(-sn, cs))
            }
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn distance_to_boundary(&self, x: &Vec2) -> f64 {
        match self.spec {
            DomainSpec::Rectangle { width, height } => {
                let dx = x.x.min(width - x.x);
                let dy = x.y.min(height - x.y);
                if dx >= 0.0 && dy >= 0.0 {
                    dx.min(dy)
                } else {
                    // outside: Euclidean distance to the rectangle
                    let ox = (-x.x).max(x.x - width).max(0.0);
                    let oy = (-x.y).max(x.y - height).max(0.0);
                    -(ox * ox + oy * oy).sqrt()
                }
            }
            DomainSpec::Disk { radius } => radius - x.norm(),
        }
    }

    /// Closed-domain membership with a small tolerance.
    pub fn contains(&self, x: &Vec2) -> bool {
        self.distance_to_boundary(x) >= -ON_BOUNDARY_TOL
    }

    pub fn on_boundary(&self, x: &Vec2) -> bool {
        self.distance_to_boundary(x).abs() <= ON_BOUNDARY_TOL
    }

    /// True if `x` lies within `tol` of a rectangle corner (never for disks).
    pub fn is_corner(&self, x: &Vec2, tol: f64) -> bool {
        match self.spec {
            DomainSpec::Rectangle { width, height } => {
                let nx = x.x.abs() <= tol || (x.x - width).abs() <= tol;
                let ny = x.y.abs() <= tol || (x.y - height).abs() <= tol;
                nx && ny
            }
            DomainSpec::Disk { .. } => false,
        }
    }

    /// Outward unit normal at a (non-corner) boundary point.
    pub fn outward_normal(&self, x: &Vec2) -> Result<Vec2> {
        if !self.on_boundary(x) {
            bail!(
                Classification,
                "point ({}, {}) is not on the boundary",
                x.x,
                x.y
            );
        }
        if self.is_corner(x, ON_BOUNDARY_TOL) {
            bail!(Classification, "corner point ({}, {})", x.x, x.y);
        }
        Ok(self.normal_unchecked(x))
    }

    /// Normal of the nearest boundary piece, no validation.
    pub(crate) fn normal_unchecked(&self, x: &Vec2) -> Vec2 {
        match self.spec {
            DomainSpec::Rectangle { width, height } => {
                let cand = [
                    (x.y.abs(), Vec2::new(0.0, -1.0)),
                    ((x.x - width).abs(), Vec2::new(1.0, 0.0)),
                    ((x.y - height).abs(), Vec2::new(0.0, 1.0)),
                    (x.x.abs(), Vec2::new(-1.0, 0.0)),
                ];
                let mut best = cand[0];
                for c in &cand[1..] {
                    if c.0 < best.0 {
                        best = *c;
                    }
                }
                best.1
            }
            DomainSpec::Disk { .. } => x / x.norm(),
        }
    }

    /// Boundary curvature seen from inside (1/R for the disk, 0 on flat sides).
    pub fn curvature(&self) -> f64 {
        match self.spec {
            DomainSpec::Rectangle { .. } => 0.0,
            DomainSpec::Disk { radius } => 1.0 / radius,
        }
    }
}

// ---------------------------------------------------------------------------
// Damping

/// Support shape of the damping coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingShape {
    /// `{x : dist(x, ∂Ω) ≤ width}`.
    BoundaryCollar { width: f64 },
    /// Closed disk `|x − center| ≤ radius`.
    DiskPatch { center: [f64; 2], radius: f64 },
    /// Band of the given depth along one side of the bounding box.
    SideStrip { side: Side, depth: f64 },
    /// Whole domain (constant damping).
    Uniform,
}

/// `a(x) = amplitude · ramp(dist(x, support) / smoothing_width)` with a
/// piecewise-linear ramp from 1 on the support to 0 at `smoothing_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingProfile {
    pub shape: DampingShape,
    pub amplitude: f64,
    #[serde(default)]
    pub smoothing_width: f64,
}

/// Region `{a > 0}` as a union of elementary sets, used for exact ray entry.
#[derive(Debug, Clone, PartialEq)]
pub enum PositiveSet {
    Empty,
    All,
    /// Open disk.
    Disk { center: Vec2, radius: f64 },
    /// Complement of the closed disk.
    OutsideDisk { center: Vec2, radius: f64 },
    /// Union of open half-planes `{x : n·x < c}` with unit `n`.
    HalfPlanes(alloc::vec::Vec<(Vec2, f64)>),
}

impl DampingProfile {
    pub fn new(shape: DampingShape, amplitude: f64, smoothing_width: f64) -> Result<Self> {
        let p = DampingProfile {
            shape,
            amplitude,
            smoothing_width,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn zero() -> Self {
        DampingProfile {
            shape: DampingShape::Uniform,
            amplitude: 0.0,
            smoothing_width: 0.0,
        }
    }

    pub fn uniform(amplitude: f64) -> Self {
        DampingProfile {
            shape: DampingShape::Uniform,
            amplitude,
            smoothing_width: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            bail!(Config, "damping amplitude must be nonnegative, got {}", self.amplitude);
        }
        if !(self.smoothing_width >= 0.0 && self.smoothing_width.is_finite()) {
            bail!(Config, "smoothing width must be nonnegative, got {}", self.smoothing_width);
        }
        match self.shape {
            DampingShape::BoundaryCollar { width } if !(width > 0.0) => {
                bail!(Config, "collar width must be positive, got {width}")
            }
            DampingShape::DiskPatch { radius, .. } if !(radius > 0.0) => {
                bail!(Config, "patch radius must be positive, got {radius}")
            }
            DampingShape::SideStrip { depth, .. } if !(depth > 0.0) => {
                bail!(Config, "strip depth must be positive, got {depth}")
            }
            _ => Ok(()),
        }
    }

    pub fn sup(&self) -> f64 {
        self.amplitude
    }

    /// Multiply the amplitude by `s ≥ 0`.
    pub fn scaled(&self, s: f64) -> Self {
        DampingProfile {
            amplitude: self.amplitude * s,
            ..*self
        }
    }

    /// Distance from `x` to the nominal support (0 inside it).
    fn distance_to_support(&self, domain: &Domain, x: &Vec2) -> f64 {
        match self.shape {
            DampingShape::BoundaryCollar { width } => {
                (domain.distance_to_boundary(x) - width).max(0.0)
            }
            DampingShape::DiskPatch { center, radius } => {
                ((x - Vec2::new(center[0], center[1])).norm() - radius).max(0.0)
            }
            DampingShape::SideStrip { side, depth } => {
                let (x0, x1, y0, y1) = domain.bounding_box();
                let d = match side {
                    Side::Left => x.x - x0,
                    Side::Right => x1 - x.x,
                    Side::Bottom => x.y - y0,
                    Side::Top => y1 - x.y,
                };
                (d - depth).max(0.0)
            }
            DampingShape::Uniform => 0.0,
        }
    }

    fn ramp(&self, dist: f64) -> f64 {
        if dist <= 0.0 {
            1.0
        } else if self.smoothing_width > 0.0 && dist < self.smoothing_width {
            1.0 - dist / self.smoothing_width
        } else {
            0.0
        }
    }

    /// Unchecked evaluation; `x` may lie slightly outside the domain.
    pub fn value(&self, domain: &Domain, x: &Vec2) -> f64 {
        self.amplitude * self.ramp(self.distance_to_support(domain, x))
    }

    /// The set `{a > 0}` restricted to nothing (callers intersect with Ω).
    pub fn positive_set(&self, domain: &Domain) -> PositiveSet {
        use alloc::vec;
        if self.amplitude <= 0.0 {
            return PositiveSet::Empty;
        }
        let grow = self.smoothing_width;
        match self.shape {
            DampingShape::Uniform => PositiveSet::All,
            DampingShape::DiskPatch { center, radius } => PositiveSet::Disk {
                center: Vec2::new(center[0], center[1]),
                radius: radius + grow,
            },
            DampingShape::SideStrip { side, depth } => {
                let (x0, x1, y0, y1) = domain.bounding_box();
                let m = depth + grow;
                let hp = match side {
                    Side::Left => (Vec2::new(1.0, 0.0), x0 + m),
                    Side::Right => (Vec2::new(-1.0, 0.0), -(x1 - m)),
                    Side::Bottom => (Vec2::new(0.0, 1.0), y0 + m),
                    Side::Top => (Vec2::new(0.0, -1.0), -(y1 - m)),
                };
                PositiveSet::HalfPlanes(vec![hp])
            }
            DampingShape::BoundaryCollar { width } => {
                let m = width + grow;
                match domain.spec() {
                    DomainSpec::Disk { radius } => {
                        if m >= radius {
                            PositiveSet::All
                        } else {
                            PositiveSet::OutsideDisk {
                                center: Vec2::zeros(),
                                radius: radius - m,
                            }
                        }
                    }
                    DomainSpec::Rectangle { width: w, height: h } => {
                        if 2.0 * m >= w.min(h) {
                            PositiveSet::All
                        } else {
                            PositiveSet::HalfPlanes(vec![
                                (Vec2::new(1.0, 0.0), m),
                                (Vec2::new(-1.0, 0.0), -(w - m)),
                                (Vec2::new(0.0, 1.0), m),
                                (Vec2::new(0.0, -1.0), -(h - m)),
                            ])
                        }
                    }
                }
            }
        }
    }
}

/// A damping profile bound to the domain it lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingField {
    pub domain: Domain,
    pub profile: DampingProfile,
}

impl DampingField {
    pub fn new(domain: Domain, profile: DampingProfile) -> Result<Self> {
        profile.validate()?;
        Ok(DampingField { domain, profile })
    }

    /// `a(x)`; errors when `x` is outside the closed domain.
    pub fn eval(&self, x: &Vec2) -> Result<f64> {
        eval_damping(&self.profile, &self.domain, x)
    }

    /// Evaluation without the domain check (quadrature nodes are inside).
    pub fn value(&self, x: &Vec2) -> f64 {
        self.profile.value(&self.domain, x)
    }

    pub fn positive_set(&self) -> PositiveSet {
        self.profile.positive_set(&self.domain)
    }
}

pub fn eval_damping(profile: &DampingProfile, domain: &Domain, x: &Vec2) -> Result<f64> {
    if !domain.contains(x) {
        bail!(Domain, "point ({}, {}) lies outside the domain", x.x, x.y);
    }
    Ok(profile.value(domain, x))
}

// ---------------------------------------------------------------------------
// Boundary classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeTag {
    Elliptic,
    Hyperbolic,
    Glancing,
}

/// Sub-classification of a glancing point by the sign of `r1 = ∂_y r|_{y=0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlancingSign {
    /// `r1 < 0`: the ray stays on the boundary.
    Gliding,
    /// `r1 > 0`: the ray passes into the interior.
    Transversal,
    /// Higher-order contact (not produced by the supported domains).
    HigherOrder,
    /// `r1 = 0` on a flat side (infinite-order contact).
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRegime {
    pub tag: RegimeTag,
    pub r0: f64,
    pub r1: f64,
    pub glancing_sign: Option<GlancingSign>,
}

impl BoundaryRegime {
    pub fn is_glancing(&self) -> bool {
        self.tag == RegimeTag::Glancing
    }
}

/// Classify `(x', ξ')` with `r = 1 − |ξ'|²` evaluated in geodesic normal
/// coordinates. On a disk of radius `R` the tangential metric at depth `y` is
/// `(R/(R−y))²`, giving `r1 = −2|ξ'|²/R`; on flat sides `r1 = 0`.
pub fn classify_boundary_point(
    domain: &Domain,
    x_boundary: &Vec2,
    xi_tangential: f64,
) -> Result<BoundaryRegime> {
    classify_with_tolerance(domain, x_boundary, xi_tangential, GLANCING_R0_TOL)
}

pub(crate) fn classify_with_tolerance(
    domain: &Domain,
    x_boundary: &Vec2,
    xi_tangential: f64,
    r0_tol: f64,
) -> Result<BoundaryRegime> {
    // validates boundary membership and rejects corners
    domain.outward_normal(x_boundary)?;
    let xt2 = xi_tangential * xi_tangential;
    let r0 = 1.0 - xt2;
    let r1 = -2.0 * xt2 * domain.curvature();
    let (tag, glancing_sign) = if r0.abs() <= r0_tol {
        let sign = if domain.curvature() == 0.0 {
            GlancingSign::Flat
        } else if r1 < 0.0 {
            GlancingSign::Gliding
        } else if r1 > 0.0 {
            GlancingSign::Transversal
        } else {
            GlancingSign::HigherOrder
        };
        (RegimeTag::Glancing, Some(sign))
    } else if r0 < 0.0 {
        (RegimeTag::Elliptic, None)
    } else {
        (RegimeTag::Hyperbolic, None)
    };
    Ok(BoundaryRegime {
        tag,
        r0,
        r1,
        glancing_sign,
    })
}
