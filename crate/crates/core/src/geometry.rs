//! Coverage region, ray casting and angular sectors.
//!
//! The region is the sub-level set `{q | L(q) <= 0}` of a level function `L`.
//! Sectors are described in polar form about a reference point: every point
//! whose bearing from the reference lies in the counter-clockwise arc from
//! `phase_start` to `phase_end` belongs to the sector.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::point::Point;

/// Absolute tolerance on the ray parameter for bisection against a generic
/// level function.
pub const BISECTION_TOLERANCE: f64 = 1e-12;

/// Samples taken along a ray when scanning a generic level function for
/// sign changes.
const SIGN_SCAN_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("ray origin ({}, {}) is not strictly inside the region", .0.x, .0.y)]
    OriginOutsideRegion(Point),
    #[error("region is not star-shaped about ({}, {}) along angle {1}", .0.x, .0.y)]
    NonStarShaped(Point, f64),
    #[error("invalid region: {0}")]
    InvalidRegion(&'static str),
}

/// Level function of a generic region boundary.
pub type LevelFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// The coverage domain.
#[derive(Clone)]
pub enum RegionBoundary {
    /// `x²/a² + y²/b² - 1 <= 0`.
    Ellipse { semi_axis_a: f64, semi_axis_b: f64 },
    /// Arbitrary level function; every point of the region must lie within
    /// `bounding_radius` of the origin.
    Implicit {
        level: LevelFn,
        bounding_radius: f64,
    },
}

impl fmt::Debug for RegionBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ellipse {
                semi_axis_a,
                semi_axis_b,
            } => f
                .debug_struct("Ellipse")
                .field("semi_axis_a", semi_axis_a)
                .field("semi_axis_b", semi_axis_b)
                .finish(),
            Self::Implicit {
                bounding_radius, ..
            } => f
                .debug_struct("Implicit")
                .field("bounding_radius", bounding_radius)
                .finish_non_exhaustive(),
        }
    }
}

impl RegionBoundary {
    pub fn ellipse(semi_axis_a: f64, semi_axis_b: f64) -> Result<Self, GeometryError> {
        if !(semi_axis_a > 0.0 && semi_axis_a.is_finite()) {
            return Err(GeometryError::InvalidRegion("semi-axis a must be positive"));
        }
        if !(semi_axis_b > 0.0 && semi_axis_b.is_finite()) {
            return Err(GeometryError::InvalidRegion("semi-axis b must be positive"));
        }
        Ok(Self::Ellipse {
            semi_axis_a,
            semi_axis_b,
        })
    }

    /// Circle of the given radius centred on the origin.
    pub fn disk(radius: f64) -> Result<Self, GeometryError> {
        Self::ellipse(radius, radius)
    }

    pub fn implicit(
        level: impl Fn(Point) -> f64 + Send + Sync + 'static,
        bounding_radius: f64,
    ) -> Result<Self, GeometryError> {
        if !(bounding_radius > 0.0 && bounding_radius.is_finite()) {
            return Err(GeometryError::InvalidRegion(
                "bounding radius must be positive",
            ));
        }
        Ok(Self::Implicit {
            level: Arc::new(level),
            bounding_radius,
        })
    }

    /// Value of the level function `L` at `p`.
    #[inline]
    pub fn level(&self, p: Point) -> f64 {
        match self {
            Self::Ellipse {
                semi_axis_a,
                semi_axis_b,
            } => {
                let u = p.x / semi_axis_a;
                let v = p.y / semi_axis_b;
                u * u + v * v - 1.0
            }
            Self::Implicit { level, .. } => level(p),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self {
            Self::Ellipse {
                semi_axis_a,
                semi_axis_b,
            } => semi_axis_a.max(*semi_axis_b),
            Self::Implicit {
                bounding_radius, ..
            } => *bounding_radius,
        }
    }

    /// Axis-aligned box `(min, max)` enclosing the region.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Self::Ellipse {
                semi_axis_a,
                semi_axis_b,
            } => (
                Point::new(-semi_axis_a, -semi_axis_b),
                Point::new(*semi_axis_a, *semi_axis_b),
            ),
            Self::Implicit {
                bounding_radius, ..
            } => (
                Point::new(-bounding_radius, -bounding_radius),
                Point::new(*bounding_radius, *bounding_radius),
            ),
        }
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        self.level(p) <= 0.0
    }

    #[inline]
    pub fn contains_strictly(&self, p: Point) -> bool {
        self.level(p) < 0.0
    }

    /// Distance from `origin` along the ray at `angle` to the region boundary.
    pub fn ray_boundary_distance(&self, origin: Point, angle: f64) -> Result<f64, GeometryError> {
        if !(self.level(origin) < 0.0) {
            return Err(GeometryError::OriginOutsideRegion(origin));
        }
        let dir = Point::from_angle(angle);
        match self {
            Self::Ellipse {
                semi_axis_a,
                semi_axis_b,
            } => Ok(ellipse_ray_distance(
                *semi_axis_a,
                *semi_axis_b,
                origin,
                dir,
            )),
            Self::Implicit {
                level,
                bounding_radius,
            } => implicit_ray_distance(level.as_ref(), 2.0 * bounding_radius, origin, dir, angle),
        }
    }

    /// Point where the ray from `origin` at `angle` meets the boundary.
    pub fn ray_boundary_point(&self, origin: Point, angle: f64) -> Result<Point, GeometryError> {
        let reach = self.ray_boundary_distance(origin, angle)?;
        Ok(origin + Point::from_angle(angle) * reach)
    }
}

/// Positive root of `A κ² + B κ + C = 0` with `C < 0`.
fn ellipse_ray_distance(a: f64, b: f64, origin: Point, dir: Point) -> f64 {
    let (ia2, ib2) = (1.0 / (a * a), 1.0 / (b * b));
    let qa = dir.x * dir.x * ia2 + dir.y * dir.y * ib2;
    let qb = 2.0 * (origin.x * dir.x * ia2 + origin.y * dir.y * ib2);
    let qc = origin.x * origin.x * ia2 + origin.y * origin.y * ib2 - 1.0;
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    // Pick the cancellation-free form of the positive root.
    if qb >= 0.0 {
        -2.0 * qc / (qb + disc)
    } else {
        (disc - qb) / (2.0 * qa)
    }
}

fn implicit_ray_distance(
    level: &(dyn Fn(Point) -> f64 + Send + Sync),
    max_reach: f64,
    origin: Point,
    dir: Point,
    angle: f64,
) -> Result<f64, GeometryError> {
    let at = |k: f64| level(origin + dir * k);
    let step = max_reach / SIGN_SCAN_SAMPLES as f64;
    let mut exit = None;
    for s in 1..=SIGN_SCAN_SAMPLES {
        let k = step * s as f64;
        let inside = at(k) <= 0.0;
        match exit {
            None if !inside => exit = Some(s),
            Some(_) if inside => return Err(GeometryError::NonStarShaped(origin, angle)),
            _ => {}
        }
    }
    let Some(s) = exit else {
        return Err(GeometryError::InvalidRegion(
            "region extends past its bounding radius",
        ));
    };
    let (mut lo, mut hi) = (step * (s - 1) as f64, step * s as f64);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maps any finite angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Counter-clockwise angular extent from `phase_start` to `phase_end`, in `[0, 2π)`.
#[inline]
pub fn sector_angular_width(phase_start: f64, phase_end: f64) -> f64 {
    wrap_angle(phase_end - phase_start)
}

/// One agent's subregion: the part of the region swept counter-clockwise
/// from the `phase_start` pointer to the `phase_end` pointer about `reference`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector {
    pub reference: Point,
    pub phase_start: f64,
    pub phase_end: f64,
}

impl Sector {
    pub fn new(reference: Point, phase_start: f64, phase_end: f64) -> Self {
        Self {
            reference,
            phase_start: wrap_angle(phase_start),
            phase_end: wrap_angle(phase_end),
        }
    }

    /// Sector with explicit start angle and counter-clockwise width.
    ///
    /// A width of `2π` (or more) is kept as a full turn rather than wrapped to
    /// zero, which is what the integration routines need for whole-region
    /// sectors.
    pub fn with_width(reference: Point, phase_start: f64, width: f64) -> FullSector {
        FullSector {
            reference,
            phase_start: wrap_angle(phase_start),
            width: width.clamp(0.0, TAU),
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        sector_angular_width(self.phase_start, self.phase_end)
    }

    pub fn span(&self) -> FullSector {
        FullSector {
            reference: self.reference,
            phase_start: self.phase_start,
            width: self.width(),
        }
    }
}

/// Sector described by start angle and width; unlike [`Sector`] it can
/// represent the full turn `width = 2π`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullSector {
    pub reference: Point,
    pub phase_start: f64,
    pub width: f64,
}

impl FullSector {
    pub fn full_turn(reference: Point) -> Self {
        Self {
            reference,
            phase_start: 0.0,
            width: TAU,
        }
    }

    #[inline]
    pub fn phase_end(&self) -> f64 {
        self.phase_start + self.width
    }
}

impl From<Sector> for FullSector {
    fn from(s: Sector) -> Self {
        s.span()
    }
}

/// Bearing of `p` seen from `reference`, in `[0, 2π)`.
#[inline]
pub fn bearing(reference: Point, p: Point) -> f64 {
    wrap_angle((p.y - reference.y).atan2(p.x - reference.x))
}

/// Whether `p` lies in the region and inside the angular span of `sector`.
/// The reference point itself belongs to the sector.
pub fn point_in_sector(sector: impl Into<FullSector>, boundary: &RegionBoundary, p: Point) -> bool {
    let sector = sector.into();
    if !boundary.contains(p) {
        return false;
    }
    if p == sector.reference {
        return true;
    }
    let offset = wrap_angle(bearing(sector.reference, p) - sector.phase_start);
    offset <= sector.width
}
