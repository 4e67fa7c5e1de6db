//! Event density and integrals over sectors.
//!
//! Every sector integral is evaluated in polar coordinates about the sector's
//! reference point `r`: a point is `q = r + κ d(θ)` with `θ` spanning the
//! sector and `κ` running from zero to the boundary along each ray, so the
//! area element is `κ dκ dθ`.

use std::f64::consts::E;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{
    point_in_sector, wrap_angle, FullSector, GeometryError, RegionBoundary, Sector,
};
use crate::point::Point;
use crate::quadrature::Quadrature;

/// Grid resolution used when bounds of a density have to be found by scanning.
const BOUND_SCAN_RESOLUTION: usize = 512;

/// Relative padding applied to a scanned upper bound.
const UPPER_BOUND_PAD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("sector has zero angular width")]
    EmptySector,
    #[error("invalid density: {0}")]
    InvalidDensity(String),
}

pub type DensityFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Strictly positive, bounded event density over the region.
#[derive(Clone)]
pub struct DensityField {
    eval: DensityFn,
    lower_bound: f64,
    upper_bound: f64,
    singular_point: Option<Point>,
}

impl fmt::Debug for DensityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityField")
            .field("lower_bound", &self.lower_bound)
            .field("upper_bound", &self.upper_bound)
            .field("singular_point", &self.singular_point)
            .finish_non_exhaustive()
    }
}

impl DensityField {
    pub fn new(
        eval: impl Fn(Point) -> f64 + Send + Sync + 'static,
        lower_bound: f64,
        upper_bound: f64,
    ) -> Result<Self, FieldError> {
        if !(lower_bound > 0.0 && lower_bound.is_finite()) {
            return Err(FieldError::InvalidDensity(format!(
                "lower bound must be positive, got {lower_bound}"
            )));
        }
        if !(upper_bound >= lower_bound && upper_bound.is_finite()) {
            return Err(FieldError::InvalidDensity(format!(
                "upper bound {upper_bound} below lower bound {lower_bound}"
            )));
        }
        Ok(Self {
            eval: Arc::new(eval),
            lower_bound,
            upper_bound,
            singular_point: None,
        })
    }

    pub fn uniform(value: f64) -> Result<Self, FieldError> {
        Self::new(move |_| value, value, value)
    }

    /// Wraps `eval`, deriving its bounds by a grid scan over `boundary`.
    pub fn scanned(
        eval: impl Fn(Point) -> f64 + Send + Sync + 'static,
        boundary: &RegionBoundary,
    ) -> Result<Self, FieldError> {
        let (lo, hi) = scan_bounds(&eval, boundary, BOUND_SCAN_RESOLUTION);
        if !(lo > 0.0) {
            return Err(FieldError::InvalidDensity(format!(
                "density is not strictly positive on the region (min {lo})"
            )));
        }
        Self::new(eval, lo, hi * (1.0 + UPPER_BOUND_PAD))
    }

    /// `ρ(x, y) = Σ c[i][j] xⁱ yʲ`, required to be positive on `boundary`.
    pub fn polynomial(
        coefficients: Vec<Vec<f64>>,
        boundary: &RegionBoundary,
    ) -> Result<Self, FieldError> {
        if coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(FieldError::InvalidDensity(
                "polynomial coefficients must be finite".into(),
            ));
        }
        let eval = move |p: Point| {
            let mut xi = 1.0;
            let mut total = 0.0;
            for row in &coefficients {
                let mut yj = 1.0;
                for &c in row {
                    total += c * xi * yj;
                    yj *= p.y;
                }
                xi *= p.x;
            }
            total
        };
        Self::scanned(eval, boundary)
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        (self.eval)(p)
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper_bound
    }

    /// Marks a point where the density is bounded but not smooth (for
    /// instance direction-dependent). Sector and pointer integrals then
    /// resolve the neighbourhood of that point explicitly.
    pub fn with_singular_point(mut self, p: Point) -> Self {
        self.singular_point = Some(p);
        self
    }

    pub fn singular_point(&self) -> Option<Point> {
        self.singular_point
    }

    /// Whether `value` respects the stored bounds.
    pub fn within_bounds(&self, value: f64) -> bool {
        value >= self.lower_bound && value <= self.upper_bound
    }
}

fn scan_bounds(
    eval: &impl Fn(Point) -> f64,
    boundary: &RegionBoundary,
    resolution: usize,
) -> (f64, f64) {
    let (lo, hi) = boundary.bounding_box();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=resolution {
        let x = lo.x + (hi.x - lo.x) * i as f64 / resolution as f64;
        for j in 0..=resolution {
            let y = lo.y + (hi.y - lo.y) * j as f64 / resolution as f64;
            let p = Point::new(x, y);
            if boundary.contains(p) {
                let v = eval(p);
                min = min.min(v);
                max = max.max(v);
            }
        }
    }
    (min, max)
}

/// Density of the elliptical benchmark:
/// `1e-4 (exp(sin²θ + cos θ) + ‖q‖)` with `θ` the full-range polar angle of
/// `q` (taken as zero at the origin).
#[inline]
pub fn paper_density_value(p: Point) -> f64 {
    let r = p.norm();
    let angular = if r > 0.0 {
        let (s, c) = (p.y / r, p.x / r);
        (s * s + c).exp()
    } else {
        E
    };
    1e-4 * (angular + r)
}

/// Benchmark density on the default 5×3 ellipse.
pub fn paper_density() -> DensityField {
    let ellipse = RegionBoundary::ellipse(5.0, 3.0).expect("valid ellipse");
    paper_density_on(&ellipse)
}

/// Benchmark density with its upper bound scanned over `boundary`.
///
/// The lower bound is the infimum `1e-4·e⁻¹` (approached at the origin along
/// the negative x-axis), which holds on any region.
pub fn paper_density_on(boundary: &RegionBoundary) -> DensityField {
    let (_, hi) = scan_bounds(&paper_density_value, boundary, BOUND_SCAN_RESOLUTION);
    let lower = 1e-4 / E;
    DensityField::new(
        paper_density_value,
        lower,
        (hi * (1.0 + UPPER_BOUND_PAD)).max(lower),
    )
    .expect("benchmark density bounds are consistent")
    .with_singular_point(Point::ORIGIN)
}

/// Mass, first moment and polar second moment of one sector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SectorIntegrals {
    /// `∫ ρ dq`
    pub mass: f64,
    /// `(∫ x ρ dq, ∫ y ρ dq)`
    pub moment: Point,
    /// `∫ ‖q‖² ρ dq`
    pub second_moment: f64,
}

impl SectorIntegrals {
    pub fn centroid(&self) -> Result<Point, FieldError> {
        if self.mass > 0.0 {
            Ok(self.moment / self.mass)
        } else {
            Err(FieldError::EmptySector)
        }
    }
}

/// Below this fraction of the ray length a singular point is treated as
/// lying on the ray's origin, and the sinh map's length scale is floored.
const SINGULAR_SCALE_FLOOR: f64 = 1e-6;

/// Longest stretch of the sinh parameter covered by one radial rule.
const MAX_SINH_PIECE: f64 = 4.0;

/// Radial nodes `(κ, w)` on `[0, reach]` along direction `dir` from `origin`,
/// so that `Σ w f(κ) ≈ ∫ f dκ`.
///
/// Near a singular point `s` of the density, the ray passes at distance `d`
/// with closest approach at `κ*`. Substituting `κ = κ* + d sinh t` spreads the
/// fast variation around `κ*` over an O(1) range of `t`, and the ray is split
/// at `κ*` when that lies inside it.
fn visit_ray(
    density: &DensityField,
    origin: Point,
    dir: Point,
    reach: f64,
    quad: &Quadrature,
    mut visit: impl FnMut(f64, f64),
) {
    let (rule, sub) = (&quad.radial, &quad.sub_radial);
    let near = density
        .singular_point()
        .map(|s| s - origin)
        .filter(|s| s.norm() > SINGULAR_SCALE_FLOOR * reach);
    let Some(s) = near else {
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            visit(reach * t, reach * w);
        }
        return;
    };
    let closest = s.dot(dir);
    let offset = (s.x * dir.y - s.y * dir.x)
        .abs()
        .max(SINGULAR_SCALE_FLOOR * reach);
    let ta = (-closest / offset).asinh();
    let tb = ((reach - closest) / offset).asinh();
    // The mapped integrand is analytic in a strip of fixed width about the
    // real t axis, so long t ranges are cut into bounded pieces.
    let mut piece = |a: f64, b: f64| {
        let pieces = ((b - a) / MAX_SINH_PIECE).ceil().max(1.0) as usize;
        let len = (b - a) / pieces as f64;
        for k in 0..pieces {
            let a = a + k as f64 * len;
            for (&u, &w) in sub.nodes.iter().zip(&sub.weights) {
                let e = (a + len * u).exp();
                let (sinh, cosh) = (0.5 * (e - 1.0 / e), 0.5 * (e + 1.0 / e));
                visit(closest + offset * sinh, w * len * offset * cosh);
            }
        }
    };
    if ta < 0.0 && tb > 0.0 {
        piece(ta, 0.0);
        piece(0.0, tb);
    } else {
        piece(ta, tb);
    }
}

/// Widest angular panel integrated with a single angular rule; wider
/// sectors are split into equal panels.
pub const MAX_ANGULAR_PANEL: f64 = std::f64::consts::FRAC_PI_2;

/// Geometric grading of the angular panels next to the bearing of a
/// singular point: cuts at `σᵏ` of the neighbouring panel width.
const GRADING_RATIO: f64 = 0.15;
const GRADING_LEVELS: i32 = 4;

/// Angular panels `(start, width, graded)` covering the sector: split at
/// the bearing of the density's singular point when that falls strictly
/// inside, graded geometrically towards that bearing, and otherwise cut into
/// pieces no wider than [`MAX_ANGULAR_PANEL`]. Graded panels are short and
/// take the sub-panel rule.
fn angular_panels(density: &DensityField, sector: FullSector) -> Vec<(f64, f64, bool)> {
    let start = sector.phase_start;
    let mut panels = Vec::with_capacity(4);
    let plain = |panels: &mut Vec<_>, a: f64, b: f64| {
        let pieces = ((b - a) / MAX_ANGULAR_PANEL).ceil().max(1.0) as usize;
        let step = (b - a) / pieces as f64;
        panels.extend((0..pieces).map(|k| (start + a + k as f64 * step, step, false)));
    };
    let split = density.singular_point().and_then(|s| {
        let to = s - sector.reference;
        let split = wrap_angle(to.y.atan2(to.x) - start);
        let margin = 1e-9 * sector.width;
        (to.norm() > 0.0 && split > margin && split < sector.width - margin).then_some(split)
    });
    let Some(split) = split else {
        plain(&mut panels, 0.0, sector.width);
        return panels;
    };
    let (left, right) = (split, sector.width - split);
    let mut cuts: Vec<f64> = (1..=GRADING_LEVELS)
        .map(|k| split - left * GRADING_RATIO.powi(k))
        .collect();
    cuts.push(split);
    cuts.extend(
        (1..=GRADING_LEVELS)
            .rev()
            .map(|k| split + right * GRADING_RATIO.powi(k)),
    );
    plain(&mut panels, 0.0, cuts[0]);
    panels.extend(cuts.windows(2).map(|w| (start + w[0], w[1] - w[0], true)));
    plain(&mut panels, cuts[cuts.len() - 1], sector.width);
    panels
}

/// Visits every polar quadrature node of `sector` with its full weight
/// (angular · radial · Jacobian · density).
fn for_each_node(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: FullSector,
    quad: &Quadrature,
    mut visit: impl FnMut(Point, f64),
) -> Result<(), FieldError> {
    if sector.width <= 0.0 {
        return Ok(());
    }
    for (start, width, graded) in angular_panels(density, sector) {
        let rule = if graded {
            &quad.sub_angular
        } else {
            &quad.angular
        };
        for (&ta, &wa) in rule.nodes.iter().zip(&rule.weights) {
            let theta = start + width * ta;
            let reach = boundary.ray_boundary_distance(sector.reference, theta)?;
            let dir = Point::from_angle(theta);
            let ray_weight = wa * width;
            visit_ray(density, sector.reference, dir, reach, quad, |kappa, wr| {
                let q = sector.reference + dir * kappa;
                visit(q, ray_weight * wr * kappa * density.eval(q));
            });
        }
    }
    Ok(())
}

pub fn sector_integrals(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<SectorIntegrals, FieldError> {
    let mut acc = SectorIntegrals::default();
    for_each_node(boundary, density, sector.into(), quad, |q, w| {
        acc.mass += w;
        acc.moment += q * w;
        acc.second_moment += q.norm_squared() * w;
    })?;
    Ok(acc)
}

/// Workload `m = ∫_sector ρ dq`; exactly zero for a zero-width sector.
pub fn sector_mass(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<f64, FieldError> {
    let mut mass = 0.0;
    for_each_node(boundary, density, sector.into(), quad, |_, w| mass += w)?;
    Ok(mass)
}

pub fn sector_moment(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<Point, FieldError> {
    Ok(sector_integrals(boundary, density, sector, quad)?.moment)
}

pub fn sector_centroid(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<Point, FieldError> {
    let sector = sector.into();
    if sector.width <= 0.0 {
        return Err(FieldError::EmptySector);
    }
    sector_integrals(boundary, density, sector, quad)?.centroid()
}

/// Quadrature nodes of a sector with density-weighted weights, for costs that
/// need repeated evaluation over the same sector.
pub fn sector_nodes(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<Vec<(Point, f64)>, FieldError> {
    let mut nodes = Vec::with_capacity(quad.config.radial_nodes * quad.config.angular_nodes);
    for_each_node(boundary, density, sector.into(), quad, |q, w| {
        nodes.push((q, w))
    })?;
    Ok(nodes)
}

/// Line integrals of the density along one pointer segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerIntegrals {
    /// `∫₀^κmax ρ(r + κd) κ dκ`: rate of mass swept per radian of rotation.
    pub swept: f64,
    /// `∫₀^κmax ρ(r + κd) dκ`: arc-length integral, rate of mass swept per
    /// unit normal translation of the segment.
    pub along: f64,
}

pub fn pointer_integrals(
    boundary: &RegionBoundary,
    density: &DensityField,
    origin: Point,
    angle: f64,
    quad: &Quadrature,
) -> Result<PointerIntegrals, FieldError> {
    let reach = boundary.ray_boundary_distance(origin, angle)?;
    let dir = Point::from_angle(angle);
    let (mut swept, mut along) = (0.0, 0.0);
    visit_ray(density, origin, dir, reach, quad, |kappa, w| {
        let rho = density.eval(origin + dir * kappa);
        swept += w * rho * kappa;
        along += w * rho;
    });
    Ok(PointerIntegrals { swept, along })
}

/// Sensitivities of a sector's mass to its two pointer angles and its
/// reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionGradients {
    /// `∂m/∂φ_start`, negative for a positive density.
    pub dm_dphi_start: f64,
    /// `∂m/∂φ_end`, positive for a positive density.
    pub dm_dphi_end: f64,
    /// `∂m/∂r` (row gradient).
    pub dm_dref: Point,
}

/// Outward normal of a sector on its start pointer.
#[inline]
pub fn start_pointer_normal(phase_start: f64) -> Point {
    let (s, c) = phase_start.sin_cos();
    Point::new(s, -c)
}

/// Outward normal of a sector on its end pointer.
#[inline]
pub fn end_pointer_normal(phase_end: f64) -> Point {
    let (s, c) = phase_end.sin_cos();
    Point::new(-s, c)
}

/// All mass sensitivities of `sector`.
///
/// Only the two pointer segments move with the sector parameters; the outer
/// boundary arc is fixed, so it contributes nothing.
pub fn partition_gradients(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<PartitionGradients, FieldError> {
    let sector = sector.into();
    let phase_end = sector.phase_end();
    let start = pointer_integrals(
        boundary,
        density,
        sector.reference,
        sector.phase_start,
        quad,
    )?;
    let end = pointer_integrals(boundary, density, sector.reference, phase_end, quad)?;
    Ok(PartitionGradients {
        dm_dphi_start: -start.swept,
        dm_dphi_end: end.swept,
        dm_dref: start_pointer_normal(sector.phase_start) * start.along
            + end_pointer_normal(phase_end) * end.along,
    })
}

/// `(∂m/∂φ_start, ∂m/∂φ_end)`.
pub fn mass_phase_gradients(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<(f64, f64), FieldError> {
    let g = partition_gradients(boundary, density, sector, quad)?;
    Ok((g.dm_dphi_start, g.dm_dphi_end))
}

/// `∂m/∂r`.
pub fn mass_reference_gradient(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    quad: &Quadrature,
) -> Result<Point, FieldError> {
    Ok(partition_gradients(boundary, density, sector, quad)?.dm_dref)
}

/// Brute-force mass and first moment: midpoint sum over a
/// `resolution × resolution` grid on the region's bounding box, keeping cells
/// whose centres fall in the sector.
pub fn grid_sector_oracle(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    resolution: usize,
) -> (f64, Point) {
    let sector = sector.into();
    if sector.width <= 0.0 {
        return (0.0, Point::ORIGIN);
    }
    let (lo, hi) = boundary.bounding_box();
    let dx = (hi.x - lo.x) / resolution as f64;
    let dy = (hi.y - lo.y) / resolution as f64;
    let (mut mass, mut moment) = (0.0, Point::ORIGIN);
    for i in 0..resolution {
        let x = lo.x + (i as f64 + 0.5) * dx;
        let (mut row_mass, mut row_moment) = (0.0, Point::ORIGIN);
        for j in 0..resolution {
            let q = Point::new(x, lo.y + (j as f64 + 0.5) * dy);
            if point_in_sector(sector, boundary, q) {
                let rho = density.eval(q);
                row_mass += rho;
                row_moment += q * rho;
            }
        }
        mass += row_mass;
        moment += row_moment;
    }
    let cell = dx * dy;
    (mass * cell, moment * cell)
}

pub fn grid_mass_oracle(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    resolution: usize,
) -> f64 {
    grid_sector_oracle(boundary, density, sector, resolution).0
}

/// Angular panels used for whole-region integrals.
const TOTAL_MASS_PANELS: usize = 8;

/// Mass of the whole region: the full turn about `reference`, split into
/// equal panels.
pub fn total_mass(
    boundary: &RegionBoundary,
    density: &DensityField,
    reference: Point,
    quad: &Quadrature,
) -> Result<f64, FieldError> {
    let width = std::f64::consts::TAU / TOTAL_MASS_PANELS as f64;
    (0..TOTAL_MASS_PANELS)
        .map(|k| {
            let sector = Sector::with_width(reference, k as f64 * width, width);
            sector_mass(boundary, density, sector, quad)
        })
        .sum()
}
