//! Self-test of a region/density pair: analytic mass sensitivities against
//! finite differences, conservation and additivity of the partition, the
//! sign of the pointer sensitivities, and quadrature against a brute-force
//! grid sum.

use std::f64::consts::TAU;

use crate::dynamics::equally_spaced_phases;
use crate::field::{
    grid_mass_oracle, partition_gradients, sector_mass, total_mass, DensityField, FieldError,
};
use crate::geometry::{RegionBoundary, Sector};
use crate::point::Point;
use crate::quadrature::Quadrature;
use crate::state::SeededRng;

pub const EXIT_CHECK_FAILED: i32 = 3;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-3;
pub const CONSERVATION_TOLERANCE: f64 = 1e-8;
pub const ADDITIVITY_TOLERANCE: f64 = 1e-8;
pub const GRID_RESOLUTION: usize = 2048;
pub const GRID_TOLERANCE: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: worst < tolerance,
            worst,
            tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: worst {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

/// Random sector whose reference lies in the inner 70% of the region.
pub fn random_sector(boundary: &RegionBoundary, rng: &mut SeededRng) -> Sector {
    let reference = loop {
        let p = rng.point_in(boundary);
        if boundary.contains_strictly(p / 0.7) {
            break p;
        }
    };
    let start = rng.uniform() * TAU;
    let width = rng.uniform_in(0.2, TAU - 0.2);
    Sector::new(reference, start, start + width)
}

fn relative(analytic: f64, numeric: f64, scale: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(scale)
}

/// Worst relative error between analytic and central-difference
/// sensitivities of sector mass over `cases` random sectors.
///
/// Errors are measured relative to the finite difference, floored at
/// `1e-6` of the sector's own mass to keep vanishing components meaningful.
pub fn gradient_errors(
    boundary: &RegionBoundary,
    density: &DensityField,
    quad: &Quadrature,
    cases: usize,
    seed: u64,
) -> Result<f64, FieldError> {
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let s = random_sector(boundary, &mut rng);
        let mass = |sec: Sector| sector_mass(boundary, density, sec, quad);
        let g = partition_gradients(boundary, density, s, quad)?;
        let floor = 1e-6 * mass(s)?;
        let h = FD_STEP;
        let d_start = (mass(Sector::new(s.reference, s.phase_start + h, s.phase_end))?
            - mass(Sector::new(s.reference, s.phase_start - h, s.phase_end))?)
            / (2.0 * h);
        let d_end = (mass(Sector::new(s.reference, s.phase_start, s.phase_end + h))?
            - mass(Sector::new(s.reference, s.phase_start, s.phase_end - h))?)
            / (2.0 * h);
        let shifted = |d: Point| Sector::new(s.reference + d, s.phase_start, s.phase_end);
        let d_ref = Point::new(
            (mass(shifted(Point::new(h, 0.0)))? - mass(shifted(Point::new(-h, 0.0)))?) / (2.0 * h),
            (mass(shifted(Point::new(0.0, h)))? - mass(shifted(Point::new(0.0, -h)))?) / (2.0 * h),
        );
        worst = worst
            .max(relative(g.dm_dphi_start, d_start, floor))
            .max(relative(g.dm_dphi_end, d_end, floor))
            .max((g.dm_dref - d_ref).norm() / d_ref.norm().max(floor));
    }
    Ok(worst)
}

/// `|Σ m_i - M| / M` for `n` sectors tiling the full turn about `reference`.
pub fn conservation_error(
    boundary: &RegionBoundary,
    density: &DensityField,
    quad: &Quadrature,
    reference: Point,
    n: usize,
    offset: f64,
) -> Result<f64, FieldError> {
    let phases = equally_spaced_phases(n, offset);
    let mut sum = 0.0;
    for i in 0..n {
        sum += sector_mass(
            boundary,
            density,
            Sector::new(reference, phases[i], phases[(i + 1) % n]),
            quad,
        )?;
    }
    let total = total_mass(boundary, density, reference, quad)?;
    Ok((sum - total).abs() / total)
}

/// Worst `|m(a, c) - m(a, b) - m(b, c)|` relative to `m(a, c)`.
pub fn additivity_error(
    boundary: &RegionBoundary,
    density: &DensityField,
    quad: &Quadrature,
    cases: usize,
    seed: u64,
) -> Result<f64, FieldError> {
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let s = random_sector(boundary, &mut rng);
        let split = s.phase_start + rng.uniform_in(0.1, 0.9) * s.width();
        let whole = sector_mass(boundary, density, s, quad)?;
        let a = sector_mass(
            boundary,
            density,
            Sector::new(s.reference, s.phase_start, split),
            quad,
        )?;
        let b = sector_mass(
            boundary,
            density,
            Sector::new(s.reference, split, s.phase_end),
            quad,
        )?;
        worst = worst.max((whole - a - b).abs() / whole);
    }
    Ok(worst)
}

/// Number of random sectors where the end pointer sensitivity is not
/// positive or the start pointer sensitivity is not negative.
pub fn sign_violations(
    boundary: &RegionBoundary,
    density: &DensityField,
    quad: &Quadrature,
    cases: usize,
    seed: u64,
) -> Result<usize, FieldError> {
    let mut rng = SeededRng::new(seed);
    let mut bad = 0;
    for _ in 0..cases {
        let g = partition_gradients(boundary, density, random_sector(boundary, &mut rng), quad)?;
        if !(g.dm_dphi_end > 0.0 && g.dm_dphi_start < 0.0) {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Worst relative gap between quadrature and a brute-force grid sum.
pub fn grid_errors(
    boundary: &RegionBoundary,
    density: &DensityField,
    quad: &Quadrature,
    cases: usize,
    resolution: usize,
    seed: u64,
) -> Result<f64, FieldError> {
    let mut rng = SeededRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let s = random_sector(boundary, &mut rng);
        let m = sector_mass(boundary, density, s, quad)?;
        let grid = grid_mass_oracle(boundary, density, s, resolution);
        worst = worst.max((m - grid).abs() / grid);
    }
    Ok(worst)
}

/// Full invariant suite. Conservation is checked with references collocated
/// at the origin, the point every supported region is built around.
pub fn run_checks(
    boundary: &RegionBoundary,
    density: &DensityField,
    quad: &Quadrature,
    seed: u64,
) -> Result<Vec<CheckResult>, FieldError> {
    let mut conservation: f64 = 0.0;
    for n in [3, 6, 12] {
        conservation = conservation.max(conservation_error(
            boundary,
            density,
            quad,
            Point::ORIGIN,
            n,
            0.3,
        )?);
    }
    Ok(vec![
        CheckResult::new(
            "mass sensitivities vs central differences",
            gradient_errors(boundary, density, quad, 100, seed)?,
            FD_TOLERANCE,
        ),
        CheckResult::new(
            "partition conservation",
            conservation,
            CONSERVATION_TOLERANCE,
        ),
        CheckResult::new(
            "sector additivity",
            additivity_error(boundary, density, quad, 50, seed ^ 1)?,
            ADDITIVITY_TOLERANCE,
        ),
        CheckResult::new(
            "pointer sensitivity signs",
            sign_violations(boundary, density, quad, 100, seed ^ 2)? as f64,
            0.5,
        ),
        CheckResult::new(
            "quadrature vs grid sum",
            grid_errors(boundary, density, quad, 5, GRID_RESOLUTION / 2, seed ^ 3)?,
            GRID_TOLERANCE,
        ),
    ])
}
