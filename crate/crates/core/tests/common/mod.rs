#![allow(dead_code)]

use std::f64::consts::TAU;

use rotary_coverage::dynamics::{AgentRates, CoverageModel, Gains};
use rotary_coverage::field::{
    paper_density, sector_centroid, sector_mass, total_mass, DensityField,
};
use rotary_coverage::geometry::{wrap_angle, RegionBoundary, Sector};
use rotary_coverage::network::RingTopology;
use rotary_coverage::state::{AgentState, SeededRng, SwarmState};
use rotary_coverage::{Point, Quadrature};

pub fn ellipse() -> RegionBoundary {
    RegionBoundary::ellipse(5.0, 3.0).unwrap()
}

pub fn paper_model() -> CoverageModel {
    CoverageModel::new(
        ellipse(),
        paper_density(),
        Gains::default(),
        Quadrature::default(),
    )
    .unwrap()
}

pub fn uniform_model(boundary: RegionBoundary) -> CoverageModel {
    CoverageModel::new(
        boundary,
        DensityField::uniform(1.0).unwrap(),
        Gains::default(),
        Quadrature::default(),
    )
    .unwrap()
}

/// `1 + Σ c_ij xⁱ yʲ` with small random coefficients, positive on the region.
pub fn random_polynomial(boundary: &RegionBoundary, rng: &mut SeededRng) -> DensityField {
    let reach = boundary.bounding_radius();
    let mut c = vec![vec![0.0; 3]; 3];
    c[0][0] = 1.0;
    for (i, row) in c.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i + j > 0 && i + j <= 2 {
                *v = rng.uniform_in(-0.2, 0.2) / reach.powi((i + j) as i32);
            }
        }
    }
    DensityField::polynomial(c, boundary).unwrap()
}

/// Phases about `reference` splitting the region into `n` sectors of equal
/// mass, found by bisection on each sector's width.
pub fn equal_mass_phases(
    boundary: &RegionBoundary,
    density: &DensityField,
    reference: Point,
    n: usize,
    first: f64,
    quad: &Quadrature,
) -> Vec<f64> {
    let share = total_mass(boundary, density, reference, quad).unwrap() / n as f64;
    let mut phases = vec![wrap_angle(first)];
    let mut start = first;
    for _ in 1..n {
        let (mut lo, mut hi) = (0.0, TAU);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let m = sector_mass(
                boundary,
                density,
                Sector::with_width(reference, start, mid),
                quad,
            )
            .unwrap();
            if m < share {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        start += 0.5 * (lo + hi);
        phases.push(wrap_angle(start));
    }
    phases
}

/// Consensus state: one common reference, equal workloads, every agent at
/// its sector centroid. Agents are ordered by phase.
pub fn consensus_state(
    model: &CoverageModel,
    reference: Point,
    n: usize,
    first: f64,
) -> SwarmState {
    let phases = equal_mass_phases(
        &model.boundary,
        &model.density,
        reference,
        n,
        first,
        &model.quadrature,
    );
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| phases[k]).collect();
    let agents = (0..n)
        .map(|i| {
            let sector = Sector::new(reference, sorted[i], sorted[(i + 1) % n]);
            AgentState {
                position: sector_centroid(
                    &model.boundary,
                    &model.density,
                    sector,
                    &model.quadrature,
                )
                .unwrap(),
                reference,
                phase: sorted[i],
            }
        })
        .collect();
    SwarmState::new(agents, 0.0).unwrap()
}

pub fn random_state(boundary: &RegionBoundary, n: usize, seed: u64) -> SwarmState {
    SwarmState::random(boundary, n, &mut SeededRng::new(seed)).unwrap()
}

pub fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Exact area of the sector `[a, b]` of the unit disk seen from `(x, 0)`.
pub fn unit_disk_sector_area(x: f64, a: f64, b: f64) -> f64 {
    let f = |t: f64| {
        let u = x * t.sin();
        t / 2.0 + x * x * (2.0 * t).sin() / 4.0 - (u * (1.0 - u * u).sqrt() + u.asin()) / 2.0
    };
    f(b) - f(a)
}

/// Reference hugging the rim so the angular integrand is only barely
/// analytic and Gauss-Legendre error stays above rounding at 64 nodes.
pub const RIM_FIXTURE: (f64, f64, f64) = (0.99999, 1.2, 1.9);

pub fn rim_fixture_error(nodes: usize) -> f64 {
    let (x, a, b) = RIM_FIXTURE;
    let disk = RegionBoundary::disk(1.0).unwrap();
    let one = DensityField::uniform(1.0).unwrap();
    let quad = Quadrature::new(rotary_coverage::QuadratureConfig::gauss_legendre(
        nodes, nodes,
    ))
    .unwrap();
    let exact = unit_disk_sector_area(x, a, b);
    (sector_mass(&disk, &one, Sector::new(Point::new(x, 0.0), a, b), &quad).unwrap() - exact).abs()
        / exact
}

pub fn same_bits(a: &AgentRates, b: &AgentRates) -> bool {
    a.phase.to_bits() == b.phase.to_bits()
        && a.reference.x.to_bits() == b.reference.x.to_bits()
        && a.reference.y.to_bits() == b.reference.y.to_bits()
        && a.position.x.to_bits() == b.position.x.to_bits()
        && a.position.y.to_bits() == b.position.y.to_bits()
}

/// Poisons every quantity agent `i` is not granted: other agents'
/// positions, all phases but its own and its successor's, references
/// beyond the two ring neighbours, and every workload but those of
/// `i-2`, `i-1` and `i+1`.
pub fn redact(state: &SwarmState, masses: &[f64], i: usize) -> (SwarmState, Vec<f64>) {
    let ring = RingTopology::new(state.len()).unwrap();
    let [ip1, im1, im2] = ring.neighbors(i).unwrap();
    let agents = state
        .agents
        .iter()
        .enumerate()
        .map(|(j, a)| AgentState {
            position: if j == i {
                a.position
            } else {
                Point::new(f64::NAN, f64::NAN)
            },
            reference: if [i, im1, ip1].contains(&j) {
                a.reference
            } else {
                Point::new(f64::NAN, f64::NAN)
            },
            phase: if [i, ip1].contains(&j) {
                a.phase
            } else {
                f64::NAN
            },
        })
        .collect();
    let masses = (0..masses.len())
        .map(|j| {
            if [im2, im1, ip1].contains(&j) {
                masses[j]
            } else {
                f64::NAN
            }
        })
        .collect();
    (
        SwarmState {
            agents,
            time: state.time,
        },
        masses,
    )
}
