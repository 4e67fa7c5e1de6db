//! Partition dynamics, agent control law and time stepping.
//!
//! Each agent `i` carries a pointer angle `φ_i`, a reference point `r_i` and a
//! position `p_i`. Its sector runs from its own pointer to its successor's
//! pointer about `r_i`. Pointers rotate and references drift so as to equalise
//! neighbouring workloads and pull references together; positions chase the
//! optimal service point of their sector.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{
    self, pointer_integrals, sector_nodes, DensityField, FieldError, PartitionGradients,
    SectorIntegrals,
};
use crate::geometry::{sector_angular_width, wrap_angle, FullSector, RegionBoundary, Sector};
use crate::network::{self, NetworkError};
use crate::point::Point;
use crate::quadrature::Quadrature;
use crate::state::{AgentState, SwarmState};

/// Gradient-norm threshold for the generic local optimum search.
pub const OPTIMUM_GRADIENT_TOLERANCE: f64 = 1e-8;
/// Iteration cap for the generic local optimum search.
pub const OPTIMUM_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("agent {index}: {source}")]
    Agent {
        index: usize,
        #[source]
        source: FieldError,
    },
    #[error("reference point of agent {index} left the region at ({}, {})", .reference.x, .reference.y)]
    ReferenceEscaped { index: usize, reference: Point },
    #[error("local optimum search did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("invalid gain {name}: {value}")]
    InvalidGain { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gains {
    pub kappa_p: f64,
    pub kappa_phi: f64,
    pub kappa_r: f64,
}

impl Default for Gains {
    /// Gains of the 5×3 ellipse benchmark.
    fn default() -> Self {
        Self {
            kappa_p: 0.04,
            kappa_phi: 0.045,
            kappa_r: 0.05,
        }
    }
}

impl Gains {
    pub fn new(kappa_p: f64, kappa_phi: f64, kappa_r: f64) -> Result<Self, DynamicsError> {
        let gains = Self {
            kappa_p,
            kappa_phi,
            kappa_r,
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (name, value) in [
            ("kappa_p", self.kappa_p),
            ("kappa_phi", self.kappa_phi),
            ("kappa_r", self.kappa_r),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DynamicsError::InvalidGain { name, value });
            }
        }
        Ok(())
    }
}

/// `phi - 2π floor(phi / 2π)`.
pub fn wrap_phase(phi: f64) -> Result<f64, DynamicsError> {
    if !phi.is_finite() {
        return Err(DynamicsError::NonFinite(phi));
    }
    Ok(wrap_angle(phi))
}

/// Rotation rate of pointer `i`.
///
/// Pointer `i` starts sector `i` (`dmi_dphi_i < 0`) and ends sector `i-1`
/// (`dmim1_dphi_i > 0`); it turns to even out the discrete Laplacians of the
/// two workloads it separates.
#[allow(clippy::too_many_arguments)]
pub fn phase_rate(
    m_im2: f64,
    m_im1: f64,
    m_i: f64,
    m_ip1: f64,
    dmi_dphi_i: f64,
    dmim1_dphi_i: f64,
    gains: &Gains,
) -> f64 {
    let lap_i = 2.0 * m_i - m_im1 - m_ip1;
    let lap_im1 = 2.0 * m_im1 - m_im2 - m_i;
    -gains.kappa_phi * (lap_i * dmi_dphi_i + lap_im1 * dmim1_dphi_i)
}

/// Drift of reference point `i`: workload balancing through `∂m_i/∂r_i` plus
/// Laplacian consensus with the two ring neighbours.
#[allow(clippy::too_many_arguments)]
pub fn reference_rate(
    m_im1: f64,
    m_i: f64,
    m_ip1: f64,
    dmi_dref: Point,
    r_im1: Point,
    r_i: Point,
    r_ip1: Point,
    gains: &Gains,
) -> Point {
    let lap_m = 2.0 * m_i - m_im1 - m_ip1;
    let lap_r = r_i * 2.0 - r_im1 - r_ip1;
    -(dmi_dref * lap_m + lap_r) * gains.kappa_r
}

/// Proportional control towards the sector optimum.
#[inline]
pub fn control_input(position: Point, optimum: Point, gains: &Gains) -> Point {
    -(position - optimum) * gains.kappa_p
}

/// Cost of servicing an event at `q` from `p`, for non-quadratic service
/// models.
pub trait ServiceCost: Send + Sync {
    fn cost(&self, p: Point, q: Point) -> f64;
    /// Gradient of [`ServiceCost::cost`] with respect to `p`.
    fn gradient(&self, p: Point, q: Point) -> Point;
}

#[derive(Clone, Default)]
pub enum CostKind {
    /// `‖p - q‖²`; the optimum is the sector centroid.
    #[default]
    Quadratic,
    Generic(Arc<dyn ServiceCost>),
}

impl fmt::Debug for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic => f.write_str("Quadratic"),
            Self::Generic(_) => f.write_str("Generic(..)"),
        }
    }
}

/// Minimiser of the sector's service cost over agent positions.
pub fn local_optimum(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: impl Into<FullSector>,
    cost: &CostKind,
    quad: &Quadrature,
) -> Result<Point, DynamicsError> {
    let sector = sector.into();
    if sector.width <= 0.0 {
        return Err(FieldError::EmptySector.into());
    }
    let integrals = field::sector_integrals(boundary, density, sector, quad)?;
    optimum_from(boundary, density, sector, cost, quad, &integrals)
}

fn optimum_from(
    boundary: &RegionBoundary,
    density: &DensityField,
    sector: FullSector,
    cost: &CostKind,
    quad: &Quadrature,
    integrals: &SectorIntegrals,
) -> Result<Point, DynamicsError> {
    let centroid = integrals.centroid()?;
    match cost {
        CostKind::Quadratic => Ok(centroid),
        CostKind::Generic(f) => {
            let nodes = sector_nodes(boundary, density, sector, quad)?;
            descend(f.as_ref(), &nodes, centroid, integrals.mass)
        }
    }
}

/// Gradient descent with Armijo backtracking over a fixed node set.
fn descend(
    f: &dyn ServiceCost,
    nodes: &[(Point, f64)],
    start: Point,
    mass: f64,
) -> Result<Point, DynamicsError> {
    let value = |p: Point| nodes.iter().map(|&(q, w)| w * f.cost(p, q)).sum::<f64>();
    let grad = |p: Point| {
        nodes
            .iter()
            .fold(Point::ORIGIN, |acc, &(q, w)| acc + f.gradient(p, q) * w)
    };
    let mut p = start;
    // The Hessian of a unit-curvature cost scales with the sector mass.
    let mut step = 1.0 / mass;
    let mut g = grad(p);
    for _ in 0..OPTIMUM_MAX_ITERATIONS {
        let gg = g.norm_squared();
        if gg.sqrt() < OPTIMUM_GRADIENT_TOLERANCE {
            return Ok(p);
        }
        let current = value(p);
        let mut accepted = None;
        for _ in 0..60 {
            let trial = p - g * step;
            if trial == p {
                // No representable move left along the gradient.
                return Ok(p);
            }
            let trial_value = value(trial);
            let trial_grad = grad(trial);
            // Near the optimum the cost is flat to rounding; fall back to
            // the gradient norm as the merit there.
            if trial_value <= current - 1e-4 * step * gg
                || (trial_value <= current && trial_grad.norm_squared() < gg)
            {
                accepted = Some((trial, trial_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_grad)) = accepted else {
            return Ok(p);
        };
        p = next;
        g = next_grad;
        step *= 2.0;
    }
    Err(DynamicsError::NoConvergence {
        iterations: OPTIMUM_MAX_ITERATIONS,
    })
}

/// What agent `i` computes about its own sector before talking to anyone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalObservation {
    pub sector: Sector,
    pub integrals: SectorIntegrals,
    pub gradients: PartitionGradients,
    /// Optimal service point of the sector.
    pub optimum: Point,
}

impl LocalObservation {
    pub fn mass(&self) -> f64 {
        self.integrals.mass
    }

    pub fn centroid(&self) -> Point {
        self.integrals.moment / self.integrals.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentRates {
    pub phase: f64,
    pub reference: Point,
    pub position: Point,
}

/// Observations and rates of every agent at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub observations: Vec<LocalObservation>,
    pub rates: Vec<AgentRates>,
}

impl Evaluation {
    pub fn masses(&self) -> Vec<f64> {
        self.observations
            .iter()
            .map(LocalObservation::mass)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

/// Non-fatal occurrences during stepping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// A sector's width jumped across zero: two pointers passed each other.
    SectorInverted {
        agent: usize,
        time: f64,
        width_before: f64,
        width_after: f64,
    },
    /// A reference point left the region; the run stops here.
    ReferenceEscaped {
        agent: usize,
        time: f64,
        reference: Point,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: SwarmState,
    pub events: Vec<Event>,
}

/// Region, density, gains and numerics shared by all agents.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    pub boundary: RegionBoundary,
    pub density: DensityField,
    pub gains: Gains,
    pub quadrature: Quadrature,
    pub cost: CostKind,
}

impl CoverageModel {
    pub fn new(
        boundary: RegionBoundary,
        density: DensityField,
        gains: Gains,
        quadrature: Quadrature,
    ) -> Result<Self, DynamicsError> {
        gains.validate()?;
        Ok(Self {
            boundary,
            density,
            gains,
            quadrature,
            cost: CostKind::Quadratic,
        })
    }

    pub fn with_cost(mut self, cost: CostKind) -> Self {
        self.cost = cost;
        self
    }

    /// Agent `i`'s sector integrals, mass sensitivities and optimum.
    pub fn observe(&self, state: &SwarmState, i: usize) -> Result<LocalObservation, DynamicsError> {
        let sector = network::local_sector(state, i)?;
        let tag = |source| DynamicsError::Agent { index: i, source };
        let span = sector.span();
        let integrals =
            field::sector_integrals(&self.boundary, &self.density, span, &self.quadrature)
                .map_err(tag)?;
        let gradients =
            field::partition_gradients(&self.boundary, &self.density, span, &self.quadrature)
                .map_err(tag)?;
        let optimum = optimum_from(
            &self.boundary,
            &self.density,
            span,
            &self.cost,
            &self.quadrature,
            &integrals,
        )
        .map_err(|e| match e {
            DynamicsError::Field(source) => DynamicsError::Agent { index: i, source },
            other => other,
        })?;
        Ok(LocalObservation {
            sector,
            integrals,
            gradients,
            optimum,
        })
    }

    /// Rates of agent `i` from its own state, its own observation and the
    /// neighbour view built from `masses`.
    pub fn agent_rates(
        &self,
        state: &SwarmState,
        own: &LocalObservation,
        masses: &[f64],
        i: usize,
    ) -> Result<AgentRates, DynamicsError> {
        let view = network::neighbor_view(state, masses, i)?;
        let me = &state.agents[i];
        // Pointer i also closes the predecessor's sector, which is drawn about r_{i-1}.
        let closing = pointer_integrals(
            &self.boundary,
            &self.density,
            view.r_im1,
            me.phase,
            &self.quadrature,
        )
        .map_err(|source| DynamicsError::Agent { index: i, source })?;
        let m_i = own.mass();
        Ok(AgentRates {
            phase: phase_rate(
                view.m_im2,
                view.m_im1,
                m_i,
                view.m_ip1,
                own.gradients.dm_dphi_start,
                closing.swept,
                &self.gains,
            ),
            reference: reference_rate(
                view.m_im1,
                m_i,
                view.m_ip1,
                own.gradients.dm_dref,
                view.r_im1,
                me.reference,
                view.r_ip1,
                &self.gains,
            ),
            position: control_input(me.position, own.optimum, &self.gains),
        })
    }

    pub fn evaluate(&self, state: &SwarmState) -> Result<Evaluation, DynamicsError> {
        for (index, agent) in state.agents.iter().enumerate() {
            if !self.boundary.contains_strictly(agent.reference) {
                return Err(DynamicsError::ReferenceEscaped {
                    index,
                    reference: agent.reference,
                });
            }
        }
        let observations = (0..state.len())
            .map(|i| self.observe(state, i))
            .collect::<Result<Vec<_>, _>>()?;
        let masses: Vec<f64> = observations.iter().map(LocalObservation::mass).collect();
        let rates = observations
            .iter()
            .enumerate()
            .map(|(i, own)| self.agent_rates(state, own, &masses, i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Evaluation {
            observations,
            rates,
        })
    }

    pub fn swarm_rates(&self, state: &SwarmState) -> Result<Vec<AgentRates>, DynamicsError> {
        Ok(self.evaluate(state)?.rates)
    }

    pub fn step(
        &self,
        state: &SwarmState,
        dt: f64,
        integrator: Integrator,
    ) -> Result<StepOutcome, DynamicsError> {
        let first = self.swarm_rates(state)?;
        self.advance(state, &first, dt, integrator)
    }

    /// One step of `integrator` from `state`, reusing rates already
    /// evaluated there.
    pub fn advance(
        &self,
        state: &SwarmState,
        first: &[AgentRates],
        dt: f64,
        integrator: Integrator,
    ) -> Result<StepOutcome, DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidTimeStep(dt));
        }
        let next = match integrator {
            Integrator::Euler => displaced(state, first, dt)?,
            Integrator::Rk4 => {
                let k1 = first;
                let k2 = self.swarm_rates(&displaced(state, k1, 0.5 * dt)?)?;
                let k3 = self.swarm_rates(&displaced(state, &k2, 0.5 * dt)?)?;
                let k4 = self.swarm_rates(&displaced(state, &k3, dt)?)?;
                let blended: Vec<AgentRates> = (0..state.len())
                    .map(|i| {
                        let avg = |f: fn(&AgentRates) -> Point| {
                            (f(&k1[i]) + f(&k2[i]) * 2.0 + f(&k3[i]) * 2.0 + f(&k4[i])) / 6.0
                        };
                        AgentRates {
                            phase: (k1[i].phase
                                + 2.0 * k2[i].phase
                                + 2.0 * k3[i].phase
                                + k4[i].phase)
                                / 6.0,
                            reference: avg(|r| r.reference),
                            position: avg(|r| r.position),
                        }
                    })
                    .collect();
                displaced(state, &blended, dt)?
            }
        };
        for (index, agent) in next.agents.iter().enumerate() {
            if !self.boundary.contains_strictly(agent.reference) {
                return Err(DynamicsError::ReferenceEscaped {
                    index,
                    reference: agent.reference,
                });
            }
        }
        let events = inversions(state, &next);
        Ok(StepOutcome {
            state: next,
            events,
        })
    }
}

/// `state + dt · rates` with phases wrapped and the clock advanced.
fn displaced(
    state: &SwarmState,
    rates: &[AgentRates],
    dt: f64,
) -> Result<SwarmState, DynamicsError> {
    let agents = state
        .agents
        .iter()
        .zip(rates)
        .map(|(a, r)| {
            Ok(AgentState {
                position: a.position + r.position * dt,
                reference: a.reference + r.reference * dt,
                phase: wrap_phase(a.phase + r.phase * dt)?,
            })
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    Ok(SwarmState {
        agents,
        time: state.time + dt,
    })
}

fn widths(state: &SwarmState) -> impl Iterator<Item = f64> + '_ {
    let n = state.len();
    (0..n)
        .map(move |i| sector_angular_width(state.agents[i].phase, state.agents[(i + 1) % n].phase))
}

fn inversions(before: &SwarmState, after: &SwarmState) -> Vec<Event> {
    widths(before)
        .zip(widths(after))
        .enumerate()
        .filter(|(_, (wb, wa))| (wa - wb).abs() > PI)
        .map(
            |(agent, (width_before, width_after))| Event::SectorInverted {
                agent,
                time: after.time,
                width_before,
                width_after,
            },
        )
        .collect()
}

/// Full turn, for building equally spaced phase sets.
pub fn equally_spaced_phases(n: usize, offset: f64) -> Vec<f64> {
    (0..n)
        .map(|k| wrap_angle(offset + TAU * k as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureConfig;

    #[test]
    fn wrap_phase_examples() {
        assert_eq!(wrap_phase(TAU).unwrap(), 0.0);
        assert!((wrap_phase(2.5 * PI).unwrap() - 0.5 * PI).abs() < 1e-15);
        assert!((wrap_phase(-0.5 * PI).unwrap() - 1.5 * PI).abs() < 1e-15);
        assert!(matches!(
            wrap_phase(f64::NAN),
            Err(DynamicsError::NonFinite(_))
        ));
        assert!(matches!(
            wrap_phase(f64::INFINITY),
            Err(DynamicsError::NonFinite(_))
        ));
    }

    #[test]
    fn phase_rate_examples() {
        let g = Gains::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(phase_rate(3.0, 3.0, 3.0, 3.0, -0.4, 0.7, &g), 0.0);
        assert!((phase_rate(1.0, 1.0, 2.0, 1.0, -0.5, 0.5, &g) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn reference_rate_examples() {
        let g = Gains::new(1.0, 1.0, 1.0).unwrap();
        let r = Point::new(0.3, -0.2);
        assert_eq!(
            reference_rate(2.0, 2.0, 2.0, Point::new(0.5, 0.1), r, r, r, &g),
            Point::ORIGIN
        );
        let v = reference_rate(
            1.0,
            1.0,
            1.0,
            Point::new(9.0, 9.0),
            Point::ORIGIN,
            Point::new(1.0, 0.0),
            Point::ORIGIN,
            &g,
        );
        assert_eq!(v, Point::new(-2.0, 0.0));
    }

    #[test]
    fn control_input_examples() {
        let g = Gains::default();
        let p = Point::new(0.7, -1.1);
        assert_eq!(control_input(p, p, &g), Point::ORIGIN);
        let u = control_input(Point::new(1.0, 0.0), Point::ORIGIN, &g);
        assert!((u.x + 0.04).abs() < 1e-17 && u.y == 0.0);
        let unit = Gains::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            control_input(Point::new(0.0, -2.0), Point::new(0.0, 1.0), &unit),
            Point::new(0.0, 3.0)
        );
    }

    #[test]
    fn gains_must_be_positive() {
        assert!(Gains::new(0.0, 1.0, 1.0).is_err());
        assert!(Gains::new(1.0, -1.0, 1.0).is_err());
        assert!(Gains::new(1.0, 1.0, f64::NAN).is_err());
    }

    struct SquaredDistance;
    impl ServiceCost for SquaredDistance {
        fn cost(&self, p: Point, q: Point) -> f64 {
            (p - q).norm_squared()
        }
        fn gradient(&self, p: Point, q: Point) -> Point {
            (p - q) * 2.0
        }
    }

    /// `‖p - q‖⁴`: optimum differs from the centroid.
    struct Quartic;
    impl ServiceCost for Quartic {
        fn cost(&self, p: Point, q: Point) -> f64 {
            (p - q).norm_squared().powi(2)
        }
        fn gradient(&self, p: Point, q: Point) -> Point {
            (p - q) * (4.0 * (p - q).norm_squared())
        }
    }

    #[test]
    fn quadratic_optimum_is_centroid() {
        let disk = RegionBoundary::disk(1.0).unwrap();
        let one = DensityField::uniform(1.0).unwrap();
        let q = Quadrature::new(QuadratureConfig::gauss_legendre(64, 64)).unwrap();
        let right = Sector::new(Point::ORIGIN, 1.5 * PI, 0.5 * PI);
        let p = local_optimum(&disk, &one, right, &CostKind::Quadratic, &q).unwrap();
        assert!((p.x - 4.0 / (3.0 * PI)).abs() < 1e-12 && p.y.abs() < 1e-12);
        let c = field::sector_centroid(&disk, &one, right, &q).unwrap();
        assert_eq!(p, c);
    }

    #[test]
    fn generic_path_reproduces_centroid() {
        let e = RegionBoundary::ellipse(5.0, 3.0).unwrap();
        let d = field::paper_density();
        let q = Quadrature::default();
        let s = Sector::new(Point::new(0.4, -0.3), 0.5, 2.6);
        let c = field::sector_centroid(&e, &d, s, &q).unwrap();
        let generic = CostKind::Generic(Arc::new(SquaredDistance));
        let p = local_optimum(&e, &d, s, &generic, &q).unwrap();
        assert!(p.distance(c) < 1e-6, "{p:?} vs {c:?}");
    }

    #[test]
    fn generic_quartic_optimum_is_stationary() {
        let e = RegionBoundary::ellipse(5.0, 3.0).unwrap();
        let d = DensityField::uniform(1.0).unwrap();
        let q = Quadrature::new(QuadratureConfig::gauss_legendre(16, 16)).unwrap();
        let s = Sector::new(Point::ORIGIN, 0.0, 1.2);
        let p = local_optimum(&e, &d, s, &CostKind::Generic(Arc::new(Quartic)), &q).unwrap();
        let nodes = sector_nodes(&e, &d, s, &q).unwrap();
        let g = nodes.iter().fold(Point::ORIGIN, |acc, &(x, w)| {
            acc + Quartic.gradient(p, x) * w
        });
        assert!(g.norm() < 1e-6, "gradient {g:?}");
        // Perturbations never lower the cost.
        let j = |p: Point| {
            nodes
                .iter()
                .map(|&(x, w)| w * Quartic.cost(p, x))
                .sum::<f64>()
        };
        for k in 0..8 {
            let d = Point::from_angle(k as f64 * TAU / 8.0) * 1e-3;
            assert!(j(p + d) >= j(p));
        }
    }

    #[test]
    fn empty_sector_has_no_optimum() {
        let disk = RegionBoundary::disk(1.0).unwrap();
        let one = DensityField::uniform(1.0).unwrap();
        let s = Sector::new(Point::ORIGIN, 1.0, 1.0);
        assert!(matches!(
            local_optimum(&disk, &one, s, &CostKind::Quadratic, &Quadrature::default()),
            Err(DynamicsError::Field(FieldError::EmptySector))
        ));
    }
}
