//! Convergence diagnostics: Lyapunov value, coverage cost, reference gaps,
//! workload spread and centroid tracking error.

use serde::{Deserialize, Serialize};

use crate::dynamics::{CostKind, CoverageModel, DynamicsError, LocalObservation};
use crate::field::{sector_integrals, sector_nodes, SectorIntegrals};
use crate::point::Point;
use crate::state::SwarmState;

/// `½ Σ (m_i - m_{i+1})² + ½ Σ ‖r_i - r_{i+1}‖²` around the ring.
pub fn lyapunov_value(state: &SwarmState, masses: &[f64]) -> f64 {
    assert_eq!(masses.len(), state.len(), "one workload per agent");
    let n = state.len();
    let mut total = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let dm = masses[i] - masses[j];
        let dr = state.agents[i].reference - state.agents[j].reference;
        total += dm * dm + dr.norm_squared();
    }
    0.5 * total
}

/// `γ_i = ‖r_i - r_{i+1}‖²`.
pub fn gamma(state: &SwarmState) -> Vec<f64> {
    let n = state.len();
    (0..n)
        .map(|i| (state.agents[i].reference - state.agents[(i + 1) % n].reference).norm_squared())
        .collect()
}

/// `max_i |m_i - m̄| / m̄`.
pub fn mass_spread(masses: &[f64]) -> f64 {
    let mean = masses.iter().sum::<f64>() / masses.len() as f64;
    masses.iter().map(|m| (m - mean).abs()).fold(0.0, f64::max) / mean
}

/// `∫ ‖p - q‖² ρ dq` from precomputed sector integrals.
pub fn quadratic_sector_cost(integrals: &SectorIntegrals, position: Point) -> f64 {
    position.norm_squared() * integrals.mass - 2.0 * position.dot(integrals.moment)
        + integrals.second_moment
}

/// Total service cost `Σ_i ∫_{Ω_i} f(p_i, q) ρ(q) dq`.
pub fn coverage_cost(model: &CoverageModel, state: &SwarmState) -> Result<f64, DynamicsError> {
    let mut total = 0.0;
    for (i, agent) in state.agents.iter().enumerate() {
        let sector = state.sector(i);
        let tag = |source| DynamicsError::Agent { index: i, source };
        total += match &model.cost {
            CostKind::Quadratic => {
                let integrals =
                    sector_integrals(&model.boundary, &model.density, sector, &model.quadrature)
                        .map_err(tag)?;
                quadratic_sector_cost(&integrals, agent.position)
            }
            CostKind::Generic(f) => {
                sector_nodes(&model.boundary, &model.density, sector, &model.quadrature)
                    .map_err(tag)?
                    .iter()
                    .map(|&(q, w)| w * f.cost(agent.position, q))
                    .sum()
            }
        };
    }
    Ok(total)
}

/// One emitted sample of the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub time: f64,
    pub masses: Vec<f64>,
    pub gammas: Vec<f64>,
    pub lyapunov: f64,
    pub cost: f64,
    /// `‖p_i - c_i‖` against each sector centroid.
    pub centroid_errors: Vec<f64>,
    pub mass_spread: f64,
}

impl MetricsRecord {
    pub fn new(state: &SwarmState, observations: &[LocalObservation], cost: f64) -> Self {
        let masses: Vec<f64> = observations.iter().map(LocalObservation::mass).collect();
        let centroid_errors = state
            .agents
            .iter()
            .zip(observations)
            .map(|(a, o)| a.position.distance(o.centroid()))
            .collect();
        Self {
            time: state.time,
            gammas: gamma(state),
            lyapunov: lyapunov_value(state, &masses),
            mass_spread: mass_spread(&masses),
            masses,
            cost,
            centroid_errors,
        }
    }

    pub fn max_gamma(&self) -> f64 {
        self.gammas.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_centroid_error(&self) -> f64 {
        self.centroid_errors.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusTolerances {
    pub tol_gamma: f64,
    pub tol_mass: f64,
    pub tol_centroid: f64,
}

impl Default for ConsensusTolerances {
    fn default() -> Self {
        Self {
            tol_gamma: 1e-4,
            tol_mass: 0.01,
            tol_centroid: 1e-3,
        }
    }
}

/// Reference points agree, workloads are balanced and every agent sits at
/// its centroid, each to within its tolerance.
pub fn consensus_reached(record: &MetricsRecord, tol: &ConsensusTolerances) -> bool {
    record.max_gamma() < tol.tol_gamma
        && record.mass_spread < tol.tol_mass
        && record.max_centroid_error() < tol.tol_centroid
}
