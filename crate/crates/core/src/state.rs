//! Swarm state and seeded initialisation.

use std::f64::consts::TAU;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RegionBoundary, Sector};
use crate::point::Point;

/// Smallest ring on which the `{i+1, i-1, i-2}` neighbourhood is meaningful.
pub const MIN_AGENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentState {
    pub position: Point,
    pub reference: Point,
    /// Angle of this agent's rotary pointer, in `[0, 2π)`.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("a ring needs at least {MIN_AGENTS} agents, got {0}")]
    TooFewAgents(usize),
}

/// All agents on the ring plus the simulation clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub agents: Vec<AgentState>,
    pub time: f64,
}

impl SwarmState {
    pub fn new(agents: Vec<AgentState>, time: f64) -> Result<Self, StateError> {
        if agents.len() < MIN_AGENTS {
            return Err(StateError::TooFewAgents(agents.len()));
        }
        Ok(Self { agents, time })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Sector of agent `i` as seen by a global observer: its own reference,
    /// its own pointer and its successor's pointer.
    pub fn sector(&self, i: usize) -> Sector {
        let n = self.agents.len();
        let me = &self.agents[i];
        Sector::new(me.reference, me.phase, self.agents[(i + 1) % n].phase)
    }

    /// Random initial state: positions, then references, uniform in the
    /// region (references strictly inside), then phases uniform in `[0, 2π)`
    /// sorted ascending.
    pub fn random(
        boundary: &RegionBoundary,
        n: usize,
        rng: &mut SeededRng,
    ) -> Result<Self, StateError> {
        if n < MIN_AGENTS {
            return Err(StateError::TooFewAgents(n));
        }
        let positions: Vec<Point> = (0..n).map(|_| rng.point_in(boundary)).collect();
        let references: Vec<Point> = (0..n).map(|_| rng.point_in(boundary)).collect();
        let mut phases: Vec<f64> = (0..n).map(|_| rng.uniform() * TAU).collect();
        phases.sort_by(f64::total_cmp);
        let agents = positions
            .into_iter()
            .zip(references)
            .zip(phases)
            .map(|((position, reference), phase)| AgentState {
                position,
                reference,
                phase,
            })
            .collect();
        Self::new(agents, 0.0)
    }
}

/// Deterministic generator: xoshiro256++ seeded through SplitMix64
/// (`Xoshiro256PlusPlus::seed_from_u64`), with uniforms built from the top
/// 53 bits of each output word.
pub struct SeededRng(Xoshiro256PlusPlus);

/// Name recorded in run metadata.
pub const RNG_ALGORITHM: &str = "xoshiro256++ (SplitMix64 seeding), 53-bit uniform doubles";

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Uniform double in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform point strictly inside `boundary`, by rejection on its bounding box.
    pub fn point_in(&mut self, boundary: &RegionBoundary) -> Point {
        let (lo, hi) = boundary.bounding_box();
        loop {
            let p = Point::new(self.uniform_in(lo.x, hi.x), self.uniform_in(lo.y, hi.y));
            if boundary.contains_strictly(p) {
                return p;
            }
        }
    }
}
