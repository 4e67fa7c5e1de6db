//! Information available to each agent over the ring.
//!
//! Agent `i` may read, besides its own state, only the workloads of agents
//! `i-2`, `i-1` and `i+1`, the reference points of `i-1` and `i+1`, and the
//! pointer angle of `i+1`. The functions here are the only way rate code
//! reaches other agents' data. Indices are zero-based and wrap around the ring.

use thiserror::Error;

use crate::geometry::Sector;
use crate::point::Point;
use crate::state::{SwarmState, MIN_AGENTS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("agent index {index} out of range for a ring of {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("a ring needs at least {MIN_AGENTS} agents, got {0}")]
    TooFewAgents(usize),
    #[error("expected {expected} workloads, got {got}")]
    WorkloadCount { expected: usize, got: usize },
}

/// Static ring in which agent `i` hears from `{i+1, i-1, i-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingTopology {
    n: usize,
}

impl RingTopology {
    pub fn new(n: usize) -> Result<Self, NetworkError> {
        if n < MIN_AGENTS {
            return Err(NetworkError::TooFewAgents(n));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn offset(&self, i: usize, by: isize) -> usize {
        (i as isize + by).rem_euclid(self.n as isize) as usize
    }

    fn check(&self, i: usize) -> Result<(), NetworkError> {
        if i < self.n {
            Ok(())
        } else {
            Err(NetworkError::IndexOutOfRange {
                index: i,
                n: self.n,
            })
        }
    }

    /// `[i+1, i-1, i-2]`, wrapped.
    pub fn neighbors(&self, i: usize) -> Result<[usize; 3], NetworkError> {
        self.check(i)?;
        Ok([self.offset(i, 1), self.offset(i, -1), self.offset(i, -2)])
    }
}

/// Everything agent `i` receives from its neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborView {
    pub m_im2: f64,
    pub m_im1: f64,
    pub m_ip1: f64,
    pub r_im1: Point,
    pub r_ip1: Point,
    pub phi_ip1: f64,
}

pub fn neighbor_view(
    state: &SwarmState,
    masses: &[f64],
    i: usize,
) -> Result<NeighborView, NetworkError> {
    let ring = RingTopology::new(state.len())?;
    if masses.len() != ring.len() {
        return Err(NetworkError::WorkloadCount {
            expected: ring.len(),
            got: masses.len(),
        });
    }
    let [ip1, im1, im2] = ring.neighbors(i)?;
    Ok(NeighborView {
        m_im2: masses[im2],
        m_im1: masses[im1],
        m_ip1: masses[ip1],
        r_im1: state.agents[im1].reference,
        r_ip1: state.agents[ip1].reference,
        phi_ip1: state.agents[ip1].phase,
    })
}

/// Agent `i`'s own sector: its reference and pointer plus the successor's
/// pointer angle, the one remote quantity needed before workloads exist.
pub fn local_sector(state: &SwarmState, i: usize) -> Result<Sector, NetworkError> {
    let ring = RingTopology::new(state.len())?;
    let [ip1, ..] = ring.neighbors(i)?;
    let me = &state.agents[i];
    Ok(Sector::new(me.reference, me.phase, state.agents[ip1].phase))
}
