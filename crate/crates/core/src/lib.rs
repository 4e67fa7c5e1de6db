//! Distributed rotary-pointer coverage control.
//!
//! `N` agents on a ring split a planar region into sectors bounded by rotary
//! pointers anchored at per-agent reference points. Pointer angles and
//! reference points evolve to balance workloads and reach a common anchor,
//! while each agent moves to the optimal service point of its own sector.

pub mod check;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod field;
pub mod geometry;
pub mod metrics;
pub mod network;
pub mod point;
pub mod quadrature;
pub mod sim;
pub mod state;

pub use config::{load_config, SimConfig};
pub use dynamics::{CostKind, CoverageModel, Gains, Integrator};
pub use field::DensityField;
pub use geometry::{RegionBoundary, Sector};
pub use point::Point;
pub use quadrature::{Quadrature, QuadratureConfig, Scheme};
pub use sim::{run, RunSummary};
pub use state::{AgentState, SeededRng, SwarmState};
