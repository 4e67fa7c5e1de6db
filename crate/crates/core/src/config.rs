//! Run configuration: a JSON document with defaults for every omitted field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{CoverageModel, Gains, Integrator};
use crate::field::{paper_density_on, DensityField};
use crate::geometry::RegionBoundary;
use crate::metrics::ConsensusTolerances;
use crate::quadrature::{Quadrature, QuadratureConfig, QuadratureError};
use crate::state::{AgentState, SeededRng, SwarmState, MIN_AGENTS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid value for {key}: {reason}")]
    Validation { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Offending key of a validation error.
    pub fn key(&self) -> Option<&str> {
        match self {
            Self::Validation { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionSpec {
    Ellipse { a: f64, b: f64 },
    Disk { radius: f64 },
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self::Ellipse { a: 5.0, b: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityName {
    /// `ρ ≡ 1`.
    Uniform,
    /// The benchmark density `1e-4 (exp(sin²θ + cos θ) + ‖q‖)`.
    PaperS4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDensity {
    pub name: DensityName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialDensity {
    /// `c[i][j]` multiplies `xⁱ yʲ`.
    pub polynomial: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensitySpec {
    Named(NamedDensity),
    Polynomial(PolynomialDensity),
}

impl DensitySpec {
    pub fn named(name: DensityName) -> Self {
        Self::Named(NamedDensity { name })
    }
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self::named(DensityName::PaperS4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub kind: Integrator,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            kind: Integrator::Rk4,
            dt: 0.01,
            t_final: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub region: RegionSpec,
    pub density: DensitySpec,
    pub n_agents: usize,
    pub gains: Gains,
    pub integrator: IntegratorConfig,
    pub quadrature: QuadratureConfig,
    pub seed: u64,
    /// Integration steps between emitted records.
    pub emit_every: usize,
    pub consensus: ConsensusTolerances,
    /// Explicit starting agents; replaces the seeded draw when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<AgentState>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            region: RegionSpec::default(),
            density: DensitySpec::default(),
            n_agents: 6,
            gains: Gains::default(),
            integrator: IntegratorConfig::default(),
            quadrature: QuadratureConfig::default(),
            seed: 42,
            emit_every: 100,
            consensus: ConsensusTolerances::default(),
            initial_state: None,
        }
    }
}

fn positive(key: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            key,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.boundary()?;
        if self.n_agents < MIN_AGENTS {
            return Err(ConfigError::invalid(
                "n_agents",
                format!("must be at least {MIN_AGENTS}, got {}", self.n_agents),
            ));
        }
        positive("gains.kappa_p", self.gains.kappa_p)?;
        positive("gains.kappa_phi", self.gains.kappa_phi)?;
        positive("gains.kappa_r", self.gains.kappa_r)?;
        positive("integrator.dt", self.integrator.dt)?;
        let t_final = self.integrator.t_final;
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(ConfigError::invalid(
                "integrator.t_final",
                format!("must be non-negative and finite, got {t_final}"),
            ));
        }
        if let Err(e) = self.quadrature.validate() {
            let field = match e {
                QuadratureError::TooFewNodes { field, .. }
                | QuadratureError::OddPanelCount { field, .. } => field,
            };
            return Err(ConfigError::invalid(
                format!("quadrature.{field}"),
                e.to_string(),
            ));
        }
        if self.emit_every == 0 {
            return Err(ConfigError::invalid("emit_every", "must be at least 1"));
        }
        positive("consensus.tol_gamma", self.consensus.tol_gamma)?;
        positive("consensus.tol_mass", self.consensus.tol_mass)?;
        positive("consensus.tol_centroid", self.consensus.tol_centroid)?;
        if let Some(agents) = &self.initial_state {
            if agents.len() != self.n_agents {
                return Err(ConfigError::invalid(
                    "initial_state",
                    format!("has {} agents, n_agents is {}", agents.len(), self.n_agents),
                ));
            }
            let finite = agents
                .iter()
                .all(|a| a.position.is_finite() && a.reference.is_finite() && a.phase.is_finite());
            if !finite {
                return Err(ConfigError::invalid(
                    "initial_state",
                    "values must be finite",
                ));
            }
        }
        self.density()?;
        Ok(())
    }

    pub fn boundary(&self) -> Result<RegionBoundary, ConfigError> {
        match self.region {
            RegionSpec::Ellipse { a, b } => {
                positive("region.a", a)?;
                positive("region.b", b)?;
                RegionBoundary::ellipse(a, b)
            }
            RegionSpec::Disk { radius } => {
                positive("region.radius", radius)?;
                RegionBoundary::disk(radius)
            }
        }
        .map_err(|e| ConfigError::invalid("region", e.to_string()))
    }

    pub fn density(&self) -> Result<DensityField, ConfigError> {
        let boundary = self.boundary()?;
        match &self.density {
            DensitySpec::Named(NamedDensity {
                name: DensityName::Uniform,
            }) => DensityField::uniform(1.0),
            DensitySpec::Named(NamedDensity {
                name: DensityName::PaperS4,
            }) => Ok(paper_density_on(&boundary)),
            DensitySpec::Polynomial(PolynomialDensity { polynomial }) => {
                if polynomial.iter().all(Vec::is_empty) {
                    return Err(ConfigError::invalid(
                        "density.polynomial",
                        "no coefficients",
                    ));
                }
                DensityField::polynomial(polynomial.clone(), &boundary)
            }
        }
        .map_err(|e| ConfigError::invalid("density", e.to_string()))
    }

    pub fn model(&self) -> Result<CoverageModel, ConfigError> {
        let quadrature = Quadrature::new(self.quadrature)
            .map_err(|e| ConfigError::invalid("quadrature", e.to_string()))?;
        CoverageModel::new(self.boundary()?, self.density()?, self.gains, quadrature)
            .map_err(|e| ConfigError::invalid("gains", e.to_string()))
    }

    /// The configured starting agents, or a draw from the seeded generator.
    pub fn initial_state(&self) -> Result<SwarmState, ConfigError> {
        let state = match &self.initial_state {
            Some(agents) => SwarmState::new(agents.clone(), 0.0),
            None => SwarmState::random(
                &self.boundary()?,
                self.n_agents,
                &mut SeededRng::new(self.seed),
            ),
        };
        state.map_err(|e| ConfigError::invalid("n_agents", e.to_string()))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SimConfig::from_json(&text)
}
