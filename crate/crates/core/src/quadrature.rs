//! One-dimensional quadrature rules used for the polar sector integrals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    GaussLegendre,
    CompositeSimpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Nodes along each ray.
    pub radial_nodes: usize,
    /// Nodes across the angular span of each sector.
    pub angular_nodes: usize,
    pub scheme: Scheme,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            radial_nodes: 32,
            angular_nodes: 32,
            scheme: Scheme::GaussLegendre,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuadratureError {
    #[error("{field} must be at least 4 (got {value})")]
    TooFewNodes { field: &'static str, value: usize },
    #[error("{field} must be odd for composite Simpson (even panel count), got {value}")]
    OddPanelCount { field: &'static str, value: usize },
}

impl QuadratureConfig {
    pub fn new(radial_nodes: usize, angular_nodes: usize, scheme: Scheme) -> Self {
        Self {
            radial_nodes,
            angular_nodes,
            scheme,
        }
    }

    pub fn gauss_legendre(radial_nodes: usize, angular_nodes: usize) -> Self {
        Self::new(radial_nodes, angular_nodes, Scheme::GaussLegendre)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        for (field, value) in [
            ("radial_nodes", self.radial_nodes),
            ("angular_nodes", self.angular_nodes),
        ] {
            if value < 4 {
                return Err(QuadratureError::TooFewNodes { field, value });
            }
            if self.scheme == Scheme::CompositeSimpson && value % 2 == 0 {
                return Err(QuadratureError::OddPanelCount { field, value });
            }
        }
        Ok(())
    }
}

/// Nodes and weights on the unit interval `[0, 1]`; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn new(scheme: Scheme, n: usize) -> Self {
        match scheme {
            Scheme::GaussLegendre => Self::gauss_legendre(n),
            Scheme::CompositeSimpson => Self::composite_simpson(n),
        }
    }

    /// Gauss–Legendre rule with `n` nodes, via Newton iteration on `P_n`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map [-1, 1] -> [0, 1]; nodes come out in ascending order.
            nodes[k] = 0.5 * (1.0 - x);
            nodes[n - 1 - k] = 0.5 * (1.0 + x);
            weights[k] = 0.5 * w;
            weights[n - 1 - k] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    /// Composite Simpson rule over `n` equally spaced nodes (`n` odd).
    pub fn composite_simpson(n: usize) -> Self {
        assert!(
            n >= 3 && n % 2 == 1,
            "Simpson rule needs an odd node count >= 3"
        );
        let h = 1.0 / (n - 1) as f64;
        let nodes = (0..n).map(|k| k as f64 * h).collect();
        let weights = (0..n)
            .map(|k| {
                let c = if k == 0 || k == n - 1 {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + len * t))
            .sum();
        sum * len
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Smallest node count of the sub-panel rules.
const MIN_SUB_PANEL_NODES: usize = 8;

/// Radial and angular rules built once from a [`QuadratureConfig`].
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub config: QuadratureConfig,
    pub radial: Rule,
    pub angular: Rule,
    /// Gauss–Legendre rules with half the configured nodes, used on the short
    /// sub-panels that resolve a density's singular point.
    pub sub_radial: Rule,
    pub sub_angular: Rule,
}

impl Quadrature {
    pub fn new(config: QuadratureConfig) -> Result<Self, QuadratureError> {
        config.validate()?;
        let sub = |n: usize| Rule::gauss_legendre((n / 2).max(MIN_SUB_PANEL_NODES));
        Ok(Self {
            config,
            radial: Rule::new(config.scheme, config.radial_nodes),
            angular: Rule::new(config.scheme, config.angular_nodes),
            sub_radial: sub(config.radial_nodes),
            sub_angular: sub(config.angular_nodes),
        })
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(QuadratureConfig::default()).expect("default quadrature config is valid")
    }
}
