//! Vector-field representations and the operators acting on them.

pub mod analytic;
pub mod chebyshev;
pub mod domain;
pub mod expr;
pub mod spectral;

use serde::{Deserialize, Serialize};

pub use analytic::{catalog_field, AnalyticField, CatalogParams, Tangency, VectorCalculus, CATALOG_NAMES};
pub use domain::Domain;
pub use expr::Expr;
pub use spectral::{leray_project, ChannelGrid, LerayProjector, SpectralField, SpectralScalar};

/// A discrete Sobolev norm with its per-order contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevNorm {
    pub order: usize,
    pub value: f64,
    /// `breakdown[m] = sum over |alpha| = m of || d^alpha u ||^2`
    pub breakdown: Vec<f64>,
    /// `curl_breakdown[l] = || curl^l u ||^2`
    pub curl_breakdown: Vec<f64>,
}

impl SobolevNorm {
    pub fn new(order: usize, breakdown: Vec<f64>, curl_breakdown: Vec<f64>) -> Self {
        let value = breakdown.iter().sum::<f64>().sqrt();
        SobolevNorm { order, value, breakdown, curl_breakdown }
    }

    /// `(sum_{l <= r} || curl^l u ||^2)^(1/2)`
    pub fn curl_value(&self) -> f64 {
        self.curl_breakdown.iter().sum::<f64>().sqrt()
    }
}
