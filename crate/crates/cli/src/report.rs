//! JSON documents written by the `riemann` binary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use riemann_core::conformal::{EinsteinVerdict, ScalingReport};
use riemann_core::decomposition::{ConformalVerdict, DecompositionNorms};
use riemann_core::kaehler::KaehlerSampleReport;
use riemann_core::meigen::{MEigentriple, RoundTripReport, SolverConfig};
use riemann_core::metric::Signature;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub command: String,
}

impl Header {
    pub fn new(command: &str) -> Self {
        Header {
            tool: "riemann".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schema_version: SCHEMA_VERSION,
            command: command.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSource {
    Catalog,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub source: MetricSource,
    pub name: String,
    /// Hex SHA-256 of the metric file contents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    pub parameters: BTreeMap<String, f64>,
    pub coordinates: Vec<String>,
    pub signature: Signature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSection {
    pub norms: DecompositionNorms,
    pub conformal: ConformalVerdict,
    pub reassembly_error: f64,
    pub max_weyl_trace: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSection {
    pub config: SolverConfig,
    /// Frame metric `diag(signs)` the vectors are expressed in.
    pub frame_signs: Vec<f64>,
    pub ricci_eigenvalues: Option<Vec<f64>>,
    pub closed_form: Vec<MEigentriple>,
    pub iterative: Vec<MEigentriple>,
    pub starts: usize,
    pub converged: usize,
    pub discarded: usize,
    pub explored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    #[serde(flatten)]
    pub header: Header,
    pub metric: MetricDescriptor,
    pub point: Vec<f64>,
    pub metric_tensor: Vec<Vec<f64>>,
    pub inverse_metric: Vec<Vec<f64>>,
    /// `[c, a, b]` for Gamma^c_ab.
    pub christoffel: Vec<Entry>,
    /// `[a, b, c, d]` for R^a_bcd.
    pub riemann_mixed: Vec<Entry>,
    pub riemann_lowered: Vec<Entry>,
    pub ricci: Vec<Vec<f64>>,
    #[serde(rename = "scalar_R")]
    pub scalar_r: f64,
    pub decomposition: Option<DecompositionSection>,
    pub einstein: EinsteinVerdict,
    pub meigen: EigenSection,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    #[serde(flatten)]
    pub header: Header,
    pub metric: MetricDescriptor,
    pub point: Vec<f64>,
    pub meigen: EigenSection,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReport {
    #[serde(flatten)]
    pub header: Header,
    pub metric: MetricDescriptor,
    pub point: Vec<f64>,
    #[serde(rename = "scalar_R")]
    pub scalar_r: f64,
    pub decomposition: DecompositionSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    #[serde(flatten)]
    pub header: Header,
    pub metric: MetricDescriptor,
    pub point: Vec<f64>,
    pub config: SolverConfig,
    pub scaling: ScalingReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KaehlerReport {
    #[serde(flatten)]
    pub header: Header,
    #[serde(flatten)]
    pub result: KaehlerSampleReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructReport {
    #[serde(flatten)]
    pub header: Header,
    #[serde(flatten)]
    pub result: RoundTripReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub code: String,
    pub message: String,
    pub context: BTreeMap<String, String>,
}
