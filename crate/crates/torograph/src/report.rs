//! Fit report documents.
use serde::Serialize;
use serde_json::{Map, Value};
use torograph_core::linalg::Matrix;
use torograph_core::stereo::StabilityReport;
use torograph_core::EdgeReport;

/// Everything a fit command produces besides the graph itself. Field order
/// is fixed and maps are sorted, so equal inputs give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReportDocument {
    pub model: String,
    pub version: String,
    pub seed: Option<u64>,
    /// The command line options that shaped the result (output location excluded).
    pub config: Map<String, Value>,
    pub data: DataShape,
    pub parameters: Map<String, Value>,
    pub log_likelihood: f64,
    pub edges: Vec<EdgeEntryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    pub diagnostics: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataShape {
    pub n: usize,
    pub p: usize,
    pub labels: Vec<String>,
}

/// One tested or scored pair, 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeEntryReport {
    pub i: usize,
    pub j: usize,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub adjusted_p: Option<f64>,
    pub weight: Option<f64>,
    pub stability: Option<f64>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySection {
    pub folds: usize,
    pub repeats: usize,
    pub successful_repeats: usize,
    pub failed_repeats: usize,
    pub threshold: f64,
    pub rho_grid: Vec<f64>,
    pub chosen_rho: Vec<f64>,
}

impl StabilitySection {
    pub fn new(report: &StabilityReport, folds: usize, repeats: usize) -> Self {
        Self {
            folds,
            repeats,
            successful_repeats: report.successful_repeats(),
            failed_repeats: report.failed_repeats,
            threshold: report.threshold,
            rho_grid: report.rho_grid.clone(),
            chosen_rho: report.chosen_rho.clone(),
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn edge_entries(report: &EdgeReport) -> Vec<EdgeEntryReport> {
    report
        .records
        .iter()
        .map(|r| EdgeEntryReport {
            i: r.i + 1,
            j: r.j + 1,
            statistic: finite(r.statistic),
            p_value: finite(r.p_value),
            adjusted_p: finite(r.adjusted_p),
            weight: r.weight,
            stability: r.stability_frequency,
            selected: r.selected,
        })
        .collect()
}

pub fn matrix_json(m: &Matrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| number(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn vector_json(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| number(x)).collect())
}

/// Non-finite values become `null`.
pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

impl FitReportDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}
