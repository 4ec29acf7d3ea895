//! Wire types shared by the HTTP service, its client and the CLI.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::campaign::{Campaign, DesignPoint, LogEntry};
use crate::embed::EmbeddingRecord;
use crate::fls::StatementRecord;
use crate::pal::{ClassCounts, Classification};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiStatusView {
    pub iteration: usize,
    pub grid_size: usize,
    pub counts: ClassCounts,
    pub sampled: usize,
    pub converged: bool,
    pub budget_exhausted: bool,
    pub suggestions: Vec<usize>,
    pub override_target: Option<usize>,
    /// SHA-256 of the last report's markdown.
    pub report_digest: Option<String>,
}

impl ApiStatusView {
    pub fn of(c: &Campaign) -> Self {
        Self {
            iteration: c.pal.iteration,
            grid_size: c.points.len(),
            counts: c.counts(),
            sampled: c.measurements.len(),
            converged: c.is_converged(),
            budget_exhausted: c.budget_exhausted(),
            suggestions: c.suggestions.clone(),
            override_target: c.override_target,
            report_digest: c.report.as_ref().map(|r| Self::digest(&r.markdown)),
        }
    }

    /// Hex SHA-256 used for report digests.
    pub fn digest(markdown: &str) -> String {
        hex::encode(Sha256::digest(markdown.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointView {
    #[serde(flatten)]
    pub point: DesignPoint,
    pub class: Classification,
    pub sampled: bool,
    /// Measured (hardness, inverse elasticity), if any.
    pub measured: Option<[f64; 2]>,
    /// Predicted means; absent before the first step.
    pub mean: Option<[f64; 2]>,
    pub std: Option<[f64; 2]>,
    /// `high - low` per objective; absent before the first step.
    pub region_width: Option<[f64; 2]>,
    /// Normalized region diagonal.
    pub uncertainty: f64,
}

pub fn point_views(c: &Campaign) -> Vec<PointView> {
    let unc = c.uncertainties();
    c.points
        .iter()
        .map(|p| {
            let pred = c.predictions.get(p.id);
            let region = c.pal.regions.get(p.id);
            PointView {
                point: p.clone(),
                class: c.pal.classes[p.id].class,
                sampled: c.pal.classes[p.id].sampled,
                measured: c.measurement(p.id).map(|m| [m.hardness, m.inverse_elasticity]),
                mean: pred.map(|q| [q[0].mean, q[1].mean]),
                std: pred.map(|q| [q[0].std, q[1].std]),
                region_width: region.map(|r| [r.high[0] - r.low[0], r.high[1] - r.low[1]]),
                uncertainty: unc[p.id],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionsView {
    pub points: Vec<DesignPoint>,
    pub converged: bool,
    pub budget_exhausted: bool,
    pub override_target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRequest {
    pub point_id: usize,
    pub hardness: f64,
    pub inverse_elasticity: f64,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
}

/// Either `point_id` or `coordinates` = `[c_pvp10, c_pvp40, c_pvp360, S, d]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OverrideRequest {
    #[serde(default)]
    pub point_id: Option<usize>,
    #[serde(default)]
    pub coordinates: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideResponse {
    pub point_id: usize,
    pub suggestions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResponse {
    pub iteration: usize,
    pub counts: ClassCounts,
    pub converged: bool,
    pub suggestions: Vec<usize>,
    pub embedding_refreshed: bool,
    pub report_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportView {
    pub iteration: usize,
    pub markdown: String,
    pub records: Vec<StatementRecord>,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingView {
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogView {
    pub entries: Vec<LogEntry>,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
