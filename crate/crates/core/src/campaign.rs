//! Materials-design campaign: grid construction under the composition
//! simplex, measurement ingestion, batch suggestions, iteration and the
//! versioned campaign document.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::{self, EmbedConfig};
use crate::error::{Error, Result};
use crate::fls::{self, LinguisticVariable, Qualifier, Quantifier, Record, Report, ReportLabels, Support};
use crate::gp::Prediction;
use crate::pal::{self, ClassCounts, Classification, PalConfig, PalState};

pub const FORMAT_VERSION: u32 = 1;
pub const N_OBJECTIVES: usize = 2;
pub const MEASUREMENT_HEADER: [&str; 4] = ["point_id", "hardness", "inverse_elasticity", "note"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Composition step; `1 / simplex_step` must be an integer.
    pub simplex_step: f64,
    /// Spin speeds in revolutions per minute.
    pub spin_speeds: Vec<f64>,
    pub dilutions: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            simplex_step: 1.0 / 9.0,
            spin_speeds: vec![1000.0, 2000.0, 4000.0, 6000.0, 8000.0],
            dilutions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl GridConfig {
    fn divisions(&self) -> Result<u32> {
        let step = self.simplex_step;
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::invalid(format!("simplex step {step} must lie in (0, 1]")));
        }
        let d = (1.0 / step).round();
        if (d * step - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("simplex step {step} does not divide 1 evenly")));
        }
        Ok(d as u32)
    }

    fn speed_range(&self) -> (f64, f64) {
        range_of(&self.spin_speeds)
    }

    fn dilution_range(&self) -> (f64, f64) {
        range_of(&self.dilutions)
    }
}

fn range_of(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

fn unit(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// One candidate `(c_pvp10, c_pvp40, c_pvp360, S, d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub id: usize,
    pub c_pvp10: f64,
    pub c_pvp40: f64,
    pub c_pvp360: f64,
    pub spin_speed: f64,
    pub dilution: f64,
}

impl DesignPoint {
    pub fn coordinates(&self) -> [f64; 5] {
        [self.c_pvp10, self.c_pvp40, self.c_pvp360, self.spin_speed, self.dilution]
    }
}

/// Simplex compositions × spin speeds × dilutions. Ids run over
/// compositions fastest, then dilutions, then speeds, so every
/// (speed, dilution) pair owns one contiguous ternary block.
pub fn build_grid(config: &GridConfig) -> Result<Vec<DesignPoint>> {
    let div = config.divisions()?;
    if config.spin_speeds.is_empty() || config.dilutions.is_empty() {
        return Err(Error::invalid("spin speed and dilution level sets must be nonempty"));
    }
    if config.spin_speeds.iter().chain(&config.dilutions).any(|v| !v.is_finite()) {
        return Err(Error::invalid("level sets must be finite"));
    }
    let mut compositions = Vec::new();
    for a in (0..=div).rev() {
        for b in (0..=div - a).rev() {
            let c = div - a - b;
            let d = div as f64;
            compositions.push((a as f64 / d, b as f64 / d, c as f64 / d));
        }
    }
    let mut points = Vec::with_capacity(compositions.len() * config.spin_speeds.len() * config.dilutions.len());
    for &speed in &config.spin_speeds {
        for &dilution in &config.dilutions {
            for &(c10, c40, c360) in &compositions {
                points.push(DesignPoint {
                    id: points.len(),
                    c_pvp10: c10,
                    c_pvp40: c40,
                    c_pvp360: c360,
                    spin_speed: speed,
                    dilution,
                });
            }
        }
    }
    Ok(points)
}

/// Kernel/embedding coordinates: composition as-is, speed and dilution
/// rescaled to `[0, 1]` over their level sets.
pub fn normalized_design(points: &[DesignPoint], config: &GridConfig) -> Vec<Vec<f64>> {
    let sr = config.speed_range();
    let dr = config.dilution_range();
    points
        .iter()
        .map(|p| vec![p.c_pvp10, p.c_pvp40, p.c_pvp360, unit(p.spin_speed, sr), unit(p.dilution, dr)])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub point_id: usize,
    pub hardness: f64,
    /// Inverse modulus of elasticity.
    pub inverse_elasticity: f64,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub note: String,
}

impl Measurement {
    pub fn new(point_id: usize, hardness: f64, inverse_elasticity: f64) -> Self {
        Self {
            point_id,
            hardness,
            inverse_elasticity,
            timestamp: None,
            note: String::new(),
        }
    }

    pub fn objectives(&self) -> Vec<f64> {
        vec![self.hardness, self.inverse_elasticity]
    }
}

/// Parses `point_id,hardness,inverse_elasticity,note` rows (header required).
pub fn parse_measurements_csv(text: &str) -> Result<Vec<Measurement>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[..3] != MEASUREMENT_HEADER[..3] || names.get(3).is_some_and(|n| *n != "note") {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("expected header '{}'", MEASUREMENT_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let parse_err = |col: usize, what: &str| Error::Parse {
            line,
            column: col,
            message: format!("invalid {what} '{}'", field(col - 1)),
        };
        let point_id = field(0).parse::<usize>().map_err(|_| parse_err(1, "point_id"))?;
        let hardness = field(1).parse::<f64>().map_err(|_| parse_err(2, "hardness"))?;
        let inverse_elasticity = field(2).parse::<f64>().map_err(|_| parse_err(3, "inverse_elasticity"))?;
        out.push(Measurement {
            point_id,
            hardness,
            inverse_elasticity,
            timestamp: None,
            note: field(3).to_string(),
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlsConfig {
    pub threshold: f64,
    pub max_summarizer_size: usize,
    pub support: Support,
}

impl Default for FlsConfig {
    fn default() -> Self {
        Self {
            threshold: 0.95,
            max_summarizer_size: 3,
            support: Support::Summarizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub grid: GridConfig,
    pub pal: PalConfig,
    pub fls: FlsConfig,
    pub embed: EmbedConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            pal: PalConfig {
                batch_size: 3,
                max_evaluations: 120,
                ..PalConfig::default()
            },
            fls: FlsConfig::default(),
            embed: EmbedConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum LogEntry {
    Measured {
        point_id: usize,
        hardness: f64,
        inverse_elasticity: f64,
        /// Previous (hardness, inverse elasticity) when this replaced a measurement.
        replaced: Option<(f64, f64)>,
    },
    Step {
        iteration: usize,
        counts: ClassCounts,
        suggestions: Vec<usize>,
        converged: bool,
        report_digest: String,
        embedding_refreshed: bool,
    },
    Override {
        point_id: usize,
        previous_suggestions: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedEmbedding {
    pub grid_digest: String,
    pub coords: Vec<[f64; 2]>,
}

/// The whole persisted campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub version: u32,
    pub seed: u64,
    pub config: CampaignConfig,
    pub points: Vec<DesignPoint>,
    /// Accepted measurements, one per point, ordered by point id.
    pub measurements: Vec<Measurement>,
    pub pal: PalState,
    /// Per point, per objective; empty before the first step.
    pub predictions: Vec<Vec<Prediction>>,
    pub suggestions: Vec<usize>,
    pub override_target: Option<usize>,
    pub report: Option<Report>,
    pub embedding: Option<CachedEmbedding>,
    /// Append-only.
    pub log: Vec<LogEntry>,
}

/// Result of [`Campaign::suggest_batch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub points: Vec<DesignPoint>,
    pub converged: bool,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepArtifacts {
    pub iteration: usize,
    pub counts: ClassCounts,
    pub converged: bool,
    pub suggestions: Vec<usize>,
    pub report: Report,
    pub embedding_refreshed: bool,
}

impl Campaign {
    pub fn new(config: CampaignConfig, seed: u64) -> Result<Self> {
        config.pal.validate(N_OBJECTIVES)?;
        config.embed.validate()?;
        let points = build_grid(&config.grid)?;
        let mut campaign = Self {
            version: FORMAT_VERSION,
            seed,
            pal: PalState::new(points.len(), N_OBJECTIVES),
            config,
            points,
            measurements: Vec::new(),
            predictions: Vec::new(),
            suggestions: Vec::new(),
            override_target: None,
            report: None,
            embedding: None,
            log: Vec::new(),
        };
        campaign.suggestions = campaign.seed_points();
        Ok(campaign)
    }

    pub fn design(&self) -> Vec<Vec<f64>> {
        normalized_design(&self.points, &self.config.grid)
    }

    fn seed_points(&self) -> Vec<usize> {
        pal::maximin_indices(&self.design(), self.config.pal.initial_samples, self.seed)
    }

    pub fn point(&self, id: usize) -> Result<&DesignPoint> {
        self.points
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("design point {id}")))
    }

    /// Grid point at the given `(c_pvp10, c_pvp40, c_pvp360, S, d)`.
    pub fn find_point(&self, coordinates: &[f64; 5]) -> Option<usize> {
        self.points.iter().position(|p| {
            p.coordinates()
                .iter()
                .zip(coordinates)
                .all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(1.0))
        })
    }

    pub fn measurement(&self, id: usize) -> Option<&Measurement> {
        self.measurements
            .binary_search_by_key(&id, |m| m.point_id)
            .ok()
            .map(|i| &self.measurements[i])
    }

    pub fn counts(&self) -> ClassCounts {
        self.pal.counts()
    }

    pub fn is_converged(&self) -> bool {
        self.pal.is_converged()
    }

    pub fn budget_exhausted(&self) -> bool {
        self.measurements.len() >= self.config.pal.max_evaluations
    }

    /// Stores a measurement; re-measuring a point replaces the earlier value
    /// and records the old one in the log. Leaves the campaign unchanged on error.
    pub fn ingest(&mut self, measurement: Measurement) -> Result<()> {
        self.point(measurement.point_id)?;
        for v in [measurement.hardness, measurement.inverse_elasticity] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!(
                    "objective values must be finite and positive (point {})",
                    measurement.point_id
                )));
            }
        }
        let id = measurement.point_id;
        let entry = |replaced| LogEntry::Measured {
            point_id: id,
            hardness: measurement.hardness,
            inverse_elasticity: measurement.inverse_elasticity,
            replaced,
        };
        match self.measurements.binary_search_by_key(&id, |m| m.point_id) {
            Ok(i) => {
                let old = &self.measurements[i];
                let log = entry(Some((old.hardness, old.inverse_elasticity)));
                self.measurements[i] = measurement;
                self.log.push(log);
            }
            Err(i) => {
                let log = entry(None);
                self.measurements.insert(i, measurement);
                self.log.push(log);
            }
        }
        self.pal.mark_sampled(id);
        self.suggestions.retain(|s| *s != id);
        if self.override_target == Some(id) {
            self.override_target = None;
        }
        Ok(())
    }

    /// Marks a human-chosen point as the next evaluation target.
    pub fn override_suggestion(&mut self, point_id: usize) -> Result<()> {
        self.point(point_id)?;
        if self.pal.classes[point_id].sampled {
            return Err(Error::State(format!("point {point_id} has already been measured")));
        }
        let previous = self.suggestions.clone();
        self.override_target = Some(point_id);
        self.suggestions.retain(|s| *s != point_id);
        self.suggestions.insert(0, point_id);
        self.log.push(LogEntry::Override {
            point_id,
            previous_suggestions: previous,
        });
        Ok(())
    }

    fn means(&self) -> Vec<Vec<f64>> {
        self.predictions
            .iter()
            .map(|p| p.iter().map(|q| q.mean).collect())
            .collect()
    }

    /// Unmeasured seed points first, then ε-PAL selection.
    fn compute_batch(&self, batch_size: usize) -> Vec<usize> {
        let seeds: Vec<usize> = self
            .seed_points()
            .into_iter()
            .filter(|i| !self.pal.classes[*i].sampled)
            .collect();
        if !seeds.is_empty() || self.pal.iteration == 0 {
            return seeds;
        }
        pal::select_batch(&self.pal, &self.means(), &self.config.pal.epsilon, batch_size).0
    }

    /// Next points to measure. A pending human override comes first.
    pub fn suggest_batch(&self, batch_size: usize) -> Result<Suggestion> {
        if batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let converged = self.is_converged();
        let budget_exhausted = self.budget_exhausted();
        if converged || budget_exhausted {
            return Ok(Suggestion {
                points: Vec::new(),
                converged,
                budget_exhausted,
            });
        }
        let mut ids = self.compute_batch(batch_size);
        if let Some(t) = self.override_target {
            ids.retain(|i| *i != t);
            ids.insert(0, t);
        }
        let remaining = self.config.pal.max_evaluations - self.measurements.len();
        ids.truncate(batch_size.min(remaining));
        Ok(Suggestion {
            points: ids.iter().map(|i| self.points[*i].clone()).collect(),
            converged,
            budget_exhausted,
        })
    }

    fn observations(&self) -> Vec<(usize, Vec<f64>)> {
        self.measurements.iter().map(|m| (m.point_id, m.objectives())).collect()
    }

    fn grid_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.points).expect("grid serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// One iteration: refit, update regions, reclassify, suggest, explain and
    /// (when the grid changed) re-embed. On error the campaign is untouched.
    pub fn step(&mut self) -> Result<StepArtifacts> {
        if self.measurements.is_empty() {
            return Err(Error::State("step needs at least one measurement".into()));
        }
        let mut next = self.clone();
        let design = self.design();
        let predictions = pal::fit_and_predict(
            &design,
            &self.observations(),
            N_OBJECTIVES,
            &self.config.pal.fit,
            self.seed,
        )?;
        let t = next.pal.iteration + 1;
        let cfg = &self.config.pal;
        let beta = pal::beta_t(t, self.points.len(), N_OBJECTIVES, cfg.delta, cfg.beta_scale);
        let previous = (next.pal.iteration > 0).then_some(next.pal.regions.as_slice());
        let update = pal::update_regions(&predictions, beta, previous);
        next.pal.regions = update.regions;
        next.pal.disjoint_fallbacks += update.fallbacks;
        next.pal.region_updates += self.points.len() * N_OBJECTIVES;
        next.pal.objective_ranges = pal::mean_ranges(&predictions, N_OBJECTIVES);
        next.pal.classes = pal::classify(&next.pal.regions, &cfg.epsilon, &next.pal.objective_ranges, &next.pal.classes);
        next.pal.iteration = t;
        next.predictions = predictions;

        let counts = next.pal.counts();
        let converged = counts.undecided == 0;
        let suggestions = if converged {
            Vec::new()
        } else {
            next.suggest_batch(cfg.batch_size)?.points.iter().map(|p| p.id).collect()
        };
        next.suggestions = suggestions.clone();

        let report = next.explain()?;
        let digest = hex::encode(Sha256::digest(report.markdown.as_bytes()));
        next.report = Some(report.clone());

        let grid_digest = next.grid_digest();
        let embedding_refreshed = next.embedding.as_ref().is_none_or(|e| e.grid_digest != grid_digest);
        if embedding_refreshed {
            let coords = next.compute_embedding()?.coords;
            next.embedding = Some(CachedEmbedding { grid_digest, coords });
        }

        next.log.push(LogEntry::Step {
            iteration: t,
            counts,
            suggestions: suggestions.clone(),
            converged,
            report_digest: digest,
            embedding_refreshed,
        });
        *self = next;
        Ok(StepArtifacts {
            iteration: t,
            counts,
            converged,
            suggestions,
            report,
            embedding_refreshed,
        })
    }

    /// Normalized region diagonal per point (0 before the first step).
    pub fn uncertainties(&self) -> Vec<f64> {
        if self.pal.regions.is_empty() {
            return vec![0.0; self.points.len()];
        }
        self.pal
            .regions
            .iter()
            .map(|r| r.diagonal(&self.pal.objective_ranges))
            .collect()
    }

    /// Linguistic variables over the five design coordinates.
    pub fn design_variables(&self) -> Result<Vec<LinguisticVariable>> {
        let g = &self.config.grid;
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
        Ok(vec![
            LinguisticVariable::five_terms("pvp10", "pvp10 concentration", (0.0, 1.0))?,
            LinguisticVariable::five_terms("pvp40", "pvp40 concentration", (0.0, 1.0))?,
            LinguisticVariable::five_terms("pvp360", "pvp360 concentration", (0.0, 1.0))?,
            LinguisticVariable::five_terms("spin_speed", "spin speed", widen(g.speed_range()))?,
            LinguisticVariable::five_terms("dilution", "dilution", widen(g.dilution_range()))?,
        ])
    }

    /// Classified grid as FLS records, with the normalized region diagonal
    /// under the `uncertainty` attribute.
    pub fn fls_records(&self) -> Vec<Record> {
        let unc = self.uncertainties();
        self.points
            .iter()
            .zip(&unc)
            .map(|(p, u)| {
                let values = [
                    ("pvp10", p.c_pvp10),
                    ("pvp40", p.c_pvp40),
                    ("pvp360", p.c_pvp360),
                    ("spin_speed", p.spin_speed),
                    ("dilution", p.dilution),
                    ("uncertainty", *u),
                ]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
                Record {
                    values,
                    category: Some(self.pal.classes[p.id].class),
                }
            })
            .collect()
    }

    pub fn qualifiers(&self) -> Result<Vec<Qualifier>> {
        let max_unc = self.uncertainties().into_iter().fold(0.0, f64::max);
        let domain = if max_unc > 0.0 { (0.0, max_unc) } else { (0.0, 1.0) };
        let unc = LinguisticVariable::new("uncertainty", "uncertainty", domain, &["low", "high"])?;
        Ok(vec![
            Qualifier::category(Classification::ParetoOptimal),
            Qualifier::category(Classification::Discarded),
            Qualifier::category(Classification::Undecided),
            Qualifier::fuzzy(unc, "high")?,
        ])
    }

    /// Evaluates, prunes and renders the summary of the current classification.
    pub fn explain(&self) -> Result<Report> {
        let variables = self.design_variables()?;
        let fcfg = &self.config.fls;
        let mut statements = fls::enumerate_statements(
            &variables,
            &Quantifier::defaults(),
            &self.qualifiers()?,
            fcfg.max_summarizer_size.min(variables.len()),
        )?;
        fls::evaluate_all(&mut statements, &variables, &self.fls_records(), fcfg.support)?;
        let pruned = fls::simplify(&statements, fcfg.threshold);
        let labels = ReportLabels {
            title: format!("Fuzzy linguistic summary, iteration {}", self.pal.iteration),
            subject: "design points".into(),
            variables,
        };
        Ok(fls::render_report(&pruned, &labels))
    }

    pub fn compute_embedding(&self) -> Result<embed::Embedding> {
        let cfg = EmbedConfig {
            seed: self.seed,
            ..self.config.embed.clone()
        };
        let (_, emb) = embed::embed_points(&self.design(), &cfg)?;
        Ok(emb)
    }

    /// The cached embedding, computing it if the grid changed.
    pub fn embedding(&mut self) -> Result<&CachedEmbedding> {
        let digest = self.grid_digest();
        if self.embedding.as_ref().is_none_or(|e| e.grid_digest != digest) {
            let coords = self.compute_embedding()?.coords;
            self.embedding = Some(CachedEmbedding {
                grid_digest: digest,
                coords,
            });
        }
        Ok(self.embedding.as_ref().expect("embedding just cached"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("campaign serializes")
    }

    /// Parses a campaign document. Rejects newer format versions and any
    /// document that is malformed or internally inconsistent.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Parse {
                line: 1,
                column: 1,
                message: "missing numeric 'version' field".into(),
            })?;
        if version > FORMAT_VERSION as u64 {
            return Err(Error::UnsupportedVersion {
                found: version.min(u32::MAX as u64) as u32,
                supported: FORMAT_VERSION,
            });
        }
        let campaign: Campaign = serde_json::from_str(text).map_err(json_error)?;
        campaign.validate()?;
        Ok(campaign)
    }

    fn validate(&self) -> Result<()> {
        let n = self.points.len();
        let bad = |m: String| Err(Error::State(m));
        if self.pal.classes.len() != n {
            return bad("classification length differs from grid size".into());
        }
        if !self.pal.regions.is_empty() && self.pal.regions.len() != n {
            return bad("region count differs from grid size".into());
        }
        if !self.predictions.is_empty() && self.predictions.len() != n {
            return bad("prediction count differs from grid size".into());
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.id != i {
                return bad(format!("point at position {i} has id {}", p.id));
            }
        }
        for w in self.measurements.windows(2) {
            if w[0].point_id >= w[1].point_id {
                return bad("measurements must be unique and ordered by point id".into());
            }
        }
        if let Some(m) = self.measurements.iter().find(|m| m.point_id >= n) {
            return bad(format!("measurement references unknown point {}", m.point_id));
        }
        if self.suggestions.iter().chain(&self.override_target).any(|i| *i >= n) {
            return bad("suggestion references unknown point".into());
        }
        Ok(())
    }

    /// Atomic write: temp file in the target directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let file_name = path
            .file_name()
            .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?
            .to_string_lossy()
            .into_owned();
        let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
        let result = (|| {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(self.to_json().as_bytes())?;
            f.write_all(b"\n")?;
            f.sync_all()?;
            std::fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = std::fs::remove_file(&tmp);
        }
        Ok(result?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertices_only() {
        let cfg = GridConfig {
            simplex_step: 1.0,
            spin_speeds: vec![4000.0],
            dilutions: vec![0.0],
        };
        let pts = build_grid(&cfg).unwrap();
        let comps: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.c_pvp10, p.c_pvp40, p.c_pvp360)).collect();
        assert_eq!(comps, vec![(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]);
    }

    #[test]
    fn default_grid_size_and_constraint() {
        let pts = build_grid(&GridConfig::default()).unwrap();
        assert_eq!(pts.len(), 1375);
        for p in &pts {
            assert!((p.c_pvp10 + p.c_pvp40 + p.c_pvp360 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_step_rejected() {
        let cfg = GridConfig {
            simplex_step: 0.3,
            ..Default::default()
        };
        assert!(matches!(build_grid(&cfg), Err(Error::InvalidArgument(_))));
        let cfg = GridConfig {
            simplex_step: 0.0,
            ..Default::default()
        };
        assert!(build_grid(&cfg).is_err());
    }

    fn small_config() -> CampaignConfig {
        CampaignConfig {
            grid: GridConfig {
                simplex_step: 0.5,
                spin_speeds: vec![1000.0, 8000.0],
                dilutions: vec![0.0, 1.0],
            },
            embed: EmbedConfig {
                k: 4,
                epochs: 20,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn ingest_round_trip_and_replacement() {
        let mut c = Campaign::new(small_config(), 1).unwrap();
        c.ingest(Measurement::new(3, 1.5, 0.7)).unwrap();
        let m = c.measurement(3).unwrap();
        assert_eq!((m.hardness, m.inverse_elasticity), (1.5, 0.7));
        assert_eq!(c.log.len(), 1);
        c.ingest(Measurement::new(3, 1.6, 0.8)).unwrap();
        assert_eq!(c.measurement(3).unwrap().hardness, 1.6);
        assert_eq!(c.measurements.len(), 1);
        assert_eq!(c.log.len(), 2);
        assert!(matches!(c.log[1], LogEntry::Measured { replaced: Some((1.5, 0.7)), .. }));
    }

    #[test]
    fn ingest_unknown_point_leaves_state() {
        let mut c = Campaign::new(small_config(), 1).unwrap();
        let before = c.clone();
        assert!(matches!(c.ingest(Measurement::new(99999, 1.0, 1.0)), Err(Error::NotFound(_))));
        assert!(matches!(c.ingest(Measurement::new(0, f64::NAN, 1.0)), Err(Error::InvalidArgument(_))));
        assert_eq!(c, before);
    }

    #[test]
    fn csv_import() {
        let text = "point_id,hardness,inverse_elasticity,note\n4,1.25,0.5,first film\n7,0.9,0.6,\n";
        let rows = parse_measurements_csv(text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].point_id, 4);
        assert_eq!(rows[0].note, "first film");
        assert!(parse_measurements_csv("id,h,e\n1,2,3\n").is_err());
        let err = parse_measurements_csv("point_id,hardness,inverse_elasticity,note\n4,abc,0.5,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 2, .. }), "{err:?}");
    }

    #[test]
    fn truncated_document_fails_to_parse() {
        let c = Campaign::new(small_config(), 1).unwrap();
        let json = c.to_json();
        let cut = &json[..json.len() / 2];
        assert!(matches!(Campaign::from_json(cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn newer_version_is_rejected() {
        let mut c = Campaign::new(small_config(), 1).unwrap();
        c.version = FORMAT_VERSION + 1;
        assert!(matches!(
            Campaign::from_json(&c.to_json()),
            Err(Error::UnsupportedVersion { found, .. }) if found == FORMAT_VERSION + 1
        ));
    }

    #[test]
    fn fresh_campaign_suggests_seeds() {
        let c = Campaign::new(small_config(), 1).unwrap();
        let s = c.suggest_batch(3).unwrap();
        assert_eq!(s.points.len(), 3);
        assert!(!s.converged);
    }

    #[test]
    fn step_without_measurements_fails() {
        let mut c = Campaign::new(small_config(), 1).unwrap();
        assert!(matches!(c.step(), Err(Error::State(_))));
    }

    #[test]
    fn override_rules() {
        let mut c = Campaign::new(small_config(), 1).unwrap();
        c.override_suggestion(5).unwrap();
        assert_eq!(c.suggestions[0], 5);
        assert_eq!(c.suggest_batch(3).unwrap().points[0].id, 5);
        assert!(matches!(c.log.last(), Some(LogEntry::Override { point_id: 5, .. })));
        c.ingest(Measurement::new(5, 1.0, 1.0)).unwrap();
        assert!(matches!(c.override_suggestion(5), Err(Error::State(_))));
        assert!(matches!(c.override_suggestion(500), Err(Error::NotFound(_))));
    }

    #[test]
    fn find_point_by_coordinates() {
        let c = Campaign::new(CampaignConfig::default(), 0).unwrap();
        let id = c.find_point(&[0.0, 1.0 / 9.0, 8.0 / 9.0, 8000.0, 0.0]).unwrap();
        let p = &c.points[id];
        assert_eq!(p.spin_speed, 8000.0);
        assert!((p.c_pvp360 - 8.0 / 9.0).abs() < 1e-12);
        assert!(c.find_point(&[0.5, 0.5, 0.0, 3000.0, 0.0]).is_none());
    }
}
