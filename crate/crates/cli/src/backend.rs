//! The operations the CLI needs, served either from the campaign file
//! directly or from a running service.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use epal_client::EpalClient;
use epal_core::api::{
    point_views, ApiStatusView, EmbeddingView, LogView, MeasurementRequest, OverrideRequest, OverrideResponse,
    PointView, ReportView, StepResponse,
};
use epal_core::campaign::{Campaign, DesignPoint, Measurement};
use epal_core::embed::EmbeddingRecord;

pub trait Backend {
    fn status(&self) -> Result<ApiStatusView>;
    fn points(&self) -> Result<Vec<PointView>>;
    fn suggestions(&self, batch: Option<usize>) -> Result<Vec<DesignPoint>>;
    /// All-or-nothing for the local backend.
    fn measure(&self, requests: Vec<MeasurementRequest>) -> Result<ApiStatusView>;
    fn override_point(&self, request: OverrideRequest) -> Result<OverrideResponse>;
    fn step(&self) -> Result<StepResponse>;
    fn report(&self) -> Result<ReportView>;
    fn embedding(&self) -> Result<EmbeddingView>;
    fn log(&self) -> Result<LogView>;
}

pub struct Local {
    pub path: PathBuf,
}

impl Local {
    fn load(&self) -> Result<Campaign> {
        if !self.path.exists() {
            bail!(
                "campaign file {} not found (create one with `epal init`)",
                self.path.display()
            );
        }
        Campaign::load(&self.path).with_context(|| format!("loading {}", self.path.display()))
    }

    fn update<T>(&self, f: impl FnOnce(&mut Campaign) -> epal_core::Result<T>) -> Result<T> {
        let mut c = self.load()?;
        let out = f(&mut c)?;
        c.save(&self.path)
            .with_context(|| format!("saving {}", self.path.display()))?;
        Ok(out)
    }
}

impl Backend for Local {
    fn status(&self) -> Result<ApiStatusView> {
        Ok(ApiStatusView::of(&self.load()?))
    }

    fn points(&self) -> Result<Vec<PointView>> {
        Ok(point_views(&self.load()?))
    }

    fn suggestions(&self, batch: Option<usize>) -> Result<Vec<DesignPoint>> {
        let c = self.load()?;
        Ok(c.suggest_batch(batch.unwrap_or(c.config.pal.batch_size))?.points)
    }

    fn measure(&self, requests: Vec<MeasurementRequest>) -> Result<ApiStatusView> {
        self.update(|c| {
            for r in requests {
                let mut m = Measurement::new(r.point_id, r.hardness, r.inverse_elasticity);
                m.note = r.note.unwrap_or_default();
                m.timestamp = r.timestamp;
                c.ingest(m)?;
            }
            Ok(ApiStatusView::of(c))
        })
    }

    fn override_point(&self, request: OverrideRequest) -> Result<OverrideResponse> {
        self.update(|c| {
            let id = match (request.point_id, request.coordinates) {
                (Some(id), None) => id,
                (None, Some(x)) => c
                    .find_point(&x)
                    .ok_or_else(|| epal_core::Error::NotFound(format!("no grid point at coordinates {x:?}")))?,
                _ => {
                    return Err(epal_core::Error::InvalidArgument(
                        "give exactly one of a point id and coordinates".into(),
                    ))
                }
            };
            c.override_suggestion(id)?;
            Ok(OverrideResponse {
                point_id: id,
                suggestions: c.suggestions.clone(),
            })
        })
    }

    fn step(&self) -> Result<StepResponse> {
        self.update(|c| {
            let a = c.step()?;
            Ok(StepResponse {
                iteration: a.iteration,
                counts: a.counts,
                converged: a.converged,
                suggestions: a.suggestions,
                embedding_refreshed: a.embedding_refreshed,
                report_digest: ApiStatusView::digest(&a.report.markdown),
            })
        })
    }

    fn report(&self) -> Result<ReportView> {
        let c = self.load()?;
        let report = match &c.report {
            Some(r) => r.clone(),
            None => c.explain()?,
        };
        Ok(ReportView {
            iteration: c.pal.iteration,
            markdown: report.markdown,
            records: report.records,
            prompt: report.prompt,
        })
    }

    fn embedding(&self) -> Result<EmbeddingView> {
        let coords = self.update(|c| Ok(c.embedding()?.coords.clone()))?;
        Ok(EmbeddingView {
            records: coords
                .iter()
                .enumerate()
                .map(|(id, p)| EmbeddingRecord { id, x: p[0], y: p[1] })
                .collect(),
        })
    }

    fn log(&self) -> Result<LogView> {
        Ok(LogView {
            entries: self.load()?.log,
        })
    }
}

pub struct Remote {
    pub client: EpalClient,
}

impl Backend for Remote {
    fn status(&self) -> Result<ApiStatusView> {
        Ok(self.client.status()?)
    }

    fn points(&self) -> Result<Vec<PointView>> {
        Ok(self.client.points()?)
    }

    fn suggestions(&self, batch: Option<usize>) -> Result<Vec<DesignPoint>> {
        Ok(self.client.suggestions_batch(batch)?.points)
    }

    fn measure(&self, requests: Vec<MeasurementRequest>) -> Result<ApiStatusView> {
        let mut last = None;
        for r in &requests {
            last = Some(self.client.measure(r)?);
        }
        match last {
            Some(s) => Ok(s),
            None => self.status(),
        }
    }

    fn override_point(&self, request: OverrideRequest) -> Result<OverrideResponse> {
        Ok(self.client.override_point(&request)?)
    }

    fn step(&self) -> Result<StepResponse> {
        Ok(self.client.step()?)
    }

    fn report(&self) -> Result<ReportView> {
        Ok(self.client.report()?)
    }

    fn embedding(&self) -> Result<EmbeddingView> {
        Ok(self.client.embedding()?)
    }

    fn log(&self) -> Result<LogView> {
        Ok(self.client.log()?)
    }
}
