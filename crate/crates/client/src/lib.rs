//! Blocking HTTP client for `epal-service`.

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder};
use serde::de::DeserializeOwned;
use serde::Serialize;

use epal_core::api::{
    ApiStatusView, EmbeddingView, ErrorBody, LogView, MeasurementRequest, OverrideRequest, OverrideResponse,
    PointView, ReportView, StepResponse, SuggestionsView,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),

    #[error("server returned {status}: {message}")]
    Api { status: u16, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Transport(e) => e.status().map(|s| s.as_u16()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct EpalClient {
    base: String,
    http: Client,
}

impl EpalClient {
    /// `base` is e.g. `http://127.0.0.1:8731`.
    pub fn new(base: impl Into<String>) -> Result<Self> {
        let http = Client::builder().timeout(Duration::from_secs(600)).build()?;
        Ok(Self {
            base: base.into().trim_end_matches('/').to_string(),
            http,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T> {
        let resp = req.send()?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json()?);
        }
        let text = resp.text().unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(ClientError::Api {
            status: status.as_u16(),
            message,
        })
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        self.send(self.http.get(self.url(path)))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        self.send(self.http.post(self.url(path)).json(body))
    }

    pub fn status(&self) -> Result<ApiStatusView> {
        self.get("/status")
    }

    pub fn points(&self) -> Result<Vec<PointView>> {
        self.get("/points")
    }

    pub fn suggestions(&self) -> Result<SuggestionsView> {
        self.get("/suggestions")
    }

    pub fn suggestions_batch(&self, batch: Option<usize>) -> Result<SuggestionsView> {
        match batch {
            Some(n) => self.get(&format!("/suggestions?batch={n}")),
            None => self.suggestions(),
        }
    }

    pub fn report(&self) -> Result<ReportView> {
        self.get("/report")
    }

    pub fn embedding(&self) -> Result<EmbeddingView> {
        self.get("/embedding")
    }

    pub fn log(&self) -> Result<LogView> {
        self.get("/log")
    }

    pub fn measure(&self, req: &MeasurementRequest) -> Result<ApiStatusView> {
        self.post("/measurements", req)
    }

    pub fn override_point(&self, req: &OverrideRequest) -> Result<OverrideResponse> {
        self.post("/override", req)
    }

    pub fn step(&self) -> Result<StepResponse> {
        self.send(self.http.post(self.url("/step")))
    }
}
