//! Async client for the survey service API.

use framebias_core::survey::{NextPair, ResponseSubmission, Summary};
use reqwest::StatusCode;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server returned {status}: {message}")]
    Api { status: StatusCode, message: String },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
pub struct Ack {
    pub status: String,
    pub pair_id: String,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

#[derive(Debug, Clone)]
pub struct SurveyClient {
    base: String,
    http: reqwest::Client,
}

impl SurveyClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self::with_client(base, reqwest::Client::new())
    }

    pub fn with_client(base: impl Into<String>, http: reqwest::Client) -> Self {
        let base = base.into().trim_end_matches('/').to_owned();
        Self { base, http }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub async fn next_pair(&self, session: &str) -> Result<NextPair> {
        let resp = self
            .http
            .get(format!("{}/api/pairs/next?session={session}", self.base))
            .send()
            .await?;
        decode(resp).await
    }

    pub async fn submit(&self, submission: &ResponseSubmission) -> Result<Ack> {
        let resp = self
            .http
            .post(format!("{}/api/responses", self.base))
            .json(submission)
            .send()
            .await?;
        decode(resp).await
    }

    pub async fn summary(&self) -> Result<Summary> {
        let resp = self
            .http
            .get(format!("{}/api/summary", self.base))
            .send()
            .await?;
        decode(resp).await
    }

    /// Raw bytes of one stimulus frame, `url` as given in a pair payload.
    pub async fn frame(&self, url: &str, index: usize) -> Result<Vec<u8>> {
        let resp = self
            .http
            .get(format!("{}{url}{index:05}.png", self.base))
            .send()
            .await?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ClientError::Api {
                status,
                message: resp.text().await.unwrap_or_default(),
            });
        }
        Ok(resp.bytes().await?.to_vec())
    }
}

async fn decode<T: serde::de::DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp.json().await?);
    }
    let text = resp.text().await.unwrap_or_default();
    let message = serde_json::from_str::<ErrorBody>(&text)
        .map(|b| b.error)
        .unwrap_or(text);
    Err(ClientError::Api { status, message })
}
