//! Thin async client for the dungeon service.

use dungeon_api::{
    ActionRequest, ActionResponse, AdvanceResponse, ApiError, CreateSession, Leaderboard, RoundStatus, SessionView,
    TeachRequest, TeachResponse, ADMIN_HEADER,
};
use reqwest::{RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("{status}: {} ({})", error.message, error.code)]
    Api { status: StatusCode, error: ApiError },
}

impl ClientError {
    /// The service's error code, if the request reached it.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { error, .. } => Some(&error.code),
            ClientError::Http(_) => None,
        }
    }

    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http(e) => e.status(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
    admin_token: Option<String>,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new(), admin_token: None }
    }

    pub fn with_admin_token(mut self, token: impl Into<String>) -> Self {
        self.admin_token = Some(token.into());
        self
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ClientError> {
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let error = serde_json::from_str(&text)
            .unwrap_or(ApiError { code: "http".into(), message: text, position: None });
        Err(ClientError::Api { status, error })
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<SessionView, ClientError> {
        self.send(self.http.post(self.url("/sessions")).json(req)).await
    }

    pub async fn session(&self, id: &str) -> Result<SessionView, ClientError> {
        self.send(self.http.get(self.url(&format!("/sessions/{id}")))).await
    }

    pub async fn action(&self, id: &str, action: &str) -> Result<ActionResponse, ClientError> {
        let body = ActionRequest { action: action.to_string() };
        self.send(self.http.post(self.url(&format!("/sessions/{id}/action"))).json(&body)).await
    }

    pub async fn teach(&self, id: &str, command: &str) -> Result<TeachResponse, ClientError> {
        let body = TeachRequest { command: command.to_string() };
        self.send(self.http.post(self.url(&format!("/sessions/{id}/teach"))).json(&body)).await
    }

    pub async fn reset(&self, id: &str) -> Result<SessionView, ClientError> {
        self.send(self.http.post(self.url(&format!("/sessions/{id}/reset")))).await
    }

    pub async fn leaderboard(&self) -> Result<Leaderboard, ClientError> {
        self.send(self.http.get(self.url("/leaderboard"))).await
    }

    pub async fn round(&self) -> Result<RoundStatus, ClientError> {
        self.send(self.http.get(self.url("/round"))).await
    }

    pub async fn advance(&self) -> Result<AdvanceResponse, ClientError> {
        let mut req = self.http.post(self.url("/round/advance"));
        if let Some(t) = &self.admin_token {
            req = req.header(ADMIN_HEADER, t);
        }
        self.send(req).await
    }
}
