//! Model access: one completion contract, three implementations.
//!
//! * [`HttpBackend`]: OpenAI-compatible chat endpoint with an inline image.
//! * [`ReplayBackend`]: canned replies keyed by image and prompt hashes.
//! * [`OracleBackend`]: answers from ground truth, optionally degraded by
//!   seeded noise.

mod http;
mod oracle;
mod replay;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::render::BoxIndex;
use crate::BBox;

pub use http::{HttpBackend, HttpConfig, API_KEY_VAR, API_URL_VAR};
pub use oracle::{oracle_reply, NoiseConfig, OracleBackend};
pub use replay::{Recorder, ReplayBackend, ReplayEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub max_tokens: u32,
    /// Ask for the most deterministic decoding the provider allows.
    pub deterministic: bool,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self { max_tokens: 4096, deterministic: true }
    }
}

/// Side information for test doubles; real backends ignore it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequestContext {
    pub image_id: String,
    /// Index map drawn on the visual prompt, if any.
    pub index_map: Option<BoxIndex>,
    /// Source region of a cropped image (OCR).
    pub region: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub image: Vec<u8>,
    pub media_type: String,
    pub decode: DecodeParams,
    pub backend_id: String,
    pub context: RequestContext,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, image: Vec<u8>, context: RequestContext) -> Self {
        Self { prompt: prompt.into(), image, media_type: "image/png".into(), decode: DecodeParams::default(), backend_id: String::new(), context }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.image.is_empty() {
            return Err(BackendError::InvalidRequest("image must not be empty".into()));
        }
        if self.prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("prompt must not be empty".into()));
        }
        Ok(())
    }

    pub fn image_hash(&self) -> String {
        sha256_hex(&self.image)
    }

    pub fn prompt_hash(&self) -> String {
        sha256_hex(self.prompt.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed reply: {0}")]
    BadReply(String),
    #[error("no recorded reply for image {image_hash} / prompt {prompt_hash}")]
    ReplayMiss { image_hash: String, prompt_hash: String },
    #[error("no ground truth for image '{0}'")]
    UnknownImage(String),
}

impl BackendError {
    /// Worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}
