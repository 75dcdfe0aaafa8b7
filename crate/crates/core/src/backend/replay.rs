use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub image_hash: String,
    pub prompt_hash: String,
    pub reply: String,
}

/// Serves recorded replies; a request nobody recorded is an error.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    replies: HashMap<(String, String), String>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<ReplayEntry>) -> Self {
        Self { replies: entries.into_iter().map(|e| ((e.image_hash, e.prompt_hash), e.reply)).collect() }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Config(format!("cannot read replay file {}: {e}", path.display())))?;
        let entries: Vec<ReplayEntry> = serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("replay file {}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let key = (request.image_hash(), request.prompt_hash());
        self.replies.get(&key).cloned().ok_or(BackendError::ReplayMiss { image_hash: key.0, prompt_hash: key.1 })
    }
}

/// Wraps a backend and keeps every successful exchange for later replay.
pub struct Recorder<B> {
    inner: B,
    entries: Mutex<Vec<ReplayEntry>>,
}

impl<B: Backend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, entries: Mutex::new(Vec::new()) }
    }

    /// Recorded exchanges sorted by key, for stable files.
    pub fn entries(&self) -> Vec<ReplayEntry> {
        let mut v = self.entries.lock().expect("recorder lock").clone();
        v.sort_by(|a, b| (&a.image_hash, &a.prompt_hash).cmp(&(&b.image_hash, &b.prompt_hash)));
        v.dedup_by(|a, b| a.image_hash == b.image_hash && a.prompt_hash == b.prompt_hash);
        v
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.entries()).expect("entries serialize"))
    }
}

impl<B: Backend> Backend for Recorder<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let reply = self.inner.complete(request)?;
        self.entries.lock().expect("recorder lock").push(ReplayEntry { image_hash: request.image_hash(), prompt_hash: request.prompt_hash(), reply: reply.clone() });
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::RequestContext;

    struct Echo;

    impl Backend for Echo {
        fn id(&self) -> String {
            "echo".into()
        }
        fn complete(&self, r: &CompletionRequest) -> Result<String, BackendError> {
            Ok(format!("{} bytes", r.image.len()))
        }
    }

    #[test]
    fn record_then_replay() {
        let rec = Recorder::new(Echo);
        let req = CompletionRequest::new("p", vec![1, 2, 3], RequestContext::default());
        assert_eq!(rec.complete(&req).unwrap(), "3 bytes");
        let replay = ReplayBackend::new(rec.entries());
        assert_eq!(replay.complete(&req).unwrap(), "3 bytes");
        let other = CompletionRequest::new("q", vec![1, 2, 3], RequestContext::default());
        assert!(matches!(replay.complete(&other), Err(BackendError::ReplayMiss { .. })));
    }
}
