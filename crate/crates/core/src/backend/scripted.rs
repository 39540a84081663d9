// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{Backend, BackendError, GenerationRequest};

/// One scripted reply, optionally guarded by a substring the prompt must contain.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Plain(String),
    Keyed {
        #[serde(default)]
        expect: Option<String>,
        response: String,
    },
}

impl ScriptEntry {
    pub fn response(&self) -> &str {
        match self {
            ScriptEntry::Plain(r) => r,
            ScriptEntry::Keyed { response, .. } => response,
        }
    }

    pub fn expect(&self) -> Option<&str> {
        match self {
            ScriptEntry::Plain(_) => None,
            ScriptEntry::Keyed { expect, .. } => expect.as_deref(),
        }
    }
}

impl From<&str> for ScriptEntry {
    fn from(s: &str) -> Self {
        ScriptEntry::Plain(s.to_string())
    }
}

impl From<String> for ScriptEntry {
    fn from(s: String) -> Self {
        ScriptEntry::Plain(s)
    }
}

/// Script file contents: one shared reply sequence, or one sequence per task id.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ScriptFile {
    Shared(Vec<ScriptEntry>),
    PerTask(BTreeMap<String, Vec<ScriptEntry>>),
}

impl ScriptFile {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))
    }
}

/// Deterministic replay backend: the i-th call returns the i-th scripted reply.
#[derive(Debug)]
pub struct ScriptedBackend {
    responses: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new<I, E>(responses: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: Into<ScriptEntry>,
    {
        Self {
            responses: responses.into_iter().map(Into::into).collect(),
            cursor: Mutex::new(0),
        }
    }

    pub fn from_entries(responses: Vec<ScriptEntry>) -> Self {
        Self {
            responses,
            cursor: Mutex::new(0),
        }
    }

    pub fn cursor(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.check()?;
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let entry = self
            .responses
            .get(*cursor)
            .ok_or(BackendError::ScriptExhausted { calls: *cursor })?;
        if let Some(expect) = entry.expect() {
            let prompt = request.user_text();
            if !prompt.contains(expect) {
                return Err(BackendError::ScriptMismatch {
                    index: *cursor,
                    expected: expect.to_string(),
                });
            }
        }
        *cursor += 1;
        Ok(entry.response().to_string())
    }
}

/// Backend that answers with a closure over the request, for simulations
/// that need replies to depend on the prompt.
pub struct FnBackend<F>(pub F);

impl<F> Backend for FnBackend<F>
where
    F: Fn(&GenerationRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.check()?;
        (self.0)(request)
    }
}
