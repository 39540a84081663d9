// SPDX-License-Identifier: Apache-2.0

//! Text-generation backends and the prompt templates rendered for them.

mod remote;
mod scripted;
mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{RemoteBackend, RemoteConfig};
pub use scripted::{FnBackend, ScriptEntry, ScriptFile, ScriptedBackend};
pub use template::{PromptSet, PromptTemplate, TemplateError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("remote backend failed after {attempts} attempt(s): {message}")]
    Remote { attempts: u32, message: String },
    #[error("script exhausted after {calls} call(s)")]
    ScriptExhausted { calls: usize },
    #[error("scripted reply {index} expected the prompt to contain {expected:?}")]
    ScriptMismatch { index: usize, expected: String },
    #[error("script file: {0}")]
    Script(String),
    #[error("prompt needs about {estimated} tokens, context limit is {limit}")]
    ContextOverflow { estimated: usize, limit: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// Sampling parameters shared by every call of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_context_tokens: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.5,
            max_context_tokens: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_context_tokens: usize,
}

impl GenerationRequest {
    pub fn user(content: impl Into<String>, params: &GenerationParams) -> Self {
        Self {
            messages: vec![Message {
                role: Role::User,
                content: content.into(),
            }],
            temperature: params.temperature,
            max_context_tokens: params.max_context_tokens,
        }
    }

    /// Rough token count: one token per four characters.
    pub fn estimated_prompt_tokens(&self) -> usize {
        let chars: usize = self.messages.iter().map(|m| m.content.chars().count()).sum();
        chars.div_ceil(4)
    }

    pub fn user_text(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn check(&self) -> Result<(), BackendError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(BackendError::InvalidRequest("no user message".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest(format!("temperature {}", self.temperature)));
        }
        let estimated = self.estimated_prompt_tokens();
        if estimated > self.max_context_tokens {
            return Err(BackendError::ContextOverflow {
                estimated,
                limit: self.max_context_tokens,
            });
        }
        Ok(())
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Everything a pipeline stage needs to talk to the model.
#[derive(Clone, Copy)]
pub struct Llm<'a> {
    pub backend: &'a dyn Backend,
    pub prompts: &'a PromptSet,
    pub params: GenerationParams,
}

impl<'a> Llm<'a> {
    pub fn new(backend: &'a dyn Backend, prompts: &'a PromptSet, params: GenerationParams) -> Self {
        Self {
            backend,
            prompts,
            params,
        }
    }

    /// Render `template` and send it as a fresh single-turn conversation.
    pub fn ask(&self, template: &str, bindings: &BTreeMap<&str, String>) -> Result<String, BackendError> {
        let prompt = self.prompts.render(template, bindings)?;
        log::debug!("prompt {template}: {} chars", prompt.len());
        self.backend.complete(&GenerationRequest::user(prompt, &self.params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let p = GenerationParams::default();
        assert!(GenerationRequest::user("hi", &p).check().is_ok());
        let mut r = GenerationRequest::user("hi", &p);
        r.messages[0].role = Role::System;
        assert!(matches!(r.check(), Err(BackendError::InvalidRequest(_))));
        let mut r = GenerationRequest::user("hi", &p);
        r.temperature = -1.0;
        assert!(r.check().is_err());
    }

    #[test]
    fn token_estimate_is_chars_over_four() {
        let r = GenerationRequest::user("abcdefghi", &GenerationParams::default());
        assert_eq!(r.estimated_prompt_tokens(), 3);
        let r = GenerationRequest::user("x".repeat(4 * 4097), &GenerationParams::default());
        assert_eq!(
            r.check(),
            Err(BackendError::ContextOverflow {
                estimated: 4097,
                limit: 4096
            })
        );
    }
}
