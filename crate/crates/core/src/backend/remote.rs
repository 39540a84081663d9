// SPDX-License-Identifier: Apache-2.0

//! Client for chat-completions compatible HTTP endpoints.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, GenerationRequest, Message};

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    /// Extra attempts after the first one for transient failures.
    pub retries: u32,
    pub backoff_base: Duration,
    pub rate_limit_per_minute: Option<u32>,
    pub request_timeout: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key: None,
            retries: 3,
            backoff_base: Duration::from_secs(1),
            rate_limit_per_minute: None,
            request_timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: usize,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn new(per_minute: Option<u32>) -> Option<Self> {
        per_minute.filter(|&n| n > 0).map(|n| Self {
            interval: Duration::from_secs(60) / n,
            next: Mutex::new(None),
        })
    }

    fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

enum Attempt {
    Done(String),
    Transient(String),
    Fatal(String),
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    limiter: Option<RateLimiter>,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model)
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = RateLimiter::new(config.rate_limit_per_minute);
        Self { config, agent, limiter }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Attempt {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let mut req = self.agent.post(self.endpoint()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        if status == 429 || status >= 500 {
            return Attempt::Transient(format!("HTTP {status}: {text}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(format!("HTTP {status}: {text}"));
        }
        match serde_json::from_str::<ChatResponse>(&text) {
            Ok(parsed) => match parsed.choices.into_iter().next().and_then(|c| c.message.content) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fatal("response has no message content".into()),
            },
            Err(e) => Attempt::Fatal(format!("malformed response: {e}")),
        }
    }
}

impl Backend for RemoteBackend {
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.check()?;
        let max_tokens = request
            .max_context_tokens
            .saturating_sub(request.estimated_prompt_tokens())
            .max(1);
        let body = ChatRequest {
            model: &self.config.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens,
        };
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let delay = self.config.backoff_base.saturating_mul(1u32 << (attempt - 1).min(16));
                log::warn!("remote backend retry {attempt} in {delay:?}: {last}");
                thread::sleep(delay);
            }
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(message) => {
                    return Err(BackendError::Remote {
                        attempts: attempt + 1,
                        message,
                    })
                }
                Attempt::Transient(message) => last = message,
            }
        }
        Err(BackendError::Remote {
            attempts: self.config.retries + 1,
            message: last,
        })
    }
}
