//! Remote completion backend speaking a small JSON protocol.
//!
//! Request body: `{"prompt", "n", "greedy", "temperature", "seed", "max_tokens"}`.
//! Reply body: `{"completions": [..]}`.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use super::{CompletionRequest, CompletionResponse, GeneratorBackend};
use crate::error::BackendError;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            max_retries: 4,
            initial_backoff: Duration::from_millis(200),
            max_backoff: Duration::from_secs(5),
            max_in_flight: 8,
            timeout: Duration::from_secs(120),
        }
    }
}

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpBackend {
    url: String,
    client: reqwest::blocking::Client,
    config: HttpConfig,
    gate: Semaphore,
}

enum Attempt {
    Done(Vec<String>),
    Retry(BackendError),
    Fail(BackendError),
}

impl HttpBackend {
    pub fn new(url: &str, config: HttpConfig) -> Result<Self, BackendError> {
        let parsed = reqwest::Url::parse(url)
            .map_err(|e| BackendError::Unavailable(format!("bad endpoint URL {url:?}: {e}")))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(BackendError::Unavailable(format!("unsupported URL scheme in {url:?}")));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(HttpBackend {
            url: url.to_string(),
            client,
            gate: Semaphore::new(config.max_in_flight),
            config,
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.config
            .initial_backoff
            .saturating_mul(factor)
            .min(self.config.max_backoff)
    }

    fn attempt(&self, body: &str, n: usize, retries: u32) -> Attempt {
        let sent = self
            .client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send();
        let response = match sent {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    retries,
                    message: e.to_string(),
                })
            }
        };
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Attempt::Retry(BackendError::Http {
                status: status.as_u16(),
                retries,
            });
        }
        if !status.is_success() {
            return Attempt::Fail(BackendError::Http {
                status: status.as_u16(),
                retries,
            });
        }
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    retries,
                    message: e.to_string(),
                })
            }
        };
        match serde_json::from_str::<CompletionResponse>(&text) {
            Ok(reply) if reply.completions.len() == n => Attempt::Done(reply.completions),
            Ok(reply) => Attempt::Fail(BackendError::Schema(format!(
                "expected {n} completions, got {}",
                reply.completions.len()
            ))),
            Err(e) => Attempt::Fail(BackendError::Schema(e.to_string())),
        }
    }
}

impl GeneratorBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let body = serde_json::to_string(request).map_err(|e| BackendError::Schema(e.to_string()))?;
        let _permit = self.gate.acquire();
        let mut retries = 0;
        loop {
            match self.attempt(&body, request.n, retries) {
                Attempt::Done(out) => return Ok(out),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if retries >= self.config.max_retries => return Err(e),
                Attempt::Retry(_) => {
                    thread::sleep(self.backoff(retries));
                    retries += 1;
                }
            }
        }
    }
}
