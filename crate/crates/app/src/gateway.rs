//! Predictor backed by a remote completion endpoint.
//!
//! The request is `POST $MODEL_API_URL` with JSON `{"prompt", "sample"}` and,
//! when MODEL_API_KEY is set, a bearer token. The response may carry the text
//! as `completion`, `text`, `choices[0].text` or `choices[0].message.content`.

use std::time::Duration;

use anyhow::Context;
use fireball_core::evalkit::{Predictor, PredictorError};
use serde_json::{json, Value};

pub const URL_ENV: &str = "MODEL_API_URL";
pub const KEY_ENV: &str = "MODEL_API_KEY";

/// The blocking client owns a runtime of its own, so one is built per call
/// rather than stored: dropping it inside an async context would panic.
#[derive(Debug, Clone)]
pub struct GatewayPredictor {
    url: String,
    key: Option<String>,
    timeout: Duration,
}

impl GatewayPredictor {
    pub fn new(url: impl Into<String>, key: Option<String>, timeout: Duration) -> anyhow::Result<Self> {
        let url = url.into();
        reqwest::Url::parse(&url).with_context(|| format!("bad gateway URL '{url}'"))?;
        Ok(GatewayPredictor { url, key, timeout })
    }

    pub fn from_env(timeout: Duration) -> anyhow::Result<Self> {
        let url = std::env::var(URL_ENV).with_context(|| format!("{URL_ENV} is not set"))?;
        GatewayPredictor::new(url, std::env::var(KEY_ENV).ok(), timeout)
    }
}

fn extract(v: &Value) -> Option<&str> {
    v.get("completion")
        .or_else(|| v.get("text"))
        .or_else(|| v.pointer("/choices/0/text"))
        .or_else(|| v.pointer("/choices/0/message/content"))
        .and_then(Value::as_str)
}

impl Predictor for GatewayPredictor {
    fn predict(&self, prompt: &str, sample: u64) -> Result<String, PredictorError> {
        let unavailable = |e: String| PredictorError::Unavailable(e);
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| unavailable(e.to_string()))?;
        let mut req = client.post(&self.url).json(&json!({ "prompt": prompt, "sample": sample }));
        if let Some(k) = &self.key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(unavailable(format!("gateway answered {status}")));
        }
        let body: Value = resp.json().map_err(|e| unavailable(format!("bad gateway response: {e}")))?;
        extract(&body)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| unavailable("gateway response has no completion".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_shapes() {
        assert_eq!(extract(&json!({"completion": "!a"})), Some("!a"));
        assert_eq!(extract(&json!({"choices": [{"text": "!b"}]})), Some("!b"));
        assert_eq!(extract(&json!({"choices": [{"message": {"content": "!c"}}]})), Some("!c"));
        assert_eq!(extract(&json!({"foo": 1})), None);
    }
}
