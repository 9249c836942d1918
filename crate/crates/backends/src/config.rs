use serde::{Deserialize, Serialize};

use crate::client::BackendError;

/// Where and how to reach one remote model.
///
/// Credentials never live here: `credential_env_var_name` names the
/// environment variable holding the bearer token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceEndpointConfig {
    pub base_url: String,
    pub model_id: String,
    #[serde(default)]
    pub credential_env_var_name: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallel")]
    pub max_parallel_requests: usize,
    /// Base delay between attempts; doubled after every failure.
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

fn default_parallel() -> usize {
    4
}

fn default_backoff() -> u64 {
    200
}

impl InferenceEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_id: model_id.into(),
            credential_env_var_name: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_parallel_requests: default_parallel(),
            retry_backoff_ms: default_backoff(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |msg: String| Err(BackendError::Config(msg));
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return bad(format!("timeout must be positive, got {}", self.timeout_secs));
        }
        if self.max_parallel_requests == 0 {
            return bad("max_parallel_requests must be at least 1".into());
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad(format!("base_url `{}` is not an http(s) URL", self.base_url));
        }
        if self.model_id.trim().is_empty() {
            return bad("model_id is empty".into());
        }
        Ok(())
    }

    /// The bearer token, if a credential variable is configured.
    pub fn credential(&self) -> Result<Option<String>, BackendError> {
        match &self.credential_env_var_name {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| BackendError::MissingCredential(var.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants() {
        let ok = InferenceEndpointConfig::new("http://localhost:1", "m");
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.timeout_secs = 0.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.max_parallel_requests = 0;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.base_url = "localhost".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn credential_comes_from_environment() {
        let mut c = InferenceEndpointConfig::new("http://localhost:1", "m");
        assert_eq!(c.credential().unwrap(), None);
        c.credential_env_var_name = Some("EDUTREE_TEST_UNSET_VARIABLE".into());
        assert!(matches!(c.credential(), Err(BackendError::MissingCredential(_))));
    }

    #[test]
    fn deserializes_with_defaults() {
        let c: InferenceEndpointConfig =
            serde_json::from_str(r#"{"base_url": "http://x", "model_id": "m"}"#).unwrap();
        assert_eq!(c.max_retries, 2);
        assert_eq!(c.max_parallel_requests, 4);
    }
}
