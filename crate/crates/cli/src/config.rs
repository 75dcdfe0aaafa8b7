use std::fs;
use std::path::Path;
use std::time::Duration;

use rxndp_core::backend::{DecodeParams, HttpConfig, NoiseConfig, API_URL_VAR};
use rxndp_core::detector::BlobParams;
use rxndp_core::render::VisualPromptStyle;
use rxndp_core::synthgen::SynthParams;
use serde::Deserialize;

use crate::CliError;

/// Optional `--config` TOML file. Credentials are never read from it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub style: VisualPromptStyle,
    pub blob: BlobParams,
    pub noise: NoiseConfig,
    pub synth: SynthParams,
    pub decode: DecodeParams,
    pub http: HttpSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSection {
    /// Used when `RXNDP_API_URL` is unset.
    pub url: Option<String>,
    pub model: String,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub requests_per_second: f64,
    pub timeout_s: u64,
}

impl Default for HttpSection {
    fn default() -> Self {
        Self { url: None, model: "gpt-4o".into(), max_retries: 3, backoff_ms: 500, requests_per_second: 2.0, timeout_s: 120 }
    }
}

impl HttpSection {
    pub fn to_http_config(&self, max_in_flight: usize) -> Result<HttpConfig, CliError> {
        let url = std::env::var(API_URL_VAR)
            .ok()
            .filter(|u| !u.is_empty())
            .or_else(|| self.url.clone())
            .ok_or_else(|| CliError::Config(format!("http backend needs {API_URL_VAR} or [http] url in the config file")))?;
        let mut c = HttpConfig::new(url, self.model.clone()).with_env_key();
        c.max_retries = self.max_retries;
        c.backoff = Duration::from_millis(self.backoff_ms);
        c.requests_per_second = self.requests_per_second;
        c.timeout = Duration::from_secs(self.timeout_s);
        c.max_in_flight = max_in_flight.max(1);
        Ok(c)
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let c: Config = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            CliError::Config(format!("{}:{}: {}", path.display(), line.unwrap_or(0), e.message()))
        })?;
        c.style.validate().map_err(|e| CliError::Config(e.to_string()))?;
        c.noise.validate().map_err(CliError::Config)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn api_keys_are_rejected_in_files() {
        assert!(toml::from_str::<Config>("[http]\napi_key = \"x\"\n").is_err());
        let c: Config = toml::from_str("[http]\nmodel = \"m\"\n[noise]\ndrop_reaction_rate = 0.1\n[style]\nstroke_width_px = 2\n").unwrap();
        assert_eq!(c.http.model, "m");
        assert_eq!(c.noise.drop_reaction_rate, 0.1);
        assert_eq!(c.style.stroke_width_px, 2);
    }
}
