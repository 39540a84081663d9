// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration. Relative paths resolve against the config file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use num_rational::BigRational;
use serde::Deserialize;

use crate::backend::{GenerationParams, RemoteConfig};
use crate::domain::{decimal_to_rational, f64_to_rational, BudgetConfig};
use crate::sim::mock::MockRule;
use crate::sim::{IcarusConfig, PassCountProtocol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Remote,
    Scripted,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default)]
    pub kind: BackendKind,
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    /// Environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_context", alias = "max_context_tokens")]
    pub max_context: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Requests per minute; unset means unlimited.
    #[serde(default)]
    pub rate_limit: Option<u32>,
    #[serde(default = "default_request_timeout")]
    pub timeout_s: u64,
    /// Reply script for the scripted backend.
    #[serde(default)]
    pub script: Option<PathBuf>,
}

fn default_base_url() -> String {
    RemoteConfig::default().base_url
}
fn default_model() -> String {
    RemoteConfig::default().model
}
fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_temperature() -> f64 {
    GenerationParams::default().temperature
}
fn default_context() -> usize {
    GenerationParams::default().max_context_tokens
}
fn default_retries() -> u32 {
    RemoteConfig::default().retries
}
fn default_request_timeout() -> u64 {
    120
}

impl Default for BackendSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// A threshold written either as a number or as a decimal string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Decimal {
    Number(f64),
    Text(String),
}

impl Decimal {
    pub fn to_rational(&self) -> anyhow::Result<BigRational> {
        Ok(match self {
            Decimal::Number(x) => f64_to_rational(*x)?,
            Decimal::Text(s) => decimal_to_rational(s)?,
        })
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default, alias = "N_s")]
    pub samples_per_iteration: Option<Vec<u32>>,
    /// The first entry is ignored; lists in iteration 1 are always fresh.
    #[serde(default, alias = "C_s")]
    pub top_candidates: Option<Vec<u32>>,
    #[serde(default, alias = "W")]
    pub shortcut_threshold: Option<Decimal>,
    #[serde(default, alias = "E_f")]
    pub max_format_errors: Option<u32>,
    #[serde(default)]
    pub stop_on_pass: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    #[default]
    Icarus,
    Mock,
    Oracle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub kind: SimKind,
    /// `iverilog` executable.
    #[serde(default = "default_iverilog")]
    pub path: PathBuf,
    #[serde(default = "default_flags")]
    pub flags: Vec<String>,
    #[serde(default = "default_sim_timeout")]
    pub timeout_s: u64,
    /// Scratch directory for simulator runs; defaults to `<out>/scratch`.
    #[serde(default)]
    pub scratch: Option<PathBuf>,
    #[serde(default)]
    pub protocol_patterns: Option<Vec<String>>,
    /// Scoring rules for the mock simulator.
    #[serde(default)]
    pub rules: Vec<MockRule>,
}

fn default_iverilog() -> PathBuf {
    PathBuf::from("iverilog")
}
fn default_flags() -> Vec<String> {
    vec!["-g2012".into()]
}
fn default_sim_timeout() -> u64 {
    60
}

impl Default for SimSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Pipeline,
    Baseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pipeline => "pipeline",
            Method::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Reserved for local sampling; the pipeline itself draws no random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_baseline_runs")]
    pub baseline_runs: u32,
    #[serde(default = "default_ks")]
    pub ks: Vec<u64>,
}

fn default_workers() -> usize {
    1
}
fn default_baseline_runs() -> u32 {
    10
}
fn default_ks() -> Vec<u64> {
    crate::eval::report::DEFAULT_KS.to_vec()
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub run: RunSection,
    /// Directory of `<template>.txt` files overriding the built-in prompts.
    #[serde(default)]
    pub prompts_dir: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.budget()?;
        if config.run.workers == 0 {
            bail!("run.workers must be at least 1");
        }
        if config.run.ks.iter().any(|&k| k == 0) {
            bail!("run.ks entries must be positive");
        }
        Ok(config)
    }

    /// Load and resolve relative paths against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.backend.script, &mut config.prompts_dir, &mut config.sim.scratch]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
        }
        // a bare command name stays a PATH lookup
        if config.sim.path.components().count() > 1 {
            config.sim.path = base.join(&config.sim.path);
        }
        Ok(config)
    }

    pub fn budget(&self) -> anyhow::Result<BudgetConfig> {
        let mut b = BudgetConfig::default();
        let s = &self.search;
        if let Some(n) = &s.samples_per_iteration {
            b.samples_per_iteration = n.clone();
            if s.top_candidates.is_none() {
                b.top_candidates = std::iter::once(1).chain(n.iter().skip(1).map(|&x| x.max(1))).collect();
                if let Some(last) = b.top_candidates.last_mut().filter(|_| n.len() > 1) {
                    *last = 1;
                }
            }
        }
        if let Some(c) = &s.top_candidates {
            b.top_candidates = c.clone();
        }
        if let Some(w) = &s.shortcut_threshold {
            b.shortcut_threshold = w.to_rational().context("search.shortcut_threshold")?;
        }
        if let Some(e) = s.max_format_errors {
            b.max_format_errors = e;
        }
        if let Some(stop) = s.stop_on_pass {
            b.stop_on_pass = stop;
        }
        b.validate()?;
        Ok(b)
    }

    pub fn generation_params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.backend.temperature,
            max_context_tokens: self.backend.max_context,
        }
    }

    pub fn remote(&self) -> RemoteConfig {
        let b = &self.backend;
        RemoteConfig {
            base_url: b.base_url.clone(),
            model: b.model.clone(),
            api_key: std::env::var(&b.api_key_env).ok().filter(|k| !k.is_empty()),
            retries: b.retries,
            rate_limit_per_minute: b.rate_limit,
            request_timeout: Duration::from_secs(b.timeout_s),
            ..RemoteConfig::default()
        }
    }

    pub fn icarus(&self, default_scratch: &Path) -> anyhow::Result<IcarusConfig> {
        let mut c = IcarusConfig::new(self.sim.scratch.clone().unwrap_or_else(|| default_scratch.to_path_buf()));
        c.iverilog = self.sim.path.clone();
        c.extra_flags = self.sim.flags.clone();
        c.timeout = Duration::from_secs(self.sim.timeout_s);
        c.protocol = self.protocol()?;
        Ok(c)
    }

    pub fn protocol(&self) -> anyhow::Result<PassCountProtocol> {
        Ok(match &self.sim.protocol_patterns {
            Some(p) => PassCountProtocol::new(p.iter().map(String::as_str))?,
            None => PassCountProtocol::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_pipeline() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.budget().unwrap(), BudgetConfig::default());
        assert_eq!(c.backend.kind, BackendKind::Remote);
        assert_eq!(c.generation_params(), GenerationParams::default());
        assert_eq!(c.run.ks, [1, 5, 10]);
        assert_eq!(c.sim.timeout_s, 60);
    }

    #[test]
    fn second_configuration_is_accepted() {
        let c = Config::parse("[search]\nN_s = [5, 3, 2]\nW = 0.95\nE_f = 10\n").unwrap();
        let b = c.budget().unwrap();
        assert_eq!(b.samples_per_iteration, [5, 3, 2]);
        assert_eq!(b.top_candidates, [1, 3, 1]);
        assert_eq!(b.shortcut_threshold, BigRational::new(19.into(), 20.into()));
        assert_eq!(b, BudgetConfig::three_iterations(5, 3, 2));
    }

    #[test]
    fn threshold_as_text_is_exact() {
        let c = Config::parse("[search]\nshortcut_threshold = \"0.9\"").unwrap();
        assert_eq!(c.budget().unwrap().shortcut_threshold, BigRational::new(9.into(), 10.into()));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(Config::parse("[search]\nsamples_per_iteration = [7, 0, 1]").is_err());
        assert!(Config::parse("[search]\nW = 1.5").is_err());
        assert!(Config::parse("[run]\nworkers = 0").is_err());
        assert!(Config::parse("[run]\nbogus = 1").is_err());
        assert!(Config::parse("[sim]\nkind = \"verilator\"").is_err());
    }

    #[test]
    fn mock_rules_and_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "[backend]\nkind = \"scripted\"\nscript = \"script.json\"\n[sim]\nkind = \"mock\"\nrules = [{ key = \"a ^ b\", passed = 4, total = 4 }]\n",
        )
        .unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.backend.script.unwrap(), dir.path().join("script.json"));
        assert_eq!(c.sim.rules[0].passed, 4);
        assert_eq!(c.sim.path, PathBuf::from("iverilog"));
    }
}
