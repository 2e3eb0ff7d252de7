//! Experiment configuration: a TOML document in lab units.
//!
//! Frequencies are in kHz (the 2π is applied on load), times in ms and
//! adiabatic rates in rad/ms, so values can be copied from a figure caption.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dressed_core::noise::{self, NoisePreset, PRESET_MARKERS};
use dressed_core::units::{hz, ms};
use serde::{Deserialize, Serialize};

use crate::presets::{self, PresetKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in preset name; see `xsim list`.
    pub preset: String,
    pub sweep: Sweep,
    /// Noise table markers or inline noise rows. Ignored by presets without classical noise.
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    pub trajectories: usize,
    pub base_seed: u64,
    pub out: PathBuf,
    /// Preset-specific scalars; the key suffix names the unit.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    /// Fill the wall_time_s column; off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub log_axis: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Marker(String),
    Custom(CustomNoise),
}

/// An inline noise row in lab units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomNoise {
    pub marker: String,
    pub sd_mu_hz: f64,
    pub tau_mu_ms: f64,
    pub f: f64,
    pub tau_f_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    /// Fixed RK4 step; absent resolves the fastest frequency at 0.1 rad/step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_us: Option<f64>,
    /// Interval over which sampled noise is held.
    #[serde(default = "default_noise_step")]
    pub noise_step_us: f64,
}

fn default_noise_step() -> f64 {
    1.0
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { dt_us: None, noise_step_us: default_noise_step() }
    }
}

impl NoiseSpec {
    pub fn marker(&self) -> &str {
        match self {
            NoiseSpec::Marker(m) => m,
            NoiseSpec::Custom(c) => &c.marker,
        }
    }

    /// Noise row in rad/s and seconds.
    pub fn resolve(&self) -> Result<NoisePreset> {
        match self {
            NoiseSpec::Marker(m) => noise::preset(m).map_err(|e| anyhow!("noise marker {m:?}: {e}")),
            NoiseSpec::Custom(c) => {
                if c.marker.is_empty() || c.marker.contains(',') {
                    bail!("inline noise marker must be non-empty and comma-free");
                }
                for (name, v) in [("sd_mu_hz", c.sd_mu_hz), ("f", c.f)] {
                    if !(v >= 0.0) || !v.is_finite() {
                        bail!("noise {}: {name} must be finite and non-negative, got {v}", c.marker);
                    }
                }
                for (name, v) in [("tau_mu_ms", c.tau_mu_ms), ("tau_f_ms", c.tau_f_ms)] {
                    if !(v > 0.0) || !v.is_finite() {
                        bail!("noise {}: {name} must be positive, got {v}", c.marker);
                    }
                }
                Ok(NoisePreset {
                    marker: c.marker.clone(),
                    sd_mu: hz(c.sd_mu_hz),
                    tau_mu: ms(c.tau_mu_ms),
                    f: c.f,
                    tau_f: ms(c.tau_f_ms),
                    runs: 0,
                })
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing experiment config")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serialising experiment config")
    }

    /// Loads a TOML config, or the config embedded in a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::runner::Manifest =
                serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
            return Ok(manifest.config);
        }
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn kind(&self) -> Result<PresetKind> {
        PresetKind::from_name(&self.preset)
    }

    /// Parameter value, falling back to the preset default.
    pub fn param(&self, key: &str) -> f64 {
        match self.params.get(key) {
            Some(v) => *v,
            None => self
                .kind()
                .ok()
                .and_then(|k| presets::default_params(k).into_iter().find(|(k, _)| *k == key).map(|(_, v)| v))
                .unwrap_or_else(|| panic!("no parameter {key}")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        if self.sweep.parameter != presets::sweep_parameter(kind) {
            bail!(
                "preset {} sweeps {:?}, not {:?}",
                self.preset,
                presets::sweep_parameter(kind),
                self.sweep.parameter
            );
        }
        if self.sweep.values.is_empty() {
            bail!("sweep.values is empty");
        }
        let zero_ok = kind == PresetKind::MsGate;
        for &v in &self.sweep.values {
            if !v.is_finite() || v < 0.0 || (v == 0.0 && !zero_ok) {
                bail!("sweep value {v} must be {}", if zero_ok { "non-negative" } else { "positive" });
            }
        }
        if self.trajectories == 0 {
            bail!("trajectories must be at least 1");
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        let known: Vec<&str> = presets::default_params(kind).iter().map(|(k, _)| *k).collect();
        for (k, v) in &self.params {
            if !known.contains(&k.as_str()) {
                bail!("preset {} has no parameter {k:?}; known: {}", self.preset, known.join(", "));
            }
            if !v.is_finite() {
                bail!("parameter {k} is not finite");
            }
        }
        if presets::uses_noise(kind) {
            if self.noise.is_empty() {
                bail!("preset {} needs at least one noise entry ({})", self.preset, PRESET_MARKERS.join(", "));
            }
            let mut seen = Vec::new();
            for n in &self.noise {
                n.resolve()?;
                if seen.contains(&n.marker()) {
                    bail!("noise marker {} listed twice", n.marker());
                }
                seen.push(n.marker());
            }
        }
        if let Some(dt) = self.integrator.dt_us {
            if !(dt > 0.0) || !dt.is_finite() {
                bail!("integrator.dt_us must be positive");
            }
        }
        if !(self.integrator.noise_step_us > 0.0) || !self.integrator.noise_step_us.is_finite() {
            bail!("integrator.noise_step_us must be positive");
        }
        Ok(())
    }

    /// Applies `key=value`, where `key` is a dotted path and `value` a TOML
    /// literal (bare words are taken as strings).
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| anyhow!("override {assignment:?} is not key=value"))?;
        let key = key.trim();
        if key.is_empty() {
            bail!("override {assignment:?} has an empty key");
        }
        let value = parse_literal(raw.trim());
        let mut doc = toml::Value::try_from(&*self).context("encoding config")?;
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().expect("non-empty");
        let mut node = &mut doc;
        for p in parts {
            let table = node.as_table_mut().ok_or_else(|| anyhow!("{key}: {p} is not a table"))?;
            node = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        node.as_table_mut().ok_or_else(|| anyhow!("{key} does not name a table entry"))?.insert(last.to_string(), value);
        *self = doc.try_into().with_context(|| format!("applying override {assignment:?}"))?;
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
