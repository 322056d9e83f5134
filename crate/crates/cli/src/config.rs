//! Scenario files: TOML with a `schema_version` key.

use potmeter::dynamics::EvolutionParams;
use potmeter::gauge::{GaugePreset, PotentialPreset};
use potmeter::lattice::{Grid1D, PhysicalConstants, StateSpec, Topology};
use potmeter::meter::{MeterConfig, WEAK_REGIME_FACTOR};
use potmeter::weak_value::DEFAULT_THRESHOLD;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Invalid scenario, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub topology: Topology,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid1D, ConfigError> {
        Grid1D::new(self.n, self.x_min, self.x_max, self.topology)
            .map_err(|e| ConfigError::new("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub n_samples: usize,
    pub master_seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Relative density below which a site is masked.
    pub mask: f64,
    /// Weak-regime guard factor against `sigma_q`.
    pub weak_regime: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            mask: DEFAULT_THRESHOLD,
            weak_regime: WEAK_REGIME_FACTOR,
        }
    }
}

/// Declared tolerances; every check in a report names one of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub reconstruct_linf: f64,
    pub imag_leak: f64,
    pub masked_fraction: f64,
    pub hall_moment: f64,
    /// Allowed meter deviation in units of the combined standard error.
    pub meter_sigmas: f64,
    /// Relative deviation of the readout standard error from `sigma_q / (g sqrt(n))`.
    pub meter_stderr_rel: f64,
    pub dynamics_check: f64,
    pub norm_drift: f64,
    pub dynamics_reconstruct: f64,
    pub free_width_rel: f64,
    pub gauge_shift: f64,
    pub flux_invariance: f64,
    pub twist_period: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            reconstruct_linf: 1e-7,
            imag_leak: 1e-8,
            masked_fraction: 0.05,
            hall_moment: 1e-8,
            meter_sigmas: 3.0,
            meter_stderr_rel: 0.25,
            dynamics_check: 1e-10,
            norm_drift: 1e-12,
            dynamics_reconstruct: 1e-6,
            free_width_rel: 5e-4,
            gauge_shift: 1e-9,
            flux_invariance: 1e-9,
            twist_period: 1e-9,
        }
    }
}

fn zero_potential() -> PotentialPreset {
    PotentialPreset::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub constants: PhysicalConstants,
    pub state: StateSpec,
    #[serde(default = "zero_potential")]
    pub potential: PotentialPreset,
    #[serde(default)]
    pub gauge: Vec<GaugePreset>,
    #[serde(default)]
    pub meter: Option<MeterConfig>,
    #[serde(default)]
    pub evolution: Option<EvolutionParams>,
    #[serde(default)]
    pub probe_sites: Vec<f64>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Built-in scenarios, identical to the files under `scenarios/`.
pub const PRESETS: &[(&str, &str)] = &[
    ("zero-field", include_str!("../../../scenarios/zero-field.toml")),
    ("bump-reconstruct", include_str!("../../../scenarios/bump-reconstruct.toml")),
    ("meter-endtoend", include_str!("../../../scenarios/meter-endtoend.toml")),
    ("constant-potential", include_str!("../../../scenarios/constant-potential.toml")),
    ("dynamics-bump", include_str!("../../../scenarios/dynamics-bump.toml")),
    ("free-packet", include_str!("../../../scenarios/free-packet.toml")),
    ("gauge-suite", include_str!("../../../scenarios/gauge-suite.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Reconstruct,
    Meter,
    Dynamics,
    GaugeCheck,
    All,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Reconstruct => "reconstruct",
            Pipeline::Meter => "meter",
            Pipeline::Dynamics => "dynamics",
            Pipeline::GaugeCheck => "gauge_check",
            Pipeline::All => "all",
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<document>".to_string() } else { path };
            ConfigError::new(path, e.into_inner().message().trim().to_string())
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Option<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text).expect("built-in preset parses"))
    }

    /// Reads a scenario file; a path that does not exist but names a built-in
    /// preset loads that preset.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_toml(&text),
            Err(err) => {
                let name = path.to_string_lossy();
                Self::preset(&name).ok_or_else(|| ConfigError::new("<file>", format!("{name}: {err}")))
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Whether the scenario carries what `pipeline` needs.
    pub fn supports(&self, pipeline: Pipeline) -> bool {
        match pipeline {
            Pipeline::Reconstruct | Pipeline::All => true,
            Pipeline::Meter => {
                self.meter.is_some() && !self.probe_sites.is_empty() && self.grid.topology == Topology::Ring
            }
            Pipeline::Dynamics => self.evolution.is_some(),
            Pipeline::GaugeCheck => !self.gauge.is_empty(),
        }
    }

    /// Pipelines executed for a request, in report order.
    pub fn expand(&self, pipeline: Pipeline) -> Vec<Pipeline> {
        match pipeline {
            Pipeline::All => [
                Pipeline::Reconstruct,
                Pipeline::Meter,
                Pipeline::Dynamics,
                Pipeline::GaugeCheck,
            ]
            .into_iter()
            .filter(|p| self.supports(*p))
            .collect(),
            p => vec![p],
        }
    }

    pub fn validate(&self, pipeline: Pipeline) -> Result<(), ConfigError> {
        let grid = self.grid.build()?;
        self.constants
            .validate()
            .map_err(|e| ConfigError::new("constants", e.to_string()))?;
        self.potential
            .validate()
            .map_err(|e| ConfigError::new("potential", e.to_string()))?;
        potmeter::lattice::prepare_state(&grid, &self.state).map_err(|e| ConfigError::new("state", e.to_string()))?;
        if !(self.thresholds.mask > 0.0 && self.thresholds.mask < 1.0) {
            return Err(ConfigError::new("thresholds.mask", "must lie in (0, 1)"));
        }
        if !(self.thresholds.weak_regime > 0.0) {
            return Err(ConfigError::new("thresholds.weak_regime", "must be > 0"));
        }
        if let Some(m) = &self.meter {
            m.validate().map_err(|e| ConfigError::new("meter", e.to_string()))?;
        }
        if let Some(ev) = &self.evolution {
            ev.validate().map_err(|e| ConfigError::new("evolution", e.to_string()))?;
        }
        for (i, g) in self.gauge.iter().enumerate() {
            potmeter::gauge::GaugeFunction::from_preset(&grid, g)
                .map_err(|e| ConfigError::new(format!("gauge[{i}]"), e.to_string()))?;
        }
        for (i, &x) in self.probe_sites.iter().enumerate() {
            if !x.is_finite() || x < self.grid.x_min || x > self.grid.x_max {
                return Err(ConfigError::new(
                    format!("probe_sites[{i}]"),
                    format!("{x} lies outside [{}, {}]", self.grid.x_min, self.grid.x_max),
                ));
            }
        }
        if self.sampling.n_samples < 2 {
            return Err(ConfigError::new("sampling.n_samples", "must be >= 2"));
        }
        let tol = serde_json::to_value(self.tolerances).expect("tolerances serialize");
        for (key, v) in tol.as_object().expect("tolerances are a table") {
            if !v.as_f64().is_some_and(|v| v >= 0.0) {
                return Err(ConfigError::new(format!("tolerances.{key}"), "must be a number >= 0"));
            }
        }
        match pipeline {
            Pipeline::Meter => {
                if self.meter.is_none() {
                    return Err(ConfigError::new("meter", "the meter pipeline needs a [meter] table"));
                }
                if self.probe_sites.is_empty() {
                    return Err(ConfigError::new("probe_sites", "the meter pipeline needs probe sites"));
                }
                if self.grid.topology != Topology::Ring {
                    return Err(ConfigError::new("grid.topology", "the meter pipeline needs a ring"));
                }
                if self.meter.is_some_and(|m| m.g == 0.0) {
                    return Err(ConfigError::new("meter.g", "the meter pipeline needs g != 0"));
                }
            }
            Pipeline::Dynamics if self.evolution.is_none() => {
                return Err(ConfigError::new("evolution", "the dynamics pipeline needs an [evolution] table"));
            }
            Pipeline::GaugeCheck if self.gauge.is_empty() => {
                return Err(ConfigError::new("gauge", "the gauge_check pipeline needs at least one [[gauge]] entry"));
            }
            _ => {}
        }
        if pipeline == Pipeline::All && self.meter.is_some_and(|m| m.g == 0.0) && self.supports(Pipeline::Meter) {
            return Err(ConfigError::new("meter.g", "the meter pipeline needs g != 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, _) in PRESETS {
            let cfg = ScenarioConfig::preset(name).unwrap();
            assert_eq!(cfg.name, *name);
            cfg.validate(Pipeline::All).unwrap();
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::preset("meter-endtoend").unwrap();
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn missing_field_reports_path() {
        let text = PRESETS[1].1.replace("n = 1024\n", "");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.path, "grid");
        assert!(err.message.contains("`n`"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = PRESETS[1].1.replace("topology = \"ring\"", "topology = \"ring\"\nspacing = 2");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert!(err.path.starts_with("grid"), "{err}");
    }

    #[test]
    fn wrong_schema_version() {
        let text = PRESETS[1].1.replace("schema_version = 1", "schema_version = 9");
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap_err().path, "schema_version");
    }

    #[test]
    fn probe_outside_domain() {
        let mut cfg = ScenarioConfig::preset("meter-endtoend").unwrap();
        cfg.probe_sites.push(40.0);
        assert_eq!(cfg.validate(Pipeline::Meter).unwrap_err().path, "probe_sites[5]");
    }

    #[test]
    fn meter_requires_ring_and_table() {
        let mut cfg = ScenarioConfig::preset("bump-reconstruct").unwrap();
        assert_eq!(cfg.validate(Pipeline::Meter).unwrap_err().path, "meter");
        assert_eq!(cfg.expand(Pipeline::All), vec![Pipeline::Reconstruct]);
        cfg.grid.topology = Topology::Open;
        cfg.meter = Some(MeterConfig { sigma_q: 1.0, k_m: 0.0, g: 0.1 });
        cfg.probe_sites = vec![0.5];
        assert_eq!(cfg.validate(Pipeline::Meter).unwrap_err().path, "grid.topology");
    }

    #[test]
    fn negative_tolerance_rejected() {
        let mut cfg = ScenarioConfig::preset("zero-field").unwrap();
        cfg.tolerances.norm_drift = -1.0;
        assert_eq!(cfg.validate(Pipeline::All).unwrap_err().path, "tolerances.norm_drift");
    }
}
