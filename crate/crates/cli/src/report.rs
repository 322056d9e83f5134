//! Run reports: a JSON document plus a CSV dump of the lattice fields.

use potmeter::gauge::FluxReport;
use potmeter::meter::{SeedPath, WeakValueEstimate};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::config::ScenarioConfig;

/// One tolerance comparison. `passed` is `value <= tolerance`; NaN fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub pipeline: String,
    pub invariant: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(pipeline: &str, invariant: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            pipeline: pipeline.to_string(),
            invariant: invariant.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl From<num_complex::Complex64> for Complex {
    fn from(z: num_complex::Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HallReport {
    /// `p_c` coincides bit for bit with `Re <p>_w` at every unmasked site.
    pub p_c_is_real_weak_value: bool,
    pub first_moment: f64,
    pub mean_momentum: f64,
    pub moment_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructResult {
    pub residual_linf: f64,
    pub residual_l2: f64,
    pub imag_leak_linf: f64,
    pub masked_fraction: f64,
    pub valid_sites: usize,
    pub state_twist: f64,
    pub hall: HallReport,
    pub flux: Option<FluxReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeterSiteResult {
    pub x_requested: f64,
    pub site: usize,
    pub x_site: f64,
    pub snap_distance: f64,
    pub skipped: Option<String>,
    pub weak_value: Option<Complex>,
    pub weak_value_reference: Option<Complex>,
    pub estimate: Option<WeakValueEstimate>,
    pub estimate_reference: Option<WeakValueEstimate>,
    /// `Re` of the estimate difference, an estimate of `q A(x)`.
    pub qa_estimate: Option<f64>,
    pub qa_stderr: Option<f64>,
    pub qa_true: f64,
    /// Estimator evaluated on exact pointer moments at `g`.
    pub qa_exact_meter: Option<f64>,
    /// `2 |E(g) - E(g/2)|` of the exact-moment estimator.
    pub bias_bound: Option<f64>,
    pub prob_exact: Option<f64>,
    pub prob_first_order: Option<f64>,
    pub seeds: Vec<SeedPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeterResult {
    pub n_samples: usize,
    pub master_seed: u64,
    pub expected_stderr: f64,
    pub sites: Vec<MeterSiteResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeWidth {
    pub observed: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsResult {
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub check_residual: f64,
    pub norm_drift: f64,
    /// `max |a_recon(t) - a_true|` over valid sites.
    pub reconstruct_linf: f64,
    /// `max |a_recon(t) - a_static(t)|`, where `a_static(t)` is reconstructed
    /// from `Peierls(Psi0(t), A)` and `Psi0(t)`.
    pub static_consistency: f64,
    pub masked_fraction: f64,
    pub free_width_sq: Option<FreeWidth>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeEntryResult {
    pub index: usize,
    pub winding_slope: f64,
    pub shift_error: f64,
    pub covariance_linf: f64,
    pub flux_change: Option<f64>,
    pub ab_phase_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwistPeriod {
    pub ground_energy_0: f64,
    pub ground_energy_2pi: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeCheckResult {
    pub entries: Vec<GaugeEntryResult>,
    pub twist_period: Option<TwistPeriod>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineResults {
    pub reconstruct: Option<ReconstructResult>,
    pub meter: Option<MeterResult>,
    pub dynamics: Option<DynamicsResult>,
    pub gauge_check: Option<GaugeCheckResult>,
}

/// Lattice fields for the static pair `Psi = Peierls(Psi0, A)`, `Psi0`.
/// Masked entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDump {
    pub x: Vec<f64>,
    pub a_true: Vec<f64>,
    pub a_recon: Vec<Option<f64>>,
    pub re_wv: Vec<Option<f64>>,
    pub im_wv: Vec<Option<f64>>,
    pub re_wv0: Vec<Option<f64>>,
    pub im_wv0: Vec<Option<f64>>,
    pub mask: Vec<u8>,
    pub p_c: Vec<Option<f64>>,
}

pub const CSV_COLUMNS: [&str; 9] = ["x", "a_true", "a_recon", "re_wv", "im_wv", "re_wv0", "im_wv0", "mask", "p_c"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub x: f64,
    pub a_true: f64,
    pub a_recon: f64,
    pub re_wv: f64,
    pub im_wv: f64,
    pub re_wv0: f64,
    pub im_wv0: f64,
    pub mask: u8,
    pub p_c: f64,
}

impl FieldDump {
    pub fn rows(&self) -> Vec<CsvRow> {
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        (0..self.x.len())
            .map(|j| CsvRow {
                x: self.x[j],
                a_true: self.a_true[j],
                a_recon: nan(self.a_recon[j]),
                re_wv: nan(self.re_wv[j]),
                im_wv: nan(self.im_wv[j]),
                re_wv0: nan(self.re_wv0[j]),
                im_wv0: nan(self.im_wv0[j]),
                mask: self.mask[j],
                p_c: nan(self.p_c[j]),
            })
            .collect()
    }

    /// CSV with a header row; masked values are written as `NaN`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

pub fn read_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<CsvRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub potmeter: &'static str,
    pub cli: &'static str,
    pub schema_version: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            potmeter: potmeter::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
            schema_version: crate::config::SCHEMA_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_ms: f64,
    pub pipelines_ms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub versions: Versions,
    pub pipeline: String,
    pub executed: Vec<String>,
    pub scenario: ScenarioConfig,
    pub results: PipelineResults,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub warnings: Vec<String>,
    pub fields: FieldDump,
    /// Wall-clock timing; `None` unless requested, so reports stay byte-stable.
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
