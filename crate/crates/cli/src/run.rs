//! Pipeline orchestration.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use potmeter::dynamics::{
    build_hamiltonian, check_minimal_coupling_relation, evolve, lattice_peierls,
};
use potmeter::gauge::{gauge_transform, loop_flux, peierls_phase, GaugeFunction, VectorPotential};
use potmeter::lattice::{prepare_state, state_warnings, Grid1D, StateSpec, WaveFunction};
use potmeter::meter::{
    estimate_from_moments, estimate_weak_value, pointer_moments, post_selected_meter_state,
    postselection_probability, sample_readouts, Channel, MeterConfig, ProbabilityMode, SeedPath,
};
use potmeter::weak_value::{
    hall_commuting_momentum, reconstruct_vector_potential, ReconstructionReport,
};
use rayon::prelude::*;

use crate::config::{ConfigError, Pipeline, ScenarioConfig};
use crate::report::*;

/// A numeric failure inside a named pipeline stage.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: String,
    #[source]
    pub source: potmeter::Error,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error("pipeline error in {0}")]
    Pipeline(#[from] PipelineError),
}

trait Stage<T> {
    fn stage(self, name: &str) -> Result<T, PipelineError>;
}

impl<T> Stage<T> for potmeter::Result<T> {
    fn stage(self, name: &str) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError {
            stage: name.to_string(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_timing: bool,
}

/// Shared inputs built once per run.
struct Setup {
    grid: Grid1D,
    psi0: WaveFunction,
    psi: WaveFunction,
    a: VectorPotential,
    recon: ReconstructionReport,
}

pub fn run_scenario(cfg: &ScenarioConfig, pipeline: Pipeline) -> Result<RunReport, RunError> {
    run_scenario_with(cfg, pipeline, RunOptions::default())
}

pub fn run_scenario_with(cfg: &ScenarioConfig, pipeline: Pipeline, opts: RunOptions) -> Result<RunReport, RunError> {
    cfg.validate(pipeline)?;
    let start = Instant::now();
    let grid = cfg.grid.build()?;
    let consts = cfg.constants;
    let mut warnings = state_warnings(&grid, &cfg.state);
    let psi0 = prepare_state(&grid, &cfg.state).stage("prepare")?;
    let a = VectorPotential::from_preset(&grid, cfg.potential.clone()).stage("potential")?;
    let psi = peierls_phase(&psi0, &a, &consts).stage("peierls")?;
    let recon = reconstruct_vector_potential(&psi, &psi0, &consts, cfg.thresholds.mask)
        .and_then(|r| r.with_truth(&a))
        .stage("reconstruct")?;
    let setup = Setup {
        grid,
        psi0,
        psi,
        a,
        recon,
    };

    let mut results = PipelineResults::default();
    let mut checks = Vec::new();
    let mut timings = Vec::new();
    let executed = cfg.expand(pipeline);
    for p in &executed {
        let t = Instant::now();
        match p {
            Pipeline::Reconstruct => results.reconstruct = Some(reconstruct(cfg, &setup, &mut checks)?),
            Pipeline::Meter => results.meter = Some(meter(cfg, &setup, &mut checks, &mut warnings)?),
            Pipeline::Dynamics => results.dynamics = Some(dynamics(cfg, &setup, &mut checks)?),
            Pipeline::GaugeCheck => results.gauge_check = Some(gauge_check(cfg, &setup, &mut checks)?),
            Pipeline::All => unreachable!("expanded"),
        }
        timings.push((p.name().to_string(), t.elapsed().as_secs_f64() * 1e3));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(RunReport {
        versions: Versions::default(),
        pipeline: pipeline.name().to_string(),
        executed: executed.iter().map(|p| p.name().to_string()).collect(),
        scenario: cfg.clone(),
        results,
        checks,
        passed,
        warnings,
        fields: field_dump(&setup),
        timing: opts.record_timing.then(|| Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
            pipelines_ms: timings,
        }),
    })
}

fn reconstruct(cfg: &ScenarioConfig, s: &Setup, checks: &mut Vec<Check>) -> Result<ReconstructResult, PipelineError> {
    const P: &str = "reconstruct";
    let consts = cfg.constants;
    let tol = &cfg.tolerances;
    let r = &s.recon;
    let hall = hall_commuting_momentum(&s.psi, &consts, cfg.thresholds.mask).stage("hall")?;
    let identical = hall
        .p_c
        .iter()
        .zip(r.weak_value.values())
        .zip(&hall.mask)
        .all(|((p, w), &ok)| !ok || p.to_bits() == w.re.to_bits());
    let first_moment = hall.first_moment(&s.psi);
    let mean_momentum = s.psi.mean_momentum(&consts);
    let moment_error = (first_moment - mean_momentum).abs();
    let flux = if s.grid.is_ring() {
        Some(loop_flux(&s.a, &consts).stage("flux")?)
    } else {
        None
    };
    let residual_linf = r.residual_linf.unwrap_or(f64::NAN);
    checks.push(Check::new(P, "reconstruction max |a_recon - a_true|", residual_linf, tol.reconstruct_linf));
    checks.push(Check::new(P, "imaginary leak max |Im(wv - wv0)|", r.imag_leak_linf, tol.imag_leak));
    checks.push(Check::new(P, "masked fraction", r.masked_fraction, tol.masked_fraction));
    checks.push(Check::new(
        P,
        "p_c equals Re(weak value)",
        if identical { 0.0 } else { 1.0 },
        0.0,
    ));
    checks.push(Check::new(P, "int p_c |psi|^2 dx = <p>", moment_error, tol.hall_moment));
    Ok(ReconstructResult {
        residual_linf,
        residual_l2: r.residual_l2.unwrap_or(f64::NAN),
        imag_leak_linf: r.imag_leak_linf,
        masked_fraction: r.masked_fraction,
        valid_sites: r.valid_count(),
        state_twist: s.psi.twist(),
        hall: HallReport {
            p_c_is_real_weak_value: identical,
            first_moment,
            mean_momentum,
            moment_error,
        },
        flux,
    })
}

/// Exact-moment estimate of `Re(wv - wv0)` at coupling `m.g`.
fn exact_meter_difference(s: &Setup, site: usize, m: &MeterConfig, cfg: &ScenarioConfig) -> potmeter::Result<f64> {
    let consts = cfg.constants;
    let mut re = [0.0; 2];
    for (out, state) in re.iter_mut().zip([&s.psi, &s.psi0]) {
        let qg = m.pointer_grid(state, &consts)?;
        let meter = post_selected_meter_state(state, site, m, &consts, &qg)?;
        *out = estimate_from_moments(&pointer_moments(&meter)?, m, &consts)?.re;
    }
    Ok(re[0] - re[1])
}

fn meter_site(cfg: &ScenarioConfig, s: &Setup, x: f64) -> Result<MeterSiteResult, PipelineError> {
    let consts = cfg.constants;
    let m = cfg.meter.expect("validated");
    let (site, snap) = s.grid.nearest_site(x);
    let mut out = MeterSiteResult {
        x_requested: x,
        site,
        x_site: s.grid.x(site),
        snap_distance: snap,
        skipped: None,
        weak_value: None,
        weak_value_reference: None,
        estimate: None,
        estimate_reference: None,
        qa_estimate: None,
        qa_stderr: None,
        qa_true: consts.q * s.a.values()[site],
        qa_exact_meter: None,
        bias_bound: None,
        prob_exact: None,
        prob_first_order: None,
        seeds: Vec::new(),
    };
    if !s.recon.valid[site] {
        out.skipped = Some("probe site is masked".into());
        return Ok(out);
    }
    out.weak_value = s.recon.weak_value.get(site).map(Complex::from);
    out.weak_value_reference = s.recon.weak_value_reference.get(site).map(Complex::from);

    let mut estimates = Vec::with_capacity(2);
    for (branch, state) in [&s.psi, &s.psi0].into_iter().enumerate() {
        let qg = m.pointer_grid(state, &consts).stage("meter state")?;
        let meter = post_selected_meter_state(state, site, &m, &consts, &qg).stage("meter state")?;
        let path = |channel| SeedPath {
            master_seed: cfg.sampling.master_seed,
            site,
            channel,
            branch: branch as u32,
        };
        let pos = sample_readouts(&meter, cfg.sampling.n_samples, path(Channel::Position)).stage("sampling")?;
        let mom = sample_readouts(&meter, cfg.sampling.n_samples, path(Channel::Momentum)).stage("sampling")?;
        out.seeds.push(pos.seed_path);
        out.seeds.push(mom.seed_path);
        estimates.push(estimate_weak_value(&pos.values, &mom.values, &m, &consts).stage("estimate")?);
        if branch == 0 {
            out.prob_exact = Some(meter.prob);
            out.prob_first_order = Some(
                postselection_probability(state, site, &m, &consts, ProbabilityMode::FirstOrder)
                    .stage("postselection probability")?,
            );
        }
    }
    let (e, e0) = (estimates[0], estimates[1]);
    out.qa_estimate = Some(e.re - e0.re);
    out.qa_stderr = Some(e.stderr_re.hypot(e0.stderr_re));
    let at_g = exact_meter_difference(s, site, &m, cfg).stage("bias bound")?;
    let at_half = exact_meter_difference(s, site, &m.with_coupling(0.5 * m.g), cfg).stage("bias bound")?;
    out.qa_exact_meter = Some(at_g);
    out.bias_bound = Some(2.0 * (at_g - at_half).abs());
    out.estimate = Some(e);
    out.estimate_reference = Some(e0);
    Ok(out)
}

fn meter(
    cfg: &ScenarioConfig,
    s: &Setup,
    checks: &mut Vec<Check>,
    warnings: &mut Vec<String>,
) -> Result<MeterResult, PipelineError> {
    const P: &str = "meter";
    let m = cfg.meter.expect("validated");
    let tol = &cfg.tolerances;
    for state in [&s.psi, &s.psi0] {
        if let Some(w) = m.weak_regime_warning(state, &cfg.constants, cfg.thresholds.weak_regime) {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    let sites = cfg
        .probe_sites
        .par_iter()
        .map(|&x| meter_site(cfg, s, x))
        .collect::<Result<Vec<_>, _>>()?;
    let n = cfg.sampling.n_samples;
    let expected_stderr = m.sigma_q / (m.g.abs() * (n as f64).sqrt());
    for r in &sites {
        let label = format!("site {} (x = {})", r.site, r.x_site);
        if let Some(reason) = &r.skipped {
            warnings.push(format!("meter {label}: {reason}"));
            continue;
        }
        if r.snap_distance > 0.0 {
            warnings.push(format!(
                "meter probe x = {} snapped to {} (distance {:.3e})",
                r.x_requested, r.x_site, r.snap_distance
            ));
        }
        let (est, se, bias) = (
            r.qa_estimate.unwrap_or(f64::NAN),
            r.qa_stderr.unwrap_or(f64::NAN),
            r.bias_bound.unwrap_or(f64::NAN),
        );
        checks.push(Check::new(
            P,
            format!("|qA estimate - qA| within meter_sigmas*stderr + bias at {label}"),
            (est - r.qa_true).abs(),
            tol.meter_sigmas * se + bias,
        ));
        for (name, e) in [("psi", r.estimate), ("psi0", r.estimate_reference)] {
            let se = e.map_or(f64::NAN, |e| e.stderr_re);
            checks.push(Check::new(
                P,
                format!("stderr of Re estimate ({name}) matches sigma_q/(g sqrt(n)) at {label}"),
                (se / expected_stderr - 1.0).abs(),
                tol.meter_stderr_rel,
            ));
        }
    }
    Ok(MeterResult {
        n_samples: n,
        master_seed: cfg.sampling.master_seed,
        expected_stderr,
        sites,
    })
}

fn dynamics(cfg: &ScenarioConfig, s: &Setup, checks: &mut Vec<Check>) -> Result<DynamicsResult, PipelineError> {
    const P: &str = "dynamics";
    let consts = cfg.constants;
    let ev = cfg.evolution.expect("validated");
    let tol = &cfg.tolerances;
    let zero = VectorPotential::zero(&s.grid);
    let h0 = build_hamiltonian(&s.grid, &zero, None, 0.0, &consts).stage("hamiltonian")?;
    let ha = build_hamiltonian(&s.grid, &s.a, None, 0.0, &consts).stage("hamiltonian")?;
    let psi = lattice_peierls(&s.psi0, &s.a, &consts).stage("lattice peierls")?;
    let (psi0_t, psi_t) = rayon::join(|| evolve(&s.psi0, &h0, &ev), || evolve(&psi, &ha, &ev));
    let psi0_t = psi0_t.stage("evolve")?;
    let psi_t = psi_t.stage("evolve")?;
    let check_residual = check_minimal_coupling_relation(&psi0_t, &psi_t, &s.a, &consts).stage("check relation")?;
    let norm_drift = (psi_t.norm_sqr() - psi.norm_sqr())
        .abs()
        .max((psi0_t.norm_sqr() - s.psi0.norm_sqr()).abs());
    let recon = reconstruct_vector_potential(&psi_t, &psi0_t, &consts, cfg.thresholds.mask)
        .and_then(|r| r.with_truth(&s.a))
        .stage("dynamic reconstruction")?;
    let reconstruct_linf = recon.residual_linf.unwrap_or(f64::NAN);
    let static_t = peierls_phase(&psi0_t, &s.a, &consts).stage("static reconstruction")?;
    let recon_static = reconstruct_vector_potential(&static_t, &psi0_t, &consts, cfg.thresholds.mask)
        .stage("static reconstruction")?;
    let static_consistency = (0..s.grid.n())
        .filter(|&j| recon.valid[j] && recon_static.valid[j])
        .map(|j| (recon.a_recon.values()[j] - recon_static.a_recon.values()[j]).abs())
        .fold(0.0, f64::max);
    let t_final = ev.dt * ev.steps as f64;
    let free_width_sq = match cfg.state {
        StateSpec::Gaussian { sigma, .. } => {
            let predicted = sigma * sigma + (consts.hbar * t_final / (2.0 * consts.mass * sigma)).powi(2);
            let observed = psi0_t.position_variance();
            Some(FreeWidth {
                observed,
                predicted,
                relative_error: (observed / predicted - 1.0).abs(),
            })
        }
        _ => None,
    };
    checks.push(Check::new(P, "Peierls relation between evolved states", check_residual, tol.dynamics_check));
    checks.push(Check::new(P, "norm drift", norm_drift, tol.norm_drift));
    checks.push(Check::new(
        P,
        "dynamic reconstruction matches static reconstruction at t",
        static_consistency,
        tol.dynamics_reconstruct,
    ));
    if let Some(w) = &free_width_sq {
        checks.push(Check::new(P, "free packet width^2 relative error", w.relative_error, tol.free_width_rel));
    }
    Ok(DynamicsResult {
        dt: ev.dt,
        steps: ev.steps,
        t_final,
        check_residual,
        norm_drift,
        reconstruct_linf,
        static_consistency,
        masked_fraction: recon.masked_fraction,
        free_width_sq,
    })
}

fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn gauge_check(cfg: &ScenarioConfig, s: &Setup, checks: &mut Vec<Check>) -> Result<GaugeCheckResult, PipelineError> {
    const P: &str = "gauge_check";
    let consts = cfg.constants;
    let tol = &cfg.tolerances;
    let n = s.grid.n();
    // Interior sites exclude the one-sided stencils of an open chain.
    let interior = |j: usize| s.grid.is_ring() || (2..n - 2).contains(&j);
    let flux = if s.grid.is_ring() {
        Some(loop_flux(&s.a, &consts).stage("flux")?)
    } else {
        None
    };
    let mut entries = Vec::new();
    for (index, preset) in cfg.gauge.iter().enumerate() {
        let lambda = GaugeFunction::from_preset(&s.grid, preset).stage("gauge function")?;
        let (psi_t, a_t) = gauge_transform(&s.psi, &s.a, &lambda, &consts).stage("gauge transform")?;
        let recon_t = reconstruct_vector_potential(&psi_t, &s.psi0, &consts, cfg.thresholds.mask)
            .and_then(|r| r.with_truth(&a_t))
            .stage("gauge reconstruction")?;
        let grad = lambda.gradient();
        let mut shift_error = 0.0_f64;
        for j in (0..n).filter(|&j| interior(j) && recon_t.valid[j] && s.recon.valid[j]) {
            let shift = recon_t.a_recon.values()[j] - s.recon.a_recon.values()[j];
            shift_error = shift_error.max((shift - grad[j]).abs());
        }
        let (flux_change, ab_phase_change) = match &flux {
            Some(f) => {
                let ft = loop_flux(&a_t, &consts).stage("flux")?;
                (
                    Some((ft.loop_integral - f.loop_integral).abs()),
                    Some(wrap_angle(ft.ab_phase - f.ab_phase).abs()),
                )
            }
            None => (None, None),
        };
        let label = format!("gauge[{index}]");
        checks.push(Check::new(P, format!("{label} reconstruction shifts by grad Lambda"), shift_error, tol.gauge_shift));
        if lambda.slope() == 0.0 {
            if let Some(df) = flux_change {
                checks.push(Check::new(P, format!("{label} loop flux invariant"), df, tol.flux_invariance));
            }
        } else if let Some(dp) = ab_phase_change {
            checks.push(Check::new(P, format!("{label} Aharonov-Bohm phase invariant mod 2 pi"), dp, tol.flux_invariance));
        }
        entries.push(GaugeEntryResult {
            index,
            winding_slope: lambda.slope(),
            shift_error,
            covariance_linf: recon_t.residual_linf.unwrap_or(f64::NAN),
            flux_change,
            ab_phase_change,
        });
    }
    let twist_period = if s.grid.is_ring() {
        let (e0, e2) = rayon::join(
            || build_hamiltonian(&s.grid, &s.a, None, 0.0, &consts).map(|h| h.ground_energy()),
            || build_hamiltonian(&s.grid, &s.a, None, 2.0 * PI, &consts).map(|h| h.ground_energy()),
        );
        let (e0, e2) = (e0.stage("spectrum")?, e2.stage("spectrum")?);
        checks.push(Check::new(P, "ground energy periodic in flux twist", (e0 - e2).abs(), tol.twist_period));
        Some(TwistPeriod {
            ground_energy_0: e0,
            ground_energy_2pi: e2,
            difference: (e0 - e2).abs(),
        })
    } else {
        None
    };
    Ok(GaugeCheckResult { entries, twist_period })
}

fn field_dump(s: &Setup) -> FieldDump {
    let r = &s.recon;
    let opt = |v: Option<Complex64>, f: fn(Complex64) -> f64| v.map(f);
    let n = s.grid.n();
    let wv: Vec<Option<Complex64>> = (0..n).map(|j| r.weak_value.get(j)).collect();
    let wv0: Vec<Option<Complex64>> = (0..n).map(|j| r.weak_value_reference.get(j)).collect();
    FieldDump {
        x: s.grid.xs(),
        a_true: s.a.values().to_vec(),
        a_recon: (0..n).map(|j| r.valid[j].then(|| r.a_recon.values()[j])).collect(),
        re_wv: wv.iter().map(|&w| opt(w, |z| z.re)).collect(),
        im_wv: wv.iter().map(|&w| opt(w, |z| z.im)).collect(),
        re_wv0: wv0.iter().map(|&w| opt(w, |z| z.re)).collect(),
        im_wv0: wv0.iter().map(|&w| opt(w, |z| z.im)).collect(),
        mask: r.valid.iter().map(|&v| v as u8).collect(),
        p_c: wv.iter().map(|&w| opt(w, |z| z.re)).collect(),
    }
}
