//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use potmeter::gauge::{peierls_phase, PotentialPreset, VectorPotential};
use potmeter::lattice::{prepare_state, Grid1D, PhysicalConstants, StateSpec, WaveFunction};
use potmeter::meter::{
    estimate_from_moments, pointer_moments, post_selected_meter_state, postselection_probability, MeterConfig,
    ProbabilityMode,
};
use potmeter::weak_value::{hall_commuting_momentum, weak_value_momentum, DEFAULT_THRESHOLD};
use potmeter_cli::{run_scenario, Pipeline, RunReport, ScenarioConfig};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(cfg: &ScenarioConfig, p: Pipeline) -> Result<RunReport, String> {
    run_scenario(cfg, p).map_err(|e| e.to_string())
}

fn preset(name: &str) -> ScenarioConfig {
    ScenarioConfig::preset(name).expect("preset exists")
}

/// Ring packet of the bump scenario and its Peierls partner.
fn bump_pair() -> (WaveFunction, WaveFunction) {
    let grid = Grid1D::ring(1024, -2.0 * PI, 2.0 * PI).unwrap();
    let psi0 = prepare_state(&grid, &StateSpec::Gaussian { x0: 0.0, k0: 2.0, sigma: 1.0 }).unwrap();
    let a = VectorPotential::from_preset(
        &grid,
        PotentialPreset::GaussianBump { amplitude: 0.7, center: 0.0, width: 2.0 },
    )
    .unwrap();
    let psi = peierls_phase(&psi0, &a, &Default::default()).unwrap();
    (psi, psi0)
}

fn off_center_sites(grid: &Grid1D) -> Vec<usize> {
    [-1.0, -0.5, 0.5, 1.0, 1.5].iter().map(|&x| grid.nearest_site(x).0).collect()
}

fn criterion_1() -> Outcome {
    let cfg = preset("bump-reconstruct");
    let t = Instant::now();
    let rep = run(&cfg, Pipeline::Reconstruct)?;
    let elapsed = t.elapsed().as_secs_f64();
    let r = rep.results.reconstruct.as_ref().unwrap();
    ensure(
        r.residual_linf <= 1e-7 && r.imag_leak_linf <= 1e-8 && r.masked_fraction <= 0.05 && elapsed < 1.0,
        format!(
            "linf {:.2e} <= 1e-7, leak {:.2e} <= 1e-8, masked {:.3} <= 0.05, {:.3} s < 1 s",
            r.residual_linf, r.imag_leak_linf, r.masked_fraction, elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0_f64;
    for a0 in [-0.5, 0.3, 2.0] {
        let mut cfg = preset("constant-potential");
        cfg.potential = PotentialPreset::Constant { a0 };
        let rep = run(&cfg, Pipeline::Reconstruct)?;
        worst = worst.max(rep.results.reconstruct.unwrap().residual_linf);
    }
    ensure(worst <= 1e-9, format!("max error over a0 in {{-0.5, 0.3, 2.0}}: {worst:.2e} <= 1e-9"))
}

fn criterion_3() -> Outcome {
    let (psi, _) = bump_pair();
    let consts = PhysicalConstants::default();
    let wv = weak_value_momentum(&psi, &consts, DEFAULT_THRESHOLD).unwrap();
    let hall = hall_commuting_momentum(&psi, &consts, DEFAULT_THRESHOLD).unwrap();
    let identical = (0..psi.grid().n()).all(|j| match wv.get(j) {
        Some(w) => hall.p_c[j].to_bits() == w.re.to_bits(),
        None => !hall.mask[j],
    });
    let err = (hall.first_moment(&psi) - psi.mean_momentum(&consts)).abs();
    ensure(
        identical && err <= 1e-8,
        format!("p_c == Re(wv) bitwise: {identical}; |int p_c rho - <p>| = {err:.2e} <= 1e-8"),
    )
}

fn criterion_4() -> Outcome {
    let (psi, _) = bump_pair();
    let consts = PhysicalConstants::default();
    let mut min_ratio = f64::INFINITY;
    let mut worst_rich = 0.0_f64;
    for j in off_center_sites(psi.grid()) {
        let rho = psi.amplitudes()[j].norm_sqr();
        let gap = |g: f64| -> Result<f64, String> {
            let m = MeterConfig { sigma_q: 1.0, k_m: 0.5, g };
            let e = postselection_probability(&psi, j, &m, &consts, ProbabilityMode::Exact).map_err(|e| e.to_string())?;
            let f = postselection_probability(&psi, j, &m, &consts, ProbabilityMode::FirstOrder).map_err(|e| e.to_string())?;
            Ok((e - f).abs())
        };
        min_ratio = min_ratio.min(gap(1e-3)? / gap(5e-4)?);
        let rest = |g: f64| -> Result<f64, String> {
            let m = MeterConfig { sigma_q: 1.0, k_m: 0.0, g };
            postselection_probability(&psi, j, &m, &consts, ProbabilityMode::Exact)
                .map(|p| p - rho)
                .map_err(|e| e.to_string())
        };
        // With k_m = 0 the first-order term vanishes; Richardson removes the g^2 term.
        let g = 1e-3;
        let rich = (4.0 * rest(g / 2.0)? - rest(g)?).abs() / (g * rho);
        worst_rich = worst_rich.max(rich);
    }
    ensure(
        min_ratio >= 3.5 && worst_rich <= 1e-6,
        format!(
            "k_m=0.5 residual shrink factor {min_ratio:.3} >= 3.5; k_m=0 first-order term {worst_rich:.2e} <= 1e-6 (g |psi|^2 units)"
        ),
    )
}

fn fitted_order(gs: &[f64], errs: &[f64]) -> f64 {
    let n = gs.len() as f64;
    let lx: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn criterion_5() -> Outcome {
    let consts = PhysicalConstants::default();
    let (psi, _) = bump_pair();
    let grid = psi.grid().clone();
    let plane = prepare_state(&grid, &StateSpec::PlaneWave { k: 2.0 }).unwrap();
    let m = MeterConfig { sigma_q: 1.0, k_m: 0.0, g: 0.1 };
    let qg = m.pointer_grid(&plane, &consts).unwrap();
    let meter = post_selected_meter_state(&plane, 300, &m, &consts, &qg).map_err(|e| e.to_string())?;
    let shift_err = (pointer_moments(&meter).unwrap().mean_q - 0.1 * 2.0).abs();

    let wv = weak_value_momentum(&psi, &consts, DEFAULT_THRESHOLD).unwrap();
    let gs = [0.1, 0.05, 0.025];
    let mut min_order = f64::INFINITY;
    for j in off_center_sites(&grid) {
        let exact = wv.get(j).unwrap();
        let (mut er, mut ei) = (Vec::new(), Vec::new());
        for &g in &gs {
            let m = MeterConfig { sigma_q: 1.0, k_m: 0.0, g };
            let qg = m.pointer_grid(&psi, &consts).unwrap();
            let meter = post_selected_meter_state(&psi, j, &m, &consts, &qg).map_err(|e| e.to_string())?;
            let est = estimate_from_moments(&pointer_moments(&meter).unwrap(), &m, &consts).unwrap();
            er.push((est.re - exact.re).abs());
            ei.push((est.im - exact.im).abs());
        }
        min_order = min_order.min(fitted_order(&gs, &er)).min(fitted_order(&gs, &ei));
    }
    ensure(
        shift_err <= 1e-10 && min_order >= 0.95,
        format!("plane-wave shift error {shift_err:.2e} <= 1e-10; min observed order {min_order:.3} >= 0.95"),
    )
}

fn criterion_6() -> Outcome {
    let cfg = preset("meter-endtoend");
    let t = Instant::now();
    let rep = run(&cfg, Pipeline::Meter)?;
    let elapsed = t.elapsed().as_secs_f64();
    let meter = rep.results.meter.as_ref().unwrap();
    let active: Vec<_> = meter.sites.iter().filter(|s| s.skipped.is_none()).collect();
    let worst = active
        .iter()
        .map(|s| {
            (s.qa_estimate.unwrap() - s.qa_true).abs() / (3.0 * s.qa_stderr.unwrap() + s.bias_bound.unwrap())
        })
        .fold(0.0, f64::max);
    let stderr_dev = active
        .iter()
        .flat_map(|s| [s.estimate.unwrap().stderr_re, s.estimate_reference.unwrap().stderr_re])
        .map(|se| (se / 0.02 - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(
        active.len() == 5 && worst <= 1.0 && stderr_dev <= 0.25 && elapsed < 60.0 && rep.passed,
        format!(
            "{} sites; max |err|/(3 stderr + bias) {worst:.3} <= 1; stderr vs 0.02 off by {:.2}% <= 25%; {elapsed:.1} s < 60 s",
            active.len(),
            100.0 * stderr_dev
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, potential) in [
        ("constant", PotentialPreset::Constant { a0: 0.3 }),
        ("bump", PotentialPreset::GaussianBump { amplitude: 0.7, center: 0.0, width: 2.0 }),
    ] {
        let mut cfg = preset("dynamics-bump");
        cfg.potential = potential;
        let rep = run(&cfg, Pipeline::Dynamics)?;
        let d = rep.results.dynamics.unwrap();
        ok &= d.check_residual <= 1e-10 && d.norm_drift <= 1e-12 && d.static_consistency <= 1e-6;
        parts.push(format!(
            "{label}: check {:.1e}, drift {:.1e}, recon vs static {:.1e} (vs truth {:.1e})",
            d.check_residual, d.norm_drift, d.static_consistency, d.reconstruct_linf
        ));
    }
    ensure(ok, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let rep = run(&preset("free-packet"), Pipeline::Dynamics)?;
    let w = rep.results.dynamics.unwrap().free_width_sq.unwrap();
    ensure(
        w.relative_error <= 5e-4,
        format!(
            "width^2(1) = {:.6} vs {:.6}, relative error {:.2e} <= 5e-4",
            w.observed, w.predicted, w.relative_error
        ),
    )
}

fn criterion_9() -> Outcome {
    let rep = run(&preset("gauge-suite"), Pipeline::GaugeCheck)?;
    let g = rep.results.gauge_check.unwrap();
    let linear_shift = g
        .entries
        .iter()
        .filter(|e| e.winding_slope != 0.0)
        .map(|e| e.shift_error)
        .fold(0.0, f64::max);
    let flux = g
        .entries
        .iter()
        .filter(|e| e.winding_slope == 0.0)
        .map(|e| e.flux_change.unwrap())
        .fold(0.0, f64::max);
    let twist = g.twist_period.unwrap().difference;
    ensure(
        linear_shift <= 1e-9 && flux <= 1e-9 && twist <= 1e-9 && rep.passed,
        format!("Lambda = b x shift error {linear_shift:.2e}; flux change {flux:.2e}; E0(2 pi) - E0(0) = {twist:.2e}; all <= 1e-9"),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let json = dir.path().join(format!("run{i}.json"));
        let csv = dir.path().join(format!("run{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_potmeter"))
            .args(["meter", "--config", "meter-endtoend", "--seed", "11", "--quiet", "--out-json"])
            .arg(&json)
            .arg("--out-csv")
            .arg(&csv)
            .status()
            .map_err(|e| e.to_string())?;
        if status.code() != Some(0) {
            return Err(format!("run {i} exited with {status}"));
        }
        outputs.push(std::fs::read(&json).map_err(|e| e.to_string())?);
    }
    ensure(
        outputs[0] == outputs[1],
        format!("two seeded meter-endtoend reports, {} bytes, identical: {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 exact-pipeline reconstruction", criterion_1),
        ("2 constant-A sanity", criterion_2),
        ("3 Hall identity", criterion_3),
        ("4 post-selection probability", criterion_4),
        ("5 pointer-response laws", criterion_5),
        ("6 Monte Carlo potential meter", criterion_6),
        ("7 dynamics lattice identity", criterion_7),
        ("8 free-packet spreading", criterion_8),
        ("9 gauge suite", criterion_9),
        ("10 determinism", criterion_10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
