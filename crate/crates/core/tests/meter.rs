use potmeter::gauge::{peierls_phase, PotentialPreset, VectorPotential};
use potmeter::lattice::{prepare_state, Grid1D, PhysicalConstants, StateSpec, WaveFunction};
use potmeter::meter::{
    estimate_from_moments, estimate_weak_value, momentum_decomposition, pointer_moments, post_selected_meter_state,
    postselection_probability, sample_readouts, Channel, MeterConfig, ProbabilityMode, SeedPath,
};
use potmeter::weak_value::{weak_value_momentum, DEFAULT_THRESHOLD};
use potmeter::Error;
use std::f64::consts::PI;

fn meter(g: f64) -> MeterConfig {
    MeterConfig { sigma_q: 1.0, k_m: 0.0, g }
}

fn packet(grid: &Grid1D) -> WaveFunction {
    prepare_state(grid, &StateSpec::Gaussian { x0: 0.0, k0: 2.0, sigma: 1.0 }).unwrap()
}

fn seed(master: u64, site: usize, channel: Channel, branch: u32) -> SeedPath {
    SeedPath { master_seed: master, site, channel, branch }
}

#[test]
fn momentum_decomposition_is_unitary() {
    let grid = Grid1D::ring(256, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let total: f64 = momentum_decomposition(&psi).iter().map(|(_, c)| c.norm_sqr()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn plane_wave_shifts_pointer_rigidly() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(64, 0.0, 2.0 * PI).unwrap();
    let psi = prepare_state(&grid, &StateSpec::PlaneWave { k: 3.0 }).unwrap();
    let m = MeterConfig { sigma_q: 1.0, k_m: 0.4, g: 0.2 };
    let q_grid = m.pointer_grid(&psi, &consts).unwrap();
    let post = post_selected_meter_state(&psi, 10, &m, &consts, &q_grid).unwrap();
    let c = q_grid.nearest_site(0.6).0;
    let ph = post.phi[c] / m.initial_pointer(q_grid.x(c) - 0.6);
    for (j, z) in post.phi.iter().enumerate() {
        let expected = m.initial_pointer(q_grid.x(j) - 0.6) * ph;
        assert!((z - expected).norm() < 1e-12);
    }
    let mom = pointer_moments(&post).unwrap();
    assert!((mom.mean_q - 0.6).abs() < 1e-10);
    assert!((mom.mean_p - 0.4).abs() < 1e-10);
    assert!((mom.var_q - 1.0).abs() < 1e-10);
    assert!((post.prob - 1.0 / grid.length()).abs() < 1e-12);
}

#[test]
fn postselection_probabilities_sum_to_one() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(48, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let m = MeterConfig { sigma_q: 1.0, k_m: 0.3, g: 0.1 };
    let total: f64 = (0..grid.n())
        .map(|j| postselection_probability(&psi, j, &m, &consts, ProbabilityMode::Exact).unwrap())
        .sum::<f64>()
        * grid.dx();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}

#[test]
fn zero_coupling_probability_is_density() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(128, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let rho = psi.density();
    for mode in [ProbabilityMode::Exact, ProbabilityMode::FirstOrder] {
        let p = postselection_probability(&psi, 70, &meter(0.0), &consts, mode).unwrap();
        assert!((p - rho[70]).abs() < 1e-12, "{mode:?}");
    }
}

#[test]
fn exact_moments_converge_to_weak_value() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(512, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let site = grid.nearest_site(0.7).0;
    let wv = weak_value_momentum(&psi, &consts, DEFAULT_THRESHOLD).unwrap().get(site).unwrap();
    let err = |g: f64| {
        let m = meter(g);
        let q_grid = m.pointer_grid(&psi, &consts).unwrap();
        let post = post_selected_meter_state(&psi, site, &m, &consts, &q_grid).unwrap();
        let est = estimate_from_moments(&pointer_moments(&post).unwrap(), &m, &consts).unwrap();
        (est - wv).norm()
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e1 < 0.05);
    assert!(e2 < 0.6 * e1, "{e1} {e2}");
}

#[test]
fn position_sample_mean_within_four_sigma() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(256, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let m = meter(0.05);
    let q_grid = m.pointer_grid(&psi, &consts).unwrap();
    let post = post_selected_meter_state(&psi, 140, &m, &consts, &q_grid).unwrap();
    let mom = pointer_moments(&post).unwrap();
    let n = 50_000;
    let batch = sample_readouts(&post, n, seed(3, 140, Channel::Position, 0)).unwrap();
    let mean = batch.values.iter().sum::<f64>() / n as f64;
    assert!((mean - mom.mean_q).abs() < 4.0 * mom.var_q.sqrt() / (n as f64).sqrt());
}

#[test]
fn sampling_is_deterministic_per_stream() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(128, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let m = meter(0.05);
    let q_grid = m.pointer_grid(&psi, &consts).unwrap();
    let post = post_selected_meter_state(&psi, 64, &m, &consts, &q_grid).unwrap();
    let a = sample_readouts(&post, 100, seed(9, 64, Channel::Momentum, 0)).unwrap();
    let b = sample_readouts(&post, 100, seed(9, 64, Channel::Momentum, 0)).unwrap();
    let c = sample_readouts(&post, 100, seed(9, 64, Channel::Momentum, 1)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values, c.values);
    assert_ne!(seed(9, 1, Channel::Position, 0).stream(), seed(9, 0, Channel::Momentum, 0).stream());
}

#[test]
fn stderr_scales_with_coupling_and_count() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(256, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let site = 128;
    let run = |g: f64, n: usize| {
        let m = meter(g);
        let q_grid = m.pointer_grid(&psi, &consts).unwrap();
        let post = post_selected_meter_state(&psi, site, &m, &consts, &q_grid).unwrap();
        let pos = sample_readouts(&post, n, seed(5, site, Channel::Position, 0)).unwrap();
        let mom = sample_readouts(&post, n, seed(5, site, Channel::Momentum, 0)).unwrap();
        estimate_weak_value(&pos.values, &mom.values, &m, &consts).unwrap()
    };
    let a = run(0.1, 10_000);
    let b = run(0.05, 40_000);
    let ratio = b.stderr_re / a.stderr_re;
    assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
    assert!((a.stderr_re - 1.0 / (0.1 * 100.0)).abs() < 0.2 * a.stderr_re);
}

#[test]
fn sampled_difference_estimates_potential() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(256, -2.0 * PI, 2.0 * PI).unwrap();
    let psi0 = packet(&grid);
    let a = VectorPotential::from_preset(&grid, PotentialPreset::GaussianBump { amplitude: 0.7, center: 0.0, width: 2.0 })
        .unwrap();
    let psi = peierls_phase(&psi0, &a, &consts).unwrap();
    let m = meter(0.05);
    let site = grid.nearest_site(0.5).0;
    let n = 200_000;
    let est = |state: &WaveFunction, branch: u32| {
        let q_grid = m.pointer_grid(state, &consts).unwrap();
        let post = post_selected_meter_state(state, site, &m, &consts, &q_grid).unwrap();
        let pos = sample_readouts(&post, n, seed(1, site, Channel::Position, branch)).unwrap();
        let mom = sample_readouts(&post, n, seed(1, site, Channel::Momentum, branch)).unwrap();
        estimate_weak_value(&pos.values, &mom.values, &m, &consts).unwrap()
    };
    let (e, e0) = (est(&psi, 0), est(&psi0, 1));
    let qa = e.re - e0.re;
    let se = e.stderr_re.hypot(e0.stderr_re);
    let truth = a.values()[site];
    assert!((qa - truth).abs() < 4.0 * se + 0.01, "{qa} vs {truth} (se {se})");
}

#[test]
fn open_grid_is_rejected() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::open(128, -8.0, 8.0).unwrap();
    let psi = packet(&grid);
    let q_grid = Grid1D::ring(256, -10.0, 10.0).unwrap();
    let err = post_selected_meter_state(&psi, 3, &meter(0.05), &consts, &q_grid).unwrap_err();
    assert!(matches!(err, Error::NotARing));
}

#[test]
fn narrow_pointer_grid_is_rejected() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(128, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    let q_grid = Grid1D::ring(64, -2.0, 2.0).unwrap();
    let err = post_selected_meter_state(&psi, 64, &meter(0.05), &consts, &q_grid).unwrap_err();
    assert!(matches!(err, Error::PointerGridTooNarrow { .. }));
}

#[test]
fn strong_coupling_warns() {
    let consts = PhysicalConstants::default();
    let grid = Grid1D::ring(128, -2.0 * PI, 2.0 * PI).unwrap();
    let psi = packet(&grid);
    assert!(meter(0.01).weak_regime_warning(&psi, &consts, 0.1).is_none());
    assert!(meter(1.0).weak_regime_warning(&psi, &consts, 0.1).is_some());
}
