//! Von Neumann pointer model of a weak momentum measurement.
//!
//! The system couples impulsively to a continuous pointer through
//! `exp(-i g p (x) P / hbar)`, where `P` is the pointer momentum. A system
//! momentum eigenvalue `hbar k` therefore translates the pointer position by
//! `g hbar k`. After post-selecting the system on the lattice site `|x_j>`
//! the (unnormalized) pointer state is
//!
//! ```text
//! phi(Q) = sum_k <x_j|k> <k|psi> Phi0(Q - g hbar k),
//! ```
//!
//! summed over every lattice momentum mode, so the result is exact in `g`.
//! To first order the pointer position moves by `g Re<p>_w` and the pointer
//! momentum by `2 g Var(P) Im<p>_w / hbar`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{Grid1D, PhysicalConstants, WaveFunction};
use crate::spectral;
use crate::weak_value::{density_mask, weak_value_momentum, DEFAULT_THRESHOLD};

pub const WEAK_REGIME_FACTOR: f64 = 0.1;

/// Gaussian pointer and coupling strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterConfig {
    /// Position spread of the initial pointer.
    pub sigma_q: f64,
    /// Mean wavenumber of the initial pointer; `<P> = hbar k_m`.
    #[serde(default)]
    pub k_m: f64,
    /// Integrated coupling `int f(t) dt`.
    pub g: f64,
}

impl MeterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_q.is_finite() && self.sigma_q > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_q must be > 0, got {}",
                self.sigma_q
            )));
        }
        if !(self.k_m.is_finite() && self.g.is_finite()) {
            return Err(Error::InvalidParameter("k_m and g must be finite".into()));
        }
        Ok(())
    }

    /// Pointer momentum spread `hbar / (2 sigma_q)`.
    pub fn sigma_p(&self, consts: &PhysicalConstants) -> f64 {
        consts.hbar / (2.0 * self.sigma_q)
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        Self { g, ..*self }
    }

    /// Normalized initial pointer amplitude.
    pub fn initial_pointer(&self, q: f64) -> Complex64 {
        let s2 = self.sigma_q * self.sigma_q;
        let norm = (2.0 * PI * s2).powf(-0.25);
        Complex64::new(-q * q / (4.0 * s2), self.k_m * q).exp() * norm
    }

    /// Pointer axis wide enough for the largest lattice momentum of `psi`.
    ///
    /// Spacing is `sigma_q / 16` and the half-width `|g| hbar k_max + 10 sigma_q`.
    pub fn pointer_grid(&self, psi: &WaveFunction, consts: &PhysicalConstants) -> Result<Grid1D> {
        self.validate()?;
        let k_max = spectral::wavenumbers(psi.grid().n(), psi.grid().length(), psi.twist())
            .into_iter()
            .fold(0.0_f64, |m, k| m.max(k.abs()));
        let half = self.g.abs() * consts.hbar * k_max + 10.0 * self.sigma_q;
        let dq = self.sigma_q / 16.0;
        let n = ((2.0 * half / dq).ceil() as usize).max(64);
        Grid1D::ring(n, -half, half)
    }

    /// Warning text when `g * hbar * k_max` exceeds `factor * sigma_q`, with
    /// `k_max` taken over modes holding more than `1e-12` of the peak spectral
    /// weight. The customary factor is [`WEAK_REGIME_FACTOR`].
    pub fn weak_regime_warning(
        &self,
        psi: &WaveFunction,
        consts: &PhysicalConstants,
        factor: f64,
    ) -> Option<String> {
        let modes = momentum_decomposition(psi);
        let peak = modes.iter().map(|(_, c)| c.norm_sqr()).fold(0.0, f64::max);
        let k_max = modes
            .iter()
            .filter(|(_, c)| c.norm_sqr() > 1e-12 * peak)
            .fold(0.0_f64, |m, (k, _)| m.max(k.abs()));
        let shift = self.g.abs() * consts.hbar * k_max;
        (shift > factor * self.sigma_q).then(|| {
            format!(
                "coupling outside the weak regime: g*hbar*k_max = {shift:.4} > {factor}*sigma_q = {:.4}",
                factor * self.sigma_q
            )
        })
    }
}

/// `(k, <k|psi>)` for every lattice momentum mode of a ring state.
pub fn momentum_decomposition(psi: &WaveFunction) -> Vec<(f64, Complex64)> {
    let grid = psi.grid();
    let n = grid.n();
    let k = spectral::wavenumbers(n, grid.length(), psi.twist());
    let mut work = spectral::untwist(psi.amplitudes(), psi.twist());
    spectral::forward(&mut work);
    let scale = grid.dx() / grid.length().sqrt();
    k.into_iter().zip(work).map(|(k, c)| (k, c * scale)).collect()
}

/// Pointer state conditioned on finding the system at one lattice site.
#[derive(Debug, Clone)]
pub struct PostSelectedMeter {
    pub q_grid: Grid1D,
    /// Unnormalized pointer amplitude.
    pub phi: Vec<Complex64>,
    /// Post-selection probability density at the chosen site, `int |phi|^2 dQ`.
    pub prob: f64,
    pub site: usize,
    pub config: MeterConfig,
    pub hbar: f64,
}

/// Sites within this many points of the pointer-grid edge form the guard band.
const GUARD_SITES: usize = 3;
const GUARD_MASS: f64 = 1e-10;

pub fn post_selected_meter_state(
    psi: &WaveFunction,
    x_idx: usize,
    meter: &MeterConfig,
    consts: &PhysicalConstants,
    q_grid: &Grid1D,
) -> Result<PostSelectedMeter> {
    meter.validate()?;
    let grid = psi.grid();
    if !grid.is_ring() {
        return Err(Error::NotARing);
    }
    if x_idx >= grid.n() {
        return Err(Error::SiteOutOfRange {
            index: x_idx,
            n: grid.n(),
        });
    }
    let l = grid.length();
    let offset = grid.x(x_idx) - grid.x_min();
    // c_k = <x|k><k|psi>; these sum to psi(x).
    let weights: Vec<(f64, Complex64)> = momentum_decomposition(psi)
        .into_iter()
        .map(|(k, c)| (k, c * Complex64::from_polar(1.0 / l.sqrt(), k * offset)))
        .collect();
    let s2 = meter.sigma_q * meter.sigma_q;
    let norm = (2.0 * PI * s2).powf(-0.25);
    let shifts: Vec<(f64, Complex64)> = weights
        .into_iter()
        .map(|(k, c)| (meter.g * consts.hbar * k, c * norm))
        .collect();
    let phi: Vec<Complex64> = q_grid
        .xs()
        .into_iter()
        .map(|q| {
            shifts
                .iter()
                .map(|&(shift, c)| {
                    let u = q - shift;
                    c * Complex64::new(-u * u / (4.0 * s2), meter.k_m * u).exp()
                })
                .sum()
        })
        .collect();
    let rho: Vec<f64> = phi.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = rho.iter().sum();
    let n_q = rho.len();
    let edge: f64 = rho[..GUARD_SITES].iter().sum::<f64>() + rho[n_q - GUARD_SITES..].iter().sum::<f64>();
    if total > 0.0 && edge > GUARD_MASS * total {
        return Err(Error::PointerGridTooNarrow { mass: edge / total });
    }
    Ok(PostSelectedMeter {
        q_grid: q_grid.clone(),
        phi,
        prob: total * q_grid.dx(),
        site: x_idx,
        config: *meter,
        hbar: consts.hbar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMode {
    Exact,
    FirstOrder,
}

/// Post-selection probability density at site `x_idx`.
///
/// `FirstOrder` evaluates `|psi(x)|^2 (1 + 2 g Im<p>_w <M>)` with the meter
/// variable `M = P / hbar`, so `<M> = k_m`.
pub fn postselection_probability(
    psi: &WaveFunction,
    x_idx: usize,
    meter: &MeterConfig,
    consts: &PhysicalConstants,
    mode: ProbabilityMode,
) -> Result<f64> {
    match mode {
        ProbabilityMode::Exact => {
            let q_grid = meter.pointer_grid(psi, consts)?;
            Ok(post_selected_meter_state(psi, x_idx, meter, consts, &q_grid)?.prob)
        }
        ProbabilityMode::FirstOrder => {
            if x_idx >= psi.grid().n() {
                return Err(Error::SiteOutOfRange {
                    index: x_idx,
                    n: psi.grid().n(),
                });
            }
            if !density_mask(psi, DEFAULT_THRESHOLD)[x_idx] {
                return Err(Error::MaskedSite { index: x_idx });
            }
            let rho = psi.amplitudes()[x_idx].norm_sqr();
            if meter.g == 0.0 || meter.k_m == 0.0 {
                return Ok(rho);
            }
            let wv = weak_value_momentum(psi, consts, DEFAULT_THRESHOLD)?
                .get(x_idx)
                .ok_or(Error::MaskedSite { index: x_idx })?;
            Ok(rho * (1.0 + 2.0 * meter.g * wv.im * meter.k_m))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerMoments {
    pub mean_q: f64,
    pub var_q: f64,
    pub mean_p: f64,
    pub var_p: f64,
}

impl PostSelectedMeter {
    /// Normalized pointer position density per site.
    pub fn position_weights(&self) -> Vec<f64> {
        let w: Vec<f64> = self.phi.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    /// `(hbar k, weight)` of the pointer momentum distribution, ascending in `k`.
    pub fn momentum_weights(&self) -> Vec<(f64, f64)> {
        let n = self.phi.len();
        let mut work = self.phi.clone();
        spectral::forward(&mut work);
        let k = spectral::wavenumbers(n, self.q_grid.length(), 0.0);
        let total: f64 = work.iter().map(|c| c.norm_sqr()).sum();
        let mut out: Vec<(f64, f64)> = k
            .into_iter()
            .zip(work)
            .map(|(k, c)| (self.hbar * k, c.norm_sqr() / total))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

pub fn pointer_moments(m: &PostSelectedMeter) -> Result<PointerMoments> {
    if !(m.prob > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let w = m.position_weights();
    let qs = m.q_grid.xs();
    let mean_q: f64 = w.iter().zip(&qs).map(|(w, q)| w * q).sum();
    let var_q: f64 = w.iter().zip(&qs).map(|(w, q)| w * (q - mean_q).powi(2)).sum();
    let pw = m.momentum_weights();
    let mean_p: f64 = pw.iter().map(|(p, w)| p * w).sum();
    let var_p: f64 = pw.iter().map(|(p, w)| w * (p - mean_p).powi(2)).sum();
    Ok(PointerMoments {
        mean_q,
        var_q,
        mean_p,
        var_p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Position,
    Momentum,
}

impl Channel {
    fn index(self) -> u64 {
        match self {
            Channel::Position => 0,
            Channel::Momentum => 1,
        }
    }
}

/// Identifies one independent random stream below a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPath {
    pub master_seed: u64,
    pub site: usize,
    pub channel: Channel,
    /// Distinguishes independent measurements at the same site (for example
    /// with and without the vector potential).
    pub branch: u32,
}

impl SeedPath {
    pub fn stream(&self) -> u64 {
        ((self.site as u64) << 32) | ((self.branch as u64) << 1) | self.channel.index()
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream());
        rng
    }
}

/// Readouts of one pointer quadrature drawn from one post-selected meter.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutBatch {
    pub channel: Channel,
    pub seed_path: SeedPath,
    /// Pointer position, or pointer momentum `hbar k`.
    pub values: Vec<f64>,
}

/// Draws `n` readouts by inverse-CDF sampling of the pointer distribution,
/// treating each grid cell as uniformly filled.
pub fn sample_readouts(m: &PostSelectedMeter, n: usize, seed_path: SeedPath) -> Result<ReadoutBatch> {
    if !(m.prob > 0.0) {
        return Err(Error::ZeroProbability);
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let (centers, weights, width) = match seed_path.channel {
        Channel::Position => (m.q_grid.xs(), m.position_weights(), m.q_grid.dx()),
        Channel::Momentum => {
            let pw = m.momentum_weights();
            let dp = m.hbar * 2.0 * PI / m.q_grid.length();
            (pw.iter().map(|p| p.0).collect(), pw.iter().map(|p| p.1).collect(), dp)
        }
    };
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = seed_path.rng();
    let values = (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let below = if cell == 0 { 0.0 } else { cdf[cell - 1] };
            let frac = if weights[cell] > 0.0 {
                ((u - below) / weights[cell]).clamp(0.0, 1.0)
            } else {
                0.5
            };
            centers[cell] + (frac - 0.5) * width
        })
        .collect();
    Ok(ReadoutBatch {
        channel: seed_path.channel,
        seed_path,
        values,
    })
}

/// Complex weak-value estimate from pointer readouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValueEstimate {
    pub re: f64,
    pub im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_position: usize,
    pub n_momentum: usize,
}

impl WeakValueEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `Re = <Q>/g`, `Im = hbar (<P> - hbar k_m) / (2 g Var(P))` with
/// `Var(P) = (hbar / 2 sigma_q)^2` the initial pointer momentum variance.
pub fn estimate_weak_value(
    position: &[f64],
    momentum: &[f64],
    meter: &MeterConfig,
    consts: &PhysicalConstants,
) -> Result<WeakValueEstimate> {
    if meter.g == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    if position.is_empty() || momentum.is_empty() {
        return Err(Error::EmptySamples);
    }
    let g = meter.g;
    let var_p = meter.sigma_p(consts).powi(2);
    let im_scale = consts.hbar / (2.0 * g * var_p);
    let (mq, sq) = mean_and_stderr(position);
    let (mp, sp) = mean_and_stderr(momentum);
    Ok(WeakValueEstimate {
        re: mq / g,
        im: (mp - consts.hbar * meter.k_m) * im_scale,
        stderr_re: sq / g.abs(),
        stderr_im: sp * im_scale.abs(),
        n_position: position.len(),
        n_momentum: momentum.len(),
    })
}

/// The same estimator evaluated on exact pointer moments (infinite samples).
pub fn estimate_from_moments(
    moments: &PointerMoments,
    meter: &MeterConfig,
    consts: &PhysicalConstants,
) -> Result<Complex64> {
    if meter.g == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let var_p = meter.sigma_p(consts).powi(2);
    Ok(Complex64::new(
        moments.mean_q / meter.g,
        consts.hbar * (moments.mean_p - consts.hbar * meter.k_m) / (2.0 * meter.g * var_p),
    ))
}
