//! FFT helpers shared by the ring-topology operators.
//!
//! Conventions: forward transform `c_m = sum_j u_j exp(-2 pi i m j / n)`,
//! inverse carries the `1/n`. Mode index `idx` maps to the signed mode
//! number `m = idx` for `idx < n/2` and `m = idx - n` otherwise, so for even
//! `n` the Nyquist mode is `m = -n/2`.

use num_complex::Complex64;
use rustfft::FftPlanner;

pub(crate) fn forward(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

pub(crate) fn inverse(data: &mut [Complex64]) {
    if data.is_empty() {
        return;
    }
    let n = data.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(data);
    let scale = 1.0 / n as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Signed mode number for FFT slot `idx`.
pub(crate) fn signed_mode(idx: usize, n: usize) -> i64 {
    if idx < n.div_ceil(2) {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Whether FFT slot `idx` is the unpaired Nyquist mode of an even-length transform.
pub(crate) fn is_nyquist(idx: usize, n: usize) -> bool {
    n % 2 == 0 && idx == n / 2
}

/// Wavenumbers `(2 pi m + twist) / L` in FFT slot order.
pub(crate) fn wavenumbers(n: usize, length: f64, twist: f64) -> Vec<f64> {
    (0..n)
        .map(|idx| (2.0 * std::f64::consts::PI * signed_mode(idx, n) as f64 + twist) / length)
        .collect()
}

/// Derivative of a Bloch-periodic sampled function, `f(x + L) = exp(i twist) f(x)`.
///
/// The Nyquist slot is dropped so that real even input maps to an imaginary
/// odd derivative.
pub(crate) fn derivative(values: &[Complex64], length: f64, twist: f64) -> Vec<Complex64> {
    let n = values.len();
    let k = wavenumbers(n, length, twist);
    let mut work = untwist(values, twist);
    forward(&mut work);
    for (idx, c) in work.iter_mut().enumerate() {
        if is_nyquist(idx, n) {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, k[idx]);
        }
    }
    inverse(&mut work);
    retwist(&mut work, twist);
    work
}

/// Antiderivative of a real periodic sample, anchored at the first site.
///
/// Returns `S_j = mean * (x_j - x_0) + P_j` where `P` integrates the
/// trigonometric interpolant of the zero-mean remainder exactly. The Nyquist
/// component is dropped.
pub(crate) fn antiderivative(values: &[f64], length: f64) -> Vec<f64> {
    let n = values.len();
    let k = wavenumbers(n, length, 0.0);
    let mut work: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&mut work);
    let mean = work[0].re / n as f64;
    for (idx, c) in work.iter_mut().enumerate() {
        if idx == 0 || is_nyquist(idx, n) {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c /= Complex64::new(0.0, k[idx]);
        }
    }
    inverse(&mut work);
    let anchor = work[0].re;
    let dx = length / n as f64;
    work.iter()
        .enumerate()
        .map(|(j, c)| mean * dx * j as f64 + (c.re - anchor))
        .collect()
}

/// Multiply sample `j` by `exp(-i twist j / n)`, turning a Bloch-periodic
/// sequence into a periodic one.
pub(crate) fn untwist(values: &[Complex64], twist: f64) -> Vec<Complex64> {
    let n = values.len() as f64;
    if twist == 0.0 {
        return values.to_vec();
    }
    values
        .iter()
        .enumerate()
        .map(|(j, &v)| v * Complex64::from_polar(1.0, -twist * j as f64 / n))
        .collect()
}

pub(crate) fn retwist(values: &mut [Complex64], twist: f64) {
    if twist == 0.0 {
        return;
    }
    let n = values.len() as f64;
    for (j, v) in values.iter_mut().enumerate() {
        *v *= Complex64::from_polar(1.0, twist * j as f64 / n);
    }
}
