//! Spatial grid, wavefunctions and the canonical momentum operator.
//!
//! Two topologies are supported. A ring identifies `x_n` with `x_0` and uses
//! spectral (FFT) derivatives together with midpoint quadrature. An open
//! interval uses fourth-order finite differences and trapezoid quadrature.
//!
//! Ring wavefunctions carry a Bloch `twist`: the amplitude obeys
//! `psi(x + L) = exp(i twist) psi(x)`. Ordinary periodic states have
//! `twist = 0`; a state multiplied by the Peierls factor of a non-quantized
//! ring flux picks up the flux phase as its twist.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral;

/// Smallest grid the operators accept (the open-grid boundary stencils need five points).
pub const MIN_SITES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Open,
    Ring,
}

/// Uniform lattice `x_j = x_min + j dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    topology: Topology,
}

impl Grid1D {
    pub fn new(n: usize, x_min: f64, x_max: f64, topology: Topology) -> Result<Self> {
        if n < MIN_SITES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_SITES} sites, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "bounds must be finite with x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        let dx = match topology {
            Topology::Ring => (x_max - x_min) / n as f64,
            Topology::Open => (x_max - x_min) / (n - 1) as f64,
        };
        Ok(Self {
            n,
            x_min,
            x_max,
            dx,
            topology,
        })
    }

    pub fn ring(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(n, x_min, x_max, Topology::Ring)
    }

    pub fn open(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(n, x_min, x_max, Topology::Open)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_ring(&self) -> bool {
        self.topology == Topology::Ring
    }

    /// Domain length; the circumference on a ring.
    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Quadrature weight of site `j`: midpoint on a ring, trapezoid on an open grid.
    pub fn weight(&self, j: usize) -> f64 {
        match self.topology {
            Topology::Ring => self.dx,
            Topology::Open if j == 0 || j + 1 == self.n => 0.5 * self.dx,
            Topology::Open => self.dx,
        }
    }

    /// Integral of a sampled real function with the topology's quadrature rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(j, v)| v * self.weight(j)).sum()
    }

    /// Nearest lattice site to `x` and the snap distance.
    ///
    /// On a ring, `x` is first wrapped into `[x_min, x_max)`.
    pub fn nearest_site(&self, x: f64) -> (usize, f64) {
        let (pos, limit) = match self.topology {
            Topology::Ring => {
                let l = self.length();
                let wrapped = (x - self.x_min).rem_euclid(l);
                (wrapped / self.dx, self.n)
            }
            Topology::Open => (((x - self.x_min) / self.dx).max(0.0), self.n - 1),
        };
        let mut j = pos.round() as usize;
        if self.is_ring() {
            j %= limit;
        } else {
            j = j.min(limit);
        }
        let mut dist = (self.x(j) - x).abs();
        if self.is_ring() {
            dist = dist.min(self.length() - dist).abs();
        }
        (j, dist)
    }

    pub(crate) fn ensure_same(&self, other: &Grid1D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Units. The charge enters only as the coupling `q = e/c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub q: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            q: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64, q: f64) -> Result<Self> {
        let c = Self { hbar, mass, q };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidParameter(format!("hbar must be > 0, got {}", self.hbar)));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {}", self.mass)));
        }
        if !self.q.is_finite() {
            return Err(Error::InvalidParameter("q must be finite".into()));
        }
        Ok(())
    }
}

/// Normalized complex amplitude on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    amp: Vec<Complex64>,
    twist: f64,
}

impl WaveFunction {
    /// Builds a normalized state from raw amplitudes.
    pub fn new(grid: Grid1D, amp: Vec<Complex64>) -> Result<Self> {
        Self::with_twist(grid, amp, 0.0)
    }

    /// Builds a normalized Bloch-twisted ring state. The twist is reduced to `[0, 2 pi)`.
    pub fn with_twist(grid: Grid1D, amp: Vec<Complex64>, twist: f64) -> Result<Self> {
        if amp.len() != grid.n() {
            return Err(Error::InvalidParameter(format!(
                "amplitude length {} does not match grid size {}",
                amp.len(),
                grid.n()
            )));
        }
        if amp.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        if !twist.is_finite() {
            return Err(Error::InvalidParameter("non-finite twist".into()));
        }
        if !grid.is_ring() && twist != 0.0 {
            return Err(Error::TwistOnOpenGrid);
        }
        let mut psi = Self {
            grid,
            amp,
            twist: reduce_angle(twist),
        };
        psi.normalize()?;
        Ok(psi)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amp
    }

    pub fn twist(&self) -> f64 {
        self.twist
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp
            .iter()
            .enumerate()
            .map(|(j, z)| z.norm_sqr() * self.grid.weight(j))
            .sum()
    }

    /// Rescales to unit norm. Idempotent up to rounding.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("state has zero norm".into()));
        }
        let scale = 1.0 / norm;
        for z in &mut self.amp {
            *z *= scale;
        }
        Ok(())
    }

    /// `<self|other>` with the grid's quadrature weights.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self.inner_with(&other.amp))
    }

    /// `<self|f>` for an arbitrary sampled field on the same grid.
    pub fn inner_with(&self, f: &[Complex64]) -> Complex64 {
        self.amp
            .iter()
            .zip(f)
            .enumerate()
            .map(|(j, (a, b))| a.conj() * b * self.grid.weight(j))
            .sum()
    }

    pub fn density(&self) -> Vec<f64> {
        self.amp.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `<psi|p|psi>`; real for a Hermitian momentum operator.
    pub fn mean_momentum(&self, consts: &PhysicalConstants) -> f64 {
        let p = apply_momentum(self, consts);
        self.inner_with(&p).re
    }

    pub fn mean_position(&self) -> f64 {
        let f: Vec<f64> = self
            .amp
            .iter()
            .enumerate()
            .map(|(j, z)| z.norm_sqr() * self.grid.x(j))
            .collect();
        self.grid.integrate(&f)
    }

    pub fn position_variance(&self) -> f64 {
        let mean = self.mean_position();
        let f: Vec<f64> = self
            .amp
            .iter()
            .enumerate()
            .map(|(j, z)| z.norm_sqr() * (self.grid.x(j) - mean).powi(2))
            .collect();
        self.grid.integrate(&f)
    }

    /// Overwrites the amplitudes without renormalizing. Used by the evolver.
    pub(crate) fn from_parts_unchecked(grid: Grid1D, amp: Vec<Complex64>, twist: f64) -> Self {
        Self { grid, amp, twist }
    }
}

pub(crate) fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    // rem_euclid can round up to exactly 2 pi
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGaussian {
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub weight_im: f64,
    pub x0: f64,
    #[serde(default)]
    pub k0: f64,
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

/// Initial-state recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Gaussian {
        x0: f64,
        #[serde(default)]
        k0: f64,
        sigma: f64,
    },
    PlaneWave {
        k: f64,
    },
    Superposition {
        terms: Vec<WeightedGaussian>,
    },
}

/// Tolerance on `k L / 2 pi` being an integer for ring plane waves.
const MODE_TOL: f64 = 1e-9;

/// Samples `spec` on `grid` and normalizes.
///
/// Gaussians on a ring are wrapped (summed over periodic images) so the
/// sampled state is smooth across the seam.
pub fn prepare_state(grid: &Grid1D, spec: &StateSpec) -> Result<WaveFunction> {
    let amp = match spec {
        StateSpec::Gaussian { x0, k0, sigma } => {
            check_width(grid, *sigma)?;
            (0..grid.n())
                .map(|j| gaussian_sample(grid, grid.x(j), *x0, *k0, *sigma))
                .collect()
        }
        StateSpec::PlaneWave { k } => {
            if !k.is_finite() {
                return Err(Error::InvalidParameter("plane wave k must be finite".into()));
            }
            if grid.is_ring() {
                let winding = k * grid.length() / (2.0 * PI);
                if (winding - winding.round()).abs() > MODE_TOL {
                    return Err(Error::IncommensurateMode {
                        k: *k,
                        length: grid.length(),
                        winding,
                    });
                }
            }
            (0..grid.n())
                .map(|j| Complex64::from_polar(1.0, k * (grid.x(j) - grid.x_min())))
                .collect()
        }
        StateSpec::Superposition { terms } => {
            if terms.is_empty() {
                return Err(Error::InvalidParameter("empty superposition".into()));
            }
            let mut amp = vec![Complex64::new(0.0, 0.0); grid.n()];
            for t in terms {
                check_width(grid, t.sigma)?;
                let w = Complex64::new(t.weight, t.weight_im);
                for (j, a) in amp.iter_mut().enumerate() {
                    *a += w * gaussian_sample(grid, grid.x(j), t.x0, t.k0, t.sigma);
                }
            }
            amp
        }
    };
    WaveFunction::new(grid.clone(), amp)
}

/// Non-fatal issues with a state recipe: Gaussian tails cut off by an open grid.
pub fn state_warnings(grid: &Grid1D, spec: &StateSpec) -> Vec<String> {
    if grid.is_ring() {
        return Vec::new();
    }
    let check = |x0: f64, sigma: f64| -> Option<String> {
        if x0 - 4.0 * sigma < grid.x_min() || x0 + 4.0 * sigma > grid.x_max() {
            Some(format!(
                "gaussian at x0 = {x0} with sigma = {sigma} is closer than 4 sigma to the open-grid boundary"
            ))
        } else {
            None
        }
    };
    match spec {
        StateSpec::Gaussian { x0, sigma, .. } => check(*x0, *sigma).into_iter().collect(),
        StateSpec::Superposition { terms } => {
            terms.iter().filter_map(|t| check(t.x0, t.sigma)).collect()
        }
        StateSpec::PlaneWave { .. } => Vec::new(),
    }
}

fn check_width(grid: &Grid1D, sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    if sigma < 2.0 * grid.dx() {
        return Err(Error::DegenerateWidth {
            sigma,
            dx: grid.dx(),
        });
    }
    Ok(())
}

fn gaussian_sample(grid: &Grid1D, x: f64, x0: f64, k0: f64, sigma: f64) -> Complex64 {
    let g = |x: f64| {
        let d = x - x0;
        Complex64::new(-d * d / (4.0 * sigma * sigma), k0 * x).exp()
    };
    match grid.topology() {
        Topology::Open => g(x),
        Topology::Ring => {
            let l = grid.length();
            let images = (12.0 * sigma / l).ceil() as i64 + 1;
            (-images..=images).map(|m| g(x + m as f64 * l)).sum()
        }
    }
}

/// `d/dx` of a sampled field with the topology's scheme.
///
/// `twist` is the Bloch phase for ring fields and is ignored on open grids.
pub fn derivative(grid: &Grid1D, f: &[Complex64], twist: f64) -> Vec<Complex64> {
    match grid.topology() {
        Topology::Ring => spectral::derivative(f, grid.length(), twist),
        Topology::Open => fd4_derivative(f, grid.dx()),
    }
}

/// Real-valued derivative of a real sampled field (periodic on a ring).
pub fn derivative_real(grid: &Grid1D, f: &[f64]) -> Vec<f64> {
    let c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    derivative(grid, &c, 0.0).into_iter().map(|z| z.re).collect()
}

/// `(-i hbar d/dx) psi` sampled at the sites.
pub fn apply_momentum(psi: &WaveFunction, consts: &PhysicalConstants) -> Vec<Complex64> {
    let scale = Complex64::new(0.0, -consts.hbar);
    derivative(psi.grid(), psi.amplitudes(), psi.twist())
        .into_iter()
        .map(|d| d * scale)
        .collect()
}

/// Fourth-order central differences with fourth-order one-sided closures.
fn fd4_derivative(f: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = f.len();
    let h = 1.0 / (12.0 * dx);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for j in 2..n - 2 {
        out[j] = (f[j - 2] - f[j - 1] * 8.0 + f[j + 1] * 8.0 - f[j + 2]) * h;
    }
    out[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * h;
    out[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * h;
    let m = n - 1;
    out[m] = (f[m] * 25.0 - f[m - 1] * 48.0 + f[m - 2] * 36.0 - f[m - 3] * 16.0 + f[m - 4] * 3.0) * h;
    out[m - 1] = (f[m] * 3.0 + f[m - 1] * 10.0 - f[m - 2] * 18.0 + f[m - 3] * 6.0 - f[m - 4]) * h;
    out
}
