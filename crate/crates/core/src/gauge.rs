//! Vector potentials, the Peierls phase factor, gauge transformations and
//! ring flux.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{derivative_real, Grid1D, PhysicalConstants, Topology, WaveFunction};
use crate::spectral;

/// Analytic vector-potential profiles addressable from a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialPreset {
    Zero,
    Constant {
        a0: f64,
    },
    /// `A(x) = amplitude * exp(-((x - center) / width)^2)`
    GaussianBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Linear {
        slope: f64,
    },
}

impl PotentialPreset {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PotentialPreset::Zero => 0.0,
            PotentialPreset::Constant { a0 } => a0,
            PotentialPreset::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let u = (x - center) / width;
                amplitude * (-u * u).exp()
            }
            PotentialPreset::Linear { slope } => slope * x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PotentialPreset::Zero => true,
            PotentialPreset::Constant { a0 } => a0.is_finite(),
            PotentialPreset::GaussianBump {
                amplitude,
                center,
                width,
            } => amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0,
            PotentialPreset::Linear { slope } => slope.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad potential preset {self:?}")))
        }
    }
}

/// Real field `A(x)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPotential {
    grid: Grid1D,
    a: Vec<f64>,
    preset: Option<PotentialPreset>,
}

impl VectorPotential {
    pub fn new(grid: Grid1D, a: Vec<f64>) -> Result<Self> {
        if a.len() != grid.n() {
            return Err(Error::InvalidParameter(format!(
                "potential length {} does not match grid size {}",
                a.len(),
                grid.n()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite vector potential".into()));
        }
        Ok(Self {
            grid,
            a,
            preset: None,
        })
    }

    pub fn zero(grid: &Grid1D) -> Self {
        Self {
            grid: grid.clone(),
            a: vec![0.0; grid.n()],
            preset: Some(PotentialPreset::Zero),
        }
    }

    pub fn from_preset(grid: &Grid1D, preset: PotentialPreset) -> Result<Self> {
        preset.validate()?;
        let a = grid.xs().into_iter().map(|x| preset.eval(x)).collect();
        Ok(Self {
            grid: grid.clone(),
            a,
            preset: Some(preset),
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn preset(&self) -> Option<&PotentialPreset> {
        self.preset.as_ref()
    }

    /// Integral of `A` over each link `[x_j, x_{j+1}]`; a ring also has the
    /// seam link from the last site back to the first.
    ///
    /// Open grids use the trapezoid rule with the Euler-Maclaurin endpoint
    /// correction `-dx^2/12 (A'_{j+1} - A'_j)`. On a ring the trigonometric
    /// interpolant of `A` is integrated exactly.
    pub fn link_integrals(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        let a = &self.a;
        match self.grid.topology() {
            Topology::Open => {
                let da = derivative_real(&self.grid, a);
                (0..a.len() - 1)
                    .map(|j| 0.5 * dx * (a[j] + a[j + 1]) - dx * dx / 12.0 * (da[j + 1] - da[j]))
                    .collect()
            }
            Topology::Ring => {
                let s = spectral::antiderivative(a, self.grid.length());
                let n = a.len();
                let total = a.iter().sum::<f64>() * dx;
                (0..n)
                    .map(|j| if j + 1 < n { s[j + 1] - s[j] } else { total + s[0] - s[j] })
                    .collect()
            }
        }
    }

    /// Cumulative integral `S_j = int_{x_min}^{x_j} A dx'`, the running sum of
    /// [`link_integrals`](Self::link_integrals). On a ring the spectral
    /// derivative of `S` returns `A` at the sites.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        match self.grid.topology() {
            Topology::Open => {
                let mut acc = 0.0;
                std::iter::once(0.0)
                    .chain(self.link_integrals().into_iter().map(|v| {
                        acc += v;
                        acc
                    }))
                    .collect()
            }
            Topology::Ring => spectral::antiderivative(&self.a, self.grid.length()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugePreset {
    Constant {
        value: f64,
    },
    /// `slope * x`; open grids only.
    Linear {
        slope: f64,
    },
    /// `amplitude * sin(2 pi mode (x - x_min) / L)`; `mode` is an integer so
    /// the function is single-valued on a ring.
    Sine {
        amplitude: f64,
        mode: i64,
    },
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

/// Static gauge function `Lambda(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunction {
    grid: Grid1D,
    lambda: Vec<f64>,
    /// Linear part on a ring: `Lambda(x + L) = Lambda(x) + slope L`.
    slope: f64,
}

impl GaugeFunction {
    /// Wraps sampled values. On a ring the samples are taken as one period of
    /// a single-valued function.
    pub fn new(grid: Grid1D, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != grid.n() {
            return Err(Error::InvalidParameter("gauge function length mismatch".into()));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite gauge function".into()));
        }
        Ok(Self {
            grid,
            lambda,
            slope: 0.0,
        })
    }

    pub fn from_preset(grid: &Grid1D, preset: &GaugePreset) -> Result<Self> {
        let l = grid.length();
        let x_min = grid.x_min();
        let values = match *preset {
            GaugePreset::Constant { value } => vec![value; grid.n()],
            GaugePreset::Linear { slope } => {
                let values = grid.xs().into_iter().map(|x| slope * (x - x_min)).collect();
                let mut f = Self::new(grid.clone(), values)?;
                if grid.is_ring() {
                    f.slope = slope;
                }
                return Ok(f);
            }
            GaugePreset::Sine { amplitude, mode } => grid
                .xs()
                .into_iter()
                .map(|x| amplitude * (2.0 * PI * mode as f64 * (x - x_min) / l).sin())
                .collect(),
            GaugePreset::Gaussian {
                amplitude,
                center,
                width,
            } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidParameter("gauge width must be > 0".into()));
                }
                grid.xs()
                    .into_iter()
                    .map(|x| {
                        let u = (x - center) / width;
                        amplitude * (-u * u).exp()
                    })
                    .collect()
            }
        };
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.lambda
    }

    /// Winding slope of a ring gauge function; zero on open grids.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// `d Lambda / dx` with the grid's derivative scheme.
    pub fn gradient(&self) -> Vec<f64> {
        if self.slope == 0.0 {
            return derivative_real(&self.grid, &self.lambda);
        }
        let x_min = self.grid.x_min();
        let periodic: Vec<f64> = self
            .lambda
            .iter()
            .zip(self.grid.xs())
            .map(|(l, x)| l - self.slope * (x - x_min))
            .collect();
        derivative_real(&self.grid, &periodic)
            .into_iter()
            .map(|d| d + self.slope)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    /// `sum_j a_j dx` around the ring.
    pub loop_integral: f64,
    /// `q * loop_integral / hbar`, unwrapped.
    pub ab_phase: f64,
    /// `ab_phase` reduced to `[0, 2 pi)`.
    pub ab_phase_mod: f64,
}

/// `Psi = exp(i (q/hbar) S) Psi0` with `S` the cumulative integral of `A`
/// anchored at `x_min`.
///
/// On a ring with non-quantized flux the result is a Bloch-twisted state
/// whose twist is advanced by the Aharonov-Bohm phase.
pub fn peierls_phase(
    psi0: &WaveFunction,
    a: &VectorPotential,
    consts: &PhysicalConstants,
) -> Result<WaveFunction> {
    psi0.grid().ensure_same(a.grid())?;
    let s = a.cumulative_integral();
    apply_phase(psi0, &s, consts.q / consts.hbar, ring_flux_phase(a, consts))
}

fn ring_flux_phase(a: &VectorPotential, consts: &PhysicalConstants) -> f64 {
    if a.grid().is_ring() {
        consts.q * a.values().iter().sum::<f64>() * a.grid().dx() / consts.hbar
    } else {
        0.0
    }
}

/// Multiplies by `exp(i scale s_j)` and advances the twist.
pub(crate) fn apply_phase(
    psi: &WaveFunction,
    s: &[f64],
    scale: f64,
    extra_twist: f64,
) -> Result<WaveFunction> {
    let amp: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .zip(s)
        .map(|(z, &phase)| z * Complex64::from_polar(1.0, scale * phase))
        .collect();
    // A pure phase keeps the norm; skipping renormalization keeps A = 0 bit-exact.
    let twist = if psi.grid().is_ring() {
        crate::lattice::reduce_angle(psi.twist() + extra_twist)
    } else {
        0.0
    };
    Ok(WaveFunction::from_parts_unchecked(psi.grid().clone(), amp, twist))
}

/// `Psi' = exp(i (q/hbar) Lambda) Psi`, `A' = A + d Lambda/dx`.
///
/// A ring gauge function may wind only if `exp(i q Lambda / hbar)` stays
/// single-valued, i.e. `q slope L / (2 pi hbar)` is an integer.
pub fn gauge_transform(
    psi: &WaveFunction,
    a: &VectorPotential,
    lambda: &GaugeFunction,
    consts: &PhysicalConstants,
) -> Result<(WaveFunction, VectorPotential)> {
    psi.grid().ensure_same(a.grid())?;
    psi.grid().ensure_same(lambda.grid())?;
    if lambda.slope != 0.0 {
        let winding = consts.q * lambda.slope * psi.grid().length() / (2.0 * PI * consts.hbar);
        if (winding - winding.round()).abs() > 1e-9 {
            return Err(Error::NotSingleValued);
        }
    }
    let psi_t = apply_phase(psi, lambda.values(), consts.q / consts.hbar, 0.0)?;
    let a_t: Vec<f64> = a
        .values()
        .iter()
        .zip(lambda.gradient())
        .map(|(a, d)| a + d)
        .collect();
    Ok((psi_t, VectorPotential::new(a.grid().clone(), a_t)?))
}

pub fn loop_flux(a: &VectorPotential, consts: &PhysicalConstants) -> Result<FluxReport> {
    if !a.grid().is_ring() {
        return Err(Error::NotARing);
    }
    let loop_integral = a.values().iter().sum::<f64>() * a.grid().dx();
    let ab_phase = consts.q * loop_integral / consts.hbar;
    Ok(FluxReport {
        loop_integral,
        ab_phase,
        ab_phase_mod: crate::lattice::reduce_angle(ab_phase),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{prepare_state, StateSpec};

    fn packet(grid: &Grid1D) -> WaveFunction {
        prepare_state(
            grid,
            &StateSpec::Gaussian {
                x0: 0.5,
                k0: 1.0,
                sigma: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_potential_is_identity() {
        for grid in [
            Grid1D::ring(256, -10.0, 10.0).unwrap(),
            Grid1D::open(256, -10.0, 10.0).unwrap(),
        ] {
            let psi0 = packet(&grid);
            let psi = peierls_phase(&psi0, &VectorPotential::zero(&grid), &Default::default()).unwrap();
            assert_eq!(psi.amplitudes(), psi0.amplitudes());
            assert_eq!(psi.twist(), 0.0);
        }
    }

    #[test]
    fn constant_potential_gives_linear_phase() {
        let grid = Grid1D::open(300, -10.0, 10.0).unwrap();
        let psi0 = packet(&grid);
        let a = VectorPotential::from_preset(&grid, PotentialPreset::Constant { a0: 0.4 }).unwrap();
        let consts = PhysicalConstants::new(1.0, 1.0, -1.5).unwrap();
        let psi = peierls_phase(&psi0, &a, &consts).unwrap();
        for j in 0..grid.n() {
            let expect = psi0.amplitudes()[j]
                * Complex64::from_polar(1.0, consts.q * 0.4 * (grid.x(j) - grid.x_min()));
            assert!((psi.amplitudes()[j] - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn peierls_preserves_modulus() {
        let grid = Grid1D::ring(128, -8.0, 8.0).unwrap();
        let psi0 = packet(&grid);
        let a = VectorPotential::from_preset(
            &grid,
            PotentialPreset::GaussianBump {
                amplitude: 0.7,
                center: 0.0,
                width: 2.0,
            },
        )
        .unwrap();
        let psi = peierls_phase(&psi0, &a, &Default::default()).unwrap();
        for (u, v) in psi.amplitudes().iter().zip(psi0.amplitudes()) {
            assert!((u.norm() - v.norm()).abs() <= 1e-15 * v.norm().max(1e-300));
        }
        // Non-quantized flux lands in the Bloch twist.
        let flux = loop_flux(&a, &Default::default()).unwrap();
        assert!((psi.twist() - flux.ab_phase_mod).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_detected() {
        let g1 = Grid1D::ring(128, -8.0, 8.0).unwrap();
        let g2 = Grid1D::ring(128, -8.0, 8.5).unwrap();
        let err = peierls_phase(&packet(&g1), &VectorPotential::zero(&g2), &Default::default());
        assert!(matches!(err, Err(Error::GridMismatch)));
    }

    #[test]
    fn constant_gauge_is_rigid_phase() {
        let grid = Grid1D::ring(128, -8.0, 8.0).unwrap();
        let psi = packet(&grid);
        let a = VectorPotential::from_preset(&grid, PotentialPreset::Constant { a0: 0.2 }).unwrap();
        let lam = GaugeFunction::from_preset(&grid, &GaugePreset::Constant { value: 1.3 }).unwrap();
        let (psi_t, a_t) = gauge_transform(&psi, &a, &lam, &Default::default()).unwrap();
        let phase = Complex64::from_polar(1.0, 1.3);
        for (u, v) in psi_t.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((u - v * phase).norm() < 1e-15);
        }
        for v in a_t.values() {
            assert!((v - 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_gauge_shifts_potential_by_slope() {
        let grid = Grid1D::open(200, -5.0, 5.0).unwrap();
        let psi = packet(&grid);
        let a = VectorPotential::zero(&grid);
        let lam = GaugeFunction::from_preset(&grid, &GaugePreset::Linear { slope: 0.35 }).unwrap();
        let (_, a_t) = gauge_transform(&psi, &a, &lam, &Default::default()).unwrap();
        for v in &a_t.values()[2..grid.n() - 2] {
            assert!((v - 0.35).abs() < 1e-12);
        }
        let ring = Grid1D::ring(200, -5.0, 5.0).unwrap();
        let psi = packet(&ring);
        let lam = GaugeFunction::from_preset(&ring, &GaugePreset::Linear { slope: 0.35 }).unwrap();
        assert!(matches!(
            gauge_transform(&psi, &VectorPotential::zero(&ring), &lam, &Default::default()),
            Err(Error::NotSingleValued)
        ));
    }

    #[test]
    fn loop_flux_of_constant_and_open_grid_error() {
        let grid = Grid1D::ring(100, 0.0, 7.0).unwrap();
        let a = VectorPotential::from_preset(&grid, PotentialPreset::Constant { a0: 0.3 }).unwrap();
        let f = loop_flux(&a, &Default::default()).unwrap();
        assert!((f.loop_integral - 2.1).abs() < 1e-13);
        assert!((f.ab_phase - 2.1).abs() < 1e-13);
        let zero = loop_flux(&VectorPotential::zero(&grid), &Default::default()).unwrap();
        assert_eq!((zero.loop_integral, zero.ab_phase, zero.ab_phase_mod), (0.0, 0.0, 0.0));
        let open = Grid1D::open(100, 0.0, 7.0).unwrap();
        assert!(matches!(
            loop_flux(&VectorPotential::zero(&open), &Default::default()),
            Err(Error::NotARing)
        ));
    }
}
