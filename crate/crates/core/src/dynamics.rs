//! Gauge-covariant lattice dynamics.
//!
//! The minimal-coupling Hamiltonian `(p - qA)^2 / 2m + V` is discretized with
//! Peierls link phases `theta_j = q A_{j+1/2} dx / hbar`:
//!
//! ```text
//! (H psi)_j = -t (e^{-i theta_j} psi_{j+1} - 2 psi_j + e^{i theta_{j-1}} psi_{j-1}) + V_j psi_j,
//! t = hbar^2 / (2 m dx^2).
//! ```
//!
//! With this form the two Hamiltonians with and without `A` are conjugate
//! under the diagonal phase `exp(i sum_{l<j} theta_l)`, so the Peierls
//! relation between the two evolved states holds to rounding error at any
//! `dx` and `dt`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{apply_phase, VectorPotential};
use crate::lattice::{Grid1D, PhysicalConstants, WaveFunction};
use crate::tridiag::{CyclicLu, TridiagonalLu};

/// Step size and count for a Cayley run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionParams {
    pub dt: f64,
    pub steps: usize,
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        if self.dt.is_finite() && self.dt > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)))
        }
    }
}

#[derive(Debug, Clone)]
pub struct LatticeHamiltonian {
    grid: Grid1D,
    hbar: f64,
    /// One entry per link: `n - 1` on an open grid, `n` on a ring. The seam
    /// link `n-1 -> 0` of a ring includes the flux twist.
    link_phases: Vec<f64>,
    /// `V_j + hbar^2 / (m dx^2)`.
    onsite: Vec<f64>,
    /// `hbar^2 / (2 m dx^2)`.
    hopping: f64,
    flux_twist: f64,
}

/// Peierls link phases `(q / hbar) int_link A dx`, seam included on a ring.
pub fn link_phases(a: &VectorPotential, consts: &PhysicalConstants) -> Vec<f64> {
    let scale = consts.q / consts.hbar;
    a.link_integrals().into_iter().map(|v| scale * v).collect()
}

pub fn build_hamiltonian(
    grid: &Grid1D,
    a: &VectorPotential,
    potential: Option<&[f64]>,
    flux_twist: f64,
    consts: &PhysicalConstants,
) -> Result<LatticeHamiltonian> {
    grid.ensure_same(a.grid())?;
    consts.validate()?;
    if !grid.is_ring() && flux_twist != 0.0 {
        return Err(Error::TwistOnOpenGrid);
    }
    if !flux_twist.is_finite() {
        return Err(Error::InvalidParameter("non-finite flux twist".into()));
    }
    let n = grid.n();
    let v: Vec<f64> = match potential {
        Some(v) if v.len() != n => {
            return Err(Error::InvalidParameter("scalar potential length mismatch".into()))
        }
        Some(v) if v.iter().any(|x| !x.is_finite()) => {
            return Err(Error::InvalidParameter("non-finite scalar potential".into()))
        }
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let hopping = consts.hbar * consts.hbar / (2.0 * consts.mass * grid.dx() * grid.dx());
    let mut link_phases = link_phases(a, consts);
    if grid.is_ring() {
        link_phases[n - 1] += flux_twist;
    }
    let onsite = v.iter().map(|vj| vj + 2.0 * hopping).collect();
    let h = LatticeHamiltonian {
        grid: grid.clone(),
        hbar: consts.hbar,
        link_phases,
        onsite,
        hopping,
        flux_twist,
    };
    let defect = h.hermiticity_defect();
    if defect > 1e-12 * h.norm_bound() {
        return Err(Error::InvalidParameter(format!(
            "lattice Hamiltonian is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(h)
}

impl LatticeHamiltonian {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn link_phases(&self) -> &[f64] {
        &self.link_phases
    }

    pub fn onsite(&self) -> &[f64] {
        &self.onsite
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn flux_twist(&self) -> f64 {
        self.flux_twist
    }

    /// Total phase around the ring, `sum theta_j` including the twist.
    pub fn closure_phase(&self) -> f64 {
        if self.grid.is_ring() {
            self.link_phases.iter().sum()
        } else {
            0.0
        }
    }

    /// Hopping coefficient `H[j][j+1]` for every link; the seam link of a ring
    /// state with Bloch twist `state_twist` absorbs that twist.
    fn upper_hops(&self, state_twist: f64) -> Vec<Complex64> {
        let n = self.grid.n();
        self.link_phases
            .iter()
            .enumerate()
            .map(|(j, &theta)| {
                let theta = if self.grid.is_ring() && j == n - 1 {
                    theta - state_twist
                } else {
                    theta
                };
                Complex64::from_polar(self.hopping, -theta) * -1.0
            })
            .collect()
    }

    /// `H psi` for the sample vector of a state with the given Bloch twist.
    pub fn apply(&self, amp: &[Complex64], state_twist: f64) -> Vec<Complex64> {
        let n = self.grid.n();
        let up = self.upper_hops(state_twist);
        let mut out: Vec<Complex64> = amp.iter().zip(&self.onsite).map(|(z, e)| z * e).collect();
        for (j, h) in up.iter().enumerate() {
            let k = (j + 1) % n;
            out[j] += h * amp[k];
            out[k] += h.conj() * amp[j];
        }
        out
    }

    /// Dense matrix of `H` acting on untwisted (periodic) samples.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.grid.n();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for j in 0..n {
            m[(j, j)] = Complex64::new(self.onsite[j], 0.0);
        }
        for (j, h) in self.upper_hops(0.0).iter().enumerate() {
            let k = (j + 1) % n;
            m[(j, k)] += h;
            m[(k, j)] += h.conj();
        }
        m
    }

    /// Ascending eigenvalues (dense Hermitian diagonalization).
    pub fn spectrum(&self) -> Vec<f64> {
        let eig = self.to_dense().symmetric_eigenvalues();
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn ground_energy(&self) -> f64 {
        self.spectrum()[0]
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.onsite.iter().map(|e| e.abs()).fold(0.0, f64::max) + 2.0 * self.hopping
    }

    /// `|<u|Hv> - conj(<v|Hu>)|` for two fixed unit probe vectors.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.grid.n();
        let norm = (n as f64).sqrt();
        let u: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, 0.37 * (j * j) as f64) / norm)
            .collect();
        let v: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((1.3 * j as f64).sin(), (0.7 * j as f64).cos()) / norm)
            .collect();
        let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
        };
        let hv = self.apply(&v, 0.0);
        let hu = self.apply(&u, 0.0);
        (dot(&u, &hv) - dot(&v, &hu).conj()).norm()
    }
}

/// `exp(i sum_{l<j} theta_l)` applied to `psi0`, using the link phases of `A`
/// without any flux twist. On a ring the result's Bloch twist absorbs the
/// full loop phase.
pub fn lattice_peierls(
    psi0: &WaveFunction,
    a: &VectorPotential,
    consts: &PhysicalConstants,
) -> Result<WaveFunction> {
    psi0.grid().ensure_same(a.grid())?;
    let theta = link_phases(a, consts);
    let s = cumulative_link_phase(&theta, psi0.grid().n());
    let loop_phase = if psi0.grid().is_ring() {
        theta.iter().sum()
    } else {
        0.0
    };
    apply_phase(psi0, &s, 1.0, loop_phase)
}

fn cumulative_link_phase(theta: &[f64], n: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    s.push(0.0);
    for t in theta.iter().take(n - 1) {
        acc += t;
        s.push(acc);
    }
    s
}

enum Factored {
    Open(TridiagonalLu),
    Ring(CyclicLu),
}

/// Cayley propagator `(1 + i dt H / 2hbar)^-1 (1 - i dt H / 2hbar)` for a fixed
/// Hamiltonian, time step and Bloch twist.
pub struct CayleyPropagator<'h> {
    h: &'h LatticeHamiltonian,
    alpha: f64,
    twist: f64,
    lu: Factored,
}

impl<'h> CayleyPropagator<'h> {
    pub fn new(h: &'h LatticeHamiltonian, dt: f64, state_twist: f64) -> Result<Self> {
        let alpha = dt / (2.0 * h.hbar);
        let n = h.grid.n();
        let i_alpha = Complex64::new(0.0, alpha);
        let up = h.upper_hops(state_twist);
        let diag: Vec<Complex64> = h.onsite.iter().map(|e| 1.0 + i_alpha * e).collect();
        let upper: Vec<Complex64> = up.iter().take(n - 1).map(|u| i_alpha * u).collect();
        let lower: Vec<Complex64> = up.iter().take(n - 1).map(|u| i_alpha * u.conj()).collect();
        let lu = if h.grid.is_ring() {
            let seam = up[n - 1];
            // M[n-1][0] carries the seam hop, M[0][n-1] its conjugate.
            Factored::Ring(CyclicLu::factor(
                &lower,
                &diag,
                &upper,
                i_alpha * seam.conj(),
                i_alpha * seam,
            )?)
        } else {
            Factored::Open(TridiagonalLu::factor(&lower, &diag, &upper)?)
        };
        Ok(Self {
            h,
            alpha,
            twist: state_twist,
            lu,
        })
    }

    pub fn step(&self, amp: &mut [Complex64]) {
        let h_psi = self.h.apply(amp, self.twist);
        let i_alpha = Complex64::new(0.0, self.alpha);
        for (z, hz) in amp.iter_mut().zip(&h_psi) {
            *z -= i_alpha * hz;
        }
        match &self.lu {
            Factored::Open(lu) => lu.solve_in_place(amp),
            Factored::Ring(lu) => lu.solve_in_place(amp),
        }
    }
}

/// Runs `params.steps` Cayley steps. The state is not renormalized between
/// steps.
pub fn evolve(
    psi: &WaveFunction,
    h: &LatticeHamiltonian,
    params: &EvolutionParams,
) -> Result<WaveFunction> {
    psi.grid().ensure_same(&h.grid)?;
    params.validate()?;
    let mut amp = psi.amplitudes().to_vec();
    if params.steps > 0 {
        let prop = CayleyPropagator::new(h, params.dt, psi.twist())?;
        for _ in 0..params.steps {
            prop.step(&mut amp);
        }
    }
    Ok(WaveFunction::from_parts_unchecked(
        psi.grid().clone(),
        amp,
        psi.twist(),
    ))
}

/// `max_j |psi_t_j - exp(i sum_{l<j} theta_l) psi0_t_j|`.
pub fn check_minimal_coupling_relation(
    psi0_t: &WaveFunction,
    psi_t: &WaveFunction,
    a: &VectorPotential,
    consts: &PhysicalConstants,
) -> Result<f64> {
    psi0_t.grid().ensure_same(psi_t.grid())?;
    psi0_t.grid().ensure_same(a.grid())?;
    let theta = link_phases(a, consts);
    let s = cumulative_link_phase(&theta, psi0_t.grid().n());
    Ok(psi_t
        .amplitudes()
        .iter()
        .zip(psi0_t.amplitudes())
        .zip(&s)
        .map(|((u, v), &phase)| (u - v * Complex64::from_polar(1.0, phase)).norm())
        .fold(0.0, f64::max))
}
