//! Weak values of canonical momentum under position post-selection.
//!
//! For pre-selection `psi` and post-selection on the lattice site `|x_j>`,
//! the momentum weak value is the ratio `(p psi)(x_j) / psi(x_j)`. Its real
//! part is the local (phase-gradient) momentum, its imaginary part the
//! osmotic term `hbar/2 d ln|psi|^2 / dx`. Sites where `|psi|^2` falls below
//! a relative threshold are masked instead of divided through.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::VectorPotential;
use crate::lattice::{apply_momentum, Grid1D, PhysicalConstants, WaveFunction};

pub const DEFAULT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WeakValueField {
    grid: Grid1D,
    wv: Vec<Complex64>,
    mask: Vec<bool>,
    threshold: f64,
}

impl WeakValueField {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Weak value at site `j`, `None` where masked.
    pub fn get(&self, j: usize) -> Option<Complex64> {
        self.mask[j].then(|| self.wv[j])
    }

    /// Raw values; masked sites hold NaN.
    pub fn values(&self) -> &[Complex64] {
        &self.wv
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "mask threshold must lie in (0, 1), got {threshold}"
        )))
    }
}

/// Sites whose density is at least `threshold` times the peak density.
pub fn density_mask(psi: &WaveFunction, threshold: f64) -> Vec<bool> {
    let rho = psi.density();
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    rho.iter().map(|&r| !(r < threshold * peak)).collect()
}

pub fn weak_value_momentum(
    psi: &WaveFunction,
    consts: &PhysicalConstants,
    threshold: f64,
) -> Result<WeakValueField> {
    check_threshold(threshold)?;
    let mask = density_mask(psi, threshold);
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked { threshold });
    }
    let p = apply_momentum(psi, consts);
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let wv = p
        .iter()
        .zip(psi.amplitudes())
        .zip(&mask)
        .map(|((pp, z), &ok)| if ok { pp / z } else { nan })
        .collect();
    Ok(WeakValueField {
        grid: psi.grid().clone(),
        wv,
        mask,
        threshold,
    })
}

/// Vector potential recovered from the weak-value difference
/// `<p>_w - <p>_w^(0) = q A`.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    /// Reconstructed `A`; zero at invalid sites.
    pub a_recon: VectorPotential,
    /// True where both weak values are defined.
    pub valid: Vec<bool>,
    pub weak_value: WeakValueField,
    pub weak_value_reference: WeakValueField,
    /// `max |a_recon - a_true|` over valid sites, once a ground truth is attached.
    pub residual_linf: Option<f64>,
    /// `sqrt(sum |a_recon - a_true|^2 dx)` over valid sites.
    pub residual_l2: Option<f64>,
    pub masked_fraction: f64,
    /// `max |Im(wv - wv0)|` over valid sites.
    pub imag_leak_linf: f64,
}

impl ReconstructionReport {
    /// Fills the residual fields against a known potential.
    pub fn with_truth(mut self, truth: &VectorPotential) -> Result<Self> {
        self.a_recon.grid().ensure_same(truth.grid())?;
        let dx = truth.grid().dx();
        let (mut linf, mut l2) = (0.0_f64, 0.0_f64);
        for ((r, t), &ok) in self.a_recon.values().iter().zip(truth.values()).zip(&self.valid) {
            if ok {
                let d = (r - t).abs();
                linf = linf.max(d);
                l2 += d * d * dx;
            }
        }
        self.residual_linf = Some(linf);
        self.residual_l2 = Some(l2.sqrt());
        Ok(self)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&m| m).count()
    }
}

pub fn reconstruct_vector_potential(
    psi: &WaveFunction,
    psi0: &WaveFunction,
    consts: &PhysicalConstants,
    threshold: f64,
) -> Result<ReconstructionReport> {
    psi.grid().ensure_same(psi0.grid())?;
    if consts.q == 0.0 {
        return Err(Error::InvalidParameter(
            "q = 0: the weak-value difference carries no information about A".into(),
        ));
    }
    let wv = weak_value_momentum(psi, consts, threshold)?;
    let wv0 = weak_value_momentum(psi0, consts, threshold)?;
    let grid = psi.grid().clone();
    let n = grid.n();
    let mut a = vec![0.0; n];
    let mut valid = vec![false; n];
    let mut leak = 0.0_f64;
    for j in 0..n {
        if let (Some(w), Some(w0)) = (wv.get(j), wv0.get(j)) {
            let d = w - w0;
            a[j] = d.re / consts.q;
            leak = leak.max(d.im.abs());
            valid[j] = true;
        }
    }
    let n_valid = valid.iter().filter(|&&v| v).count();
    if n_valid == 0 {
        return Err(Error::AllMasked { threshold });
    }
    Ok(ReconstructionReport {
        a_recon: VectorPotential::new(grid, a)?,
        valid,
        weak_value: wv,
        weak_value_reference: wv0,
        residual_linf: None,
        residual_l2: None,
        masked_fraction: 1.0 - n_valid as f64 / n as f64,
        imag_leak_linf: leak,
    })
}

/// Eigenvalue field of the position-commuting part of momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutingMomentum {
    /// `Re <p>_w` at valid sites, NaN elsewhere.
    pub p_c: Vec<f64>,
    pub mask: Vec<bool>,
}

impl CommutingMomentum {
    /// `int p_c |psi|^2 dx` over unmasked sites.
    pub fn first_moment(&self, psi: &WaveFunction) -> f64 {
        let f: Vec<f64> = self
            .p_c
            .iter()
            .zip(psi.density())
            .zip(&self.mask)
            .map(|((p, r), &ok)| if ok { p * r } else { 0.0 })
            .collect();
        psi.grid().integrate(&f)
    }
}

impl From<&WeakValueField> for CommutingMomentum {
    fn from(wv: &WeakValueField) -> Self {
        Self {
            p_c: wv.values().iter().map(|z| z.re).collect(),
            mask: wv.mask().to_vec(),
        }
    }
}

pub fn hall_commuting_momentum(
    psi: &WaveFunction,
    consts: &PhysicalConstants,
    threshold: f64,
) -> Result<CommutingMomentum> {
    Ok(CommutingMomentum::from(&weak_value_momentum(psi, consts, threshold)?))
}

/// Position-projector weak values with post-selection on zero momentum.
#[derive(Debug, Clone)]
pub struct ProjectorWeakValues {
    /// `<0|x_j><x_j|psi> / <0|psi>` as a density in `x`.
    pub weak_values: Vec<Complex64>,
    /// `1 / sum_j psi_j dx`: the constant relating weak values to amplitudes.
    pub scale: Complex64,
    /// The weak values renormalized into a state.
    pub recovered: WaveFunction,
}

const MIN_ZERO_MODE_OVERLAP: f64 = 1e-14;

/// Reads the wavefunction off as weak values of `|x><x|`.
pub fn wavefunction_from_weak_values(psi: &WaveFunction) -> Result<ProjectorWeakValues> {
    let grid = psi.grid();
    if !grid.is_ring() {
        return Err(Error::NotARing);
    }
    if psi.twist() != 0.0 {
        return Err(Error::InvalidParameter(
            "a twisted ring state has no zero-momentum component".into(),
        ));
    }
    let l = grid.length();
    let sum: Complex64 = psi.amplitudes().iter().sum::<Complex64>() * grid.dx();
    let overlap = sum / l.sqrt();
    if overlap.norm_sqr() < MIN_ZERO_MODE_OVERLAP {
        return Err(Error::ZeroOverlap {
            overlap: overlap.norm_sqr(),
        });
    }
    // <0|x_j> = 1/sqrt(L), so the weak value reduces to psi_j / sum(psi dx).
    let weak_values: Vec<Complex64> = psi
        .amplitudes()
        .iter()
        .map(|z| z / (overlap * l.sqrt()))
        .collect();
    let recovered = WaveFunction::new(grid.clone(), weak_values.clone())?;
    Ok(ProjectorWeakValues {
        weak_values,
        scale: 1.0 / sum,
        recovered,
    })
}
