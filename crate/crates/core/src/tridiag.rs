//! Complex tridiagonal and cyclic tridiagonal solvers.
//!
//! Both are factorized once and then reused for every right-hand side, which
//! is the access pattern of a fixed-step Crank-Nicolson run. The cyclic
//! variant folds the two corner entries into a Sherman-Morrison correction.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pivots smaller than this abort the factorization.
pub const MIN_PIVOT: f64 = 1e-300;

/// Thomas-algorithm LU factors of a tridiagonal matrix.
///
/// `lower[j] = M[j+1][j]`, `upper[j] = M[j][j+1]`.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<Complex64>,
    c_prime: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

impl TridiagonalLu {
    pub fn factor(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 2 && lower.len() == n - 1 && upper.len() == n - 1);
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = diag[0];
        for j in 0..n {
            if j > 0 {
                pivot = diag[j] - lower[j - 1] * c_prime[j - 1];
            }
            if pivot.norm() < MIN_PIVOT {
                return Err(Error::SolverBreakdown { pivot: pivot.norm() });
            }
            inv_pivot[j] = 1.0 / pivot;
            if j + 1 < n {
                c_prime[j] = upper[j] * inv_pivot[j];
            }
        }
        Ok(Self {
            lower: lower.to_vec(),
            c_prime,
            inv_pivot,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [Complex64]) {
        let n = self.len();
        rhs[0] *= self.inv_pivot[0];
        for j in 1..n {
            rhs[j] = (rhs[j] - self.lower[j - 1] * rhs[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            rhs[j] = rhs[j] - self.c_prime[j] * rhs[j + 1];
        }
    }
}

/// Factors of a tridiagonal matrix with corner entries
/// `top_right = M[0][n-1]` and `bottom_left = M[n-1][0]`.
#[derive(Debug, Clone)]
pub struct CyclicLu {
    inner: TridiagonalLu,
    gamma: Complex64,
    top_right: Complex64,
    z: Vec<Complex64>,
    denom: Complex64,
}

impl CyclicLu {
    pub fn factor(
        lower: &[Complex64],
        diag: &[Complex64],
        upper: &[Complex64],
        top_right: Complex64,
        bottom_left: Complex64,
    ) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 3);
        let gamma = -diag[0];
        if gamma.norm() < MIN_PIVOT {
            return Err(Error::SolverBreakdown { pivot: gamma.norm() });
        }
        let mut modified = diag.to_vec();
        modified[0] = diag[0] - gamma;
        modified[n - 1] = diag[n - 1] - bottom_left * top_right / gamma;
        let inner = TridiagonalLu::factor(lower, &modified, upper)?;
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        z[0] = gamma;
        z[n - 1] = bottom_left;
        inner.solve_in_place(&mut z);
        let denom = 1.0 + z[0] + top_right * z[n - 1] / gamma;
        if denom.norm() < MIN_PIVOT {
            return Err(Error::SolverBreakdown { pivot: denom.norm() });
        }
        Ok(Self {
            inner,
            gamma,
            top_right,
            z,
            denom,
        })
    }

    pub fn solve_in_place(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        self.inner.solve_in_place(rhs);
        let fact = (rhs[0] + self.top_right * rhs[n - 1] / self.gamma) / self.denom;
        for (x, z) in rhs.iter_mut().zip(&self.z) {
            *x -= fact * z;
        }
    }
}
