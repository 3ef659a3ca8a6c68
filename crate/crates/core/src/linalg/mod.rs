//! Dense linear algebra on phase space ℝ^{2n}.
//!
//! Holds the canonical complex structure `J = [[0, -I], [I, 0]]`, the
//! symplectic and Hamiltonian matrix predicates, a partial-pivoting solver
//! and central-difference Jacobians. Everything here is a pure function of
//! its inputs.

mod matrix;
mod point;

pub use matrix::{LuFactors, SquareMatrix2n};
pub use point::PhasePoint;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A raw residual norm together with the scale used to normalize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorm {
    pub value: f64,
    pub scale: f64,
}

impl ResidualNorm {
    pub fn new(value: f64, scale: f64) -> Self {
        debug_assert!(value >= 0.0 || value.is_nan());
        debug_assert!(scale > 0.0);
        Self { value, scale }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 1.0)
    }

    /// `value / scale`
    pub fn relative(&self) -> f64 {
        self.value / self.scale
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.relative() <= tol
    }
}

/// The canonical complex structure `[[0_n, -I_n], [I_n, 0_n]]`.
pub fn canonical_j(n: usize) -> SquareMatrix2n {
    let mut j = SquareMatrix2n::zeros(n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// `‖bᵀJ + Jb‖_F` with scale `1 + ‖b‖_F`.
pub fn hamiltonian_residual(b: &SquareMatrix2n) -> ResidualNorm {
    let j = canonical_j(b.dim_n());
    let r = &(&b.transpose() * &j) + &(&j * b);
    ResidualNorm::new(r.frobenius_norm(), 1.0 + b.frobenius_norm())
}

pub fn is_hamiltonian(b: &SquareMatrix2n, tol: f64) -> bool {
    hamiltonian_residual(b).passes(tol)
}

/// `‖AᵀJA − J‖_F` with scale `1 + ‖A‖_F²`.
pub fn symplectic_residual(a: &SquareMatrix2n) -> ResidualNorm {
    let j = canonical_j(a.dim_n());
    let r = &(&(&a.transpose() * &j) * a) - &j;
    let na = a.frobenius_norm();
    ResidualNorm::new(r.frobenius_norm(), 1.0 + na * na)
}

pub fn is_symplectic(a: &SquareMatrix2n, tol: f64) -> bool {
    symplectic_residual(a).passes(tol)
}

/// Solves `A x = rhs` by partial-pivoting LU.
pub fn solve_linear(a: &SquareMatrix2n, rhs: &PhasePoint) -> Result<PhasePoint> {
    rhs.check_dim(a.dim_n())?;
    Ok(a.lu()?.solve(rhs))
}

/// Central-difference Jacobian of `g` at `z`.
///
/// The step along coordinate `i` is `ε^{1/3} · max(1, |z_i|)`; column `i`
/// is `(g(z + δ_i e_i) − g(z − δ_i e_i)) / (2 δ_i)`.
pub fn fd_jacobian<G>(g: G, z: &PhasePoint) -> Result<SquareMatrix2n>
where
    G: Fn(&PhasePoint) -> Result<PhasePoint>,
{
    let cbrt_eps = f64::EPSILON.cbrt();
    let mut cols = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let delta = cbrt_eps * z[i].abs().max(1.0);
        let mut plus = z.clone();
        plus[i] += delta;
        let mut minus = z.clone();
        minus[i] -= delta;
        // the representable step, not the nominal one
        let width = plus[i] - minus[i];
        let gp = g(&plus)?;
        let gm = g(&minus)?;
        if !gp.is_finite() || !gm.is_finite() {
            return Err(Error::NonFiniteEvaluation { coordinate: i });
        }
        if gp.len() != z.len() || gm.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                actual: gp.len(),
            });
        }
        cols.push((&gp - &gm).scale(1.0 / width));
    }
    SquareMatrix2n::from_columns(&cols)
}

/// Central-difference gradient of a scalar function, same step rule as [`fd_jacobian`].
pub fn fd_gradient<G>(g: G, z: &PhasePoint) -> Result<PhasePoint>
where
    G: Fn(&PhasePoint) -> Result<f64>,
{
    let cbrt_eps = f64::EPSILON.cbrt();
    let mut out = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let delta = cbrt_eps * z[i].abs().max(1.0);
        let mut plus = z.clone();
        plus[i] += delta;
        let mut minus = z.clone();
        minus[i] -= delta;
        let width = plus[i] - minus[i];
        let (gp, gm) = (g(&plus)?, g(&minus)?);
        if !gp.is_finite() || !gm.is_finite() {
            return Err(Error::NonFiniteEvaluation { coordinate: i });
        }
        out.push((gp - gm) / width);
    }
    Ok(PhasePoint::from_vec_unchecked(out))
}
