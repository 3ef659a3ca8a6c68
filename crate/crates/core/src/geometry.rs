//! Consistent implicit maps.
//!
//! An implicit step `z_k ↦ z_{k+1}` is *consistent* when two local
//! diffeomorphisms `ψ₁, ψ₂` send both endpoints to a common consistency point,
//! `z̄ = ψ₁(z_k) = ψ₂(z_{k+1})`, and tend to the identity as `z_{k+1} → z_k`.
//! The explicit counterpart is the consistency map `ψ = ψ₂⁻¹ ∘ ψ₁`.
//!
//! This module evaluates the quantities attached to such a pair at concrete
//! points: the convex combination `ρ = a ψ₁(z_k) + (1−a) ψ₂(z_{k+1})`, the
//! tangent identity `a Tψ₁ v₁ + (1−a) Tψ₂ v₂ = v`, the interleaving condition
//! `Tψ₁⁻ᵀ J Tψ₁⁻¹ = Tψ₂⁻ᵀ J Tψ₂⁻¹`, and the Hamiltonian-operator residual of
//! `Tψ₁ − Tψ₂`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    canonical_j, fd_jacobian, hamiltonian_residual, symplectic_residual, PhasePoint, ResidualNorm, SquareMatrix2n,
};
use crate::schemes::{check_rule_conditions, ConsistencyRule};
use crate::systems::{vector_field, Harmonic, HamiltonianSystem};

/// A local diffeomorphism of phase space with an analytic tangent map.
pub trait LocalMap: Send + Sync {
    fn dim_n(&self) -> usize;

    fn apply(&self, z: &PhasePoint) -> Result<PhasePoint>;

    fn apply_inverse(&self, z: &PhasePoint) -> Result<PhasePoint>;

    fn tangent(&self, z: &PhasePoint) -> Result<SquareMatrix2n>;
}

/// `z ↦ M z`
#[derive(Debug, Clone)]
pub struct LinearMap(pub SquareMatrix2n);

impl LocalMap for LinearMap {
    fn dim_n(&self) -> usize {
        self.0.dim_n()
    }

    fn apply(&self, z: &PhasePoint) -> Result<PhasePoint> {
        z.check_dim(self.dim_n())?;
        Ok(self.0.mul_vec(z))
    }

    fn apply_inverse(&self, z: &PhasePoint) -> Result<PhasePoint> {
        z.check_dim(self.dim_n())?;
        Ok(self.0.lu()?.solve(z))
    }

    fn tangent(&self, _z: &PhasePoint) -> Result<SquareMatrix2n> {
        Ok(self.0.clone())
    }
}

/// `z ↦ M z + c`
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub matrix: SquareMatrix2n,
    pub offset: PhasePoint,
}

impl LocalMap for AffineMap {
    fn dim_n(&self) -> usize {
        self.matrix.dim_n()
    }

    fn apply(&self, z: &PhasePoint) -> Result<PhasePoint> {
        z.check_dim(self.dim_n())?;
        Ok(&self.matrix.mul_vec(z) + &self.offset)
    }

    fn apply_inverse(&self, z: &PhasePoint) -> Result<PhasePoint> {
        z.check_dim(self.dim_n())?;
        Ok(self.matrix.lu()?.solve(&(z - &self.offset)))
    }

    fn tangent(&self, _z: &PhasePoint) -> Result<SquareMatrix2n> {
        Ok(self.matrix.clone())
    }
}

/// Symplectic kick `(q, p) ↦ (q, p − s·sin q)`, componentwise.
#[derive(Debug, Clone, Copy)]
pub struct KickMap {
    pub n: usize,
    pub strength: f64,
}

impl LocalMap for KickMap {
    fn dim_n(&self) -> usize {
        self.n
    }

    fn apply(&self, z: &PhasePoint) -> Result<PhasePoint> {
        z.check_dim(self.n)?;
        let mut out = z.clone();
        for i in 0..self.n {
            out[self.n + i] -= self.strength * z[i].sin();
        }
        Ok(out)
    }

    fn apply_inverse(&self, z: &PhasePoint) -> Result<PhasePoint> {
        z.check_dim(self.n)?;
        let mut out = z.clone();
        for i in 0..self.n {
            out[self.n + i] += self.strength * z[i].sin();
        }
        Ok(out)
    }

    fn tangent(&self, z: &PhasePoint) -> Result<SquareMatrix2n> {
        z.check_dim(self.n)?;
        let mut t = SquareMatrix2n::identity(self.n);
        for i in 0..self.n {
            t[(self.n + i, i)] = -self.strength * z[i].cos();
        }
        Ok(t)
    }
}

/// `outer ∘ inner`
#[derive(Clone)]
pub struct ComposedMap {
    pub outer: Arc<dyn LocalMap>,
    pub inner: Arc<dyn LocalMap>,
}

impl LocalMap for ComposedMap {
    fn dim_n(&self) -> usize {
        self.inner.dim_n()
    }

    fn apply(&self, z: &PhasePoint) -> Result<PhasePoint> {
        self.outer.apply(&self.inner.apply(z)?)
    }

    fn apply_inverse(&self, z: &PhasePoint) -> Result<PhasePoint> {
        self.inner.apply_inverse(&self.outer.apply_inverse(z)?)
    }

    fn tangent(&self, z: &PhasePoint) -> Result<SquareMatrix2n> {
        let inner_z = self.inner.apply(z)?;
        Ok(&self.outer.tangent(&inner_z)? * &self.inner.tangent(z)?)
    }
}

/// The pair `(ψ₁, ψ₂)` and weight `a` describing a consistent implicit map.
#[derive(Clone)]
pub struct ConsistencyDecomposition {
    psi1: Arc<dyn LocalMap>,
    psi2: Arc<dyn LocalMap>,
    weight_a: f64,
    label: String,
}

impl fmt::Debug for ConsistencyDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConsistencyDecomposition")
            .field("label", &self.label)
            .field("weight_a", &self.weight_a)
            .field("dim_n", &self.dim_n())
            .finish()
    }
}

impl ConsistencyDecomposition {
    pub fn new(
        psi1: Arc<dyn LocalMap>,
        psi2: Arc<dyn LocalMap>,
        weight_a: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight_a) {
            return Err(Error::BadParams(format!("weight a must lie in [0, 1], got {weight_a}")));
        }
        if psi1.dim_n() != psi2.dim_n() {
            return Err(Error::DimensionMismatch {
                expected: 2 * psi1.dim_n(),
                actual: 2 * psi2.dim_n(),
            });
        }
        Ok(Self {
            psi1,
            psi2,
            weight_a,
            label: label.into(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let id: Arc<dyn LocalMap> = Arc::new(LinearMap(SquareMatrix2n::identity(n)));
        Self::new(id.clone(), id, 0.5, "identity").expect("valid weight")
    }

    /// Exact half-flows of a harmonic oscillator: `ψ₁ = φ^{h/2}`, `ψ₂ = φ^{−h/2}`.
    /// Consistent for the pair `(z, φ^h(z))`.
    pub fn harmonic_flow(sys: &Harmonic, h: f64) -> Self {
        Self::new(
            Arc::new(LinearMap(sys.flow_matrix(0.5 * h))),
            Arc::new(LinearMap(sys.flow_matrix(-0.5 * h))),
            0.5,
            format!("harmonic-flow(h={h})"),
        )
        .expect("valid weight")
    }

    pub fn with_weight(&self, weight_a: f64) -> Result<Self> {
        Self::new(self.psi1.clone(), self.psi2.clone(), weight_a, self.label.clone())
    }

    pub fn dim_n(&self) -> usize {
        self.psi1.dim_n()
    }

    pub fn weight_a(&self) -> f64 {
        self.weight_a
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn psi1(&self) -> &dyn LocalMap {
        self.psi1.as_ref()
    }

    pub fn psi2(&self) -> &dyn LocalMap {
        self.psi2.as_ref()
    }

    /// `ψ₂⁻¹(ψ₁(z_k))`, the image of `z_k` under the consistency map.
    pub fn consistent_partner(&self, z_k: &PhasePoint) -> Result<PhasePoint> {
        self.psi2.apply_inverse(&self.psi1.apply(z_k)?)
    }

    /// Tangent of the consistency map, `Tψ₂(z_next)⁻¹ · Tψ₁(z_k)`.
    pub fn consistency_map_tangent(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<SquareMatrix2n> {
        let t1 = self.psi1.tangent(z_k)?;
        self.psi2.tangent(z_next)?.solve_matrix(&t1)
    }

    fn tangents(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<(SquareMatrix2n, SquareMatrix2n)> {
        Ok((self.psi1.tangent(z_k)?, self.psi2.tangent(z_next)?))
    }

    /// Largest relative gap between the analytic tangents and central differences.
    pub fn tangent_fd_check(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<f64> {
        let mut worst = 0.0f64;
        for (map, z) in [(&self.psi1, z_k), (&self.psi2, z_next)] {
            let analytic = map.tangent(z)?;
            let numeric = fd_jacobian(|x| map.apply(x), z)?;
            worst = worst.max(analytic.max_abs_diff(&numeric) / analytic.frobenius_norm().max(1.0));
        }
        Ok(worst)
    }
}

/// Produces the decomposition attached to a step pair `(z_k, z_next)`.
pub trait DecompositionFamily {
    fn at_pair(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<ConsistencyDecomposition>;
}

impl DecompositionFamily for ConsistencyDecomposition {
    fn at_pair(&self, _z_k: &PhasePoint, _z_next: &PhasePoint) -> Result<ConsistencyDecomposition> {
        Ok(self.clone())
    }
}

impl<F> DecompositionFamily for F
where
    F: Fn(&PhasePoint, &PhasePoint) -> Result<ConsistencyDecomposition>,
{
    fn at_pair(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<ConsistencyDecomposition> {
        self(z_k, z_next)
    }
}

/// `a ψ₁(z_k) + (1−a) ψ₂(z_next)`
pub fn rho_combination(dec: &ConsistencyDecomposition, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<PhasePoint> {
    let n = dec.dim_n();
    z_k.check_dim(n)?;
    z_next.check_dim(n)?;
    let a = dec.weight_a;
    Ok(dec.psi1.apply(z_k)?.scale(a).axpy(1.0 - a, &dec.psi2.apply(z_next)?))
}

/// For each radius `r`, probes `z_next` on the sphere `|z_next − z| = r`
/// (± each axis and ± the normalized diagonal), rebuilds the decomposition
/// for the pair and returns `max ‖ψ_i(·) − id‖∞` over probes.
pub fn consistency_limit_check<F: DecompositionFamily + ?Sized>(
    family: &F,
    z: &PhasePoint,
    radii: &[f64],
) -> Result<Vec<f64>> {
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::BadParams("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadParams("radii must be strictly decreasing".into()));
    }
    let dim = z.len();
    let mut directions: Vec<PhasePoint> = (0..dim).map(|i| PhasePoint::unit(z.dim_n(), i)).collect();
    directions.push(PhasePoint::from_vec_unchecked(vec![1.0 / (dim as f64).sqrt(); dim]));
    let directions: Vec<PhasePoint> = directions
        .iter()
        .flat_map(|d| [d.clone(), -d])
        .collect();

    radii
        .iter()
        .map(|&r| {
            let mut worst = 0.0f64;
            for d in &directions {
                let z_next = z.axpy(r, d);
                let dec = family.at_pair(z, &z_next)?;
                let dev1 = (&dec.psi1.apply(z)? - z).norm_inf();
                let dev2 = (&dec.psi2.apply(&z_next)? - &z_next).norm_inf();
                worst = worst.max(dev1).max(dev2);
            }
            Ok(worst)
        })
        .collect()
}

/// Largest `|ψ₁(z_k) − ψ₂(z_next)|∞` accepted as a common consistency point,
/// relative to `max(1, |z̄|∞)`.
pub const CONSISTENCY_GAP_LIMIT: f64 = 1e-10;

fn require_consistency_point(dec: &ConsistencyDecomposition, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<()> {
    let w1 = dec.psi1.apply(z_k)?;
    let w2 = dec.psi2.apply(z_next)?;
    let gap = (&w1 - &w2).norm_inf();
    if gap > CONSISTENCY_GAP_LIMIT * w1.norm_inf().max(1.0) {
        return Err(Error::NoConsistencyPoint { gap });
    }
    Ok(())
}

/// `‖a Tψ₁ v₁ + (1−a) Tψ₂ v₂ − v‖ / (1 + ‖v‖)` with `v_i = Tψ_i⁻¹ v`.
pub fn tangent_identity_residual(
    dec: &ConsistencyDecomposition,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
    v: &PhasePoint,
) -> Result<ResidualNorm> {
    v.check_dim(dec.dim_n())?;
    require_consistency_point(dec, z_k, z_next)?;
    let (t1, t2) = dec.tangents(z_k, z_next)?;
    let v1 = t1.lu()?.solve(v);
    let v2 = t2.lu()?.solve(v);
    let a = dec.weight_a;
    let recombined = t1.mul_vec(&v1).scale(a).axpy(1.0 - a, &t2.mul_vec(&v2));
    Ok(ResidualNorm::new((&recombined - v).norm2(), 1.0 + v.norm2()))
}

/// `(res_inv, res_fwd)`: normalized `‖Tψ₁⁻ᵀJTψ₁⁻¹ − Tψ₂⁻ᵀJTψ₂⁻¹‖_F` and
/// `‖Tψ₁ᵀJTψ₁ − Tψ₂ᵀJTψ₂‖_F`, each scaled by `1 + ‖·₁‖_F² + ‖·₂‖_F²` of the
/// matrices involved.
pub fn interleave_residual(
    dec: &ConsistencyDecomposition,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
) -> Result<(ResidualNorm, ResidualNorm)> {
    let (t1, t2) = dec.tangents(z_k, z_next)?;
    let j = canonical_j(dec.dim_n());
    let pullback = |m: &SquareMatrix2n| &(&m.transpose() * &j) * m;
    let scaled = |x: &SquareMatrix2n, y: &SquareMatrix2n| {
        let (nx, ny) = (x.frobenius_norm(), y.frobenius_norm());
        let diff = &pullback(x) - &pullback(y);
        ResidualNorm::new(diff.frobenius_norm(), 1.0 + nx * nx + ny * ny)
    };
    let (i1, i2) = (t1.inverse()?, t2.inverse()?);
    Ok((scaled(&i1, &i2), scaled(&t1, &t2)))
}

/// `hamiltonian_residual(Tψ₁(z_k) − Tψ₂(z_next))`
pub fn hamiltonian_operator_residual(
    dec: &ConsistencyDecomposition,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
) -> Result<ResidualNorm> {
    let (t1, t2) = dec.tangents(z_k, z_next)?;
    Ok(hamiltonian_residual(&(&t1 - &t2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveParameterization {
    /// `γ(τ) = τ v̂₁ + (1−τ) v̂₂`, `τ ∈ (0, 1)`
    Linear,
    /// `γ(τ) = cos²τ v̂₁ + sin²τ v̂₂`, `τ ∈ (0, π/2)`
    Trig,
}

/// Compares a central-difference derivative of the tangent-space curve
/// through `v̂₁ = Tψ₁v₁` and `v̂₂ = Tψ₂v₂` against its closed form
/// `s(τ)·(v̂₁ − v̂₂)` at five interior parameters; `s ≡ 1` for the linear
/// curve and `s(τ) = −2 cos τ sin τ` for the trigonometric one.
pub fn curve_derivative_check(
    dec: &ConsistencyDecomposition,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
    v1: &PhasePoint,
    v2: &PhasePoint,
    parameterization: CurveParameterization,
) -> Result<ResidualNorm> {
    let (t1, t2) = dec.tangents(z_k, z_next)?;
    v1.check_dim(dec.dim_n())?;
    v2.check_dim(dec.dim_n())?;
    let (w1, w2) = (t1.mul_vec(v1), t2.mul_vec(v2));
    let direction = &w1 - &w2;

    let (curve, speed, span): (Box<dyn Fn(f64) -> PhasePoint>, fn(f64) -> f64, f64) = match parameterization {
        CurveParameterization::Linear => (
            Box::new(|tau| w1.scale(tau).axpy(1.0 - tau, &w2)),
            |_| 1.0,
            1.0,
        ),
        CurveParameterization::Trig => (
            Box::new(|tau: f64| {
                let (s, c) = tau.sin_cos();
                w1.scale(c * c).axpy(s * s, &w2)
            }),
            |tau: f64| -2.0 * tau.cos() * tau.sin(),
            std::f64::consts::FRAC_PI_2,
        ),
    };

    let delta = f64::EPSILON.cbrt();
    let mut worst = 0.0f64;
    for k in 1..=5 {
        let tau = span * k as f64 / 6.0;
        let numeric = (&curve(tau + delta) - &curve(tau - delta)).scale(0.5 / delta);
        let exact = direction.scale(speed(tau));
        worst = worst.max((&numeric - &exact).norm_inf() / (1.0 + exact.norm_inf()));
    }
    Ok(ResidualNorm::new(worst, 1.0))
}

/// Affine decomposition of a rule with `B + C = I`: `a = 1/2`, `ψ₁ = 2B`,
/// `ψ₂ = 2C`, so that `ρ(z_k, z_{k+1}) = B z_k + C z_{k+1}`.
pub fn scheme_to_decomposition(rule: &ConsistencyRule) -> Result<ConsistencyDecomposition> {
    let (res_i, _) = check_rule_conditions(rule);
    if !res_i.passes(1e-12) {
        return Err(Error::PreconditionViolated(format!(
            "B + C = I fails with relative residual {:.3e}",
            res_i.relative()
        )));
    }
    rule.b().lu()?;
    rule.c().lu()?;
    ConsistencyDecomposition::new(
        Arc::new(LinearMap(rule.b().scale(2.0))),
        Arc::new(LinearMap(rule.c().scale(2.0))),
        0.5,
        rule.label(),
    )
}

/// `‖½(Tψ₁ X_H(z_k) + Tψ₂ X_H(z_next)) − X_H(z̄)‖∞` with `z̄ = ρ(z_k, z_next)`.
/// Diagnostic only; no threshold applies.
pub fn candidate_field_gap(
    dec: &ConsistencyDecomposition,
    sys: &dyn HamiltonianSystem,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
) -> Result<f64> {
    let (t1, t2) = dec.tangents(z_k, z_next)?;
    let candidate = t1
        .mul_vec(&vector_field(sys, z_k)?)
        .scale(0.5)
        .axpy(0.5, &t2.mul_vec(&vector_field(sys, z_next)?));
    let z_bar = rho_combination(dec, z_k, z_next)?;
    Ok((&candidate - &vector_field(sys, &z_bar)?).norm_inf())
}

/// Symplectic residual of the consistency map tangent `Tψ₂⁻¹ Tψ₁`.
pub fn consistency_map_symplectic_residual(
    dec: &ConsistencyDecomposition,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
) -> Result<ResidualNorm> {
    Ok(symplectic_residual(&dec.consistency_map_tangent(z_k, z_next)?))
}
