//! Implicit one-step schemes `z_{k+1} = z_k + h·X_H(z̄)` with consistency
//! point `z̄ = f(z_k, z_{k+1})`.
//!
//! A rule is symplectic when the partial Jacobians `B = ∂f/∂z_k` and
//! `C = ∂f/∂z_{k+1}` satisfy `B + C = I` and `BJ = JCᵀ`. The shipped rules are
//! affine in their arguments, so `B` and `C` are constant:
//!
//! * `Alpha(α)`: `q̄ = α q_k + (1−α) q_{k+1}`, `p̄ = (1−α) p_k + α p_{k+1}`
//! * `BMatrix(b)`: `B = (I+b)/2`, `C = (I−b)/2`; symplectic iff `b` is Hamiltonian
//! * `AffinePair(B, C)`: arbitrary, so non-symplectic rules can be built on purpose

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::linalg::{canonical_j, hamiltonian_residual, PhasePoint, ResidualNorm, SquareMatrix2n};
use crate::systems::{energy, field_jacobian, vector_field, HamiltonianSystem, Trajectory};

/// A consistency-point function `f(z_k, z_{k+1})` with its partial Jacobians.
///
/// [`ConsistencyRule`] covers every affine rule. Implement this for
/// nonlinear `f`; [`step`] and [`integrate`] accept any implementor.
pub trait ConsistencyFunction {
    fn dim_n(&self) -> usize;

    fn point(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<PhasePoint>;

    /// `(B, C) = (∂f/∂z_k, ∂f/∂z_{k+1})` evaluated at the pair.
    fn jacobians(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<(SquareMatrix2n, SquareMatrix2n)>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    Alpha(f64),
    BMatrix(SquareMatrix2n),
    AffinePair { b: SquareMatrix2n, c: SquareMatrix2n },
}

/// An affine consistency rule together with its induced `(B, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRule {
    kind: RuleKind,
    b: SquareMatrix2n,
    c: SquareMatrix2n,
}

impl ConsistencyRule {
    pub fn alpha(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParams("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::BadParams(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let beta = 1.0 - alpha;
        Ok(Self {
            kind: RuleKind::Alpha(alpha),
            b: SquareMatrix2n::block_scalar_diag(n, alpha, beta),
            c: SquareMatrix2n::block_scalar_diag(n, beta, alpha),
        })
    }

    /// `z̄ = (z_k + z_{k+1}) / 2`
    pub fn midpoint(n: usize) -> Self {
        Self::alpha(n, 0.5).expect("midpoint rule is valid")
    }

    /// `B = (I + b)/2`, `C = (I − b)/2`.
    pub fn bmatrix(b: SquareMatrix2n) -> Self {
        let n = b.dim_n();
        let big_b = SquareMatrix2n::from_fn(n, |i, j| {
            if i == j {
                0.5 * (1.0 + b[(i, j)])
            } else {
                0.5 * b[(i, j)]
            }
        });
        // C = I − B entrywise so that B + C reproduces I without rounding
        let big_c = SquareMatrix2n::from_fn(n, |i, j| if i == j { 1.0 - big_b[(i, j)] } else { -big_b[(i, j)] });
        Self {
            kind: RuleKind::BMatrix(b),
            b: big_b,
            c: big_c,
        }
    }

    pub fn affine(b: SquareMatrix2n, c: SquareMatrix2n) -> Result<Self> {
        c.check_dim(b.dim_n())?;
        Ok(Self {
            kind: RuleKind::AffinePair { b: b.clone(), c: c.clone() },
            b,
            c,
        })
    }

    /// `AffinePair(I, 0)`: `z̄ = z_k`.
    pub fn explicit_euler(n: usize) -> Self {
        Self::affine(SquareMatrix2n::identity(n), SquareMatrix2n::zeros(n)).expect("same dimension")
    }

    /// `AffinePair(0, I)`: `z̄ = z_{k+1}`.
    pub fn implicit_euler(n: usize) -> Self {
        Self::affine(SquareMatrix2n::zeros(n), SquareMatrix2n::identity(n)).expect("same dimension")
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn dim_n(&self) -> usize {
        self.b.dim_n()
    }

    pub fn b(&self) -> &SquareMatrix2n {
        &self.b
    }

    pub fn c(&self) -> &SquareMatrix2n {
        &self.c
    }

    pub fn label(&self) -> String {
        match &self.kind {
            RuleKind::Alpha(a) if *a == 0.5 => "midpoint".to_string(),
            RuleKind::Alpha(a) => format!("alpha:{a}"),
            RuleKind::BMatrix(_) => "bmatrix".to_string(),
            RuleKind::AffinePair { .. } => "affine".to_string(),
        }
    }
}

impl ConsistencyFunction for ConsistencyRule {
    fn dim_n(&self) -> usize {
        ConsistencyRule::dim_n(self)
    }

    fn point(&self, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<PhasePoint> {
        consistency_point(self, z_k, z_next)
    }

    fn jacobians(&self, _z_k: &PhasePoint, _z_next: &PhasePoint) -> Result<(SquareMatrix2n, SquareMatrix2n)> {
        Ok(rule_jacobians(self))
    }
}

/// `z̄ = B z_k + C z_{k+1}`.
pub fn consistency_point(rule: &ConsistencyRule, z_k: &PhasePoint, z_next: &PhasePoint) -> Result<PhasePoint> {
    let n = rule.dim_n();
    z_k.check_dim(n)?;
    z_next.check_dim(n)?;
    if let RuleKind::Alpha(alpha) = rule.kind {
        let beta = 1.0 - alpha;
        let q = z_k.q().iter().zip(z_next.q()).map(|(a, b)| alpha * a + beta * b);
        let p = z_k.p().iter().zip(z_next.p()).map(|(a, b)| beta * a + alpha * b);
        return Ok(PhasePoint::from_vec_unchecked(q.chain(p).collect()));
    }
    Ok(&rule.b.mul_vec(z_k) + &rule.c.mul_vec(z_next))
}

pub fn rule_jacobians(rule: &ConsistencyRule) -> (SquareMatrix2n, SquareMatrix2n) {
    (rule.b.clone(), rule.c.clone())
}

/// Residuals of `B + C = I` and `BJ = JCᵀ`, both scaled by `1 + ‖B‖_F + ‖C‖_F`.
pub fn check_rule_conditions(rule: &ConsistencyRule) -> (ResidualNorm, ResidualNorm) {
    let n = rule.dim_n();
    let j = canonical_j(n);
    let scale = 1.0 + rule.b.frobenius_norm() + rule.c.frobenius_norm();
    let sum = &(&rule.b + &rule.c) - &SquareMatrix2n::identity(n);
    let twist = &(&rule.b * &j) - &(&j * &rule.c.transpose());
    (
        ResidualNorm::new(sum.frobenius_norm(), scale),
        ResidualNorm::new(twist.frobenius_norm(), scale),
    )
}

/// Returns the `BJ − JCᵀ` residual alongside `hamiltonian_residual(B − C)`.
/// Requires `B + C = I` to within `1e−12`.
pub fn equiv_hamiltonian_check(rule: &ConsistencyRule) -> Result<(ResidualNorm, ResidualNorm)> {
    let (res_i, res_ii) = check_rule_conditions(rule);
    if !res_i.passes(1e-12) {
        return Err(Error::PreconditionViolated(format!(
            "B + C = I fails with relative residual {:.3e}",
            res_i.relative()
        )));
    }
    Ok((res_ii, hamiltonian_residual(&(&rule.b - &rule.c))))
}

/// `Ψ(z_k, z_next) = z_next − z_k − h·X_H(f(z_k, z_next))`
pub fn implicit_residual<R: ConsistencyFunction + ?Sized>(
    sys: &dyn HamiltonianSystem,
    rule: &R,
    h: f64,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
) -> Result<PhasePoint> {
    let z_bar = rule.point(z_k, z_next)?;
    let field = vector_field(sys, &z_bar)?;
    Ok((z_next - z_k).axpy(-h, &field))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Newton,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Newton,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_iters: 50,
        }
    }
}

impl SolverConfig {
    pub fn fixed_point() -> Self {
        Self {
            method: SolverMethod::FixedPoint,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::BadParams("solver tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::BadParams("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    fn converged(&self, residual_inf: f64, z_next: &PhasePoint) -> bool {
        residual_inf <= self.abs_tol + self.rel_tol * z_next.norm_inf()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub z_next: PhasePoint,
    pub z_bar: PhasePoint,
    pub iterations: usize,
    pub residual_inf_norm: f64,
    pub converged: bool,
}

/// Solves `Ψ(z_k, z_next) = 0` for one step of size `h` (negative `h` steps backwards).
///
/// The explicit Euler predictor seeds the iteration. Newton uses the exact
/// Jacobian `∂Ψ/∂z_next = I − h·DX_H(z̄)·C`.
pub fn step<R: ConsistencyFunction + ?Sized>(
    sys: &dyn HamiltonianSystem,
    rule: &R,
    h: f64,
    z_k: &PhasePoint,
    cfg: &SolverConfig,
) -> Result<StepResult> {
    if !h.is_finite() || h == 0.0 {
        return Err(Error::BadParams(format!("step size must be finite and non-zero, got {h}")));
    }
    cfg.validate()?;
    let n = rule.dim_n();
    if sys.dim_n() != n {
        return Err(Error::DimensionMismatch {
            expected: 2 * sys.dim_n(),
            actual: 2 * n,
        });
    }
    z_k.check_dim(n)?;

    let mut z_next = z_k.axpy(h, &vector_field(sys, z_k)?);
    let mut residual = implicit_residual(sys, rule, h, z_k, &z_next)?;
    let mut iterations = 0;

    while !cfg.converged(residual.norm_inf(), &z_next) {
        if iterations == cfg.max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual: residual.norm_inf(),
            });
        }
        iterations += 1;
        z_next = match cfg.method {
            SolverMethod::Newton => {
                let z_bar = rule.point(z_k, &z_next)?;
                let (_, c) = rule.jacobians(z_k, &z_next)?;
                let dfield = field_jacobian(sys, &z_bar)?;
                let jac = &SquareMatrix2n::identity(n) - &(&dfield * &c).scale(h);
                let delta = jac.lu()?.solve(&residual);
                &z_next - &delta
            }
            // z_next − Ψ = z_k + h·X_H(f(z_k, z_next))
            SolverMethod::FixedPoint => &z_next - &residual,
        };
        if !z_next.is_finite() {
            return Err(Error::NonFinite(format!("solver iterate {iterations}")));
        }
        residual = implicit_residual(sys, rule, h, z_k, &z_next)?;
    }

    Ok(StepResult {
        z_bar: rule.point(z_k, &z_next)?,
        residual_inf_norm: residual.norm_inf(),
        z_next,
        iterations,
        converged: true,
    })
}

/// A failed integration: the trajectory up to the last good state and the
/// error raised by step `step` (1-based index of the step being attempted).
#[derive(Debug, Clone, Error)]
#[error("step {step} failed: {source}")]
pub struct IntegrationError {
    pub step: usize,
    pub partial: Trajectory,
    #[source]
    pub source: Error,
}

pub fn integrate<R: ConsistencyFunction + ?Sized>(
    sys: &dyn HamiltonianSystem,
    rule: &R,
    h: f64,
    steps: usize,
    z0: &PhasePoint,
    cfg: &SolverConfig,
) -> std::result::Result<Trajectory, IntegrationError> {
    let fail = |step, partial, source| IntegrationError { step, partial, source };
    let empty = |h| Trajectory {
        system_name: sys.name().to_string(),
        stepsize_h: h,
        times: Vec::new(),
        states: Vec::new(),
        energies: Vec::new(),
        solver_iterations: Vec::new(),
    };
    let e0 = match energy(sys, z0) {
        Ok(e) => e,
        Err(e) => return Err(fail(0, empty(h), e)),
    };
    let mut traj = Trajectory::new(sys.name(), h, z0.clone(), e0);
    for k in 1..=steps {
        let result = step(sys, rule, h, traj.last(), cfg).and_then(|r| {
            let e = energy(sys, &r.z_next)?;
            Ok((r, e))
        });
        match result {
            Ok((r, e)) => traj.push(r.z_next, e, r.iterations),
            Err(e) => return Err(fail(k, traj, e)),
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{Harmonic, Pendulum};

    fn pt(v: &[f64]) -> PhasePoint {
        PhasePoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn consistency_point_examples() {
        let mid = ConsistencyRule::midpoint(1);
        let z = consistency_point(&mid, &pt(&[1.0, 0.0]), &pt(&[0.0, 1.0])).unwrap();
        assert_eq!(z.as_slice(), &[0.5, 0.5]);

        // α = 1 picks (q_k, p_{k+1})
        let a1 = ConsistencyRule::alpha(1, 1.0).unwrap();
        let z = consistency_point(&a1, &pt(&[2.0, 3.0]), &pt(&[5.0, 7.0])).unwrap();
        assert_eq!(z.as_slice(), &[2.0, 7.0]);

        let b0 = ConsistencyRule::bmatrix(SquareMatrix2n::zeros(2));
        let zk = pt(&[1.0, -2.0, 0.5, 3.0]);
        let zn = pt(&[0.0, 4.0, 1.5, -1.0]);
        let z = consistency_point(&b0, &zk, &zn).unwrap();
        assert_eq!(z, (&zk + &zn).scale(0.5));
    }

    #[test]
    fn consistency_point_dimension_mismatch() {
        let mid = ConsistencyRule::midpoint(2);
        let err = consistency_point(&mid, &pt(&[1.0, 0.0]), &pt(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn alpha_coordinate_form_matches_matrix_form() {
        let rule = ConsistencyRule::alpha(2, 0.3).unwrap();
        let zk = pt(&[1.0, 2.0, 3.0, 4.0]);
        let zn = pt(&[-1.0, 0.5, 2.0, -3.0]);
        let direct = consistency_point(&rule, &zk, &zn).unwrap();
        let via_matrix = &rule.b().mul_vec(&zk) + &rule.c().mul_vec(&zn);
        assert!((&direct - &via_matrix).norm_inf() < 1e-15);
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        assert!(ConsistencyRule::alpha(1, 1.5).is_err());
        assert!(ConsistencyRule::alpha(1, -0.1).is_err());
        assert!(ConsistencyRule::alpha(1, f64::NAN).is_err());
    }

    #[test]
    fn rule_jacobian_examples() {
        let (b, c) = rule_jacobians(&ConsistencyRule::midpoint(2));
        assert_eq!(b, SquareMatrix2n::scalar(2, 0.5));
        assert_eq!(c, SquareMatrix2n::scalar(2, 0.5));

        let bm = SquareMatrix2n::from_rows(&[vec![0.2, -0.4], vec![0.6, 0.1]]).unwrap();
        let (b, c) = rule_jacobians(&ConsistencyRule::bmatrix(bm.clone()));
        let id = SquareMatrix2n::identity(1);
        assert!(b.max_abs_diff(&(&id + &bm).scale(0.5)) < 1e-16);
        assert!(c.max_abs_diff(&(&id - &bm).scale(0.5)) < 1e-16);
    }

    #[test]
    fn rule_conditions_exact_for_alpha_family() {
        for &alpha in &[0.0, 0.1, 0.25, 0.3, 0.5, 0.75, 0.9, 1.0] {
            for n in 1..=3 {
                let rule = ConsistencyRule::alpha(n, alpha).unwrap();
                let (b, c) = rule_jacobians(&rule);
                let j = canonical_j(n);
                assert_eq!(&b + &c, SquareMatrix2n::identity(n));
                assert_eq!(&b * &j, &j * &c.transpose());
                let (ri, rii) = check_rule_conditions(&rule);
                assert_eq!(ri.value, 0.0);
                assert_eq!(rii.value, 0.0);
            }
        }
    }

    #[test]
    fn explicit_euler_fails_condition_ii() {
        let (ri, rii) = check_rule_conditions(&ConsistencyRule::explicit_euler(1));
        assert_eq!(ri.value, 0.0);
        // BJ − JCᵀ = J
        assert!((rii.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(!rii.passes(1e-12));
    }

    #[test]
    fn equiv_hamiltonian_examples() {
        let (a, b) = equiv_hamiltonian_check(&ConsistencyRule::midpoint(1)).unwrap();
        assert_eq!((a.value, b.value), (0.0, 0.0));

        let (a, b) = equiv_hamiltonian_check(&ConsistencyRule::bmatrix(canonical_j(2))).unwrap();
        assert_eq!((a.value, b.value), (0.0, 0.0));

        let (a, b) = equiv_hamiltonian_check(&ConsistencyRule::explicit_euler(1)).unwrap();
        assert!(!a.passes(1e-10) && !b.passes(1e-10));

        let broken = ConsistencyRule::affine(SquareMatrix2n::identity(1), SquareMatrix2n::identity(1)).unwrap();
        assert!(matches!(
            equiv_hamiltonian_check(&broken),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn implicit_residual_zero_at_zero_step() {
        let z = pt(&[0.3, -0.7]);
        for rule in [ConsistencyRule::midpoint(1), ConsistencyRule::explicit_euler(1)] {
            let r = implicit_residual(&Pendulum, &rule, 0.0, &z, &z).unwrap();
            assert_eq!(r.as_slice(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn implicit_residual_matches_definition() {
        // α = 1, z̄ = (q_k, p_next) = (0.5, 1.0); X_H = (p, −sin q)
        let rule = ConsistencyRule::alpha(1, 1.0).unwrap();
        let zk = pt(&[0.5, -0.25]);
        let zn = pt(&[0.75, 1.0]);
        let h = 0.2;
        let r = implicit_residual(&Pendulum, &rule, h, &zk, &zn).unwrap();
        let expected = [0.75 - 0.5 - h * 1.0, 1.0 + 0.25 + h * 0.5f64.sin()];
        assert!((r[0] - expected[0]).abs() < 1e-16);
        assert!((r[1] - expected[1]).abs() < 1e-16);
    }

    #[test]
    fn step_rejects_zero_h() {
        let err = step(
            &Harmonic::unit(1),
            &ConsistencyRule::midpoint(1),
            0.0,
            &pt(&[1.0, 0.0]),
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadParams(_)));
    }

    #[test]
    fn step_no_convergence_reports_residual() {
        let cfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::fixed_point()
        };
        let err = step(&Pendulum, &ConsistencyRule::midpoint(1), 0.5, &pt(&[1.0, 0.5]), &cfg).unwrap_err();
        match err {
            Error::NoConvergence { iterations, residual } => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn newton_singular_jacobian() {
        // Jᵀ·C = diag(1, −1), so I − h·JᵀC is singular at h = 1
        let c = SquareMatrix2n::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let rule = ConsistencyRule::affine(SquareMatrix2n::zeros(1), c).unwrap();
        let err = step(&Harmonic::unit(1), &rule, 1.0, &pt(&[1.0, 0.3]), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { .. }));
    }

    #[test]
    fn integrate_zero_steps() {
        let z0 = pt(&[1.0, 0.0]);
        let t = integrate(
            &Harmonic::unit(1),
            &ConsistencyRule::midpoint(1),
            0.1,
            0,
            &z0,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(t.states, vec![z0]);
        assert_eq!(t.energies, vec![0.5]);
        assert!(t.solver_iterations.is_empty());
    }

    #[test]
    fn integrate_reports_failing_step() {
        use crate::systems::Kepler;
        // the first explicit step lands exactly on the origin
        let k = Kepler::new(1.0).unwrap();
        let err = integrate(
            &k,
            &ConsistencyRule::explicit_euler(2),
            0.5,
            50,
            &pt(&[1.0, 0.0, -2.0, 0.0]),
            &SolverConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err.step, 1);
        assert_eq!(err.partial.states.len(), err.step);
        assert!(matches!(err.source, Error::OutOfDomain { .. }));
    }
}
