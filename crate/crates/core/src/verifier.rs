//! Numerical certification of implicit schemes.
//!
//! Each step `Ψ(z_k, z_{k+1}) = 0` is linearized by implicit differentiation,
//! `δz_{k+1} = A·δz_k` with `A = −(∂Ψ/∂z_{k+1})⁻¹·∂Ψ/∂z_k`, and `A` is tested
//! for `AᵀJA = J` directly and through the equivalent form
//! `A₁JA₁ᵀ = A₂JA₂ᵀ` on the two partials.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{canonical_j, fd_jacobian, symplectic_residual, PhasePoint, ResidualNorm, SquareMatrix2n};
use crate::schemes::{check_rule_conditions, implicit_residual, integrate, ConsistencyFunction, ConsistencyRule, SolverConfig};
use crate::systems::{field_jacobian, HamiltonianSystem, Trajectory};

/// How the partials of `Ψ` were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearizationSource {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct StepLinearization {
    /// `∂Ψ/∂z_k`
    pub a1: SquareMatrix2n,
    /// `∂Ψ/∂z_{k+1}`
    pub a2: SquareMatrix2n,
    /// Solves `a2 · A = −a1`.
    pub amplification: SquareMatrix2n,
    pub source: LinearizationSource,
}

/// Largest implicit residual accepted for a step pair, relative to `max(1, ‖z_next‖∞)`.
pub const STALE_PAIR_LIMIT: f64 = 1e-10;

pub fn linearize_step<R: ConsistencyFunction + ?Sized>(
    sys: &dyn HamiltonianSystem,
    rule: &R,
    h: f64,
    z_k: &PhasePoint,
    z_next: &PhasePoint,
    source: LinearizationSource,
) -> Result<StepLinearization> {
    let psi = implicit_residual(sys, rule, h, z_k, z_next)?;
    let limit = STALE_PAIR_LIMIT * z_next.norm_inf().max(1.0);
    if psi.norm_inf() > limit {
        return Err(Error::StalePair {
            residual: psi.norm_inf(),
            limit,
        });
    }

    let n = rule.dim_n();
    let id = SquareMatrix2n::identity(n);
    let (a1, a2) = match source {
        LinearizationSource::Analytic => {
            let z_bar = rule.point(z_k, z_next)?;
            let (b, c) = rule.jacobians(z_k, z_next)?;
            let dfield = field_jacobian(sys, &z_bar)?.scale(h);
            (&(-&id) - &(&dfield * &b), &id - &(&dfield * &c))
        }
        LinearizationSource::FiniteDifference => (
            fd_jacobian(|z| implicit_residual(sys, rule, h, z, z_next), z_k)?,
            fd_jacobian(|z| implicit_residual(sys, rule, h, z_k, z), z_next)?,
        ),
    };
    let amplification = a2.solve_matrix(&(-&a1))?;
    Ok(StepLinearization {
        a1,
        a2,
        amplification,
        source,
    })
}

/// `(‖AᵀJA − J‖, ‖A₁JA₁ᵀ − A₂JA₂ᵀ‖)`, the latter scaled by `1 + ‖A₁‖_F² + ‖A₂‖_F²`.
pub fn symplecticity_residuals(lin: &StepLinearization) -> (ResidualNorm, ResidualNorm) {
    let amp = symplectic_residual(&lin.amplification);
    let j = canonical_j(lin.a1.dim_n());
    let congruence = |m: &SquareMatrix2n| &(m * &j) * &m.transpose();
    let diff = &congruence(&lin.a1) - &congruence(&lin.a2);
    let (n1, n2) = (lin.a1.frobenius_norm(), lin.a2.frobenius_norm());
    (amp, ResidualNorm::new(diff.frobenius_norm(), 1.0 + n1 * n1 + n2 * n2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Symplectic,
    NotSymplectic,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Symplectic => "symplectic",
            Verdict::NotSymplectic => "not_symplectic",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Per-step and aggregate symplecticity evidence for one trajectory.
/// Residual arrays are normalized and in step order.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub per_step_symplectic_residual: Vec<f64>,
    pub max_symplectic_residual: f64,
    pub a1a2_residual: Vec<f64>,
    pub energy_drift: f64,
    pub condition_i_residual: f64,
    pub condition_ii_residual: f64,
    pub verdict: Verdict,
    /// Set when a step could not be linearized.
    pub annotation: Option<String>,
}

pub fn verdict_for(max_residual: f64, condition_i: f64, condition_ii: f64, tol: f64) -> Verdict {
    if max_residual <= tol && condition_i <= tol && condition_ii <= tol {
        Verdict::Symplectic
    } else if max_residual > 100.0 * tol {
        Verdict::NotSymplectic
    } else {
        Verdict::Inconclusive
    }
}

pub fn verify_trajectory(
    sys: &dyn HamiltonianSystem,
    rule: &ConsistencyRule,
    traj: &Trajectory,
    tol: f64,
) -> VerificationReport {
    let h = traj.stepsize_h;
    let mut per_step = Vec::with_capacity(traj.steps());
    let mut a1a2 = Vec::with_capacity(traj.steps());
    let mut annotation = None;

    for (k, pair) in traj.states.windows(2).enumerate() {
        match linearize_step(sys, rule, h, &pair[0], &pair[1], LinearizationSource::Analytic) {
            Ok(lin) => {
                let (amp, cross) = symplecticity_residuals(&lin);
                per_step.push(amp.relative());
                a1a2.push(cross.relative());
            }
            Err(e) => {
                annotation = Some(format!("step {}: {} ({})", k + 1, e.kind(), e));
                break;
            }
        }
    }

    let max_symplectic_residual = per_step.iter().fold(0.0, |m: f64, r| m.max(*r));
    let (cond_i, cond_ii) = check_rule_conditions(rule);
    let verdict = if annotation.is_some() {
        Verdict::Inconclusive
    } else {
        verdict_for(max_symplectic_residual, cond_i.relative(), cond_ii.relative(), tol)
    };

    VerificationReport {
        per_step_symplectic_residual: per_step,
        max_symplectic_residual,
        a1a2_residual: a1a2,
        energy_drift: traj.energy_drift(),
        condition_i_residual: cond_i.relative(),
        condition_ii_residual: cond_ii.relative(),
        verdict,
        annotation,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub slope: f64,
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn log_log_slope(step_sizes: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = step_sizes.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (xbar, ybar) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    sxy / sxx
}

/// Global error at fixed time `t_final` for `h_j = h0 / 2^j`, `j = 0..levels`.
///
/// The reference is the closed-form flow when the system provides one,
/// otherwise a midpoint run with step `h_min / 64`.
pub fn convergence_order<R: ConsistencyFunction + ?Sized>(
    sys: &dyn HamiltonianSystem,
    rule: &R,
    t_final: f64,
    z0: &PhasePoint,
    h0: f64,
    levels: usize,
    cfg: &SolverConfig,
) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::BadParams(format!("order fit needs at least 3 levels, got {levels}")));
    }
    if !(t_final.is_finite() && t_final > 0.0 && h0.is_finite() && h0 > 0.0) {
        return Err(Error::BadParams("final time and h0 must be positive".into()));
    }
    let step_sizes: Vec<f64> = (0..levels).map(|j| h0 / 2f64.powi(j as i32)).collect();
    let counts = step_sizes
        .iter()
        .map(|h| {
            let steps = (t_final / h).round();
            if steps < 1.0 || (steps * h - t_final).abs() > 1e-9 * t_final {
                Err(Error::BadParams(format!("t_final = {t_final} is not a multiple of h = {h}")))
            } else {
                Ok(steps as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let reference = match sys.exact_flow(z0, t_final) {
        Some(z) => z,
        None => {
            let fine_steps = counts[levels - 1] * 64;
            let h_ref = t_final / fine_steps as f64;
            let midpoint = ConsistencyRule::midpoint(sys.dim_n());
            integrate(sys, &midpoint, h_ref, fine_steps, z0, cfg)
                .map_err(|e| Error::ReferenceUnavailable(e.to_string()))?
                .last()
                .clone()
        }
    };

    let mut errors = Vec::with_capacity(levels);
    for (&h, &steps) in step_sizes.iter().zip(&counts) {
        let traj = integrate(sys, rule, h, steps, z0, cfg).map_err(|e| e.source)?;
        errors.push((traj.last() - &reference).norm_inf());
    }
    if errors.iter().any(|e| !e.is_finite() || *e <= 0.0) {
        return Err(Error::BadParams("zero global error; slope undefined".into()));
    }
    Ok(ConvergenceReport {
        slope: log_log_slope(&step_sizes, &errors),
        step_sizes,
        errors,
    })
}
