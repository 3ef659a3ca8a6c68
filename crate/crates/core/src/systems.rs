//! Autonomous Hamiltonian systems on (ℝ^{2n}, ω₀) and the built-in test catalog.
//!
//! The vector field follows Hamilton's equations `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q`,
//! i.e. `X_H = Jᵀ∇H` with `J` from [`canonical_j`](crate::linalg::canonical_j).
//! Its Jacobian is therefore `Jᵀ·H_zz`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{canonical_j, fd_gradient, fd_jacobian, PhasePoint, ResidualNorm, SquareMatrix2n};

/// An autonomous Hamiltonian `H: ℝ^{2n} → ℝ` with analytic first and second
/// derivatives. The raw evaluators assume `in_domain(z)`; use the free
/// functions in this module for checked evaluation.
pub trait HamiltonianSystem: Send + Sync {
    fn name(&self) -> &str;

    fn dim_n(&self) -> usize;

    fn value(&self, z: &PhasePoint) -> f64;

    /// `∇H` laid out as `(∂H/∂q, ∂H/∂p)`.
    fn gradient(&self, z: &PhasePoint) -> PhasePoint;

    fn hessian(&self, z: &PhasePoint) -> SquareMatrix2n;

    fn in_domain(&self, _z: &PhasePoint) -> bool {
        true
    }

    /// Exact time-`t` flow, when a closed form exists.
    fn exact_flow(&self, _z: &PhasePoint, _t: f64) -> Option<PhasePoint> {
        None
    }
}

pub type SystemParams = BTreeMap<String, Vec<f64>>;

fn guard(sys: &dyn HamiltonianSystem, z: &PhasePoint) -> Result<()> {
    z.check_dim(sys.dim_n())?;
    if !sys.in_domain(z) {
        return Err(Error::OutOfDomain {
            system: sys.name().to_string(),
        });
    }
    Ok(())
}

pub fn energy(sys: &dyn HamiltonianSystem, z: &PhasePoint) -> Result<f64> {
    guard(sys, z)?;
    Ok(sys.value(z))
}

pub fn gradient_at(sys: &dyn HamiltonianSystem, z: &PhasePoint) -> Result<PhasePoint> {
    guard(sys, z)?;
    Ok(sys.gradient(z))
}

pub fn hessian_at(sys: &dyn HamiltonianSystem, z: &PhasePoint) -> Result<SquareMatrix2n> {
    guard(sys, z)?;
    Ok(sys.hessian(z))
}

/// `X_H(z) = (∂H/∂p, −∂H/∂q)`.
pub fn vector_field(sys: &dyn HamiltonianSystem, z: &PhasePoint) -> Result<PhasePoint> {
    guard(sys, z)?;
    let g = sys.gradient(z);
    let n = sys.dim_n();
    let mut out = Vec::with_capacity(2 * n);
    out.extend_from_slice(g.p());
    out.extend(g.q().iter().map(|x| -x));
    Ok(PhasePoint::from_vec_unchecked(out))
}

/// Analytic Jacobian of the vector field, `Jᵀ·H_zz(z)`.
pub fn field_jacobian(sys: &dyn HamiltonianSystem, z: &PhasePoint) -> Result<SquareMatrix2n> {
    let h = hessian_at(sys, z)?;
    Ok(&canonical_j(sys.dim_n()).transpose() * &h)
}

fn relative_deviation(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

/// Largest relative deviation, over all samples, between the analytic
/// gradient/Hessian and central differences of the value/gradient.
pub fn validate_derivatives(sys: &dyn HamiltonianSystem, samples: &[PhasePoint]) -> Result<ResidualNorm> {
    let mut worst = 0.0f64;
    for z in samples {
        guard(sys, z)?;
        let grad_fd = fd_gradient(|x| energy(sys, x), z)?;
        worst = worst.max(relative_deviation(sys.gradient(z).as_slice(), grad_fd.as_slice()));

        let hess_fd = fd_jacobian(|x| gradient_at(sys, x), z)?;
        let hess = sys.hessian(z);
        let flat = |m: &SquareMatrix2n| m.rows().concat();
        worst = worst.max(relative_deviation(&flat(&hess), &flat(&hess_fd)));
    }
    Ok(ResidualNorm::new(worst, 1.0))
}

/// `H = ½ Σ (p_i² + ω_i² q_i²)`
#[derive(Debug, Clone)]
pub struct Harmonic {
    omegas: Vec<f64>,
}

impl Harmonic {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::BadParams("harmonic needs n >= 1".into()));
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::BadParams("harmonic frequencies must be positive".into()));
        }
        Ok(Self { omegas })
    }

    pub fn unit(n: usize) -> Self {
        Self::new(vec![1.0; n]).expect("unit frequencies are valid")
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Matrix of the exact time-`t` flow.
    pub fn flow_matrix(&self, t: f64) -> SquareMatrix2n {
        let n = self.omegas.len();
        let mut m = SquareMatrix2n::zeros(n);
        for (i, &w) in self.omegas.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            m[(i, i)] = c;
            m[(i, n + i)] = s / w;
            m[(n + i, i)] = -w * s;
            m[(n + i, n + i)] = c;
        }
        m
    }
}

impl HamiltonianSystem for Harmonic {
    fn name(&self) -> &str {
        "harmonic"
    }

    fn dim_n(&self) -> usize {
        self.omegas.len()
    }

    fn value(&self, z: &PhasePoint) -> f64 {
        let (q, p) = (z.q(), z.p());
        0.5 * self
            .omegas
            .iter()
            .enumerate()
            .map(|(i, w)| p[i] * p[i] + w * w * q[i] * q[i])
            .sum::<f64>()
    }

    fn gradient(&self, z: &PhasePoint) -> PhasePoint {
        let q: Vec<f64> = z.q().iter().zip(&self.omegas).map(|(q, w)| w * w * q).collect();
        PhasePoint::from_vec_unchecked([q.as_slice(), z.p()].concat())
    }

    fn hessian(&self, _z: &PhasePoint) -> SquareMatrix2n {
        let n = self.omegas.len();
        let mut h = SquareMatrix2n::identity(n);
        for (i, w) in self.omegas.iter().enumerate() {
            h[(i, i)] = w * w;
        }
        h
    }

    fn exact_flow(&self, z: &PhasePoint, t: f64) -> Option<PhasePoint> {
        Some(self.flow_matrix(t).mul_vec(z))
    }
}

/// `H = p²/2 − cos q`
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

impl HamiltonianSystem for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn dim_n(&self) -> usize {
        1
    }

    fn value(&self, z: &PhasePoint) -> f64 {
        0.5 * z[1] * z[1] - z[0].cos()
    }

    fn gradient(&self, z: &PhasePoint) -> PhasePoint {
        PhasePoint::from_vec_unchecked(vec![z[0].sin(), z[1]])
    }

    fn hessian(&self, z: &PhasePoint) -> SquareMatrix2n {
        let mut h = SquareMatrix2n::identity(1);
        h[(0, 0)] = z[0].cos();
        h
    }
}

/// Planar Kepler problem, `H = |p|²/2 − μ/|q|`, `z = (x, y, p_x, p_y)`.
#[derive(Debug, Clone, Copy)]
pub struct Kepler {
    mu: f64,
}

impl Kepler {
    pub const MIN_RADIUS: f64 = 1e-8;

    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::BadParams(format!("kepler mu must be positive, got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn radius(z: &PhasePoint) -> f64 {
        z[0].hypot(z[1])
    }
}

impl HamiltonianSystem for Kepler {
    fn name(&self) -> &str {
        "kepler"
    }

    fn dim_n(&self) -> usize {
        2
    }

    fn value(&self, z: &PhasePoint) -> f64 {
        0.5 * (z[2] * z[2] + z[3] * z[3]) - self.mu / Self::radius(z)
    }

    fn gradient(&self, z: &PhasePoint) -> PhasePoint {
        let r = Self::radius(z);
        let k = self.mu / (r * r * r);
        PhasePoint::from_vec_unchecked(vec![k * z[0], k * z[1], z[2], z[3]])
    }

    fn hessian(&self, z: &PhasePoint) -> SquareMatrix2n {
        let r = Self::radius(z);
        let r2 = r * r;
        let k = self.mu / (r2 * r);
        let q = [z[0], z[1]];
        let mut h = SquareMatrix2n::identity(2);
        for i in 0..2 {
            for j in i..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[(i, j)] = k * (delta - 3.0 * (q[i] * q[j]) / r2);
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }

    fn in_domain(&self, z: &PhasePoint) -> bool {
        z.len() == 4 && Self::radius(z) >= Self::MIN_RADIUS
    }
}

fn single_param(params: &SystemParams, key: &str) -> Result<Option<f64>> {
    match params.get(key).map(Vec::as_slice) {
        None => Ok(None),
        Some([v]) => Ok(Some(*v)),
        Some(other) => Err(Error::BadParams(format!(
            "parameter '{key}' takes one value, got {}",
            other.len()
        ))),
    }
}

fn reject_unknown(params: &SystemParams, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::BadParams(format!("unknown parameter '{k}'"))),
        None => Ok(()),
    }
}

/// Builds one of `harmonic` (params `n`, `omega`), `pendulum` (no params)
/// or `kepler` (param `mu`).
pub fn builtin_system(name: &str, params: &SystemParams) -> Result<Box<dyn HamiltonianSystem>> {
    match name {
        "harmonic" => {
            reject_unknown(params, &["n", "omega"])?;
            let n = match single_param(params, "n")? {
                Some(v) if v >= 1.0 && v.fract() == 0.0 => Some(v as usize),
                Some(v) => return Err(Error::BadParams(format!("n must be a positive integer, got {v}"))),
                None => None,
            };
            let omegas = match (params.get("omega"), n) {
                (None, n) => vec![1.0; n.unwrap_or(1)],
                (Some(w), None) => w.clone(),
                (Some(w), Some(n)) if w.len() == 1 => vec![w[0]; n],
                (Some(w), Some(n)) if w.len() == n => w.clone(),
                (Some(w), Some(n)) => {
                    return Err(Error::BadParams(format!(
                        "expected 1 or {n} frequencies, got {}",
                        w.len()
                    )))
                }
            };
            Ok(Box::new(Harmonic::new(omegas)?))
        }
        "pendulum" => {
            reject_unknown(params, &[])?;
            Ok(Box::new(Pendulum))
        }
        "kepler" => {
            reject_unknown(params, &["mu"])?;
            let mu = single_param(params, "mu")?.unwrap_or(1.0);
            Ok(Box::new(Kepler::new(mu)?))
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// Fixed-step solution record; `states[i]` is the state at `times[i]`.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub system_name: String,
    pub stepsize_h: f64,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub energies: Vec<f64>,
    /// One entry per completed step.
    pub solver_iterations: Vec<usize>,
}

impl Trajectory {
    pub fn new(system_name: &str, stepsize_h: f64, z0: PhasePoint, e0: f64) -> Self {
        Self {
            system_name: system_name.to_string(),
            stepsize_h,
            times: vec![0.0],
            states: vec![z0],
            energies: vec![e0],
            solver_iterations: Vec::new(),
        }
    }

    pub fn push(&mut self, z: PhasePoint, energy: f64, iterations: usize) {
        let k = self.states.len();
        self.times.push(k as f64 * self.stepsize_h);
        self.states.push(z);
        self.energies.push(energy);
        self.solver_iterations.push(iterations);
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("trajectory holds at least z0")
    }

    /// `max_i |H(z_i) − H(z_0)|`
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        self.energies.iter().fold(0.0, |m, e| m.max((e - e0).abs()))
    }
}
