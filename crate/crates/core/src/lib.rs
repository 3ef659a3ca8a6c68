//! Implicit symplectic integrators built from a consistency point
//! `z̄ = f(z_k, z_{k+1})`, and numerical certification of their symplecticity.
//!
//! * [`linalg`]: phase-space matrices, `J`, symplectic/Hamiltonian predicates
//! * [`systems`]: Hamiltonians and the harmonic / pendulum / Kepler catalog
//! * [`schemes`]: consistency rules, the implicit residual and the step solver
//! * [`verifier`]: amplification matrices, trajectory reports, order estimation
//! * [`geometry`]: consistent implicit maps and their tangent-level checks
//! * [`matrix_file`]: JSON matrix documents

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod matrix_file;
pub mod schemes;
pub mod systems;
pub mod verifier;

pub use error::{Error, Result};
pub use geometry::{ConsistencyDecomposition, CurveParameterization, LocalMap};
pub use linalg::{canonical_j, PhasePoint, ResidualNorm, SquareMatrix2n};
pub use schemes::{
    integrate, step, ConsistencyFunction, ConsistencyRule, IntegrationError, RuleKind, SolverConfig, SolverMethod,
    StepResult,
};
pub use systems::{builtin_system, HamiltonianSystem, SystemParams, Trajectory};
pub use verifier::{ConvergenceReport, LinearizationSource, StepLinearization, Verdict, VerificationReport};
