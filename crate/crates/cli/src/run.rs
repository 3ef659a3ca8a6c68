use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use isym_core::geometry::{
    candidate_field_gap, consistency_map_symplectic_residual, curve_derivative_check, hamiltonian_operator_residual,
    interleave_residual, rho_combination, scheme_to_decomposition, tangent_identity_residual,
};
use isym_core::schemes::check_rule_conditions;
use isym_core::verifier::{convergence_order, verify_trajectory};
use isym_core::{builtin_system, integrate, step, CurveParameterization, Error, PhasePoint, Trajectory, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{Command, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_SYMPLECTIC: i32 = 3;

/// Random tangent vectors drawn for the tangent-identity check.
const TANGENT_SAMPLES: usize = 50;

#[derive(Debug)]
struct Failure {
    kind: &'static str,
    step: Option<usize>,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind(),
            step: None,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            kind: "Io",
            step: None,
            message: e.to_string(),
        }
    }
}

/// Writes one JSON object per line to standard error.
fn report_failure(f: &Failure) {
    let line = serde_json::json!({ "error": f.kind, "step": f.step, "message": f.message });
    eprintln!("{line}");
}

pub fn report_usage(flag: &str, message: &str) {
    let line = serde_json::json!({ "error": "UsageError", "flag": flag, "message": message });
    eprintln!("{line}");
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(w: &mut dyn Write, traj: &Trajectory) -> io::Result<()> {
    let n = traj.states[0].dim_n();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.push("H".to_string());
    writeln!(w, "{}", header.join(","))?;
    for ((t, z), e) in traj.times.iter().zip(&traj.states).zip(&traj.energies) {
        let mut row = vec![num(*t)];
        row.extend(z.iter().map(|x| num(*x)));
        row.push(num(*e));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn trajectory(cfg: &RunConfig) -> Result<Trajectory, Failure> {
    let sys = builtin_system(&cfg.system, &cfg.params)?;
    integrate(sys.as_ref(), &cfg.rule, cfg.h, cfg.steps, &cfg.z0, &cfg.solver).map_err(|e| Failure {
        kind: e.source.kind(),
        step: Some(e.step),
        message: e.source.to_string(),
    })
}

fn run_integrate(cfg: &RunConfig) -> Result<i32, Failure> {
    let sys = builtin_system(&cfg.system, &cfg.params)?;
    let (traj, failure) = match integrate(sys.as_ref(), &cfg.rule, cfg.h, cfg.steps, &cfg.z0, &cfg.solver) {
        Ok(t) => (t, None),
        Err(e) => {
            let f = Failure {
                kind: e.source.kind(),
                step: Some(e.step),
                message: e.source.to_string(),
            };
            (e.partial, Some(f))
        }
    };
    let mut w = sink(cfg.out_path.as_deref())?;
    if !traj.states.is_empty() {
        write_csv(&mut w, &traj)?;
    }
    w.flush()?;
    match failure {
        Some(f) => Err(f),
        None => Ok(EXIT_OK),
    }
}

fn run_verify(cfg: &RunConfig) -> Result<i32, Failure> {
    let sys = builtin_system(&cfg.system, &cfg.params)?;
    let traj = trajectory(cfg)?;
    let report = verify_trajectory(sys.as_ref(), &cfg.rule, &traj, cfg.tol);
    write_json(cfg.report_path.as_deref().or(cfg.out_path.as_deref()), &report)?;
    Ok(match report.verdict {
        Verdict::Symplectic => EXIT_OK,
        Verdict::NotSymplectic => EXIT_NOT_SYMPLECTIC,
        Verdict::Inconclusive => EXIT_FAILURE,
    })
}

fn run_converge(cfg: &RunConfig) -> Result<i32, Failure> {
    let sys = builtin_system(&cfg.system, &cfg.params)?;
    let report = convergence_order(sys.as_ref(), &cfg.rule, cfg.t_final, &cfg.z0, cfg.h0, cfg.levels, &cfg.solver)?;
    write_json(cfg.out_path.as_deref(), &report)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct GeometryReport {
    scheme: String,
    weight_a: f64,
    seed: u64,
    z_k: PhasePoint,
    z_next: PhasePoint,
    condition_i_residual: f64,
    condition_ii_residual: f64,
    weight_spread: f64,
    tangent_identity_max: f64,
    interleave_inverse: f64,
    interleave_forward: f64,
    consistency_map_symplectic: f64,
    hamiltonian_operator: f64,
    curve_linear: f64,
    curve_trig: f64,
    tangent_fd_gap: f64,
    candidate_field_gap: f64,
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> PhasePoint {
    PhasePoint::new((0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("finite draws")
}

fn run_geometry(cfg: &RunConfig) -> Result<i32, Failure> {
    let sys = builtin_system(&cfg.system, &cfg.params)?;
    let n = sys.dim_n();
    let dec = scheme_to_decomposition(&cfg.rule)?;
    let z_k = cfg.z0.clone();
    let z_next = dec.consistent_partner(&z_k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let rhos = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&a| rho_combination(&dec.with_weight(a)?, &z_k, &z_next))
        .collect::<Result<Vec<_>, Error>>()?;
    let weight_spread = rhos.iter().map(|r| (r - &rhos[0]).norm_inf()).fold(0.0, f64::max);

    let mut tangent_identity_max = 0.0f64;
    for _ in 0..TANGENT_SAMPLES {
        let v = random_vector(&mut rng, n);
        tangent_identity_max = tangent_identity_max.max(tangent_identity_residual(&dec, &z_k, &z_next, &v)?.relative());
    }
    let (inv, fwd) = interleave_residual(&dec, &z_k, &z_next)?;
    let (v1, v2) = (random_vector(&mut rng, n), random_vector(&mut rng, n));
    let (cond_i, cond_ii) = check_rule_conditions(&cfg.rule);

    let z1 = step(sys.as_ref(), &cfg.rule, cfg.h, &z_k, &cfg.solver)?.z_next;

    let report = GeometryReport {
        scheme: cfg.scheme.clone(),
        weight_a: dec.weight_a(),
        seed: cfg.seed,
        condition_i_residual: cond_i.relative(),
        condition_ii_residual: cond_ii.relative(),
        weight_spread,
        tangent_identity_max,
        interleave_inverse: inv.relative(),
        interleave_forward: fwd.relative(),
        consistency_map_symplectic: consistency_map_symplectic_residual(&dec, &z_k, &z_next)?.relative(),
        hamiltonian_operator: hamiltonian_operator_residual(&dec, &z_k, &z_next)?.relative(),
        curve_linear: curve_derivative_check(&dec, &z_k, &z_next, &v1, &v2, CurveParameterization::Linear)?.relative(),
        curve_trig: curve_derivative_check(&dec, &z_k, &z_next, &v1, &v2, CurveParameterization::Trig)?.relative(),
        tangent_fd_gap: dec.tangent_fd_check(&z_k, &z_next)?,
        candidate_field_gap: candidate_field_gap(&dec, sys.as_ref(), &z_k, &z1)?,
        z_k,
        z_next,
    };
    write_json(cfg.out_path.as_deref(), &report)?;
    Ok(EXIT_OK)
}

/// Executes a parsed configuration and returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let outcome = match cfg.command {
        Command::Integrate => run_integrate(cfg),
        Command::Verify => run_verify(cfg),
        Command::Converge => run_converge(cfg),
        Command::Geometry => run_geometry(cfg),
    };
    outcome.unwrap_or_else(|f| {
        report_failure(&f);
        EXIT_FAILURE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut traj = Trajectory::new("harmonic", 0.5, PhasePoint::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap(), 15.0);
        traj.push(PhasePoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(), 0.15, 1);
        let mut buf = Vec::new();
        write_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,q1,q2,p1,p2,H");
        assert_eq!(lines[2], "5.0000000000000000e-1,1.0000000000000001e-1,2.0000000000000001e-1,2.9999999999999999e-1,4.0000000000000002e-1,1.4999999999999999e-1");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
