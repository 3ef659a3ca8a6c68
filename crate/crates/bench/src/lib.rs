//! Shared fixtures for the criterion benchmarks.

use isym_core::{builtin_system, ConsistencyRule, HamiltonianSystem, PhasePoint, SystemParams};

pub struct Fixture {
    pub system: Box<dyn HamiltonianSystem>,
    pub rule: ConsistencyRule,
    pub z0: PhasePoint,
}

pub fn fixture(system: &str, rule: ConsistencyRule) -> Fixture {
    let sys = builtin_system(system, &SystemParams::new()).expect("builtin system");
    let z0 = match system {
        "kepler" => vec![1.0, 0.0, 0.0, 1.2],
        _ => {
            let n = sys.dim_n();
            let mut z = vec![0.0; 2 * n];
            z[..n].fill(1.0);
            z
        }
    };
    Fixture {
        system: sys,
        rule,
        z0: PhasePoint::new(z0).expect("finite start"),
    }
}
