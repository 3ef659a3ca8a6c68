#![allow(dead_code)]

use isym_core::{canonical_j, PhasePoint, SquareMatrix2n};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pt(v: &[f64]) -> PhasePoint {
    PhasePoint::new(v.to_vec()).unwrap()
}

pub fn random_point(rng: &mut impl Rng, n: usize, radius: f64) -> PhasePoint {
    pt(&(0..2 * n).map(|_| rng.gen_range(-radius..radius)).collect::<Vec<_>>())
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, bound: f64) -> SquareMatrix2n {
    SquareMatrix2n::from_fn(n, |_, _| rng.gen_range(-bound..bound))
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize, bound: f64) -> SquareMatrix2n {
    let m = random_matrix(rng, n, bound);
    (&m + &m.transpose()).scale(0.5)
}

/// `J·S` with `S` symmetric, rescaled to Frobenius norm `norm`.
pub fn random_hamiltonian(rng: &mut impl Rng, n: usize, norm: f64) -> SquareMatrix2n {
    let b = &canonical_j(n) * &random_symmetric(rng, n, 1.0);
    b.scale(norm / b.frobenius_norm().max(f64::MIN_POSITIVE))
}

fn block(n: usize, tl: &[f64], tr: &[f64], bl: &[f64], br: &[f64]) -> SquareMatrix2n {
    SquareMatrix2n::from_fn(n, |i, j| {
        let (bi, bj) = (i % n, j % n);
        let k = bi * n + bj;
        match (i < n, j < n) {
            (true, true) => tl[k],
            (true, false) => tr[k],
            (false, true) => bl[k],
            (false, false) => br[k],
        }
    })
}

fn eye(n: usize) -> Vec<f64> {
    (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect()
}

fn sym_block(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let x = rng.gen_range(-bound..bound);
            s[i * n + j] = x;
            s[j * n + i] = x;
        }
    }
    s
}

/// Product of upper shear, lower shear and `diag(M, M⁻ᵀ)` factors.
pub fn random_symplectic(rng: &mut impl Rng, n: usize) -> SquareMatrix2n {
    let zero = vec![0.0; n * n];
    let upper = block(n, &eye(n), &sym_block(rng, n, 1.0), &zero, &eye(n));
    let lower = block(n, &eye(n), &zero, &sym_block(rng, n, 1.0), &eye(n));
    // M = I + E with small E stays invertible
    let m: Vec<f64> = eye(n).iter().map(|d| d + rng.gen_range(-0.3..0.3) / n as f64).collect();
    let m_full = block(n, &m, &zero, &zero, &eye(n));
    let m_inv = m_full.inverse().unwrap();
    let m_inv_t: Vec<f64> = (0..n * n).map(|k| m_inv[(k % n, k / n)]).collect();
    let diag = block(n, &m, &zero, &zero, &m_inv_t);
    &(&upper * &diag) * &lower
}

/// Scaling-and-squaring Taylor exponential.
pub fn expm(m: &SquareMatrix2n) -> SquareMatrix2n {
    let n = m.dim_n();
    let norm = m.frobenius_norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m.scale(0.5f64.powi(squarings));
    let mut term = SquareMatrix2n::identity(n);
    let mut sum = SquareMatrix2n::identity(n);
    for k in 1..=13 {
        term = (&term * &a).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
