use std::fmt;
use std::ops::{Add, Index, IndexMut, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of phase space ℝ^{2n}, laid out as `(q_1..q_n, p_1..p_n)`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhasePoint {
    coords: Vec<f64>,
}

impl PhasePoint {
    /// Builds a point from raw coordinates. The length must be even and
    /// non-zero, and every entry finite.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return Err(Error::BadParams(format!(
                "phase point needs an even, non-zero number of coordinates, got {}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {i} of phase point")));
        }
        Ok(Self { coords })
    }

    pub fn from_qp(q: &[f64], p: &[f64]) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        let mut coords = Vec::with_capacity(2 * q.len());
        coords.extend_from_slice(q);
        coords.extend_from_slice(p);
        Self::new(coords)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "phase space needs n >= 1");
        Self {
            coords: vec![0.0; 2 * n],
        }
    }

    /// Unit vector along coordinate `i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut z = Self::zeros(n);
        z.coords[i] = 1.0;
        z
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.len().is_multiple_of(2));
        Self { coords }
    }

    /// Degrees of freedom `n`.
    pub fn dim_n(&self) -> usize {
        self.coords.len() / 2
    }

    /// Full phase-space dimension `2n`.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn q(&self) -> &[f64] {
        &self.coords[..self.dim_n()]
    }

    pub fn p(&self) -> &[f64] {
        &self.coords[self.dim_n()..]
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.coords.iter()
    }

    pub fn norm_inf(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_vec_unchecked(self.coords.iter().map(|x| s * x).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_vec_unchecked(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn check_dim(&self, expected_n: usize) -> Result<()> {
        if self.dim_n() != expected_n {
            return Err(Error::DimensionMismatch {
                expected: 2 * expected_n,
                actual: self.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for PhasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("PhasePoint").field(&self.coords).finish()
    }
}

impl TryFrom<Vec<f64>> for PhasePoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PhasePoint> for Vec<f64> {
    fn from(z: PhasePoint) -> Self {
        z.coords
    }
}

impl Index<usize> for PhasePoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl IndexMut<usize> for PhasePoint {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.coords[i]
    }
}

impl Add for &PhasePoint {
    type Output = PhasePoint;

    fn add(self, rhs: &PhasePoint) -> PhasePoint {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &PhasePoint {
    type Output = PhasePoint;

    fn sub(self, rhs: &PhasePoint) -> PhasePoint {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &PhasePoint {
    type Output = PhasePoint;

    fn neg(self) -> PhasePoint {
        self.scale(-1.0)
    }
}
