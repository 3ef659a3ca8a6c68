use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::PhasePoint;

/// Dense real `2n × 2n` matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix2n {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix2n {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "phase space needs n >= 1");
        Self {
            n,
            data: vec![0.0; 4 * n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    /// `s · I_{2n}`
    pub fn scalar(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..2 * n {
            m[(i, i)] = s;
        }
        m
    }

    /// `diag(upper · I_n, lower · I_n)`
    pub fn block_scalar_diag(n: usize, upper: f64, lower: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = upper;
            m[(n + i, n + i)] = lower;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() || !diag.len().is_multiple_of(2) {
            return Err(Error::BadParams(format!(
                "diagonal needs an even, non-zero length, got {}",
                diag.len()
            )));
        }
        let mut m = Self::zeros(diag.len() / 2);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        let size = 2 * n;
        for i in 0..size {
            for j in 0..size {
                m.data[i * size + j] = f(i, j);
            }
        }
        m
    }

    /// Builds from explicit rows. Rejects ragged, odd-sized and non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size == 0 || !size.is_multiple_of(2) {
            return Err(Error::BadParams(format!(
                "matrix needs an even, non-zero number of rows, got {size}"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::BadParams(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
        }
        let m = Self {
            n: size / 2,
            data: rows.iter().flatten().copied().collect(),
        };
        m.check_finite()?;
        Ok(m)
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(k) = self.data.iter().position(|x| !x.is_finite()) {
            let size = self.size();
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                k / size,
                k % size
            )));
        }
        Ok(())
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    /// Row/column count `2n`.
    pub fn size(&self) -> usize {
        2 * self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.size()).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let size = self.size();
        Self::from_fn(self.n, |i, j| self.data[j * size + i])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| s * x).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.data
            .chunks(self.size())
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mul_vec(&self, v: &PhasePoint) -> PhasePoint {
        assert_eq!(v.len(), self.size(), "matrix-vector dimension mismatch");
        let out = self
            .data
            .chunks(self.size())
            .map(|row| row.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
            .collect();
        PhasePoint::from_vec_unchecked(out)
    }

    pub fn column(&self, j: usize) -> PhasePoint {
        PhasePoint::from_vec_unchecked((0..self.size()).map(|i| self[(i, j)]).collect())
    }

    pub fn from_columns(cols: &[PhasePoint]) -> Result<Self> {
        let size = cols.len();
        if size == 0 || !size.is_multiple_of(2) || cols.iter().any(|c| c.len() != size) {
            return Err(Error::BadParams("columns do not form a 2n x 2n matrix".into()));
        }
        Ok(Self::from_fn(size / 2, |i, j| cols[j][i]))
    }

    pub fn check_dim(&self, expected_n: usize) -> Result<()> {
        if self.n != expected_n {
            return Err(Error::DimensionMismatch {
                expected: 2 * expected_n,
                actual: self.size(),
            });
        }
        Ok(())
    }

    pub fn lu(&self) -> Result<LuFactors> {
        LuFactors::factor(self)
    }

    pub fn determinant(&self) -> f64 {
        match self.lu() {
            Ok(lu) => lu.determinant(),
            Err(_) => 0.0,
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let lu = self.lu()?;
        let cols: Vec<_> = (0..self.size())
            .map(|j| lu.solve(&PhasePoint::unit(self.n, j)))
            .collect();
        Self::from_columns(&cols)
    }

    /// Solves `self · X = rhs` column by column.
    pub fn solve_matrix(&self, rhs: &Self) -> Result<Self> {
        rhs.check_dim(self.n)?;
        let lu = self.lu()?;
        let cols: Vec<_> = (0..self.size()).map(|j| lu.solve(&rhs.column(j))).collect();
        Self::from_columns(&cols)
    }
}

impl fmt::Debug for SquareMatrix2n {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SquareMatrix2n")
            .field("n", &self.n)
            .field("rows", &self.rows())
            .finish()
    }
}

impl Index<(usize, usize)> for SquareMatrix2n {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.size() + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix2n {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        let size = self.size();
        &mut self.data[i * size + j]
    }
}

impl Add for &SquareMatrix2n {
    type Output = SquareMatrix2n;

    fn add(self, rhs: &SquareMatrix2n) -> SquareMatrix2n {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        SquareMatrix2n {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SquareMatrix2n {
    type Output = SquareMatrix2n;

    fn sub(self, rhs: &SquareMatrix2n) -> SquareMatrix2n {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        SquareMatrix2n {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &SquareMatrix2n {
    type Output = SquareMatrix2n;

    fn neg(self) -> SquareMatrix2n {
        self.scale(-1.0)
    }
}

impl Mul for &SquareMatrix2n {
    type Output = SquareMatrix2n;

    fn mul(self, rhs: &SquareMatrix2n) -> SquareMatrix2n {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        let size = self.size();
        let mut out = SquareMatrix2n::zeros(self.n);
        for i in 0..size {
            for k in 0..size {
                let a = self.data[i * size + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..size {
                    out.data[i * size + j] += a * rhs.data[k * size + j];
                }
            }
        }
        out
    }
}

impl Mul<&PhasePoint> for &SquareMatrix2n {
    type Output = PhasePoint;

    fn mul(self, rhs: &PhasePoint) -> PhasePoint {
        self.mul_vec(rhs)
    }
}

/// Partial-pivoting LU factorization `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl LuFactors {
    /// Fails with `SingularMatrix` when a pivot falls to `ε·‖A‖∞` or below.
    pub fn factor(a: &SquareMatrix2n) -> Result<Self> {
        let size = a.size();
        let threshold = f64::EPSILON * a.inf_norm();
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..size).collect();
        let mut sign = 1.0;

        for col in 0..size {
            let (pivot_row, pivot) = (col..size)
                .map(|r| (r, lu[r * size + col]))
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .expect("non-empty pivot range");
            if pivot == 0.0 || pivot.abs() <= threshold {
                return Err(Error::SingularMatrix {
                    column: col,
                    pivot: pivot.abs(),
                    threshold,
                });
            }
            if pivot_row != col {
                for j in 0..size {
                    lu.swap(col * size + j, pivot_row * size + j);
                }
                perm.swap(col, pivot_row);
                sign = -sign;
            }
            for r in col + 1..size {
                let factor = lu[r * size + col] / pivot;
                lu[r * size + col] = factor;
                if factor != 0.0 {
                    for j in col + 1..size {
                        lu[r * size + j] -= factor * lu[col * size + j];
                    }
                }
            }
        }
        Ok(Self {
            n: a.dim_n(),
            lu,
            perm,
            sign,
        })
    }

    pub fn solve(&self, rhs: &PhasePoint) -> PhasePoint {
        let size = 2 * self.n;
        assert_eq!(rhs.len(), size, "rhs dimension mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..size {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * size + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..size).rev() {
            let mut acc = x[i];
            for j in i + 1..size {
                acc -= self.lu[i * size + j] * x[j];
            }
            x[i] = acc / self.lu[i * size + i];
        }
        PhasePoint::from_vec_unchecked(x)
    }

    pub fn determinant(&self) -> f64 {
        let size = 2 * self.n;
        (0..size).fold(self.sign, |d, i| d * self.lu[i * size + i])
    }
}
