//! Small dense matrices: products, linear solves and the matrix exponential.
//!
//! Sizes here are the number of sites, so everything is dense and row-major.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(invalid("ragged matrix rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `M v` for a column vector `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `v M` for a row vector `v`.
    pub fn apply_left(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| libm::fabs(self[(i, j)])).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| libm::fabs(*x)).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Solves `self · X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        assert!(self.is_square());
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| libm::fabs(a[(i, col)]).total_cmp(&libm::fabs(a[(j, col)])))
                .unwrap_or(col);
            if a[(pivot, col)] == 0.0 {
                return Err(Error::Singular);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                b.swap_rows(pivot, col);
            }
            let p = a[(col, col)];
            for i in col + 1..n {
                let factor = a[(i, col)] / p;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] -= factor * v;
                }
                for j in 0..b.cols {
                    let v = b[(col, j)];
                    b[(i, j)] -= factor * v;
                }
            }
        }
        for j in 0..b.cols {
            for i in (0..n).rev() {
                let mut s = b[(i, j)];
                for k in i + 1..n {
                    s -= a[(i, k)] * b[(k, j)];
                }
                b[(i, j)] = s / a[(i, i)];
            }
        }
        Ok(b)
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for k in 0..self.cols {
            self.data.swap(i * self.cols + k, j * self.cols + k);
        }
    }

    /// Matrix exponential by scaling and squaring with the degree-13 Padé
    /// approximant (Higham 2005).
    pub fn expm(&self) -> Result<Self> {
        assert!(self.is_square());
        const THETA_13: f64 = 5.371920351148152;
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        let n = self.rows;
        let norm = self.norm_one();
        if !norm.is_finite() {
            return Err(invalid("matrix exponential of a non-finite matrix"));
        }
        let squarings = if norm > THETA_13 { libm::ceil(libm::log2(norm / THETA_13)) as i32 } else { 0 };
        let a = self.scaled(libm::ldexp(1.0, -squarings));
        let id = Self::identity(n);
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);

        let inner_u = a6.scaled(B[13]).add(&a4.scaled(B[11])).add(&a2.scaled(B[9]));
        let u = a.matmul(
            &a6.matmul(&inner_u)
                .add(&a6.scaled(B[7]))
                .add(&a4.scaled(B[5]))
                .add(&a2.scaled(B[3]))
                .add(&id.scaled(B[1])),
        );
        let inner_v = a6.scaled(B[12]).add(&a4.scaled(B[10])).add(&a2.scaled(B[8]));
        let v = a6
            .matmul(&inner_v)
            .add(&a6.scaled(B[6]))
            .add(&a4.scaled(B[4]))
            .add(&a2.scaled(B[2]))
            .add(&id.scaled(B[0]));

        let mut r = v.sub(&u).solve(&v.add(&u))?;
        for _ in 0..squarings {
            r = r.matmul(&r);
        }
        Ok(r)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Truncated Taylor series with many terms; independent of the Padé path.
    fn expm_taylor(a: &Matrix, scale_pow: i32) -> Matrix {
        let s = a.scaled(libm::ldexp(1.0, -scale_pow));
        let mut term = Matrix::identity(a.rows());
        let mut sum = term.clone();
        for k in 1..40 {
            term = term.matmul(&s).scaled(1.0 / k as f64);
            sum = sum.add(&term);
        }
        for _ in 0..scale_pow {
            sum = sum.matmul(&sum);
        }
        sum
    }

    #[test]
    fn expm_of_zero_is_identity() {
        assert_eq!(Matrix::zeros(3, 3).expm().unwrap(), Matrix::identity(3));
    }

    #[test]
    fn expm_matches_taylor() {
        let a = Matrix::from_rows(&[&[-1.0, 0.7, 0.3], &[0.2, -0.5, 0.3], &[1.5, 0.5, -2.0]]).unwrap();
        for t in [0.1, 1.0, 4.0] {
            let p = a.scaled(t).expm().unwrap();
            let q = expm_taylor(&a.scaled(t), 6);
            assert!(p.max_abs_diff(&q) < 1e-12, "t={t}");
        }
    }

    #[test]
    fn expm_diagonal() {
        let a = Matrix::diag(&[1.0, -2.0, 0.5]);
        let e = a.expm().unwrap();
        assert!((e[(0, 0)] - libm::exp(1.0)).abs() < 1e-14);
        assert!((e[(1, 1)] - libm::exp(-2.0)).abs() < 1e-15);
        assert!(e[(0, 1)].abs() < 1e-16);
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = Matrix::from_rows(&[&[0.0, 2.0], &[3.0, 1.0]]).unwrap();
        let b = Matrix::from_rows(&[&[4.0], &[5.0]]).unwrap();
        let x = a.solve(&b).unwrap();
        assert!(a.matmul(&x).max_abs_diff(&b) < 1e-14);
        assert_eq!(Matrix::zeros(2, 2).solve(&b), Err(Error::Singular));
    }
}
