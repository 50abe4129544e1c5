//! The underlying finite-state chain: its transition semigroup `P_t`, the
//! killed semigroup `P^b_t` and h-transforms of it.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::measure::{check_dim, TestFunction};

const ROW_SUM_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-12;

/// A conservative Q-matrix chain on `d` sites.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    generator: Matrix,
}

impl MotionModel {
    /// Validates off-diagonal entries `>= 0` and zero row sums.
    pub fn new(generator: Matrix) -> Result<Self> {
        if !generator.is_square() || generator.rows() == 0 {
            return Err(invalid("generator must be a nonempty square matrix"));
        }
        let d = generator.rows();
        for i in 0..d {
            let row = generator.row(i);
            let mut scale: f64 = 1.0;
            for (j, &q) in row.iter().enumerate() {
                if !q.is_finite() {
                    return Err(invalid(format!("generator entry ({i},{j}) is not finite")));
                }
                if i != j && q < 0.0 {
                    return Err(invalid(format!("generator entry ({i},{j}) = {q} is negative")));
                }
                scale = scale.max(libm::fabs(q));
            }
            let sum: f64 = row.iter().sum();
            if libm::fabs(sum) > ROW_SUM_TOL * scale {
                return Err(invalid(format!("generator row {i} sums to {sum:e}, expected 0")));
            }
        }
        Ok(Self { generator })
    }

    pub fn from_row_major(d: usize, entries: Vec<f64>) -> Result<Self> {
        Self::new(Matrix::from_row_major(d, d, entries)?)
    }

    /// No motion at all: every site is absorbing.
    pub fn still(d: usize) -> Self {
        Self { generator: Matrix::zeros(d, d) }
    }

    /// Two sites, jumping to the other site at rate `q`.
    pub fn symmetric_two_state(q: f64) -> Result<Self> {
        Self::new(Matrix::from_rows(&[&[-q, q], &[q, -q]])?)
    }

    pub fn dim(&self) -> usize {
        self.generator.rows()
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn is_still(&self) -> bool {
        self.generator.as_slice().iter().all(|&q| q == 0.0)
    }

    /// `e^{tQ}`, entries clamped into `[0, 1]` at rounding level.
    pub fn transition(&self, t: f64) -> Result<Matrix> {
        check_time(t)?;
        let mut p = self.generator.scaled(t).expm()?;
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                let v = &mut p[(i, j)];
                if *v < 0.0 && *v > -CLAMP_TOL {
                    *v = 0.0;
                } else if *v > 1.0 && *v < 1.0 + CLAMP_TOL {
                    *v = 1.0;
                }
            }
        }
        Ok(p)
    }

    /// `e^{t(Q - diag b)}`. With `b ≡ 0` this is exactly [`Self::transition`].
    pub fn killed_transition(&self, b: &KillingRate, t: f64) -> Result<Matrix> {
        check_dim(self.dim(), b.dim())?;
        if b.is_zero() {
            return self.transition(t);
        }
        check_time(t)?;
        let mut p = self.generator.sub(&Matrix::diag(b.rates())).scaled(t).expm()?;
        // Q - diag(b) is Metzler, so its exponential is entrywise nonnegative.
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                if p[(i, j)] < 0.0 && p[(i, j)] > -CLAMP_TOL {
                    p[(i, j)] = 0.0;
                }
            }
        }
        Ok(p)
    }

    /// `T_t f = h^{-1} P^b_t (h f)`, as the matrix `diag(h)^{-1} P^b_t diag(h)`.
    pub fn h_transform(&self, b: &KillingRate, h: &TestFunction, t: f64) -> Result<Matrix> {
        check_dim(self.dim(), h.dim())?;
        if let Some(i) = h.values().iter().position(|&x| x <= 0.0) {
            return Err(invalid(format!("h must be strictly positive, h[{i}] = {}", h.values()[i])));
        }
        let p = self.killed_transition(b, t)?;
        let hv = h.values();
        let d = self.dim();
        let mut out = p;
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] *= hv[j] / hv[i];
            }
        }
        Ok(out)
    }

    /// `h(x) = ∫_0^1 P^b_s 1(x) ds` by composite Simpson on 65 nodes.
    ///
    /// For a conservative chain with `b ≡ 0` this is identically 1.
    pub fn unit_occupation(&self, b: &KillingRate) -> Result<TestFunction> {
        const NODES: usize = 65;
        let h = 1.0 / (NODES - 1) as f64;
        let d = self.dim();
        let ones = alloc::vec![1.0; d];
        let step = self.killed_transition(b, h)?;
        let mut current = ones.clone();
        let mut acc = alloc::vec![0.0; d];
        for k in 0..NODES {
            let w = if k == 0 || k == NODES - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            for (a, c) in acc.iter_mut().zip(&current) {
                *a += w * c;
            }
            current = step.apply(&current);
        }
        TestFunction::new(acc.into_iter().map(|a| a * h / 3.0).collect())
    }
}

/// Per-site killing rate `b` (negative entries create mass).
#[derive(Debug, Clone, PartialEq)]
pub struct KillingRate {
    rates: Vec<f64>,
}

impl KillingRate {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(i) = rates.iter().position(|r| !r.is_finite()) {
            return Err(invalid(format!("killing rate {i} is not finite")));
        }
        Ok(Self { rates })
    }

    pub fn zero(d: usize) -> Self {
        Self { rates: alloc::vec![0.0; d] }
    }

    pub fn constant(d: usize, b: f64) -> Result<Self> {
        Self::new(alloc::vec![b; d])
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn is_zero(&self) -> bool {
        self.rates.iter().all(|&b| b == 0.0)
    }

    /// `‖b‖ = sup |b(x)|`.
    pub fn sup_norm(&self) -> f64 {
        self.rates.iter().map(|b| libm::fabs(*b)).fold(0.0, f64::max)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}
