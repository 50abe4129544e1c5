//! Finite measures and test functions on a finite ordered site set.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Ordered, distinct site labels. The state space `E` of every model.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<String>", into = "Vec<String>"))]
pub struct SiteSet {
    labels: Vec<String>,
}

impl SiteSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("a site set needs at least one site"));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(invalid(format!("duplicate site label {a:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Sites labelled `0..d`.
    pub fn anonymous(d: usize) -> Result<Self> {
        Self::new((0..d).map(|i| format!("{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for SiteSet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<SiteSet> for Vec<String> {
    fn from(s: SiteSet) -> Self {
        s.labels
    }
}

fn check_nonnegative(what: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid(format!("{what} must have at least one component")));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(invalid(format!("{what} component {i} is {v}, expected a finite value >= 0")));
        }
    }
    Ok(())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// A nonnegative mass vector over the sites: an element of `M(E)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct FiniteMeasure {
    masses: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        check_nonnegative("measure", &masses)?;
        Ok(Self { masses })
    }

    pub fn zero(d: usize) -> Self {
        Self { masses: alloc::vec![0.0; d] }
    }

    /// `mass` units at `site`.
    pub fn dirac(d: usize, site: usize, mass: f64) -> Self {
        let mut masses = alloc::vec![0.0; d];
        masses[site] = mass;
        Self { masses }
    }

    /// Clamps rounding-level negatives (> -1e-12) to zero.
    pub(crate) fn from_clamped(mut masses: Vec<f64>) -> Self {
        for m in &mut masses {
            if *m < 0.0 && *m > -1e-12 {
                *m = 0.0;
            }
        }
        Self { masses }
    }

    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_null(&self) -> bool {
        self.masses.iter().all(|&m| m == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { masses: self.masses.iter().map(|m| a * m).collect() }
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { masses: self.masses.iter().zip(&other.masses).map(|(a, b)| a + b).collect() })
    }

    /// `μ(f) = Σ μ_i f_i`.
    pub fn integrate(&self, f: &TestFunction) -> Result<f64> {
        check_dim(self.dim(), f.dim())?;
        Ok(dot(&self.masses, f.values()))
    }

    pub fn normalize(&self) -> Normalized {
        let total = self.total();
        let probabilities = (total > 0.0).then(|| self.masses.iter().map(|m| m / total).collect());
        Normalized { total, probabilities }
    }
}

impl TryFrom<Vec<f64>> for FiniteMeasure {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FiniteMeasure> for Vec<f64> {
    fn from(m: FiniteMeasure) -> Self {
        m.masses
    }
}

/// Total mass and, for a nonzero measure, the normalized probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub total: f64,
    pub probabilities: Option<Vec<f64>>,
}

/// A nonnegative function on the sites: an element of `B(E)^+`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct TestFunction {
    values: Vec<f64>,
}

impl TestFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_nonnegative("test function", &values)?;
        Ok(Self { values })
    }

    pub fn zero(d: usize) -> Self {
        Self { values: alloc::vec![0.0; d] }
    }

    pub fn constant(d: usize, value: f64) -> Result<Self> {
        Self::new(alloc::vec![value; d])
    }

    pub(crate) fn from_solver(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| a * v).collect())
    }

    /// Componentwise `self <= other + tol`.
    pub fn le(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && self.values.iter().zip(&other.values).all(|(a, b)| *a <= *b + tol)
    }
}

impl TryFrom<Vec<f64>> for TestFunction {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TestFunction> for Vec<f64> {
    fn from(f: TestFunction) -> Self {
        f.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `μ(f)`; rejects mismatched dimensions.
pub fn integrate(mu: &FiniteMeasure, f: &TestFunction) -> Result<f64> {
    mu.integrate(f)
}

/// Total mass and normalized measure (absent for the null measure).
pub fn normalize(mu: &FiniteMeasure) -> Normalized {
    mu.normalize()
}
