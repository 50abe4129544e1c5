//! Monte Carlo summaries.

use alloc::vec::Vec;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean (sample variance with `n - 1`).
    pub se: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, count: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            libm::sqrt(var / n as f64)
        } else {
            f64::INFINITY
        };
        Self { mean, se, count: n }
    }

    /// `(mean - target) / se`. Zero when both the error and the SE vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        z(self.mean - target, self.se)
    }

    /// `-log(mean)` with its delta-method standard error `se / mean`.
    pub fn neg_log(&self) -> Self {
        Self { mean: -libm::log(self.mean), se: self.se / self.mean, count: self.count }
    }
}

fn z(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

/// z-score of the difference of two independent estimates.
pub fn two_sample_z(a: &Estimate, b: &Estimate) -> f64 {
    z(a.mean - b.mean, libm::sqrt(a.se * a.se + b.se * b.se))
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let mut x: Vec<f64> = a.to_vec();
    let mut y: Vec<f64> = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max(libm::fabs(i as f64 / n as f64 - j as f64 / m as f64));
    }
    let en = libm::sqrt((n * m) as f64 / (n + m) as f64);
    KsTest { statistic: d, p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d) }
}

/// `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} e^{-2 j² λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = sign * libm::exp(-2.0 * jf * jf * lambda * lambda);
        sum += term;
        if libm::fabs(term) < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_known_sample() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3
        assert!((e.se - libm::sqrt(5.0 / 3.0 / 4.0)).abs() < 1e-15);
        assert!((e.z_score(2.0) - 0.5 / e.se).abs() < 1e-15);
        assert_eq!(Estimate::from_samples(&[2.0, 2.0]).z_score(2.0), 0.0);
    }

    #[test]
    fn neg_log_delta_method() {
        let e = Estimate { mean: 0.5, se: 0.01, count: 10 };
        let l = e.neg_log();
        assert!((l.mean - libm::log(2.0)).abs() < 1e-15);
        assert!((l.se - 0.02).abs() < 1e-15);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let same = ks_two_sample(&a, &a);
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        let b: Vec<f64> = (0..200).map(|i| 1000.0 + i as f64).collect();
        let far = ks_two_sample(&a, &b);
        assert_eq!(far.statistic, 1.0);
        assert!(far.p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.0) = 0.26999967..., Q(1.36) ≈ 0.0494
        assert!((kolmogorov_q(1.0) - 0.26999967).abs() < 1e-7);
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
    }
}
