//! Branching mechanisms
//! `φ(x,z) = b(x) z + c(x) z² + Σ_atoms w (e^{-zu} - 1 + zu)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::motion::KillingRate;

/// One atom `w·δ_u` of the jump kernel `m(x, du)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpAtom {
    pub size: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMechanism {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    jumps: Vec<Vec<JumpAtom>>,
}

impl BranchingMechanism {
    pub fn new(drift: Vec<f64>, diffusion: Vec<f64>, jumps: Vec<Vec<JumpAtom>>) -> Result<Self> {
        let d = drift.len();
        if d == 0 || diffusion.len() != d || jumps.len() != d {
            return Err(invalid(format!(
                "mechanism arrays disagree: b has {d}, c has {}, m has {} sites",
                diffusion.len(),
                jumps.len()
            )));
        }
        for i in 0..d {
            if !drift[i].is_finite() {
                return Err(invalid(format!("b[{i}] is not finite")));
            }
            if !(diffusion[i].is_finite() && diffusion[i] >= 0.0) {
                return Err(invalid(format!("c[{i}] = {} must be finite and >= 0", diffusion[i])));
            }
            let mut mass = 0.0;
            for a in &jumps[i] {
                if !(a.size.is_finite() && a.size > 0.0) {
                    return Err(invalid(format!("jump size {} at site {i} must be > 0", a.size)));
                }
                if !(a.weight.is_finite() && a.weight >= 0.0) {
                    return Err(invalid(format!("jump weight {} at site {i} must be >= 0", a.weight)));
                }
                mass += a.weight * a.size.min(a.size * a.size);
            }
            if !mass.is_finite() {
                return Err(invalid(format!("jump kernel at site {i} has infinite (u ∧ u²)-mass")));
            }
        }
        let mech = Self { drift, diffusion, jumps };
        for i in 0..d {
            let at_zero = mech.phi_unchecked(i, 0.0);
            if at_zero != 0.0 {
                return Err(invalid(format!("phi({i}, 0) = {at_zero}, expected 0")));
            }
        }
        Ok(mech)
    }

    /// `φ(z) = b z + c z²` at every site, no jumps.
    pub fn uniform(d: usize, b: f64, c: f64) -> Result<Self> {
        Self::new(alloc::vec![b; d], alloc::vec![c; d], alloc::vec![Vec::new(); d])
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn jumps(&self) -> &[Vec<JumpAtom>] {
        &self.jumps
    }

    pub fn has_jumps(&self) -> bool {
        self.jumps.iter().any(|atoms| atoms.iter().any(|a| a.weight > 0.0))
    }

    /// The linear part `b` as a killing rate for first moments.
    pub fn killing_rate(&self) -> KillingRate {
        KillingRate::new(self.drift.clone()).expect("drift validated finite")
    }

    pub fn phi(&self, site: usize, z: f64) -> Result<f64> {
        if site >= self.dim() {
            return Err(invalid(format!("site {site} out of range")));
        }
        if !(z >= 0.0) {
            return Err(invalid(format!("phi is defined for z >= 0, got {z}")));
        }
        Ok(self.phi_unchecked(site, z))
    }

    /// The same formula without the `z >= 0` check; solver stages may probe
    /// slightly negative arguments.
    pub(crate) fn phi_unchecked(&self, site: usize, z: f64) -> f64 {
        let mut v = self.drift[site] * z + self.diffusion[site] * z * z;
        for a in &self.jumps[site] {
            let x = z * a.size;
            // e^{-x} - 1 + x without cancellation near 0
            v += a.weight * (libm::expm1(-x) + x);
        }
        v
    }
}

/// `φ(site, z)`; rejects `z < 0`.
pub fn phi_eval(mech: &BranchingMechanism, site: usize, z: f64) -> Result<f64> {
    mech.phi(site, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn with_atom(u: f64, w: f64) -> BranchingMechanism {
        BranchingMechanism::new(vec![0.0], vec![0.0], vec![vec![JumpAtom { size: u, weight: w }]]).unwrap()
    }

    #[test]
    fn phi_examples() {
        let m = BranchingMechanism::uniform(1, 1.0, 1.0).unwrap();
        assert_eq!(phi_eval(&m, 0, 0.0).unwrap(), 0.0);
        assert_eq!(phi_eval(&m, 0, 2.0).unwrap(), 6.0);
        let j = with_atom(1.0, 1.0);
        assert!((phi_eval(&j, 0, 1.0).unwrap() - libm::exp(-1.0)).abs() < 1e-15);
        assert!((phi_eval(&j, 0, 1.0).unwrap() - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn phi_rejects_negative_argument() {
        let m = BranchingMechanism::uniform(1, 1.0, 1.0).unwrap();
        assert!(phi_eval(&m, 0, -0.1).is_err());
        assert!(phi_eval(&m, 3, 0.1).is_err());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(BranchingMechanism::uniform(1, 0.0, -1.0).is_err());
        assert!(BranchingMechanism::new(vec![0.0], vec![0.0], vec![vec![JumpAtom { size: 0.0, weight: 1.0 }]]).is_err());
        assert!(BranchingMechanism::new(vec![0.0, 1.0], vec![0.0], vec![vec![]]).is_err());
    }

    proptest! {
        #[test]
        fn phi_is_convex(b in -2.0..2.0f64, c in 0.0..3.0f64, u in 0.01..5.0f64, w in 0.0..3.0f64, h in 0.001..0.5f64) {
            let m = BranchingMechanism::new(vec![b], vec![c], vec![vec![JumpAtom { size: u, weight: w }]]).unwrap();
            for k in 1..40 {
                let z = k as f64 * h;
                let second = m.phi_unchecked(0, z + h) - 2.0 * m.phi_unchecked(0, z) + m.phi_unchecked(0, z - h);
                prop_assert!(second >= -1e-12, "second difference {second} at z={z}");
            }
        }
    }
}
