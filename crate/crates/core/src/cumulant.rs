//! Cumulant flows `V_t f`, the occupation flow `V_t(f, g)`, S-functionals of
//! closed entrance laws and first moments.
//!
//! On a finite site set the mild equation is the ODE system
//! `v' = Q v - φ(v) + g`, `v_0 = f`, integrated here with classical RK4 on a
//! uniform grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::measure::{check_dim, dot, FiniteMeasure, TestFunction};
use crate::mechanism::BranchingMechanism;
use crate::motion::MotionModel;

const CLAMP_SILENT: f64 = 1e-12;
const CLAMP_WARN: f64 = 1e-8;

/// Grid values of a cumulant flow.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSolution {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    step: f64,
    clamped: usize,
}

impl CumulantSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `values()[k]` is the solution at `times()[k]`.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// How many components were clamped up to 0 after a small undershoot.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn final_values(&self) -> &[f64] {
        self.values.last().expect("grid is never empty")
    }

    pub fn final_function(&self) -> TestFunction {
        TestFunction::from_solver(self.final_values().to_vec())
    }

    /// Composite trapezoid of `h(k, v_k)` over the grid.
    pub(crate) fn trapezoid(&self, mut h: impl FnMut(usize, &[f64]) -> f64) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let mut acc = 0.5 * (h(0, &self.values[0]) + h(n - 1, &self.values[n - 1]));
        for k in 1..n - 1 {
            acc += h(k, &self.values[k]);
        }
        acc * self.step
    }
}

/// Number of uniform cells covering `horizon` at nominal `step`.
pub(crate) fn cells(horizon: f64, step: f64) -> usize {
    let n = libm::ceil(horizon / step * (1.0 - 1e-12));
    (n as usize).max(1)
}

fn rhs(mech: &BranchingMechanism, q: &Matrix, g: Option<&[f64]>, v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for i in 0..d {
        let mut s = dot(q.row(i), v) - mech.phi_unchecked(i, v[i]);
        if let Some(g) = g {
            s += g[i];
        }
        out[i] = s;
    }
}

/// RK4 on `ceil(horizon/step)` equal cells. A zero horizon gives the
/// one-point grid `{0}`.
pub(crate) fn flow(
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &[f64],
    g: Option<&[f64]>,
    horizon: f64,
    step: f64,
) -> Result<CumulantSolution> {
    let d = f.len();
    check_dim(mech.dim(), d)?;
    check_dim(motion.dim(), d)?;
    if let Some(g) = g {
        check_dim(d, g.len())?;
    }
    if horizon < 0.0 || horizon.is_nan() {
        return Err(Error::NegativeTime(horizon));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("solver step must be positive and finite"));
    }
    if horizon == 0.0 {
        return Ok(CumulantSolution { times: vec![0.0], values: vec![f.to_vec()], step, clamped: 0 });
    }
    let n = cells(horizon, step);
    let h = horizon / n as f64;
    let q = motion.generator();

    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    times.push(0.0);
    values.push(f.to_vec());

    let mut v = f.to_vec();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut clamped = 0;

    for k in 1..=n {
        rhs(mech, q, g, &v, &mut k1);
        for i in 0..d {
            tmp[i] = v[i] + 0.5 * h * k1[i];
        }
        rhs(mech, q, g, &tmp, &mut k2);
        for i in 0..d {
            tmp[i] = v[i] + 0.5 * h * k2[i];
        }
        rhs(mech, q, g, &tmp, &mut k3);
        for i in 0..d {
            tmp[i] = v[i] + h * k3[i];
        }
        rhs(mech, q, g, &tmp, &mut k4);

        let t = if k == n { horizon } else { k as f64 * h };
        for i in 0..d {
            let x = v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !x.is_finite() {
                return Err(Error::Divergence { time: t });
            }
            v[i] = if x >= 0.0 {
                x
            } else if x >= -CLAMP_SILENT {
                clamped += 1;
                0.0
            } else if x >= -CLAMP_WARN {
                log::warn!("cumulant undershoot {x:e} at t = {t} clamped to 0");
                clamped += 1;
                0.0
            } else {
                return Err(Error::Undershoot { time: t, value: x });
            };
        }
        times.push(t);
        values.push(v.clone());
    }
    Ok(CumulantSolution { times, values, step: h, clamped })
}

fn check_public(horizon: f64, step: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be positive and finite"));
    }
    if !(step > 0.0) {
        return Err(invalid("step must be positive"));
    }
    if step >= horizon {
        return Err(invalid("step must be smaller than the horizon"));
    }
    Ok(())
}

/// `V_t f` on `[0, horizon]`.
pub fn solve_cumulant(
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    horizon: f64,
    step: f64,
) -> Result<CumulantSolution> {
    check_public(horizon, step)?;
    flow(mech, motion, f.values(), None, horizon, step)
}

/// `V_t(f, g)`: the flow with source `g`, the log-Laplace exponent of
/// `X_t(f) + ∫_0^t X_s(g) ds`.
pub fn solve_cumulant_occupation(
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    g: &TestFunction,
    horizon: f64,
    step: f64,
) -> Result<CumulantSolution> {
    check_public(horizon, step)?;
    flow(mech, motion, f.values(), Some(g.values()), horizon, step)
}

/// A closed entrance law `κ_t = μ_0 P_t` for the motion.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct PEntranceLaw {
    seed: FiniteMeasure,
}

impl PEntranceLaw {
    pub fn closed(seed: FiniteMeasure) -> Self {
        Self { seed }
    }

    pub fn zero(d: usize) -> Self {
        Self { seed: FiniteMeasure::zero(d) }
    }

    pub fn seed(&self) -> &FiniteMeasure {
        &self.seed
    }

    pub fn dim(&self) -> usize {
        self.seed.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.seed.is_null()
    }

    /// `κ_t`.
    pub fn at(&self, motion: &MotionModel, t: f64) -> Result<FiniteMeasure> {
        check_dim(motion.dim(), self.dim())?;
        let p = motion.transition(t)?;
        Ok(FiniteMeasure::from_clamped(p.apply_left(self.seed.masses())))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { seed: self.seed.scaled(a) }
    }

    /// `κ_{kh}` for `k = 0..=n`.
    fn ladder(&self, motion: &MotionModel, h: f64, n: usize) -> Result<Vec<Vec<f64>>> {
        let p = motion.transition(h)?;
        let mut out = Vec::with_capacity(n + 1);
        let mut w = self.seed.masses().to_vec();
        for _ in 0..n {
            let next = p.apply_left(&w);
            out.push(w);
            w = next;
        }
        out.push(w);
        Ok(out)
    }
}

fn s_quadrature(
    kappa: &PEntranceLaw,
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    g: Option<&TestFunction>,
    t: f64,
    step: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("S-functional needs t > 0"));
    }
    check_dim(kappa.dim(), f.dim())?;
    if kappa.is_zero() {
        return Ok(0.0);
    }
    let sol = flow(mech, motion, f.values(), g.map(|g| g.values()), t, step)?;
    let n = sol.len() - 1;
    let w = kappa.ladder(motion, sol.step(), n)?;
    let mut value = dot(&w[n], f.values());
    if let Some(g) = g {
        value += trapezoid_values((0..n + 1).map(|k| dot(&w[k], g.values())), sol.step());
    }
    let mut phi = vec![0.0; f.dim()];
    value -= sol.trapezoid(|k, v| {
        for (i, p) in phi.iter_mut().enumerate() {
            *p = mech.phi_unchecked(i, v[i]);
        }
        dot(&w[n - k], &phi)
    });
    Ok(value)
}

fn trapezoid_values(values: impl ExactSizeIterator<Item = f64>, h: f64) -> f64 {
    let n = values.len();
    let mut acc = 0.0;
    for (k, y) in values.enumerate() {
        acc += if k == 0 || k + 1 == n { 0.5 * y } else { y };
    }
    acc * h
}

/// `S_t(κ, f) = κ_t(f) - ∫_0^t κ_{t-s}(φ(V_s f)) ds`, trapezoid on the
/// solver grid.
pub fn s_functional(
    kappa: &PEntranceLaw,
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    t: f64,
    step: f64,
) -> Result<f64> {
    s_quadrature(kappa, mech, motion, f, None, t, step)
}

/// `S_t(κ, f, g) = κ_t(f) + ∫_0^t κ_s(g) ds - ∫_0^t κ_{t-s}(φ(u_s)) ds`
/// with `u` the occupation flow.
pub fn s_functional_occupation(
    kappa: &PEntranceLaw,
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    g: &TestFunction,
    t: f64,
    step: f64,
) -> Result<f64> {
    check_dim(f.dim(), g.dim())?;
    s_quadrature(kappa, mech, motion, f, Some(g), t, step)
}

/// `E X_t = μ e^{t(Q - diag b)}`.
pub fn moment_flow(
    mech: &BranchingMechanism,
    motion: &MotionModel,
    mu: &FiniteMeasure,
    t: f64,
) -> Result<FiniteMeasure> {
    check_dim(motion.dim(), mu.dim())?;
    let p = motion.killed_transition(&mech.killing_rate(), t)?;
    Ok(FiniteMeasure::from_clamped(p.apply_left(mu.masses())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::JumpAtom;
    use proptest::prelude::*;

    fn one_site(b: f64, c: f64) -> (BranchingMechanism, MotionModel) {
        (BranchingMechanism::uniform(1, b, c).unwrap(), MotionModel::still(1))
    }

    fn tf(v: &[f64]) -> TestFunction {
        TestFunction::new(v.to_vec()).unwrap()
    }

    fn fm(v: &[f64]) -> FiniteMeasure {
        FiniteMeasure::new(v.to_vec()).unwrap()
    }

    #[test]
    fn riccati_closed_forms() {
        let (m, q) = one_site(0.0, 1.0);
        let sol = solve_cumulant(&m, &q, &tf(&[1.0]), 1.0, 1e-3).unwrap();
        assert!((sol.final_values()[0] - 0.5).abs() < 1e-9);
        assert_eq!(sol.values()[0], vec![1.0]);
        assert_eq!(sol.len(), 1001);

        let (m, q) = one_site(1.0, 1.0);
        let sol = solve_cumulant(&m, &q, &tf(&[1.0]), 1.0, 1e-3).unwrap();
        let e = libm::exp(-1.0);
        assert!((sol.final_values()[0] - e / (2.0 - e)).abs() < 1e-9);
        assert!((sol.final_values()[0] - 0.22540).abs() < 1e-5);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let m = BranchingMechanism::new(
            vec![0.3, -0.2],
            vec![1.0, 0.5],
            vec![vec![JumpAtom { size: 0.5, weight: 2.0 }], vec![]],
        )
        .unwrap();
        let q = MotionModel::symmetric_two_state(1.0).unwrap();
        let sol = solve_cumulant(&m, &q, &TestFunction::zero(2), 2.0, 1e-2).unwrap();
        assert!(sol.values().iter().all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn occupation_tanh() {
        let (m, q) = one_site(0.0, 1.0);
        let sol = solve_cumulant_occupation(&m, &q, &tf(&[0.0]), &tf(&[1.0]), 1.0, 1e-3).unwrap();
        assert!((sol.final_values()[0] - libm::tanh(1.0)).abs() < 1e-9);
        assert!((sol.final_values()[0] - 0.76159).abs() < 1e-5);

        let zero = solve_cumulant_occupation(&m, &q, &tf(&[0.0]), &tf(&[0.0]), 1.0, 1e-3).unwrap();
        assert_eq!(zero.final_values()[0], 0.0);
    }

    #[test]
    fn occupation_with_zero_source_matches_plain_flow() {
        let m = BranchingMechanism::new(vec![0.5, 0.1], vec![1.0, 2.0], vec![vec![], vec![JumpAtom { size: 1.0, weight: 1.0 }]]).unwrap();
        let q = MotionModel::symmetric_two_state(0.7).unwrap();
        let f = tf(&[1.0, 0.3]);
        let a = solve_cumulant(&m, &q, &f, 1.5, 1e-3).unwrap();
        let b = solve_cumulant_occupation(&m, &q, &f, &TestFunction::zero(2), 1.5, 1e-3).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            for (p, r) in x.iter().zip(y) {
                assert!((p - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_steps_and_dims() {
        let (m, q) = one_site(0.0, 1.0);
        assert!(solve_cumulant(&m, &q, &tf(&[1.0]), 1.0, 1.0).is_err());
        assert!(solve_cumulant(&m, &q, &tf(&[1.0]), 1.0, 0.0).is_err());
        assert!(solve_cumulant(&m, &q, &tf(&[1.0, 1.0]), 1.0, 0.1).is_err());
    }

    #[test]
    fn supercritical_blowup_is_reported() {
        // v' = 800 v from a huge start overflows within one step.
        let (m, q) = one_site(-800.0, 0.0);
        let err = solve_cumulant(&m, &q, &tf(&[1e300]), 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn rk4_error_ratio_under_step_halving() {
        let (m, q) = one_site(0.0, 1.0);
        let err = |h: f64| {
            let sol = solve_cumulant(&m, &q, &tf(&[1.0]), 1.0, h).unwrap();
            (sol.final_values()[0] - 0.5).abs()
        };
        for h in [0.25, 0.125] {
            let ratio = err(h) / err(h / 2.0);
            assert!(ratio >= 3.5, "ratio {ratio} at h = {h}");
        }
    }

    #[test]
    fn s_functional_examples() {
        let (m, q) = one_site(0.0, 1.0);
        let one = tf(&[1.0]);
        let s = s_functional(&PEntranceLaw::closed(fm(&[1.0])), &m, &q, &one, 1.0, 1e-3).unwrap();
        assert!((s - 0.5).abs() < 1e-6, "{s}");
        let s2 = s_functional(&PEntranceLaw::closed(fm(&[2.0])), &m, &q, &one, 1.0, 1e-3).unwrap();
        assert!((s2 - 1.0).abs() < 2e-6, "{s2}");
        let s0 = s_functional(&PEntranceLaw::closed(fm(&[1.0])), &m, &q, &tf(&[0.0]), 1.0, 1e-3).unwrap();
        assert_eq!(s0, 0.0);
    }

    #[test]
    fn s_functional_matches_closed_identity_with_motion() {
        let q = MotionModel::symmetric_two_state(1.2).unwrap();
        let mu = fm(&[0.7, 1.3]);
        let f = tf(&[1.5, 0.2]);
        // (drift, tolerance): the trapezoid error grows with the linear part of φ
        for (b, tol) in [([0.0, 0.0], 1e-6), ([0.4, -0.3], 1e-5)] {
            let m = BranchingMechanism::new(b.to_vec(), vec![1.0, 0.5], vec![vec![], vec![]]).unwrap();
            let s = s_functional(&PEntranceLaw::closed(mu.clone()), &m, &q, &f, 1.0, 1e-3).unwrap();
            let v = solve_cumulant(&m, &q, &f, 1.0, 1e-3).unwrap().final_function();
            let exact = mu.integrate(&v).unwrap();
            assert!((s - exact).abs() < tol, "{s} vs {exact}");
        }
    }

    #[test]
    fn s_functional_occupation_examples() {
        let (m, q) = one_site(0.0, 1.0);
        let k = PEntranceLaw::closed(fm(&[1.0]));
        let s = s_functional_occupation(&k, &m, &q, &tf(&[0.0]), &tf(&[1.0]), 1.0, 1e-3).unwrap();
        // 1 - ∫_0^1 tanh² s ds = tanh 1
        assert!((s - libm::tanh(1.0)).abs() < 1e-6, "{s}");
        assert!((s - 0.76159).abs() < 1e-5);

        let plain = s_functional(&k, &m, &q, &tf(&[1.0]), 1.0, 1e-3).unwrap();
        let occ = s_functional_occupation(&k, &m, &q, &tf(&[1.0]), &tf(&[0.0]), 1.0, 1e-3).unwrap();
        assert!((plain - occ).abs() < 1e-8);

        let zero = PEntranceLaw::zero(1);
        assert_eq!(s_functional_occupation(&zero, &m, &q, &tf(&[1.0]), &tf(&[1.0]), 1.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn moment_flow_examples() {
        let (m, q) = one_site(1.0, 1.0);
        let mu = fm(&[1.0]);
        assert_eq!(moment_flow(&m, &q, &mu, 0.0).unwrap(), mu);
        assert!((moment_flow(&m, &q, &mu, 1.0).unwrap().total() - libm::exp(-1.0)).abs() < 1e-14);

        let m2 = BranchingMechanism::uniform(2, 0.0, 3.0).unwrap();
        let q2 = MotionModel::symmetric_two_state(2.0).unwrap();
        let mu2 = fm(&[0.3, 1.1]);
        for t in [0.5, 1.0, 3.0] {
            assert!((moment_flow(&m2, &q2, &mu2, t).unwrap().total() - 1.4).abs() < 1e-10);
        }
    }

    fn two_state() -> impl Strategy<Value = (BranchingMechanism, MotionModel)> {
        (0.0..3.0f64, 0.0..3.0f64, -0.5..1.0f64, -0.5..1.0f64, 0.1..2.0f64, 0.1..2.0f64).prop_map(|(q01, q10, b0, b1, c0, c1)| {
            (
                BranchingMechanism::new(vec![b0, b1], vec![c0, c1], vec![vec![], vec![]]).unwrap(),
                MotionModel::from_row_major(2, vec![-q01, q01, q10, -q10]).unwrap(),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn flow_property((m, q) in two_state(), f0 in 0.0..2.0f64, f1 in 0.0..2.0f64, si in 0usize..3, ti in 0usize..3) {
            let grid = [0.25, 0.5, 1.0];
            let (s, t) = (grid[si], grid[ti]);
            let f = tf(&[f0, f1]);
            let vt = solve_cumulant(&m, &q, &f, t, 1e-3).unwrap().final_function();
            let composed = solve_cumulant(&m, &q, &vt, s, 1e-3).unwrap();
            let direct = solve_cumulant(&m, &q, &f, s + t, 1e-3).unwrap();
            for (a, b) in composed.final_values().iter().zip(direct.final_values()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }

        #[test]
        fn monotone_in_f((m, q) in two_state(), f0 in 0.0..2.0f64, f1 in 0.0..2.0f64, d0 in 0.0..1.0f64, d1 in 0.0..1.0f64) {
            let lo = solve_cumulant(&m, &q, &tf(&[f0, f1]), 1.0, 1e-2).unwrap();
            let hi = solve_cumulant(&m, &q, &tf(&[f0 + d0, f1 + d1]), 1.0, 1e-2).unwrap();
            for (a, b) in lo.values().iter().zip(hi.values()) {
                prop_assert!(a[0] <= b[0] + 1e-10 && a[1] <= b[1] + 1e-10);
            }
        }

        #[test]
        fn bounded_by_linear_flow((m, q) in two_state(), f0 in 0.0..2.0f64, f1 in 0.0..2.0f64, t in 0.1..2.0f64) {
            let v = solve_cumulant(&m, &q, &tf(&[f0, f1]), t, 1e-3).unwrap();
            let lin = q.killed_transition(&m.killing_rate(), t).unwrap().apply(&[f0, f1]);
            for (a, b) in v.final_values().iter().zip(&lin) {
                prop_assert!(*a <= b + 1e-9);
            }
        }
    }
}
