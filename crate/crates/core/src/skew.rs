//! Log-Laplace algebra of skew convolution semigroups.
//!
//! Every functional here is a `-log` of a Laplace functional, so convolution
//! of laws is addition of values. Entrance laws are closed (`κ_t = μ_0 P_t`),
//! which gives `S_t(κ, f) = μ_0(V_t f)`; the immigration functionals are
//! time integrals of that along one cumulant flow.

use alloc::format;
use alloc::vec::Vec;

use crate::cumulant::{flow, CumulantSolution, PEntranceLaw};
use crate::error::{invalid, Result};
use crate::measure::{check_dim, dot, FiniteMeasure, TestFunction};
use crate::mechanism::BranchingMechanism;
use crate::motion::{KillingRate, MotionModel};

/// One atom `c·δ_η` of the measure `F` on entrance laws.
#[derive(Debug, Clone, PartialEq)]
pub struct EntranceAtom {
    pub weight: f64,
    pub eta: PEntranceLaw,
}

/// The pair `(κ, F)` with `F` finitely atomic:
/// `-log L_{K_t}(f) = S_t(κ, f) + Σ c_i (1 - e^{-S_t(η_i, f)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntranceLawSpec {
    kappa: PEntranceLaw,
    atoms: Vec<EntranceAtom>,
}

impl EntranceLawSpec {
    pub fn new(kappa: PEntranceLaw, atoms: Vec<EntranceAtom>) -> Result<Self> {
        let d = kappa.dim();
        for (i, a) in atoms.iter().enumerate() {
            check_dim(d, a.eta.dim())?;
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(invalid(format!("entrance atom {i} has weight {}, expected > 0", a.weight)));
            }
        }
        Ok(Self { kappa, atoms })
    }

    pub fn zero(d: usize) -> Self {
        Self { kappa: PEntranceLaw::zero(d), atoms: Vec::new() }
    }

    /// Only the `κ` part.
    pub fn from_kappa(seed: FiniteMeasure) -> Self {
        Self { kappa: PEntranceLaw::closed(seed), atoms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.kappa.dim()
    }

    pub fn kappa(&self) -> &PEntranceLaw {
        &self.kappa
    }

    pub fn atoms(&self) -> &[EntranceAtom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.kappa.is_zero() && self.atoms.is_empty()
    }

    /// The entrance law of the convolution of the two laws.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        let kappa = PEntranceLaw::closed(self.kappa.seed().sum(other.kappa.seed())?);
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Ok(Self { kappa, atoms })
    }

    /// Scales `κ` and the atom weights (not the atoms' entrance laws).
    pub fn scaled(&self, a: f64) -> Result<Self> {
        let atoms = self.atoms.iter().map(|x| EntranceAtom { weight: a * x.weight, eta: x.eta.clone() }).collect();
        Self::new(self.kappa.scaled(a), atoms)
    }

    /// Checks `∫_0^1 η_s(1) ds < ∞` for `κ` and every atom.
    pub fn check_integrable(&self, motion: &MotionModel) -> Result<()> {
        check_dim(motion.dim(), self.dim())?;
        let h = motion.unit_occupation(&KillingRate::zero(self.dim()))?;
        let laws = core::iter::once(&self.kappa).chain(self.atoms.iter().map(|a| &a.eta));
        for (i, law) in laws.enumerate() {
            let v = law.seed().integrate(&h)?;
            if !v.is_finite() {
                return Err(invalid(format!("entrance law {i} is not integrable near 0")));
            }
        }
        Ok(())
    }

    /// `-log L_{K_t}(f)` given `v = V_t f`.
    pub fn log_laplace_at(&self, v: &[f64]) -> f64 {
        let mut s = dot(self.kappa.seed().masses(), v);
        for a in &self.atoms {
            s += a.weight * -libm::expm1(-dot(a.eta.seed().masses(), v));
        }
        s
    }
}

/// `-log L_{K_t}(f)` for the entrance law `(κ, F)`.
pub fn entrance_log_laplace(
    spec: &EntranceLawSpec,
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    t: f64,
    step: f64,
) -> Result<f64> {
    check_dim(spec.dim(), f.dim())?;
    let sol = flow(mech, motion, f.values(), None, t, step)?;
    Ok(spec.log_laplace_at(sol.final_values()))
}

/// A homogeneous SC-semigroup: `N_t` has `-log L_{N_t}(f) = ∫_0^t -log L_{K_s}(f) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScSemigroup {
    pub entrance: EntranceLawSpec,
    pub mech: BranchingMechanism,
    pub motion: MotionModel,
}

impl ScSemigroup {
    pub fn new(entrance: EntranceLawSpec, mech: BranchingMechanism, motion: MotionModel) -> Result<Self> {
        check_dim(entrance.dim(), mech.dim())?;
        check_dim(entrance.dim(), motion.dim())?;
        entrance.check_integrable(&motion)?;
        Ok(Self { entrance, mech, motion })
    }

    pub fn dim(&self) -> usize {
        self.entrance.dim()
    }

    fn flow(&self, f: &[f64], horizon: f64, step: f64) -> Result<CumulantSolution> {
        flow(&self.mech, &self.motion, f, None, horizon, step)
    }

    /// `J_t(λ·1)` for `λ ∈ {1, 0.1, 0.01}`. A probability entrance law gives
    /// finite values decreasing towards 0.
    pub fn probability_ladder(&self, t: f64, step: f64) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (o, lambda) in out.iter_mut().zip([1.0, 0.1, 0.01]) {
            *o = sc_log_laplace(self, &TestFunction::constant(self.dim(), lambda)?, t, step)?;
        }
        Ok(out)
    }
}

fn j_on(spec: &EntranceLawSpec, sol: &CumulantSolution) -> f64 {
    sol.trapezoid(|_, v| spec.log_laplace_at(v))
}

/// `J_t(f) = -log L_{N_t}(f)`.
pub fn sc_log_laplace(spec: &ScSemigroup, f: &TestFunction, t: f64, step: f64) -> Result<f64> {
    check_dim(spec.dim(), f.dim())?;
    Ok(j_on(&spec.entrance, &spec.flow(f.values(), t, step)?))
}

/// `|J_{r+t}(f) - J_r(V_t f) - J_t(f)|`.
pub fn verify_skew_homogeneous(spec: &ScSemigroup, f: &TestFunction, r: f64, t: f64, step: f64) -> Result<f64> {
    check_dim(spec.dim(), f.dim())?;
    let whole = j_on(&spec.entrance, &spec.flow(f.values(), r + t, step)?);
    let head = spec.flow(f.values(), t, step)?;
    let tail = j_on(&spec.entrance, &spec.flow(head.final_values(), r, step)?);
    Ok(libm::fabs(whole - tail - j_on(&spec.entrance, &head)))
}

/// `-log` of the Laplace functional of `Q^N_t(μ, ·)`: `μ(V_t f) + J_t(f)`.
pub fn transition_log_laplace(
    mu: &FiniteMeasure,
    spec: &ScSemigroup,
    f: &TestFunction,
    t: f64,
    step: f64,
) -> Result<f64> {
    check_dim(spec.dim(), mu.dim())?;
    check_dim(spec.dim(), f.dim())?;
    let sol = spec.flow(f.values(), t, step)?;
    Ok(dot(mu.masses(), sol.final_values()) + j_on(&spec.entrance, &sol))
}

/// `-log E exp(-Y_t(f) - ∫_0^t Y_s(g) ds)` for the immigration process from
/// `μ`: `μ(u_t) + ∫_0^t S_r(K, f, g) dr` with `u` the occupation flow.
pub fn occupation_log_laplace(
    mu: &FiniteMeasure,
    spec: &ScSemigroup,
    f: &TestFunction,
    g: &TestFunction,
    t: f64,
    step: f64,
) -> Result<f64> {
    check_dim(spec.dim(), mu.dim())?;
    check_dim(spec.dim(), f.dim())?;
    check_dim(spec.dim(), g.dim())?;
    let sol = flow(&spec.mech, &spec.motion, f.values(), Some(g.values()), t, step)?;
    Ok(dot(mu.masses(), sol.final_values()) + j_on(&spec.entrance, &sol))
}

/// Result of [`longtime_decompose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LongTime {
    /// `lim J_t(f)`, reached at `horizon`.
    Converged { value: f64, horizon: f64 },
    /// Unit-window increments stopped shrinking geometrically.
    Diverged { horizon: f64, ratio: f64 },
}

impl LongTime {
    pub fn value(&self) -> Option<f64> {
        match *self {
            LongTime::Converged { value, .. } => Some(value),
            LongTime::Diverged { .. } => None,
        }
    }
}

const DOUBLINGS: usize = 5;
const DECAY_RATIO: f64 = 0.9;
const MAX_HORIZON: usize = 1024;

/// `lim_{t→∞} J_t(f)`, by extending `J` one unit window at a time.
///
/// Stops once a window contributes less than `tol`, adding a geometric tail
/// estimate. Flags divergence when the integrals over the doubling windows
/// `[2^j - 1, 2^{j+1} - 1]` fail to shrink by a factor 0.9 five times running.
pub fn longtime_decompose(spec: &ScSemigroup, f: &TestFunction, tol: f64, step: f64) -> Result<LongTime> {
    check_dim(spec.dim(), f.dim())?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let mut v = f.values().to_vec();
    let mut total = 0.0;
    let mut previous: Option<f64> = None;

    let mut doubling_acc = 0.0;
    let mut doubling_end = 1;
    let mut last_doubling: Option<f64> = None;
    let mut streak = 0;
    let mut ratio = 0.0;

    for k in 0..MAX_HORIZON {
        let sol = spec.flow(&v, 1.0, step)?;
        let w = j_on(&spec.entrance, &sol);
        total += w;
        v = sol.final_values().to_vec();
        let horizon = (k + 1) as f64;

        if w < tol {
            let tail = match previous {
                Some(p) if p > 0.0 && w < p => {
                    let rho = w / p;
                    w * rho / (1.0 - rho)
                }
                _ => 0.0,
            };
            return Ok(LongTime::Converged { value: total + tail, horizon });
        }
        previous = Some(w);

        doubling_acc += w;
        if k + 1 == doubling_end {
            if let Some(last) = last_doubling {
                ratio = doubling_acc / last;
                streak = if ratio > DECAY_RATIO { streak + 1 } else { 0 };
                if streak >= DOUBLINGS {
                    return Ok(LongTime::Diverged { horizon, ratio });
                }
            }
            last_doubling = Some(doubling_acc);
            doubling_acc = 0.0;
            doubling_end = 2 * doubling_end + 1;
        }
    }
    Ok(LongTime::Diverged { horizon: MAX_HORIZON as f64, ratio })
}

/// An infinitely divisible law on measures with `-log L(f) = η(f) + Σ h_j (1 - e^{-ν_j(f)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfinitelyDivisibleLaw {
    eta: FiniteMeasure,
    atoms: Vec<(f64, FiniteMeasure)>,
}

impl InfinitelyDivisibleLaw {
    pub fn new(eta: FiniteMeasure, atoms: Vec<(f64, FiniteMeasure)>) -> Result<Self> {
        for (i, (h, nu)) in atoms.iter().enumerate() {
            check_dim(eta.dim(), nu.dim())?;
            if !(h.is_finite() && *h > 0.0) {
                return Err(invalid(format!("Levy atom {i} has weight {h}, expected > 0")));
            }
        }
        Ok(Self { eta, atoms })
    }

    pub fn dim(&self) -> usize {
        self.eta.dim()
    }

    pub fn log_laplace(&self, v: &[f64]) -> f64 {
        let mut s = dot(self.eta.masses(), v);
        for (h, nu) in &self.atoms {
            s += h * -libm::expm1(-dot(nu.masses(), v));
        }
        s
    }
}

/// Constant density `rate` for the diffuse measure `ζ` on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZetaInterval {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

/// Ingredients of an inhomogeneous SC-semigroup: entrance laws launched at
/// fixed times `T_1`, infinitely divisible laws added at fixed times `T_2`,
/// and a diffuse part `∫ K_{s,t} ζ(ds)` with one time-homogeneous entrance
/// law.
#[derive(Debug, Clone, PartialEq)]
pub struct InhomogeneousSpec {
    open: Vec<(f64, EntranceLawSpec)>,
    closed: Vec<(f64, InfinitelyDivisibleLaw)>,
    zeta: Vec<ZetaInterval>,
    continuous: EntranceLawSpec,
}

fn check_sorted(what: &str, times: impl Iterator<Item = f64>) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for t in times {
        if !t.is_finite() || t < last {
            return Err(invalid(format!("{what} times must be finite and sorted")));
        }
        last = t;
    }
    Ok(())
}

impl InhomogeneousSpec {
    pub fn new(
        open: Vec<(f64, EntranceLawSpec)>,
        closed: Vec<(f64, InfinitelyDivisibleLaw)>,
        zeta: Vec<ZetaInterval>,
        continuous: EntranceLawSpec,
    ) -> Result<Self> {
        let d = continuous.dim();
        check_sorted("T1", open.iter().map(|x| x.0))?;
        check_sorted("T2", closed.iter().map(|x| x.0))?;
        for (_, s) in &open {
            check_dim(d, s.dim())?;
        }
        for (_, l) in &closed {
            check_dim(d, l.dim())?;
        }
        for z in &zeta {
            if !(z.start.is_finite() && z.end.is_finite() && z.start < z.end) {
                return Err(invalid(format!("zeta interval [{}, {}] is empty or not finite", z.start, z.end)));
            }
            if !(z.rate.is_finite() && z.rate >= 0.0) {
                return Err(invalid(format!("zeta rate {} must be >= 0", z.rate)));
            }
        }
        Ok(Self { open, closed, zeta, continuous })
    }

    pub fn empty(d: usize) -> Self {
        Self { open: Vec::new(), closed: Vec::new(), zeta: Vec::new(), continuous: EntranceLawSpec::zero(d) }
    }

    pub fn dim(&self) -> usize {
        self.continuous.dim()
    }

    pub fn open(&self) -> &[(f64, EntranceLawSpec)] {
        &self.open
    }

    pub fn closed(&self) -> &[(f64, InfinitelyDivisibleLaw)] {
        &self.closed
    }

    pub fn zeta(&self) -> &[ZetaInterval] {
        &self.zeta
    }

    pub fn continuous(&self) -> &EntranceLawSpec {
        &self.continuous
    }
}

/// `∫_{u1}^{u2}` of the piecewise linear interpolant of `y` on the grid.
fn grid_integral(times: &[f64], y: &[f64], u1: f64, u2: f64) -> f64 {
    let cum = |u: f64| -> f64 {
        let mut acc = 0.0;
        for k in 0..times.len() - 1 {
            let (a, b) = (times[k], times[k + 1]);
            if u >= b {
                acc += 0.5 * (b - a) * (y[k] + y[k + 1]);
            } else {
                if u > a {
                    let yu = y[k] + (y[k + 1] - y[k]) * (u - a) / (b - a);
                    acc += 0.5 * (u - a) * (y[k] + yu);
                }
                break;
            }
        }
        acc
    };
    if u2 <= u1 || times.len() < 2 {
        return 0.0;
    }
    cum(u2) - cum(u1)
}

/// `J_{r,t}(f) = -log L_{N_{r,t}}(f)`.
///
/// `T_1` times count when `s ∈ [r, t)`, `T_2` times when `s ∈ (r, t]`.
pub fn inhomogeneous_log_laplace(
    spec: &InhomogeneousSpec,
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    r: f64,
    t: f64,
    step: f64,
) -> Result<f64> {
    check_dim(spec.dim(), f.dim())?;
    if !(r <= t) {
        return Err(invalid(format!("need r <= t, got r = {r}, t = {t}")));
    }
    let mut total = 0.0;
    for (s, e) in &spec.open {
        if r <= *s && *s < t {
            total += entrance_log_laplace(e, mech, motion, f, t - s, step)?;
        }
    }
    for (s, law) in &spec.closed {
        if r < *s && *s <= t {
            let sol = flow(mech, motion, f.values(), None, t - s, step)?;
            total += law.log_laplace(sol.final_values());
        }
    }
    let active: Vec<&ZetaInterval> =
        spec.zeta.iter().filter(|z| z.rate > 0.0 && z.start < t && z.end > r).collect();
    if !active.is_empty() && !spec.continuous.is_zero() {
        let sol = flow(mech, motion, f.values(), None, t - r, step)?;
        let y: Vec<f64> = sol.values().iter().map(|v| spec.continuous.log_laplace_at(v)).collect();
        for z in active {
            let (a, b) = (z.start.max(r), z.end.min(t));
            total += z.rate * grid_integral(sol.times(), &y, t - b, t - a);
        }
    }
    Ok(total)
}

/// `J_{r,t}(f) - J_{r,s}(V_{t-s} f) - J_{s,t}(f)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_sc_axiom(
    spec: &InhomogeneousSpec,
    mech: &BranchingMechanism,
    motion: &MotionModel,
    f: &TestFunction,
    r: f64,
    s: f64,
    t: f64,
    step: f64,
) -> Result<f64> {
    if !(r <= s && s <= t) {
        return Err(invalid(format!("need r <= s <= t, got ({r}, {s}, {t})")));
    }
    let whole = inhomogeneous_log_laplace(spec, mech, motion, f, r, t, step)?;
    let shifted = flow(mech, motion, f.values(), None, t - s, step)?.final_function();
    let head = inhomogeneous_log_laplace(spec, mech, motion, &shifted, r, s, step)?;
    let tail = inhomogeneous_log_laplace(spec, mech, motion, f, s, t, step)?;
    Ok(whole - head - tail)
}
