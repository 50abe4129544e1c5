//! Branching particle approximations at scaling level `n` (mass `1/n` per
//! particle).
//!
//! Each particle follows the Q-matrix chain. At site `x` it splits in two at
//! rate `c(x) n + max(-b(x), 0)` and dies at rate `c(x) n + max(b(x), 0)`,
//! which gives `φ(z) = b z + c z²` in the limit.
//!
//! Immigration is a superposition of independent populations: the one grown
//! from the initial measure, an infinitesimal stream of single immigrants at
//! rate `n κ`, and one population per macroscopic cluster. Without motion and
//! without occupation integrals, sites are independent linear birth-death
//! chains and are advanced with their exact transition law; otherwise every
//! event is simulated.

mod birth_death;
mod events;
pub mod seed;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::measure::{check_dim, FiniteMeasure, TestFunction};
use crate::mechanism::BranchingMechanism;
use crate::motion::MotionModel;
use crate::skew::{EntranceAtom, EntranceLawSpec};
use crate::cumulant::PEntranceLaw;

pub use seed::ReplicateSeed;

/// Particle-count guard.
pub const OVERFLOW: u64 = 100_000_000;

const CLUSTER_RETRIES: u32 = 10_000;

/// Which simulation engine advances a population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    /// Closed-form birth-death transitions when there is no motion and no
    /// occupation integral, events otherwise.
    #[default]
    Auto,
    EventDriven,
}

/// Per-particle rates at one scaling level.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleModel {
    n: u64,
    birth: Vec<f64>,
    death: Vec<f64>,
    jumps: Vec<Vec<(usize, f64)>>,
    per_particle: Vec<f64>,
    still: bool,
    engine: Engine,
}

impl ParticleModel {
    pub fn new(mech: &BranchingMechanism, motion: &MotionModel, n: u64) -> Result<Self> {
        check_dim(mech.dim(), motion.dim())?;
        if mech.has_jumps() {
            return Err(Error::Unsupported("jump atoms in the branching mechanism"));
        }
        if n == 0 {
            return Err(invalid("scaling level n must be >= 1"));
        }
        let d = mech.dim();
        let nf = n as f64;
        let q = motion.generator();
        let mut birth = Vec::with_capacity(d);
        let mut death = Vec::with_capacity(d);
        let mut jumps = Vec::with_capacity(d);
        let mut per_particle = Vec::with_capacity(d);
        for i in 0..d {
            let (b, c) = (mech.drift()[i], mech.diffusion()[i]);
            let beta = c * nf + (-b).max(0.0);
            let delta = c * nf + b.max(0.0);
            let row: Vec<(usize, f64)> = (0..d).filter(|&j| j != i && q[(i, j)] > 0.0).map(|j| (j, q[(i, j)])).collect();
            let leave: f64 = row.iter().map(|x| x.1).sum();
            birth.push(beta);
            death.push(delta);
            per_particle.push(beta + delta + leave);
            jumps.push(row);
        }
        Ok(Self { n, birth, death, jumps, per_particle, still: motion.is_still(), engine: Engine::Auto })
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn unit_mass(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn dim(&self) -> usize {
        self.birth.len()
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    fn closed_form(&self, occupation: bool) -> bool {
        self.engine == Engine::Auto && self.still && !occupation
    }

    /// Advances one population; returns its `g`-occupation in particle units.
    fn advance(
        &self,
        counts: &mut [u64],
        imm: Option<&[f64]>,
        duration: f64,
        g: Option<&[f64]>,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        if duration <= 0.0 {
            return Ok(0.0);
        }
        if !self.closed_form(g.is_some()) {
            return events::evolve(self, counts, imm, duration, g, rng);
        }
        for i in 0..counts.len() {
            let law = birth_death::law(self.birth[i], self.death[i], duration);
            counts[i] = birth_death::transition(counts[i], law, rng);
            if let Some(r) = imm {
                let arrivals = birth_death::poisson(r[i] * duration, rng);
                for _ in 0..arrivals {
                    let age = duration * rng.random::<f64>();
                    let law = birth_death::law(self.birth[i], self.death[i], age);
                    counts[i] += birth_death::family(law, rng);
                }
            }
            if counts[i] > OVERFLOW {
                return Err(Error::ParticleOverflow(counts[i]));
            }
        }
        Ok(0.0)
    }

    /// `floor(n μ_i)` particles per site plus one systematic draw over the
    /// fractional parts.
    fn round<R: Rng + ?Sized>(&self, mu: &FiniteMeasure, rng: &mut R) -> Result<Vec<u64>> {
        check_dim(self.dim(), mu.dim())?;
        let nf = self.n as f64;
        if mu.total() * nf > OVERFLOW as f64 {
            return Err(Error::ParticleOverflow((mu.total() * nf) as u64));
        }
        let mut counts = Vec::with_capacity(mu.dim());
        let mut fracs = Vec::with_capacity(mu.dim());
        for &m in mu.masses() {
            let x = m * nf;
            let whole = libm::floor(x);
            counts.push(whole as u64);
            fracs.push(x - whole);
        }
        if fracs.iter().any(|&r| r > 0.0) {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            for (c, r) in counts.iter_mut().zip(&fracs) {
                let next = cum + r;
                // one extra particle iff some u + k lies in [cum, next)
                if libm::floor(next - u) > libm::floor(cum - u) {
                    *c += 1;
                }
                cum = next;
            }
        }
        Ok(counts)
    }

    fn state(&self, counts: Vec<u64>, clock: f64) -> ParticleState {
        ParticleState { counts, unit_mass: self.unit_mass(), clock }
    }
}

/// Occupancy counts at scaling level `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    counts: Vec<u64>,
    unit_mass: f64,
    clock: f64,
}

impl ParticleState {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn unit_mass(&self) -> f64 {
        self.unit_mass
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn particles(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn measure(&self) -> FiniteMeasure {
        FiniteMeasure::from_clamped(self.counts.iter().map(|&c| c as f64 * self.unit_mass).collect())
    }

    /// `X(f)`.
    pub fn integrate(&self, f: &TestFunction) -> Result<f64> {
        check_dim(self.counts.len(), f.dim())?;
        Ok(self.counts.iter().zip(f.values()).map(|(&c, v)| c as f64 * v).sum::<f64>() * self.unit_mass)
    }
}

/// One macroscopic cluster source: clusters arrive at `rate` per unit time,
/// each starting from `seed`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterSource {
    pub rate: f64,
    pub seed: FiniteMeasure,
}

/// Immigration intensity: single immigrants at rate `kappa_rate` (mass per
/// unit time) plus macroscopic clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationSpec {
    kappa_rate: FiniteMeasure,
    clusters: Vec<ClusterSource>,
}

impl ImmigrationSpec {
    pub fn new(kappa_rate: FiniteMeasure, clusters: Vec<ClusterSource>) -> Result<Self> {
        for (i, c) in clusters.iter().enumerate() {
            check_dim(kappa_rate.dim(), c.seed.dim())?;
            if !(c.rate.is_finite() && c.rate >= 0.0) {
                return Err(invalid(format!("cluster source {i} has rate {}, expected >= 0", c.rate)));
            }
        }
        Ok(Self { kappa_rate, clusters })
    }

    pub fn zero(d: usize) -> Self {
        Self { kappa_rate: FiniteMeasure::zero(d), clusters: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.kappa_rate.dim()
    }

    pub fn kappa_rate(&self) -> &FiniteMeasure {
        &self.kappa_rate
    }

    pub fn clusters(&self) -> &[ClusterSource] {
        &self.clusters
    }

    pub fn is_zero(&self) -> bool {
        self.kappa_rate.is_null() && self.clusters.iter().all(|c| c.rate == 0.0 || c.seed.is_null())
    }

    /// Expected immigrant mass per unit time.
    pub fn mass_rate(&self) -> f64 {
        self.kappa_rate.total() + self.clusters.iter().map(|c| c.rate * c.seed.total()).sum::<f64>()
    }

    /// The entrance law `(κ, F)` whose SC-semigroup this process realizes.
    pub fn entrance_spec(&self) -> Result<EntranceLawSpec> {
        let atoms = self
            .clusters
            .iter()
            .filter(|c| c.rate > 0.0)
            .map(|c| EntranceAtom { weight: c.rate, eta: PEntranceLaw::closed(c.seed.clone()) })
            .collect();
        EntranceLawSpec::new(PEntranceLaw::closed(self.kappa_rate.clone()), atoms)
    }
}

/// How an immigrant cluster started.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterKind {
    Infinitesimal { site: usize },
    Macroscopic { seed: FiniteMeasure },
}

/// One cluster: its birth time, its seed and its recorded path. The path
/// stops at the first recorded time the cluster is extinct.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEvent {
    pub birth_time: f64,
    pub kind: ClusterKind,
    pub path: Vec<(f64, FiniteMeasure)>,
    pub extinct_by: Option<f64>,
}

impl ClusterEvent {
    /// The recorded measure at exactly `time`, if it was recorded.
    pub fn at(&self, time: f64) -> Option<&FiniteMeasure> {
        self.path.iter().find(|(t, _)| *t == time).map(|(_, m)| m)
    }
}

/// `X_t(f)` together with `∫_0^t X_s(g) ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupationSample {
    pub value: f64,
    pub integral: f64,
}

fn validate_horizon(horizon: f64) -> Result<()> {
    if horizon < 0.0 || horizon.is_nan() {
        return Err(Error::NegativeTime(horizon));
    }
    if !horizon.is_finite() {
        return Err(invalid("horizon must be finite"));
    }
    Ok(())
}

struct Population {
    counts: Vec<u64>,
    rng: ChaCha8Rng,
    occupation: f64,
}

/// Runs the full immigration construction and reads the summed state at each
/// of the increasing `reads` (times from the start).
fn immigration_path(
    model: &ParticleModel,
    imm: &ImmigrationSpec,
    mu0: &FiniteMeasure,
    reads: &[f64],
    g: Option<&[f64]>,
    seed: ReplicateSeed,
) -> Result<Vec<(ParticleState, f64)>> {
    check_dim(model.dim(), imm.dim())?;
    check_dim(model.dim(), mu0.dim())?;
    if let Some(g) = g {
        check_dim(model.dim(), g.len())?;
    }
    let horizon = reads.last().copied().unwrap_or(0.0);
    validate_horizon(horizon)?;
    if reads.windows(2).any(|w| w[1] < w[0]) || reads.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("read times must be nonnegative and increasing"));
    }
    let d = model.dim();
    let nf = model.n as f64;

    // Macroscopic arrivals, sorted by time.
    let mut schedule_rng = seed.rng(seed::SCHEDULE);
    let mut arrivals: Vec<(f64, usize)> = Vec::new();
    for (i, c) in imm.clusters.iter().enumerate() {
        if c.rate <= 0.0 || c.seed.is_null() {
            continue;
        }
        let k = birth_death::poisson(c.rate * horizon, &mut schedule_rng);
        for _ in 0..k {
            arrivals.push((horizon * schedule_rng.random::<f64>(), i));
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut initial_rng = seed.rng(seed::INITIAL);
    let initial = model.round(mu0, &mut initial_rng)?;
    let mut initial = Population { counts: initial, rng: initial_rng, occupation: 0.0 };
    let stream_rates: Vec<f64> = imm.kappa_rate.masses().iter().map(|k| k * nf).collect();
    let has_stream = stream_rates.iter().any(|&r| r > 0.0);
    let mut stream = Population { counts: vec![0; d], rng: seed.rng(seed::STREAM), occupation: 0.0 };
    let mut clusters: Vec<Population> = Vec::new();
    let mut next_arrival = 0;

    let mut out = Vec::with_capacity(reads.len());
    let mut now = 0.0;
    for &read in reads {
        model_advance(model, &mut initial, None, read - now, g)?;
        if has_stream {
            model_advance(model, &mut stream, Some(&stream_rates), read - now, g)?;
        }
        for c in clusters.iter_mut() {
            model_advance(model, c, None, read - now, g)?;
        }
        while next_arrival < arrivals.len() && arrivals[next_arrival].0 <= read {
            let (born, source) = arrivals[next_arrival];
            let mut rng = seed.rng(seed::cluster(next_arrival));
            let counts = model.round(&imm.clusters[source].seed, &mut rng)?;
            let mut pop = Population { counts, rng, occupation: 0.0 };
            model_advance(model, &mut pop, None, read - born, g)?;
            clusters.push(pop);
            next_arrival += 1;
        }
        now = read;

        let mut counts = vec![0u64; d];
        let mut occupation = 0.0;
        for p in core::iter::once(&initial).chain(core::iter::once(&stream)).chain(clusters.iter()) {
            for (c, x) in counts.iter_mut().zip(&p.counts) {
                *c += x;
            }
            occupation += p.occupation;
        }
        let total: u64 = counts.iter().sum();
        if total > OVERFLOW {
            return Err(Error::ParticleOverflow(total));
        }
        out.push((model.state(counts, read), occupation * model.unit_mass()));
    }
    Ok(out)
}

fn model_advance(
    model: &ParticleModel,
    pop: &mut Population,
    imm: Option<&[f64]>,
    duration: f64,
    g: Option<&[f64]>,
) -> Result<()> {
    pop.occupation += model.advance(&mut pop.counts, imm, duration, g, &mut pop.rng)?;
    Ok(())
}

/// One draw of the particle superprocess started from `μ_0`, at `horizon`.
pub fn simulate_superprocess(
    model: &ParticleModel,
    mu0: &FiniteMeasure,
    horizon: f64,
    seed: ReplicateSeed,
) -> Result<ParticleState> {
    simulate_immigration(model, &ImmigrationSpec::zero(model.dim()), mu0, horizon, seed)
}

/// One draw of the immigration process started from `μ_0`, at `horizon`.
pub fn simulate_immigration(
    model: &ParticleModel,
    imm: &ImmigrationSpec,
    mu0: &FiniteMeasure,
    horizon: f64,
    seed: ReplicateSeed,
) -> Result<ParticleState> {
    let mut path = immigration_path(model, imm, mu0, &[horizon], None, seed)?;
    Ok(path.pop().expect("one read").0)
}

/// `(X_t(f), ∫_0^t X_s(g) ds)` for the superprocess, or for the immigration
/// process when `imm` is given.
pub fn occupation_sample(
    model: &ParticleModel,
    mu0: &FiniteMeasure,
    imm: Option<&ImmigrationSpec>,
    f: &TestFunction,
    g: &TestFunction,
    horizon: f64,
    seed: ReplicateSeed,
) -> Result<OccupationSample> {
    check_dim(model.dim(), f.dim())?;
    check_dim(model.dim(), g.dim())?;
    let zero = ImmigrationSpec::zero(model.dim());
    let gv = (!g.is_zero()).then(|| g.values());
    let (state, integral) =
        immigration_path(model, imm.unwrap_or(&zero), mu0, &[horizon], gv, seed)?.pop().expect("one read");
    Ok(OccupationSample { value: state.integrate(f)?, integral })
}

/// Record times: `0`, then `probe·2^k` for `k ≥ -4` up to `horizon`, with
/// `probe` and `horizon` included.
pub fn cluster_grid(probe: f64, horizon: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut t = probe / 16.0;
    while t < horizon {
        grid.push(t);
        t *= 2.0;
    }
    grid.push(horizon);
    grid.dedup();
    grid
}

/// A single particle born at `birth_site` at time 0, conditioned to be alive
/// at `probe` by rejection.
pub fn sample_cluster(
    model: &ParticleModel,
    birth_site: usize,
    probe: f64,
    horizon: f64,
    seed: ReplicateSeed,
) -> Result<ClusterEvent> {
    if birth_site >= model.dim() {
        return Err(invalid(format!("birth site {birth_site} out of range")));
    }
    if !(probe > 0.0 && probe <= horizon) {
        return Err(invalid("need 0 < probe <= horizon"));
    }
    validate_horizon(horizon)?;
    let grid = cluster_grid(probe, horizon);
    for attempt in 0..CLUSTER_RETRIES {
        let mut rng = seed.rng(attempt as u64);
        let mut counts = vec![0u64; model.dim()];
        counts[birth_site] = 1;
        let mut path = vec![(0.0, model.state(counts.clone(), 0.0).measure())];
        let mut extinct_by = None;
        let mut now = 0.0;
        for &t in &grid[1..] {
            model.advance(&mut counts, None, t - now, None, &mut rng)?;
            now = t;
            if counts.iter().all(|&c| c == 0) {
                extinct_by = Some(t);
                break;
            }
            path.push((t, model.state(counts.clone(), t).measure()));
        }
        if extinct_by.is_none_or(|e| e > probe) {
            return Ok(ClusterEvent {
                birth_time: 0.0,
                kind: ClusterKind::Infinitesimal { site: birth_site },
                path,
                extinct_by,
            });
        }
    }
    Err(Error::ClusterExtinct { attempts: CLUSTER_RETRIES })
}

/// The stationary immigration process: run from the null measure over
/// `[-window, 0]` and read the state at each `offset ≤ 0`.
///
/// Needs `min b > 0` and `window ≥ log(mass_rate / tol) / min b`, so the mass
/// that would have arrived before the window is below `tol`.
pub fn simulate_stationary(
    model: &ParticleModel,
    mech: &BranchingMechanism,
    imm: &ImmigrationSpec,
    window: f64,
    tol: f64,
    offsets: &[f64],
    seed: ReplicateSeed,
) -> Result<Vec<ParticleState>> {
    let min_b = mech.drift().iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_b > 0.0) {
        return Err(invalid(format!(
            "stationary immigration needs a subcritical mechanism (min b > 0), got min b = {min_b}; \
             increase the drift b at every site"
        )));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let needed = (libm::log(imm.mass_rate() / tol) / min_b).max(0.0);
    if window < needed {
        return Err(invalid(format!("window {window} is shorter than the required {needed:.3}")));
    }
    if offsets.iter().any(|&o| o > 0.0 || o < -window) {
        return Err(invalid("read offsets must lie in [-window, 0]"));
    }
    let reads: Vec<f64> = offsets.iter().map(|o| window + o).collect();
    let path = immigration_path(model, imm, &FiniteMeasure::zero(model.dim()), &reads, None, seed)?;
    Ok(path
        .into_iter()
        .zip(offsets)
        .map(|((mut s, _), &o)| {
            s.clock = o;
            s
        })
        .collect())
}

/// `E e^{-X(f)}` contribution of one state: `e^{-X(f)}`.
pub fn laplace_sample(state: &ParticleState, f: &TestFunction) -> Result<f64> {
    Ok(libm::exp(-state.integrate(f)?))
}

/// Exact Laplace value `E e^{-X_t(f)}` of the motion-free particle system
/// with `b ≥ 0` from an integer configuration: `Π_i (1 - w_i/n)^{N_i}` where
/// `w' = -b w - c w²`, `w_0 = n(1 - e^{-f/n})`. Used as a finite-`n` oracle.
pub fn finite_n_laplace(model: &ParticleModel, counts: &[u64], f: &TestFunction, t: f64) -> Result<f64> {
    check_dim(model.dim(), counts.len())?;
    check_dim(model.dim(), f.dim())?;
    if !model.still {
        return Err(Error::Unsupported("finite-n Laplace oracle with motion"));
    }
    let nf = model.n as f64;
    let mut logl = 0.0;
    for i in 0..counts.len() {
        let law = birth_death::law(model.birth[i], model.death[i], t);
        // generating function of one family at s = e^{-f/n}
        let s = libm::exp(-f.values()[i] / nf);
        let gen = law.p0 + (1.0 - law.p0) * (1.0 - law.q) * s / (1.0 - law.q * s);
        logl += counts[i] as f64 * libm::log(gen);
    }
    Ok(libm::exp(logl))
}
