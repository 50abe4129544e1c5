//! Experiment configuration: the JSON schema and its validation into core
//! model objects.
//!
//! Every vector indexed by site has one entry per label in `sites`; the
//! generator is a flat row-major `d × d` array.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use scsim_core::cumulant::PEntranceLaw;
use scsim_core::particle::{ClusterSource, ImmigrationSpec};
use scsim_core::skew::{EntranceAtom, EntranceLawSpec, InfinitelyDivisibleLaw, InhomogeneousSpec, ZetaInterval};
use scsim_core::{BranchingMechanism, FiniteMeasure, JumpAtom, MotionModel, SiteSet, TestFunction};

use crate::catalog::CheckName;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub sites: Vec<String>,
    /// Row-major Q-matrix; absent means no motion.
    #[serde(default)]
    pub generator: Option<Vec<f64>>,
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub immigration: Option<ImmigrationConfig>,
    #[serde(default)]
    pub inhomogeneous: Option<InhomogeneousConfig>,
    #[serde(default)]
    pub targets: Vec<TargetConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Per site, a list of `[u, w]` jump atoms.
    #[serde(default)]
    pub m: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmigrationConfig {
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    #[serde(default)]
    pub clusters: Vec<ClusterConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub rate: f64,
    pub seed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EntranceConfig {
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    #[serde(default)]
    pub atoms: Vec<EntranceAtomConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntranceAtomConfig {
    pub weight: f64,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InhomogeneousConfig {
    /// Entrance laws launched at fixed times, counted on `[r, t)`.
    #[serde(default)]
    pub open: Vec<OpenConfig>,
    /// Infinitely divisible laws added at fixed times, counted on `(r, t]`.
    #[serde(default)]
    pub closed: Vec<ClosedConfig>,
    #[serde(default)]
    pub zeta: Vec<ZetaInterval>,
    #[serde(default)]
    pub continuous: EntranceConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenConfig {
    pub time: f64,
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    #[serde(default)]
    pub atoms: Vec<EntranceAtomConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedConfig {
    pub time: f64,
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    #[serde(default)]
    pub atoms: Vec<LevyAtomConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyAtomConfig {
    pub weight: f64,
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub label: String,
    pub f: Vec<f64>,
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    pub t: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Stopping tolerance for long-time limits.
    #[serde(default = "default_longtime_tol")]
    pub longtime_tol: f64,
}

fn default_step() -> f64 {
    1e-3
}

fn default_longtime_tol() -> f64 {
    1e-8
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { step: default_step(), horizon: None, longtime_tol: default_longtime_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_n")]
    pub n: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    /// Length of the burn-in window for stationary runs.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Neglected pre-window mass for stationary runs.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_probe")]
    pub probe: f64,
    #[serde(default)]
    pub birth_site: usize,
}

fn default_n() -> u64 {
    1000
}

fn default_replicates() -> u64 {
    1000
}

fn default_window() -> f64 {
    20.0
}

fn default_tol() -> f64 {
    1e-3
}

fn default_probe() -> f64 {
    0.01
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            replicates: default_replicates(),
            seed: 0,
            window: default_window(),
            tol: default_tol(),
            probe: default_probe(),
            birth_site: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub check: CheckName,
    /// Target label; defaults to the first target.
    #[serde(default)]
    pub target: Option<String>,
    /// `(r, s, t)` triples for `sc_axiom`.
    #[serde(default)]
    pub triples: Vec<[f64; 3]>,
    /// Overrides the default tolerance of deterministic checks.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

/// A functional target: `f`, `g` and times.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub label: String,
    pub f: TestFunction,
    pub g: TestFunction,
    pub t: f64,
    pub r: f64,
    pub s: Option<f64>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub sites: SiteSet,
    pub motion: MotionModel,
    pub mech: BranchingMechanism,
    pub initial: FiniteMeasure,
    pub immigration: Option<ImmigrationSpec>,
    pub inhomogeneous: Option<InhomogeneousSpec>,
    pub targets: Vec<Target>,
    pub solver: SolverConfig,
    pub simulation: SimulationConfig,
    pub checks: Vec<CheckConfig>,
}

impl Model {
    pub fn target(&self, label: Option<&str>) -> Option<&Target> {
        match label {
            Some(l) => self.targets.iter().find(|t| t.label == l),
            None => self.targets.first(),
        }
    }
}

struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, at: impl fmt::Display, msg: impl fmt::Display) {
        self.0.push(format!("{at}: {msg}"));
    }

    fn vector(&mut self, at: &str, v: &[f64], d: usize) -> bool {
        if v.len() != d {
            self.push(at, format_args!("has {} entries, expected {d}", v.len()));
            return false;
        }
        true
    }

    fn measure(&mut self, at: &str, v: &[f64], d: usize) -> Option<FiniteMeasure> {
        if !self.vector(at, v, d) {
            return None;
        }
        FiniteMeasure::new(v.to_vec()).map_err(|e| self.push(at, e)).ok()
    }

    fn function(&mut self, at: &str, v: &[f64], d: usize) -> Option<TestFunction> {
        if !self.vector(at, v, d) {
            return None;
        }
        TestFunction::new(v.to_vec()).map_err(|e| self.push(at, e)).ok()
    }

    fn entrance(&mut self, at: &str, kappa: &Option<Vec<f64>>, atoms: &[EntranceAtomConfig], d: usize) -> Option<EntranceLawSpec> {
        let kappa = match kappa {
            Some(k) => PEntranceLaw::closed(self.measure(&format!("{at}.kappa"), k, d)?),
            None => PEntranceLaw::zero(d),
        };
        let mut out = Vec::new();
        for (i, a) in atoms.iter().enumerate() {
            let eta = self.measure(&format!("{at}.atoms[{i}].eta"), &a.eta, d)?;
            out.push(EntranceAtom { weight: a.weight, eta: PEntranceLaw::closed(eta) });
        }
        EntranceLawSpec::new(kappa, out).map_err(|e| self.push(at, e)).ok()
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Validates everything and reports every violation at once.
    pub fn build(&self) -> Result<Model, ConfigError> {
        let mut v = Violations(Vec::new());
        let sites = SiteSet::new(self.sites.clone()).map_err(|e| v.push("sites", e)).ok();
        let d = self.sites.len().max(1);

        let motion = match &self.generator {
            None => Some(MotionModel::still(d)),
            Some(q) if q.len() != d * d => {
                v.push("generator", format_args!("has {} entries, expected {}", q.len(), d * d));
                None
            }
            Some(q) => MotionModel::from_row_major(d, q.clone()).map_err(|e| v.push("generator", e)).ok(),
        };

        let m = &self.mechanism;
        let mut mech = None;
        let ok_b = v.vector("mechanism.b", &m.b, d);
        let ok_c = v.vector("mechanism.c", &m.c, d);
        let jumps: Vec<Vec<JumpAtom>> = if m.m.is_empty() {
            vec![Vec::new(); d]
        } else {
            m.m.iter().map(|atoms| atoms.iter().map(|&[size, weight]| JumpAtom { size, weight }).collect()).collect()
        };
        if jumps.len() != d {
            v.push("mechanism.m", format_args!("has {} sites, expected {d}", jumps.len()));
        } else if ok_b && ok_c {
            mech = BranchingMechanism::new(m.b.clone(), m.c.clone(), jumps).map_err(|e| v.push("mechanism", e)).ok();
        }

        let initial = match &self.initial {
            Some(x) => v.measure("initial", x, d),
            None => Some(FiniteMeasure::zero(d)),
        };

        let immigration = self.immigration.as_ref().and_then(|imm| {
            let kappa = match &imm.kappa {
                Some(k) => v.measure("immigration.kappa", k, d)?,
                None => FiniteMeasure::zero(d),
            };
            let mut clusters = Vec::new();
            for (i, c) in imm.clusters.iter().enumerate() {
                let seed = v.measure(&format!("immigration.clusters[{i}].seed"), &c.seed, d)?;
                clusters.push(ClusterSource { rate: c.rate, seed });
            }
            ImmigrationSpec::new(kappa, clusters).map_err(|e| v.push("immigration", e)).ok()
        });
        let immigration_ok = self.immigration.is_none() || immigration.is_some();

        let inhomogeneous = self.inhomogeneous.as_ref().and_then(|x| {
            let mut open = Vec::new();
            for (i, o) in x.open.iter().enumerate() {
                open.push((o.time, v.entrance(&format!("inhomogeneous.open[{i}]"), &o.kappa, &o.atoms, d)?));
            }
            let mut closed = Vec::new();
            for (i, c) in x.closed.iter().enumerate() {
                let at = format!("inhomogeneous.closed[{i}]");
                let eta = match &c.eta {
                    Some(e) => v.measure(&format!("{at}.eta"), e, d)?,
                    None => FiniteMeasure::zero(d),
                };
                let mut atoms = Vec::new();
                for (j, a) in c.atoms.iter().enumerate() {
                    atoms.push((a.weight, v.measure(&format!("{at}.atoms[{j}].nu"), &a.nu, d)?));
                }
                closed.push((c.time, InfinitelyDivisibleLaw::new(eta, atoms).map_err(|e| v.push(&at, e)).ok()?));
            }
            let continuous = v.entrance("inhomogeneous.continuous", &x.continuous.kappa, &x.continuous.atoms, d)?;
            InhomogeneousSpec::new(open, closed, x.zeta.clone(), continuous).map_err(|e| v.push("inhomogeneous", e)).ok()
        });
        let inhomogeneous_ok = self.inhomogeneous.is_none() || inhomogeneous.is_some();

        let mut targets = Vec::new();
        for (i, t) in self.targets.iter().enumerate() {
            let at = format!("targets[{i}] ({})", t.label);
            let f = v.function(&format!("{at}.f"), &t.f, d);
            let g = match &t.g {
                Some(g) => v.function(&format!("{at}.g"), g, d),
                None => Some(TestFunction::zero(d)),
            };
            if !(t.t.is_finite() && t.t >= 0.0) {
                v.push(&at, format_args!("t = {} must be finite and >= 0", t.t));
            }
            if !(t.r.is_finite() && t.r >= 0.0) {
                v.push(&at, format_args!("r = {} must be finite and >= 0", t.r));
            }
            if self.targets[..i].iter().any(|o| o.label == t.label) {
                v.push(&at, "duplicate target label");
            }
            if let (Some(f), Some(g)) = (f, g) {
                targets.push(Target { label: t.label.clone(), f, g, t: t.t, r: t.r, s: t.s });
            }
        }

        if !(self.solver.step > 0.0 && self.solver.step.is_finite()) {
            v.push("solver.step", format_args!("{} must be > 0", self.solver.step));
        }
        if !(self.solver.longtime_tol > 0.0) {
            v.push("solver.longtime_tol", "must be > 0");
        }
        let sim = &self.simulation;
        if sim.replicates < 1 {
            v.push("simulation.replicates", "must be >= 1");
        }
        if sim.n < 1 {
            v.push("simulation.n", "must be >= 1");
        }
        if sim.birth_site >= d {
            v.push("simulation.birth_site", format_args!("{} is not a site index", sim.birth_site));
        }

        for (i, c) in self.checks.iter().enumerate() {
            let at = format!("checks[{i}] ({})", c.check);
            let target = match &c.target {
                Some(l) => self.targets.iter().find(|t| &t.label == l),
                None => self.targets.first(),
            };
            if c.check.needs_target() && target.is_none() {
                v.push(&at, "no such target");
            }
            if c.check.needs_immigration() && self.immigration.is_none() {
                v.push(&at, "needs an `immigration` section");
            }
            if c.check == CheckName::ScAxiom {
                if self.inhomogeneous.is_none() {
                    v.push(&at, "needs an `inhomogeneous` section");
                }
                if c.triples.is_empty() && target.is_some_and(|t| t.s.is_none()) {
                    v.push(&at, "needs `triples` or a target with `s`");
                }
                for tr in &c.triples {
                    if !(tr[0] <= tr[1] && tr[1] <= tr[2]) {
                        v.push(&at, format_args!("triple {tr:?} is not ordered r <= s <= t"));
                    }
                }
            }
        }

        if !v.0.is_empty() {
            return Err(ConfigError::Invalid(v.0));
        }
        assert!(immigration_ok && inhomogeneous_ok);
        Ok(Model {
            name: self.name.clone(),
            sites: sites.expect("validated"),
            motion: motion.expect("validated"),
            mech: mech.expect("validated"),
            initial: initial.expect("validated"),
            immigration,
            inhomogeneous,
            targets,
            solver: self.solver.clone(),
            simulation: self.simulation.clone(),
            checks: self.checks.clone(),
        })
    }
}
