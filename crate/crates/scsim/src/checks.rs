//! One function per catalogued check. Each turns a model into a report row;
//! core errors mark the row as errored instead of aborting the run.

use scsim_core::particle::{
    laplace_sample, occupation_sample, sample_cluster, simulate_immigration, simulate_stationary,
    simulate_superprocess, ImmigrationSpec, ParticleModel, ParticleState, ReplicateSeed,
};
use scsim_core::skew::{
    longtime_decompose, occupation_log_laplace, transition_log_laplace, verify_sc_axiom, verify_skew_homogeneous,
    LongTime, ScSemigroup,
};
use scsim_core::stats::Estimate;
use scsim_core::{moment_flow, solve_cumulant, solve_cumulant_occupation, FiniteMeasure, Matrix, TestFunction};

use crate::catalog::CheckName;
use crate::config::{CheckConfig, Model, Target};
use crate::report::{Metric, ReplicateRow, Row};
use crate::runner::map_replicates;

type Outcome = scsim_core::Result<(Vec<Metric>, Vec<ReplicateRow>)>;

/// Pass rule for Monte Carlo Laplace values.
pub const Z_MAX: f64 = 3.0;
/// Pass rule for Monte Carlo first moments.
pub const Z_MOMENT: f64 = 4.0;
/// Default tolerance of deterministic identities.
pub const ABS_TOL: f64 = 1e-5;
/// Quadrature panels for first moments with immigration.
const SIMPSON_PANELS: usize = 200;

struct Ctx<'a> {
    model: &'a Model,
    check: &'a CheckConfig,
    target: Option<&'a Target>,
    parallel: bool,
}

pub fn run_check(model: &Model, check: &CheckConfig, parallel: bool) -> Row {
    let target = model.target(check.target.as_deref());
    let label = target.map(|t| t.label.clone());
    let ctx = Ctx { model, check, target, parallel };
    let outcome = match check.check {
        CheckName::LaplaceSuperprocess => laplace_superprocess(&ctx),
        CheckName::LaplaceImmigration => laplace_immigration(&ctx),
        CheckName::SkewIdentity => skew_identity(&ctx),
        CheckName::ScAxiom => sc_axiom(&ctx),
        CheckName::Occupation => occupation(&ctx),
        CheckName::Stationary => stationary(&ctx),
        CheckName::NearBirth => near_birth(&ctx),
        CheckName::MomentFlow => first_moment(&ctx),
    };
    match outcome {
        Ok((metrics, reps)) => Row::finished(check.check, label, metrics, reps),
        Err(e) => {
            log::warn!("{} errored: {e}", check.check);
            Row::errored(check.check, label, e.to_string())
        }
    }
}

impl Ctx<'_> {
    fn target(&self) -> &Target {
        self.target.expect("validated: check has a target")
    }

    fn particles(&self) -> scsim_core::Result<ParticleModel> {
        ParticleModel::new(&self.model.mech, &self.model.motion, self.model.simulation.n)
    }

    fn seed(&self, replicate: u64) -> ReplicateSeed {
        ReplicateSeed::new(self.model.simulation.seed, replicate)
    }

    fn immigration(&self) -> &ImmigrationSpec {
        self.model.immigration.as_ref().expect("validated: check has immigration")
    }

    fn semigroup(&self) -> scsim_core::Result<ScSemigroup> {
        let entrance = match &self.model.immigration {
            Some(imm) => imm.entrance_spec()?,
            None => scsim_core::skew::EntranceLawSpec::zero(self.model.mech.dim()),
        };
        ScSemigroup::new(entrance, self.model.mech.clone(), self.model.motion.clone())
    }

    fn step(&self) -> f64 {
        self.model.solver.step
    }

    fn tolerance(&self) -> f64 {
        self.check.tolerance.unwrap_or(ABS_TOL)
    }

    fn replicates<T: Send>(&self, f: impl Fn(u64) -> scsim_core::Result<T> + Sync + Send) -> scsim_core::Result<Vec<T>> {
        map_replicates(self.model.simulation.replicates, self.parallel, f)
    }
}

fn row(replicate: u64, t: f64, state: &ParticleState, f: &TestFunction) -> scsim_core::Result<ReplicateRow> {
    Ok(ReplicateRow {
        replicate,
        t,
        masses: state.measure().masses().to_vec(),
        laplace: laplace_sample(state, f)?,
        integral: None,
    })
}

fn mean_of(rows: &[ReplicateRow], f: &TestFunction) -> Estimate {
    let values: Vec<f64> =
        rows.iter().map(|r| r.masses.iter().zip(f.values()).map(|(m, v)| m * v).sum()).collect();
    Estimate::from_samples(&values)
}

fn laplace_of(rows: &[ReplicateRow]) -> Estimate {
    Estimate::from_samples(&rows.iter().map(|r| r.laplace).collect::<Vec<_>>())
}

fn z_metric(name: &str, analytic: f64, est: &Estimate, max: f64) -> Metric {
    Metric::z_test(name, analytic, est.mean, est.se, max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `μ(e^{t(Q - b)} f)`.
fn first_moment_at(model: &Model, mu: &FiniteMeasure, f: &TestFunction, t: f64) -> scsim_core::Result<f64> {
    moment_flow(&model.mech, &model.motion, mu, t)?.integrate(f)
}

/// `μ_0 P^b_t f + ∫_0^t m P^b_s f ds`, with `m` the immigration mass rate
/// per site. Simpson's rule.
fn immigration_first_moment(model: &Model, imm: &ImmigrationSpec, f: &TestFunction, t: f64) -> scsim_core::Result<f64> {
    let mut rate = imm.kappa_rate().clone();
    for c in imm.clusters() {
        rate = rate.sum(&c.seed.scaled(c.rate))?;
    }
    let base = first_moment_at(model, &model.initial, f, t)?;
    if t == 0.0 {
        return Ok(base);
    }
    let h = t / SIMPSON_PANELS as f64;
    let mut acc = 0.0;
    for k in 0..=SIMPSON_PANELS {
        let w = if k == 0 || k == SIMPSON_PANELS {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * first_moment_at(model, &rate, f, k as f64 * h)?;
    }
    Ok(base + acc * h / 3.0)
}

fn laplace_superprocess(ctx: &Ctx) -> Outcome {
    let (m, tg) = (ctx.model, ctx.target());
    let v = solve_cumulant(&m.mech, &m.motion, &tg.f, tg.t, ctx.step())?;
    let analytic = (-dot(m.initial.masses(), v.final_values())).exp();
    let moment = first_moment_at(m, &m.initial, &tg.f, tg.t)?;
    let pm = ctx.particles()?;
    let reps = ctx.replicates(|r| {
        let state = simulate_superprocess(&pm, &m.initial, tg.t, ctx.seed(r))?;
        row(r, tg.t, &state, &tg.f)
    })?;
    let metrics = vec![
        z_metric("laplace", analytic, &laplace_of(&reps), Z_MAX),
        z_metric("first_moment", moment, &mean_of(&reps, &tg.f), Z_MOMENT),
    ];
    Ok((metrics, reps))
}

fn laplace_immigration(ctx: &Ctx) -> Outcome {
    let (m, tg, imm) = (ctx.model, ctx.target(), ctx.immigration());
    let sg = ctx.semigroup()?;
    let analytic = (-transition_log_laplace(&m.initial, &sg, &tg.f, tg.t, ctx.step())?).exp();
    let moment = immigration_first_moment(m, imm, &tg.f, tg.t)?;
    let pm = ctx.particles()?;
    let reps = ctx.replicates(|r| {
        let state = simulate_immigration(&pm, imm, &m.initial, tg.t, ctx.seed(r))?;
        row(r, tg.t, &state, &tg.f)
    })?;
    let metrics = vec![
        z_metric("laplace", analytic, &laplace_of(&reps), Z_MAX),
        z_metric("first_moment", moment, &mean_of(&reps, &tg.f), Z_MOMENT),
    ];
    Ok((metrics, reps))
}

fn skew_identity(ctx: &Ctx) -> Outcome {
    let tg = ctx.target();
    let residual = verify_skew_homogeneous(&ctx.semigroup()?, &tg.f, tg.r, tg.t, ctx.step())?;
    Ok((vec![Metric::abs_tol("residual", 0.0, residual, ctx.tolerance())], Vec::new()))
}

fn sc_axiom(ctx: &Ctx) -> Outcome {
    let (m, tg) = (ctx.model, ctx.target());
    let spec = m.inhomogeneous.as_ref().expect("validated: sc_axiom has ingredients");
    let triples = if ctx.check.triples.is_empty() {
        vec![[tg.r, tg.s.expect("validated: target has s"), tg.t]]
    } else {
        ctx.check.triples.clone()
    };
    let mut metrics = Vec::new();
    for [r, s, t] in triples {
        let res = verify_sc_axiom(spec, &m.mech, &m.motion, &tg.f, r, s, t, ctx.step())?;
        metrics.push(Metric::abs_tol(&format!("residual({r},{s},{t})"), 0.0, res, ctx.tolerance()));
    }
    Ok((metrics, Vec::new()))
}

fn occupation(ctx: &Ctx) -> Outcome {
    let (m, tg) = (ctx.model, ctx.target());
    let exponent = match &m.immigration {
        Some(_) => occupation_log_laplace(&m.initial, &ctx.semigroup()?, &tg.f, &tg.g, tg.t, ctx.step())?,
        None => {
            let u = solve_cumulant_occupation(&m.mech, &m.motion, &tg.f, &tg.g, tg.t, ctx.step())?;
            dot(m.initial.masses(), u.final_values())
        }
    };
    let pm = ctx.particles()?;
    let reps = ctx.replicates(|r| {
        let s = occupation_sample(&pm, &m.initial, m.immigration.as_ref(), &tg.f, &tg.g, tg.t, ctx.seed(r))?;
        Ok(ReplicateRow {
            replicate: r,
            t: tg.t,
            masses: Vec::new(),
            laplace: (-s.value - s.integral).exp(),
            integral: Some(s.integral),
        })
    })?;
    Ok((vec![z_metric("laplace", (-exponent).exp(), &laplace_of(&reps), Z_MAX)], reps))
}

/// `m (diag b - Q)^{-1} f` with `m` the immigration mass rate per site.
fn stationary_mean(model: &Model, imm: &ImmigrationSpec, f: &TestFunction) -> scsim_core::Result<f64> {
    let d = model.mech.dim();
    let mut rate = imm.kappa_rate().clone();
    for c in imm.clusters() {
        rate = rate.sum(&c.seed.scaled(c.rate))?;
    }
    let a = Matrix::diag(model.mech.drift()).sub(model.motion.generator());
    let x = a.solve(&Matrix::from_row_major(d, 1, f.values().to_vec())?)?;
    Ok(dot(rate.masses(), x.as_slice()))
}

fn stationary(ctx: &Ctx) -> Outcome {
    let (m, tg, imm) = (ctx.model, ctx.target(), ctx.immigration());
    let sim = &m.simulation;
    let pm = ctx.particles()?;
    let pairs = ctx.replicates(|r| {
        let states = simulate_stationary(&pm, &m.mech, imm, sim.window, sim.tol, &[-1.0, 0.0], ctx.seed(r))?;
        Ok((row(r, -1.0, &states[0], &tg.f)?, row(r, 0.0, &states[1], &tg.f)?))
    })?;
    let limit = longtime_decompose(&ctx.semigroup()?, &tg.f, m.solver.longtime_tol, ctx.step())?;
    let mean = stationary_mean(m, imm, &tg.f)?;
    let (earlier, now): (Vec<ReplicateRow>, Vec<ReplicateRow>) = pairs.into_iter().unzip();
    let shift: Vec<f64> = now
        .iter()
        .zip(&earlier)
        .map(|(a, b)| dot(&a.masses, tg.f.values()) - dot(&b.masses, tg.f.values()))
        .collect();
    let mut metrics = Vec::new();
    metrics.push(Metric::flag("longtime_converged", matches!(limit, LongTime::Converged { .. })));
    if let LongTime::Converged { value, .. } = limit {
        metrics.push(z_metric("laplace", (-value).exp(), &laplace_of(&now), Z_MAX));
    }
    metrics.push(z_metric("mean", mean, &mean_of(&now, &tg.f), Z_MAX));
    metrics.push(z_metric("time_shift", 0.0, &Estimate::from_samples(&shift), Z_MAX));
    let reps = earlier.into_iter().zip(now).flat_map(|(a, b)| [a, b]).collect();
    Ok((metrics, reps))
}

/// Fraction thresholds of the near-birth diagnostic.
pub const CONCENTRATION_MIN: f64 = 0.95;
pub const SMALL_FRACTION_MIN: f64 = 0.99;
/// A cluster counts as small when its mass is at most this many unit masses.
pub const SMALL_UNITS: f64 = 10.0;

fn near_birth(ctx: &Ctx) -> Outcome {
    let (m, sim) = (ctx.model, &ctx.model.simulation);
    let pm = ctx.particles()?;
    let one = TestFunction::constant(m.mech.dim(), 1.0)?;
    let reps = ctx.replicates(|r| {
        let c = sample_cluster(&pm, sim.birth_site, sim.probe, sim.probe, ctx.seed(r))?;
        let at = c.at(sim.probe).expect("retained clusters are alive at the probe");
        Ok(ReplicateRow {
            replicate: r,
            t: sim.probe,
            masses: at.masses().to_vec(),
            laplace: (-at.integrate(&one)?).exp(),
            integral: None,
        })
    })?;
    let n = reps.len() as f64;
    let concentration = reps.iter().map(|r| r.masses[sim.birth_site] / r.masses.iter().sum::<f64>()).sum::<f64>() / n;
    let limit = SMALL_UNITS * pm.unit_mass() * (1.0 + 1e-12);
    let small = reps.iter().filter(|r| r.masses.iter().sum::<f64>() <= limit).count() as f64 / n;
    let metrics = vec![
        Metric::at_least("concentration", concentration, CONCENTRATION_MIN),
        Metric::at_least("small_mass_fraction", small, SMALL_FRACTION_MIN),
    ];
    Ok((metrics, reps))
}

fn first_moment(ctx: &Ctx) -> Outcome {
    let (m, tg) = (ctx.model, ctx.target());
    let moment = first_moment_at(m, &m.initial, &tg.f, tg.t)?;
    let pm = ctx.particles()?;
    let reps = ctx.replicates(|r| {
        let state = simulate_superprocess(&pm, &m.initial, tg.t, ctx.seed(r))?;
        row(r, tg.t, &state, &tg.f)
    })?;
    Ok((vec![z_metric("first_moment", moment, &mean_of(&reps, &tg.f), Z_MOMENT)], reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::report::Status;

    fn model(json: &str) -> Model {
        ExperimentConfig::from_json(json).unwrap().build().unwrap()
    }

    #[test]
    fn immigration_first_moment_matches_closed_form() {
        // E Y_t(1) = k (1 - e^{-bt}) / b from zero, plus e^{-bt} from one.
        let m = model(
            r#"{"sites": ["x"], "mechanism": {"b": [0.5], "c": [1]}, "initial": [1],
                "immigration": {"kappa": [1], "clusters": [{"rate": 2, "seed": [0.5]}]}}"#,
        );
        let one = TestFunction::constant(1, 1.0).unwrap();
        let got = immigration_first_moment(&m, m.immigration.as_ref().unwrap(), &one, 2.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((got - (e + 2.0 * 2.0 * (1.0 - e))).abs() < 1e-9, "{got}");
        assert!((stationary_mean(&m, m.immigration.as_ref().unwrap(), &one).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn core_error_marks_row_errored() {
        let m = model(
            r#"{"sites": ["x"], "mechanism": {"b": [0], "c": [1], "m": [[[1, 0.5]]]}, "initial": [1],
                "targets": [{"label": "one", "f": [1], "t": 1}],
                "checks": [{"check": "laplace_superprocess"}]}"#,
        );
        let row = run_check(&m, &m.checks[0], false);
        assert_eq!(row.status, Status::Error);
        assert!(row.message.unwrap().contains("not supported"));
    }

    #[test]
    fn skew_check_passes_on_cir() {
        let m = model(
            r#"{"sites": ["x"], "mechanism": {"b": [0], "c": [1]},
                "immigration": {"kappa": [1]},
                "targets": [{"label": "one", "f": [1], "t": 1, "r": 1}],
                "checks": [{"check": "skew_identity"}]}"#,
        );
        let row = run_check(&m, &m.checks[0], false);
        assert_eq!(row.status, Status::Pass, "{row:?}");
    }
}
