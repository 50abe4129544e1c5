//! Event-driven exact simulation of one population.

use rand::Rng;
use rand_distr::Exp1;

use super::{ParticleModel, OVERFLOW};
use crate::error::{Error, Result};

/// Runs `counts` forward for `duration`, with immigrants arriving at
/// `imm[i]` particles per unit time at site `i`. Returns the exact integral of
/// `Σ_i counts_i g_i` over the stretch (in particle units).
pub(crate) fn evolve<R: Rng + ?Sized>(
    model: &ParticleModel,
    counts: &mut [u64],
    imm: Option<&[f64]>,
    duration: f64,
    g: Option<&[f64]>,
    rng: &mut R,
) -> Result<f64> {
    let d = counts.len();
    let imm_total: f64 = imm.map_or(0.0, |r| r.iter().sum());
    let level = |c: &[u64]| g.map_or(0.0, |g| c.iter().zip(g).map(|(&n, &w)| n as f64 * w).sum());
    let mut total: u64 = counts.iter().sum();
    let mut t = 0.0;
    let mut occ = 0.0;
    loop {
        let mut rate = imm_total;
        for i in 0..d {
            rate += counts[i] as f64 * model.per_particle[i];
        }
        let current = level(counts);
        if rate <= 0.0 {
            occ += current * (duration - t);
            return Ok(occ);
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / rate;
        if t + dt >= duration {
            occ += current * (duration - t);
            return Ok(occ);
        }
        occ += current * dt;
        t += dt;

        let mut u = rng.random::<f64>() * rate;
        let mut fired = false;
        for i in 0..d {
            let w = counts[i] as f64 * model.per_particle[i];
            if u >= w {
                u -= w;
                continue;
            }
            let x = u / counts[i] as f64;
            if x < model.birth[i] {
                counts[i] += 1;
                total += 1;
                if total > OVERFLOW {
                    return Err(Error::ParticleOverflow(total));
                }
            } else if x < model.birth[i] + model.death[i] {
                counts[i] -= 1;
                total -= 1;
            } else {
                let mut y = x - model.birth[i] - model.death[i];
                let jumps = &model.jumps[i];
                let mut target = jumps.last().map_or(i, |j| j.0);
                for &(j, q) in jumps {
                    if y < q {
                        target = j;
                        break;
                    }
                    y -= q;
                }
                counts[i] -= 1;
                counts[target] += 1;
            }
            fired = true;
            break;
        }
        if !fired {
            if imm_total <= 0.0 {
                // u fell past the last weight through rounding; redraw.
                continue;
            }
            let rates = imm.expect("immigration rate is positive");
            let mut site = d - 1;
            for (i, &r) in rates.iter().enumerate() {
                if u < r {
                    site = i;
                    break;
                }
                u -= r;
            }
            counts[site] += 1;
            total += 1;
            if total > OVERFLOW {
                return Err(Error::ParticleOverflow(total));
            }
        }
    }
}
