//! Runs the configured checks and assembles the report.
//!
//! Replicates are mapped in index order, in parallel or not, and reduced
//! sequentially afterwards, so the numbers never depend on scheduling.

use std::time::Instant;

use rayon::prelude::*;

use crate::checks;
use crate::config::Model;
use crate::report::{Metadata, Report, Row};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Overrides the configured master seed.
    pub seed: Option<u64>,
    pub parallel: bool,
}

/// `f(0), ..., f(count - 1)`, in order.
pub(crate) fn map_replicates<T, F>(count: u64, parallel: bool, f: F) -> scsim_core::Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> scsim_core::Result<T> + Sync + Send,
{
    if parallel {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

pub fn run(model: &Model, opts: RunOptions) -> Report {
    let start = Instant::now();
    let mut model = model.clone();
    if let Some(seed) = opts.seed {
        model.simulation.seed = seed;
    }
    let one = |c: &crate::config::CheckConfig| {
        log::info!("running {}", c.check);
        checks::run_check(&model, c, opts.parallel)
    };
    let rows: Vec<Row> = if opts.parallel {
        model.checks.par_iter().map(one).collect()
    } else {
        model.checks.iter().map(one).collect()
    };
    Report {
        metadata: Metadata {
            name: model.name.clone(),
            seed: model.simulation.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time: start.elapsed().as_secs_f64(),
        },
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_either_way() {
        let a = map_replicates(100, false, |i| Ok(i * i)).unwrap();
        let b = map_replicates(100, true, |i| Ok(i * i)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }

    #[test]
    fn first_error_wins() {
        let r = map_replicates(10, false, |i| {
            if i == 3 {
                Err(scsim_core::Error::Singular)
            } else {
                Ok(i)
            }
        });
        assert_eq!(r.unwrap_err(), scsim_core::Error::Singular);
    }
}
