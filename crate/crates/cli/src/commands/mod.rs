//! One module per subcommand, plus the helpers they share.

pub mod analytic;
pub mod bell;
pub mod export;
pub mod extract;
pub mod membership;
pub mod tables;

use anyhow::{Context, Result};
use faer::Mat;
use qmoment_core::{Error, NumericCertificate, RankLoopOutcome, RelaxationStructure, SolverOptions};

/// Solver settings with an optional accuracy override. The gap tolerance
/// follows the feasibility tolerance so both convergence tests tighten
/// together.
pub fn solver_options(tol_feas: Option<f64>) -> SolverOptions {
    let mut options = SolverOptions::default();
    if let Some(t) = tol_feas {
        options.tol_feas = t;
        options.tol_gap = t;
    }
    options
}

/// Runs `f` over the items on up to `jobs` worker threads. Results come
/// back in input order no matter which solve finishes first.
pub fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    if jobs <= 1 || items.len() <= 1 {
        return Ok(items.into_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.min(items.len()))
        .build()
        .context("building the worker pool")?;
    use rayon::prelude::*;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

/// Stopping-rule verdict on a solved matrix, as a table cell: "yes" on a
/// rank loop, "no", "inconclusive" when a tenfold band tightening still
/// cannot call it, and "n/a" where the rule is undefined (first level).
pub fn rank_loop_cell(
    structure: &RelaxationStructure,
    matrix: &Mat<f64>,
    tol_rank: Option<f64>,
) -> Result<String> {
    let certificate = |band_factor: f64| -> qmoment_core::Result<_> {
        let mut c = NumericCertificate::new(structure, matrix)?.tightened(band_factor);
        if let Some(t) = tol_rank {
            c = c.with_rank_tolerance(t);
        }
        c.detect_rank_loop()
    };
    let outcome = match certificate(1.0) {
        Ok(report) => match report.outcome {
            RankLoopOutcome::Inconclusive => certificate(10.0)?.outcome,
            other => other,
        },
        Err(Error::Structure(_)) => return Ok("n/a".into()),
        Err(e) => return Err(e.into()),
    };
    Ok(match outcome {
        RankLoopOutcome::Loop { .. } => "yes".into(),
        RankLoopOutcome::NoLoop => "no".into(),
        RankLoopOutcome::Inconclusive => "inconclusive".into(),
    })
}
