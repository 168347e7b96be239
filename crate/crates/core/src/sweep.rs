//! Runs the simulation over a square grid of rating probabilities.

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::engine::{run_simulation_observed, IterationReport, MetricSeries, Simulation};
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;
use crate::rng::derive_seed;

const SWEEP_LABEL: u64 = 0x0053_5745_4550; // "SWEEP"

/// One `(p_core, p_peripheral)` cell of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub core_index: usize,
    pub peripheral_index: usize,
    pub p_core: f64,
    pub p_peripheral: f64,
}

/// One simulation within a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRun {
    pub point: GridPoint,
    pub replicate: usize,
    pub seed: u64,
}

/// Grid cells for probabilities `0, step, 2 step, ..., 1` on both axes.
pub fn grid_points(step: f64) -> Result<Vec<GridPoint>> {
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step must be in (0, 1], got {step}")));
    }
    let intervals = (1.0 / step).round();
    if (intervals * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {step} does not divide 1 evenly")));
    }
    let intervals = intervals as usize;
    let value = |i: usize| i as f64 / intervals as f64;
    Ok((0..=intervals)
        .flat_map(|c| {
            (0..=intervals).map(move |p| GridPoint {
                core_index: c,
                peripheral_index: p,
                p_core: value(c),
                p_peripheral: value(p),
            })
        })
        .collect())
}

/// Seed of one grid run; depends only on the master seed and the run's
/// position, so any subset of the grid can be re-run on its own.
pub fn grid_seed(master_seed: u64, point: &GridPoint, replicate: usize) -> u64 {
    derive_seed(
        master_seed,
        &[
            SWEEP_LABEL,
            point.core_index as u64,
            point.peripheral_index as u64,
            replicate as u64,
        ],
    )
}

pub fn grid_runs(master_seed: u64, step: f64, seeds_per_point: usize) -> Result<Vec<GridRun>> {
    if seeds_per_point == 0 {
        return Err(Error::invalid("seeds per point must be at least 1"));
    }
    Ok(grid_points(step)?
        .into_iter()
        .flat_map(|point| {
            (0..seeds_per_point).map(move |replicate| GridRun {
                point,
                replicate,
                seed: grid_seed(master_seed, &point, replicate),
            })
        })
        .collect())
}

impl GridRun {
    pub fn config(&self, base: &SimConfig) -> SimConfig {
        SimConfig {
            p_core: self.point.p_core,
            p_peripheral: self.point.p_peripheral,
            seed: self.seed,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<(GridRun, MetricSeries)>,
}

impl SweepResult {
    /// Every record of every run, in result-file order.
    pub fn records(&self) -> Vec<MetricRecord> {
        let mut all: Vec<MetricRecord> = self.runs.iter().flat_map(|(_, s)| s.records.iter().copied()).collect();
        crate::report::sort_records(&mut all);
        all
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub grid_step: f64,
    pub parallelism: usize,
    pub seeds_per_point: usize,
}

pub fn run_sweep(base: &SimConfig, options: SweepOptions) -> Result<SweepResult> {
    run_sweep_observed(base, options, |_, _, _| {})
}

/// Runs every grid point, at most `options.parallelism` at a time. The
/// observer sees every iteration of every run, from worker threads.
pub fn run_sweep_observed<F>(base: &SimConfig, options: SweepOptions, observer: F) -> Result<SweepResult>
where
    F: Fn(&GridRun, &Simulation, &IterationReport) + Sync,
{
    if options.parallelism == 0 {
        return Err(Error::invalid("parallelism must be at least 1"));
    }
    base.validate()?;
    let runs = grid_runs(base.seed, options.grid_step, options.seeds_per_point)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;

    let results: Vec<(GridRun, MetricSeries)> = pool.install(|| {
        runs.par_iter()
            .map(|run| {
                run_simulation_observed(run.config(base), |sim, report| observer(run, sim, report))
                    .map(|series| (*run, series))
                    .map_err(|e| Error::GridPoint {
                        p_core: run.point.p_core,
                        p_peripheral: run.point.p_peripheral,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()
    })?;
    Ok(SweepResult { runs: results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_points(0.05).unwrap().len(), 441);
        assert_eq!(grid_points(0.25).unwrap().len(), 25);
        assert_eq!(grid_points(0.5).unwrap().len(), 9);
        assert_eq!(grid_points(1.0).unwrap().len(), 4);
    }

    #[test]
    fn grid_values_are_exact_fractions() {
        let pts = grid_points(0.05).unwrap();
        assert_eq!(pts[3].p_peripheral, 0.15);
        assert_eq!(pts.last().unwrap().p_core, 1.0);
        assert_eq!(pts[0].p_core, 0.0);
    }

    #[test]
    fn uneven_step_rejected() {
        assert!(grid_points(0.3).is_err());
        assert!(grid_points(0.0).is_err());
        assert!(grid_points(1.5).is_err());
    }

    #[test]
    fn seeds_are_positional() {
        let runs = grid_runs(42, 0.5, 2).unwrap();
        assert_eq!(runs.len(), 18);
        let subset = grid_runs(42, 0.5, 1).unwrap();
        assert_eq!(runs[0].seed, subset[0].seed);
        let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 18);
    }
}
