//! Result files: the per-iteration results CSV and the surface summary.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::metrics::{Metric, MetricRecord, Scope};

pub const RESULTS_HEADER: &str = "p_core,p_peripheral,seed,iteration,scope,metric,value";
pub const SUMMARY_HEADER: &str = "p_core,p_peripheral,metric,scope,value";

/// Iterations averaged for surface values and late-window statistics.
pub const LATE_WINDOW: usize = 10;

fn record_key(r: &MetricRecord) -> (f64, f64, u64, u32, Scope, Metric) {
    (r.p_core, r.p_peripheral, r.seed, r.iteration, r.scope, r.metric)
}

/// Sorts by `(p_core, p_peripheral, seed, iteration, scope, metric)`.
pub fn sort_records(records: &mut [MetricRecord]) {
    records.sort_by(|a, b| {
        let (ka, kb) = (record_key(a), record_key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
            .then(ka.3.cmp(&kb.3))
            .then(ka.4.cmp(&kb.4))
            .then(ka.5.cmp(&kb.5))
    });
}

pub fn write_results_csv<W: Write>(mut out: W, records: &[MetricRecord]) -> io::Result<()> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in &sorted {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6}",
            r.p_core, r.p_peripheral, r.seed, r.iteration, r.scope, r.metric, r.value
        )?;
    }
    out.flush()
}

/// Mean over the last `window` iterations present for each seed, then over seeds.
pub fn late_window_mean(records: &[MetricRecord], metric: Metric, scope: Scope, window: usize) -> Option<f64> {
    let per_seed = late_window_by_seed(records, metric, scope, window);
    if per_seed.is_empty() {
        return None;
    }
    Some(per_seed.values().sum::<f64>() / per_seed.len() as f64)
}

/// Late-window mean for each seed found in `records`.
pub fn late_window_by_seed(
    records: &[MetricRecord],
    metric: Metric,
    scope: Scope,
    window: usize,
) -> BTreeMap<u64, f64> {
    let mut last: BTreeMap<u64, u32> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric == metric && r.scope == scope) {
        let e = last.entry(r.seed).or_insert(0);
        *e = (*e).max(r.iteration);
    }
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric == metric && r.scope == scope) {
        let final_iter = last[&r.seed];
        if r.iteration + window as u32 > final_iter {
            let e = acc.entry(r.seed).or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
}

/// One surface value per `(p_core, p_peripheral, metric, scope)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceCell {
    pub p_core: f64,
    pub p_peripheral: f64,
    pub metric: Metric,
    pub scope: Scope,
    pub value: f64,
}

/// Late-window means per grid cell, averaged over the seeds run at that cell.
pub fn surface_summary(records: &[MetricRecord]) -> Vec<SurfaceCell> {
    // keyed by bit patterns so f64 grid coordinates can live in a BTreeMap
    type Key = (u64, u64, Metric, Scope, u64);
    let mut final_iter: BTreeMap<(u64, u64, u64), u32> = BTreeMap::new();
    for r in records {
        let e = final_iter
            .entry((r.p_core.to_bits(), r.p_peripheral.to_bits(), r.seed))
            .or_insert(0);
        *e = (*e).max(r.iteration);
    }
    let mut per_seed: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
    for r in records {
        let last = final_iter[&(r.p_core.to_bits(), r.p_peripheral.to_bits(), r.seed)];
        if r.iteration as usize + LATE_WINDOW > last as usize {
            let e = per_seed
                .entry((r.p_core.to_bits(), r.p_peripheral.to_bits(), r.metric, r.scope, r.seed))
                .or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
    }
    let mut cells: BTreeMap<(u64, u64, Metric, Scope), (f64, usize)> = BTreeMap::new();
    for ((pc, pp, m, s, _), (sum, n)) in per_seed {
        let e = cells.entry((pc, pp, m, s)).or_insert((0.0, 0));
        e.0 += sum / n as f64;
        e.1 += 1;
    }
    let mut out: Vec<SurfaceCell> = cells
        .into_iter()
        .map(|((pc, pp, metric, scope), (sum, n))| SurfaceCell {
            p_core: f64::from_bits(pc),
            p_peripheral: f64::from_bits(pp),
            metric,
            scope,
            value: sum / n as f64,
        })
        .collect();
    out.sort_by(|a, b| {
        a.p_core
            .total_cmp(&b.p_core)
            .then(a.p_peripheral.total_cmp(&b.p_peripheral))
            .then(a.metric.cmp(&b.metric))
            .then(a.scope.cmp(&b.scope))
    });
    out
}

pub fn write_summary_csv<W: Write>(mut out: W, cells: &[SurfaceCell]) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{:.6}",
            c.p_core, c.p_peripheral, c.metric, c.scope, c.value
        )?;
    }
    out.flush()
}
