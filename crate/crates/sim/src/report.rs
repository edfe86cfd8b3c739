//! Batch-level reports built from one or more traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use terra_core::analysis::{self, MetricReport};
use terra_core::sweep::{EventKind, Trace, TraceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub scenario: String,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub floor: f64,
    pub reference_rss: f64,
    /// Metrics over all runs pooled together.
    pub pooled: MetricReport,
    /// Per-run metrics; CDF points are left out.
    pub per_run: Vec<MetricReport>,
}

/// Largest probe round per purpose, from the engine rather than the trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub max_probes: BTreeMap<String, usize>,
    pub scans: usize,
}

/// Concatenates traces on a common time axis with a gap so that intervals
/// of consecutive runs never touch.
pub fn concatenate(traces: &[&Trace]) -> Trace {
    let mut out = Trace::default();
    let mut offset = 0.0;
    for tr in traces {
        out.events.extend(tr.events.iter().map(|e| TraceEvent {
            t: e.t + offset,
            kind: e.kind.clone(),
        }));
        offset += tr.horizon + 1.0;
    }
    out.horizon = (offset - 1.0).max(0.0);
    out
}

pub fn batch_report(
    scenario: &str,
    seeds: &[u64],
    traces: &[&Trace],
    floor: f64,
    reference: f64,
) -> BatchReport {
    let per_run = traces
        .iter()
        .map(|tr| MetricReport {
            cdf_points: Vec::new(),
            ..analysis::metric_report(tr, floor, reference)
        })
        .collect();
    let mut pooled = analysis::metric_report(&concatenate(traces), floor, reference);
    pooled.cdf_points.clear();
    BatchReport {
        scenario: scenario.to_string(),
        runs: traces.len(),
        seeds: seeds.to_vec(),
        floor,
        reference_rss: reference,
        pooled,
        per_run,
    }
}

/// Operating RSS samples of every run, for the CDF table.
pub fn operating_cdf(traces: &[&Trace]) -> Vec<(f64, f64)> {
    let samples: Vec<f64> = traces
        .iter()
        .flat_map(|tr| {
            tr.measurements(terra_core::sweep::LinkKind::Operating)
                .map(|m| m.4)
        })
        .collect();
    analysis::cdf(&samples).unwrap_or_default()
}

/// Number of state transitions per (from, to) arc.
pub fn transition_counts(trace: &Trace) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for e in &trace.events {
        if let EventKind::StateTransition { from, to, .. } = &e.kind {
            *out.entry(format!("{from}->{to}")).or_insert(0) += 1;
        }
    }
    out
}
