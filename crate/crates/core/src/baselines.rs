//! Reference alignment strategies used to put TERRA's probe counts in
//! context.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::array::Codebook;
use crate::error::{config_err, Error, Result};
use crate::BeamId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub beam: BeamId,
    pub measurements: usize,
    pub rss: f64,
}

/// Probes every beam; lowest id wins ties.
pub fn oracle_best(
    codebook: &Codebook,
    mut probe: impl FnMut(BeamId) -> f64,
) -> Result<AlignmentResult> {
    if codebook.is_empty() {
        return Err(Error::Insufficient("empty codebook".into()));
    }
    let mut best = AlignmentResult {
        beam: 0,
        measurements: 0,
        rss: f64::NEG_INFINITY,
    };
    for b in 0..codebook.len() {
        let r = probe(b);
        best.measurements += 1;
        if r > best.rss {
            best.beam = b;
            best.rss = r;
        }
    }
    Ok(best)
}

// Half-open index ranges of a node: rows, cols.
type Node = ((usize, usize), (usize, usize));

fn split((lo, hi): (usize, usize)) -> Vec<(usize, usize)> {
    if hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        alloc::vec![(lo, mid), (mid, hi)]
    } else {
        alloc::vec![(lo, hi)]
    }
}

fn check_tree(codebook: &Codebook) -> Result<()> {
    if codebook.is_empty() {
        return Err(Error::Insufficient("empty codebook".into()));
    }
    for (name, n) in [("azimuth", codebook.n_az()), ("zenith", codebook.n_zen())] {
        if !n.is_power_of_two() {
            return Err(config_err!(
                "hierarchical search needs a power-of-two grid, {name} has {n} beams"
            ));
        }
    }
    Ok(())
}

fn children(((r0, r1), (c0, c1)): Node) -> Vec<Node> {
    let mut out = Vec::with_capacity(4);
    for rows in split((r0, r1)) {
        for cols in split((c0, c1)) {
            out.push((rows, cols));
        }
    }
    out
}

/// Measurements a hierarchical descent uses on this codebook: two per level
/// along one axis, four per level while both axes still split.
pub fn hierarchical_measurements(codebook: &Codebook) -> Result<usize> {
    check_tree(codebook)?;
    let mut node: Node = ((0, codebook.n_zen()), (0, codebook.n_az()));
    let mut total = 0;
    loop {
        let kids = children(node);
        if kids.len() == 1 {
            return Ok(total.max(1));
        }
        total += kids.len();
        node = kids[0];
    }
}

/// Descends a tree of synthetic wide beams. A wide beam's gain is the
/// envelope of its leaves, so its measurement is the best leaf RSS under
/// it; the count charged is one measurement per node probed.
pub fn hierarchical_search(
    codebook: &Codebook,
    mut probe: impl FnMut(BeamId) -> f64,
) -> Result<AlignmentResult> {
    check_tree(codebook)?;
    let n_az = codebook.n_az();
    let mut cache: Vec<Option<f64>> = alloc::vec![None; codebook.len()];
    let mut leaf = |id: BeamId, probe: &mut dyn FnMut(BeamId) -> f64| -> f64 {
        *cache[id].get_or_insert_with(|| probe(id))
    };
    let mut node: Node = ((0, codebook.n_zen()), (0, n_az));
    let mut measurements = 0;
    loop {
        let kids = children(node);
        if kids.len() == 1 {
            let ((r, _), (c, _)) = node;
            let id = r * n_az + c;
            let rss = leaf(id, &mut probe);
            return Ok(AlignmentResult {
                beam: id,
                measurements: measurements.max(1),
                rss,
            });
        }
        let mut best: Option<(Node, f64)> = None;
        for kid in kids {
            measurements += 1;
            let ((r0, r1), (c0, c1)) = kid;
            let mut env = f64::NEG_INFINITY;
            for r in r0..r1 {
                for c in c0..c1 {
                    env = env.max(leaf(r * n_az + c, &mut probe));
                }
            }
            if best.is_none_or(|(_, b)| env > b) {
                best = Some((kid, env));
            }
        }
        node = best.expect("at least one child").0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub strategy: String,
    pub max_measurements: usize,
    /// `simulated` or `reported`.
    pub source: String,
}

/// Published per-adaptation measurement counts of schemes that are not
/// re-implemented here.
pub const REPORTED_OVERHEAD: [(&str, usize); 3] = [("HBA", 63), ("FALP", 70), ("Agile Link", 110)];

/// Maximum measurements per adaptation for each strategy on `codebook`.
/// `terra_max_probes` comes from a simulated run.
pub fn tracking_overhead_report(
    codebook: &Codebook,
    terra_max_probes: usize,
) -> Result<Vec<OverheadRow>> {
    let row = |s: &str, n: usize, src: &str| OverheadRow {
        strategy: s.into(),
        max_measurements: n,
        source: src.into(),
    };
    let mut rows = alloc::vec![
        row("TERRA", terra_max_probes, "simulated"),
        row("Exhaustive Search", codebook.len(), "simulated"),
    ];
    if let Ok(h) = hierarchical_measurements(codebook) {
        rows.push(row("Hierarchical", h, "simulated"));
    }
    for (name, n) in REPORTED_OVERHEAD {
        rows.push(row(name, n, "reported"));
    }
    Ok(rows)
}
