//! Evaluation metrics computed from traces.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::array::Codebook;
use crate::error::{Error, Result};
use crate::math;
use crate::sweep::{LinkKind, Trace};
use crate::BeamId;

/// Empirical CDF as right-continuous step points `(value, P[X ≤ value])`.
pub fn cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Insufficient("cdf of an empty sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("cdf input contains NaN".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in s.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => out.push((x, p)),
        }
    }
    Ok(out)
}

fn inside(t: f64, intervals: &[(f64, f64)]) -> bool {
    intervals.iter().any(|&(a, b)| t >= a && t <= b)
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Operating samples that fall inside blockage intervals.
fn blockage_samples(trace: &Trace) -> Vec<(f64, f64)> {
    let blockages = trace.blockage_intervals();
    trace
        .measurements(LinkKind::Operating)
        .filter(|&(t, ..)| inside(t, &blockages))
        .map(|(t, _, _, _, rss)| (t, rss))
        .collect()
}

/// Share of blockage-interval samples spent in outage: the operating beam
/// sits at or below `floor`, or the protocol has declared an outage.
/// `None` when no sample falls inside a blockage.
pub fn outage_fraction(trace: &Trace, floor: f64) -> Option<f64> {
    let samples = blockage_samples(trace);
    if samples.is_empty() {
        return None;
    }
    let outages = trace.outage_intervals();
    let bad = samples
        .iter()
        .filter(|&&(t, rss)| rss <= floor || inside(t, &outages))
        .count();
    Some(bad as f64 / samples.len() as f64)
}

/// (blockage events, events with no overlapping outage interval).
pub fn blockage_outage_counts(trace: &Trace) -> (usize, usize) {
    let outages = trace.outage_intervals();
    let blockages = trace.blockage_intervals();
    let avoided = blockages
        .iter()
        .filter(|&&b| !outages.iter().any(|&o| overlaps(b, o)))
        .count();
    (blockages.len(), avoided)
}

/// Fraction of blockage events that caused no outage.
pub fn outage_avoidance_fraction(trace: &Trace) -> Option<f64> {
    match blockage_outage_counts(trace) {
        (0, _) => None,
        (n, ok) => Some(ok as f64 / n as f64),
    }
}

/// Share of blockage-interval samples within 6 dB of `reference`.
pub fn within_6db_fraction(trace: &Trace, reference: f64) -> Option<f64> {
    let samples = blockage_samples(trace);
    if samples.is_empty() {
        return None;
    }
    let ok = samples
        .iter()
        .filter(|&&(_, rss)| rss >= reference - 6.0)
        .count();
    Some(ok as f64 / samples.len() as f64)
}

/// Paired (oracle, achieved) RSS at every oracle instant.
pub fn oracle_pairs(trace: &Trace) -> Vec<(f64, f64, f64)> {
    let oracle: Vec<_> = trace.measurements(LinkKind::Oracle).collect();
    let operating: Vec<_> = trace.measurements(LinkKind::Operating).collect();
    let mut out = Vec::with_capacity(oracle.len());
    let mut j = 0;
    for &(t, _, _, _, o) in &oracle {
        while j < operating.len() && operating[j].0 < t {
            j += 1;
        }
        if j < operating.len() && operating[j].0 == t {
            out.push((t, o, operating[j].4));
        }
    }
    out
}

/// √mean((oracle − achieved)²) over the run.
pub fn rms_loss_vs_oracle(trace: &Trace) -> Result<f64> {
    rms_of_pairs(&oracle_pairs(trace))
}

fn rms_of_pairs(pairs: &[(f64, f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::NotFound("trace has no oracle samples".into()));
    }
    let ms = pairs
        .iter()
        .map(|&(_, o, a)| (o - a) * (o - a))
        .sum::<f64>()
        / pairs.len() as f64;
    Ok(math::sqrt(ms))
}

/// Time spent within 3 dB of the oracle; each oracle sample stands for the
/// interval until the next one.
pub fn time_within_3db(trace: &Trace) -> f64 {
    let pairs = oracle_pairs(trace);
    let mut total = 0.0;
    for (i, &(t, o, a)) in pairs.iter().enumerate() {
        let next = pairs.get(i + 1).map_or(trace.horizon, |p| p.0);
        if o - a <= 3.0 {
            total += (next - t).max(0.0);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    pub median: f64,
    pub std: f64,
    pub n: usize,
}

/// Median and sample standard deviation of scan dwell counts.
pub fn search_count_stats(counts: &[usize]) -> Option<CountStats> {
    if counts.is_empty() {
        return None;
    }
    let mut s: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = s.len();
    let median = if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    };
    let mean = s.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        math::sqrt(s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64)
    } else {
        0.0
    };
    Some(CountStats { median, std, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunsTest {
    pub runs: usize,
    pub positives: usize,
    pub negatives: usize,
    pub z: f64,
    /// Two-sided p-value under the normal approximation.
    pub p: f64,
    pub reject_at_95: bool,
}

/// Wald–Wolfowitz runs test on the signs of `deltas`; zeros are dropped.
pub fn runs_test(deltas: &[i64]) -> Result<RunsTest> {
    let signs: Vec<bool> = deltas.iter().filter(|&&d| d != 0).map(|&d| d > 0).collect();
    let n1 = signs.iter().filter(|&&s| s).count();
    let n2 = signs.len() - n1;
    if signs.len() < 2 || n1 == 0 || n2 == 0 {
        return Err(Error::Insufficient(alloc::format!(
            "runs test needs both signs, got {n1} positive and {n2} negative"
        )));
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let expected = 2.0 * a * b / n + 1.0;
    let var = 2.0 * a * b * (2.0 * a * b - a - b) / (n * n * (n - 1.0));
    if !(var > 0.0) {
        return Err(Error::Insufficient("runs test variance is zero".into()));
    }
    let z = (runs as f64 - expected) / math::sqrt(var);
    let p = math::erfc(z.abs() / core::f64::consts::SQRT_2);
    Ok(RunsTest {
        runs,
        positives: n1,
        negatives: n2,
        z,
        p,
        reject_at_95: z.abs() > 1.96,
    })
}

/// Azimuth-axis grid index differences between consecutive beams.
pub fn beam_deltas(codebook: &Codebook, beams: &[BeamId]) -> Vec<i64> {
    beams
        .windows(2)
        .map(|w| {
            let col = |b: BeamId| codebook.beams[b].col as i64;
            col(w[1]) - col(w[0])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricReport {
    pub outage_fraction: Option<f64>,
    pub outage_avoidance: Option<f64>,
    pub blockage_events: usize,
    pub within_6db_fraction: Option<f64>,
    pub rms_loss_vs_oracle: Option<f64>,
    pub time_within_3db_of_oracle: f64,
    pub search_count: Option<CountStats>,
    pub cdf_points: Vec<(f64, f64)>,
}

/// Every metric computable from `trace`. The CDF is over operating RSS.
pub fn metric_report(trace: &Trace, floor: f64, reference: f64) -> MetricReport {
    let operating: Vec<f64> = trace
        .measurements(LinkKind::Operating)
        .map(|m| m.4)
        .collect();
    MetricReport {
        outage_fraction: outage_fraction(trace, floor),
        outage_avoidance: outage_avoidance_fraction(trace),
        blockage_events: trace.blockage_intervals().len(),
        within_6db_fraction: within_6db_fraction(trace, reference),
        rms_loss_vs_oracle: rms_loss_vs_oracle(trace).ok(),
        time_within_3db_of_oracle: time_within_3db(trace),
        search_count: search_count_stats(&trace.scan_dwell_counts()),
        cdf_points: cdf(&operating).unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::EventKind;

    fn measurement(link: LinkKind, rss: f64) -> EventKind {
        EventKind::Measurement {
            link,
            station: 0,
            tx: None,
            rx: None,
            rss,
            dwells: None,
            purpose: None,
        }
    }

    fn paired(gaps: &[f64]) -> Trace {
        let mut tr = Trace {
            horizon: gaps.len() as f64,
            ..Trace::default()
        };
        for (i, g) in gaps.iter().enumerate() {
            tr.push(i as f64, measurement(LinkKind::Oracle, -60.0));
            tr.push(i as f64, measurement(LinkKind::Operating, -60.0 - g));
        }
        tr
    }

    #[test]
    fn cdf_steps() {
        assert_eq!(
            cdf(&[3.0, 1.0, 2.0]).unwrap(),
            [(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]
        );
        assert_eq!(cdf(&[5.0; 4]).unwrap(), [(5.0, 1.0)]);
        assert!(cdf(&[]).is_err());
    }

    #[test]
    fn rms_against_oracle() {
        assert_eq!(rms_loss_vs_oracle(&paired(&[0.0; 5])).unwrap(), 0.0);
        assert!((rms_loss_vs_oracle(&paired(&[2.0; 5])).unwrap() - 2.0).abs() < 1e-12);
        assert!(rms_loss_vs_oracle(&Trace::default()).is_err());
        assert_eq!(time_within_3db(&paired(&[0.0, 4.0, 1.0])), 2.0);
    }

    #[test]
    fn alternating_sequence_is_rejected() {
        let seq: Vec<i64> = (0..20).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let r = runs_test(&seq).unwrap();
        assert_eq!(r.runs, 20);
        // E[r] = 11, Var[r] = 2·10·10·(200 − 20)/(20²·19)
        let z = 9.0 / (36000.0_f64 / 7600.0).sqrt();
        assert!((z - 4.135).abs() < 1e-3);
        assert!((r.z - z).abs() < 1e-12);
        assert!(r.reject_at_95);
        assert!(runs_test(&[1, 2, 3]).is_err());
        assert!(runs_test(&[1]).is_err());
    }

    #[test]
    fn count_stats() {
        let s = search_count_stats(&[7]).unwrap();
        assert_eq!((s.median, s.std), (7.0, 0.0));
        let s = search_count_stats(&[1, 2, 3, 4]).unwrap();
        assert_eq!(s.median, 2.5);
        assert!(search_count_stats(&[]).is_none());
    }

    #[test]
    fn outage_metrics_from_intervals() {
        let mut tr = Trace {
            horizon: 10.0,
            ..Trace::default()
        };
        tr.push(1.0, EventKind::BlockageStart { station: 0 });
        tr.push(1.0, measurement(LinkKind::Operating, -60.0));
        tr.push(1.1, measurement(LinkKind::Operating, -66.0));
        tr.push(1.2, EventKind::BlockageEnd { station: 0 });
        tr.push(5.0, EventKind::BlockageStart { station: 0 });
        tr.push(5.0, EventKind::OutageStart);
        tr.push(5.1, measurement(LinkKind::Operating, -78.0));
        tr.push(5.2, EventKind::BlockageEnd { station: 0 });
        tr.push(6.0, EventKind::OutageEnd);
        assert_eq!(blockage_outage_counts(&tr), (2, 1));
        assert_eq!(outage_avoidance_fraction(&tr), Some(0.5));
        assert!((outage_fraction(&tr, -70.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((within_6db_fraction(&tr, -60.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(outage_avoidance_fraction(&Trace::default()), None);
    }
}
