//! The TERRA beam management state machine.
//!
//! The machine is driven by callbacks from the simulation engine and
//! answers with [`Action`]s. It never measures anything itself; every RSS
//! value it sees arrives through a sample, a probe result or a scan result.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::array::Codebook;
use crate::error::{config_err, Result};
use crate::{BeamId, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolState {
    LosOperation,
    GroundReflectedDiscovery,
    ExhaustiveSearch,
    NlosOperation,
    NeighborAcquisition,
    NeighborTracking,
}

impl ProtocolState {
    pub const ALL: [ProtocolState; 6] = [
        ProtocolState::LosOperation,
        ProtocolState::GroundReflectedDiscovery,
        ProtocolState::ExhaustiveSearch,
        ProtocolState::NlosOperation,
        ProtocolState::NeighborAcquisition,
        ProtocolState::NeighborTracking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolState::LosOperation => "los_operation",
            ProtocolState::GroundReflectedDiscovery => "ground_reflected_discovery",
            ProtocolState::ExhaustiveSearch => "exhaustive_search",
            ProtocolState::NlosOperation => "nlos_operation",
            ProtocolState::NeighborAcquisition => "neighbor_acquisition",
            ProtocolState::NeighborTracking => "neighbor_tracking",
        }
    }
}

impl fmt::Display for ProtocolState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "defaults::blockage_drop")]
    pub blockage_drop: f64,
    #[serde(default = "defaults::adapt_drop")]
    pub adapt_drop: f64,
    #[serde(default = "defaults::yes")]
    pub pose_available: bool,
    #[serde(default = "defaults::revert_margin")]
    pub revert_margin: f64,
    #[serde(default = "defaults::ref_window")]
    pub ref_window: usize,
    #[serde(default = "defaults::reconnect_penalty")]
    pub reconnect_penalty: f64,
    /// Beams probed below the LoS beam when pose is known.
    #[serde(default = "defaults::grd_candidates")]
    pub grd_candidates: usize,
    #[serde(default = "defaults::max_neighbor_probes")]
    pub max_neighbor_probes: usize,
    /// Keep scanning after every neighbor acquisition; used to collect
    /// search-count statistics.
    #[serde(default)]
    pub rescan_after_acquire: bool,
    /// Hand over to the tracked neighbor this long after acquiring it.
    #[serde(default)]
    pub handover_after: Option<f64>,
    #[serde(default)]
    pub handover_duration: f64,
}

mod defaults {
    pub fn blockage_drop() -> f64 {
        15.0
    }
    pub fn adapt_drop() -> f64 {
        3.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn revert_margin() -> f64 {
        3.0
    }
    pub fn ref_window() -> usize {
        10
    }
    pub fn reconnect_penalty() -> f64 {
        1.0
    }
    pub fn grd_candidates() -> usize {
        2
    }
    pub fn max_neighbor_probes() -> usize {
        8
    }
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            blockage_drop: defaults::blockage_drop(),
            adapt_drop: defaults::adapt_drop(),
            pose_available: true,
            revert_margin: defaults::revert_margin(),
            ref_window: defaults::ref_window(),
            reconnect_penalty: defaults::reconnect_penalty(),
            grd_candidates: defaults::grd_candidates(),
            max_neighbor_probes: defaults::max_neighbor_probes(),
            rescan_after_acquire: false,
            handover_after: None,
            handover_duration: 0.0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adapt_drop > 0.0 && self.blockage_drop > self.adapt_drop) {
            return Err(config_err!("need blockage_drop > adapt_drop > 0"));
        }
        if self.ref_window == 0 {
            return Err(config_err!("ref_window must be at least 1"));
        }
        if !(self.reconnect_penalty >= 0.0) || !(self.handover_duration >= 0.0) {
            return Err(config_err!("timer durations must be non-negative"));
        }
        if !(self.revert_margin >= 0.0) {
            return Err(config_err!("revert_margin must be non-negative"));
        }
        if self.max_neighbor_probes == 0 || self.max_neighbor_probes > 8 {
            return Err(config_err!("max_neighbor_probes must lie in 1..=8"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborLink {
    pub station: StationId,
    /// Base-station beam the link was last heard strongest on.
    pub tx_beam: BeamId,
    pub rx_beam: BeamId,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeamStore {
    pub los_beam: Option<BeamId>,
    pub gr_beam: Option<BeamId>,
    pub neighbor: Option<NeighborLink>,
    pub los_ref_rss: Option<f64>,
    pub neighbor_ref_rss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbePurpose {
    /// Neighbors of the LoS beam after a small drop.
    Adapt,
    /// Hill-climb after re-acquiring the serving station.
    Refine,
    /// Beams below the LoS beam.
    Grd,
    /// Every candidate beam when the short GRD probe fails.
    GrdFull,
    /// LoS beam during NLoS operation.
    Revert,
    NeighborAdapt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanTarget {
    Serving,
    Neighbors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timer {
    Reconnect,
    Handover,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    /// `None` when the scan covered every receive beam without success.
    pub found: Option<NeighborLink>,
    pub rss: f64,
    pub dwells: usize,
}

/// What the mobile listens to between probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Listen {
    /// Serving station, whose transmit beam is always the best one.
    Serving {
        station: StationId,
        beam: BeamId,
    },
    /// A neighbor heard only on its own sweep schedule.
    Neighbor(NeighborLink),
    Nothing,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Transition {
        from: ProtocolState,
        to: ProtocolState,
        reason: &'static str,
    },
    BeamSwitch {
        station: StationId,
        from: Option<BeamId>,
        to: BeamId,
        reason: &'static str,
    },
    Probe {
        station: StationId,
        /// `None`: the station serves each probe on its best beam.
        tx_beam: Option<BeamId>,
        beams: Vec<BeamId>,
        purpose: ProbePurpose,
    },
    StartScan(ScanTarget),
    OutageStart,
    OutageEnd,
    Reconnect,
    StartTimer {
        timer: Timer,
        delay: f64,
    },
    /// Input that did not fit the current state; carried to the trace.
    Diagnostic(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub station: StationId,
    pub beam: BeamId,
    pub rss: f64,
}

#[derive(Debug, Clone)]
pub struct Terra {
    cfg: ProtocolConfig,
    codebook: Codebook,
    decode_threshold: f64,
    state: ProtocolState,
    store: BeamStore,
    serving: Option<StationId>,
    neighbors: Vec<StationId>,
    window: VecDeque<f64>,
    neighbor_window: VecDeque<f64>,
    // highest RSS since the beam was last aligned; slow drift is measured from here
    los_peak: f64,
    neighbor_peak: f64,
    last_rss: f64,
    awaiting: Option<ProbePurpose>,
    scanning: bool,
    in_outage: bool,
    reconnecting: bool,
    grd_failures: usize,
}

fn window_max(w: &VecDeque<f64>) -> Option<f64> {
    w.iter()
        .copied()
        .fold(None, |m, x| Some(m.map_or(x, |m: f64| m.max(x))))
}

/// Best `(beam, rss)` over `results`, lowest id on ties.
fn argmax(results: &[(BeamId, f64)]) -> Option<(BeamId, f64)> {
    let mut best: Option<(BeamId, f64)> = None;
    for &(b, r) in results {
        best = match best {
            Some((bb, br)) if br > r || (br == r && bb < b) => Some((bb, br)),
            _ => Some((b, r)),
        };
    }
    best
}

/// New LoS beam after an adaptation probe: argmax over the probes and the
/// incumbent, ties to the lowest id. An empty probe set keeps the incumbent.
pub fn los_adapt(current: (BeamId, f64), probes: &[(BeamId, f64)]) -> (BeamId, f64) {
    let mut all = Vec::with_capacity(probes.len() + 1);
    all.push(current);
    all.extend_from_slice(probes);
    argmax(&all).unwrap_or(current)
}

/// Beams to probe for the ground bounce. With pose, the beams directly
/// below the LoS beam; without, every below-horizontal beam except the LoS
/// beam (every other beam on a one-dimensional codebook).
pub fn grd_candidates(
    codebook: &Codebook,
    los: BeamId,
    pose_available: bool,
    count: usize,
) -> Vec<BeamId> {
    if pose_available && codebook.is_two_dimensional() {
        let below = codebook.downward_neighbors(los, count);
        if !below.is_empty() {
            return below;
        }
    }
    full_grd_candidates(codebook, los)
}

fn full_grd_candidates(codebook: &Codebook, los: BeamId) -> Vec<BeamId> {
    let below: Vec<BeamId> = codebook
        .beams
        .iter()
        .filter(|b| b.id != los && b.steer_zen > 0.0)
        .map(|b| b.id)
        .collect();
    if codebook.is_two_dimensional() && !below.is_empty() {
        below
    } else {
        (0..codebook.len()).filter(|&b| b != los).collect()
    }
}

impl Terra {
    pub fn new(
        cfg: ProtocolConfig,
        codebook: Codebook,
        decode_threshold: f64,
        serving: Option<StationId>,
        neighbors: Vec<StationId>,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            codebook,
            decode_threshold,
            state: ProtocolState::NeighborAcquisition,
            store: BeamStore::default(),
            serving,
            neighbors,
            window: VecDeque::new(),
            neighbor_window: VecDeque::new(),
            los_peak: f64::NEG_INFINITY,
            neighbor_peak: f64::NEG_INFINITY,
            last_rss: f64::NEG_INFINITY,
            awaiting: None,
            scanning: false,
            in_outage: false,
            reconnecting: false,
            grd_failures: 0,
        })
    }

    pub fn state(&self) -> ProtocolState {
        self.state
    }

    pub fn store(&self) -> &BeamStore {
        &self.store
    }

    pub fn serving(&self) -> Option<StationId> {
        self.serving
    }

    pub fn in_outage(&self) -> bool {
        self.in_outage
    }

    /// Number of GRD attempts that found nothing.
    pub fn grd_failures(&self) -> usize {
        self.grd_failures
    }

    /// Whether the machine is waiting for probe or scan results.
    pub fn busy(&self) -> bool {
        self.awaiting.is_some() || self.scanning
    }

    pub fn listening(&self) -> Listen {
        if self.reconnecting {
            return Listen::Nothing;
        }
        match (self.state, self.serving) {
            // discovery probes are interleaved with reception on the LoS beam
            (ProtocolState::LosOperation | ProtocolState::GroundReflectedDiscovery, Some(s)) => {
                match self.store.los_beam {
                    Some(b) => Listen::Serving {
                        station: s,
                        beam: b,
                    },
                    None => Listen::Nothing,
                }
            }
            (ProtocolState::NlosOperation, Some(s)) => match self.store.gr_beam {
                Some(b) => Listen::Serving {
                    station: s,
                    beam: b,
                },
                None => Listen::Nothing,
            },
            (ProtocolState::NeighborTracking, _) => self
                .store
                .neighbor
                .map_or(Listen::Nothing, Listen::Neighbor),
            _ => Listen::Nothing,
        }
    }

    fn go(&mut self, to: ProtocolState, reason: &'static str, out: &mut Vec<Action>) {
        out.push(Action::Transition {
            from: self.state,
            to,
            reason,
        });
        self.state = to;
    }

    fn probe(
        &mut self,
        station: StationId,
        tx: Option<BeamId>,
        beams: Vec<BeamId>,
        purpose: ProbePurpose,
        out: &mut Vec<Action>,
    ) {
        self.awaiting = Some(purpose);
        out.push(Action::Probe {
            station,
            tx_beam: tx,
            beams,
            purpose,
        });
    }

    fn scan(&mut self, target: ScanTarget, out: &mut Vec<Action>) {
        self.scanning = true;
        out.push(Action::StartScan(target));
    }

    fn outage(&mut self, out: &mut Vec<Action>) {
        if !self.in_outage {
            self.in_outage = true;
            out.push(Action::OutageStart);
        }
    }

    fn reset_window(&mut self, rss: f64) {
        self.window.clear();
        self.window.push_back(rss);
        self.store.los_ref_rss = Some(rss);
        self.los_peak = rss;
    }

    fn push_window(&mut self, rss: f64) {
        self.window.push_back(rss);
        while self.window.len() > self.cfg.ref_window {
            self.window.pop_front();
        }
        self.store.los_ref_rss = window_max(&self.window);
        self.los_peak = self.los_peak.max(rss);
    }

    fn push_neighbor_window(&mut self, rss: f64, reset: bool) {
        if reset {
            self.neighbor_window.clear();
            self.neighbor_peak = rss;
        }
        self.neighbor_peak = self.neighbor_peak.max(rss);
        self.neighbor_window.push_back(rss);
        while self.neighbor_window.len() > self.cfg.ref_window {
            self.neighbor_window.pop_front();
        }
        self.store.neighbor_ref_rss = window_max(&self.neighbor_window);
    }

    /// Begin operation. `initial` is the serving beam locked at start-up,
    /// if any beam of the serving station is decodable.
    pub fn start(&mut self, initial: Option<(BeamId, f64)>) -> Vec<Action> {
        let mut out = Vec::new();
        match (self.serving, initial) {
            (Some(s), Some((beam, rss))) if rss >= self.decode_threshold => {
                self.go(ProtocolState::LosOperation, "initial_lock", &mut out);
                self.store.los_beam = Some(beam);
                out.push(Action::BeamSwitch {
                    station: s,
                    from: None,
                    to: beam,
                    reason: "initial_lock",
                });
                self.reset_window(rss);
                self.last_rss = rss;
                self.enter_grd(&mut out);
            }
            (Some(_), _) => {
                self.go(ProtocolState::ExhaustiveSearch, "no_initial_beam", &mut out);
                self.outage(&mut out);
                self.scan(ScanTarget::Serving, &mut out);
            }
            (None, _) => {
                self.state = ProtocolState::NeighborAcquisition;
                self.scan(ScanTarget::Neighbors, &mut out);
            }
        }
        out
    }

    fn enter_grd(&mut self, out: &mut Vec<Action>) {
        let (Some(s), Some(los)) = (self.serving, self.store.los_beam) else {
            return;
        };
        self.store.gr_beam = None;
        self.go(ProtocolState::GroundReflectedDiscovery, "los_beam_set", out);
        let (beams, purpose) = if self.cfg.pose_available {
            (
                grd_candidates(&self.codebook, los, true, self.cfg.grd_candidates),
                ProbePurpose::Grd,
            )
        } else {
            (
                full_grd_candidates(&self.codebook, los),
                ProbePurpose::GrdFull,
            )
        };
        if beams.is_empty() {
            self.grd_failures += 1;
            self.go(ProtocolState::LosOperation, "grd_failed", out);
            return;
        }
        self.probe(s, None, beams, purpose, out);
    }

    fn lose_serving_link(&mut self, reason: &'static str, out: &mut Vec<Action>) {
        self.go(ProtocolState::ExhaustiveSearch, reason, out);
        self.outage(out);
        self.scan(ScanTarget::Serving, out);
    }

    /// Follows the neighbor's sweep to the base-station beam it was heard
    /// strongest on. Silent tracking cannot ask the station to steer.
    pub fn neighbor_tx_heard(&mut self, tx: BeamId) {
        if let Some(n) = self.store.neighbor.as_mut() {
            n.tx_beam = tx;
        }
    }

    /// Whether `rss` on the LoS beam sits a full blockage drop below the
    /// reference. The link layer uses this to report a sudden loss between
    /// periodic samples.
    pub fn blockage_alarm(&self, rss: f64) -> bool {
        self.state == ProtocolState::LosOperation
            && !self.busy()
            && self
                .store
                .los_ref_rss
                .is_some_and(|r| rss <= r - self.cfg.blockage_drop)
    }

    /// Measurement on the beam the mobile currently listens to.
    pub fn on_sample(&mut self, sample: Sample) -> Vec<Action> {
        let mut out = Vec::new();
        let expected = self.listening();
        let matches = match expected {
            Listen::Serving { station, beam } => sample.station == station && sample.beam == beam,
            Listen::Neighbor(n) => sample.station == n.station && sample.beam == n.rx_beam,
            Listen::Nothing => false,
        };
        if !matches || self.busy() {
            out.push(Action::Diagnostic(alloc::format!(
                "ignored sample for station {} beam {} in {}",
                sample.station,
                sample.beam,
                self.state
            )));
            return out;
        }
        self.last_rss = sample.rss;
        match self.state {
            ProtocolState::LosOperation => self.los_sample(sample, &mut out),
            ProtocolState::NlosOperation => {
                if sample.rss < self.decode_threshold {
                    self.lose_serving_link("reflection_lost", &mut out);
                } else if let (Some(s), Some(los)) = (self.serving, self.store.los_beam) {
                    self.probe(s, None, vec![los], ProbePurpose::Revert, &mut out);
                }
            }
            ProtocolState::NeighborTracking => self.neighbor_sample(sample, &mut out),
            _ => {}
        }
        out
    }

    fn los_sample(&mut self, sample: Sample, out: &mut Vec<Action>) {
        let Some(reference) = self.store.los_ref_rss else {
            self.reset_window(sample.rss);
            return;
        };
        if sample.rss <= reference - self.cfg.blockage_drop {
            if let Some(gr) = self.store.gr_beam {
                out.push(Action::BeamSwitch {
                    station: sample.station,
                    from: self.store.los_beam,
                    to: gr,
                    reason: "blockage",
                });
                self.go(ProtocolState::NlosOperation, "blockage_detected", out);
            } else {
                self.lose_serving_link("blockage_without_fallback", out);
            }
        } else if sample.rss <= self.los_peak - self.cfg.adapt_drop
            || sample.rss < self.decode_threshold
        {
            let los = sample.beam;
            self.probe(
                sample.station,
                None,
                self.codebook.angular_neighbors(los),
                ProbePurpose::Adapt,
                out,
            );
        } else {
            self.push_window(sample.rss);
        }
    }

    fn neighbor_sample(&mut self, sample: Sample, out: &mut Vec<Action>) {
        let Some(n) = self.store.neighbor else { return };
        if self.store.neighbor_ref_rss.is_none() {
            self.push_neighbor_window(sample.rss, true);
            return;
        }
        if sample.rss <= self.neighbor_peak - self.cfg.adapt_drop
            || sample.rss < self.decode_threshold
        {
            let mut beams = self.codebook.angular_neighbors(n.rx_beam);
            beams.truncate(self.cfg.max_neighbor_probes);
            self.probe(
                n.station,
                Some(n.tx_beam),
                beams,
                ProbePurpose::NeighborAdapt,
                out,
            );
        } else {
            self.push_neighbor_window(sample.rss, false);
        }
    }

    /// Results of a probe request, in request order.
    pub fn on_probes(&mut self, purpose: ProbePurpose, results: &[(BeamId, f64)]) -> Vec<Action> {
        let mut out = Vec::new();
        if self.awaiting != Some(purpose) {
            out.push(Action::Diagnostic(alloc::format!(
                "unexpected {purpose:?} probe results"
            )));
            return out;
        }
        self.awaiting = None;
        match purpose {
            ProbePurpose::Adapt | ProbePurpose::Refine => {
                self.finish_adapt(purpose, results, &mut out)
            }
            ProbePurpose::Grd | ProbePurpose::GrdFull => {
                self.finish_grd(purpose, results, &mut out)
            }
            ProbePurpose::Revert => {
                let reference = self.store.los_ref_rss.unwrap_or(f64::NEG_INFINITY);
                if let (Some(&(los, rss)), Some(s)) = (results.first(), self.serving) {
                    if rss >= reference - self.cfg.revert_margin {
                        out.push(Action::BeamSwitch {
                            station: s,
                            from: self.store.gr_beam,
                            to: los,
                            reason: "blockage_cleared",
                        });
                        self.reset_window(rss);
                        self.go(ProtocolState::LosOperation, "los_recovered", &mut out);
                    }
                }
            }
            ProbePurpose::NeighborAdapt => self.finish_neighbor_adapt(results, &mut out),
        }
        out
    }

    fn finish_adapt(
        &mut self,
        purpose: ProbePurpose,
        results: &[(BeamId, f64)],
        out: &mut Vec<Action>,
    ) {
        let (Some(s), Some(los)) = (self.serving, self.store.los_beam) else {
            return;
        };
        let (best, rss) = los_adapt((los, self.last_rss), results);
        if rss < self.decode_threshold {
            self.lose_serving_link("los_lost", out);
            return;
        }
        self.reset_window(rss);
        self.last_rss = rss;
        if best != los {
            out.push(Action::BeamSwitch {
                station: s,
                from: Some(los),
                to: best,
                reason: "los_adapt",
            });
            self.store.los_beam = Some(best);
            self.store.gr_beam = None;
            if purpose == ProbePurpose::Refine {
                self.probe(
                    s,
                    None,
                    self.codebook.angular_neighbors(best),
                    ProbePurpose::Refine,
                    out,
                );
            } else {
                self.enter_grd(out);
            }
        } else if purpose == ProbePurpose::Refine {
            self.enter_grd(out);
        }
    }

    fn finish_grd(
        &mut self,
        purpose: ProbePurpose,
        results: &[(BeamId, f64)],
        out: &mut Vec<Action>,
    ) {
        let found = argmax(results).filter(|&(_, r)| r >= self.decode_threshold);
        match (found, purpose) {
            (Some((gr, _)), _) => {
                self.store.gr_beam = Some(gr);
                self.go(ProtocolState::LosOperation, "gr_found", out);
            }
            (None, ProbePurpose::Grd) => {
                if let (Some(s), Some(los)) = (self.serving, self.store.los_beam) {
                    let already: Vec<BeamId> = results.iter().map(|&(b, _)| b).collect();
                    let rest: Vec<BeamId> = full_grd_candidates(&self.codebook, los)
                        .into_iter()
                        .filter(|b| !already.contains(b))
                        .collect();
                    if !rest.is_empty() {
                        self.probe(s, None, rest, ProbePurpose::GrdFull, out);
                        return;
                    }
                }
                self.grd_failures += 1;
                self.go(ProtocolState::LosOperation, "grd_failed", out);
            }
            (None, _) => {
                self.grd_failures += 1;
                self.go(ProtocolState::LosOperation, "grd_failed", out);
            }
        }
    }

    fn finish_neighbor_adapt(&mut self, results: &[(BeamId, f64)], out: &mut Vec<Action>) {
        let Some(n) = self.store.neighbor else { return };
        let (best, rss) = los_adapt((n.rx_beam, self.last_rss), results);
        if rss < self.decode_threshold {
            self.store.neighbor = None;
            self.store.neighbor_ref_rss = None;
            self.neighbor_window.clear();
            self.go(ProtocolState::NeighborAcquisition, "neighbor_lost", out);
            self.scan(ScanTarget::Neighbors, out);
            return;
        }
        if best != n.rx_beam {
            out.push(Action::BeamSwitch {
                station: n.station,
                from: Some(n.rx_beam),
                to: best,
                reason: "neighbor_adapt",
            });
            self.store.neighbor = Some(NeighborLink { rx_beam: best, ..n });
        }
        self.last_rss = rss;
        self.push_neighbor_window(rss, true);
    }

    /// Outcome of an exhaustive scan started with [`Action::StartScan`].
    pub fn on_scan(&mut self, outcome: ScanOutcome) -> Vec<Action> {
        let mut out = Vec::new();
        if !self.scanning {
            out.push(Action::Diagnostic("unexpected scan result".into()));
            return out;
        }
        self.scanning = false;
        match self.state {
            ProtocolState::ExhaustiveSearch => match outcome.found {
                Some(link) if Some(link.station) == self.serving => {
                    out.push(Action::BeamSwitch {
                        station: link.station,
                        from: self.store.los_beam,
                        to: link.rx_beam,
                        reason: "scan",
                    });
                    self.store.los_beam = Some(link.rx_beam);
                    self.store.gr_beam = None;
                    self.last_rss = outcome.rss;
                    self.reconnecting = true;
                    out.push(Action::StartTimer {
                        timer: Timer::Reconnect,
                        delay: self.cfg.reconnect_penalty,
                    });
                }
                _ if !self.neighbors.is_empty() => {
                    self.go(
                        ProtocolState::NeighborAcquisition,
                        "serving_scan_failed",
                        &mut out,
                    );
                    self.scan(ScanTarget::Neighbors, &mut out);
                }
                _ => self.scan(ScanTarget::Serving, &mut out),
            },
            ProtocolState::NeighborAcquisition => match outcome.found {
                Some(link) if self.cfg.rescan_after_acquire => {
                    let _ = link;
                    self.scan(ScanTarget::Neighbors, &mut out);
                }
                Some(link) => {
                    out.push(Action::BeamSwitch {
                        station: link.station,
                        from: None,
                        to: link.rx_beam,
                        reason: "neighbor_found",
                    });
                    self.store.neighbor = Some(link);
                    self.last_rss = outcome.rss;
                    self.push_neighbor_window(outcome.rss, true);
                    self.go(ProtocolState::NeighborTracking, "neighbor_found", &mut out);
                    if let Some(after) = self.cfg.handover_after {
                        out.push(Action::StartTimer {
                            timer: Timer::Handover,
                            delay: after + self.cfg.handover_duration,
                        });
                    }
                }
                None => self.scan(ScanTarget::Neighbors, &mut out),
            },
            _ => out.push(Action::Diagnostic(alloc::format!(
                "scan result in {}",
                self.state
            ))),
        }
        out
    }

    pub fn on_timer(&mut self, timer: Timer) -> Vec<Action> {
        let mut out = Vec::new();
        match timer {
            Timer::Reconnect if self.reconnecting => {
                self.reconnecting = false;
                out.push(Action::Reconnect);
                if self.in_outage {
                    self.in_outage = false;
                    out.push(Action::OutageEnd);
                }
                self.reset_window(self.last_rss);
                self.go(ProtocolState::LosOperation, "reconnected", &mut out);
                if let (Some(s), Some(los)) = (self.serving, self.store.los_beam) {
                    self.probe(
                        s,
                        None,
                        self.codebook.angular_neighbors(los),
                        ProbePurpose::Refine,
                        &mut out,
                    );
                }
            }
            Timer::Handover if self.state == ProtocolState::NeighborTracking && !self.busy() => {
                let Some(n) = self.store.neighbor else {
                    return out;
                };
                if let Some(old) = self.serving {
                    self.neighbors.push(old);
                }
                self.neighbors.retain(|&s| s != n.station);
                self.neighbors.sort_unstable();
                self.serving = Some(n.station);
                self.store.neighbor = None;
                self.store.neighbor_ref_rss = None;
                self.store.los_beam = Some(n.rx_beam);
                self.reset_window(self.last_rss);
                if self.in_outage {
                    self.in_outage = false;
                    out.push(Action::OutageEnd);
                }
                self.go(ProtocolState::LosOperation, "handover", &mut out);
                self.enter_grd(&mut out);
            }
            _ => out.push(Action::Diagnostic(alloc::format!("stale {timer:?} timer"))),
        }
        out
    }
}

/// Every arc the machine can take, as `(from, to, reason, design_decision)`.
/// Arcs flagged as design decisions are not described explicitly by the
/// protocol and were added to make the machine total.
pub const TRANSITIONS: &[(ProtocolState, ProtocolState, &str, bool)] = {
    use ProtocolState::*;
    &[
        (
            LosOperation,
            GroundReflectedDiscovery,
            "los_beam_set",
            false,
        ),
        (GroundReflectedDiscovery, LosOperation, "gr_found", false),
        (GroundReflectedDiscovery, LosOperation, "grd_failed", false),
        (LosOperation, NlosOperation, "blockage_detected", false),
        (NlosOperation, LosOperation, "los_recovered", false),
        (
            LosOperation,
            ExhaustiveSearch,
            "blockage_without_fallback",
            false,
        ),
        (NlosOperation, ExhaustiveSearch, "reflection_lost", false),
        (LosOperation, ExhaustiveSearch, "los_lost", true),
        (ExhaustiveSearch, LosOperation, "reconnected", false),
        (
            ExhaustiveSearch,
            NeighborAcquisition,
            "serving_scan_failed",
            false,
        ),
        (
            NeighborAcquisition,
            NeighborTracking,
            "neighbor_found",
            false,
        ),
        (
            NeighborTracking,
            NeighborAcquisition,
            "neighbor_lost",
            false,
        ),
        (NeighborTracking, LosOperation, "handover", true),
    ]
};

/// Transition graph in Graphviz DOT form; design-decision arcs are dashed.
pub fn transition_graph_dot() -> String {
    let mut s = String::from("digraph terra {\n  rankdir=LR;\n");
    for st in ProtocolState::ALL {
        s.push_str(&alloc::format!("  {} [shape=box];\n", st.as_str()));
    }
    for &(from, to, reason, decision) in TRANSITIONS {
        let style = if decision { ", style=dashed" } else { "" };
        s.push_str(&alloc::format!(
            "  {} -> {} [label=\"{}\"{}];\n",
            from.as_str(),
            to.as_str(),
            reason,
            style
        ));
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{make_codebook, ArrayGeometry};

    fn codebook() -> Codebook {
        make_codebook(
            ArrayGeometry::planar(12, 4, 60e9),
            (-60.0, 60.0),
            (-26.0, 40.0),
            12,
            3,
        )
        .unwrap()
    }

    /// Machine in steady LoS operation on beam 5 with GR beam 17 stored.
    fn locked(with_gr: bool) -> Terra {
        let mut m = Terra::new(
            ProtocolConfig::default(),
            codebook(),
            -68.0,
            Some(0),
            vec![1],
        )
        .unwrap();
        let acts = m.start(Some((5, -60.0)));
        assert!(acts.iter().any(|a| matches!(
            a,
            Action::Probe {
                purpose: ProbePurpose::Grd,
                ..
            }
        )));
        let res = if with_gr {
            vec![(17, -64.0), (29, -70.0)]
        } else {
            vec![(17, -75.0), (29, -76.0)]
        };
        m.on_probes(ProbePurpose::Grd, &res);
        if !with_gr {
            let rest: Vec<(BeamId, f64)> = full_grd_candidates(&m.codebook, 5)
                .into_iter()
                .filter(|b| *b != 17 && *b != 29)
                .map(|b| (b, -80.0))
                .collect();
            m.on_probes(ProbePurpose::GrdFull, &rest);
        }
        assert_eq!(m.state(), ProtocolState::LosOperation);
        m
    }

    fn sample(m: &mut Terra, rss: f64) -> Vec<Action> {
        let beam = match m.listening() {
            Listen::Serving { beam, .. } => beam,
            other => panic!("not listening to serving: {other:?}"),
        };
        m.on_sample(Sample {
            station: 0,
            beam,
            rss,
        })
    }

    #[test]
    fn blockage_with_stored_reflection_switches() {
        let mut m = locked(true);
        let acts = sample(&mut m, -78.0);
        assert_eq!(m.state(), ProtocolState::NlosOperation);
        assert!(acts.contains(&Action::BeamSwitch {
            station: 0,
            from: Some(5),
            to: 17,
            reason: "blockage"
        }));
        assert!(!acts.contains(&Action::OutageStart));
    }

    #[test]
    fn blockage_without_reflection_searches() {
        let mut m = locked(false);
        assert_eq!(m.store().gr_beam, None);
        assert_eq!(m.grd_failures(), 1);
        let acts = sample(&mut m, -78.0);
        assert_eq!(m.state(), ProtocolState::ExhaustiveSearch);
        assert!(acts.contains(&Action::OutageStart));
        assert!(acts.contains(&Action::StartScan(ScanTarget::Serving)));
    }

    #[test]
    fn steady_samples_cause_nothing() {
        let mut m = locked(true);
        for _ in 0..50 {
            assert!(sample(&mut m, -60.0).is_empty());
        }
        assert_eq!(m.state(), ProtocolState::LosOperation);
    }

    #[test]
    fn small_drop_probes_neighbors_and_adapt_clears_reflection() {
        let mut m = locked(true);
        let acts = sample(&mut m, -65.0);
        let Some(Action::Probe { beams, purpose, .. }) = acts.last() else {
            panic!("{acts:?}")
        };
        assert_eq!(*purpose, ProbePurpose::Adapt);
        assert_eq!(beams, &codebook().angular_neighbors(5));
        let res: Vec<_> = beams
            .iter()
            .map(|&b| (b, if b == 6 { -59.0 } else { -70.0 }))
            .collect();
        let acts = m.on_probes(ProbePurpose::Adapt, &res);
        assert_eq!(m.store().los_beam, Some(6));
        assert_eq!(m.store().gr_beam, None);
        assert_eq!(m.state(), ProtocolState::GroundReflectedDiscovery);
        assert!(acts.iter().any(|a| matches!(a, Action::Probe { purpose: ProbePurpose::Grd, beams, .. } if beams == &vec![18, 30])));
    }

    #[test]
    fn adapt_keeps_incumbent_and_breaks_ties_low() {
        assert_eq!(los_adapt((5, -60.0), &[(4, -61.0), (6, -62.0)]), (5, -60.0));
        assert_eq!(los_adapt((5, -65.0), &[(6, -59.0), (4, -59.0)]), (4, -59.0));
        assert_eq!(los_adapt((5, -65.0), &[]), (5, -65.0));
    }

    #[test]
    fn revert_after_blockage() {
        let mut m = locked(true);
        sample(&mut m, -78.0);
        let acts = sample(&mut m, -66.0);
        assert!(acts.iter().any(|a| matches!(a, Action::Probe { purpose: ProbePurpose::Revert, beams, .. } if beams == &vec![5])));
        m.on_probes(ProbePurpose::Revert, &[(5, -78.0)]);
        assert_eq!(m.state(), ProtocolState::NlosOperation);
        sample(&mut m, -66.0);
        m.on_probes(ProbePurpose::Revert, &[(5, -60.5)]);
        assert_eq!(m.state(), ProtocolState::LosOperation);
        assert_eq!(m.store().gr_beam, Some(17));
    }

    #[test]
    fn reflection_loss_is_an_outage() {
        let mut m = locked(true);
        sample(&mut m, -78.0);
        let acts = sample(&mut m, -78.0);
        assert!(acts.contains(&Action::OutageStart));
        assert_eq!(m.state(), ProtocolState::ExhaustiveSearch);
    }

    #[test]
    fn scan_failure_moves_to_neighbors_then_tracks() {
        let mut m = locked(false);
        sample(&mut m, -78.0);
        let acts = m.on_scan(ScanOutcome {
            found: None,
            rss: -78.0,
            dwells: 36,
        });
        assert_eq!(m.state(), ProtocolState::NeighborAcquisition);
        assert!(acts.contains(&Action::StartScan(ScanTarget::Neighbors)));
        let link = NeighborLink {
            station: 1,
            tx_beam: 3,
            rx_beam: 8,
        };
        m.on_scan(ScanOutcome {
            found: Some(link),
            rss: -62.0,
            dwells: 4,
        });
        assert_eq!(m.state(), ProtocolState::NeighborTracking);
        assert_eq!(m.listening(), Listen::Neighbor(link));
    }

    #[test]
    fn scan_success_reconnects_after_timer() {
        let mut m = locked(false);
        sample(&mut m, -78.0);
        let link = NeighborLink {
            station: 0,
            tx_beam: 2,
            rx_beam: 7,
        };
        let acts = m.on_scan(ScanOutcome {
            found: Some(link),
            rss: -61.0,
            dwells: 3,
        });
        assert!(acts.contains(&Action::StartTimer {
            timer: Timer::Reconnect,
            delay: 1.0
        }));
        assert_eq!(m.listening(), Listen::Nothing);
        let acts = m.on_timer(Timer::Reconnect);
        assert!(acts.contains(&Action::OutageEnd));
        assert_eq!(m.state(), ProtocolState::LosOperation);
        assert!(!m.in_outage());
    }

    #[test]
    fn neighbor_adapt_probes_at_most_eight_and_reacquires() {
        let cb = make_codebook(
            ArrayGeometry::planar(32, 32, 28e9),
            (-45.0, 45.0),
            (-45.0, 45.0),
            32,
            32,
        )
        .unwrap();
        let mut m = Terra::new(ProtocolConfig::default(), cb, -68.0, None, vec![0]).unwrap();
        m.start(None);
        let link = NeighborLink {
            station: 0,
            tx_beam: 1,
            rx_beam: 500,
        };
        m.on_scan(ScanOutcome {
            found: Some(link),
            rss: -60.0,
            dwells: 1,
        });
        let acts = m.on_sample(Sample {
            station: 0,
            beam: 500,
            rss: -61.0,
        });
        assert!(acts.is_empty());
        let acts = m.on_sample(Sample {
            station: 0,
            beam: 500,
            rss: -64.0,
        });
        let Some(Action::Probe { beams, tx_beam, .. }) = acts.last() else {
            panic!()
        };
        assert_eq!(beams.len(), 8);
        assert_eq!(*tx_beam, Some(1));
        let res: Vec<_> = beams.iter().map(|&b| (b, -75.0)).collect();
        m.on_probes(ProbePurpose::NeighborAdapt, &res);
        // incumbent at -64 is still decodable
        assert_eq!(m.state(), ProtocolState::NeighborTracking);
        let acts = m.on_sample(Sample {
            station: 0,
            beam: 500,
            rss: -70.0,
        });
        let Some(Action::Probe { beams, .. }) = acts.last() else {
            panic!()
        };
        let res: Vec<_> = beams.iter().map(|&b| (b, -75.0)).collect();
        let acts = m.on_probes(ProbePurpose::NeighborAdapt, &res);
        assert_eq!(m.state(), ProtocolState::NeighborAcquisition);
        assert!(acts.contains(&Action::StartScan(ScanTarget::Neighbors)));
    }

    #[test]
    fn neighbor_probes_follow_the_heard_tx_beam() {
        let mut m =
            Terra::new(ProtocolConfig::default(), codebook(), -68.0, None, vec![0]).unwrap();
        m.start(None);
        m.on_scan(ScanOutcome {
            found: Some(NeighborLink {
                station: 0,
                tx_beam: 4,
                rx_beam: 6,
            }),
            rss: -60.0,
            dwells: 2,
        });
        m.neighbor_tx_heard(5);
        assert_eq!(m.store().neighbor.map(|n| n.tx_beam), Some(5));
        let acts = m.on_sample(Sample {
            station: 0,
            beam: 6,
            rss: -64.0,
        });
        let Some(Action::Probe { tx_beam, .. }) = acts.last() else {
            panic!()
        };
        assert_eq!(*tx_beam, Some(5));
    }

    #[test]
    fn stale_samples_are_ignored() {
        let mut m = locked(true);
        let acts = m.on_sample(Sample {
            station: 0,
            beam: 11,
            rss: -90.0,
        });
        assert!(matches!(acts.as_slice(), [Action::Diagnostic(_)]));
        assert_eq!(m.state(), ProtocolState::LosOperation);
    }

    #[test]
    fn dot_export_lists_every_state() {
        let dot = transition_graph_dot();
        for s in ProtocolState::ALL {
            assert!(dot.contains(s.as_str()));
        }
        assert!(dot.contains("style=dashed"));
    }
}
