use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::trace::{EventKind, LinkKind, Trace};
use super::Scenario;
use crate::channel::{blocker_occludes, Blocker, Link, Pose};
use crate::error::{config_err, Result};
use crate::math;
use crate::mobility::{BlockerEvent, Trajectory, TRAJECTORY_STEP};
use crate::rng::{self, Stream};
use crate::terra::{
    Action, Listen, NeighborLink, ProbePurpose, Sample, ScanOutcome, ScanTarget, Terra, Timer,
};
use crate::{BeamId, StationId};

/// Everything a run produces besides the trace itself.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub trace: Trace,
    /// Size of every probe round, by purpose, in issue order.
    pub probe_rounds: Vec<(ProbePurpose, usize)>,
    pub scans: Vec<ScanOutcome>,
    /// Inputs the protocol ignored as stale.
    pub diagnostics: usize,
    /// Sweep phase of each station in slots.
    pub phases: Vec<u64>,
}

impl RunSummary {
    pub fn max_probes(&self, purpose: ProbePurpose) -> usize {
        self.probe_rounds
            .iter()
            .filter(|(p, _)| *p == purpose)
            .map(|&(_, n)| n)
            .max()
            .unwrap_or(0)
    }
}

struct StationLink {
    link: Link,
    occluded: [bool; 2],
    occlusion_fresh: bool,
    // per path: best transmit gain and its beam
    best_tx: [(f64, BeamId); 2],
}

struct ProbeJob {
    station: StationId,
    tx: Option<BeamId>,
    beams: Vec<BeamId>,
    results: Vec<(BeamId, f64)>,
    purpose: ProbePurpose,
}

struct ScanJob {
    stations: Vec<StationId>,
    start: usize,
    dwell: usize,
    slot_in_dwell: u64,
    hit: Option<(StationId, BeamId, f64)>,
    // station, tx, rx, rss awaiting a confirming dwell
    confirming: Option<(StationId, BeamId, BeamId, f64)>,
}

enum Activity {
    Idle,
    Probe(ProbeJob),
    Scan(ScanJob),
}

struct Engine<'a> {
    sc: &'a Scenario,
    traj: Trajectory,
    slot: f64,
    period_slots: Vec<u64>,
    dwell_slots: Vec<u64>,
    phase_slots: Vec<u64>,
    mobile_dwell: u64,
    pose_index: i64,
    pose: Pose,
    links: Vec<Option<StationLink>>,
    events: Vec<BlockerEvent>,
    next_event: usize,
    alive: Vec<usize>,
    blockers: Vec<Blocker>,
    watched: StationId,
    blocked: bool,
    scan_rng: ChaCha8Rng,
    trace: Trace,
    summary: RunSummary,
    threshold: f64,
    n: u64,
}

fn slots(x: f64, slot: f64) -> u64 {
    math::round(x / slot) as u64
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Result<Self> {
        sc.validate()?;
        let slot = sc.slot;
        let mut mobility = sc.mobility.clone();
        mobility.seed = mix(sc.seed, mobility.seed);
        let traj = Trajectory::new(&mobility, sc.horizon, TRAJECTORY_STEP)?;
        let mut blockers = sc.blockers.clone();
        blockers.seed = mix(sc.seed, blockers.seed);
        let events = blockers.events(sc.horizon);
        let mut phase_rng = rng::stream(sc.seed, 0, Stream::SweepPhase);
        let mut period_slots = Vec::new();
        let mut dwell_slots = Vec::new();
        let mut phase_slots = Vec::new();
        for st in &sc.stations {
            let p = slots(st.schedule.period(), slot);
            period_slots.push(p);
            dwell_slots.push(slots(st.schedule.beam_dwell, slot));
            let drawn = phase_rng.gen_range(0..p);
            phase_slots.push(match st.schedule.phase {
                Some(ph) => slots(ph, slot) % p,
                None => drawn,
            });
        }
        let watched = sc.serving.unwrap_or(0);
        let mobile_dwell = period_slots[watched];
        if mobile_dwell == 0 {
            return Err(config_err!("sweep period shorter than one slot"));
        }
        let pose = traj.pose_at(0.0);
        Ok(Self {
            sc,
            traj,
            slot,
            period_slots,
            dwell_slots,
            phase_slots: phase_slots.clone(),
            mobile_dwell,
            pose_index: 0,
            pose,
            links: (0..sc.stations.len()).map(|_| None).collect(),
            events,
            next_event: 0,
            alive: Vec::new(),
            blockers: Vec::new(),
            watched,
            blocked: false,
            scan_rng: rng::stream(sc.seed, 0, Stream::ScanStart),
            trace: Trace {
                events: Vec::new(),
                horizon: sc.horizon,
            },
            summary: RunSummary {
                phases: phase_slots,
                ..RunSummary::default()
            },
            threshold: sc.channel.decode_threshold(),
            n: 0,
        })
    }

    fn t(&self) -> f64 {
        self.n as f64 * self.slot
    }

    /// Advance mobile pose and blockers to the current slot.
    fn update_world(&mut self) {
        let t = self.t();
        let idx = math::floor(t / TRAJECTORY_STEP + 1e-9) as i64;
        if idx != self.pose_index {
            self.pose_index = idx;
            let pose = self.traj.pose_at(idx as f64 * TRAJECTORY_STEP);
            if pose != self.pose {
                self.pose = pose;
                self.links.iter_mut().for_each(|l| *l = None);
            }
        }
        let before = self.alive.len();
        self.alive.retain(|&i| self.events[i].end > t);
        let mut changed = before != self.alive.len();
        while self.next_event < self.events.len() && self.events[self.next_event].start <= t {
            if self.events[self.next_event].end > t {
                self.alive.push(self.next_event);
            }
            self.next_event += 1;
            changed = true;
        }
        if changed || !self.alive.is_empty() {
            let process = &self.sc.blockers;
            self.blockers = self
                .alive
                .iter()
                .filter_map(|&i| process.blocker_for(&self.events[i], t))
                .collect();
            for l in self.links.iter_mut().flatten() {
                l.occlusion_fresh = false;
            }
        }
        let st = &self.sc.stations[self.watched];
        let blocked = self
            .blockers
            .iter()
            .any(|b| blocker_occludes(&st.pose, &self.pose, b));
        if blocked != self.blocked {
            self.blocked = blocked;
            let station = self.watched;
            let kind = if blocked {
                EventKind::BlockageStart { station }
            } else {
                EventKind::BlockageEnd { station }
            };
            self.trace.push(t, kind);
        }
    }

    fn link(&mut self, s: StationId) -> &StationLink {
        if self.links[s].is_none() {
            let st = &self.sc.stations[s];
            let link = Link::new(&self.sc.channel, &st.pose, &self.pose);
            let mut best_tx = [(f64::NEG_INFINITY, 0); 2];
            for (p, best) in best_tx.iter_mut().enumerate().take(link.path_count()) {
                for b in 0..st.codebook.len() {
                    let g = link.tx_gain(p, &st.codebook, b);
                    if g > best.0 {
                        *best = (g, b);
                    }
                }
            }
            self.links[s] = Some(StationLink {
                link,
                occluded: [false; 2],
                occlusion_fresh: false,
                best_tx,
            });
        }
        let l = self.links[s].as_mut().expect("just filled");
        if !l.occlusion_fresh {
            l.occluded = l.link.occlusion(&self.blockers);
            l.occlusion_fresh = true;
        }
        self.links[s].as_ref().expect("just filled")
    }

    /// RSS on receive beam `rx`; `tx = None` lets the station pick its best
    /// beam for that receive beam.
    fn measure(&mut self, s: StationId, tx: Option<BeamId>, rx: BeamId) -> (BeamId, f64) {
        let sc = self.sc;
        let (cfg, mobile) = (&sc.channel, &sc.mobile_codebook);
        let l = self.link(s);
        let mut best = (0, cfg.noise_floor);
        for p in 0..l.link.path_count() {
            let (g_tx, b) = match tx {
                Some(b) => (l.link.tx_gain(p, &sc.stations[s].codebook, b), b),
                None => l.best_tx[p],
            };
            let v = l.link.budget(cfg, p, l.occluded[p]) + g_tx + l.link.rx_gain(p, mobile, rx);
            if v > best.1 {
                best = (b, v);
            }
        }
        if best.1 <= cfg.noise_floor {
            best.0 = tx.unwrap_or(l.best_tx[0].1);
        }
        best
    }

    /// Best `(tx, rx, rss)` over both codebooks.
    fn oracle(&mut self, s: StationId) -> (BeamId, BeamId, f64) {
        let sc = self.sc;
        let (cfg, mobile) = (&sc.channel, &sc.mobile_codebook);
        let l = self.link(s);
        let mut best = (l.best_tx[0].1, 0, cfg.noise_floor);
        for p in 0..l.link.path_count() {
            let base = l.link.budget(cfg, p, l.occluded[p]) + l.best_tx[p].0;
            for rx in 0..mobile.len() {
                let v = base + l.link.rx_gain(p, mobile, rx);
                if v > best.2 {
                    best = (l.best_tx[p].1, rx, v);
                }
            }
        }
        best
    }

    fn on_air(&self, s: StationId) -> (BeamId, u64) {
        let p = self.period_slots[s];
        let within = (self.n + p - self.phase_slots[s]) % p;
        let d = self.dwell_slots[s];
        let order = &self.sc.stations[s].schedule.beam_order;
        (order[(within / d) as usize], within % d)
    }

    fn log_measurement(
        &mut self,
        link: LinkKind,
        station: StationId,
        tx: Option<BeamId>,
        rx: Option<BeamId>,
        rss: f64,
        purpose: Option<ProbePurpose>,
    ) {
        if self.sc.log.measurements {
            self.trace.push(
                self.t(),
                EventKind::Measurement {
                    link,
                    station,
                    tx,
                    rx,
                    rss,
                    dwells: None,
                    purpose,
                },
            );
        }
    }

    fn scan_stations(&self, m: &Terra, target: ScanTarget) -> Vec<StationId> {
        match target {
            ScanTarget::Serving => m.serving().into_iter().collect(),
            ScanTarget::Neighbors => (0..self.sc.stations.len())
                .filter(|&s| Some(s) != m.serving())
                .collect(),
        }
    }

    fn apply(
        &mut self,
        m: &Terra,
        actions: Vec<Action>,
        activity: &mut Activity,
        timers: &mut Vec<(u64, Timer)>,
    ) {
        let t = self.t();
        for a in actions {
            match a {
                Action::Transition { from, to, reason } => self.trace.push(
                    t,
                    EventKind::StateTransition {
                        from,
                        to,
                        reason: reason.into(),
                    },
                ),
                Action::BeamSwitch {
                    station,
                    from,
                    to,
                    reason,
                } => self.trace.push(
                    t,
                    EventKind::BeamSwitch {
                        station,
                        from,
                        to,
                        reason: reason.into(),
                    },
                ),
                Action::Probe {
                    station,
                    tx_beam,
                    beams,
                    purpose,
                } => {
                    self.summary.probe_rounds.push((purpose, beams.len()));
                    *activity = Activity::Probe(ProbeJob {
                        station,
                        tx: tx_beam,
                        results: Vec::with_capacity(beams.len()),
                        beams,
                        purpose,
                    });
                }
                Action::StartScan(target) => {
                    let stations = self.scan_stations(m, target);
                    let start = self.scan_rng.gen_range(0..self.sc.mobile_codebook.len());
                    *activity = Activity::Scan(ScanJob {
                        stations,
                        start,
                        dwell: 0,
                        slot_in_dwell: 0,
                        hit: None,
                        confirming: None,
                    });
                }
                Action::OutageStart => self.trace.push(t, EventKind::OutageStart),
                Action::OutageEnd => self.trace.push(t, EventKind::OutageEnd),
                Action::Reconnect => self.trace.push(t, EventKind::Reconnect),
                Action::StartTimer { timer, delay } => {
                    timers.push((self.n + slots(delay, self.slot).max(1), timer));
                }
                Action::Diagnostic(_) => self.summary.diagnostics += 1,
            }
        }
    }

    /// One slot of an exhaustive scan. Returns the outcome when the scan
    /// ends in this slot.
    fn scan_step(&mut self, job: &mut ScanJob) -> Option<ScanOutcome> {
        let n_rx = self.sc.mobile_codebook.len();
        let rx = (job.start + job.dwell) % n_rx;
        match job.confirming {
            Some((s, tx, crx, _)) => {
                let (on_air, _) = self.on_air(s);
                if on_air == tx && job.hit.is_none() {
                    let (_, rss) = self.measure(s, Some(tx), crx);
                    if rss >= self.threshold {
                        job.hit = Some((s, tx, rss));
                    }
                }
            }
            None if job.hit.is_none() => {
                for i in 0..job.stations.len() {
                    let s = job.stations[i];
                    let (tx, _) = self.on_air(s);
                    let (_, rss) = self.measure(s, Some(tx), rx);
                    if rss >= self.threshold {
                        job.hit = Some((s, tx, rss));
                        break;
                    }
                }
            }
            None => {}
        }
        job.slot_in_dwell += 1;
        if job.slot_in_dwell < self.mobile_dwell {
            return None;
        }
        job.slot_in_dwell = 0;
        let dwells = job.dwell + 1;
        let hit = job.hit.take();
        if let Some((s, tx, crx, first_rss)) = job.confirming.take() {
            if hit.is_some() {
                return Some(ScanOutcome {
                    found: Some(NeighborLink {
                        station: s,
                        tx_beam: tx,
                        rx_beam: crx,
                    }),
                    rss: first_rss,
                    dwells: dwells - 1,
                });
            }
            // confirmation failed: resume with the next beam
            job.dwell += 1;
        } else if let Some((s, tx, rss)) = hit {
            if self.sc.scan.confirm {
                job.confirming = Some((s, tx, rx, rss));
                return None;
            }
            return Some(ScanOutcome {
                found: Some(NeighborLink {
                    station: s,
                    tx_beam: tx,
                    rx_beam: rx,
                }),
                rss,
                dwells,
            });
        } else {
            job.dwell += 1;
        }
        if job.dwell >= n_rx {
            return Some(ScanOutcome {
                found: None,
                rss: self.sc.channel.noise_floor,
                dwells: n_rx,
            });
        }
        None
    }

    fn log_scan(&mut self, o: &ScanOutcome) {
        let (station, tx, rx) = match o.found {
            Some(l) => (l.station, Some(l.tx_beam), Some(l.rx_beam)),
            None => (self.watched, None, None),
        };
        self.trace.push(
            self.t(),
            EventKind::Measurement {
                link: LinkKind::Scan,
                station,
                tx,
                rx,
                rss: o.rss,
                dwells: Some(o.dwells),
                purpose: None,
            },
        );
        self.summary.scans.push(*o);
    }

    fn log_oracle(&mut self, m: &Terra) {
        let listen = m.listening();
        let station = match listen {
            Listen::Serving { station, .. } => station,
            Listen::Neighbor(l) => l.station,
            Listen::Nothing => m.serving().unwrap_or(self.watched),
        };
        let (tx, rx, rss) = self.oracle(station);
        let t = self.t();
        self.trace.push(
            t,
            EventKind::Measurement {
                link: LinkKind::Oracle,
                station,
                tx: Some(tx),
                rx: Some(rx),
                rss,
                dwells: None,
                purpose: None,
            },
        );
        let (tx, rx, rss) = match listen {
            Listen::Serving { station, beam } => {
                let (tx, rss) = self.measure(station, None, beam);
                (Some(tx), Some(beam), rss)
            }
            Listen::Neighbor(l) => {
                let (_, rss) = self.measure(l.station, Some(l.tx_beam), l.rx_beam);
                (Some(l.tx_beam), Some(l.rx_beam), rss)
            }
            Listen::Nothing => (None, None, self.sc.channel.noise_floor),
        };
        self.trace.push(
            t,
            EventKind::Measurement {
                link: LinkKind::Operating,
                station,
                tx,
                rx,
                rss,
                dwells: None,
                purpose: None,
            },
        );
    }

    fn run(mut self) -> Result<RunSummary> {
        let sc = self.sc;
        let neighbors: Vec<StationId> = (0..sc.stations.len())
            .filter(|&s| Some(s) != sc.serving)
            .collect();
        let mut m = Terra::new(
            sc.protocol.clone(),
            sc.mobile_codebook.clone(),
            self.threshold,
            sc.serving,
            neighbors,
        )?;
        let total = slots(sc.horizon, self.slot);
        let stride = match (sc.log.oracle, sc.log.oracle_stride) {
            (false, _) => None,
            (true, Some(s)) => Some(slots(s, self.slot).max(1)),
            (true, None) => Some(self.mobile_dwell),
        };
        let mut activity = Activity::Idle;
        let mut timers: Vec<(u64, Timer)> = Vec::new();

        self.update_world();
        let initial = sc.serving.map(|s| {
            let (_, rx, rss) = self.oracle(s);
            (rx, rss)
        });
        let acts = m.start(initial);
        // the first probe or scan starts in the next slot
        let mut pending = Some(acts);

        while self.n < total {
            if self.n > 0 {
                self.update_world();
            }
            if let Some(acts) = pending.take() {
                self.apply(&m, acts, &mut activity, &mut timers);
                if self.n == 0 {
                    if let Some(st) = stride {
                        if self.n.is_multiple_of(st) {
                            self.log_oracle(&m);
                        }
                    }
                    self.n += 1;
                    continue;
                }
            }
            let due: Vec<Timer> = {
                let n = self.n;
                let mut d = Vec::new();
                timers.retain(|&(at, tm)| {
                    if at <= n {
                        d.push(tm);
                        false
                    } else {
                        true
                    }
                });
                d
            };
            for tm in due {
                let acts = m.on_timer(tm);
                self.apply(&m, acts, &mut activity, &mut timers);
            }

            match core::mem::replace(&mut activity, Activity::Idle) {
                Activity::Idle => {
                    let sample = match m.listening() {
                        Listen::Serving { station, beam } => {
                            let p = self.period_slots[station];
                            if (self.n + p - self.phase_slots[station]).is_multiple_of(p) {
                                let (tx, rss) = self.measure(station, None, beam);
                                self.log_measurement(
                                    LinkKind::Serving,
                                    station,
                                    Some(tx),
                                    Some(beam),
                                    rss,
                                    None,
                                );
                                Some(Sample { station, beam, rss })
                            } else {
                                // data reception between sweep occasions still reveals a sudden loss
                                let (tx, rss) = self.measure(station, None, beam);
                                if m.blockage_alarm(rss) {
                                    self.log_measurement(
                                        LinkKind::Serving,
                                        station,
                                        Some(tx),
                                        Some(beam),
                                        rss,
                                        None,
                                    );
                                    Some(Sample { station, beam, rss })
                                } else {
                                    None
                                }
                            }
                        }
                        Listen::Neighbor(l) => {
                            let (on_air, offset) = self.on_air(l.station);
                            if on_air == l.tx_beam && offset == 0 {
                                // the adjacent beams of the same burst are overheard too
                                let last = self.sc.stations[l.station].codebook.len() - 1;
                                let (mut tx, mut rss) = (l.tx_beam, f64::NEG_INFINITY);
                                for b in l.tx_beam.saturating_sub(1)..=(l.tx_beam + 1).min(last) {
                                    let (_, v) = self.measure(l.station, Some(b), l.rx_beam);
                                    if v > rss {
                                        (tx, rss) = (b, v);
                                    }
                                }
                                if tx != l.tx_beam {
                                    m.neighbor_tx_heard(tx);
                                }
                                self.log_measurement(
                                    LinkKind::Neighbor,
                                    l.station,
                                    Some(tx),
                                    Some(l.rx_beam),
                                    rss,
                                    None,
                                );
                                Some(Sample {
                                    station: l.station,
                                    beam: l.rx_beam,
                                    rss,
                                })
                            } else {
                                None
                            }
                        }
                        Listen::Nothing => None,
                    };
                    if let Some(s) = sample {
                        let acts = m.on_sample(s);
                        self.apply(&m, acts, &mut activity, &mut timers);
                    }
                }
                Activity::Probe(mut job) => {
                    let allowed = match job.tx {
                        None => true,
                        Some(tx) => self.on_air(job.station).0 == tx,
                    };
                    if allowed {
                        let rx = job.beams[job.results.len()];
                        let (tx, rss) = self.measure(job.station, job.tx, rx);
                        self.log_measurement(
                            LinkKind::Probe,
                            job.station,
                            Some(tx),
                            Some(rx),
                            rss,
                            Some(job.purpose),
                        );
                        job.results.push((rx, rss));
                    }
                    if job.results.len() == job.beams.len() {
                        let acts = m.on_probes(job.purpose, &job.results);
                        self.apply(&m, acts, &mut activity, &mut timers);
                    } else {
                        activity = Activity::Probe(job);
                    }
                }
                Activity::Scan(mut job) => match self.scan_step(&mut job) {
                    Some(outcome) => {
                        self.log_scan(&outcome);
                        let acts = m.on_scan(outcome);
                        self.apply(&m, acts, &mut activity, &mut timers);
                    }
                    None => activity = Activity::Scan(job),
                },
            }

            if let Some(st) = stride {
                if self.n.is_multiple_of(st) {
                    self.log_oracle(&m);
                }
            }
            self.n += 1;
        }

        let end = sc.horizon;
        if m.in_outage() {
            self.trace.push(end, EventKind::OutageEnd);
        }
        if self.blocked {
            self.trace.push(
                end,
                EventKind::BlockageEnd {
                    station: self.watched,
                },
            );
        }
        self.summary.trace = self.trace;
        Ok(self.summary)
    }
}

fn mix(seed: u64, component: u64) -> u64 {
    let mut z = seed ^ component.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the scenario to its horizon.
pub fn run(scenario: &Scenario) -> Result<RunSummary> {
    Engine::new(scenario)?.run()
}

/// Scans the given stations from `start` seconds on, without the protocol,
/// using the scenario's sweep phases and scan start offset.
pub fn exhaustive_scan(
    scenario: &Scenario,
    stations: &[StationId],
    start: f64,
) -> Result<ScanOutcome> {
    let mut e = Engine::new(scenario)?;
    if stations.iter().any(|&s| s >= scenario.stations.len()) || stations.is_empty() {
        return Err(config_err!("scan needs existing stations"));
    }
    e.n = slots(start, e.slot);
    e.pose_index = -1;
    e.update_world();
    let mut job = ScanJob {
        stations: stations.to_vec(),
        start: e.scan_rng.gen_range(0..scenario.mobile_codebook.len()),
        dwell: 0,
        slot_in_dwell: 0,
        hit: None,
        confirming: None,
    };
    loop {
        if let Some(o) = e.scan_step(&mut job) {
            return Ok(o);
        }
        e.n += 1;
        e.update_world();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{make_codebook, ArrayGeometry, Codebook};
    use crate::channel::ChannelConfig;
    use crate::mobility::{BlockerProcess, MobilityModel};
    use crate::sweep::{LogConfig, ScanConfig, Station, SweepSchedule, DEFAULT_SLOT};
    use crate::terra::{ProtocolConfig, ProtocolState};
    use alloc::vec;

    fn bs_codebook() -> Codebook {
        make_codebook(
            ArrayGeometry::linear(16, 60e9),
            (-60.0, 60.0),
            (0.0, 0.0),
            25,
            1,
        )
        .unwrap()
    }

    fn scenario(distance: f64, rx_beams: usize) -> Scenario {
        let station = Station {
            pose: Pose::new(0.0, 0.0, 2.5, 0.0, 0.0),
            codebook: bs_codebook(),
            schedule: SweepSchedule::sequential(25),
            carrier_id: 0,
        };
        let mobile = make_codebook(
            ArrayGeometry::linear(12, 60e9),
            (-60.0, 60.0),
            (0.0, 0.0),
            rx_beams,
            1,
        )
        .unwrap();
        Scenario {
            stations: vec![station],
            serving: Some(0),
            mobility: MobilityModel::stationary(Pose::new(distance, 0.0, 1.0, 180.0, 0.0)),
            mobile_codebook: mobile,
            channel: ChannelConfig {
                system_loss: 30.0,
                ..ChannelConfig::default()
            },
            blockers: BlockerProcess::none(),
            protocol: ProtocolConfig::default(),
            horizon: 1.0,
            slot: DEFAULT_SLOT,
            seed: 7,
            log: LogConfig::default(),
            scan: ScanConfig::default(),
        }
    }

    #[test]
    fn static_run_settles_after_initial_lock() {
        let sc = scenario(6.0, 25);
        let s = run(&sc).unwrap();
        let late: Vec<_> = s.trace.transitions().filter(|&(t, ..)| t > 0.01).collect();
        assert!(late.is_empty(), "{late:?}");
        assert!(s.trace.outage_intervals().is_empty());
        let serving: Vec<_> = s.trace.measurements(LinkKind::Serving).collect();
        assert!(serving.len() >= 45);
        for w in s.trace.events.windows(2) {
            assert!(w[0].t <= w[1].t);
        }
    }

    #[test]
    fn timestamps_are_slot_multiples() {
        let s = run(&scenario(6.0, 25)).unwrap();
        for e in &s.trace.events {
            let k = e.t / DEFAULT_SLOT;
            assert!((k - k.round()).abs() < 1e-6, "{}", e.t);
        }
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let sc = scenario(6.0, 25);
        assert_eq!(run(&sc).unwrap().trace, run(&sc).unwrap().trace);
    }

    #[test]
    fn single_beam_scan_takes_one_dwell() {
        let sc = scenario(6.0, 1);
        let o = exhaustive_scan(&sc, &[0], 0.0).unwrap();
        assert_eq!(o.dwells, 1);
        assert!(o.found.is_some());
    }

    #[test]
    fn out_of_range_scan_fails_after_full_cycle() {
        let mut sc = scenario(6.0, 25);
        sc.channel.system_loss = 80.0;
        let o = exhaustive_scan(&sc, &[0], 0.0).unwrap();
        assert_eq!(o.found, None);
        assert_eq!(o.dwells, 25);
    }

    #[test]
    fn unreachable_serving_station_keeps_searching() {
        let mut sc = scenario(6.0, 25);
        sc.channel.system_loss = 80.0;
        let s = run(&sc).unwrap();
        assert_eq!(s.scans.len(), 1);
        assert_eq!(s.scans[0].dwells, 25);
        let outages = s.trace.outage_intervals();
        assert_eq!(outages, vec![(0.0, 1.0)]);
        assert!(s
            .trace
            .transitions()
            .all(|(_, _, to, _)| to == ProtocolState::ExhaustiveSearch));
    }
}
