use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::terra::{ProbePurpose, ProtocolState};
use crate::{BeamId, StationId};

pub const TRACE_VERSION: &str = "trace_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Serving,
    Neighbor,
    Probe,
    /// One line per completed scan.
    Scan,
    /// Best beam pair over both codebooks.
    Oracle,
    /// What the mobile receives on its current beam at an oracle instant.
    Operating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Measurement {
        link: LinkKind,
        station: StationId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tx: Option<BeamId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rx: Option<BeamId>,
        rss: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dwells: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        purpose: Option<ProbePurpose>,
    },
    StateTransition {
        from: ProtocolState,
        to: ProtocolState,
        reason: String,
    },
    BeamSwitch {
        station: StationId,
        from: Option<BeamId>,
        to: BeamId,
        reason: String,
    },
    BlockageStart {
        station: StationId,
    },
    BlockageEnd {
        station: StationId,
    },
    OutageStart,
    OutageEnd,
    Reconnect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub horizon: f64,
}

impl Trace {
    pub fn push(&mut self, t: f64, kind: EventKind) {
        self.events.push(TraceEvent { t, kind });
    }

    /// Closed intervals between matching start and end events. An interval
    /// still open at the end of the trace is closed at the horizon.
    fn intervals(
        &self,
        is_start: impl Fn(&EventKind) -> bool,
        is_end: impl Fn(&EventKind) -> bool,
    ) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut open: Option<f64> = None;
        for e in &self.events {
            if is_start(&e.kind) {
                open.get_or_insert(e.t);
            } else if is_end(&e.kind) {
                if let Some(s) = open.take() {
                    out.push((s, e.t));
                }
            }
        }
        if let Some(s) = open {
            out.push((s, self.horizon.max(s)));
        }
        out
    }

    pub fn outage_intervals(&self) -> Vec<(f64, f64)> {
        self.intervals(
            |k| matches!(k, EventKind::OutageStart),
            |k| matches!(k, EventKind::OutageEnd),
        )
    }

    /// Geometric LoS occlusion intervals of the logged station.
    pub fn blockage_intervals(&self) -> Vec<(f64, f64)> {
        self.intervals(
            |k| matches!(k, EventKind::BlockageStart { .. }),
            |k| matches!(k, EventKind::BlockageEnd { .. }),
        )
    }

    /// `(t, station, tx, rx, rss)` of every measurement on `link`.
    pub fn measurements(
        &self,
        link: LinkKind,
    ) -> impl Iterator<Item = (f64, StationId, Option<BeamId>, Option<BeamId>, f64)> + '_ {
        self.events.iter().filter_map(move |e| match e.kind {
            EventKind::Measurement {
                link: l,
                station,
                tx,
                rx,
                rss,
                ..
            } if l == link => Some((e.t, station, tx, rx, rss)),
            _ => None,
        })
    }

    /// Dwell counts of completed scans that found a station.
    pub fn scan_dwell_counts(&self) -> Vec<usize> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Measurement {
                    link: LinkKind::Scan,
                    rx: Some(_),
                    dwells: Some(d),
                    ..
                } => Some(d),
                _ => None,
            })
            .collect()
    }

    pub fn transitions(
        &self,
    ) -> impl Iterator<Item = (f64, ProtocolState, ProtocolState, &str)> + '_ {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::StateTransition { from, to, reason } => {
                Some((e.t, *from, *to, reason.as_str()))
            }
            _ => None,
        })
    }
}
