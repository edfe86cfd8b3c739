//! Slot-level simulation: base-station sweep schedules, the scenario
//! description and the engine that runs the protocol against the channel.

mod engine;
mod trace;

pub use engine::{exhaustive_scan, run, RunSummary};
pub use trace::{EventKind, LinkKind, Trace, TraceEvent, TRACE_VERSION};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::array::Codebook;
use crate::channel::{ChannelConfig, Pose};
use crate::error::{config_err, Result};
use crate::math;
use crate::mobility::{BlockerProcess, MobilityModel};
use crate::terra::ProtocolConfig;
use crate::{BeamId, StationId};

pub const DEFAULT_SLOT: f64 = 100e-6;
pub const DEFAULT_DWELL: f64 = 800e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSchedule {
    #[serde(default = "default_dwell")]
    pub beam_dwell: f64,
    /// Transmission order of the base-station beams.
    pub beam_order: Vec<BeamId>,
    /// Offset of the sweep in seconds; drawn per run when absent.
    #[serde(default)]
    pub phase: Option<f64>,
}

fn default_dwell() -> f64 {
    DEFAULT_DWELL
}

impl SweepSchedule {
    /// Sweeps `n` beams in index order.
    pub fn sequential(n: usize) -> Self {
        Self {
            beam_dwell: DEFAULT_DWELL,
            beam_order: (0..n).collect(),
            phase: None,
        }
    }

    pub fn period(&self) -> f64 {
        self.beam_dwell * self.beam_order.len() as f64
    }

    pub fn validate(&self, codebook_len: usize) -> Result<()> {
        if !(self.beam_dwell > 0.0) {
            return Err(config_err!("beam_dwell must be positive"));
        }
        let mut seen = alloc::vec![false; codebook_len];
        for &b in &self.beam_order {
            if b >= codebook_len || seen[b] {
                return Err(config_err!(
                    "beam_order must be a permutation of the station codebook"
                ));
            }
            seen[b] = true;
        }
        if self.beam_order.len() != codebook_len {
            return Err(config_err!("beam_order must cover every station beam"));
        }
        if let Some(p) = self.phase {
            if !(0.0..self.period()).contains(&p) {
                return Err(config_err!("phase must lie in [0, period)"));
            }
        }
        Ok(())
    }
}

/// Base-station beam on air at time `t`.
pub fn bs_beam_at(schedule: &SweepSchedule, t: f64) -> BeamId {
    let period = schedule.period();
    let within = math::rem_euclid(t - schedule.phase.unwrap_or(0.0), period);
    // guard against representation error at dwell boundaries
    let idx = math::floor(within / schedule.beam_dwell + 1e-9) as usize;
    schedule.beam_order[idx % schedule.beam_order.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub pose: Pose,
    pub codebook: Codebook,
    pub schedule: SweepSchedule,
    pub carrier_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogConfig {
    /// Interval between oracle/operating comparisons, seconds. Defaults to
    /// one sweep period.
    #[serde(default)]
    pub oracle_stride: Option<f64>,
    #[serde(default = "yes")]
    pub oracle: bool,
    /// Log every serving, neighbor and probe measurement.
    #[serde(default = "yes")]
    pub measurements: bool,
}

fn yes() -> bool {
    true
}

impl Default for LogConfig {
    fn default() -> Self {
        Self {
            oracle_stride: None,
            oracle: true,
            measurements: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Require a second dwell on the found beam to hear the same
    /// base-station beam before the scan succeeds.
    #[serde(default)]
    pub confirm: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub stations: Vec<Station>,
    /// Index of the serving station, if the mobile is connected.
    pub serving: Option<StationId>,
    pub mobility: MobilityModel,
    pub mobile_codebook: Codebook,
    pub channel: ChannelConfig,
    pub blockers: BlockerProcess,
    pub protocol: ProtocolConfig,
    pub horizon: f64,
    pub slot: f64,
    pub seed: u64,
    pub log: LogConfig,
    pub scan: ScanConfig,
}

fn is_multiple(x: f64, of: f64) -> bool {
    let r = x / of;
    (r - math::round(r)).abs() < 1e-6 && r >= 1.0 - 1e-6
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(config_err!("horizon must be positive"));
        }
        if !(self.slot > 0.0) {
            return Err(config_err!("slot must be positive"));
        }
        if self.stations.is_empty() {
            return Err(config_err!("scenario needs at least one station"));
        }
        if let Some(s) = self.serving {
            if s >= self.stations.len() {
                return Err(config_err!("serving station {s} does not exist"));
            }
        }
        for (i, st) in self.stations.iter().enumerate() {
            st.pose.validate()?;
            st.schedule
                .validate(st.codebook.len())
                .map_err(|e| config_err!("station {i}: {e}"))?;
            if !is_multiple(st.schedule.beam_dwell, self.slot) {
                return Err(config_err!("station {i}: slot must divide beam_dwell"));
            }
        }
        if self.mobile_codebook.is_empty() {
            return Err(config_err!("mobile codebook is empty"));
        }
        self.mobility.validate()?;
        self.channel.validate()?;
        self.blockers.validate()?;
        self.protocol.validate()?;
        if let Some(s) = self.log.oracle_stride {
            if !is_multiple(s, self.slot) {
                return Err(config_err!("oracle_stride must be a multiple of slot"));
            }
        }
        Ok(())
    }

    /// Sweep period of the serving (or first) station.
    pub fn period(&self) -> f64 {
        self.stations[self.serving.unwrap_or(0)].schedule.period()
    }
}
