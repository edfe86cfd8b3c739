//! JSON scenario files.
//!
//! Every section rejects unknown keys. Omitted fields take the defaults of
//! the corresponding `terra-core` type.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use terra_core::array::{Codebook, CodebookSpec};
use terra_core::channel::{calibrate_system_loss, ChannelConfig, Link, Pose};
use terra_core::mobility::{BlockerProcess, MobilityModel};
use terra_core::sweep::{
    LogConfig, ScanConfig, Scenario, Station, SweepSchedule, DEFAULT_DWELL, DEFAULT_SLOT,
};
use terra_core::terra::ProtocolConfig;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub array: ArraySection,
    pub channel: ChannelSection,
    pub mobility: MobilityModel,
    #[serde(default)]
    pub blockers: Option<BlockerProcess>,
    pub stations: Vec<StationSpec>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    pub sim: SimSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub mobile: CodebookSpec,
    /// Codebook of every station that does not bring its own.
    pub station: CodebookSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default)]
    pub model: ChannelConfig,
    /// Choose `system_loss` so that the best unobstructed LoS beam pair of
    /// the serving station at the mobile's start pose delivers this RSS.
    #[serde(default)]
    pub calibrate_los_rss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default = "default_dwell")]
    pub beam_dwell: f64,
    /// Defaults to index order.
    #[serde(default)]
    pub beam_order: Option<Vec<usize>>,
    #[serde(default)]
    pub phase: Option<f64>,
}

fn default_dwell() -> f64 {
    DEFAULT_DWELL
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub pose: Pose,
    #[serde(default)]
    pub codebook: Option<CodebookSpec>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub carrier_id: u32,
    #[serde(default)]
    pub serving: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    #[serde(default = "default_slot")]
    pub slot: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub scan: ScanConfig,
}

fn default_slot() -> f64 {
    DEFAULT_SLOT
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Outage floor in dBm; defaults to the decode threshold.
    #[serde(default)]
    pub floor: Option<f64>,
    /// Normal-operation RSS for the 6 dB criterion; defaults to the
    /// calibration target, else −60 dBm.
    #[serde(default)]
    pub reference_rss: Option<f64>,
    #[serde(default)]
    pub log: LogConfig,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).context("invalid scenario file")?;
        if file.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {:?}, expected {:?}",
                file.schema_version,
                SCHEMA_VERSION
            );
        }
        Ok(file)
    }

    pub fn floor(&self) -> f64 {
        self.analysis
            .floor
            .unwrap_or_else(|| self.channel.model.decode_threshold())
    }

    pub fn reference_rss(&self) -> f64 {
        self.analysis
            .reference_rss
            .or(self.channel.calibrate_los_rss)
            .unwrap_or(-60.0)
    }

    /// Builds the runnable scenario for one seed.
    pub fn build(&self, seed: u64) -> Result<Scenario> {
        let mobile = self.array.mobile.build().context("array.mobile")?;
        let mut stations = Vec::with_capacity(self.stations.len());
        let mut serving = None;
        for (i, spec) in self.stations.iter().enumerate() {
            let codebook = spec
                .codebook
                .as_ref()
                .unwrap_or(&self.array.station)
                .build()
                .with_context(|| format!("stations[{i}].codebook"))?;
            let schedule = match &spec.schedule {
                Some(s) => SweepSchedule {
                    beam_dwell: s.beam_dwell,
                    beam_order: s
                        .beam_order
                        .clone()
                        .unwrap_or_else(|| (0..codebook.len()).collect()),
                    phase: s.phase,
                },
                None => SweepSchedule::sequential(codebook.len()),
            };
            if spec.serving {
                if serving.is_some() {
                    bail!("stations: more than one serving station");
                }
                serving = Some(i);
            }
            stations.push(Station {
                pose: spec.pose,
                codebook,
                schedule,
                carrier_id: spec.carrier_id,
            });
        }
        if stations.is_empty() {
            bail!("stations: at least one station is required");
        }
        let mut channel = self.channel.model.clone();
        if let Some(target) = self.channel.calibrate_los_rss {
            let st = &stations[serving.unwrap_or(0)];
            channel.system_loss = calibrate(
                &channel,
                &st.pose,
                &self.mobility.start,
                &st.codebook,
                &mobile,
                target,
            );
        }
        let scenario = Scenario {
            stations,
            serving,
            mobility: self.mobility.clone(),
            mobile_codebook: mobile,
            channel,
            blockers: self.blockers.clone().unwrap_or_else(BlockerProcess::none),
            protocol: self.protocol.clone(),
            horizon: self.sim.horizon,
            slot: self.sim.slot,
            seed,
            log: self.analysis.log.clone(),
            scan: self.sim.scan.clone(),
        };
        scenario.validate().context("scenario")?;
        Ok(scenario)
    }
}

fn best_beam(n: usize, gain: impl Fn(usize) -> f64) -> usize {
    (0..n)
        .max_by(|&a, &b| gain(a).total_cmp(&gain(b)).then(b.cmp(&a)))
        .unwrap_or(0)
}

/// System loss making the best LoS beam pair deliver `target` dBm.
pub fn calibrate(
    cfg: &ChannelConfig,
    tx: &Pose,
    rx: &Pose,
    tx_cb: &Codebook,
    rx_cb: &Codebook,
    target: f64,
) -> f64 {
    let link = Link::new(cfg, tx, rx);
    let bt = best_beam(tx_cb.len(), |b| link.tx_gain(0, tx_cb, b));
    let br = best_beam(rx_cb.len(), |b| link.rx_gain(0, rx_cb, b));
    calibrate_system_loss(cfg, tx, rx, (tx_cb, bt), (rx_cb, br), target)
}
