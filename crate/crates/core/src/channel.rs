//! Received signal strength over the line-of-sight and ground-bounce paths.
//!
//! World frame: `x`, `y` horizontal in metres, third coordinate is height
//! above ground. Azimuths are `atan2(dy, dx)` in degrees; zenith angles are
//! depression angles, positive toward the ground. Paths are combined by
//! max-power selection; narrow beams resolve the two paths spatially so no
//! coherent sum is formed.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::array::{direction_cosines, Codebook};
use crate::error::{config_err, Error, Result};
use crate::math::{self, PI, SPEED_OF_LIGHT};
use crate::BeamId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    /// (x, y, height) in metres.
    pub position: [f64; 3],
    #[serde(default)]
    pub boresight_az: f64,
    /// Tilt of the array normal, positive toward the ground.
    #[serde(default)]
    pub boresight_zen: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, height: f64, boresight_az: f64, boresight_zen: f64) -> Self {
        Self {
            position: [x, y, height],
            boresight_az,
            boresight_zen,
        }
    }

    pub fn height(&self) -> f64 {
        self.position[2]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height() >= 0.0) {
            return Err(config_err!("pose height must be non-negative"));
        }
        Ok(())
    }
}

/// A pedestrian modelled as a vertical cylinder of diameter `width` that
/// occludes rays passing between `base` and `height` above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blocker {
    pub position: [f64; 2],
    pub height: f64,
    pub width: f64,
    #[serde(default)]
    pub base: f64,
    /// While present, this blocker also removes the ground-bounce path.
    #[serde(default)]
    pub blocks_reflection: bool,
}

impl Blocker {
    pub fn new(x: f64, y: f64, height: f64, width: f64) -> Self {
        Self {
            position: [x, y],
            height,
            width,
            base: 0.0,
            blocks_reflection: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Los,
    GroundReflection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub kind: PathKind,
    pub length: f64,
    /// (azimuth, depression) leaving the transmitter, world frame.
    pub depart: (f64, f64),
    /// (azimuth, depression) looking from the receiver toward the arrival.
    pub arrive: (f64, f64),
    pub extra_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "defaults::carrier")]
    pub carrier: f64,
    #[serde(default = "defaults::tx_power")]
    pub tx_power: f64,
    #[serde(default)]
    pub system_loss: f64,
    /// Ground-bounce loss over line of sight, keyed by transmitter tilt in
    /// degrees. Linearly interpolated, clamped outside the table.
    #[serde(default = "defaults::gr_loss_table")]
    pub gr_loss_table: Vec<(f64, f64)>,
    #[serde(default = "defaults::blockage_attenuation")]
    pub blockage_attenuation: f64,
    #[serde(default = "defaults::noise_floor")]
    pub noise_floor: f64,
    /// Defaults to `noise_floor + 10`.
    #[serde(default)]
    pub decode_threshold: Option<f64>,
    /// Whether the ground-bounce path exists at all.
    #[serde(default = "defaults::yes")]
    pub ground_reflection: bool,
}

mod defaults {
    use alloc::vec;
    use alloc::vec::Vec;

    pub fn carrier() -> f64 {
        60e9
    }
    pub fn tx_power() -> f64 {
        20.0
    }
    pub fn gr_loss_table() -> Vec<(f64, f64)> {
        super::CONCRETE_GR_LOSS.to_vec()
    }
    pub fn blockage_attenuation() -> f64 {
        20.0
    }
    pub fn noise_floor() -> f64 {
        -78.0
    }
    pub fn yes() -> bool {
        true
    }
    #[allow(dead_code)]
    pub fn empty() -> Vec<(f64, f64)> {
        vec![]
    }
}

/// Concrete surface: measured ground-bounce RSS below the −60 dBm LoS level
/// at transmitter tilts 0°, 10° and 20°.
pub const CONCRETE_GR_LOSS: [(f64, f64); 3] = [(0.0, 6.0), (10.0, 4.6), (20.0, 4.05)];
/// Gravel surface, same layout.
pub const GRAVEL_GR_LOSS: [(f64, f64); 3] = [(0.0, 6.0), (10.0, 4.6), (20.0, 4.35)];
/// Indoor concrete tiles, same layout.
pub const INDOOR_TILE_GR_LOSS: [(f64, f64); 3] = [(0.0, 5.85), (10.0, 4.475), (20.0, 4.35)];

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier: defaults::carrier(),
            tx_power: defaults::tx_power(),
            system_loss: 0.0,
            gr_loss_table: defaults::gr_loss_table(),
            blockage_attenuation: defaults::blockage_attenuation(),
            noise_floor: defaults::noise_floor(),
            decode_threshold: None,
            ground_reflection: true,
        }
    }
}

impl ChannelConfig {
    pub fn decode_threshold(&self) -> f64 {
        self.decode_threshold.unwrap_or(self.noise_floor + 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blockage_attenuation > 0.0) {
            return Err(config_err!("blockage_attenuation must be positive"));
        }
        if !(self.decode_threshold() > self.noise_floor) {
            return Err(config_err!("decode_threshold must exceed noise_floor"));
        }
        if !(self.carrier > 0.0) {
            return Err(config_err!("carrier must be positive"));
        }
        if self.gr_loss_table.is_empty() {
            return Err(config_err!("gr_loss_table needs at least one entry"));
        }
        if self.gr_loss_table.iter().any(|&(_, loss)| loss < 0.0) {
            return Err(config_err!("gr_loss_table losses must be non-negative"));
        }
        if self.gr_loss_table.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(config_err!(
                "gr_loss_table tilts must be strictly increasing"
            ));
        }
        Ok(())
    }

    /// Ground-bounce loss over LoS at the given transmitter tilt.
    pub fn gr_loss_at(&self, tilt: f64) -> f64 {
        let t = &self.gr_loss_table;
        if tilt <= t[0].0 {
            return t[0].1;
        }
        for w in t.windows(2) {
            let ((t0, l0), (t1, l1)) = (w[0], w[1]);
            if tilt <= t1 {
                return l0 + (l1 - l0) * (tilt - t0) / (t1 - t0);
            }
        }
        t[t.len() - 1].1
    }
}

/// Free-space path loss in dB.
pub fn fspl(distance: f64, frequency: f64) -> Result<f64> {
    if !(distance > 0.0) || !(frequency > 0.0) {
        return Err(Error::Domain(alloc::format!(
            "free-space loss needs positive distance and frequency, got d={distance}, f={frequency}"
        )));
    }
    Ok(20.0 * math::log10(4.0 * PI * distance * frequency / SPEED_OF_LIGHT))
}

fn fspl_unchecked(distance: f64, frequency: f64) -> f64 {
    20.0 * math::log10(4.0 * PI * distance.max(1e-6) * frequency / SPEED_OF_LIGHT)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingRange {
    pub distance: f64,
    /// Set when the blocker height had to be clamped into [h_r, h_t].
    pub clamped: bool,
}

/// Largest blocker-to-receiver distance at which a blocker of height `h_b`
/// still cuts the line of sight between a transmitter at `h_t` and a
/// receiver at `h_r` that are `d_tr` apart.
pub fn d_br_max(d_tr: f64, h_t: f64, h_r: f64, h_b: f64) -> Result<BlockingRange> {
    if !(h_t > h_r) {
        return Err(Error::Domain(alloc::format!(
            "transmitter height {h_t} must exceed receiver height {h_r}"
        )));
    }
    let clamped = h_b < h_r || h_b > h_t;
    let h_b = h_b.clamp(h_r, h_t);
    Ok(BlockingRange {
        distance: d_tr * (h_b - h_r) / (h_t - h_r),
        clamped,
    })
}

fn az_between(from: &[f64; 3], to: &[f64; 3]) -> f64 {
    let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        math::to_deg(math::atan2(dy, dx))
    }
}

fn horizontal_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    math::hypot(b[0] - a[0], b[1] - a[1])
}

/// Direct path from `tx` to `rx`.
pub fn los_path(tx: &Pose, rx: &Pose) -> PathComponent {
    let (a, b) = (&tx.position, &rx.position);
    let dh = horizontal_distance(a, b);
    let dz = a[2] - b[2];
    PathComponent {
        kind: PathKind::Los,
        length: math::hypot(dh, dz),
        depart: (az_between(a, b), math::to_deg(math::atan2(dz, dh))),
        arrive: (az_between(b, a), math::to_deg(math::atan2(-dz, dh))),
        extra_loss: 0.0,
    }
}

/// Single ground bounce by the image method. The extra loss is the
/// configured loss over LoS minus the part already explained by the longer
/// path, never negative.
pub fn ground_reflection_path(cfg: &ChannelConfig, tx: &Pose, rx: &Pose) -> PathComponent {
    let (a, b) = (&tx.position, &rx.position);
    let dh = horizontal_distance(a, b);
    let hsum = a[2] + b[2];
    let length = math::hypot(dh, hsum);
    let los = los_path(tx, rx);
    let spreading = fspl_unchecked(length, cfg.carrier) - fspl_unchecked(los.length, cfg.carrier);
    let depression = math::to_deg(math::atan2(hsum, dh));
    PathComponent {
        kind: PathKind::GroundReflection,
        length,
        depart: (los.depart.0, depression),
        arrive: (los.arrive.0, depression),
        extra_loss: (cfg.gr_loss_at(tx.boresight_zen) - spreading).max(0.0),
    }
}

/// Whether the segment `p → q` passes through the blocker cylinder within
/// its occluding height band.
fn segment_occluded(p: &[f64; 3], q: &[f64; 3], blocker: &Blocker) -> bool {
    let r = 0.5 * blocker.width;
    let (cx, cy) = (blocker.position[0], blocker.position[1]);
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let (fx, fy) = (p[0] - cx, p[1] - cy);
    let a = dx * dx + dy * dy;
    let (s0, s1) = if a < 1e-18 {
        // vertical segment
        if fx * fx + fy * fy <= r * r {
            (0.0, 1.0)
        } else {
            return false;
        }
    } else {
        let b = 2.0 * (fx * dx + fy * dy);
        let c = fx * fx + fy * fy - r * r;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return false;
        }
        let sq = math::sqrt(disc);
        let lo = ((-b - sq) / (2.0 * a)).max(0.0);
        let hi = ((-b + sq) / (2.0 * a)).min(1.0);
        if lo > hi {
            return false;
        }
        (lo, hi)
    };
    let h0 = p[2] + (q[2] - p[2]) * s0;
    let h1 = p[2] + (q[2] - p[2]) * s1;
    let (lo, hi) = if h0 <= h1 { (h0, h1) } else { (h1, h0) };
    lo <= blocker.height && hi >= blocker.base
}

/// True iff the blocker intersects the direct ray from `tx` to `rx`.
pub fn blocker_occludes(tx: &Pose, rx: &Pose, blocker: &Blocker) -> bool {
    segment_occluded(&tx.position, &rx.position, blocker)
}

fn reflection_point(tx: &Pose, rx: &Pose) -> [f64; 3] {
    let (a, b) = (&tx.position, &rx.position);
    let hsum = a[2] + b[2];
    let f = if hsum > 0.0 { a[2] / hsum } else { 0.5 };
    [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, 0.0]
}

/// True iff the blocker cuts either leg of the ground bounce, or removes the
/// reflection outright.
pub fn blocker_occludes_reflection(tx: &Pose, rx: &Pose, blocker: &Blocker) -> bool {
    if blocker.blocks_reflection {
        return true;
    }
    let g = reflection_point(tx, rx);
    segment_occluded(&tx.position, &g, blocker) || segment_occluded(&g, &rx.position, blocker)
}

/// Geometry of one transmitter/receiver pair, precomputed so that many beam
/// pairs can be evaluated cheaply.
#[derive(Debug, Clone)]
pub struct Link {
    tx: Pose,
    rx: Pose,
    paths: Vec<LinkPath>,
}

#[derive(Debug, Clone)]
struct LinkPath {
    component: PathComponent,
    // power budget before antenna gains and blockage
    budget: f64,
    tx_dir: (f64, f64, bool),
    rx_dir: (f64, f64, bool),
}

fn array_frame(world_az: f64, world_zen: f64, pose: &Pose) -> (f64, f64, bool) {
    let az = math::wrap_deg(world_az - pose.boresight_az);
    let zen = world_zen - pose.boresight_zen;
    let (u, v) = direction_cosines(az, zen);
    (u, v, az.abs() > 90.0)
}

impl Link {
    pub fn new(cfg: &ChannelConfig, tx: &Pose, rx: &Pose) -> Self {
        let mut comps = vec![los_path(tx, rx)];
        if cfg.ground_reflection && tx.height() > 0.0 && rx.height() > 0.0 {
            comps.push(ground_reflection_path(cfg, tx, rx));
        }
        let paths = comps
            .into_iter()
            .map(|c| LinkPath {
                budget: cfg.tx_power
                    - fspl_unchecked(c.length, cfg.carrier)
                    - cfg.system_loss
                    - c.extra_loss,
                tx_dir: array_frame(c.depart.0, c.depart.1, tx),
                rx_dir: array_frame(c.arrive.0, c.arrive.1, rx),
                component: c,
            })
            .collect();
        Self {
            tx: *tx,
            rx: *rx,
            paths,
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = &PathComponent> {
        self.paths.iter().map(|p| &p.component)
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    /// Power of path `i` before antenna gains, blockage included.
    pub fn budget(&self, cfg: &ChannelConfig, i: usize, occluded: bool) -> f64 {
        let b = self.paths[i].budget;
        if occluded {
            b - cfg.blockage_attenuation
        } else {
            b
        }
    }

    pub fn tx_gain(&self, i: usize, codebook: &Codebook, beam: BeamId) -> f64 {
        let (u, v, behind) = self.paths[i].tx_dir;
        codebook.gain_uv(beam, u, v, behind)
    }

    pub fn rx_gain(&self, i: usize, codebook: &Codebook, beam: BeamId) -> f64 {
        let (u, v, behind) = self.paths[i].rx_dir;
        codebook.gain_uv(beam, u, v, behind)
    }

    /// Occlusion flags per path, in the order of [`Link::paths`].
    pub fn occlusion(&self, blockers: &[Blocker]) -> [bool; 2] {
        let mut out = [false; 2];
        for (i, p) in self.paths.iter().enumerate() {
            out[i] = blockers.iter().any(|b| match p.component.kind {
                PathKind::Los => blocker_occludes(&self.tx, &self.rx, b),
                PathKind::GroundReflection => blocker_occludes_reflection(&self.tx, &self.rx, b),
            });
        }
        out
    }

    /// Unclamped per-path received power in dBm.
    pub fn path_rss(
        &self,
        cfg: &ChannelConfig,
        tx_beam: (&Codebook, BeamId),
        rx_beam: (&Codebook, BeamId),
        occluded: [bool; 2],
    ) -> [Option<f64>; 2] {
        let mut out = [None; 2];
        for (i, p) in self.paths.iter().enumerate() {
            let (tu, tv, tb) = p.tx_dir;
            let (ru, rv, rb) = p.rx_dir;
            let mut power = p.budget
                + tx_beam.0.gain_uv(tx_beam.1, tu, tv, tb)
                + rx_beam.0.gain_uv(rx_beam.1, ru, rv, rb);
            if occluded[i] {
                power -= cfg.blockage_attenuation;
            }
            out[i] = Some(power);
        }
        out
    }

    /// Max over paths, clamped at the noise floor.
    pub fn rss(
        &self,
        cfg: &ChannelConfig,
        tx_beam: (&Codebook, BeamId),
        rx_beam: (&Codebook, BeamId),
        occluded: [bool; 2],
    ) -> f64 {
        self.path_rss(cfg, tx_beam, rx_beam, occluded)
            .iter()
            .flatten()
            .fold(cfg.noise_floor, |m, &p| m.max(p))
    }
}

/// Received signal strength in dBm for one transmit/receive beam pair.
pub fn rss(
    cfg: &ChannelConfig,
    tx: &Pose,
    rx: &Pose,
    tx_beam: (&Codebook, BeamId),
    rx_beam: (&Codebook, BeamId),
    blockers: &[Blocker],
) -> f64 {
    let link = Link::new(cfg, tx, rx);
    let occ = link.occlusion(blockers);
    link.rss(cfg, tx_beam, rx_beam, occ)
}

/// System loss that makes the unobstructed LoS path deliver `target_rss_los`
/// with the given beams.
pub fn calibrate_system_loss(
    cfg: &ChannelConfig,
    tx: &Pose,
    rx: &Pose,
    tx_beam: (&Codebook, BeamId),
    rx_beam: (&Codebook, BeamId),
    target_rss_los: f64,
) -> f64 {
    let mut raw = cfg.clone();
    raw.system_loss = 0.0;
    let link = Link::new(&raw, tx, rx);
    let los =
        link.path_rss(&raw, tx_beam, rx_beam, [false; 2])[0].expect("LoS path always present");
    los - target_rss_los
}
