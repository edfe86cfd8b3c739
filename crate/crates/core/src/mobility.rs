//! User trajectories and pedestrian blocker processes.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Blocker, Pose};
use crate::error::{config_err, Result};
use crate::math;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityKind {
    Static,
    LinearWalk,
    Rotational,
    FreeWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoresightMode {
    /// The device faces its walking direction.
    #[default]
    Heading,
    /// The device keeps its initial facing; only jitter is applied.
    Fixed,
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]` in metres.
pub type Bounds = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityModel {
    pub kind: MobilityKind,
    pub start: Pose,
    #[serde(default = "defaults::speed")]
    pub speed: f64,
    /// Boresight rotation rate in deg/s.
    #[serde(default)]
    pub angular_velocity: f64,
    /// Width of the rotational sweep in degrees, starting at the initial
    /// boresight and reflecting at both ends.
    #[serde(default = "defaults::rotation_span")]
    pub rotation_span: f64,
    #[serde(default = "defaults::trajectory_length")]
    pub trajectory_length: f64,
    /// Walking direction in degrees.
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub bounds: Option<Bounds>,
    #[serde(default)]
    pub boresight_mode: BoresightMode,
    /// Peak boresight jitter in degrees (free walk).
    #[serde(default = "defaults::jitter_amplitude")]
    pub jitter_amplitude: f64,
    /// Upper bound on the jitter rate in deg/s.
    #[serde(default = "defaults::jitter_rate_max")]
    pub jitter_rate_max: f64,
    /// Maximum rate at which a heading-following boresight turns, deg/s.
    #[serde(default = "defaults::turn_rate")]
    pub turn_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn speed() -> f64 {
        1.0
    }
    pub fn rotation_span() -> f64 {
        120.0
    }
    pub fn trajectory_length() -> f64 {
        2.0
    }
    pub fn jitter_amplitude() -> f64 {
        10.0
    }
    pub fn jitter_rate_max() -> f64 {
        // 8 rad/s
        8.0 * 180.0 / core::f64::consts::PI
    }
    pub fn turn_rate() -> f64 {
        180.0
    }
    pub fn duration_mean() -> f64 {
        0.2
    }
    pub fn crossing_speed() -> f64 {
        1.0
    }
    pub fn blocker_height() -> f64 {
        1.78
    }
    pub fn blocker_width() -> f64 {
        0.4
    }
    pub fn one() -> f64 {
        1.0
    }
}

impl MobilityModel {
    pub fn stationary(start: Pose) -> Self {
        Self {
            kind: MobilityKind::Static,
            start,
            speed: 0.0,
            angular_velocity: 0.0,
            rotation_span: defaults::rotation_span(),
            trajectory_length: 0.0,
            heading: 0.0,
            bounds: None,
            boresight_mode: BoresightMode::Heading,
            jitter_amplitude: 0.0,
            jitter_rate_max: defaults::jitter_rate_max(),
            turn_rate: defaults::turn_rate(),
            seed: 0,
        }
    }

    pub fn linear_walk(start: Pose, speed: f64, heading: f64, length: f64) -> Self {
        Self {
            kind: MobilityKind::LinearWalk,
            speed,
            heading,
            trajectory_length: length,
            ..Self::stationary(start)
        }
    }

    pub fn rotational(start: Pose, angular_velocity: f64, span: f64) -> Self {
        Self {
            kind: MobilityKind::Rotational,
            angular_velocity,
            rotation_span: span,
            ..Self::stationary(start)
        }
    }

    pub fn free_walk(start: Pose, speed: f64, bounds: Bounds, seed: u64) -> Self {
        Self {
            kind: MobilityKind::FreeWalk,
            speed,
            bounds: Some(bounds),
            jitter_amplitude: defaults::jitter_amplitude(),
            seed,
            ..Self::stationary(start)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.start.validate()?;
        if !(self.speed >= 0.0) {
            return Err(config_err!("speed must be non-negative"));
        }
        if !(self.trajectory_length >= 0.0) {
            return Err(config_err!("trajectory_length must be non-negative"));
        }
        if !(self.angular_velocity >= 0.0) || !(self.rotation_span >= 0.0) {
            return Err(config_err!("rotation parameters must be non-negative"));
        }
        if !(self.jitter_amplitude >= 0.0) || !(self.jitter_rate_max >= 0.0) {
            return Err(config_err!("jitter parameters must be non-negative"));
        }
        if self.jitter_rate_max > defaults::jitter_rate_max() + 1e-9 {
            return Err(config_err!("jitter_rate_max may not exceed 8 rad/s"));
        }
        if self.kind == MobilityKind::FreeWalk {
            let b = self
                .bounds
                .ok_or_else(|| config_err!("free_walk requires bounds"))?;
            if !(b[0] < b[2] && b[1] < b[3]) {
                return Err(config_err!("bounds must have positive extent"));
            }
            let [x, y, _] = self.start.position;
            if x < b[0] || x > b[2] || y < b[1] || y > b[3] {
                return Err(config_err!("free_walk start must lie inside bounds"));
            }
            if !(self.turn_rate > 0.0) {
                return Err(config_err!("turn_rate must be positive"));
            }
        }
        Ok(())
    }
}

/// Triangle wave in `[0, span]` starting at 0 and rising with unit slope.
fn reflect(x: f64, span: f64) -> f64 {
    if span <= 0.0 {
        return 0.0;
    }
    let m = math::rem_euclid(x, 2.0 * span);
    if m <= span {
        m
    } else {
        2.0 * span - m
    }
}

/// Smooth boresight jitter: a sum of three sinusoids whose combined rate
/// stays under `rate_max`.
#[derive(Debug, Clone)]
struct Jitter {
    terms: [(f64, f64, f64); 3],
}

impl Jitter {
    fn new(amplitude: f64, rate_max: f64, rng: &mut impl Rng) -> Self {
        let a = amplitude / 3.0;
        let f_cap = if amplitude > 0.0 {
            rate_max / (2.0 * math::PI * amplitude)
        } else {
            0.0
        };
        let mut terms = [(0.0, 0.0, 0.0); 3];
        for t in terms.iter_mut() {
            let f = f_cap * rng.gen_range(0.1..1.0);
            let phase = rng.gen_range(0.0..2.0 * math::PI);
            *t = (a, f, phase);
        }
        Self { terms }
    }

    fn at(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, f, p)| a * (math::sin(2.0 * math::PI * f * t + p) - math::sin(p)))
            .sum()
    }
}

/// Closed-form pose for the deterministic models.
fn analytic_pose(model: &MobilityModel, t: f64) -> Pose {
    let mut pose = model.start;
    match model.kind {
        MobilityKind::Static | MobilityKind::FreeWalk => {}
        MobilityKind::LinearWalk => {
            let d = (model.speed * t).min(model.trajectory_length);
            let h = math::to_rad(model.heading);
            pose.position[0] += d * math::cos(h);
            pose.position[1] += d * math::sin(h);
        }
        MobilityKind::Rotational => {
            pose.boresight_az = math::wrap_deg(
                model.start.boresight_az + reflect(model.angular_velocity * t, model.rotation_span),
            );
        }
    }
    pose
}

/// Poses sampled on a fixed grid; free walks are generated incrementally
/// from their seed, the other models are evaluated in closed form.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: MobilityModel,
    dt: f64,
    samples: Vec<Pose>,
}

pub const TRAJECTORY_STEP: f64 = 1e-3;

impl Trajectory {
    pub fn new(model: &MobilityModel, horizon: f64, dt: f64) -> Result<Self> {
        model.validate()?;
        if !(dt > 0.0) || !(horizon >= 0.0) {
            return Err(config_err!("trajectory needs dt > 0 and horizon >= 0"));
        }
        let samples = if model.kind == MobilityKind::FreeWalk {
            free_walk_samples(model, horizon, dt)
        } else {
            Vec::new()
        };
        Ok(Self {
            model: model.clone(),
            dt,
            samples,
        })
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        if self.model.kind != MobilityKind::FreeWalk {
            return analytic_pose(&self.model, t);
        }
        let i = math::round(t.max(0.0) / self.dt) as usize;
        self.samples[i.min(self.samples.len() - 1)]
    }
}

fn free_walk_samples(model: &MobilityModel, horizon: f64, dt: f64) -> Vec<Pose> {
    let b = model.bounds.expect("validated");
    let mut rng = rng::stream(model.seed, 0, Stream::Mobility);
    let jitter = Jitter::new(model.jitter_amplitude, model.jitter_rate_max, &mut rng);
    let n = math::round(horizon / dt) as usize + 1;
    let mut out = Vec::with_capacity(n);
    let [mut x, mut y, z] = model.start.position;
    let mut facing = model.start.boresight_az;
    let mut target = (x, y);
    let mut first = true;
    for i in 0..n {
        let t = i as f64 * dt;
        if !first {
            let mut step = model.speed * dt;
            while step > 0.0 {
                let (dx, dy) = (target.0 - x, target.1 - y);
                let d = math::hypot(dx, dy);
                if d <= step {
                    x = target.0;
                    y = target.1;
                    step -= d;
                    target = (rng.gen_range(b[0]..=b[2]), rng.gen_range(b[1]..=b[3]));
                    if model.speed == 0.0 {
                        break;
                    }
                } else {
                    x += dx / d * step;
                    y += dy / d * step;
                    step = 0.0;
                }
            }
        } else {
            target = (rng.gen_range(b[0]..=b[2]), rng.gen_range(b[1]..=b[3]));
            first = false;
        }
        if i > 0
            && model.boresight_mode == BoresightMode::Heading
            && (target.0 != x || target.1 != y)
        {
            let want = math::to_deg(math::atan2(target.1 - y, target.0 - x));
            let diff = math::wrap_deg(want - facing);
            let max_turn = model.turn_rate * dt;
            facing = math::wrap_deg(facing + diff.clamp(-max_turn, max_turn));
        }
        out.push(Pose {
            position: [x, y, z],
            boresight_az: math::wrap_deg(facing + jitter.at(t)),
            boresight_zen: model.start.boresight_zen,
        });
    }
    out
}

/// Pose of the mobile at time `t`. Free walks are regenerated from the seed
/// on every call; use [`Trajectory`] for repeated evaluation.
pub fn pose_at(model: &MobilityModel, t: f64) -> Result<Pose> {
    if !(t >= 0.0) {
        return Err(config_err!("time must be non-negative"));
    }
    if model.kind == MobilityKind::FreeWalk {
        return Ok(Trajectory::new(model, t, TRAJECTORY_STEP)?.pose_at(t));
    }
    model.validate()?;
    Ok(analytic_pose(model, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalLaw {
    #[default]
    Poisson,
    /// Evenly spaced at `1 / arrival_rate`.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockerProcess {
    #[serde(default)]
    pub arrival: ArrivalLaw,
    /// Events per second.
    #[serde(default)]
    pub arrival_rate: f64,
    /// No event starts before this time.
    #[serde(default)]
    pub start_time: f64,
    #[serde(default = "defaults::duration_mean")]
    pub duration_mean: f64,
    #[serde(default)]
    pub duration_jitter: f64,
    #[serde(default = "defaults::crossing_speed")]
    pub crossing_speed: f64,
    /// The pedestrian walks along this segment, passing its midpoint halfway
    /// through the event.
    pub crossing_line: [[f64; 2]; 2],
    #[serde(default = "defaults::blocker_height")]
    pub blocker_height: f64,
    #[serde(default = "defaults::blocker_width")]
    pub blocker_width: f64,
    #[serde(default)]
    pub blocker_base: f64,
    /// Probability that the ground-bounce path survives an event.
    #[serde(default = "defaults::one")]
    pub gr_availability: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BlockerProcess {
    pub fn none() -> Self {
        Self {
            arrival: ArrivalLaw::Poisson,
            arrival_rate: 0.0,
            start_time: 0.0,
            duration_mean: defaults::duration_mean(),
            duration_jitter: 0.0,
            crossing_speed: defaults::crossing_speed(),
            crossing_line: [[0.0, 0.0], [0.0, 1.0]],
            blocker_height: defaults::blocker_height(),
            blocker_width: defaults::blocker_width(),
            blocker_base: 0.0,
            gr_availability: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0) {
            return Err(config_err!("arrival_rate must be non-negative"));
        }
        if !(self.duration_mean > 0.0) {
            return Err(config_err!("duration_mean must be positive"));
        }
        if !(0.0..1.0).contains(&self.duration_jitter) {
            return Err(config_err!("duration_jitter must lie in [0, 1)"));
        }
        if !(self.crossing_speed >= 0.0) || !(self.start_time >= 0.0) {
            return Err(config_err!(
                "crossing_speed and start_time must be non-negative"
            ));
        }
        if !(self.blocker_width > 0.0) || !(self.blocker_height > self.blocker_base) {
            return Err(config_err!(
                "blocker needs positive width and height above its base"
            ));
        }
        if !(0.0..=1.0).contains(&self.gr_availability) {
            return Err(config_err!("gr_availability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// All events starting before `horizon`, ordered by start time.
    pub fn events(&self, horizon: f64) -> Vec<BlockerEvent> {
        let mut out = Vec::new();
        if self.arrival_rate <= 0.0 {
            return out;
        }
        let mut rng = rng::stream(self.seed, 0, Stream::Blockers);
        let mut t = self.start_time;
        let mut k = 0u64;
        loop {
            t = match self.arrival {
                ArrivalLaw::Poisson => {
                    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    t - math::ln(u) / self.arrival_rate
                }
                ArrivalLaw::Periodic => self.start_time + (k as f64 + 1.0) / self.arrival_rate,
            };
            k += 1;
            if t >= horizon {
                break;
            }
            let j: f64 = rng.gen_range(-1.0..=1.0);
            let duration = self.duration_mean * (1.0 + self.duration_jitter * j);
            let reflection_survives = rng.gen_bool(self.gr_availability);
            out.push(BlockerEvent {
                start: t,
                end: t + duration,
                blocks_reflection: !reflection_survives,
            });
        }
        out
    }

    /// Blocker geometry for an event at time `t`, or `None` if not alive.
    pub fn blocker_for(&self, event: &BlockerEvent, t: f64) -> Option<Blocker> {
        if t < event.start || t >= event.end {
            return None;
        }
        let [a, b] = self.crossing_line;
        let mid = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = math::hypot(dx, dy);
        let (ux, uy) = if len > 0.0 {
            (dx / len, dy / len)
        } else {
            (0.0, 0.0)
        };
        let s = self.crossing_speed * (t - 0.5 * (event.start + event.end));
        Some(Blocker {
            position: [mid[0] + ux * s, mid[1] + uy * s],
            height: self.blocker_height,
            width: self.blocker_width,
            base: self.blocker_base,
            blocks_reflection: event.blocks_reflection,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockerEvent {
    pub start: f64,
    pub end: f64,
    pub blocks_reflection: bool,
}

/// Blockers alive at time `t`.
pub fn active_blockers(process: &BlockerProcess, t: f64) -> Vec<Blocker> {
    process
        .events(t + f64::EPSILON)
        .iter()
        .filter_map(|e| process.blocker_for(e, t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> Pose {
        Pose::new(0.0, 0.0, 1.0, 0.0, 0.0)
    }

    #[test]
    fn linear_walk_displaces_and_clamps() {
        let m = MobilityModel::linear_walk(origin(), 1.0, 90.0, 2.0);
        let p = pose_at(&m, 2.0).unwrap();
        assert!(p.position[0].abs() < 1e-12);
        assert!((p.position[1] - 2.0).abs() < 1e-12);
        assert_eq!(pose_at(&m, 5.0).unwrap(), p);
        assert_eq!(p.boresight_az, 0.0);
    }

    #[test]
    fn rotational_reaches_configured_angle() {
        let m = MobilityModel::rotational(Pose::new(0.0, 0.0, 1.0, -60.0, 0.0), 120.0, 120.0);
        assert!((pose_at(&m, 1.0).unwrap().boresight_az - 60.0).abs() < 1e-9);
        assert!((pose_at(&m, 0.5).unwrap().boresight_az - 0.0).abs() < 1e-9);
        // reversal
        assert!((pose_at(&m, 1.5).unwrap().boresight_az - 0.0).abs() < 1e-9);
        assert!((pose_at(&m, 2.0).unwrap().boresight_az + 60.0).abs() < 1e-9);
    }

    #[test]
    fn identity_at_zero() {
        let start = Pose::new(1.0, 2.0, 1.0, 10.0, 5.0);
        let models = [
            MobilityModel::stationary(start),
            MobilityModel::linear_walk(start, 1.0, 30.0, 2.0),
            MobilityModel::rotational(start, 90.0, 90.0),
            MobilityModel::free_walk(start, 1.0, [0.0, 0.0, 4.0, 4.0], 3),
        ];
        for m in &models {
            assert_eq!(pose_at(m, 0.0).unwrap(), start, "{:?}", m.kind);
        }
    }

    #[test]
    fn free_walk_needs_bounds() {
        let mut m = MobilityModel::free_walk(origin(), 1.0, [-1.0, -1.0, 1.0, 1.0], 0);
        m.bounds = None;
        assert!(m.validate().is_err());
    }

    #[test]
    fn null_blocker_process_is_empty() {
        let p = BlockerProcess::none();
        assert!(p.events(100.0).is_empty());
        assert!(active_blockers(&p, 3.0).is_empty());
    }

    #[test]
    fn periodic_arrivals_are_evenly_spaced() {
        let p = BlockerProcess {
            arrival: ArrivalLaw::Periodic,
            arrival_rate: 0.5,
            start_time: 1.0,
            ..BlockerProcess::none()
        };
        let ev = p.events(10.0);
        let starts: Vec<f64> = ev.iter().map(|e| e.start).collect();
        assert_eq!(starts, [3.0, 5.0, 7.0, 9.0]);
    }

    #[test]
    fn blocker_passes_midpoint_at_mid_life() {
        let p = BlockerProcess {
            crossing_line: [[2.0, -1.0], [2.0, 1.0]],
            ..BlockerProcess::none()
        };
        let e = BlockerEvent {
            start: 1.0,
            end: 1.2,
            blocks_reflection: false,
        };
        let b = p.blocker_for(&e, 1.1).unwrap();
        assert!((b.position[0] - 2.0).abs() < 1e-12 && b.position[1].abs() < 1e-12);
        let later = p.blocker_for(&e, 1.15).unwrap();
        assert!((later.position[1] - 0.05).abs() < 1e-9);
        assert!(p.blocker_for(&e, 1.2).is_none());
    }
}
