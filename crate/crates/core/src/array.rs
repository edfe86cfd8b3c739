//! Codebook synthesis, directional gain and beam adjacency.
//!
//! Beams are uniform-excitation array factors evaluated in sine space. A
//! direction (az, zen) in the array frame maps to the direction cosines
//! `u = cos(zen)·sin(az)` (horizontal axis) and `v = sin(zen)` (vertical
//! axis, positive toward the ground). Linear arrays only resolve `u`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::math::{self, PI};
use crate::BeamId;

/// Attenuation applied to directions behind the array plane (|az| > 90°),
/// where the sine-space array factor would otherwise mirror the front lobe.
pub const BACK_HEMISPHERE_LOSS_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Linear,
    Planar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    pub elements_x: usize,
    #[serde(default = "one")]
    pub elements_y: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "half")]
    pub spacing: f64,
    /// Carrier frequency in Hz.
    pub carrier: f64,
    /// Gain in dB at the exact steering direction of any beam.
    #[serde(default = "default_boresight_gain")]
    pub boresight_gain: f64,
    /// Optional lower clamp on the returned gain, in dB.
    #[serde(default)]
    pub sidelobe_floor_db: Option<f64>,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

fn default_boresight_gain() -> f64 {
    17.0
}

impl ArrayGeometry {
    /// Uniform linear array with half-wavelength spacing and 17 dB gain.
    pub fn linear(elements: usize, carrier: f64) -> Self {
        Self {
            kind: ArrayKind::Linear,
            elements_x: elements,
            elements_y: 1,
            spacing: 0.5,
            carrier,
            boresight_gain: 17.0,
            sidelobe_floor_db: None,
        }
    }

    /// Uniform planar array with half-wavelength spacing and 17 dB gain.
    pub fn planar(elements_x: usize, elements_y: usize, carrier: f64) -> Self {
        Self {
            kind: ArrayKind::Planar,
            elements_x,
            elements_y,
            spacing: 0.5,
            carrier,
            boresight_gain: 17.0,
            sidelobe_floor_db: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements_x < 1 || self.elements_y < 1 {
            return Err(config_err!("array needs at least one element per axis"));
        }
        if self.kind == ArrayKind::Linear && self.elements_y != 1 {
            return Err(config_err!("linear array must have elements_y = 1"));
        }
        if !(self.spacing > 0.0) {
            return Err(config_err!("element spacing must be positive"));
        }
        if !(self.carrier > 0.0) {
            return Err(config_err!("carrier must be positive"));
        }
        Ok(())
    }
}

/// Normalized magnitude of an N-element uniform array factor at a
/// direction-cosine offset `delta` from the steering direction.
pub(crate) fn array_factor(elements: usize, spacing: f64, delta: f64) -> f64 {
    if elements <= 1 {
        return 1.0;
    }
    let half_psi = PI * spacing * delta;
    let den = elements as f64 * math::sin(half_psi);
    if den.abs() < 1e-12 {
        // main lobe or grating lobe peak
        return 1.0;
    }
    (math::sin(elements as f64 * half_psi) / den).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub id: BeamId,
    pub steer_az: f64,
    pub steer_zen: f64,
    pub row: usize,
    pub col: usize,
}

/// Parameters for [`make_codebook`]; this is the form codebooks take in
/// scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSpec {
    pub geometry: ArrayGeometry,
    pub sector_az: (f64, f64),
    #[serde(default)]
    pub sector_zen: (f64, f64),
    pub n_az: usize,
    #[serde(default = "one")]
    pub n_zen: usize,
}

impl CodebookSpec {
    pub fn build(&self) -> Result<Codebook> {
        make_codebook(
            self.geometry.clone(),
            self.sector_az,
            self.sector_zen,
            self.n_az,
            self.n_zen,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub geometry: ArrayGeometry,
    pub beams: Vec<Beam>,
    pub sector_az: (f64, f64),
    pub sector_zen: (f64, f64),
    n_az: usize,
    n_zen: usize,
    // (u0, v0) steering direction cosines, parallel to `beams`
    steer_uv: Vec<(f64, f64)>,
}

fn check_sector(name: &str, (start, end): (f64, f64), n: usize) -> Result<()> {
    if !start.is_finite() || !end.is_finite() {
        return Err(config_err!("{name} sector bounds must be finite"));
    }
    if n > 1 && start >= end {
        return Err(config_err!(
            "{name} sector start {start} must be below end {end}"
        ));
    }
    if start > end {
        return Err(config_err!("{name} sector start {start} exceeds end {end}"));
    }
    Ok(())
}

/// Cell-centred uniform grid: beam `i` of `n` sits at the middle of the
/// i-th of n equal slices of the sector.
fn grid_angle((start, end): (f64, f64), n: usize, i: usize) -> f64 {
    start + (end - start) * (i as f64 + 0.5) / n as f64
}

/// Builds an `n_zen × n_az` grid of beams, row-major with rows ordered by
/// increasing zenith (downward) steering and columns by increasing azimuth.
pub fn make_codebook(
    geometry: ArrayGeometry,
    sector_az: (f64, f64),
    sector_zen: (f64, f64),
    n_az: usize,
    n_zen: usize,
) -> Result<Codebook> {
    geometry.validate()?;
    if n_az == 0 || n_zen == 0 {
        return Err(config_err!("codebook needs n_az·n_zen ≥ 1"));
    }
    check_sector("azimuth", sector_az, n_az)?;
    check_sector("zenith", sector_zen, n_zen)?;
    if sector_az.0 < -90.0 || sector_az.1 > 90.0 || sector_zen.0 < -90.0 || sector_zen.1 > 90.0 {
        return Err(config_err!("sector must stay within ±90° of boresight"));
    }

    let mut beams = Vec::with_capacity(n_az * n_zen);
    let mut steer_uv = Vec::with_capacity(n_az * n_zen);
    for row in 0..n_zen {
        let zen = grid_angle(sector_zen, n_zen, row);
        for col in 0..n_az {
            let az = grid_angle(sector_az, n_az, col);
            steer_uv.push(direction_cosines(az, zen));
            beams.push(Beam {
                id: row * n_az + col,
                steer_az: az,
                steer_zen: zen,
                row,
                col,
            });
        }
    }
    Ok(Codebook {
        geometry,
        beams,
        sector_az,
        sector_zen,
        n_az,
        n_zen,
        steer_uv,
    })
}

/// Direction cosines of an array-frame direction given in degrees.
pub fn direction_cosines(az: f64, zen: f64) -> (f64, f64) {
    let (a, z) = (math::to_rad(az), math::to_rad(zen));
    (math::cos(z) * math::sin(a), math::sin(z))
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn n_az(&self) -> usize {
        self.n_az
    }

    pub fn n_zen(&self) -> usize {
        self.n_zen
    }

    /// True when the grid has more than one row and more than one column.
    pub fn is_two_dimensional(&self) -> bool {
        self.n_az > 1 && self.n_zen > 1
    }

    pub fn beam(&self, id: BeamId) -> Result<&Beam> {
        self.beams.get(id).ok_or_else(|| {
            Error::NotFound(alloc::format!("beam {id} in codebook of {}", self.len()))
        })
    }

    pub fn beam_at(&self, row: usize, col: usize) -> Option<BeamId> {
        (row < self.n_zen && col < self.n_az).then(|| row * self.n_az + col)
    }

    /// Gain in dB of `beam` toward the array-frame direction (az, zen).
    ///
    /// Panics if `beam` is out of range; use [`Codebook::beam`] to check ids
    /// coming from untrusted input.
    pub fn gain(&self, beam: BeamId, az: f64, zen: f64) -> f64 {
        let (u, v) = direction_cosines(az, zen);
        self.gain_uv(beam, u, v, math::wrap_deg(az).abs() > 90.0)
    }

    pub(crate) fn gain_uv(&self, beam: BeamId, u: f64, v: f64, behind: bool) -> f64 {
        let g = &self.geometry;
        let (u0, v0) = self.steer_uv[beam];
        let mut af = array_factor(g.elements_x, g.spacing, u - u0);
        if g.kind == ArrayKind::Planar {
            af *= array_factor(g.elements_y, g.spacing, v - v0);
        }
        let mut gain = g.boresight_gain + 20.0 * math::log10(af.max(1e-15));
        if behind && (g.elements_x > 1 || g.elements_y > 1) {
            gain -= BACK_HEMISPHERE_LOSS_DB;
        }
        match g.sidelobe_floor_db {
            Some(floor) => gain.max(floor),
            None => gain,
        }
    }

    /// Grid-adjacent beams: the Moore neighbourhood (≤ 8) on a 2-D grid, the
    /// index-adjacent beams (≤ 2) on a 1-D grid. Sorted by id.
    pub fn angular_neighbors(&self, beam: BeamId) -> Vec<BeamId> {
        let b = &self.beams[beam];
        let (row, col) = (b.row as isize, b.col as isize);
        let mut out = Vec::with_capacity(8);
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, c) = (row + dr, col + dc);
                if r < 0 || c < 0 || r >= self.n_zen as isize || c >= self.n_az as isize {
                    continue;
                }
                out.push(r as usize * self.n_az + c as usize);
            }
        }
        out.sort_unstable();
        out
    }

    /// Up to `count` beams directly below `beam` in the same column.
    pub fn downward_neighbors(&self, beam: BeamId, count: usize) -> Vec<BeamId> {
        let b = &self.beams[beam];
        (1..=count)
            .filter_map(|k| self.beam_at(b.row + k, b.col))
            .collect()
    }

    /// Beam whose steering direction is closest in sine space.
    pub fn nearest_beam(&self, az: f64, zen: f64) -> BeamId {
        let (u, v) = direction_cosines(az, zen);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (id, &(u0, v0)) in self.steer_uv.iter().enumerate() {
            let d = (u - u0) * (u - u0) + (v - v0) * (v - v0);
            if d < best_d {
                best_d = d;
                best = id;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_25() -> Codebook {
        make_codebook(
            ArrayGeometry::linear(12, 60e9),
            (-50.0, 60.0),
            (0.0, 0.0),
            25,
            1,
        )
        .unwrap()
    }

    fn planar_32() -> Codebook {
        make_codebook(
            ArrayGeometry::planar(32, 32, 28e9),
            (-60.0, 60.0),
            (-30.0, 30.0),
            32,
            32,
        )
        .unwrap()
    }

    #[test]
    fn linear_codebook_has_25_beams_in_order() {
        let cb = linear_25();
        assert_eq!(cb.len(), 25);
        for (i, b) in cb.beams.iter().enumerate() {
            assert_eq!(b.id, i);
            assert_eq!((b.row, b.col), (0, i));
        }
        assert!(cb.beams.windows(2).all(|w| w[0].steer_az < w[1].steer_az));
        assert!(cb.beams[0].steer_az > -50.0 && cb.beams[24].steer_az < 60.0);
    }

    #[test]
    fn planar_codebook_has_1024_beams() {
        assert_eq!(planar_32().len(), 1024);
    }

    #[test]
    fn single_beam_sits_at_sector_midpoint() {
        let cb = make_codebook(
            ArrayGeometry::linear(8, 60e9),
            (-40.0, 20.0),
            (-10.0, 30.0),
            1,
            1,
        )
        .unwrap();
        assert_eq!(cb.len(), 1);
        assert_eq!(cb.beams[0].steer_az, -10.0);
        assert_eq!(cb.beams[0].steer_zen, 10.0);
    }

    #[test]
    fn inverted_sector_is_rejected() {
        let err = make_codebook(
            ArrayGeometry::linear(8, 60e9),
            (10.0, -10.0),
            (0.0, 0.0),
            4,
            1,
        );
        assert!(matches!(err, Err(Error::Config(_))));
        let err = make_codebook(
            ArrayGeometry::linear(8, 60e9),
            (10.0, 10.0),
            (0.0, 0.0),
            4,
            1,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn gain_at_steering_equals_boresight_gain() {
        let cb = linear_25();
        for b in &cb.beams {
            assert!((cb.gain(b.id, b.steer_az, b.steer_zen) - 17.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_element_gain_is_isotropic() {
        let cb = make_codebook(
            ArrayGeometry::linear(1, 60e9),
            (-50.0, 50.0),
            (0.0, 0.0),
            5,
            1,
        )
        .unwrap();
        for az in [-80.0, -20.0, 0.0, 33.0, 89.0] {
            assert_eq!(cb.gain(2, az, 12.0), 17.0);
        }
    }

    #[test]
    fn half_power_point_is_three_db_down() {
        // Oracle: solve |AF(ψ)|² = 1/2 for the closed-form factor by bisection.
        let n = 12.0_f64;
        let af = |psi: f64| ((n * psi / 2.0).sin() / (n * (psi / 2.0).sin())).abs();
        let (mut lo, mut hi) = (1e-9, 2.0 * core::f64::consts::PI / n);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if af(mid) * af(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let du = lo / (2.0 * core::f64::consts::PI * 0.5);
        let cb = linear_25();
        for id in [3, 12, 20] {
            let b = &cb.beams[id];
            let az_h = (b.steer_az.to_radians().sin() + du).asin().to_degrees();
            let g = cb.gain(id, az_h, 0.0);
            assert!((g - 14.0).abs() < 0.2, "beam {id}: {g}");
        }
    }

    #[test]
    fn neighbours_on_grid_edges() {
        let cb = planar_32();
        let interior = cb.beam_at(10, 10).unwrap();
        assert_eq!(cb.angular_neighbors(interior).len(), 8);
        assert_eq!(cb.angular_neighbors(0).len(), 3);
        assert_eq!(cb.angular_neighbors(cb.beam_at(0, 5).unwrap()).len(), 5);
        let lin = linear_25();
        assert_eq!(lin.angular_neighbors(0), alloc::vec![1]);
        assert_eq!(lin.angular_neighbors(7), alloc::vec![6, 8]);
    }

    #[test]
    fn downward_neighbours_stay_in_column() {
        let cb = make_codebook(
            ArrayGeometry::planar(12, 4, 60e9),
            (-50.0, 60.0),
            (-26.0, 40.0),
            12,
            3,
        )
        .unwrap();
        assert_eq!(cb.downward_neighbors(5, 2), alloc::vec![17, 29]);
        assert_eq!(cb.downward_neighbors(17, 2), alloc::vec![29]);
        assert!(cb.downward_neighbors(29, 2).is_empty());
    }

    #[test]
    fn behind_the_array_is_attenuated() {
        let cb = linear_25();
        let front = cb.gain(12, 10.0, 0.0);
        let back = cb.gain(12, 170.0, 0.0);
        assert!((front - back - BACK_HEMISPHERE_LOSS_DB).abs() < 1e-9);
    }

    #[test]
    fn sidelobe_floor_clamps() {
        let mut g = ArrayGeometry::linear(12, 60e9);
        g.sidelobe_floor_db = Some(-5.0);
        let cb = make_codebook(g, (-50.0, 60.0), (0.0, 0.0), 25, 1).unwrap();
        for az in -89..89 {
            assert!(cb.gain(12, az as f64, 0.0) >= -5.0);
        }
    }
}
