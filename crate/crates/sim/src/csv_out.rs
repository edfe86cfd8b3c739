//! CSV tables for external plotting.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;
use terra_core::array::Codebook;
use terra_core::baselines::OverheadRow;
use terra_core::deployment::DensityRow;
use terra_core::mobility::{MobilityModel, Trajectory, TRAJECTORY_STEP};

fn write_rows<T: Serialize>(w: impl Write, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BeamRow {
    id: usize,
    row: usize,
    col: usize,
    steer_az: f64,
    steer_zen: f64,
}

pub fn codebook(w: impl Write, cb: &Codebook) -> Result<()> {
    write_rows(
        w,
        cb.beams.iter().map(|b| BeamRow {
            id: b.id,
            row: b.row,
            col: b.col,
            steer_az: b.steer_az,
            steer_zen: b.steer_zen,
        }),
    )
}

#[derive(Serialize)]
struct PatternRow {
    beam: usize,
    az: f64,
    zen: f64,
    gain: f64,
}

/// Gain of every beam over an azimuth cut at `zen`, `step` degrees apart.
pub fn pattern(w: impl Write, cb: &Codebook, zen: f64, step: f64) -> Result<()> {
    let n = (360.0 / step).round() as usize;
    let rows = cb.beams.iter().flat_map(|b| {
        (0..=n).map(move |i| {
            let az = -180.0 + i as f64 * step;
            PatternRow {
                beam: b.id,
                az,
                zen,
                gain: cb.gain(b.id, az, zen),
            }
        })
    });
    write_rows(w, rows)
}

#[derive(Serialize)]
struct DensityCsvRow {
    range: f64,
    lambda: f64,
    prob: f64,
    lambda_star: f64,
    mc_prob: Option<f64>,
    mc_se: Option<f64>,
}

/// One line per (range, λ) grid point. `mc` holds Monte Carlo
/// (estimate, standard error) pairs in the same order as the curve points.
pub fn density(w: impl Write, rows: &[DensityRow], mc: Option<&[Vec<(f64, f64)>]>) -> Result<()> {
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &(lambda, prob)) in row.curve.iter().enumerate() {
            let est = mc.and_then(|m| m.get(i)).and_then(|r| r.get(j));
            out.push(DensityCsvRow {
                range: row.range,
                lambda,
                prob,
                lambda_star: row.lambda_star,
                mc_prob: est.map(|e| e.0),
                mc_se: est.map(|e| e.1),
            });
        }
    }
    write_rows(w, out)
}

pub fn overhead(w: impl Write, rows: &[OverheadRow]) -> Result<()> {
    write_rows(w, rows)
}

#[derive(Serialize)]
struct CdfRow {
    value: f64,
    cum_prob: f64,
}

pub fn cdf(w: impl Write, points: &[(f64, f64)]) -> Result<()> {
    write_rows(
        w,
        points
            .iter()
            .map(|&(value, cum_prob)| CdfRow { value, cum_prob }),
    )
}

#[derive(Serialize)]
struct PoseRow {
    t: f64,
    x: f64,
    y: f64,
    height: f64,
    boresight_az: f64,
    boresight_zen: f64,
}

/// Mobile pose every `step` seconds up to `horizon`, using the model's own
/// seed.
pub fn trajectory(w: impl Write, model: &MobilityModel, horizon: f64, step: f64) -> Result<()> {
    let traj = Trajectory::new(model, horizon, TRAJECTORY_STEP)?;
    let n = (horizon / step).floor() as usize;
    let rows = (0..=n).map(|i| {
        let t = i as f64 * step;
        let p = traj.pose_at(t);
        PoseRow {
            t,
            x: p.position[0],
            y: p.position[1],
            height: p.position[2],
            boresight_az: p.boresight_az,
            boresight_zen: p.boresight_zen,
        }
    });
    write_rows(w, rows)
}
