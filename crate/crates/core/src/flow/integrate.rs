use std::io::Write;

use serde::Serialize;

use crate::error::{LipError, Result};
use crate::smooth::SmoothMap;

/// Steps shorter than this abort the integration.
pub const MIN_STEP: f64 = 1e-14;

const MAX_STEPS: usize = 1_000_000;

// Dormand–Prince 5(4) tableau; the field is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// States of an autonomous ODE `y' = A(y)` on the accepted step grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub tol: f64,
    pub accepted: usize,
    pub rejected: usize,
    /// Largest local error estimate among accepted steps.
    pub max_local_error: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("a trajectory holds its initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("a trajectory holds its initial time")
    }

    /// Writes `t,y0,...,y{d-1}` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.states.first().map_or(0, Vec::len);
        let header: Vec<String> = std::iter::once("t".to_string()).chain((0..d).map(|i| format!("y{i}"))).collect();
        let to_io = |e: csv::Error| LipError::Io(e.into());
        w.write_record(&header).map_err(to_io)?;
        for (t, y) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = std::iter::once(t).chain(y).map(|v| format!("{v:e}")).collect();
            w.write_record(&row).map_err(to_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn axpy_into(out: &mut [f64], y: &[f64], h: f64, ks: &[Vec<f64>], weights: &[f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = y[i] + h * ks.iter().zip(weights).map(|(k, w)| w * k[i]).sum::<f64>();
    }
}

/// Integrates `y' = A(y)` from `y(0) = y0` to `t_final`, which may be negative.
///
/// A step is accepted when the embedded error estimate is at most
/// `tol · |h| / |t_final|`, so the accumulated local error stays below `tol`.
pub fn integrate<F: SmoothMap + ?Sized>(field: &F, y0: &[f64], t_final: f64, tol: f64) -> Result<Trajectory> {
    if !(tol > 0.0) || !t_final.is_finite() {
        return Err(LipError::invalid(format!("need tol > 0 and a finite horizon, got tol = {tol}, t = {t_final}")));
    }
    if field.dim_in() != y0.len() || field.dim_out() != y0.len() {
        return Err(LipError::dims(format!(
            "field on R^{} → R^{} cannot move a point of R^{}",
            field.dim_in(),
            field.dim_out(),
            y0.len()
        )));
    }
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y0.to_vec()],
        tol,
        accepted: 0,
        rejected: 0,
        max_local_error: 0.0,
    };
    let span = t_final.abs();
    if span == 0.0 {
        return Ok(traj);
    }
    let dir = t_final.signum();
    let d = y0.len();
    let (mut t, mut y) = (0.0f64, y0.to_vec());
    let mut h = span.min(0.05);
    let mut ks: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
    let mut stage = vec![0.0; d];
    ks[0] = field.eval(&y);
    while (t_final - t) * dir > 0.0 {
        if traj.accepted + traj.rejected >= MAX_STEPS {
            return Err(LipError::StepUnderflow { t, h });
        }
        let last = h >= (t_final - t).abs();
        if last {
            h = (t_final - t).abs();
        }
        let hs = dir * h;
        for s in 1..7 {
            axpy_into(&mut stage, &y, hs, &ks[..s], &A[s][..s]);
            ks[s] = field.eval(&stage);
        }
        // stage now holds the fifth-order solution (row 7 equals the weights)
        let err = (0..d)
            .map(|i| (hs * ks.iter().zip(&E).map(|(k, e)| e * k[i]).sum::<f64>()).abs())
            .fold(0.0, f64::max);
        let allowed = tol * h / span;
        if !err.is_finite() || stage.iter().any(|v| !v.is_finite()) {
            h *= 0.2;
            traj.rejected += 1;
        } else if err <= allowed {
            t = if last { t_final } else { t + hs };
            y.copy_from_slice(&stage);
            ks[0] = ks[6].clone();
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.accepted += 1;
            traj.max_local_error = traj.max_local_error.max(err);
            let grow = if err == 0.0 { 5.0 } else { (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            traj.rejected += 1;
            h *= (0.9 * (allowed / err).powf(0.25)).clamp(0.1, 0.9);
        }
        if h < MIN_STEP {
            return Err(LipError::StepUnderflow { t, h });
        }
    }
    Ok(traj)
}

/// `Ã(t, y)`.
pub fn flow_at<F: SmoothMap + ?Sized>(field: &F, y: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    Ok(integrate(field, y, t, tol)?.final_state().to_vec())
}

/// Bound on `‖u(t)‖` when `‖u'‖ ≤ a‖u‖ + b` and `‖u(t0)‖ = u0`, `dt = |t − t0|`.
pub fn comparison_bound(a: f64, b: f64, u0: f64, dt: f64) -> f64 {
    let dt = dt.abs();
    if a < 1e-13 {
        return u0 + b * dt;
    }
    (a * dt).exp() * u0 + b / a * (a * dt).exp_m1()
}
