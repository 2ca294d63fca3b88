use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::compose_levels;
use crate::error::{LipError, Result};
use crate::jet::{box_grid, certify, grid_1d, LipCertificate, LipGrade, LipJet};
use crate::smooth::{ExprMap, SmoothMap};
use crate::tensor::{class_table, unravel, MultilinearMap, NormFamily};

use super::checks::{derivative_checks, FlowCertificate, HolderConstants};
use super::integrate::flow_at;
use super::{prolong, time_derivative_fields, FieldNorms, VectorField};

/// Highest derivative order of the flow that is assembled.
pub const MAX_FLOW_ORDER: usize = 3;

/// Sampling of `[−T, T] × B(x0, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowGrid {
    pub times: usize,
    pub per_axis: usize,
    /// Lattice size per axis for measuring the field's norms on its box.
    pub measure_per_axis: usize,
}

impl Default for FlowGrid {
    fn default() -> Self {
        Self {
            times: 5,
            per_axis: 5,
            measure_per_axis: 41,
        }
    }
}

/// The flow as a jet on space-time points `(t, y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowJet {
    #[serde(skip)]
    pub jet: LipJet,
    pub certificate: LipCertificate,
    pub norms: FieldNorms,
    pub holder: Option<HolderConstants>,
    pub checks: Vec<FlowCertificate>,
    /// Whether the field's box holds `B(x0, r + T‖A‖∞)`, where the flow lives.
    pub box_covers: bool,
}

/// Levels `0..=n` of `x ↦ Ã(t, x)` at `y`, the order-`k` level read off the last
/// block of the `k`-fold prolonged field started from `(y, e_{i_1}, ..., e_{i_k})`.
pub fn spatial_levels(prolongs: &[ExprMap], y: &[f64], t: f64, n: usize, tol: f64) -> Result<Vec<MultilinearMap>> {
    let d = y.len();
    let mut out = vec![MultilinearMap::new(d, d, 0, flow_at(&prolongs[0], y, t, tol)?)?];
    for k in 1..=n {
        let table = class_table(d, k);
        let blocks = 1usize << k;
        let values = table
            .classes
            .iter()
            .map(|class| {
                let mut z = vec![0.0; blocks * d];
                z[..d].copy_from_slice(y);
                for (l, &i) in class.iter().enumerate() {
                    z[(1 << l) * d + i] = 1.0;
                }
                let end = flow_at(&prolongs[k], &z, t, tol)?;
                Ok(end[(blocks - 1) * d..].to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let width = table.of.len();
        let mut coeffs = vec![0.0; d * width];
        for r in 0..d {
            for (flat, &c) in table.of.iter().enumerate() {
                coeffs[r * width + flat] = values[c][r];
            }
        }
        out.push(MultilinearMap::new(d, d, k, coeffs)?);
    }
    Ok(out)
}

/// Space-time levels at `(t, y)`: `∂_t^j ∂_x^m Ã = d^m (A_j ∘ Ã(t, ·))` by the chain rule.
fn spacetime_levels(time_fields: &[ExprMap], spatial: &[MultilinearMap], n: usize) -> Result<Vec<MultilinearMap>> {
    let d = spatial[0].out_dim();
    let state = spatial[0].coeffs().to_vec();
    // mixed[j][m] = ∂_t^j ∂_x^m Ã
    let mut mixed = vec![spatial.to_vec()];
    for j in 1..=n {
        let outer = time_fields[j - 1].levels(&state, n - j)?;
        mixed.push(compose_levels(&outer, &spatial[..=n - j])?);
    }
    let dd = d + 1;
    let mut out = vec![MultilinearMap::new(d, dd, 0, state)?];
    for k in 1..=n {
        let width = dd.pow(k as u32);
        let mut coeffs = vec![0.0; d * width];
        let mut idx = vec![0; k];
        for flat in 0..width {
            unravel(flat, dd, &mut idx);
            let j = idx.iter().filter(|&&s| s == 0).count();
            let space: Vec<usize> = idx.iter().filter(|&&s| s > 0).map(|s| s - 1).collect();
            let m = &mixed[j][k - j];
            let sflat = space.iter().fold(0, |acc, &s| acc * d + s);
            let block = d.pow((k - j) as u32);
            for r in 0..d {
                coeffs[r * width + flat] = m.coeffs()[r * block + sflat];
            }
        }
        out.push(MultilinearMap::new(d, dd, k, coeffs)?);
    }
    Ok(out)
}

/// Builds the flow's jet on a lattice of `[−T, T] × B(x0, r)` at the field's
/// grade, certifies it, and checks the derivative bounds.
pub fn flow_jet(field: &VectorField, x0: &[f64], r: f64, t_max: f64, grid: FlowGrid, tol: f64) -> Result<FlowJet> {
    let grade = LipGrade::new(field.gamma())?;
    if grade.n > MAX_FLOW_ORDER {
        return Err(LipError::invalid(format!(
            "flow jets are assembled up to order {MAX_FLOW_ORDER}, the field's grade {} needs {}",
            field.gamma(),
            grade.n
        )));
    }
    if x0.len() != field.dim() {
        return Err(LipError::dims("centre has the wrong dimension"));
    }
    if !(r > 0.0 && t_max > 0.0 && tol > 0.0) || grid.times < 2 || grid.per_axis < 2 {
        return Err(LipError::invalid("need r, T, tol > 0 and at least two samples per axis"));
    }
    let norms = field.measure(grid.measure_per_axis)?;
    let mut prolongs = vec![field.map().clone()];
    for k in 1..=grade.n {
        prolongs.push(prolong(&prolongs[k - 1])?);
    }
    let time_fields = time_derivative_fields(field.map(), grade.n)?;
    let lo: Vec<f64> = x0.iter().map(|c| c - r).collect();
    let hi: Vec<f64> = x0.iter().map(|c| c + r).collect();
    let space = box_grid(&lo, &hi, grid.per_axis);
    let points: Vec<Vec<f64>> = grid_1d(-t_max, t_max, grid.times)
        .into_iter()
        .flat_map(|t| space.iter().map(move |y| std::iter::once(t[0]).chain(y.iter().copied()).collect()))
        .collect();
    let levels = points
        .par_iter()
        .map(|p| {
            let s = spatial_levels(&prolongs, &p[1..], p[0], grade.n, tol)?;
            spacetime_levels(&time_fields, &s, grade.n)
        })
        .collect::<Result<Vec<_>>>()?;
    let jet = LipJet::new(grade, points, levels)?;
    let certificate = certify(&jet, &NormFamily::ellinf())?;
    let (checks, holder) = if grade.n >= 1 {
        let (b, h, hc) = derivative_checks(field, &norms, &jet, t_max, r, tol)?;
        (vec![b, h], Some(hc))
    } else {
        (Vec::new(), None)
    };
    Ok(FlowJet {
        box_covers: field.covers_ball(x0, r + t_max * norms.sup),
        jet,
        certificate,
        norms,
        holder,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_jet() {
        let f = VectorField::parse(&["0.5"], vec![[-4.0, 4.0]], 2.0).unwrap();
        let fj = flow_jet(&f, &[0.0], 1.0, 1.0, FlowGrid::default(), 1e-10).unwrap();
        for i in 0..fj.jet.len() {
            let p = &fj.jet.points()[i];
            assert!((fj.jet.value(i)[0] - (p[1] + 0.5 * p[0])).abs() < 1e-13);
            assert_eq!(fj.jet.level(i, 1).coeffs(), &[0.5, 1.0]);
        }
        assert!(fj.checks.iter().all(|c| c.passed));
    }

    #[test]
    fn sine_second_order_levels() {
        let f = VectorField::parse(&["sin(x0)"], vec![[-4.0, 4.0]], 3.0).unwrap();
        let grid = FlowGrid { times: 3, per_axis: 3, measure_per_axis: 81 };
        let fj = flow_jet(&f, &[0.5], 0.5, 1.0, grid, 1e-11).unwrap();
        let h = 1e-4;
        for i in 0..fj.jet.len() {
            let (t, y) = (fj.jet.points()[i][0], fj.jet.points()[i][1]);
            let x = fj.jet.value(i)[0];
            let l1 = fj.jet.level(i, 1).coeffs();
            assert!((l1[0] - x.sin()).abs() < 1e-9);
            // ∂_t ∂_x Ã = cos(Ã) ∂_x Ã
            let l2 = fj.jet.level(i, 2).coeffs();
            assert!((l2[1] - x.cos() * l1[1]).abs() < 1e-8);
            assert_eq!(l2[1], l2[2]);
            let fd = (flow_at(f.map(), &[y + h], t, 1e-13).unwrap()[0] - 2.0 * x
                + flow_at(f.map(), &[y - h], t, 1e-13).unwrap()[0])
                / (h * h);
            assert!((l2[3] - fd).abs() < 1e-4, "{} vs {fd}", l2[3]);
        }
        assert!(fj.box_covers);
        assert!(fj.checks.iter().all(|c| c.passed), "{:?}", fj.checks);
    }

    #[test]
    fn grade_cap() {
        let f = VectorField::parse(&["x0"], vec![[-1.0, 1.0]], 4.5).unwrap();
        assert!(flow_jet(&f, &[0.0], 0.5, 0.5, FlowGrid::default(), 1e-8).is_err());
    }
}
