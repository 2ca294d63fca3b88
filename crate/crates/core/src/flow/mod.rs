//! Flows of closed-form vector fields and the bounds they satisfy.
//!
//! All norms are `ℓ∞`: on states, on space-time points `(t, y)`, and the
//! subordinate norm on Jacobians.

mod checks;
mod integrate;
mod jet;

pub use checks::{
    confinement_check, derivative_checks, flow_jacobian, flow_space_lipschitz_check, holder_constants,
    time_space_check, BoundKind, FlowCertificate, HolderConstants, JacobianSample,
};
pub use integrate::{comparison_bound, flow_at, integrate, Trajectory, MIN_STEP};
pub use jet::{flow_jet, spatial_levels, FlowGrid, FlowJet, MAX_FLOW_ORDER};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};
use crate::expr::{Expr, ExprSpec};
use crate::jet::{box_grid, certify, LipGrade, LipJet};
use crate::smooth::{ExprMap, SmoothMap};
use crate::tensor::NormFamily;

/// An autonomous vector field `A: R^d → R^d` with a declared grade and the box
/// on which its norms are measured.
#[derive(Debug, Clone)]
pub struct VectorField {
    map: ExprMap,
    bounds: Vec<[f64; 2]>,
    gamma: f64,
}

/// On-disk form: `{dim, coords, box, gamma}` with `box` a list of `[lo, hi]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldFile {
    pub dim: usize,
    pub coords: Vec<ExprSpec>,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub gamma: f64,
}

/// Norms of a field measured on its box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldNorms {
    /// `‖A‖∞`.
    pub sup: f64,
    /// `‖A‖_{Lip-1}`.
    pub lip1: f64,
    /// `ε = min(γ − 1, 1)` when `γ > 1`.
    pub eps: Option<f64>,
    /// `‖A‖_{Lip-(1+ε)}`.
    pub lip_one_eps: Option<f64>,
    /// `‖A‖_{Lip-γ}` at the declared grade.
    pub lip_gamma: f64,
    pub points: usize,
}

impl VectorField {
    pub fn new(map: ExprMap, bounds: Vec<[f64; 2]>, gamma: f64) -> Result<Self> {
        let d = map.dim_in();
        if map.dim_out() != d || bounds.len() != d {
            return Err(LipError::dims(format!(
                "a field on R^{d} needs {d} coordinates and {d} box intervals, got {} and {}",
                map.dim_out(),
                bounds.len()
            )));
        }
        if bounds.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err(LipError::invalid("every box interval needs lo < hi"));
        }
        LipGrade::new(gamma)?;
        Ok(Self { map, bounds, gamma })
    }

    pub fn parse(coords: &[&str], bounds: Vec<[f64; 2]>, gamma: f64) -> Result<Self> {
        Self::new(ExprMap::parse(coords.len(), coords)?, bounds, gamma)
    }

    pub fn from_file(file: &FieldFile) -> Result<Self> {
        let comps = file.coords.iter().map(ExprSpec::to_expr).collect::<Result<Vec<_>>>()?;
        Self::new(ExprMap::new(file.dim, comps)?, file.bounds.clone(), file.gamma)
    }

    pub fn to_file(&self) -> FieldFile {
        FieldFile {
            dim: self.dim(),
            coords: self.map.components().iter().map(ExprSpec::from).collect(),
            bounds: self.bounds.clone(),
            gamma: self.gamma,
        }
    }

    pub fn map(&self) -> &ExprMap {
        &self.map
    }

    pub fn dim(&self) -> usize {
        self.map.dim_in()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter().zip(&self.bounds).all(|(v, [lo, hi])| lo <= v && v <= hi)
    }

    /// Whether the box holds the closed `ℓ∞` ball `B(x0, r)`.
    pub fn covers_ball(&self, x0: &[f64], r: f64) -> bool {
        x0.iter().zip(&self.bounds).all(|(c, [lo, hi])| *lo <= c - r && c + r <= *hi)
    }

    /// Measures the field's norms from its jets on a `per_axis` lattice of the box.
    ///
    /// `‖A‖_{Lip-1}` also takes the largest Jacobian norm on the lattice, which
    /// on a convex box dominates the pairwise difference quotients.
    pub fn measure(&self, per_axis: usize) -> Result<FieldNorms> {
        let lo: Vec<f64> = self.bounds.iter().map(|b| b[0]).collect();
        let hi: Vec<f64> = self.bounds.iter().map(|b| b[1]).collect();
        let points = box_grid(&lo, &hi, per_axis);
        let fam = NormFamily::ellinf();
        let grade_m = |g: f64| -> Result<f64> {
            let jet = LipJet::from_map(&self.map, points.clone(), LipGrade::new(g)?)?;
            Ok(certify(&jet, &fam)?.m)
        };
        let jac_sup = points
            .par_iter()
            .map(|x| Ok(self.map.jacobian(x)?.subordinate_norm(&fam)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let sup = points
            .iter()
            .map(|x| fam.vector_norm(&self.map.eval(x)))
            .fold(0.0, f64::max);
        let lip1 = grade_m(1.0)?.max(jac_sup);
        let eps = (self.gamma > 1.0).then(|| (self.gamma - 1.0).min(1.0));
        let lip_one_eps = eps.map(|e| grade_m(1.0 + e).map(|m| m.max(lip1))).transpose()?;
        Ok(FieldNorms {
            sup,
            lip1,
            eps,
            lip_one_eps,
            lip_gamma: grade_m(self.gamma)?.max(lip1),
            points: points.len(),
        })
    }
}

/// `(z, w) ↦ (P(z), dP(z) w)` on `R^{2m}`.
pub fn prolong(p: &ExprMap) -> Result<ExprMap> {
    let m = p.dim_in();
    let mut comps = p.components().to_vec();
    let grads: Vec<Vec<Expr>> = (0..m).map(|s| p.partial_expr(&[s])).collect::<Result<_>>()?;
    for c in 0..p.dim_out() {
        let sum = (0..m).fold(Expr::constant(0.0), |acc, s| {
            Expr::add(acc, Expr::mul(grads[s][c].clone(), Expr::var(m + s)))
        });
        comps.push(sum);
    }
    ExprMap::new(2 * m, comps)
}

/// `A_1 = A`, `A_{j+1} = dA_j · A`, so that `∂_t^j Ã = A_j ∘ Ã`.
pub fn time_derivative_fields(a: &ExprMap, count: usize) -> Result<Vec<ExprMap>> {
    let d = a.dim_in();
    let mut out: Vec<ExprMap> = Vec::with_capacity(count);
    for j in 0..count {
        if j == 0 {
            out.push(a.clone());
            continue;
        }
        let prev = &out[j - 1];
        let grads: Vec<Vec<Expr>> = (0..d).map(|s| prev.partial_expr(&[s])).collect::<Result<_>>()?;
        let comps = (0..d)
            .map(|c| {
                (0..d).fold(Expr::constant(0.0), |acc, s| {
                    Expr::add(acc, Expr::mul(grads[s][c].clone(), a.components()[s].clone()))
                })
            })
            .collect();
        out.push(ExprMap::new(d, comps)?);
    }
    Ok(out)
}
