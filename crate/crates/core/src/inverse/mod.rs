//! Quantitative inverse function and constant rank theorems.
//!
//! Matrices carry the `ℓ∞` subordinate norm and points the `ℓ∞` norm
//! throughout, so `M2 = ‖dφ(x0)^{-1}‖∞` and the radii below are `ℓ∞` radii.

mod jet;
mod rank;

pub use jet::{inverse_jet, inverse_levels_at, inversion_levels, InverseJet};
pub use rank::{constant_rank_decompose, ConstantRankDecomposition, DecomposeOptions, NormalFormReport, RANK_RTOL};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};
use crate::expr::ExprSpec;
use crate::jet::{box_grid, LipGrade, LipJet};
use crate::linalg;
use crate::optimize::bisect_largest;
use crate::smooth::{ExprMap, SmoothMap};
use crate::tensor::{factorial_f64, LinearMap, MultilinearMap, NormFamily, NormKind};

/// Iterations allowed before the fixed-point loop reports a violated precondition.
pub const MAX_ITERATIONS: usize = 64;

fn sup(v: &[f64]) -> f64 {
    NormKind::LInf.lq(v)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Largest `δ` with `Σ_{k=1}^{n} t^k/k! + t^{n+ε} ≤ 1/(2 M1 M2)` for all `t ≤ δ`,
/// where `γ = n + ε` is the grade of the matrix-valued map.
pub fn invertibility_radius(gamma: f64, m1m2: f64) -> Result<f64> {
    let g = LipGrade::new(gamma)?;
    if !(m1m2 > 0.0 && m1m2.is_finite()) {
        return Err(LipError::invalid(format!("M1·M2 must be positive, got {m1m2}")));
    }
    let target = 1.0 / (2.0 * m1m2);
    if g.n == 0 {
        return Ok(target.powf(1.0 / g.eps));
    }
    let condition = |t: f64| {
        (1..=g.n).map(|k| t.powi(k as i32) / factorial_f64(k)).sum::<f64>() + t.powf(gamma)
    };
    Ok(bisect_largest(condition, target, 0.0, 10.0))
}

/// Upper bound on the Lip-γ norm of a matrix-valued jet (`dim_out = rows·cols`,
/// row-major) with matrices in the `ℓ∞` subordinate norm and the domain in `ℓ∞`.
pub fn matrix_lip_bound(jet: &LipJet, rows: usize, cols: usize) -> Result<f64> {
    if jet.dim_out() != rows * cols {
        return Err(LipError::dims(format!(
            "jet has {} outputs, expected {rows}×{cols}",
            jet.dim_out()
        )));
    }
    let norm = |l: &MultilinearMap| -> f64 {
        let w = cols * l.dim().pow(l.order() as u32);
        l.coeffs()
            .chunks(w.max(1))
            .map(|row| row.iter().map(|c| c.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let per_point: Vec<f64> = (0..jet.len())
        .into_par_iter()
        .map(|x| {
            let mut best = jet.levels_at(x).iter().map(norm).fold(0.0, f64::max);
            for y in (0..jet.len()).filter(|&y| y != x) {
                let dist = sup(&diff(&jet.points()[x], &jet.points()[y]));
                for k in 0..=jet.n() {
                    let r = jet.level(x, k).sub(&jet.taylor_expand(y, x, k)?)?;
                    best = best.max(norm(&r) / dist.powf(jet.gamma() - k as f64));
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().fold(0.0, f64::max))
}

/// Levels `j = 0..=count-1` of `x ↦ dφ(x)` flattened row-major, i.e. `φ^{j+1}(x)`
/// read as `d·d`-valued `j`-linear maps.
pub(crate) fn derivative_field_levels(phi: &dyn SmoothMap, x: &[f64], count: usize) -> Result<Vec<MultilinearMap>> {
    let (m, d) = (phi.dim_out(), phi.dim_in());
    (1..=count)
        .map(|j| {
            let l = phi.derivative(x, j)?;
            MultilinearMap::new(m * d, d, j - 1, l.into_coeffs())
        })
        .collect()
}

/// The jet of `dφ` at grade `γ − 1` on `points`.
pub fn derivative_field_jet(phi: &dyn SmoothMap, points: Vec<Vec<f64>>, gamma: f64) -> Result<LipJet> {
    let g = LipGrade::new(gamma - 1.0)?;
    let levels = points
        .iter()
        .map(|x| derivative_field_levels(phi, x, g.n + 1))
        .collect::<Result<_>>()?;
    LipJet::new(g, points, levels)
}

/// A local inversion problem around `x0` for `φ: R^d → R^d` of grade `γ > 1`.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    phi: ExprMap,
    x0: Vec<f64>,
    gamma: f64,
    m1: f64,
    m2: f64,
    alpha: f64,
    phi_x0: Vec<f64>,
    jac0_inv: LinearMap,
}

/// On-disk form: `{phi, x0, M1, M2, alpha, gamma}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub phi: Vec<ExprSpec>,
    pub x0: Vec<f64>,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl InverseProblem {
    /// Checks that `dφ(x0)` is invertible with `‖dφ(x0)^{-1}‖ ≤ M2` and that
    /// `0 < α ≤ δ(γ − 1, M1 M2)`.
    pub fn new(phi: ExprMap, x0: Vec<f64>, gamma: f64, m1: f64, m2: f64, alpha: f64) -> Result<Self> {
        if phi.dim_in() != phi.dim_out() || x0.len() != phi.dim_in() {
            return Err(LipError::dims(format!(
                "need φ: R^d → R^d and x0 ∈ R^d, got R^{} → R^{} and x0 of length {}",
                phi.dim_in(),
                phi.dim_out(),
                x0.len()
            )));
        }
        if !(gamma > 1.0) {
            return Err(LipError::invalid(format!("γ must exceed 1 so that dφ has a grade, got {gamma}")));
        }
        let jac0_inv = linalg::inverse(&phi.jacobian(&x0)?)?;
        let inv_norm = jac0_inv.subordinate_norm(&NormFamily::ellinf());
        if inv_norm > m2 * (1.0 + 1e-12) {
            return Err(LipError::invalid(format!(
                "‖dφ(x0)^-1‖ = {inv_norm} exceeds M2 = {m2}"
            )));
        }
        let radius = invertibility_radius(gamma - 1.0, m1 * m2)?;
        if !(alpha > 0.0 && alpha <= radius * (1.0 + 1e-12)) {
            return Err(LipError::invalid(format!(
                "α = {alpha} must lie in (0, δ] with δ = {radius}"
            )));
        }
        let phi_x0 = phi.eval(&x0);
        Ok(Self {
            phi,
            x0,
            gamma,
            m1,
            m2,
            alpha,
            phi_x0,
            jac0_inv,
        })
    }

    /// Measures `M2` exactly at `x0`, estimates `M1` from the jet of `dφ` on a
    /// `per_axis`-point lattice of the `ℓ∞` ball `B(x0, probe)`, and takes the
    /// largest admissible `α ≤ probe`.
    pub fn calibrate(phi: ExprMap, x0: Vec<f64>, gamma: f64, probe: f64, per_axis: usize) -> Result<Self> {
        if !(probe > 0.0) || per_axis < 2 {
            return Err(LipError::invalid("probe radius must be positive with at least 2 points per axis"));
        }
        let jac0_inv = linalg::inverse(&phi.jacobian(&x0)?)?;
        let m2 = jac0_inv.subordinate_norm(&NormFamily::ellinf());
        let lo: Vec<f64> = x0.iter().map(|c| c - probe).collect();
        let hi: Vec<f64> = x0.iter().map(|c| c + probe).collect();
        let jet = derivative_field_jet(&phi, box_grid(&lo, &hi, per_axis), gamma)?;
        let m1 = matrix_lip_bound(&jet, phi.dim_out(), phi.dim_in())?;
        let alpha = invertibility_radius(gamma - 1.0, m1 * m2)?.min(probe);
        Self::new(phi, x0, gamma, m1, m2, alpha)
    }

    pub fn from_file(file: &ProblemFile) -> Result<Self> {
        let comps = file.phi.iter().map(ExprSpec::to_expr).collect::<Result<Vec<_>>>()?;
        let phi = ExprMap::new(file.x0.len(), comps)?;
        Self::new(phi, file.x0.clone(), file.gamma, file.m1, file.m2, file.alpha)
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            phi: self.phi.components().iter().map(ExprSpec::from).collect(),
            x0: self.x0.clone(),
            m1: self.m1,
            m2: self.m2,
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    pub fn phi(&self) -> &ExprMap {
        &self.phi
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `δ(γ − 1, M1 M2)`.
    pub fn radius(&self) -> f64 {
        invertibility_radius(self.gamma - 1.0, self.m1 * self.m2).expect("validated at construction")
    }

    /// `‖dφ(x0)^{-1}(y − φ(x0))‖`, which is `< α/2` exactly on `V0`.
    pub fn v0_coordinate(&self, y: &[f64]) -> Result<f64> {
        Ok(sup(&self.jac0_inv.apply(&diff(y, &self.phi_x0))?))
    }

    pub fn in_v0(&self, y: &[f64]) -> Result<bool> {
        Ok(self.v0_coordinate(y)? < self.alpha / 2.0)
    }

    /// `φ(x0) + dφ(x0) u` for `u` at the cell centres of a `per_axis` lattice on
    /// the cube of half-width `shrink · α/2`, `0 < shrink ≤ 1`.
    pub fn v0_samples(&self, per_axis: usize, shrink: f64) -> Result<Vec<Vec<f64>>> {
        let jac = self.phi.jacobian(&self.x0)?;
        cell_centres(self.x0.len(), per_axis, shrink * self.alpha / 2.0)
            .into_iter()
            .map(|u| {
                let v = jac.apply(&u)?;
                Ok(self.phi_x0.iter().zip(v).map(|(a, b)| a + b).collect())
            })
            .collect()
    }

    /// `G(x) = x + dφ(x0)^{-1}(y − φ(x))`.
    pub fn step(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let corr = self.jac0_inv.apply(&diff(y, &self.phi.eval(x)))?;
        Ok(x.iter().zip(corr).map(|(a, b)| a + b).collect())
    }

    /// Checks that every cell centre of a lattice on `B(x0, α/3)` maps into `V0`.
    pub fn check_inner_ball(&self, per_axis: usize) -> Result<BallCheck> {
        let pts: Vec<Vec<f64>> = cell_centres(self.x0.len(), per_axis, self.alpha / 3.0)
            .into_iter()
            .map(|u| self.x0.iter().zip(u).map(|(a, b)| a + b).collect())
            .collect();
        let mut worst = (0.0, None);
        for (i, x) in pts.iter().enumerate() {
            let c = self.v0_coordinate(&self.phi.eval(x))?;
            if c > worst.0 {
                worst = (c, Some(i));
            }
        }
        Ok(BallCheck {
            samples: pts.len(),
            max_v0_coordinate: worst.0,
            limit: self.alpha / 2.0,
            witness: worst.1.map(|i| pts[i].clone()),
            passed: worst.0 < self.alpha / 2.0,
        })
    }
}

/// `u` at the centres of a `per_axis^d` lattice of cells covering `[-r, r]^d`.
fn cell_centres(d: usize, per_axis: usize, r: f64) -> Vec<Vec<f64>> {
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(d as u32);
    let mut idx = vec![0; d];
    (0..total)
        .map(|flat| {
            crate::tensor::unravel(flat, per_axis, &mut idx);
            idx.iter()
                .map(|&i| r * (2.0 * i as f64 + 1.0 - per_axis as f64) / per_axis as f64)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCheck {
    pub samples: usize,
    pub max_v0_coordinate: f64,
    pub limit: f64,
    pub witness: Option<Vec<f64>>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalInverseResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub inside_ball: bool,
    /// `‖x_{m+1} − x_m‖` for every iterate.
    pub steps: Vec<f64>,
    /// Largest ratio of consecutive steps above the rounding floor.
    pub max_contraction: f64,
}

/// Steps at or below this multiple of `‖x‖` are treated as rounding noise when
/// measuring contraction.
const ROUNDING_FLOOR: f64 = 1e-12;

/// Fixed-point iteration of `G` from `x0` until a step is at most `tol`.
pub fn solve_local_inverse(prob: &InverseProblem, y: &[f64], tol: f64) -> Result<LocalInverseResult> {
    if !(tol > 0.0) {
        return Err(LipError::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if y.len() != prob.x0.len() {
        return Err(LipError::dims("target has the wrong dimension"));
    }
    if !prob.in_v0(y)? {
        return Err(LipError::OutsideDomain(y.to_vec()));
    }
    let mut x = prob.x0.clone();
    let mut steps = Vec::new();
    let mut max_contraction: f64 = 0.0;
    loop {
        let next = prob.step(&x, y)?;
        let s = sup(&diff(&next, &x));
        let scale = 1.0 + sup(&next);
        if let Some(&prev) = steps.last() {
            if prev > ROUNDING_FLOOR * scale {
                max_contraction = max_contraction.max(s / prev);
            }
        }
        steps.push(s);
        x = next;
        let residual = sup(&diff(&prob.phi.eval(&x), y));
        if s <= tol || residual == 0.0 {
            return Ok(LocalInverseResult {
                inside_ball: sup(&diff(&x, &prob.x0)) < prob.alpha,
                iterations: steps.len(),
                residual,
                x,
                steps,
                max_contraction,
            });
        }
        if steps.len() >= MAX_ITERATIONS {
            return Err(LipError::IterationCap {
                iterations: MAX_ITERATIONS,
                last_step: s,
            });
        }
    }
}

/// Outcome of the rank-stability check around `x0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankCertificate {
    pub delta: f64,
    pub m1: f64,
    /// The bound measured on the jet itself, for comparison with a supplied `M1`.
    pub m1_measured: f64,
    pub m2: f64,
    pub minor_inverse_norm: f64,
    /// `1 / (2 M2)`.
    pub allowed_deviation: f64,
    pub points_checked: usize,
    pub max_deviation: f64,
    pub min_rank: usize,
    pub witness: Option<usize>,
    pub passed: bool,
}

/// Confirms that the `rows × cols` minor of a matrix-valued jet stays invertible
/// on every cloud point within `δ(γ, M1 M2)` of point `x0`.
pub fn perturbation_rank_check(
    jet: &LipJet,
    shape: (usize, usize),
    x0: usize,
    rows: &[usize],
    cols: &[usize],
    m1: Option<f64>,
    m2: f64,
) -> Result<RankCertificate> {
    let (m, p) = shape;
    if x0 >= jet.len() {
        return Err(LipError::UnknownPoint { index: x0 });
    }
    if rows.len() != cols.len() || rows.is_empty() {
        return Err(LipError::invalid("index sets must be non-empty and of equal size"));
    }
    let m1_measured = matrix_lip_bound(jet, m, p)?;
    let m1 = m1.unwrap_or(m1_measured);
    let matrix = |i: usize| LinearMap::new(m, p, jet.value(i).to_vec());
    let minor0 = linalg::minor(&matrix(x0)?, rows, cols)?;
    let minor_inverse_norm = linalg::inverse(&minor0)?.subordinate_norm(&NormFamily::ellinf());
    if minor_inverse_norm > m2 * (1.0 + 1e-12) {
        return Err(LipError::invalid(format!(
            "‖M^-1‖ = {minor_inverse_norm} exceeds M2 = {m2}"
        )));
    }
    let delta = invertibility_radius(jet.gamma(), m1 * m2)?;
    let allowed = 1.0 / (2.0 * m2);
    let centre = &jet.points()[x0];
    let (mut checked, mut max_dev, mut min_rank, mut witness) = (0, 0.0f64, rows.len(), None);
    for i in 0..jet.len() {
        if sup(&diff(&jet.points()[i], centre)) > delta {
            continue;
        }
        checked += 1;
        let mi = linalg::minor(&matrix(i)?, rows, cols)?;
        let dev = mi
            .entries()
            .iter()
            .zip(minor0.entries())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>();
        let dev = LinearMap::new(rows.len(), rows.len(), dev)?.subordinate_norm(&NormFamily::ellinf());
        max_dev = max_dev.max(dev);
        let r = linalg::rank(&mi, linalg::PIVOT_RTOL);
        if r < min_rank || (dev > allowed && witness.is_none()) {
            witness = Some(i);
        }
        min_rank = min_rank.min(r);
    }
    Ok(RankCertificate {
        delta,
        m1,
        m1_measured,
        m2,
        minor_inverse_norm,
        allowed_deviation: allowed,
        points_checked: checked,
        max_deviation: max_dev,
        min_rank,
        witness,
        passed: min_rank == rows.len() && max_dev <= allowed * (1.0 + 1e-12),
    })
}
