//! Lip-γ jets over finite point clouds and their certification.
//!
//! A jet stores, at every point `x` of a cloud, symmetric `k`-linear maps
//! `f^0(x), ..., f^n(x)` with `γ = n + ε`, `0 < ε ≤ 1`. Certification computes
//! the least `M` such that every level is bounded by `M` and every Taylor
//! remainder satisfies `‖R_k(x, y)‖ ≤ M ‖x − y‖^{γ−k}` on the cloud.

mod certify;
mod io;

pub use certify::{
    certify, holder_characterization_check, remainders, HolderReport, LevelSummary,
    LipCertificate, RemainderEntry, RemainderTable, Witness,
};
pub use io::JetFile;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};
use crate::poly::PolyMap;
use crate::smooth::SmoothMap;
use crate::tensor::{factorial_f64, MultilinearMap, NormFamily, MAX_ORDER};

/// `⌊γ⌋` in the convention `0 < γ − ⌊γ⌋ ≤ 1`, so integers map to `γ − 1`.
pub fn floor_gamma(gamma: f64) -> usize {
    (gamma.ceil() as usize).saturating_sub(1)
}

/// `γ = n + ε` with `n = ⌊γ⌋` and `ε ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipGrade {
    pub gamma: f64,
    pub n: usize,
    pub eps: f64,
}

pub fn lip_grade(gamma: f64) -> Result<LipGrade> {
    LipGrade::new(gamma)
}

impl LipGrade {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(LipError::invalid(format!("γ must be positive and finite, got {gamma}")));
        }
        let n = floor_gamma(gamma);
        Ok(Self {
            gamma,
            n,
            eps: gamma - n as f64,
        })
    }
}

/// How the norm of an `R^m`-valued level is formed from its coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum OutputNorm {
    /// The family's `ℓq` norm on all of `R^m`.
    #[default]
    Uniform,
    /// `R^m = R^{m_1} × ... × R^{m_r}` with the family norm on each block and
    /// the blocks combined by `pairing`.
    Blocks { sizes: Vec<usize>, pairing: Pairing },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    L1,
    L2,
    Linf,
}

impl Pairing {
    pub fn combine(self, parts: &[f64]) -> f64 {
        match self {
            Pairing::L1 => parts.iter().sum(),
            Pairing::L2 => parts.iter().map(|p| p * p).sum::<f64>().sqrt(),
            Pairing::Linf => parts.iter().fold(0.0, |m, p| m.max(*p)),
        }
    }
}

impl std::str::FromStr for Pairing {
    type Err = LipError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Pairing::L1),
            "l2" => Ok(Pairing::L2),
            "linf" => Ok(Pairing::Linf),
            _ => Err(LipError::Parse(format!("unknown pairing '{s}' (use l1, l2 or linf)"))),
        }
    }
}

impl OutputNorm {
    /// Norm of a level `m × d^k` block under `fam`.
    pub fn level_norm(&self, level: &MultilinearMap, fam: &NormFamily) -> f64 {
        match self {
            OutputNorm::Uniform => level.op_norm(fam),
            OutputNorm::Blocks { sizes, pairing } => {
                let width = level.dim().pow(level.order() as u32);
                let mut start = 0;
                let parts: Vec<f64> = sizes
                    .iter()
                    .map(|&s| {
                        let rows = &level.coeffs()[start * width..(start + s) * width];
                        start += s;
                        fam.level_norm(s, level.order(), rows)
                    })
                    .collect();
                pairing.combine(&parts)
            }
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if let OutputNorm::Blocks { sizes, .. } = self {
            if sizes.iter().sum::<usize>() != m || sizes.contains(&0) {
                return Err(LipError::dims(format!(
                    "output blocks {sizes:?} do not partition R^{m}"
                )));
            }
        }
        Ok(())
    }
}

/// A Lip-γ collection `(f^0, ..., f^n)` sampled on a finite point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct LipJet {
    dim_in: usize,
    dim_out: usize,
    grade: LipGrade,
    points: Vec<Vec<f64>>,
    levels: Vec<Vec<MultilinearMap>>,
    output: OutputNorm,
}

/// Relative tolerance used to match a computed image point to a cloud point.
pub const POINT_MATCH_RTOL: f64 = 1e-10;

fn coincidence_key(p: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point
    p.iter().map(|x| if *x == 0.0 { 0 } else { x.to_bits() }).collect()
}

impl LipJet {
    /// Validates shapes, distinctness of points, the order cap and symmetry of
    /// every level.
    pub fn new(grade: LipGrade, points: Vec<Vec<f64>>, levels: Vec<Vec<MultilinearMap>>) -> Result<Self> {
        if points.is_empty() {
            return Err(LipError::invalid("a jet needs at least one point"));
        }
        if grade.n > MAX_ORDER {
            return Err(LipError::OrderCap {
                order: grade.n,
                max: MAX_ORDER,
            });
        }
        let dim_in = points[0].len();
        if dim_in == 0 {
            return Err(LipError::invalid("points must have positive dimension"));
        }
        if points.len() != levels.len() {
            return Err(LipError::dims(format!(
                "{} points but {} level lists",
                points.len(),
                levels.len()
            )));
        }
        let dim_out = levels[0].first().map_or(0, MultilinearMap::out_dim);
        if dim_out == 0 {
            return Err(LipError::invalid("levels must have positive output dimension"));
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.len());
        for (i, (p, lv)) in points.iter().zip(&levels).enumerate() {
            if p.len() != dim_in {
                return Err(LipError::dims(format!("point {i} has dimension {}, expected {dim_in}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(LipError::invalid(format!("point {i} has a non-finite coordinate")));
            }
            if let Some(&first) = seen.get(&coincidence_key(p)) {
                return Err(LipError::CoincidentPoints { first, second: i });
            }
            seen.insert(coincidence_key(p), i);
            if lv.len() != grade.n + 1 {
                return Err(LipError::dims(format!(
                    "point {i} carries {} levels, grade γ = {} needs {}",
                    lv.len(),
                    grade.gamma,
                    grade.n + 1
                )));
            }
            for (k, l) in lv.iter().enumerate() {
                if l.order() != k || l.dim() != dim_in || l.out_dim() != dim_out {
                    return Err(LipError::dims(format!(
                        "level {k} at point {i} has shape (out {}, dim {}, order {})",
                        l.out_dim(),
                        l.dim(),
                        l.order()
                    )));
                }
                if l.coeffs().iter().any(|c| !c.is_finite()) {
                    return Err(LipError::invalid(format!("level {k} at point {i} is not finite")));
                }
                if !l.is_symmetric() {
                    return Err(LipError::invalid(format!(
                        "level {k} at point {i} is not symmetric (defect {:e})",
                        l.symmetry_defect()
                    )));
                }
            }
        }
        Ok(Self {
            dim_in,
            dim_out,
            grade,
            points,
            levels,
            output: OutputNorm::Uniform,
        })
    }

    pub fn with_output(mut self, output: OutputNorm) -> Result<Self> {
        output.validate(self.dim_out)?;
        self.output = output;
        Ok(self)
    }

    /// Samples a closed-form map and its exact derivatives on `points`.
    pub fn from_map(map: &dyn SmoothMap, points: Vec<Vec<f64>>, grade: LipGrade) -> Result<Self> {
        let levels = points
            .iter()
            .map(|p| map.levels(p, grade.n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grade, points, levels)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn grade(&self) -> LipGrade {
        self.grade
    }

    pub fn gamma(&self) -> f64 {
        self.grade.gamma
    }

    pub fn n(&self) -> usize {
        self.grade.n
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn output(&self) -> &OutputNorm {
        &self.output
    }

    pub fn levels_at(&self, i: usize) -> &[MultilinearMap] {
        &self.levels[i]
    }

    pub fn level(&self, i: usize, k: usize) -> &MultilinearMap {
        &self.levels[i][k]
    }

    pub fn value(&self, i: usize) -> &[f64] {
        self.levels[i][0].coeffs()
    }

    pub fn all_levels(&self) -> &[Vec<MultilinearMap>] {
        &self.levels
    }

    pub fn level_norm(&self, level: &MultilinearMap, fam: &NormFamily) -> f64 {
        self.output.level_norm(level, fam)
    }

    /// Index of the cloud point matching `p` to [`POINT_MATCH_RTOL`].
    pub fn find_point(&self, p: &[f64]) -> Option<usize> {
        let scale = 1.0 + p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.points.iter().position(|q| {
            q.len() == p.len()
                && q.iter().zip(p).all(|(a, b)| (a - b).abs() <= POINT_MATCH_RTOL * scale)
        })
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.points.len() {
            Ok(())
        } else {
            Err(LipError::UnknownPoint { index: i })
        }
    }

    /// `Σ_{j=k}^{n} f^j(y)(· ⊗ (x−y)^{⊗(j−k)}) / (j−k)!` with base `y` and target `x`
    /// given by cloud indices.
    pub fn taylor_expand(&self, base: usize, target: usize, k: usize) -> Result<MultilinearMap> {
        self.check_index(base)?;
        self.check_index(target)?;
        if k > self.grade.n {
            return Err(LipError::invalid(format!("level {k} exceeds n = {}", self.grade.n)));
        }
        let h: Vec<f64> = self.points[target]
            .iter()
            .zip(&self.points[base])
            .map(|(x, y)| x - y)
            .collect();
        Ok(taylor_all(&self.levels[base], &h)?.swap_remove(k))
    }

    /// Sub-jet on the listed cloud indices (in the given order).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            self.check_index(i)?;
        }
        Self::new(
            self.grade,
            indices.iter().map(|&i| self.points[i].clone()).collect(),
            indices.iter().map(|&i| self.levels[i].clone()).collect(),
        )?
        .with_output(self.output.clone())
    }

    /// Keeps levels `0..=⌊γ'⌋` and relabels the grade as `γ'`.
    pub fn truncate(&self, gamma_prime: f64) -> Result<Self> {
        let g = LipGrade::new(gamma_prime)?;
        if g.n > self.grade.n {
            return Err(LipError::invalid(format!(
                "cannot raise ⌊γ⌋ from {} to {} by truncation",
                self.grade.n, g.n
            )));
        }
        Self::new(
            g,
            self.points.clone(),
            self.levels.iter().map(|lv| lv[..=g.n].to_vec()).collect(),
        )?
        .with_output(self.output.clone())
    }
}

/// Taylor predictions for every level `k = 0..=n` from base levels and
/// displacement `h`.
pub(crate) fn taylor_all(base: &[MultilinearMap], h: &[f64]) -> Result<Vec<MultilinearMap>> {
    let n = base.len() - 1;
    let mut out: Vec<MultilinearMap> = base.to_vec();
    for (j, fj) in base.iter().enumerate().skip(1) {
        let mut cur = fj.clone();
        for r in 1..=j {
            cur = cur.contract_trailing(h, 1)?;
            out[j - r].axpy(1.0 / factorial_f64(r), &cur)?;
        }
    }
    debug_assert_eq!(out.len(), n + 1);
    Ok(out)
}

/// Jet of a polynomial map sampled at `points`.
pub fn jet_of_polynomial(p: &PolyMap, points: Vec<Vec<f64>>, grade: LipGrade) -> Result<LipJet> {
    LipJet::from_map(p, points, grade)
}

/// `n` evenly spaced points on `[a, b]` as 1-D points.
pub fn grid_1d(a: f64, b: f64, n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![a]];
    }
    (0..n)
        .map(|i| vec![a + (b - a) * i as f64 / (n - 1) as f64])
        .collect()
}

/// Tensor-product lattice with `per_axis` points on each `[lo_i, hi_i]`.
pub fn box_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let total = per_axis.pow(d as u32);
    let mut idx = vec![0; d];
    (0..total)
        .map(|flat| {
            crate::tensor::unravel(flat, per_axis, &mut idx);
            (0..d)
                .map(|a| {
                    if per_axis == 1 {
                        lo[a]
                    } else {
                        lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / (per_axis - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;

    #[test]
    fn grades() {
        let g = lip_grade(2.5).unwrap();
        assert_eq!((g.n, g.eps), (2, 0.5));
        let g = lip_grade(2.0).unwrap();
        assert_eq!((g.n, g.eps), (1, 1.0));
        let g = lip_grade(1.0).unwrap();
        assert_eq!((g.n, g.eps), (0, 1.0));
        let g = lip_grade(0.3).unwrap();
        assert_eq!((g.n, g.eps), (0, 0.3));
        assert!(lip_grade(0.0).is_err());
        assert!(lip_grade(-1.0).is_err());
    }

    fn t_squared(points: Vec<Vec<f64>>) -> LipJet {
        let p = PolyMap::scalar(Polynomial::from_terms(1, &[(1.0, &[2])]).unwrap());
        jet_of_polynomial(&p, points, lip_grade(2.0).unwrap()).unwrap()
    }

    #[test]
    fn taylor_hand_example() {
        let jet = t_squared(vec![vec![0.0], vec![1.0]]);
        // prediction of f(1) from base 0 at k = 0 is 0 + 0·1
        assert_eq!(jet.taylor_expand(0, 1, 0).unwrap().coeffs(), &[0.0]);
        assert_eq!(jet.taylor_expand(1, 1, 1).unwrap(), *jet.level(1, 1));
        assert!(matches!(jet.taylor_expand(0, 5, 0), Err(LipError::UnknownPoint { index: 5 })));
        assert!(jet.taylor_expand(0, 1, 2).is_err());
    }

    #[test]
    fn coincident_points_rejected() {
        let p = PolyMap::scalar(Polynomial::var(1, 0));
        let err = LipJet::from_map(&p, vec![vec![0.5], vec![1.0], vec![0.5]], lip_grade(1.0).unwrap());
        assert!(matches!(err, Err(LipError::CoincidentPoints { first: 0, second: 2 })));
    }

    #[test]
    fn asymmetric_level_rejected() {
        let lv = vec![
            MultilinearMap::new(1, 2, 0, vec![0.0]).unwrap(),
            MultilinearMap::new(1, 2, 1, vec![0.0, 0.0]).unwrap(),
            MultilinearMap::new(1, 2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap(),
        ];
        assert!(LipJet::new(lip_grade(2.5).unwrap(), vec![vec![0.0, 0.0]], vec![lv]).is_err());
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_1d(-1.0, 1.0, 101).len(), 101);
        assert_eq!(grid_1d(-1.0, 1.0, 101)[50], vec![0.0]);
        let g = box_grid(&[0.0, 0.0], &[1.0, 2.0], 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[5], vec![0.5, 2.0]);
    }

    #[test]
    fn truncation_keeps_low_levels() {
        let jet = t_squared(grid_1d(0.0, 1.0, 5));
        let low = jet.truncate(1.0).unwrap();
        assert_eq!(low.n(), 0);
        assert!(jet.truncate(3.5).is_err());
    }
}
