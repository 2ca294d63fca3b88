use rayon::prelude::*;
use serde::Serialize;

use super::{taylor_all, LipJet};
use crate::error::Result;
use crate::tensor::{MultilinearMap, NormFamily};

/// Where the certificate's maximum is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Witness {
    /// `‖f^k(x_point)‖`.
    Level { point: usize, k: usize, value: f64 },
    /// `‖R_k(x, y)‖ / ‖x − y‖^{γ−k}`.
    Remainder { x: usize, y: usize, k: usize, value: f64 },
}

impl Witness {
    pub fn value(&self) -> f64 {
        match self {
            Witness::Level { value, .. } | Witness::Remainder { value, .. } => *value,
        }
    }

    /// Re-evaluates the witnessed quantity from scratch.
    pub fn recompute(&self, jet: &LipJet, fam: &NormFamily) -> Result<f64> {
        match *self {
            Witness::Level { point, k, .. } => Ok(jet.level_norm(jet.level(point, k), fam)),
            Witness::Remainder { x, y, k, .. } => {
                let pred = jet.taylor_expand(y, x, k)?;
                let r = jet.level(x, k).sub(&pred)?;
                let h: Vec<f64> = jet.points()[x]
                    .iter()
                    .zip(&jet.points()[y])
                    .map(|(a, b)| a - b)
                    .collect();
                Ok(jet.level_norm(&r, fam) / fam.vector_norm(&h).powf(jet.gamma() - k as f64))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSummary {
    pub k: usize,
    pub sup_norm: f64,
    pub sup_ratio: f64,
}

/// The least constant satisfying the Lip-γ inequalities on the jet's cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipCertificate {
    pub gamma: f64,
    pub m: f64,
    pub sup_levels: f64,
    pub sup_ratios: f64,
    pub witness: Witness,
    pub per_level: Vec<LevelSummary>,
    pub points: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderEntry {
    pub x: usize,
    pub y: usize,
    pub k: usize,
    pub remainder: MultilinearMap,
    pub norm: f64,
    pub ratio: f64,
}

/// `R_k(x, y)` for every ordered pair of distinct cloud points and every level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderTable {
    pub gamma: f64,
    pub entries: Vec<RemainderEntry>,
}

impl RemainderTable {
    pub fn get(&self, x: usize, y: usize, k: usize) -> Option<&RemainderEntry> {
        self.entries.iter().find(|e| e.x == x && e.y == y && e.k == k)
    }

    pub fn max_ratio(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.ratio))
    }
}

fn displacement(jet: &LipJet, x: usize, y: usize) -> Vec<f64> {
    jet.points()[x]
        .iter()
        .zip(&jet.points()[y])
        .map(|(a, b)| a - b)
        .collect()
}

/// Remainders and ratios of one ordered pair, all levels.
fn pair_remainders(jet: &LipJet, fam: &NormFamily, x: usize, y: usize) -> Result<Vec<(MultilinearMap, f64, f64)>> {
    let h = displacement(jet, x, y);
    let dist = fam.vector_norm(&h);
    let pred = taylor_all(jet.levels_at(y), &h)?;
    pred.into_iter()
        .enumerate()
        .map(|(k, p)| {
            let r = jet.level(x, k).sub(&p)?;
            let norm = jet.level_norm(&r, fam);
            let ratio = norm / dist.powf(jet.gamma() - k as f64);
            Ok((r, norm, ratio))
        })
        .collect()
}

/// Full remainder table (quadratic in the cloud size; meant for small clouds).
pub fn remainders(jet: &LipJet, fam: &NormFamily) -> Result<RemainderTable> {
    fam.covers(jet.n())?;
    let n_pts = jet.len();
    let per_x: Vec<Vec<RemainderEntry>> = (0..n_pts)
        .into_par_iter()
        .map(|x| {
            let mut out = Vec::new();
            for y in (0..n_pts).filter(|&y| y != x) {
                for (k, (remainder, norm, ratio)) in pair_remainders(jet, fam, x, y)?.into_iter().enumerate() {
                    out.push(RemainderEntry {
                        x,
                        y,
                        k,
                        remainder,
                        norm,
                        ratio,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(RemainderTable {
        gamma: jet.gamma(),
        entries: per_x.into_iter().flatten().collect(),
    })
}

/// `a` beats `b` if strictly larger; ties keep the earlier candidate.
fn better(a: f64, b: f64) -> bool {
    a > b || (b.is_nan() && !a.is_nan())
}

/// Certificate of `jet` under `fam`: the maximum of all level norms and all
/// remainder ratios over ordered pairs. Pairs are processed in parallel and
/// reduced in index order, so the witness is deterministic.
pub fn certify(jet: &LipJet, fam: &NormFamily) -> Result<LipCertificate> {
    fam.covers(jet.n())?;
    let n = jet.n();
    let n_pts = jet.len();
    let mut per_level: Vec<LevelSummary> = (0..=n)
        .map(|k| LevelSummary {
            k,
            sup_norm: 0.0,
            sup_ratio: 0.0,
        })
        .collect();
    let mut level_witness = Witness::Level {
        point: 0,
        k: 0,
        value: 0.0,
    };
    for x in 0..n_pts {
        for (k, summary) in per_level.iter_mut().enumerate() {
            let v = jet.level_norm(jet.level(x, k), fam);
            if better(v, summary.sup_norm) {
                summary.sup_norm = v;
            }
            if better(v, level_witness.value()) {
                level_witness = Witness::Level { point: x, k, value: v };
            }
        }
    }

    // per x: best ratio per level with its (y, value)
    let rows: Vec<Vec<(usize, f64)>> = (0..n_pts)
        .into_par_iter()
        .map(|x| {
            let mut best = vec![(usize::MAX, 0.0); n + 1];
            for y in (0..n_pts).filter(|&y| y != x) {
                for (k, (_, _, ratio)) in pair_remainders(jet, fam, x, y)?.into_iter().enumerate() {
                    if better(ratio, best[k].1) {
                        best[k] = (y, ratio);
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;

    let mut ratio_witness: Option<Witness> = None;
    for (x, row) in rows.iter().enumerate() {
        for (k, &(y, ratio)) in row.iter().enumerate() {
            if y == usize::MAX {
                continue;
            }
            if better(ratio, per_level[k].sup_ratio) {
                per_level[k].sup_ratio = ratio;
            }
            if ratio_witness.is_none_or(|w| better(ratio, w.value())) {
                ratio_witness = Some(Witness::Remainder { x, y, k, value: ratio });
            }
        }
    }

    let sup_levels = level_witness.value();
    let sup_ratios = ratio_witness.map_or(0.0, |w| w.value());
    let witness = match ratio_witness {
        Some(w) if better(w.value(), sup_levels) => w,
        _ => level_witness,
    };
    Ok(LipCertificate {
        gamma: jet.gamma(),
        m: sup_levels.max(sup_ratios),
        sup_levels,
        sup_ratios,
        witness,
        per_level,
        points: n_pts,
        pairs: n_pts * n_pts.saturating_sub(1),
    })
}

/// Checks the bounded-and-Hölder characterization on the cloud: every level is
/// bounded by the certificate `M`, and `‖f^n(x) − f^n(y)‖ ≤ M ‖x − y‖^ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub m: f64,
    pub max_level_norm: f64,
    pub max_holder_ratio: f64,
    /// `(x, y)` attaining the Hölder maximum.
    pub holder_witness: Option<(usize, usize)>,
    /// Largest excess of either quantity over `M` (0 when both hold).
    pub max_violation: f64,
    pub passed: bool,
}

pub fn holder_characterization_check(jet: &LipJet, fam: &NormFamily) -> Result<HolderReport> {
    let cert = certify(jet, fam)?;
    let n = jet.n();
    let eps = jet.grade().eps;
    let rows: Vec<(usize, f64)> = (0..jet.len())
        .into_par_iter()
        .map(|x| {
            let mut best = (usize::MAX, 0.0);
            for y in (0..jet.len()).filter(|&y| y != x) {
                let diff = jet.level(x, n).sub(jet.level(y, n))?;
                let dist = fam.vector_norm(&displacement(jet, x, y));
                let r = jet.level_norm(&diff, fam) / dist.powf(eps);
                if better(r, best.1) {
                    best = (y, r);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut max_holder_ratio = 0.0;
    let mut holder_witness = None;
    for (x, &(y, r)) in rows.iter().enumerate() {
        if y != usize::MAX && better(r, max_holder_ratio) {
            max_holder_ratio = r;
            holder_witness = Some((x, y));
        }
    }
    let max_level_norm = cert.sup_levels;
    let max_violation = (max_level_norm - cert.m).max(max_holder_ratio - cert.m).max(0.0);
    Ok(HolderReport {
        m: cert.m,
        max_level_norm,
        max_holder_ratio,
        holder_witness,
        max_violation,
        passed: max_violation <= 1e-12 * cert.m.max(1.0),
    })
}
