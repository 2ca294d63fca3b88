use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LipError, Result};
use crate::jet::{certify, LipCertificate, LipJet};
use crate::tensor::{factorial_f64, replace_slot, MultilinearMap, NormFamily};

/// Ordered tuples `(i_1, ..., i_j)` with `i_l ≥ 1` summing to `k`.
pub fn compositions(k: usize, j: usize) -> Vec<Vec<usize>> {
    fn go(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for first in 1..=left.saturating_sub(parts - 1) {
            cur.push(first);
            go(left - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if j <= k {
        go(k, j, &mut Vec::with_capacity(j), &mut out);
    }
    out
}

/// `g^j(f^{i_1} ⊗ ... ⊗ f^{i_j})`, one slot of `g^j` replaced at a time.
fn chain_term(g: &MultilinearMap, fs: &[&MultilinearMap]) -> Result<MultilinearMap> {
    let (e, d) = (g.dim(), fs[0].dim());
    let j = g.order();
    let mut data = g.coeffs().to_vec();
    let mut pre = g.out_dim();
    for (slot, f) in fs.iter().enumerate() {
        let a = d.pow(f.order() as u32);
        let post = e.pow((j - slot - 1) as u32);
        data = replace_slot(&data, pre, e, post, f.coeffs(), a);
        pre *= a;
    }
    let k = fs.iter().map(|f| f.order()).sum();
    MultilinearMap::new(g.out_dim(), d, k, data)
}

/// Levels of `g ∘ f` at one point from the levels of `g` at `f(y)` and of `f` at `y`:
///
/// `(g∘f)^k = Sym Σ_{j=1}^{k} Σ_{i_1+...+i_j=k} k!/(j! i_1! ... i_j!) g^j(f^{i_1} ⊗ ... ⊗ f^{i_j})`.
pub fn compose_levels(g: &[MultilinearMap], f: &[MultilinearMap]) -> Result<Vec<MultilinearMap>> {
    let n = g.len().min(f.len()) - 1;
    if g[0].dim() != f[0].out_dim() {
        return Err(LipError::dims(format!(
            "outer map lives on R^{} but the inner map is R^{}-valued",
            g[0].dim(),
            f[0].out_dim()
        )));
    }
    let (m, d) = (g[0].out_dim(), f[0].dim());
    let mut out = vec![MultilinearMap::new(m, d, 0, g[0].coeffs().to_vec())?];
    for k in 1..=n {
        let mut acc = MultilinearMap::zeros(m, d, k)?;
        for j in 1..=k {
            for parts in compositions(k, j) {
                let weight = factorial_f64(k)
                    / (factorial_f64(j) * parts.iter().map(|&i| factorial_f64(i)).product::<f64>());
                let fs: Vec<&MultilinearMap> = parts.iter().map(|&i| &f[i]).collect();
                acc.axpy(weight, &chain_term(&g[j], &fs)?)?;
            }
        }
        out.push(acc.symmetrize());
    }
    Ok(out)
}

/// `g ∘ f` with its certificate and the constant it realizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Composition {
    #[serde(skip)]
    pub jet: LipJet,
    pub certificate: LipCertificate,
    pub outer: LipCertificate,
    pub inner: LipCertificate,
    /// `M_{g∘f} / (M_g max(M_f^γ, 1))`, or 0 when `M_g = 0`.
    pub realized_constant: f64,
}

/// Composes jets whose clouds are aligned: every value of `f` must be a point of `g`.
pub fn compose(g: &LipJet, f: &LipJet, fam_e: &NormFamily, fam_f: &NormFamily) -> Result<Composition> {
    fam_e.require_projective()?;
    fam_f.require_projective()?;
    if g.gamma() != f.gamma() {
        return Err(LipError::invalid(format!(
            "grades differ: outer γ = {}, inner γ = {}",
            g.gamma(),
            f.gamma()
        )));
    }
    if g.dim_in() != f.dim_out() {
        return Err(LipError::dims(format!(
            "outer jet lives on R^{} but the inner jet is R^{}-valued",
            g.dim_in(),
            f.dim_out()
        )));
    }
    let targets = (0..f.len())
        .map(|i| {
            g.find_point(f.value(i)).ok_or_else(|| LipError::ImageNotInCloud {
                index: i,
                coords: f.value(i).to_vec(),
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let levels = (0..f.len())
        .into_par_iter()
        .map(|i| compose_levels(g.levels_at(targets[i]), f.levels_at(i)))
        .collect::<Result<_>>()?;
    let jet = LipJet::new(f.grade(), f.points().to_vec(), levels)?.with_output(g.output().clone())?;
    let certificate = certify(&jet, fam_e)?;
    let outer = certify(g, fam_f)?;
    let inner = certify(f, fam_e)?;
    let denom = outer.m * inner.m.powf(f.gamma()).max(1.0);
    Ok(Composition {
        realized_constant: if denom > 0.0 { certificate.m / denom } else { 0.0 },
        jet,
        certificate,
        outer,
        inner,
    })
}
