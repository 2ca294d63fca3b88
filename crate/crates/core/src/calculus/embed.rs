use serde::Serialize;

use crate::error::{LipError, Result};
use crate::jet::{certify, floor_gamma, LipCertificate, LipJet};
use crate::optimize::log_infimum;
use crate::tensor::{factorial_f64, NormFamily};

/// Which embedding inequality a constant comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EmbedVariant {
    /// Any domain: `M_{γ,γ'}`.
    General,
    /// Convex domains: `m_{γ,γ'}`.
    Convex,
    /// Domains of diameter at most `diameter`.
    Bounded { diameter: f64 },
}

/// A constant `C ≥ 1` with `‖f‖_{Lip-γ'} ≤ C ‖f‖_{Lip-γ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbedConstant {
    pub gamma: f64,
    pub gamma_prime: f64,
    pub value: f64,
    pub variant: EmbedVariant,
    /// Minimizing `δ` for the variants defined by an infimum.
    pub delta_star: Option<f64>,
}

fn check_grades(gamma: f64, gamma_prime: f64) -> Result<()> {
    if !(gamma_prime > 0.0 && gamma_prime < gamma && gamma.is_finite()) {
        return Err(LipError::invalid(format!(
            "need 0 < γ' < γ, got γ = {gamma}, γ' = {gamma_prime}"
        )));
    }
    Ok(())
}

/// `max(1, Σ_{j=⌊γ'⌋+1}^{⌊γ⌋} L^{j−γ'}/(j−⌊γ'⌋)! + L^{γ−γ'})`.
fn bounded_factor(gamma: f64, gamma_prime: f64, diameter: f64) -> f64 {
    let (n, np) = (floor_gamma(gamma), floor_gamma(gamma_prime));
    let sum: f64 = (np + 1..=n)
        .map(|j| diameter.powf(j as f64 - gamma_prime) / factorial_f64(j - np))
        .sum();
    (sum + diameter.powf(gamma - gamma_prime)).max(1.0)
}

/// `max(1, max_{0≤k≤⌊γ⌋} δ^{−(γ−k)} (1 + Σ_{j=0}^{⌊γ⌋−k} δ^j/j!))`.
fn far_factor(gamma: f64, delta: f64) -> f64 {
    let n = floor_gamma(gamma);
    (0..=n)
        .map(|k| {
            let tail: f64 = (0..=n - k).map(|j| delta.powi(j as i32) / factorial_f64(j)).sum();
            delta.powf(-(gamma - k as f64)) * (1.0 + tail)
        })
        .fold(1.0, f64::max)
}

fn convex_far_factor(gamma: f64, delta: f64) -> f64 {
    let eps = gamma - floor_gamma(gamma) as f64;
    (2.0 / delta.powf(eps)).max(1.0)
}

pub fn embed_constant(gamma: f64, gamma_prime: f64, variant: EmbedVariant) -> Result<EmbedConstant> {
    check_grades(gamma, gamma_prime)?;
    let (value, delta_star) = match variant {
        EmbedVariant::General => {
            let best = log_infimum(
                |d| bounded_factor(gamma, gamma_prime, 2.0 * d) * far_factor(gamma_prime, d),
                &[0.5],
            );
            (best.value, Some(best.argmin))
        }
        EmbedVariant::Convex => {
            let np = floor_gamma(gamma_prime) as f64;
            let exponent = (np + 1.0).min(gamma) - gamma_prime;
            let best = log_infimum(
                |d| (2.0 * d).powf(exponent).max(1.0) * convex_far_factor(gamma_prime, d),
                &[0.5],
            );
            (best.value, Some(best.argmin))
        }
        EmbedVariant::Bounded { diameter } => {
            if !(diameter >= 0.0) {
                return Err(LipError::invalid(format!("diameter must be ≥ 0, got {diameter}")));
            }
            (bounded_factor(gamma, gamma_prime, diameter), None)
        }
    };
    Ok(EmbedConstant {
        gamma,
        gamma_prime,
        value,
        variant,
        delta_star,
    })
}

/// `2^{γ'} e (1 + e^{1/2})`, the value of the general product at `δ = 1/2` bounded above.
pub fn general_embed_cap(gamma_prime: f64) -> f64 {
    2f64.powf(gamma_prime) * std::f64::consts::E * (1.0 + 0.5f64.exp())
}

/// The multiplier turning a bound `C` on every `B(x, δ) ∩ U` into a global one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Localization {
    General,
    Convex,
}

pub fn localization_factor(gamma: f64, delta: f64, kind: Localization) -> Result<f64> {
    if !(delta > 0.0) || !(gamma > 0.0) {
        return Err(LipError::invalid(format!(
            "localization needs γ > 0 and δ > 0, got γ = {gamma}, δ = {delta}"
        )));
    }
    Ok(match kind {
        Localization::General => far_factor(gamma, delta),
        Localization::Convex => convex_far_factor(gamma, delta),
    })
}

/// `(1 + e^δ) max(1, δ^{−γ})`, a closed-form upper bound on the general factor.
pub fn localization_bound(gamma: f64, delta: f64) -> f64 {
    (1.0 + delta.exp()) * delta.powf(-gamma).max(1.0)
}

/// Lip-γ norm bound of a `(⌊γ⌋+1)`-times differentiable map on a convex set
/// from the sup norms `‖f‖∞, ..., ‖f^{⌊γ⌋+1}‖∞`.
pub fn smooth_lip_bound(sups: &[f64], gamma: f64) -> Result<EmbedConstant> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(LipError::invalid(format!("γ must be positive, got {gamma}")));
    }
    let n = floor_gamma(gamma);
    if sups.len() != n + 2 {
        return Err(LipError::dims(format!(
            "γ = {gamma} needs {} sup norms, got {}",
            n + 2,
            sups.len()
        )));
    }
    if sups.iter().any(|s| !(*s >= 0.0)) {
        return Err(LipError::invalid("sup norms must be non-negative"));
    }
    let eps = gamma - n as f64;
    let low = sups[..=n].iter().fold(0.0f64, |m, s| m.max(*s));
    let top = sups[n + 1];
    let f = |d: f64| low.max(top * (2.0 * d).powf(1.0 - eps)) * convex_far_factor(gamma, d);
    // δ = 2^{1/ε} is where the second factor reaches 1
    let mut candidates = vec![0.5];
    let knee = 2f64.powf(1.0 / eps);
    if knee.is_finite() {
        candidates.push(knee);
    }
    let best = log_infimum(f, &candidates);
    Ok(EmbedConstant {
        gamma,
        gamma_prime: gamma,
        value: best.value,
        variant: EmbedVariant::Convex,
        delta_star: Some(best.argmin),
    })
}

/// Output of [`embed`]: the truncated jet, its certificate and the bound it must meet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding {
    #[serde(skip)]
    pub jet: LipJet,
    pub certificate: LipCertificate,
    pub source: LipCertificate,
    pub constant: EmbedConstant,
    pub bound: f64,
    pub holds: bool,
}

/// Truncates to `(f^0, ..., f^{⌊γ'⌋})`, re-certifies at `γ'` and compares with
/// `M_{γ,γ'} · M`.
pub fn embed(jet: &LipJet, gamma_prime: f64, fam: &NormFamily) -> Result<Embedding> {
    check_grades(jet.gamma(), gamma_prime)?;
    fam.require_projective()?;
    let source = certify(jet, fam)?;
    let truncated = jet.truncate(gamma_prime)?;
    let certificate = certify(&truncated, fam)?;
    let constant = embed_constant(jet.gamma(), gamma_prime, EmbedVariant::General)?;
    let bound = constant.value * source.m;
    Ok(Embedding {
        jet: truncated,
        holds: certificate.m <= bound * (1.0 + 1e-12),
        certificate,
        source,
        constant,
        bound,
    })
}

/// `max(δ^γ, δ^{γ−⌊γ'⌋}, δ^{γ−γ'} (Σ_{j=⌊γ'⌋+1}^{⌊γ⌋} 2^{j−γ'}/(j−⌊γ'⌋)! + 2^{γ−γ'}))`.
pub fn quantitative_factor(gamma: f64, gamma_prime: f64, delta: f64) -> Result<f64> {
    check_grades(gamma, gamma_prime)?;
    if !(delta > 0.0) {
        return Err(LipError::invalid(format!("δ must be positive, got {delta}")));
    }
    let (n, np) = (floor_gamma(gamma), floor_gamma(gamma_prime));
    let inner: f64 = (np + 1..=n)
        .map(|j| 2f64.powf(j as f64 - gamma_prime) / factorial_f64(j - np))
        .sum::<f64>()
        + 2f64.powf(gamma - gamma_prime);
    Ok(delta
        .powf(gamma)
        .max(delta.powf(gamma - np as f64))
        .max(delta.powf(gamma - gamma_prime) * inner))
}

/// Local Lip-γ' estimate near a point where every level vanishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalEstimate {
    pub x0: usize,
    pub delta: f64,
    pub gamma_prime: f64,
    /// Certificate of the full jet at `γ`.
    pub m: f64,
    pub bound: f64,
    /// Certificate of the truncated jet on `B(x0, δ)` at `γ'`.
    pub local: f64,
    pub ball_points: usize,
    pub holds: bool,
}

/// Absolute tolerance for "the level vanishes at `x0`".
pub const VANISHING_TOL: f64 = 1e-12;

pub fn localize_vanishing(
    jet: &LipJet,
    x0: usize,
    gamma_prime: f64,
    delta: f64,
    fam: &NormFamily,
) -> Result<LocalEstimate> {
    fam.require_projective()?;
    if x0 >= jet.len() {
        return Err(LipError::UnknownPoint { index: x0 });
    }
    if let Some(k) = jet.levels_at(x0).iter().position(|l| l.max_abs() > VANISHING_TOL) {
        return Err(LipError::invalid(format!(
            "level {k} does not vanish at point {x0}; the local estimate needs f^k(x0) = 0 for all k"
        )));
    }
    let factor = quantitative_factor(jet.gamma(), gamma_prime, delta)?;
    let m = certify(jet, fam)?.m;
    let centre = &jet.points()[x0];
    let inside: Vec<usize> = (0..jet.len())
        .filter(|&i| {
            let h: Vec<f64> = jet.points()[i].iter().zip(centre).map(|(a, b)| a - b).collect();
            fam.vector_norm(&h) <= delta
        })
        .collect();
    let local = certify(&jet.restrict(&inside)?.truncate(gamma_prime)?, fam)?.m;
    let bound = m * factor;
    Ok(LocalEstimate {
        x0,
        delta,
        gamma_prime,
        m,
        bound,
        local,
        ball_points: inside.len(),
        holds: local <= bound * (1.0 + 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{grid_1d, jet_of_polynomial, lip_grade};
    use crate::poly::{PolyMap, Polynomial};

    fn cubic() -> LipJet {
        let p = PolyMap::scalar(Polynomial::from_terms(1, &[(1.0, &[3])]).unwrap());
        jet_of_polynomial(&p, grid_1d(-1.0, 1.0, 101), lip_grade(2.0).unwrap()).unwrap()
    }

    #[test]
    fn caps_hold() {
        for &(g, gp) in &[(2.0, 1.0), (6.0, 5.5), (0.7, 0.2), (3.0, 0.5)] {
            let c = embed_constant(g, gp, EmbedVariant::General).unwrap();
            assert!(c.value >= 1.0 && c.value <= general_embed_cap(gp), "{c:?}");
            let m = embed_constant(g, gp, EmbedVariant::Convex).unwrap();
            assert!(m.value >= 1.0 && m.value <= 4.0, "{m:?}");
        }
    }

    #[test]
    fn cap_value_for_unit_target() {
        // 2 e (1 + e^{1/2})
        assert!((general_embed_cap(1.0) - 14.400_0).abs() < 1e-3);
    }

    #[test]
    fn bounded_single_point() {
        let c = embed_constant(2.5, 1.5, EmbedVariant::Bounded { diameter: 0.0 }).unwrap();
        assert_eq!(c.value, 1.0);
        assert!(embed_constant(1.0, 1.0, EmbedVariant::General).is_err());
    }

    #[test]
    fn localization_values() {
        // ⌊1⌋ = 0 here, so only k = 0 contributes: 1 · (1 + 1)
        assert_eq!(localization_factor(1.0, 1.0, Localization::General).unwrap(), 2.0);
        assert_eq!(localization_factor(1.5, 4.0, Localization::Convex).unwrap(), 1.0);
        for &(g, d) in &[(0.5, 0.1), (2.5, 0.7), (4.0, 3.0)] {
            let f = localization_factor(g, d, Localization::General).unwrap();
            assert!(f <= localization_bound(g, d));
        }
        assert!(localization_factor(1.0, 0.0, Localization::General).is_err());
    }

    #[test]
    fn smooth_bound_cases() {
        let s = smooth_lip_bound(&[2.0, 2.0, 2.0], 1.5).unwrap();
        assert!(s.value <= 8.0 + 1e-12);
        let flat = smooth_lip_bound(&[1.0, 3.0, 0.0], 1.3).unwrap();
        assert!((flat.value - 3.0).abs() < 1e-9, "{flat:?}");
        let int = smooth_lip_bound(&[1.0, 2.0, 5.0], 2.0).unwrap();
        assert!((int.value - 5.0).abs() < 1e-9, "{int:?}");
    }

    #[test]
    fn embed_cubic() {
        let e = embed(&cubic(), 1.0, &NormFamily::ellinf()).unwrap();
        assert!(e.holds);
        // |x^3 - y^3| / |x - y| = x^2 + xy + y^2 ≤ 3 on [-1, 1]
        assert!(e.certificate.m <= 3.0 + 1e-12);
    }

    #[test]
    fn quantitative_cubic() {
        let jet = cubic();
        let x0 = jet.find_point(&[0.0]).unwrap();
        for &d in &[0.5, 0.25, 0.125] {
            let est = localize_vanishing(&jet, x0, 1.0, d, &NormFamily::ellinf()).unwrap();
            assert!(est.holds, "{est:?}");
            assert!((est.bound - 3.0 * est.m * d).abs() < 1e-12);
        }
        assert!(localize_vanishing(&jet, 0, 1.0, 0.5, &NormFamily::ellinf()).is_err());
    }
}
