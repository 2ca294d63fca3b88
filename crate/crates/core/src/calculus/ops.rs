use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};
use crate::jet::{LipJet, OutputNorm, Pairing, POINT_MATCH_RTOL};
use crate::tensor::{factorial_f64, matrix_q_norm, LinearMap, MultilinearMap, NormFamily, NormKind};

pub(crate) fn same_cloud(f: &LipJet, g: &LipJet) -> Result<()> {
    if f.len() != g.len() || f.dim_in() != g.dim_in() {
        return Err(LipError::dims("jets live on different point clouds"));
    }
    for (i, (p, q)) in f.points().iter().zip(g.points()).enumerate() {
        let scale = 1.0 + p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if p.iter().zip(q).any(|(a, b)| (a - b).abs() > POINT_MATCH_RTOL * scale) {
            return Err(LipError::invalid(format!(
                "point {i} differs between the two jets: {p:?} vs {q:?}"
            )));
        }
    }
    Ok(())
}

fn same_grade(f: &LipJet, g: &LipJet) -> Result<()> {
    if f.gamma() != g.gamma() {
        return Err(LipError::invalid(format!(
            "grades differ: γ = {} and γ = {}",
            f.gamma(),
            g.gamma()
        )));
    }
    Ok(())
}

fn block_sizes(jet: &LipJet, pairing: Pairing) -> Result<Vec<usize>> {
    match jet.output() {
        OutputNorm::Uniform => Ok(vec![jet.dim_out()]),
        OutputNorm::Blocks { sizes, pairing: p } if *p == pairing => Ok(sizes.clone()),
        OutputNorm::Blocks { .. } => Err(LipError::invalid(
            "cannot mix pairings when stacking block-normed jets",
        )),
    }
}

fn stack(a: &MultilinearMap, b: &MultilinearMap) -> Result<MultilinearMap> {
    let mut coeffs = a.coeffs().to_vec();
    coeffs.extend_from_slice(b.coeffs());
    MultilinearMap::new(a.out_dim() + b.out_dim(), a.dim(), a.order(), coeffs)
}

/// `h = (f, g)` with values in `F × G` normed by `pairing`.
pub fn cartesian_product(f: &LipJet, g: &LipJet, pairing: Pairing) -> Result<LipJet> {
    same_cloud(f, g)?;
    same_grade(f, g)?;
    let mut sizes = block_sizes(f, pairing)?;
    sizes.extend(block_sizes(g, pairing)?);
    let levels = f
        .all_levels()
        .iter()
        .zip(g.all_levels())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| stack(x, y)).collect())
        .collect::<Result<_>>()?;
    LipJet::new(f.grade(), f.points().to_vec(), levels)?.with_output(OutputNorm::Blocks { sizes, pairing })
}

/// Output coordinates `range` of a jet, with the uniform output norm.
pub fn project(jet: &LipJet, range: std::ops::Range<usize>) -> Result<LipJet> {
    if range.end > jet.dim_out() || range.is_empty() {
        return Err(LipError::dims(format!(
            "coordinates {range:?} out of range for R^{}",
            jet.dim_out()
        )));
    }
    let levels = jet
        .all_levels()
        .iter()
        .map(|lv| {
            lv.iter()
                .map(|l| {
                    let w = l.dim().pow(l.order() as u32);
                    MultilinearMap::new(
                        range.len(),
                        l.dim(),
                        l.order(),
                        l.coeffs()[range.start * w..range.end * w].to_vec(),
                    )
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    LipJet::new(jet.grade(), jet.points().to_vec(), levels)
}

/// `u ∘ f`, level by level.
pub fn postcompose_linear(u: &LinearMap, jet: &LipJet) -> Result<LipJet> {
    if u.cols() != jet.dim_out() {
        return Err(LipError::dims(format!(
            "a {}×{} matrix cannot follow an R^{}-valued jet",
            u.rows(),
            u.cols(),
            jet.dim_out()
        )));
    }
    let levels = jet
        .all_levels()
        .iter()
        .map(|lv| lv.iter().map(|l| l.postcompose(u)).collect())
        .collect::<Result<_>>()?;
    LipJet::new(jet.grade(), jet.points().to_vec(), levels)
}

/// `f ∘ u` on the points `z`, each of which must satisfy `u(z) ∈ jet.points`.
///
/// Both families must be declared compatible with constant at most 1.
pub fn precompose_linear(
    jet: &LipJet,
    u: &LinearMap,
    points: &[Vec<f64>],
    fam_e: &NormFamily,
    fam_f: &NormFamily,
) -> Result<LipJet> {
    for fam in [fam_e, fam_f] {
        match fam.compatible_constant() {
            Some(c) if c <= 1.0 => {}
            _ => {
                return Err(LipError::MissingNormProperty(format!(
                    "{fam} is not declared compatible with constant ≤ 1"
                )))
            }
        }
    }
    if u.rows() != jet.dim_in() {
        return Err(LipError::dims(format!(
            "u maps into R^{} but the jet lives on R^{}",
            u.rows(),
            jet.dim_in()
        )));
    }
    let levels = points
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let image = u.apply(z)?;
            let at = jet
                .find_point(&image)
                .ok_or(LipError::ImageNotInCloud { index: i, coords: image })?;
            jet.levels_at(at).iter().map(|l| l.precompose(u)).collect()
        })
        .collect::<Result<_>>()?;
    LipJet::new(jet.grade(), points.to_vec(), levels)?.with_output(jet.output().clone())
}

/// A bilinear `B: R^p × R^q → R^r` stored as `coeffs[h * p * q + i * q + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearMap {
    dim_f: usize,
    dim_g: usize,
    dim_h: usize,
    coeffs: Vec<f64>,
}

impl BilinearMap {
    pub fn new(dim_f: usize, dim_g: usize, dim_h: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != dim_f * dim_g * dim_h {
            return Err(LipError::dims(format!(
                "bilinear map {dim_f}×{dim_g}→{dim_h} needs {} coefficients, got {}",
                dim_f * dim_g * dim_h,
                coeffs.len()
            )));
        }
        Ok(Self {
            dim_f,
            dim_g,
            dim_h,
            coeffs,
        })
    }

    /// Multiplication of reals.
    pub fn scalar_product() -> Self {
        Self::new(1, 1, 1, vec![1.0]).expect("shape is fixed")
    }

    /// `(a, b) ↦ ⟨a, b⟩` on `R^d`.
    pub fn inner_product(d: usize) -> Self {
        let mut coeffs = vec![0.0; d * d];
        (0..d).for_each(|i| coeffs[i * d + i] = 1.0);
        Self::new(d, d, 1, coeffs).expect("shape is fixed")
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dim_f, self.dim_g, self.dim_h)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, h: usize, i: usize, j: usize) -> f64 {
        self.coeffs[(h * self.dim_f + i) * self.dim_g + j]
    }

    pub fn apply(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.dim_f || b.len() != self.dim_g {
            return Err(LipError::dims("bilinear arguments have the wrong length"));
        }
        Ok((0..self.dim_h)
            .map(|h| {
                (0..self.dim_f)
                    .map(|i| a[i] * (0..self.dim_g).map(|j| self.get(h, i, j) * b[j]).sum::<f64>())
                    .sum()
            })
            .collect())
    }

    /// Upper bound on `sup ‖B(a, b)‖ / (‖a‖ ‖b‖)` in the family's `ℓq` norm,
    /// through `‖a ⊗ b‖_q = ‖a‖_q ‖b‖_q`. Exact for `ℓ1`.
    pub fn norm(&self, kind: NormKind) -> f64 {
        matrix_q_norm(self.dim_h, self.dim_f * self.dim_g, &self.coeffs, kind)
    }

    pub fn norm_is_exact(kind: NormKind) -> bool {
        matches!(kind, NormKind::L1)
    }

    /// The `(i + j)`-linear map `(v, w) ↦ B(a(v), b(w))` (not symmetrized).
    fn pair(&self, a: &MultilinearMap, b: &MultilinearMap) -> Result<MultilinearMap> {
        let (wa, wb) = (a.dim().pow(a.order() as u32), b.dim().pow(b.order() as u32));
        let mut out = MultilinearMap::zeros(self.dim_h, a.dim(), a.order() + b.order())?;
        let block = wa * wb;
        let data = out.coeffs_mut();
        for h in 0..self.dim_h {
            for i in 0..self.dim_f {
                let ra = &a.coeffs()[i * wa..(i + 1) * wa];
                for j in 0..self.dim_g {
                    let c = self.get(h, i, j);
                    if c == 0.0 {
                        continue;
                    }
                    let rb = &b.coeffs()[j * wb..(j + 1) * wb];
                    for (s, x) in ra.iter().enumerate() {
                        if *x == 0.0 {
                            continue;
                        }
                        let dst = &mut data[h * block + s * wb..h * block + (s + 1) * wb];
                        for (o, y) in dst.iter_mut().zip(rb) {
                            *o += c * x * y;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Levels of `B(f, g)` at one point: `Σ_i C(k, i) Sym(B(f^i ⊗ g^{k−i}))`.
pub fn bilinear_levels(b: &BilinearMap, f: &[MultilinearMap], g: &[MultilinearMap]) -> Result<Vec<MultilinearMap>> {
    let n = f.len().min(g.len()) - 1;
    (0..=n)
        .map(|k| {
            let mut acc = MultilinearMap::zeros(b.dim_h, f[0].dim(), k)?;
            for i in 0..=k {
                let binom = factorial_f64(k) / (factorial_f64(i) * factorial_f64(k - i));
                acc.axpy(binom, &b.pair(&f[i], &g[k - i])?)?;
            }
            Ok(acc.symmetrize())
        })
        .collect()
}

pub fn bilinear_image(b: &BilinearMap, f: &LipJet, g: &LipJet, fam: &NormFamily) -> Result<LipJet> {
    fam.require_projective()?;
    fam.require_symmetric()?;
    same_cloud(f, g)?;
    same_grade(f, g)?;
    if (f.dim_out(), g.dim_out()) != (b.dim_f, b.dim_g) {
        return Err(LipError::dims(format!(
            "B takes R^{} × R^{} but the jets are R^{}- and R^{}-valued",
            b.dim_f,
            b.dim_g,
            f.dim_out(),
            g.dim_out()
        )));
    }
    let levels = (0..f.len())
        .into_par_iter()
        .map(|i| bilinear_levels(b, f.levels_at(i), g.levels_at(i)))
        .collect::<Result<_>>()?;
    LipJet::new(f.grade(), f.points().to_vec(), levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{certify, grid_1d, jet_of_polynomial, lip_grade};
    use crate::poly::{PolyMap, Polynomial};

    fn poly_jet(terms: &[(f64, &[u32])], gamma: f64, pts: Vec<Vec<f64>>) -> LipJet {
        let p = PolyMap::scalar(Polynomial::from_terms(1, terms).unwrap());
        jet_of_polynomial(&p, pts, lip_grade(gamma).unwrap()).unwrap()
    }

    #[test]
    fn product_rule() {
        let t = poly_jet(&[(1.0, &[1])], 2.0, grid_1d(0.0, 1.0, 11));
        let tt = poly_jet(&[(1.0, &[1])], 3.0, grid_1d(0.0, 1.0, 11));
        let h = bilinear_image(&BilinearMap::scalar_product(), &t, &t, &NormFamily::ell1()).unwrap();
        for i in 0..h.len() {
            let x = h.points()[i][0];
            assert!((h.level(i, 1).coeffs()[0] - 2.0 * x).abs() < 1e-15);
        }
        let h3 = bilinear_image(&BilinearMap::scalar_product(), &tt, &tt, &NormFamily::ell1()).unwrap();
        assert_eq!(h3.level(5, 2).coeffs(), &[2.0]);
    }

    #[test]
    fn fourth_power_second_level() {
        let sq = poly_jet(&[(1.0, &[2])], 3.0, vec![vec![1.0], vec![0.5]]);
        let h = bilinear_image(&BilinearMap::scalar_product(), &sq, &sq, &NormFamily::ell1()).unwrap();
        // d²(t⁴)/dt² = 12 t²
        assert!((h.level(0, 2).coeffs()[0] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn product_with_zero_and_projection() {
        let f = poly_jet(&[(1.0, &[3])], 2.0, grid_1d(-1.0, 1.0, 21));
        let z = poly_jet(&[(0.0, &[0])], 2.0, grid_1d(-1.0, 1.0, 21));
        let fam = NormFamily::ellinf();
        let h = cartesian_product(&f, &z, Pairing::Linf).unwrap();
        let (cf, ch) = (certify(&f, &fam).unwrap().m, certify(&h, &fam).unwrap().m);
        assert!((cf - ch).abs() < 1e-12);
        let back = project(&h, 0..1).unwrap();
        assert!(certify(&back, &fam).unwrap().m <= ch + 1e-12);
        let twice = cartesian_product(&f, &f, Pairing::L1).unwrap();
        assert!(certify(&twice, &fam).unwrap().m <= 2.0 * cf + 1e-12);
    }

    #[test]
    fn postcompose_scales() {
        let f = poly_jet(&[(1.0, &[3])], 2.0, grid_1d(-1.0, 1.0, 21));
        let fam = NormFamily::ellinf();
        let m = certify(&f, &fam).unwrap().m;
        let g = postcompose_linear(&LinearMap::from_rows(&[vec![2.0]]).unwrap(), &f).unwrap();
        assert!((certify(&g, &fam).unwrap().m - 2.0 * m).abs() < 1e-12);
        let z = postcompose_linear(&LinearMap::zeros(1, 1), &f).unwrap();
        assert_eq!(certify(&z, &fam).unwrap().m, 0.0);
    }

    #[test]
    fn precompose_doubling() {
        let f = poly_jet(&[(1.0, &[2])], 1.5, grid_1d(-1.0, 1.0, 21));
        let u = LinearMap::from_rows(&[vec![2.0]]).unwrap();
        let zs = grid_1d(-0.5, 0.5, 21);
        let fam = NormFamily::ell1();
        let g = precompose_linear(&f, &u, &zs, &fam, &fam).unwrap();
        for i in 0..g.len() {
            let z = zs[i][0];
            assert!((g.value(i)[0] - 4.0 * z * z).abs() < 1e-12);
            assert!((g.level(i, 1).coeffs()[0] - 8.0 * z).abs() < 1e-12);
        }
        let (mf, mg) = (certify(&f, &fam).unwrap().m, certify(&g, &fam).unwrap().m);
        assert!(mg <= mf * 2f64.powf(1.5) + 1e-12);
        let bad = precompose_linear(&f, &u, &[vec![0.33]], &fam, &fam);
        assert!(matches!(bad, Err(LipError::ImageNotInCloud { index: 0, .. })));
        assert!(precompose_linear(&f, &u, &zs, &NormFamily::ellinf(), &fam).is_err());
    }

    #[test]
    fn bilinear_norms() {
        let b = BilinearMap::inner_product(3);
        assert_eq!(b.norm(NormKind::L1), 1.0);
        assert!(b.norm(NormKind::LInf) >= 3.0 - 1e-12);
    }
}
