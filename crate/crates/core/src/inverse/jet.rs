use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::compose_levels;
use crate::error::{LipError, Result};
use crate::jet::{LipGrade, LipJet};
use crate::linalg;
use crate::smooth::SmoothMap;
use crate::tensor::{factorial_f64, unravel, LinearMap, MultilinearMap};

use super::{derivative_field_levels, solve_local_inverse, InverseProblem};

/// Levels `0..count` of `M ↦ M^{-1}` at `A`, with matrices flattened row-major
/// so that `R^{d×d} = R^{d²}`.
///
/// Level `j` is `H_1, ..., H_j ↦ (−1)^j Σ_σ B H_{σ1} B ... B H_{σj} B`, `B = A^{-1}`.
pub fn inversion_levels(a: &MultilinearMap, count: usize) -> Result<Vec<MultilinearMap>> {
    let dd = a.out_dim();
    let d = (dd as f64).sqrt().round() as usize;
    if d * d != dd || a.order() != 0 {
        return Err(LipError::dims("expected a square matrix as an order-0 level"));
    }
    let b = linalg::inverse(&LinearMap::new(d, d, a.coeffs().to_vec())?)?;
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let slots = dd.pow(j as u32);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let weight = sign * factorial_f64(j);
        let mut coeffs = vec![0.0; dd * slots];
        let mut idx = vec![0; j];
        for flat in 0..slots {
            unravel(flat, dd, &mut idx);
            for r in 0..d {
                for s in 0..d {
                    // B[r,a1] B[b1,a2] ... B[bj,s] with e_l = a_l d + b_l
                    let mut row = r;
                    let mut prod = 1.0;
                    for &e in &idx {
                        prod *= b.get(row, e / d);
                        row = e % d;
                    }
                    prod *= b.get(row, s);
                    coeffs[(r * d + s) * slots + flat] = weight * prod;
                }
            }
        }
        out.push(MultilinearMap::new(dd, dd, j, coeffs)?.symmetrize());
    }
    Ok(out)
}

/// Levels `0..=n` of the local inverse `ψ` at `φ(x)`, given the preimage `x`.
pub fn inverse_levels_at(phi: &dyn SmoothMap, x: &[f64], n: usize) -> Result<Vec<MultilinearMap>> {
    let d = phi.dim_in();
    let mut psi = vec![MultilinearMap::new(d, d, 0, x.to_vec())?];
    if n == 0 {
        return Ok(psi);
    }
    // dφ at ψ(y) as a d²-valued map of x, levels 0..n-1
    let outer = derivative_field_levels(phi, x, n)?;
    let first = inversion_levels(&outer[0], 1)?.remove(0);
    psi.push(MultilinearMap::new(d, d, 1, first.into_coeffs())?);
    for k in 2..=n {
        let h = compose_levels(&outer[..k], &psi[..k])?;
        let inv = inversion_levels(&h[0], k)?;
        let dpsi = compose_levels(&inv, &h)?;
        let top = dpsi[k - 1].coeffs().to_vec();
        psi.push(MultilinearMap::new(d, d, k, top)?.symmetrize());
    }
    Ok(psi)
}

/// The jet of the local inverse on a cloud of targets in `V0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseJet {
    #[serde(skip)]
    pub jet: LipJet,
    pub preimages: Vec<Vec<f64>>,
    pub max_iterations: usize,
    pub max_residual: f64,
}

/// Solves `φ(x) = y` for every target and assembles the levels of `ψ` at grade `γ`.
pub fn inverse_jet(prob: &InverseProblem, targets: Vec<Vec<f64>>, tol: f64) -> Result<InverseJet> {
    let grade = LipGrade::new(prob.gamma())?;
    let solved = targets
        .par_iter()
        .map(|y| solve_local_inverse(prob, y, tol))
        .collect::<Result<Vec<_>>>()?;
    let levels = solved
        .par_iter()
        .map(|s| inverse_levels_at(prob.phi(), &s.x, grade.n))
        .collect::<Result<_>>()?;
    Ok(InverseJet {
        jet: LipJet::new(grade, targets, levels)?,
        max_iterations: solved.iter().map(|s| s.iterations).max().unwrap_or(0),
        max_residual: solved.iter().map(|s| s.residual).fold(0.0, f64::max),
        preimages: solved.into_iter().map(|s| s.x).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::ExprMap;

    #[test]
    fn inverse_of_scalar_matrix() {
        let a = MultilinearMap::new(1, 1, 0, vec![2.0]).unwrap();
        let l = inversion_levels(&a, 4).unwrap();
        // derivatives of 1/t at 2: 1/2, -1/4, 2/8, -6/16
        let want = [0.5, -0.25, 0.25, -0.375];
        for (j, w) in want.iter().enumerate() {
            assert!((l[j].coeffs()[0] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn sine_perturbation_levels() {
        let phi = ExprMap::parse(1, &["x0 + 0.1*sin(x0)"]).unwrap();
        for &x in &[-0.3, 0.0, 0.2] {
            let l = inverse_levels_at(&phi, &[x], 3).unwrap();
            let p1 = 1.0 / (1.0 + 0.1 * f64::cos(x));
            let p2 = 0.1 * x.sin() * p1.powi(3);
            // ψ''' = 0.1 cos ψ ψ'^4 + 0.3 sin ψ ψ'^2 ψ''
            let p3 = 0.1 * x.cos() * p1.powi(4) + 0.3 * x.sin() * p1 * p1 * p2;
            assert!((l[1].coeffs()[0] - p1).abs() < 1e-14);
            assert!((l[2].coeffs()[0] - p2).abs() < 1e-14);
            assert!((l[3].coeffs()[0] - p3).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_map_in_the_plane() {
        let phi = ExprMap::parse(2, &["2*x0 + x1", "x1"]).unwrap();
        let l = inverse_levels_at(&phi, &[0.1, 0.2], 2).unwrap();
        let want = [0.5, -0.5, 0.0, 1.0];
        for (c, w) in l[1].coeffs().iter().zip(want) {
            assert!((c - w).abs() < 1e-15);
        }
        assert!(l[2].max_abs() < 1e-15);
    }
}
