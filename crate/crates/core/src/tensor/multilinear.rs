use serde::{Deserialize, Serialize};

use super::{check_order, LinearMap, NormFamily, SymTensor, SYMMETRY_RTOL};
use crate::error::{LipError, Result};

/// A `k`-linear map `(R^d)^k → R^m`, stored as `m` stacked order-`k` tensors.
///
/// `coeffs[r * d^k + flat(i_1..i_k)]` is the `r`-th output coordinate on
/// `e_{i_1} ⊗ ... ⊗ e_{i_k}`. Order 0 is a plain vector in `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilinearMap {
    out_dim: usize,
    dim: usize,
    order: usize,
    coeffs: Vec<f64>,
}

impl MultilinearMap {
    pub fn new(out_dim: usize, dim: usize, order: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_order(order)?;
        let expected = out_dim * dim.pow(order as u32);
        if coeffs.len() != expected {
            return Err(LipError::dims(format!(
                "{out_dim}-valued order-{order} map on R^{dim} needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            out_dim,
            dim,
            order,
            coeffs,
        })
    }

    pub fn zeros(out_dim: usize, dim: usize, order: usize) -> Result<Self> {
        Self::new(out_dim, dim, order, vec![0.0; out_dim * dim.pow(order as u32)])
    }

    pub fn from_components(dim: usize, order: usize, parts: &[SymTensor]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(parts.len() * dim.pow(order as u32));
        for p in parts {
            if p.dim() != dim || p.order() != order {
                return Err(LipError::dims("component tensor has the wrong shape"));
            }
            coeffs.extend_from_slice(p.coeffs());
        }
        Self::new(parts.len(), dim, order, coeffs)
    }

    pub fn from_linear(u: &LinearMap) -> Self {
        Self {
            out_dim: u.rows(),
            dim: u.cols(),
            order: 1,
            coeffs: u.entries().to_vec(),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn block(&self) -> usize {
        self.dim.pow(self.order as u32)
    }

    pub fn component(&self, r: usize) -> SymTensor {
        let b = self.block();
        SymTensor::new(self.dim, self.order, self.coeffs[r * b..(r + 1) * b].to_vec())
            .expect("block has tensor shape")
    }

    pub fn components(&self) -> Vec<SymTensor> {
        (0..self.out_dim).map(|r| self.component(r)).collect()
    }

    /// Order-1 maps as matrices.
    pub fn to_linear(&self) -> Result<LinearMap> {
        if self.order != 1 {
            return Err(LipError::invalid("only order-1 maps are matrices"));
        }
        LinearMap::new(self.out_dim, self.dim, self.coeffs.clone())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if (self.out_dim, self.dim, self.order) != (other.out_dim, other.dim, other.order) {
            return Err(LipError::dims(format!(
                "multilinear shapes ({}, {}, {}) and ({}, {}, {}) differ",
                self.out_dim, self.dim, self.order, other.out_dim, other.dim, other.order
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|a| *a *= factor);
        out
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) -> Result<()> {
        self.same_shape(other)?;
        self.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    pub fn symmetrize(&self) -> Self {
        if self.order <= 1 {
            return self.clone();
        }
        let coeffs = self
            .components()
            .iter()
            .flat_map(|t| t.symmetrize().into_coeffs())
            .collect();
        Self { coeffs, ..self.clone() }
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.components()
            .iter()
            .map(SymTensor::symmetry_defect)
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry_defect() <= SYMMETRY_RTOL * self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Contracts the trailing `count` slots against `h`.
    pub fn contract_trailing(&self, h: &[f64], count: usize) -> Result<Self> {
        if h.len() != self.dim || count > self.order {
            return Err(LipError::dims("contraction vector or slot count out of range"));
        }
        let mut cur = self.coeffs.clone();
        for _ in 0..count {
            cur = cur
                .chunks(self.dim)
                .map(|chunk| chunk.iter().zip(h).map(|(a, b)| a * b).sum())
                .collect();
        }
        Self::new(self.out_dim, self.dim, self.order - count, cur)
    }

    /// `f(v_1, ..., v_k)`.
    pub fn eval(&self, vectors: &[&[f64]]) -> Result<Vec<f64>> {
        if vectors.len() != self.order {
            return Err(LipError::dims("wrong number of arguments for multilinear map"));
        }
        let mut cur = self.clone();
        for v in vectors.iter().rev() {
            cur = cur.contract_trailing(v, 1)?;
        }
        Ok(cur.coeffs)
    }

    /// Applies the map to a tensor in `(R^d)^{⊗k}` given by its coefficients.
    pub fn apply_tensor(&self, t: &[f64]) -> Result<Vec<f64>> {
        let b = self.block();
        if t.len() != b {
            return Err(LipError::dims("tensor argument has the wrong size"));
        }
        Ok(self
            .coeffs
            .chunks(b.max(1))
            .map(|row| row.iter().zip(t).map(|(a, x)| a * x).sum())
            .collect())
    }

    /// `u ∘ f` for a linear `u: R^m → R^{m'}`.
    pub fn postcompose(&self, u: &LinearMap) -> Result<Self> {
        if u.cols() != self.out_dim {
            return Err(LipError::dims("postcomposed matrix has the wrong width"));
        }
        let b = self.block();
        let mut coeffs = vec![0.0; u.rows() * b];
        for r in 0..u.rows() {
            for s in 0..self.out_dim {
                let a = u.get(r, s);
                if a == 0.0 {
                    continue;
                }
                for (o, c) in coeffs[r * b..(r + 1) * b]
                    .iter_mut()
                    .zip(&self.coeffs[s * b..(s + 1) * b])
                {
                    *o += a * c;
                }
            }
        }
        Self::new(u.rows(), self.dim, self.order, coeffs)
    }

    /// `f ∘ (p × ... × p)` for a linear `p: R^{d'} → R^d`, one slot at a time.
    pub fn precompose(&self, p: &LinearMap) -> Result<Self> {
        if p.rows() != self.dim {
            return Err(LipError::dims("precomposed matrix has the wrong height"));
        }
        let mut data = self.coeffs.clone();
        let d_new = p.cols();
        for slot in 0..self.order {
            let pre = self.out_dim * d_new.pow(slot as u32);
            let post = self.dim.pow((self.order - slot - 1) as u32);
            data = replace_slot(&data, pre, self.dim, post, p.entries(), d_new);
        }
        Self::new(self.out_dim, d_new, self.order, data)
    }

    /// Operator norm under `fam` (see [`NormFamily::level_norm`]).
    pub fn op_norm(&self, fam: &NormFamily) -> f64 {
        fam.level_norm(self.out_dim, self.order, &self.coeffs)
    }
}

/// Contracts the middle axis of a `[pre, e, post]` array with an `e × a` matrix,
/// giving a `[pre, a, post]` array.
pub(crate) fn replace_slot(
    data: &[f64],
    pre: usize,
    e: usize,
    post: usize,
    mat: &[f64],
    a: usize,
) -> Vec<f64> {
    debug_assert_eq!(data.len(), pre * e * post);
    debug_assert_eq!(mat.len(), e * a);
    let mut out = vec![0.0; pre * a * post];
    for p in 0..pre {
        for i in 0..e {
            let src = &data[(p * e + i) * post..(p * e + i + 1) * post];
            if src.iter().all(|x| *x == 0.0) {
                continue;
            }
            for j in 0..a {
                let m = mat[i * a + j];
                if m == 0.0 {
                    continue;
                }
                let dst = &mut out[(p * a + j) * post..(p * a + j + 1) * post];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += m * s;
                }
            }
        }
    }
    out
}
