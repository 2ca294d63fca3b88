use serde::{Deserialize, Serialize};

use super::{check_order, matrix_q_norm, unravel, NormFamily, SymTensor};
use crate::error::{LipError, Result};

/// A dense `rows × cols` real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(LipError::dims(format!(
                "{rows}×{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LipError::dims("ragged matrix rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, entries }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(LipError::dims(format!(
                "{}×{} matrix applied to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LipError::dims(format!(
                "cannot compose {}×{} after {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut entries = vec![0.0; self.rows * other.cols];
        for r in 0..self.rows {
            for m in 0..self.cols {
                let a = self.get(r, m);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    entries[r * other.cols + c] += a * other.get(m, c);
                }
            }
        }
        Self::new(self.rows, other.cols, entries)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// Operator norm induced by the family's order-1 norm on both sides.
    ///
    /// The scale `s_1` cancels, so this is the plain `ℓq → ℓq` norm.
    pub fn subordinate_norm(&self, fam: &NormFamily) -> f64 {
        matrix_q_norm(self.rows, self.cols, &self.entries, fam.kind())
    }
}

#[derive(Serialize, Deserialize)]
struct LinearRepr {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<f64>>,
}

impl Serialize for LinearMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LinearRepr {
            rows: self.rows,
            cols: self.cols,
            entries: self.to_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = LinearRepr::deserialize(d)?;
        let m = LinearMap::from_rows(&r.entries).map_err(serde::de::Error::custom)?;
        if m.rows != r.rows || (r.rows > 0 && m.cols != r.cols) {
            return Err(serde::de::Error::custom("declared shape disagrees with entries"));
        }
        Ok(m)
    }
}

/// `u^{⊗k}`, materialized as the `rows^k × cols^k` Kronecker power.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMap {
    order: usize,
    out_dim: usize,
    matrix: LinearMap,
}

/// Builds `u^{⊗k}: (v_1 ⊗ ... ⊗ v_k) ↦ u(v_1) ⊗ ... ⊗ u(v_k)`, extended linearly.
pub fn lift_linear_map(u: &LinearMap, k: usize) -> Result<LiftedMap> {
    check_order(k)?;
    let (rows, cols) = (u.rows.pow(k as u32), u.cols.pow(k as u32));
    let mut entries = vec![0.0; rows * cols];
    let mut ri = vec![0; k];
    let mut ci = vec![0; k];
    for r in 0..rows {
        unravel(r, u.rows.max(1), &mut ri);
        for c in 0..cols {
            unravel(c, u.cols.max(1), &mut ci);
            entries[r * cols + c] = ri.iter().zip(&ci).map(|(&a, &b)| u.get(a, b)).product();
        }
    }
    Ok(LiftedMap {
        order: k,
        out_dim: u.rows,
        matrix: LinearMap::new(rows, cols, entries)?,
    })
}

impl LiftedMap {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &LinearMap {
        &self.matrix
    }

    pub fn apply(&self, t: &SymTensor) -> Result<SymTensor> {
        if t.order() != self.order || t.coeffs().len() != self.matrix.cols {
            return Err(LipError::dims("lifted map applied to tensor of wrong shape"));
        }
        let out = self.matrix.apply(t.coeffs())?;
        SymTensor::new(self.out_dim, self.order, out)
    }

    /// `‖u^{⊗k}‖` from `(E^{⊗k}, fam_in)` to `(F^{⊗k}, fam_out)`.
    pub fn op_norm(&self, fam_in: &NormFamily, fam_out: &NormFamily) -> Result<f64> {
        if fam_in.kind() != fam_out.kind() {
            return Err(LipError::invalid("lifted norms need families of the same kind"));
        }
        fam_in.covers(self.order)?;
        fam_out.covers(self.order)?;
        let raw = matrix_q_norm(
            self.matrix.rows,
            self.matrix.cols,
            &self.matrix.entries,
            fam_in.kind(),
        );
        Ok(raw * fam_out.scale(self.order) / fam_in.scale(self.order))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_acts_factorwise() {
        let u = LinearMap::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0], vec![3.0, 1.0]]).unwrap();
        let v1 = SymTensor::vector(vec![1.0, -1.0]).unwrap();
        let v2 = SymTensor::vector(vec![2.0, 0.5]).unwrap();
        let lifted = lift_linear_map(&u, 2).unwrap();
        let lhs = lifted.apply(&v1.tensor_product(&v2).unwrap()).unwrap();
        let uv1 = SymTensor::vector(u.apply(v1.coeffs()).unwrap()).unwrap();
        let uv2 = SymTensor::vector(u.apply(v2.coeffs()).unwrap()).unwrap();
        assert_eq!(lhs, uv1.tensor_product(&uv2).unwrap());
    }

    #[test]
    fn lift_is_functorial() {
        let u = LinearMap::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let v = LinearMap::from_rows(&[vec![0.0, 1.0], vec![3.0, 1.0]]).unwrap();
        let uv = lift_linear_map(&u.compose(&v).unwrap(), 3).unwrap();
        let composed = lift_linear_map(&u, 3)
            .unwrap()
            .matrix()
            .compose(lift_linear_map(&v, 3).unwrap().matrix())
            .unwrap();
        for (a, b) in uv.matrix().entries().iter().zip(composed.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ellinf_lift_norm_is_power() {
        let u = LinearMap::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.25]]).unwrap();
        let fam = NormFamily::ellinf();
        let n = u.subordinate_norm(&fam);
        let lifted = lift_linear_map(&u, 3).unwrap().op_norm(&fam, &fam).unwrap();
        assert!((lifted - n.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn subordinate_norm_zero_iff_zero() {
        let fam = NormFamily::ell1();
        assert_eq!(LinearMap::zeros(2, 3).subordinate_norm(&fam), 0.0);
        assert!(LinearMap::identity(2).subordinate_norm(&fam) > 0.0);
    }

    #[test]
    fn json_shape() {
        let u = LinearMap::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"rows":1,"cols":2,"entries":[[1.0,2.0]]}"#);
        assert_eq!(serde_json::from_str::<LinearMap>(&s).unwrap(), u);
    }
}
