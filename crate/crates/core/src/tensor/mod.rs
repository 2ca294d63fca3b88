//! Dense tensor algebra over `R^d`.
//!
//! Every tensor stores all `d^k` coefficients in row-major multi-index order,
//! symmetric or not. Orders are capped at [`MAX_ORDER`] so that enumerating the
//! symmetric group stays cheap (at most 720 permutations).

mod linear;
mod multilinear;
mod norm;
mod permutation;
mod scalar;

pub use linear::{lift_linear_map, LiftedMap, LinearMap};
pub use multilinear::MultilinearMap;
pub(crate) use multilinear::replace_slot;
pub use norm::{
    matrix_q_norm, verify_norm_properties, NormFamily, NormKind, NormProperty, PropertyCheck,
    PropertyReport, PropertyWitness,
};
pub use permutation::Permutation;
pub use scalar::Scalar;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};

/// Largest tensor order the crate will build or symmetrize.
pub const MAX_ORDER: usize = 6;

/// Relative tolerance for the float-mode symmetry invariant.
pub const SYMMETRY_RTOL: f64 = 1e-12;

pub fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(LipError::OrderCap {
            order,
            max: MAX_ORDER,
        })
    } else {
        Ok(())
    }
}

/// Writes the multi-index of `flat` (row-major, base `dim`) into `out`.
pub(crate) fn unravel(mut flat: usize, dim: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
}

pub(crate) fn ravel(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

/// Non-decreasing multi-indices of length `order` over `0..dim`, i.e. the
/// equivalence classes of coefficients of a symmetric tensor.
pub(crate) fn sorted_classes(dim: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            rec(dim, left - 1, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, order, 0, &mut Vec::with_capacity(order), &mut out);
    out
}

/// Sorted classes of `(R^dim)^{⊗order}` plus, for every flat index, the
/// position of its class.
pub(crate) struct ClassTable {
    pub classes: Vec<Vec<usize>>,
    pub of: Vec<usize>,
}

/// Cached [`ClassTable`] for a shape.
pub(crate) fn class_table(dim: usize, order: usize) -> Arc<ClassTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<ClassTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("class cache poisoned").get(&(dim, order)) {
        return t.clone();
    }
    let classes = sorted_classes(dim, order);
    let lookup: HashMap<&[usize], usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i))
        .collect();
    let len = dim.pow(order as u32);
    let mut idx = vec![0; order];
    let mut of = Vec::with_capacity(len);
    for flat in 0..len {
        unravel(flat, dim, &mut idx);
        idx.sort_unstable();
        of.push(lookup[idx.as_slice()]);
    }
    drop(lookup);
    let table = Arc::new(ClassTable { classes, of });
    cache
        .lock()
        .expect("class cache poisoned")
        .insert((dim, order), table.clone());
    table
}

/// A dense order-`k` tensor over `R^dim`.
///
/// Despite the name, symmetry is not enforced: it is a checked property
/// ([`SymTensor::is_symmetric`]) that the jet machinery requires of its levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor<T: Scalar = f64> {
    dim: usize,
    order: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> SymTensor<T> {
    pub fn new(dim: usize, order: usize, coeffs: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(LipError::invalid("tensor dimension must be positive"));
        }
        check_order(order)?;
        let expected = dim.pow(order as u32);
        if coeffs.len() != expected {
            return Err(LipError::dims(format!(
                "tensor of dim {dim} and order {order} needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { dim, order, coeffs })
    }

    pub fn zeros(dim: usize, order: usize) -> Result<Self> {
        Self::new(dim, order, vec![T::zero(); dim.pow(order as u32)])
    }

    pub fn scalar(dim: usize, value: T) -> Self {
        Self {
            dim,
            order: 0,
            coeffs: vec![value],
        }
    }

    pub fn vector(values: Vec<T>) -> Result<Self> {
        let dim = values.len();
        Self::new(dim, 1, values)
    }

    /// The elementary tensor `e_{i1} ⊗ ... ⊗ e_{ik}` (indices are 0-based).
    pub fn basis(dim: usize, idx: &[usize]) -> Result<Self> {
        if idx.iter().any(|&i| i >= dim) {
            return Err(LipError::invalid(format!("basis index {idx:?} out of range for dim {dim}")));
        }
        let mut t = Self::zeros(dim, idx.len())?;
        t.coeffs[ravel(idx, dim)] = T::one();
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.coeffs[ravel(idx, self.dim)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let at = ravel(idx, self.dim);
        self.coeffs[at] = value;
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.order != other.order {
            return Err(LipError::dims(format!(
                "shapes (dim {}, order {}) and (dim {}, order {}) differ",
                self.dim, self.order, other.dim, other.order
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        Ok(Self {
            dim: self.dim,
            order: self.order,
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() - b.clone())
            .collect();
        Ok(Self {
            dim: self.dim,
            order: self.order,
            coeffs,
        })
    }

    pub fn scale(&self, factor: &T) -> Self {
        Self {
            dim: self.dim,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c.clone() * factor.clone()).collect(),
        }
    }

    /// `self ⊗ other`: coefficient `(i, j)` is `self[i] * other[j]`.
    pub fn tensor_product(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(LipError::dims(format!(
                "tensor product of dim {} and dim {}",
                self.dim, other.dim
            )));
        }
        let order = self.order + other.order;
        check_order(order)?;
        let mut coeffs = Vec::with_capacity(self.coeffs.len() * other.coeffs.len());
        for a in &self.coeffs {
            for b in &other.coeffs {
                coeffs.push(a.clone() * b.clone());
            }
        }
        Ok(Self {
            dim: self.dim,
            order,
            coeffs,
        })
    }

    /// The action `σ(x_1 ⊗ ... ⊗ x_k) = x_{σ(1)} ⊗ ... ⊗ x_{σ(k)}`, extended linearly.
    pub fn apply_permutation(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.size() != self.order {
            return Err(LipError::dims(format!(
                "permutation of size {} acting on order-{} tensor",
                sigma.size(),
                self.order
            )));
        }
        let k = self.order;
        let mut out = vec![T::zero(); self.coeffs.len()];
        let mut src = vec![0; k];
        let mut dst = vec![0; k];
        for (flat, c) in self.coeffs.iter().enumerate() {
            unravel(flat, self.dim, &mut src);
            for m in 0..k {
                dst[m] = src[sigma.image(m)];
            }
            out[ravel(&dst, self.dim)] = c.clone();
        }
        Ok(Self {
            dim: self.dim,
            order: k,
            coeffs: out,
        })
    }

    /// `Sym(t) = (1/k!) Σ_{σ ∈ S_k} σ(t)`.
    ///
    /// Coefficients are averaged once per sorted multi-index class and then
    /// scattered, which is the same sum as enumerating `S_k` on the whole tensor.
    pub fn symmetrize(&self) -> Self {
        let k = self.order;
        if k <= 1 {
            return self.clone();
        }
        let perms = Permutation::all(k).expect("order already capped");
        let kfact = T::from_u64(factorial(k)).expect("factorial fits");
        let table = class_table(self.dim, k);
        let mut idx = vec![0; k];
        let avg: Vec<T> = table
            .classes
            .iter()
            .map(|class| {
                let mut acc = T::zero();
                for p in &perms {
                    for m in 0..k {
                        idx[m] = class[p.image(m)];
                    }
                    acc = acc + self.coeffs[ravel(&idx, self.dim)].clone();
                }
                acc / kfact.clone()
            })
            .collect();
        Self {
            dim: self.dim,
            order: k,
            coeffs: table.of.iter().map(|&c| avg[c].clone()).collect(),
        }
    }

    /// Exact symmetry check: every coefficient equals the others in its class.
    pub fn is_symmetric_exact(&self) -> bool {
        if self.order <= 1 {
            return true;
        }
        let table = class_table(self.dim, self.order);
        let reps: Vec<usize> = table.classes.iter().map(|c| ravel(c, self.dim)).collect();
        table
            .of
            .iter()
            .enumerate()
            .all(|(flat, &c)| self.coeffs[flat] == self.coeffs[reps[c]])
    }

    pub fn to_f64(&self) -> SymTensor<f64> {
        SymTensor {
            dim: self.dim,
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect(),
        }
    }
}

impl SymTensor<f64> {
    /// Float-mode symmetry check at relative tolerance [`SYMMETRY_RTOL`].
    pub fn is_symmetric(&self) -> bool {
        self.symmetry_defect() <= SYMMETRY_RTOL * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Largest deviation of a coefficient from its class representative.
    pub fn symmetry_defect(&self) -> f64 {
        if self.order <= 1 {
            return 0.0;
        }
        let table = class_table(self.dim, self.order);
        let reps: Vec<usize> = table.classes.iter().map(|c| ravel(c, self.dim)).collect();
        table
            .of
            .iter()
            .enumerate()
            .map(|(flat, &c)| (self.coeffs[flat] - self.coeffs[reps[c]]).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Contracts the trailing `count` slots against `h`, giving an order `k - count` tensor.
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
        Ok(Self {
            dim: self.dim,
            order: self.order - count,
            coeffs: cur,
        })
    }
}

impl<T: Scalar> Serialize for SymTensor<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SymTensor", 3)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("order", &self.order)?;
        let coeffs: Vec<f64> = self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        st.serialize_field("coeffs", &coeffs)?;
        st.end()
    }
}

#[derive(Deserialize)]
struct TensorRepr {
    dim: usize,
    order: usize,
    coeffs: Vec<f64>,
}

impl<'de> Deserialize<'de> for SymTensor<f64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TensorRepr::deserialize(d)?;
        SymTensor::new(r.dim, r.order, r.coeffs).map_err(serde::de::Error::custom)
    }
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn factorial_f64(n: usize) -> f64 {
    factorial(n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn t(dim: usize, order: usize, c: &[f64]) -> SymTensor {
        SymTensor::new(dim, order, c.to_vec()).unwrap()
    }

    #[test]
    fn basis_product() {
        let e1 = SymTensor::<f64>::basis(2, &[0]).unwrap();
        let e2 = SymTensor::<f64>::basis(2, &[1]).unwrap();
        let p = e1.tensor_product(&e2).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn scalar_unit_law() {
        let v = t(3, 1, &[1.0, -2.0, 0.5]);
        let p = SymTensor::scalar(3, 3.0).tensor_product(&v).unwrap();
        assert_eq!(p, v.scale(&3.0));
    }

    #[test]
    fn bilinear_expansion() {
        let a = t(2, 1, &[1.0, 1.0]);
        let b = t(2, 1, &[1.0, -1.0]);
        assert_eq!(a.tensor_product(&b).unwrap().coeffs(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn product_dimension_mismatch() {
        let a = t(2, 1, &[1.0, 1.0]);
        let b = t(3, 1, &[1.0, 1.0, 1.0]);
        assert!(matches!(a.tensor_product(&b), Err(LipError::DimensionMismatch(_))));
    }

    #[test]
    fn order_cap() {
        assert!(matches!(SymTensor::<f64>::zeros(2, 7), Err(LipError::OrderCap { .. })));
        let a = SymTensor::<f64>::zeros(2, 4).unwrap();
        let b = SymTensor::<f64>::zeros(2, 3).unwrap();
        assert!(a.tensor_product(&b).is_err());
    }

    #[test]
    fn symmetrize_order_two() {
        let e12 = SymTensor::<f64>::basis(2, &[0, 1]).unwrap();
        assert_eq!(e12.symmetrize().coeffs(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn symmetrize_enumerates_s3() {
        type Q = BigRational;
        let t = SymTensor::<Q>::basis(2, &[0, 0, 1]).unwrap();
        let s = t.symmetrize();
        let third = Q::new(1.into(), 3.into());
        let mut expected = SymTensor::<Q>::zeros(2, 3).unwrap();
        for idx in [[0, 0, 1], [0, 1, 0], [1, 0, 0]] {
            expected.set(&idx, third.clone());
        }
        assert_eq!(s, expected);
        assert!(s.is_symmetric_exact());
        assert_eq!(s.symmetrize(), s);
    }

    #[test]
    fn transposition_swaps_factors() {
        let e12 = SymTensor::<f64>::basis(2, &[0, 1]).unwrap();
        let swap = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(e12.apply_permutation(&swap).unwrap(), SymTensor::basis(2, &[1, 0]).unwrap());
        assert_eq!(e12.apply_permutation(&Permutation::identity(2)).unwrap(), e12);
        assert!(e12.apply_permutation(&Permutation::identity(3)).is_err());
    }

    #[test]
    fn contraction_matches_hand_sum() {
        // f[i][j] = i + 2j, contract trailing slot with h = (1, 3)
        let f = t(2, 2, &[0.0, 2.0, 1.0, 3.0]);
        let c = f.contract_trailing(&[1.0, 3.0], 1).unwrap();
        assert_eq!(c.coeffs(), &[6.0, 10.0]);
        let s = f.contract_trailing(&[1.0, 3.0], 2).unwrap();
        assert_eq!(s.coeffs(), &[6.0 + 30.0]);
    }

    #[test]
    fn json_shape() {
        let v = t(2, 1, &[1.0, 2.0]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"dim":2,"order":1,"coeffs":[1.0,2.0]}"#);
        let back: SymTensor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<SymTensor>(r#"{"dim":2,"order":2,"coeffs":[1]}"#).is_err());
    }
}
