use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::One;

use crate::error::{LipError, Result};
use crate::tensor::{Permutation, SymTensor};

/// Both sides of the shuffle identity for `v_1, ..., v_N` split after `i` slots.
///
/// The left side is
/// `Σ_{σ ∈ S_N} Σ_{τ} v_{τσ(1)} ⊗ ... ⊗ v_{τσ(i)} ⊗ Sym(v_{σ(i+1)} ⊗ ... ⊗ v_{σ(N)})`
/// with `τ` ranging over the bijections of `{σ(1), ..., σ(i)}`. The right side is
/// `i!(N−i)! Σ_{r_1 < ... < r_i} Σ_{τ} v_{τ(r_1)} ⊗ ... ⊗ v_{τ(r_i)} ⊗ v_{r_{i+1}} ⊗ ... ⊗ v_{r_N}`.
///
/// The two agree exactly when the tail has at most one slot. In general the
/// left side equals the right side with its last `N − i` slots symmetrized,
/// which is the form the identity is used in (against symmetric maps).
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleCheck {
    pub n: usize,
    pub i: usize,
    pub lhs: SymTensor<BigRational>,
    pub rhs: SymTensor<BigRational>,
    /// `(Id^{⊗i} ⊗ Sym)(rhs)`.
    pub rhs_tail_symmetrized: SymTensor<BigRational>,
    pub verbatim_equal: bool,
    pub tail_symmetrized_equal: bool,
}

fn word(vectors: &[Vec<BigRational>], order: &[usize]) -> Result<SymTensor<BigRational>> {
    let d = vectors[0].len();
    order.iter().try_fold(SymTensor::scalar(d, BigRational::one()), |acc, &r| {
        acc.tensor_product(&SymTensor::vector(vectors[r].clone())?)
    })
}

/// Sum of `v_{π(1)} ⊗ ... ⊗ v_{π(|S|)}` over all orderings `π` of the set `S`.
fn orderings_sum(vectors: &[Vec<BigRational>], set: &[usize]) -> Result<SymTensor<BigRational>> {
    let d = vectors[0].len();
    let mut acc = SymTensor::zeros(d, set.len())?;
    for p in Permutation::all(set.len())? {
        let order: Vec<usize> = (0..set.len()).map(|m| set[p.image(m)]).collect();
        acc = acc.add(&word(vectors, &order)?)?;
    }
    Ok(acc)
}

/// Averages `t` over the permutations of its last `order − head` slots.
pub fn symmetrize_tail(t: &SymTensor<BigRational>, head: usize) -> Result<SymTensor<BigRational>> {
    let k = t.order();
    if head >= k.saturating_sub(1) {
        return Ok(t.clone());
    }
    let tail = Permutation::all(k - head)?;
    let count = BigRational::from_integer(tail.len().into());
    let mut acc = SymTensor::zeros(t.dim(), k)?;
    for p in &tail {
        let images: Vec<usize> = (0..head).chain((0..k - head).map(|m| head + p.image(m))).collect();
        acc = acc.add(&t.apply_permutation(&Permutation::new(images)?)?)?;
    }
    Ok(acc.scale(&(BigRational::one() / count)))
}

fn mask_of(set: &[usize]) -> u32 {
    set.iter().fold(0, |m, &r| m | (1 << r))
}

pub fn sym_group_identity_check(vectors: &[Vec<BigRational>], i: usize) -> Result<ShuffleCheck> {
    let n = vectors.len();
    if !(1..=5).contains(&n) || !(1..=n).contains(&i) {
        return Err(LipError::invalid(format!("need 1 ≤ i ≤ N ≤ 5, got i = {i}, N = {n}")));
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(LipError::dims("vectors must share one positive dimension"));
    }

    // Left side: every σ ∈ S_N contributes head(σ(1..i)) ⊗ Sym(tail word). Sym
    // forgets the order of the tail, so the summand depends on σ only through
    // the set {σ(1), ..., σ(i)}; σ still runs over all of S_N to count each set.
    let mut head_cache: HashMap<u32, SymTensor<BigRational>> = HashMap::new();
    let mut tally: HashMap<u32, u64> = HashMap::new();
    for sigma in Permutation::all(n)? {
        let head: Vec<usize> = (0..i).map(|m| sigma.image(m)).collect();
        *tally.entry(mask_of(&head)).or_default() += 1;
    }
    let mut keys: Vec<_> = tally.into_iter().collect();
    keys.sort();
    let mut lhs = SymTensor::zeros(d, n)?;
    for (mask, count) in keys {
        let set: Vec<usize> = (0..n).filter(|r| mask & (1 << r) != 0).collect();
        let rest: Vec<usize> = (0..n).filter(|r| mask & (1 << r) == 0).collect();
        let head = orderings_sum(vectors, &set)?;
        head_cache.insert(mask, head.clone());
        let sym_tail = word(vectors, &rest)?.symmetrize();
        let term = head.tensor_product(&sym_tail)?;
        lhs = lhs.add(&term.scale(&BigRational::from_integer(count.into())))?;
    }

    // Right side: ordered subsets r_1 < ... < r_i with the sorted complement.
    let weight = BigRational::from_integer(
        (crate::tensor::factorial(i) * crate::tensor::factorial(n - i)).into(),
    );
    let mut rhs = SymTensor::zeros(d, n)?;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != i {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|r| mask & (1 << r) != 0).collect();
        let rest: Vec<usize> = (0..n).filter(|r| mask & (1 << r) == 0).collect();
        let head = match head_cache.get(&mask) {
            Some(h) => h.clone(),
            None => orderings_sum(vectors, &set)?,
        };
        rhs = rhs.add(&head.tensor_product(&word(vectors, &rest)?)?)?;
    }
    let rhs = rhs.scale(&weight);
    let rhs_tail_symmetrized = symmetrize_tail(&rhs, i)?;
    Ok(ShuffleCheck {
        n,
        i,
        verbatim_equal: lhs == rhs,
        tail_symmetrized_equal: lhs == rhs_tail_symmetrized,
        lhs,
        rhs,
        rhs_tail_symmetrized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Scalar;

    fn q(num: i64, den: i64) -> BigRational {
        BigRational::from_ratio(num, den)
    }

    #[test]
    fn two_basis_vectors() {
        let v = vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]];
        let c = sym_group_identity_check(&v, 1).unwrap();
        assert!(c.verbatim_equal);
        let expected: Vec<BigRational> = [0, 1, 1, 0].iter().map(|&x| q(x, 1)).collect();
        assert_eq!(c.lhs.coeffs(), expected.as_slice());
    }

    #[test]
    fn full_head_is_permutation_sum() {
        let v = vec![vec![q(1, 2), q(2, 1)], vec![q(-1, 3), q(0, 1)], vec![q(5, 1), q(1, 7)]];
        let c = sym_group_identity_check(&v, 3).unwrap();
        assert!(c.verbatim_equal);
        let mut direct = SymTensor::zeros(2, 3).unwrap();
        for p in Permutation::all(3).unwrap() {
            let order: Vec<usize> = (0..3).map(|m| p.image(m)).collect();
            direct = direct.add(&word(&v, &order).unwrap()).unwrap();
        }
        // each σ contributes the full orderings sum once
        assert_eq!(c.lhs, direct.scale(&q(6, 1)));
    }

    #[test]
    fn long_tail_needs_symmetrization() {
        let v = vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]];
        let c = sym_group_identity_check(&v, 1).unwrap();
        assert!(c.tail_symmetrized_equal);
        assert!(!c.verbatim_equal);
    }
}
