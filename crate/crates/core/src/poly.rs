//! Multivariate real polynomials with exact derivative evaluation.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exps: Vec<u32>,
    pub coeff: f64,
}

/// `Σ c_a x^a` in `dim` variables. Like terms are merged and zero terms dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    dim: usize,
    terms: Vec<Monomial>,
}

impl TryFrom<PolyRepr> for Polynomial {
    type Error = LipError;

    fn try_from(r: PolyRepr) -> Result<Self> {
        Polynomial::new(r.dim, r.terms)
    }
}

impl From<Polynomial> for PolyRepr {
    fn from(p: Polynomial) -> Self {
        PolyRepr {
            dim: p.dim,
            terms: p.terms,
        }
    }
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for t in terms {
            if t.exps.len() != dim {
                return Err(LipError::dims(format!(
                    "monomial {:?} has {} exponents, polynomial has {dim} variables",
                    t.exps,
                    t.exps.len()
                )));
            }
            *merged.entry(t.exps).or_insert(0.0) += t.coeff;
        }
        Ok(Self {
            dim,
            terms: merged
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|(exps, coeff)| Monomial { exps, coeff })
                .collect(),
        })
    }

    /// Builds from `(coefficient, exponents)` pairs.
    pub fn from_terms(dim: usize, terms: &[(f64, &[u32])]) -> Result<Self> {
        Self::new(
            dim,
            terms
                .iter()
                .map(|(c, e)| Monomial {
                    exps: e.to_vec(),
                    coeff: *c,
                })
                .collect(),
        )
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, vec![Monomial { exps: vec![0; dim], coeff: c }]).expect("shape is consistent")
    }

    /// The coordinate `x_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        let mut exps = vec![0; dim];
        exps[i] = 1;
        Self::new(dim, vec![Monomial { exps, coeff: 1.0 }]).expect("shape is consistent")
    }

    /// Random polynomial with up to `n_terms` monomials of total degree `≤ degree`
    /// and coefficients in `[-1, 1]`.
    pub fn random<R: Rng>(rng: &mut R, dim: usize, degree: u32, n_terms: usize) -> Self {
        let terms = (0..n_terms)
            .map(|_| {
                let mut left = rng.gen_range(0..=degree);
                let mut exps = vec![0; dim];
                while left > 0 {
                    exps[rng.gen_range(0..dim)] += 1;
                    left -= 1;
                }
                Monomial {
                    exps,
                    coeff: rng.gen_range(-1.0..=1.0),
                }
            })
            .collect();
        Self::new(dim, terms).expect("shape is consistent")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exps.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.exps.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product::<f64>())
            .sum()
    }

    /// `∂^{|b|} p / ∂x^b (x)` where `vars` lists the differentiation variables
    /// with multiplicity.
    pub fn partial(&self, x: &[f64], vars: &[usize]) -> f64 {
        let mut b = vec![0u32; self.dim];
        for &v in vars {
            b[v] += 1;
        }
        self.terms
            .iter()
            .filter(|t| t.exps.iter().zip(&b).all(|(a, b)| a >= b))
            .map(|t| {
                let mut v = t.coeff;
                for ((&a, &bi), &xi) in t.exps.iter().zip(&b).zip(x) {
                    v *= ((a - bi + 1)..=a).map(f64::from).product::<f64>();
                    v *= xi.powi((a - bi) as i32);
                }
                v
            })
            .sum()
    }

    pub fn to_expr(&self) -> Expr {
        self.terms.iter().fold(Expr::constant(0.0), |acc, t| {
            let mono = t
                .exps
                .iter()
                .enumerate()
                .fold(Expr::constant(t.coeff), |m, (i, &e)| {
                    Expr::mul(m, Expr::pow(Expr::var(i), e as i32))
                });
            Expr::add(acc, mono)
        })
    }
}

/// A polynomial map `R^d → R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMap {
    dim_in: usize,
    comps: Vec<Polynomial>,
}

impl PolyMap {
    pub fn new(comps: Vec<Polynomial>) -> Result<Self> {
        let dim_in = comps
            .first()
            .ok_or_else(|| LipError::invalid("polynomial map needs at least one component"))?
            .dim;
        if comps.iter().any(|p| p.dim != dim_in) {
            return Err(LipError::dims("components disagree on the number of variables"));
        }
        Ok(Self { dim_in, comps })
    }

    pub fn scalar(p: Polynomial) -> Self {
        Self {
            dim_in: p.dim,
            comps: vec![p],
        }
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.comps
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.comps.len()
    }

    pub fn degree(&self) -> u32 {
        self.comps.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn to_exprs(&self) -> Vec<Expr> {
        self.comps.iter().map(Polynomial::to_expr).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partials_of_monomial() {
        // p = 3 x0^3 x1
        let p = Polynomial::from_terms(2, &[(3.0, &[3, 1])]).unwrap();
        let x = [2.0, 5.0];
        assert_eq!(p.eval(&x), 120.0);
        assert_eq!(p.partial(&x, &[0]), 180.0);
        assert_eq!(p.partial(&x, &[0, 0, 1]), 36.0);
        assert_eq!(p.partial(&x, &[1, 1]), 0.0);
        assert_eq!(p.partial(&x, &[0, 0, 0, 0]), 0.0);
    }

    #[test]
    fn like_terms_merge() {
        let p = Polynomial::from_terms(1, &[(1.0, &[2]), (-1.0, &[2]), (2.0, &[0])]).unwrap();
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.degree(), 0);
    }

    #[test]
    fn expr_agrees() {
        let p = Polynomial::from_terms(2, &[(1.5, &[2, 0]), (-2.0, &[1, 1]), (0.5, &[0, 0])]).unwrap();
        let e = p.to_expr();
        let x = [0.3, -1.2];
        assert!((e.eval(&x) - p.eval(&x)).abs() < 1e-15);
        assert!((e.diff(0).diff(1).eval(&x) - p.partial(&x, &[0, 1])).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arity() {
        assert!(Polynomial::from_terms(2, &[(1.0, &[1])]).is_err());
    }
}
