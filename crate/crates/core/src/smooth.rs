//! Closed-form maps `R^d → R^m` with exact derivatives of every order.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{LipError, Result};
use crate::expr::Expr;
use crate::poly::PolyMap;
use crate::tensor::{check_order, class_table, LinearMap, MultilinearMap, MAX_ORDER};

pub trait SmoothMap: Send + Sync {
    fn dim_in(&self) -> usize;

    fn dim_out(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Vec<f64>;

    /// Mixed partial of every output coordinate along the sorted variable list `vars`.
    fn partial(&self, x: &[f64], vars: &[usize]) -> Vec<f64>;

    /// `d^k f(x)` as a symmetric `k`-linear map.
    fn derivative(&self, x: &[f64], k: usize) -> Result<MultilinearMap> {
        check_order(k)?;
        let (m, d) = (self.dim_out(), self.dim_in());
        if x.len() != d {
            return Err(LipError::dims(format!(
                "point of length {} for a map on R^{d}",
                x.len()
            )));
        }
        if k == 0 {
            return MultilinearMap::new(m, d, 0, self.eval(x));
        }
        let table = class_table(d, k);
        let values: Vec<Vec<f64>> = table.classes.iter().map(|c| self.partial(x, c)).collect();
        let block = table.of.len();
        let mut coeffs = vec![0.0; m * block];
        for r in 0..m {
            for (flat, &c) in table.of.iter().enumerate() {
                coeffs[r * block + flat] = values[c][r];
            }
        }
        MultilinearMap::new(m, d, k, coeffs)
    }

    /// `(f(x), df(x), ..., d^n f(x))`.
    fn levels(&self, x: &[f64], n: usize) -> Result<Vec<MultilinearMap>> {
        (0..=n).map(|k| self.derivative(x, k)).collect()
    }

    fn jacobian(&self, x: &[f64]) -> Result<LinearMap> {
        self.derivative(x, 1)?.to_linear()
    }
}

impl SmoothMap for PolyMap {
    fn dim_in(&self) -> usize {
        PolyMap::dim_in(self)
    }

    fn dim_out(&self) -> usize {
        PolyMap::dim_out(self)
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components().iter().map(|p| p.eval(x)).collect()
    }

    fn partial(&self, x: &[f64], vars: &[usize]) -> Vec<f64> {
        self.components().iter().map(|p| p.partial(x, vars)).collect()
    }
}

struct DerivTable {
    index: HashMap<Vec<usize>, usize>,
    exprs: Vec<Vec<Expr>>,
}

/// A map given by one [`Expr`] per output coordinate.
///
/// Symbolic partials are built lazily, one order at a time, and cached.
pub struct ExprMap {
    dim_in: usize,
    comps: Vec<Expr>,
    tables: Vec<OnceLock<DerivTable>>,
}

impl std::fmt::Debug for ExprMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExprMap")
            .field("dim_in", &self.dim_in)
            .field("comps", &self.comps)
            .finish()
    }
}

impl Clone for ExprMap {
    fn clone(&self) -> Self {
        Self::new(self.dim_in, self.comps.clone()).expect("already validated")
    }
}

impl ExprMap {
    pub fn new(dim_in: usize, comps: Vec<Expr>) -> Result<Self> {
        if dim_in == 0 || comps.is_empty() {
            return Err(LipError::invalid("expression map needs positive input and output dimension"));
        }
        if let Some(e) = comps.iter().find(|e| e.arity() > dim_in) {
            return Err(LipError::invalid(format!(
                "expression '{e}' uses a variable beyond x{}",
                dim_in - 1
            )));
        }
        Ok(Self {
            dim_in,
            comps,
            tables: (0..=MAX_ORDER).map(|_| OnceLock::new()).collect(),
        })
    }

    /// Parses one expression per output coordinate.
    pub fn parse(dim_in: usize, comps: &[&str]) -> Result<Self> {
        let exprs = comps.iter().map(|s| s.parse()).collect::<Result<Vec<Expr>>>()?;
        Self::new(dim_in, exprs)
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    fn table(&self, k: usize) -> &DerivTable {
        self.tables[k].get_or_init(|| {
            let classes = crate::tensor::sorted_classes(self.dim_in, k);
            let exprs = if k == 0 {
                vec![self.comps.clone()]
            } else {
                let parent = self.table(k - 1);
                classes
                    .iter()
                    .map(|c| {
                        let (last, head) = c.split_last().expect("k ≥ 1");
                        parent.exprs[parent.index[head]].iter().map(|e| e.diff(*last)).collect()
                    })
                    .collect()
            };
            let index = classes.into_iter().enumerate().map(|(i, c)| (c, i)).collect();
            DerivTable { index, exprs }
        })
    }

    /// Symbolic partial along a sorted variable list.
    pub fn partial_expr(&self, vars: &[usize]) -> Result<Vec<Expr>> {
        check_order(vars.len())?;
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        if sorted.iter().any(|&v| v >= self.dim_in) {
            return Err(LipError::invalid("differentiation variable out of range"));
        }
        let t = self.table(sorted.len());
        Ok(t.exprs[t.index[&sorted]].clone())
    }
}

impl SmoothMap for ExprMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.comps.len()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|e| e.eval(x)).collect()
    }

    fn partial(&self, x: &[f64], vars: &[usize]) -> Vec<f64> {
        let t = self.table(vars.len());
        t.exprs[t.index[vars]].iter().map(|e| e.eval(x)).collect()
    }
}
