//! Small dense linear algebra: partial-pivot inversion, condition numbers, rank.

use crate::error::{LipError, Result};
use crate::tensor::{LinearMap, NormFamily};

/// Relative pivot threshold below which a matrix counts as singular.
pub const PIVOT_RTOL: f64 = 1e-13;

fn square(a: &LinearMap) -> Result<usize> {
    if a.rows() != a.cols() {
        return Err(LipError::dims(format!("{}×{} matrix is not square", a.rows(), a.cols())));
    }
    Ok(a.rows())
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn inverse(a: &LinearMap) -> Result<LinearMap> {
    let n = square(a)?;
    let scale = a.entries().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut m: Vec<Vec<f64>> = a.to_rows();
    let mut inv: Vec<Vec<f64>> = LinearMap::identity(n).to_rows();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        let p = m[piv][col];
        if p.abs() <= PIVOT_RTOL * scale.max(f64::MIN_POSITIVE) || p == 0.0 {
            return Err(LipError::Singular { pivot: p.abs() });
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        m[r][j] -= f * m[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    LinearMap::from_rows(&inv)
}

/// Solves `a x = b`.
pub fn solve(a: &LinearMap, b: &[f64]) -> Result<Vec<f64>> {
    inverse(a)?.apply(b)
}

/// `‖A‖ ‖A^{-1}‖` in the family's subordinate norm.
pub fn condition_number(a: &LinearMap, fam: &NormFamily) -> Result<f64> {
    Ok(a.subordinate_norm(fam) * inverse(a)?.subordinate_norm(fam))
}

/// Numerical rank by full-pivot elimination with relative threshold `rtol`.
pub fn rank(a: &LinearMap, rtol: f64) -> usize {
    let (rows, cols) = (a.rows(), a.cols());
    let mut m = a.to_rows();
    let scale = a.entries().iter().fold(0.0f64, |s, x| s.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let mut r = 0;
    let mut used_cols = vec![false; cols];
    while r < rows.min(cols) {
        let mut best = (0.0, 0, 0);
        for (i, row) in m.iter().enumerate().skip(r) {
            for (j, v) in row.iter().enumerate() {
                if !used_cols[j] && v.abs() > best.0 {
                    best = (v.abs(), i, j);
                }
            }
        }
        if best.0 <= rtol * scale {
            break;
        }
        let (_, pi, pj) = best;
        m.swap(r, pi);
        used_cols[pj] = true;
        let p = m[r][pj];
        for i in (r + 1)..rows {
            let f = m[i][pj] / p;
            if f != 0.0 {
                for j in 0..cols {
                    m[i][j] -= f * m[r][j];
                }
            }
        }
        r += 1;
    }
    r
}

/// The square submatrix on the given row and column index lists.
pub fn minor(a: &LinearMap, rows: &[usize], cols: &[usize]) -> Result<LinearMap> {
    if rows.iter().any(|&r| r >= a.rows()) || cols.iter().any(|&c| c >= a.cols()) {
        return Err(LipError::invalid("minor index out of range"));
    }
    let entries = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .map(|(r, c)| a.get(r, c))
        .collect();
    LinearMap::new(rows.len(), cols.len(), entries)
}
