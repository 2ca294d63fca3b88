use serde::Serialize;

use crate::error::{LipError, Result};
use crate::expr::Expr;
use crate::linalg;
use crate::smooth::{ExprMap, SmoothMap};

use super::{cell_centres, solve_local_inverse, sup, InverseProblem};

/// Relative pivot tolerance for the sampled rank test.
pub const RANK_RTOL: f64 = 1e-9;

/// Tuning for [`constant_rank_decompose`].
#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    /// Half-width of the box used to estimate `M1` for `f2`.
    pub probe: f64,
    pub probe_per_axis: usize,
    /// Lattice size per axis when sampling `H`.
    pub samples_per_axis: usize,
    /// Fixed-point tolerance for `f2^{-1}`.
    pub solve_tol: f64,
    /// Allowed deviation from the normal form.
    pub tol: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            probe: 0.5,
            probe_per_axis: 9,
            samples_per_axis: 7,
            solve_tol: 1e-14,
            tol: 1e-10,
        }
    }
}

/// The charts `f = f2 ∘ f1` and `g = g2 ∘ g1` that turn `φ` into
/// `(x_1, ..., x_p) ↦ (x_1, ..., x_k, 0, ..., 0)` near `x0`.
#[derive(Debug, Clone)]
pub struct ConstantRankDecomposition {
    phi: ExprMap,
    rows: Vec<usize>,
    cols: Vec<usize>,
    f2: InverseProblem,
    /// `A(f1(x0))`.
    a0: Vec<f64>,
    solve_tol: f64,
    pub report: NormalFormReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalFormReport {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub rank: usize,
    /// Constants of the inversion problem for `f2`.
    pub m1: f64,
    pub m2: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Points of `H` tried, and those with `(y1, 0) ∈ H` where `F` is defined.
    pub samples: usize,
    pub samples_used: usize,
    pub max_error: f64,
    pub witness: Option<Vec<f64>>,
    /// `max |φ̂(φ(x)) − x|` over the samples when `k = p`.
    pub local_inverse_error: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

fn shuffle(x: &[f64], chosen: &[usize]) -> Vec<f64> {
    let rest = (0..x.len()).filter(|i| !chosen.contains(i));
    chosen.iter().copied().chain(rest).map(|i| x[i]).collect()
}

fn unshuffle(u: &[f64], chosen: &[usize]) -> Vec<f64> {
    let order: Vec<usize> = chosen.iter().copied().chain((0..u.len()).filter(|i| !chosen.contains(i))).collect();
    let mut x = vec![0.0; u.len()];
    for (pos, &i) in order.iter().enumerate() {
        x[i] = u[pos];
    }
    x
}

fn strictly_increasing(idx: &[usize], bound: usize) -> bool {
    idx.windows(2).all(|w| w[0] < w[1]) && idx.iter().all(|&i| i < bound)
}

/// Builds the charts around `x0` for the `rows × cols` minor of `dφ`, then
/// checks the normal form and the rank of `dφ` on a lattice of `H`.
pub fn constant_rank_decompose(
    phi: &ExprMap,
    x0: &[f64],
    rows: &[usize],
    cols: &[usize],
    gamma: f64,
    opts: DecomposeOptions,
) -> Result<ConstantRankDecomposition> {
    let (p, q, k) = (phi.dim_in(), phi.dim_out(), rows.len());
    if x0.len() != p {
        return Err(LipError::dims(format!("x0 has length {}, expected {p}", x0.len())));
    }
    if k == 0 || cols.len() != k || !strictly_increasing(rows, q) || !strictly_increasing(cols, p) {
        return Err(LipError::invalid("index sets must be strictly increasing, non-empty and of equal size"));
    }

    // f2(u) = (A(u) − A0, b − b0) with A = (φ_{i_r} ∘ f1^{-1}) and u = (a, b).
    let order: Vec<usize> = cols.iter().copied().chain((0..p).filter(|i| !cols.contains(i))).collect();
    let mut subs = vec![Expr::constant(0.0); p];
    for (pos, &i) in order.iter().enumerate() {
        subs[i] = Expr::var(pos);
    }
    let w0 = shuffle(x0, cols);
    let phi_x0 = phi.eval(x0);
    let a0: Vec<f64> = rows.iter().map(|&r| phi_x0[r]).collect();
    let mut comps: Vec<Expr> = rows
        .iter()
        .zip(&a0)
        .map(|(&r, &c)| Expr::sub(phi.components()[r].substitute(&subs), Expr::constant(c)))
        .collect();
    comps.extend((k..p).map(|m| Expr::sub(Expr::var(m), Expr::constant(w0[m]))));
    let f2 = InverseProblem::calibrate(ExprMap::new(p, comps)?, w0, gamma, opts.probe, opts.probe_per_axis)?;

    let mut dec = ConstantRankDecomposition {
        phi: phi.clone(),
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        a0,
        solve_tol: opts.solve_tol,
        report: NormalFormReport {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            rank: k,
            m1: f2.m1(),
            m2: f2.m2(),
            delta: f2.radius(),
            alpha: f2.alpha(),
            samples: 0,
            samples_used: 0,
            max_error: 0.0,
            witness: None,
            local_inverse_error: None,
            tolerance: opts.tol,
            passed: false,
        },
        f2,
    };
    dec.verify(opts.samples_per_axis)?;
    Ok(dec)
}

impl ConstantRankDecomposition {
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn problem(&self) -> &InverseProblem {
        &self.f2
    }

    pub fn f1(&self, x: &[f64]) -> Vec<f64> {
        shuffle(x, &self.cols)
    }

    pub fn g1(&self, z: &[f64]) -> Vec<f64> {
        shuffle(z, &self.rows)
    }

    pub fn g1_inverse(&self, z: &[f64]) -> Vec<f64> {
        unshuffle(z, &self.rows)
    }

    pub fn f(&self, x: &[f64]) -> Vec<f64> {
        self.f2.phi().eval(&self.f1(x))
    }

    /// `f^{-1}` on `H`, through the fixed-point inverse of `f2`.
    pub fn f_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let w = solve_local_inverse(&self.f2, y, self.solve_tol)?.x;
        Ok(unshuffle(&w, &self.cols))
    }

    /// `F(a) = B̃(a, 0)`, defined when `(a, 0) ∈ H`.
    pub fn reduced(&self, a: &[f64]) -> Result<Vec<f64>> {
        let p = self.phi.dim_in();
        let mut y = a.to_vec();
        y.resize(p, 0.0);
        let x = self.f_inverse(&y)?;
        let z = self.g1(&self.phi.eval(&x));
        Ok(z[self.rank()..].to_vec())
    }

    /// `g2(z1, z2) = (z1 − A0, z2 − F(z1 − A0))`.
    pub fn g2(&self, z: &[f64]) -> Result<Vec<f64>> {
        let k = self.rank();
        let a: Vec<f64> = z[..k].iter().zip(&self.a0).map(|(x, c)| x - c).collect();
        let fa = self.reduced(&a)?;
        let tail = z[k..].iter().zip(fa).map(|(x, c)| x - c);
        Ok(a.iter().copied().chain(tail).collect())
    }

    pub fn g(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.g2(&self.g1(z))
    }

    /// `g ∘ φ ∘ f^{-1}`, expected to be `(y_1, ..., y_k, 0, ..., 0)`.
    pub fn normal_form(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.g(&self.phi.eval(&self.f_inverse(y)?))
    }

    /// `φ̂ = f^{-1} ∘ π_p ∘ g`, available for immersions (`k = p`).
    pub fn local_inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        let k = self.rank();
        if k != self.phi.dim_in() {
            return Err(LipError::invalid("the local inverse exists only when the rank equals the source dimension"));
        }
        let a: Vec<f64> = self.g1(z)[..k].iter().zip(&self.a0).map(|(x, c)| x - c).collect();
        self.f_inverse(&a)
    }

    fn verify(&mut self, per_axis: usize) -> Result<()> {
        let (p, k) = (self.phi.dim_in(), self.rank());
        let alpha = self.f2.alpha();
        let jac = self.f2.phi().jacobian(&self.f1(&self.f2_centre()))?;
        let mut used = 0;
        let mut worst = (0.0f64, None);
        let mut inverse_err: Option<f64> = None;
        let centres = cell_centres(p, per_axis, 0.95 * alpha / 2.0);
        for u in &centres {
            let y = jac.apply(u)?;
            let mut y1 = y[..k].to_vec();
            y1.resize(p, 0.0);
            if !self.f2.in_v0(&y1)? {
                continue;
            }
            used += 1;
            let x = self.f_inverse(&y)?;
            let r = linalg::rank(&self.phi.jacobian(&x)?, RANK_RTOL);
            if r != k {
                return Err(LipError::invalid(format!("dφ has rank {r}, not {k}, at {x:?}")));
            }
            let nf = self.g(&self.phi.eval(&x))?;
            let err = nf
                .iter()
                .enumerate()
                .map(|(i, v)| (v - if i < k { y[i] } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            if err > worst.0 {
                worst = (err, Some(y.clone()));
            }
            if k == p {
                let back = self.local_inverse(&self.phi.eval(&x))?;
                let e = sup(&back.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
                inverse_err = Some(inverse_err.unwrap_or(0.0).max(e));
            }
        }
        let rep = &mut self.report;
        rep.samples = centres.len();
        rep.samples_used = used;
        rep.max_error = worst.0;
        rep.witness = worst.1.filter(|_| worst.0 > rep.tolerance);
        rep.local_inverse_error = inverse_err;
        rep.passed = used > 0 && worst.0 <= rep.tolerance && inverse_err.is_none_or(|e| e <= rep.tolerance);
        Ok(())
    }

    /// `x0` recovered from `f2`'s centre.
    fn f2_centre(&self) -> Vec<f64> {
        unshuffle(self.f2.x0(), &self.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffles_round_trip() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let u = shuffle(&x, &[1, 3]);
        assert_eq!(u, vec![2.0, 4.0, 1.0, 3.0]);
        assert_eq!(unshuffle(&u, &[1, 3]), x.to_vec());
    }

    #[test]
    fn linear_full_rank() {
        let phi = ExprMap::parse(2, &["2*x0 + x1", "x0 - x1"]).unwrap();
        let d = constant_rank_decompose(&phi, &[0.1, -0.2], &[0, 1], &[0, 1], 2.0, DecomposeOptions::default()).unwrap();
        assert!(d.report.passed && d.report.max_error <= 1e-12, "{:?}", d.report);
    }

    #[test]
    fn parabola_graph_has_rank_one() {
        let phi = ExprMap::parse(2, &["x0", "x0^2"]).unwrap();
        let d = constant_rank_decompose(&phi, &[0.3, 0.1], &[0], &[0], 2.0, DecomposeOptions::default()).unwrap();
        assert!(d.report.passed, "{:?}", d.report);
        // F(y1) = (y1 + 0.3)^2
        let f = d.reduced(&[0.05]).unwrap();
        assert!((f[0] - 0.35f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn immersion_local_inverse() {
        let phi = ExprMap::parse(1, &["x0", "x0^2"]).unwrap();
        let d = constant_rank_decompose(&phi, &[0.2], &[0], &[0], 2.0, DecomposeOptions::default()).unwrap();
        assert!(d.report.passed);
        assert!(d.report.local_inverse_error.unwrap() < 1e-12);
        let t = d.local_inverse(&[0.25, 0.0625]).unwrap();
        assert!((t[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rank_jump_is_rejected() {
        let phi = ExprMap::parse(2, &["x0", "x0*x1"]).unwrap();
        let err = constant_rank_decompose(&phi, &[0.1, 0.0], &[0], &[0], 2.0, DecomposeOptions::default()).unwrap_err();
        assert!(matches!(err, LipError::InvalidInput(m) if m.contains("rank 2")));
    }
}
