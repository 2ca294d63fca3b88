use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LipError, Result};
use crate::jet::{box_grid, LipJet};
use crate::tensor::{LinearMap, NormKind};

use super::integrate::{flow_at, integrate};
use super::{prolong, FieldNorms, VectorField};

/// Integrator error absorbed by every margin, in units of the tolerance.
pub const ALLOWANCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `‖Ã(t,y) − Ã(t,ỹ)‖ ≤ e^{|t| ‖A‖_{Lip-1}} ‖y − ỹ‖`.
    SpaceContraction,
    /// `‖Ã(t,y) − Ã(t̃,ỹ)‖ ≤ e^{min(|t|,|t̃|) ‖A‖_{Lip-1}} ‖y − ỹ‖ + ‖A‖∞ |t − t̃|`.
    TimeSpaceHolder,
    /// `Ã((−T,T) × B(x0,r)) ⊆ B(x0, r + T‖A‖∞)`.
    BallConfinement,
    /// `‖∂_t Ã‖ ≤ ‖A‖_{Lip-(1+ε)}` and `‖∂_{x_i} Ã(t,y)‖ ≤ e^{|t| ‖A‖_{Lip-1}}`.
    DerivativeBound,
    /// `‖dÃ(p) − dÃ(p̃)‖ ≤ max(m1, ..., m4) N(p − p̃)^ε`, column by column.
    DerivativeHolder,
}

/// Outcome of one bound check over sampled trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCertificate {
    pub kind: BoundKind,
    /// `T`, the largest `|t|` sampled.
    pub t_max: f64,
    pub r: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub samples: usize,
    /// Smallest `bound − measured` over the samples.
    pub margin: f64,
    /// Bound and measured value where the margin is attained.
    pub bound: f64,
    pub measured: f64,
    /// Largest `measured / bound` among samples with a positive bound.
    pub max_ratio: f64,
    pub allowance: f64,
    /// Whether every evaluated state stayed in the box where the norms were measured.
    pub in_box: bool,
    pub passed: bool,
}

struct Tally {
    samples: usize,
    margin: f64,
    bound: f64,
    measured: f64,
    max_ratio: f64,
}

impl Tally {
    fn new() -> Self {
        Self {
            samples: 0,
            margin: f64::INFINITY,
            bound: 0.0,
            measured: 0.0,
            max_ratio: 0.0,
        }
    }

    fn push(&mut self, bound: f64, measured: f64) {
        self.samples += 1;
        if bound - measured < self.margin {
            self.margin = bound - measured;
            self.bound = bound;
            self.measured = measured;
        }
        if bound > 0.0 {
            self.max_ratio = self.max_ratio.max(measured / bound);
        }
    }

    fn finish(self, kind: BoundKind, t_max: f64, tol: f64, in_box: bool) -> FlowCertificate {
        let allowance = ALLOWANCE_FACTOR * tol;
        let margin = if self.samples == 0 { 0.0 } else { self.margin };
        FlowCertificate {
            kind,
            t_max,
            r: None,
            x0: None,
            samples: self.samples,
            margin,
            bound: self.bound,
            measured: self.measured,
            max_ratio: self.max_ratio,
            allowance,
            in_box,
            passed: margin >= -allowance,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(LipError::invalid(format!("tolerance must be positive, got {tol}")))
    }
}

/// Checks the space contraction bound at every time in `times` for every pair.
pub fn flow_space_lipschitz_check(
    field: &VectorField,
    norms: &FieldNorms,
    times: &[f64],
    pairs: &[(Vec<f64>, Vec<f64>)],
    tol: f64,
) -> Result<FlowCertificate> {
    check_tol(tol)?;
    let jobs: Vec<(f64, &(Vec<f64>, Vec<f64>))> = times.iter().flat_map(|&t| pairs.iter().map(move |p| (t, p))).collect();
    let results = jobs
        .par_iter()
        .map(|&(t, (y, z))| {
            let a = flow_at(field.map(), y, t, tol)?;
            let b = flow_at(field.map(), z, t, tol)?;
            let bound = (t.abs() * norms.lip1).exp() * dist(y, z);
            Ok((bound, dist(&a, &b), field.contains(&a) && field.contains(&b)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tally = Tally::new();
    let mut in_box = true;
    for (bound, measured, inside) in results {
        tally.push(bound, measured);
        in_box &= inside;
    }
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Ok(tally.finish(BoundKind::SpaceContraction, t_max, tol, in_box))
}

/// Checks the time-space bound over all pairs of space-time samples.
pub fn time_space_check(field: &VectorField, norms: &FieldNorms, samples: &[(f64, Vec<f64>)], tol: f64) -> Result<FlowCertificate> {
    check_tol(tol)?;
    let states = samples
        .par_iter()
        .map(|(t, y)| flow_at(field.map(), y, *t, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut tally = Tally::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let ((t, y), (s, z)) = (&samples[i], &samples[j]);
            let bound = (t.abs().min(s.abs()) * norms.lip1).exp() * dist(y, z) + norms.sup * (t - s).abs();
            tally.push(bound, dist(&states[i], &states[j]));
        }
    }
    let in_box = states.iter().all(|x| field.contains(x));
    let t_max = samples.iter().fold(0.0f64, |m, (t, _)| m.max(t.abs()));
    Ok(tally.finish(BoundKind::TimeSpaceHolder, t_max, tol, in_box))
}

/// Integrates a `per_axis` lattice of `B(x0, r)`, boundary included, forward and
/// backward to `T` and checks every accepted state against `r + T‖A‖∞`.
pub fn confinement_check(
    field: &VectorField,
    norms: &FieldNorms,
    x0: &[f64],
    r: f64,
    t_max: f64,
    per_axis: usize,
    tol: f64,
) -> Result<FlowCertificate> {
    check_tol(tol)?;
    if !(r > 0.0 && t_max > 0.0) {
        return Err(LipError::invalid("need r > 0 and T > 0"));
    }
    let lo: Vec<f64> = x0.iter().map(|c| c - r).collect();
    let hi: Vec<f64> = x0.iter().map(|c| c + r).collect();
    let starts = box_grid(&lo, &hi, per_axis.max(2));
    let jobs: Vec<(&Vec<f64>, f64)> = starts.iter().flat_map(|y| [(y, t_max), (y, -t_max)]).collect();
    let trajs = jobs
        .par_iter()
        .map(|&(y, t)| integrate(field.map(), y, t, tol))
        .collect::<Result<Vec<_>>>()?;
    let bound = r + t_max * norms.sup;
    let mut tally = Tally::new();
    let mut in_box = true;
    for tr in &trajs {
        for s in &tr.states {
            tally.push(bound, dist(s, x0));
            in_box &= field.contains(s);
        }
    }
    let mut cert = tally.finish(BoundKind::BallConfinement, t_max, tol, in_box);
    cert.r = Some(r);
    cert.x0 = Some(x0.to_vec());
    Ok(cert)
}

/// `∂_x Ã(t, y0)` at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianSample {
    pub t: f64,
    pub state: Vec<f64>,
    pub jacobian: LinearMap,
}

/// Integrates the extended field `(A(a), dA(a) b)` from `(y0, e_i)` for every
/// basis vector; the second halves are the columns of `∂_x Ã(t, y0)`.
pub fn flow_jacobian(field: &VectorField, y0: &[f64], times: &[f64], tol: f64) -> Result<Vec<JacobianSample>> {
    check_tol(tol)?;
    let d = field.dim();
    if y0.len() != d {
        return Err(LipError::dims("initial point has the wrong dimension"));
    }
    let y = prolong(field.map())?;
    let jobs: Vec<(f64, usize)> = times.iter().flat_map(|&t| (0..d).map(move |i| (t, i))).collect();
    let ends = jobs
        .par_iter()
        .map(|&(t, i)| {
            let mut z = y0.to_vec();
            z.extend((0..d).map(|k| if k == i { 1.0 } else { 0.0 }));
            flow_at(&y, &z, t, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    times
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let cols = &ends[ti * d..(ti + 1) * d];
            let mut entries = vec![0.0; d * d];
            for (i, c) in cols.iter().enumerate() {
                for r in 0..d {
                    entries[r * d + i] = c[d + r];
                }
            }
            Ok(JacobianSample {
                t,
                state: cols[0][..d].to_vec(),
                jacobian: LinearMap::new(d, d, entries)?,
            })
        })
        .collect()
}

/// The constants `m1, ..., m4` bounding the `ε`-Hölder norm of `dÃ` on
/// `(−T, T) × B(x0, r)` with the standard basis (`max ‖e_i‖ = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderConstants {
    pub eps: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl HolderConstants {
    pub fn max(&self) -> f64 {
        self.m1.max(self.m2).max(self.m3).max(self.m4)
    }
}

pub fn holder_constants(norms: &FieldNorms, t_max: f64, r: f64) -> Result<HolderConstants> {
    let (eps, lg) = match (norms.eps, norms.lip_one_eps) {
        (Some(e), Some(l)) => (e, l),
        _ => return Err(LipError::invalid("the Hölder constants need a field of grade above 1")),
    };
    let l1 = norms.lip1;
    let grow = (t_max * l1).exp();
    let t2 = (2.0 * t_max).powf(1.0 - eps);
    Ok(HolderConstants {
        eps,
        m1: l1 * (grow * (2.0 * r).powf(1.0 - eps) + lg * t2),
        m2: grow * ((eps * t_max * l1).exp() * (t_max * lg).exp_m1() + t2 * lg),
        m3: lg,
        m4: grow,
    })
}

fn column(l: &[f64], cols: usize, c: usize) -> Vec<f64> {
    l.chunks(cols).map(|row| row[c]).collect()
}

/// Derivative sup and Hölder checks on a space-time jet whose points are `(t, y)`.
pub fn derivative_checks(
    field: &VectorField,
    norms: &FieldNorms,
    jet: &LipJet,
    t_max: f64,
    r: f64,
    tol: f64,
) -> Result<(FlowCertificate, FlowCertificate, HolderConstants)> {
    let hc = holder_constants(norms, t_max, r)?;
    let lg = hc.m3;
    let cols = field.dim() + 1;
    let sup = |v: &[f64]| NormKind::LInf.lq(v);
    let mut bound_tally = Tally::new();
    let mut holder_tally = Tally::new();
    let firsts: Vec<&[f64]> = (0..jet.len()).map(|i| jet.level(i, 1).coeffs()).collect();
    for (i, l) in firsts.iter().enumerate() {
        let t = jet.points()[i][0];
        bound_tally.push(lg, sup(&column(l, cols, 0)));
        for c in 1..cols {
            bound_tally.push((t.abs() * norms.lip1).exp(), sup(&column(l, cols, c)));
        }
    }
    let c_max = hc.max();
    for i in 0..jet.len() {
        for j in i + 1..jet.len() {
            let n = dist(&jet.points()[i], &jet.points()[j]).powf(hc.eps);
            let diff: Vec<f64> = firsts[i].iter().zip(firsts[j]).map(|(a, b)| a - b).collect();
            let worst = (0..cols).map(|c| sup(&column(&diff, cols, c))).fold(0.0, f64::max);
            holder_tally.push(c_max * n, worst);
        }
    }
    let in_box = (0..jet.len()).all(|i| field.contains(jet.value(i)));
    Ok((
        bound_tally.finish(BoundKind::DerivativeBound, t_max, tol, in_box),
        holder_tally.finish(BoundKind::DerivativeHolder, t_max, tol, in_box),
        hc,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine() -> (VectorField, FieldNorms) {
        let f = VectorField::parse(&["sin(x0)"], vec![[-4.0, 4.0]], 2.0).unwrap();
        let n = f.measure(161).unwrap();
        (f, n)
    }

    #[test]
    fn zero_field_has_zero_margin() {
        let f = VectorField::parse(&["0"], vec![[-1.0, 1.0]], 2.0).unwrap();
        let n = f.measure(5).unwrap();
        let c = flow_space_lipschitz_check(&f, &n, &[1.0], &[(vec![0.0], vec![0.5])], 1e-10).unwrap();
        assert_eq!(c.margin, 0.0);
        assert!(c.passed);
    }

    #[test]
    fn sine_space_contraction() {
        let (f, n) = sine();
        let c = flow_space_lipschitz_check(&f, &n, &[1.0, -1.0], &[(vec![0.0], vec![0.1])], 1e-10).unwrap();
        assert!(c.passed && c.max_ratio <= 1.0, "{c:?}");
    }

    #[test]
    fn sine_confinement() {
        let (f, n) = sine();
        let c = confinement_check(&f, &n, &[0.0], 1.0, 2.0, 9, 1e-10).unwrap();
        assert!(c.passed && c.in_box);
        assert!(c.bound <= 3.0 + 1e-12);
    }

    #[test]
    fn sine_jacobian_against_differences() {
        let (f, _) = sine();
        let h = 1e-5;
        let j = flow_jacobian(&f, &[1.0], &[1.0], 1e-12).unwrap();
        let p = flow_at(f.map(), &[1.0 + h], 1.0, 1e-13).unwrap()[0];
        let m = flow_at(f.map(), &[1.0 - h], 1.0, 1e-13).unwrap()[0];
        let fd = (p - m) / (2.0 * h);
        let got = j[0].jacobian.get(0, 0);
        assert!((got - fd).abs() <= 1e-5 * fd.abs(), "{got} vs {fd}");
    }

    #[test]
    fn constant_field_jacobian_is_identity() {
        let f = VectorField::parse(&["1", "2"], vec![[-5.0, 5.0], [-5.0, 5.0]], 2.0).unwrap();
        let j = flow_jacobian(&f, &[0.0, 0.0], &[1.5], 1e-10).unwrap();
        assert_eq!(j[0].jacobian, LinearMap::identity(2));
    }
}
