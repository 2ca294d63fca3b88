use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lift_linear_map, LinearMap, Permutation, Scalar, SymTensor};
use crate::error::{LipError, Result};

/// Coefficient norm underlying a family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L1,
    /// `ℓq` with `1 < q < ∞`.
    Lq(f64),
    LInf,
}

impl NormKind {
    pub fn exponent(self) -> f64 {
        match self {
            NormKind::L1 => 1.0,
            NormKind::Lq(q) => q,
            NormKind::LInf => f64::INFINITY,
        }
    }

    /// Raw `ℓq` norm of a coefficient slice.
    ///
    /// For finite `q > 1` the absolute values are sorted before summation so the
    /// result depends only on the multiset of coefficients.
    pub fn lq(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            NormKind::Lq(q) => {
                let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
                a.sort_unstable_by(f64::total_cmp);
                let top = a.last().copied().unwrap_or(0.0);
                if top == 0.0 {
                    return 0.0;
                }
                top * a.iter().map(|x| (x / top).powf(q)).sum::<f64>().powf(1.0 / q)
            }
        }
    }

    /// Norm of the dual exponent.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::LInf,
            NormKind::LInf => NormKind::L1,
            NormKind::Lq(q) => NormKind::Lq(q / (q - 1.0)),
        }
    }
}

/// A property a family claims to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormProperty {
    Projective,
    Symmetric,
    Compatible(f64),
}

impl fmt::Display for NormProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormProperty::Projective => write!(f, "projective"),
            NormProperty::Symmetric => write!(f, "symmetric"),
            NormProperty::Compatible(c) => write!(f, "compatible({c})"),
        }
    }
}

/// Norms on every tensor power `E^{⊗k}`: `‖x‖_k = s_k · ℓq(coefficients)`.
///
/// `s_0 = 1` always. An empty scale list means `s_k = 1` for every `k`; otherwise
/// the list holds `s_1, s_2, ...` and orders beyond it are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct NormFamily {
    kind: NormKind,
    scales: Vec<f64>,
    declared: Vec<NormProperty>,
}

impl NormFamily {
    pub fn new(kind: NormKind, scales: Vec<f64>, declared: Vec<NormProperty>) -> Result<Self> {
        if let NormKind::Lq(q) = kind {
            if !(q > 1.0 && q.is_finite()) {
                return Err(LipError::invalid(format!("ℓq exponent must lie in (1, ∞), got {q}")));
            }
        }
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(LipError::invalid("norm scales must be positive and finite"));
        }
        if declared
            .iter()
            .any(|p| matches!(p, NormProperty::Compatible(c) if !(*c >= 0.0)))
        {
            return Err(LipError::invalid("compatibility constant must be non-negative"));
        }
        Ok(Self { kind, scales, declared })
    }

    /// Unit-scale `ℓ1` family, declared projective, symmetric and 1-compatible.
    pub fn ell1() -> Self {
        Self {
            kind: NormKind::L1,
            scales: Vec::new(),
            declared: vec![
                NormProperty::Projective,
                NormProperty::Symmetric,
                NormProperty::Compatible(1.0),
            ],
        }
    }

    /// Unit-scale `ℓ∞` family, declared projective and symmetric.
    pub fn ellinf() -> Self {
        Self {
            kind: NormKind::LInf,
            scales: Vec::new(),
            declared: vec![NormProperty::Projective, NormProperty::Symmetric],
        }
    }

    /// Unit-scale `ℓq` family, declared projective and symmetric.
    pub fn ellp(q: f64) -> Result<Self> {
        Self::new(
            NormKind::Lq(q),
            Vec::new(),
            vec![NormProperty::Projective, NormProperty::Symmetric],
        )
    }

    pub fn with_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        self.scales = scales;
        Self::new(self.kind, self.scales, self.declared)
    }

    /// `s_k = α^k` for `k = 1..=k_max`.
    pub fn with_geometric_scales(self, alpha: f64, k_max: usize) -> Result<Self> {
        let scales = (1..=k_max).map(|k| alpha.powi(k as i32)).collect();
        self.with_scales(scales)
    }

    pub fn with_declared(mut self, declared: Vec<NormProperty>) -> Result<Self> {
        self.declared = declared;
        Self::new(self.kind, self.scales, self.declared)
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn declared(&self) -> &[NormProperty] {
        &self.declared
    }

    pub fn is_projective(&self) -> bool {
        self.declared.contains(&NormProperty::Projective)
    }

    pub fn is_symmetric(&self) -> bool {
        self.declared.contains(&NormProperty::Symmetric)
    }

    pub fn compatible_constant(&self) -> Option<f64> {
        self.declared.iter().find_map(|p| match p {
            NormProperty::Compatible(c) => Some(*c),
            _ => None,
        })
    }

    pub fn require_projective(&self) -> Result<()> {
        if self.is_projective() {
            Ok(())
        } else {
            Err(LipError::MissingNormProperty("projective".into()))
        }
    }

    pub fn require_symmetric(&self) -> Result<()> {
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(LipError::MissingNormProperty("symmetric".into()))
        }
    }

    /// Fails unless `s_k` is defined for every `k ≤ k_max`.
    pub fn covers(&self, k_max: usize) -> Result<()> {
        if self.scales.is_empty() || k_max <= self.scales.len() {
            Ok(())
        } else {
            Err(LipError::invalid(format!(
                "norm family defines scales up to order {}, order {k_max} requested",
                self.scales.len()
            )))
        }
    }

    /// `s_k`; callers must have checked [`NormFamily::covers`].
    pub fn scale(&self, k: usize) -> f64 {
        if k == 0 || self.scales.is_empty() {
            1.0
        } else {
            *self
                .scales
                .get(k - 1)
                .unwrap_or_else(|| panic!("norm family has no scale for order {k}"))
        }
    }

    /// Norm on `E` itself: `s_1 · ℓq`.
    pub fn vector_norm(&self, v: &[f64]) -> f64 {
        self.scale(1) * self.kind.lq(v)
    }

    pub fn tensor_norm<T: Scalar>(&self, t: &SymTensor<T>) -> Result<f64> {
        self.covers(t.order())?;
        let c: Vec<f64> = t
            .coeffs()
            .iter()
            .map(|x| x.to_f64().unwrap_or(f64::NAN))
            .collect();
        Ok(self.scale(t.order()) * self.kind.lq(&c))
    }

    /// Exact norm in rational arithmetic; only `ℓ1` and `ℓ∞` are rational-valued.
    pub fn tensor_norm_exact(&self, t: &SymTensor<BigRational>) -> Result<BigRational> {
        self.covers(t.order())?;
        let scale = BigRational::from_f64_exact(self.scale(t.order()))
            .ok_or_else(|| LipError::invalid("non-finite scale"))?;
        let raw = match self.kind {
            NormKind::L1 => t
                .coeffs()
                .iter()
                .fold(BigRational::zero(), |acc, c| acc + c.abs()),
            NormKind::LInf => t
                .coeffs()
                .iter()
                .fold(BigRational::zero(), |acc, c| if c.abs() > acc { c.abs() } else { acc }),
            NormKind::Lq(_) => {
                return Err(LipError::invalid("exact ℓq norms are not rational"));
            }
        };
        Ok(scale * raw)
    }

    /// Operator norm of an `m × d^k` block viewed as a map
    /// `(E^{⊗k}, ‖·‖_k) → (R^m, ℓq)`; order 0 is the `ℓq` norm of the value.
    pub fn level_norm(&self, rows: usize, order: usize, entries: &[f64]) -> f64 {
        if order == 0 {
            return self.kind.lq(entries);
        }
        let cols = entries.len() / rows.max(1);
        matrix_q_norm(rows, cols, entries, self.kind) / self.scale(order)
    }
}

impl fmt::Display for NormFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NormKind::L1 => write!(f, "ell1")?,
            NormKind::Lq(q) => write!(f, "ellp({q})")?,
            NormKind::LInf => write!(f, "ellinf")?,
        }
        if !self.scales.is_empty() {
            write!(f, " scales {:?}", self.scales)?;
        }
        Ok(())
    }
}

/// Parses the short CLI forms `l1`, `linf`, `lp:<q>` (and their `ell` spellings)
/// into the unit-scale presets.
impl FromStr for NormFamily {
    type Err = LipError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "l1" | "ell1" => Ok(Self::ell1()),
            "linf" | "ellinf" => Ok(Self::ellinf()),
            other => {
                let q = other
                    .strip_prefix("lp:")
                    .or_else(|| other.strip_prefix("ellp:"))
                    .ok_or_else(|| LipError::Parse(format!("unknown norm family '{s}'")))?;
                let q: f64 = q
                    .parse()
                    .map_err(|_| LipError::Parse(format!("bad ℓq exponent in '{s}'")))?;
                Self::ellp(q)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(default)]
    scales: Vec<f64>,
    #[serde(default)]
    declared: Vec<NormProperty>,
}

impl Serialize for NormFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, q) = match self.kind {
            NormKind::L1 => ("ell1", None),
            NormKind::Lq(q) => ("ellp", Some(q)),
            NormKind::LInf => ("ellinf", None),
        };
        FamilyRepr {
            kind: kind.into(),
            q,
            scales: self.scales.clone(),
            declared: self.declared.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NormFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = FamilyRepr::deserialize(d)?;
        let kind = match r.kind.as_str() {
            "ell1" | "l1" => NormKind::L1,
            "ellinf" | "linf" => NormKind::LInf,
            "ellp" | "lp" => NormKind::Lq(r.q.ok_or_else(|| D::Error::missing_field("q"))?),
            other => return Err(D::Error::custom(format!("unknown norm kind '{other}'"))),
        };
        NormFamily::new(kind, r.scales, r.declared).map_err(D::Error::custom)
    }
}

/// Operator norm `‖A‖_{q→q}` of a dense row-major `rows × cols` matrix.
///
/// Closed form for `ℓ1` (max column sum) and `ℓ∞` (max row sum). For `ℓq` a
/// single row or column is exact through the dual norm; otherwise the value is
/// an estimate from projected power iteration (converged to 1e-10 relative),
/// never below the best basis-vector lower bound.
pub fn matrix_q_norm(rows: usize, cols: usize, a: &[f64], kind: NormKind) -> f64 {
    debug_assert_eq!(a.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    match kind {
        NormKind::LInf => a
            .chunks(cols)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::L1 => (0..cols)
            .map(|c| (0..rows).map(|r| a[r * cols + c].abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Lq(q) => {
            if rows == 1 {
                kind.dual().lq(a)
            } else if cols == 1 {
                kind.lq(a)
            } else {
                power_iteration(rows, cols, a, q)
            }
        }
    }
}

fn dual_direction(v: &[f64], q: f64) -> Vec<f64> {
    let n = NormKind::Lq(q).lq(v);
    if n == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter()
        .map(|x| x.signum() * (x.abs() / n).powf(q - 1.0))
        .collect()
}

fn power_iteration(rows: usize, cols: usize, a: &[f64], q: f64) -> f64 {
    let kind = NormKind::Lq(q);
    let qd = q / (q - 1.0);
    let matvec = |x: &[f64]| -> Vec<f64> {
        a.chunks(cols)
            .map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum())
            .collect()
    };
    let col = |c: usize| -> Vec<f64> { (0..rows).map(|r| a[r * cols + c]).collect() };
    let mut best = (0..cols).map(|c| kind.lq(&col(c))).fold(0.0, f64::max);
    let mut x = vec![(cols as f64).powf(-1.0 / q); cols];
    let mut prev = 0.0;
    for _ in 0..200 {
        let y = matvec(&x);
        let g = kind.lq(&y);
        best = best.max(g);
        if g == 0.0 || (g - prev).abs() <= 1e-10 * g {
            break;
        }
        prev = g;
        let w = dual_direction(&y, q);
        let mut z = vec![0.0; cols];
        for (r, wr) in w.iter().enumerate() {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += a[r * cols + c] * wr;
            }
        }
        let zx: f64 = z.iter().zip(&x).map(|(u, v)| u * v).sum();
        if NormKind::Lq(qd).lq(&z) <= zx * (1.0 + 1e-10) {
            break;
        }
        x = dual_direction(&z, qd);
    }
    best
}

/// Counterexample stored when a property check fails.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "property", rename_all = "lowercase")]
pub enum PropertyWitness {
    Projective {
        a: SymTensor,
        b: SymTensor,
        lhs: f64,
        rhs: f64,
    },
    Symmetric {
        x: SymTensor,
        permutation: Permutation,
        lhs: f64,
        rhs: f64,
    },
    Compatible {
        u: LinearMap,
        order: usize,
        lhs: f64,
        rhs: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub property: String,
    pub passed: bool,
    pub cases: usize,
    /// Largest `lhs / rhs` seen (for symmetry, `‖σx‖ / ‖x‖` farthest from 1).
    pub worst_ratio: f64,
    pub witness: Option<PropertyWitness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub family: NormFamily,
    pub dim: usize,
    pub k_max: usize,
    pub sample_count: usize,
    pub seed: u64,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, property: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.property.starts_with(property))
    }
}

const PROPERTY_RTOL: f64 = 1e-12;
/// ℓq operator norms are power-iteration estimates.
const ESTIMATE_RTOL: f64 = 1e-8;

fn unit_sample(rng: &mut ChaCha8Rng, dim: usize, order: usize, fam: &NormFamily) -> SymTensor {
    loop {
        let c: Vec<f64> = (0..dim.pow(order as u32)).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let t = SymTensor::new(dim, order, c).expect("shape is consistent");
        let n = fam.tensor_norm(&t).expect("orders are covered");
        if n > 1e-8 {
            return t.scale(&(1.0 / n));
        }
    }
}

fn all_basis(dim: usize, order: usize) -> Vec<SymTensor> {
    let mut idx = vec![0; order];
    (0..dim.pow(order as u32))
        .map(|flat| {
            super::unravel(flat, dim, &mut idx);
            SymTensor::basis(dim, &idx).expect("index in range")
        })
        .collect()
}

/// Largest ratio with ties resolved to the earliest case.
fn worst<W: Send>(cases: Vec<(f64, W)>) -> Option<(f64, W)> {
    cases
        .into_iter()
        .enumerate()
        .max_by(|(i, (a, _)), (j, (b, _))| a.total_cmp(b).then(j.cmp(i)))
        .map(|(_, c)| c)
}

/// Checks every declared property of `fam` on `E = R^dim` up to order `k_max`.
///
/// Each check runs over all pairs of basis tensors plus `sample_count` random
/// unit-ball samples per order split, drawn from a ChaCha stream seeded with `seed`.
/// Compatibility is tested with `F = E` carrying the same family.
pub fn verify_norm_properties(
    fam: &NormFamily,
    dim: usize,
    k_max: usize,
    sample_count: usize,
    seed: u64,
) -> Result<PropertyReport> {
    if dim == 0 {
        return Err(LipError::invalid("dimension must be positive"));
    }
    super::check_order(k_max)?;
    fam.covers(k_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for prop in fam.declared().to_vec() {
        let check = match prop {
            NormProperty::Projective => check_projective(fam, dim, k_max, sample_count, &mut rng),
            NormProperty::Symmetric => check_symmetric(fam, dim, k_max, sample_count, &mut rng),
            NormProperty::Compatible(c) => {
                check_compatible(fam, c, dim, k_max, sample_count, &mut rng)
            }
        };
        checks.push(check);
    }
    Ok(PropertyReport {
        family: fam.clone(),
        dim,
        k_max,
        sample_count,
        seed,
        checks,
    })
}

fn check_projective(
    fam: &NormFamily,
    dim: usize,
    k_max: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> PropertyCheck {
    let mut pairs = Vec::new();
    for k in 2..=k_max {
        for p in 1..k {
            let q = k - p;
            for a in all_basis(dim, p) {
                for b in all_basis(dim, q) {
                    pairs.push((a.clone(), b));
                }
            }
            for _ in 0..samples {
                let a = unit_sample(rng, dim, p, fam);
                let b = unit_sample(rng, dim, q, fam);
                pairs.push((a, b));
            }
        }
    }
    let cases = pairs.len();
    let evaluated: Vec<(f64, (f64, f64, usize))> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let lhs = fam.tensor_norm(&a.tensor_product(b).expect("order capped")).expect("covered");
            let rhs = fam.tensor_norm(a).expect("covered") * fam.tensor_norm(b).expect("covered");
            (lhs / rhs, (lhs, rhs, i))
        })
        .collect();
    let (ratio, (lhs, rhs, i)) = worst(evaluated).unwrap_or((0.0, (0.0, 0.0, 0)));
    let passed = ratio <= 1.0 + PROPERTY_RTOL;
    PropertyCheck {
        property: "projective".into(),
        passed,
        cases,
        worst_ratio: ratio,
        witness: (!passed).then(|| PropertyWitness::Projective {
            a: pairs[i].0.clone(),
            b: pairs[i].1.clone(),
            lhs,
            rhs,
        }),
    }
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Permutation {
    let mut images: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        images.swap(i, rng.gen_range(0..=i));
    }
    Permutation::new(images).expect("shuffle is a bijection")
}

fn check_symmetric(
    fam: &NormFamily,
    dim: usize,
    k_max: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> PropertyCheck {
    let mut cases_v = Vec::new();
    for k in 2..=k_max {
        let perms = Permutation::all(k).expect("order capped");
        for x in all_basis(dim, k) {
            for p in &perms {
                cases_v.push((x.clone(), p.clone()));
            }
        }
        for _ in 0..samples {
            cases_v.push((unit_sample(rng, dim, k, fam), random_permutation(rng, k)));
        }
    }
    let evaluated: Vec<(f64, (f64, f64, usize))> = cases_v
        .par_iter()
        .enumerate()
        .map(|(i, (x, p))| {
            let lhs = fam
                .tensor_norm(&x.apply_permutation(p).expect("sizes agree"))
                .expect("covered");
            let rhs = fam.tensor_norm(x).expect("covered");
            ((lhs / rhs - 1.0).abs(), (lhs, rhs, i))
        })
        .collect();
    let (dev, (lhs, rhs, i)) = worst(evaluated).unwrap_or((0.0, (1.0, 1.0, 0)));
    let passed = dev <= PROPERTY_RTOL;
    PropertyCheck {
        property: "symmetric".into(),
        passed,
        cases: cases_v.len(),
        worst_ratio: if rhs > 0.0 { lhs / rhs } else { 1.0 },
        witness: (!passed).then(|| PropertyWitness::Symmetric {
            x: cases_v[i].0.clone(),
            permutation: cases_v[i].1.clone(),
            lhs,
            rhs,
        }),
    }
}

fn check_compatible(
    fam: &NormFamily,
    c: f64,
    dim: usize,
    k_max: usize,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> PropertyCheck {
    let mut maps = vec![LinearMap::identity(dim)];
    for r in 0..dim {
        for s in 0..dim {
            let mut e = vec![0.0; dim * dim];
            e[r * dim + s] = 1.0;
            maps.push(LinearMap::new(dim, dim, e).expect("square"));
        }
    }
    for _ in 0..samples {
        let e = (0..dim * dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        maps.push(LinearMap::new(dim, dim, e).expect("square"));
    }
    let mut cases_v = Vec::new();
    for k in 1..=k_max {
        for (m, _) in maps.iter().enumerate() {
            cases_v.push((m, k));
        }
    }
    let evaluated: Vec<(f64, (f64, f64, usize))> = cases_v
        .par_iter()
        .enumerate()
        .map(|(i, &(m, k))| {
            let u = &maps[m];
            let lhs = lift_linear_map(u, k)
                .expect("order capped")
                .op_norm(fam, fam)
                .expect("covered");
            let rhs = c * u.subordinate_norm(fam).powi(k as i32);
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            (ratio, (lhs, rhs, i))
        })
        .collect();
    let (ratio, (lhs, rhs, i)) = worst(evaluated).unwrap_or((0.0, (0.0, 0.0, 0)));
    let tol = match fam.kind() {
        NormKind::Lq(_) => ESTIMATE_RTOL,
        _ => PROPERTY_RTOL,
    };
    let passed = ratio <= 1.0 + tol;
    PropertyCheck {
        property: format!("compatible({c})"),
        passed,
        cases: cases_v.len(),
        worst_ratio: ratio,
        witness: (!passed).then(|| PropertyWitness::Compatible {
            u: maps[cases_v[i].0].clone(),
            order: cases_v[i].1,
            lhs,
            rhs,
        }),
    }
}
