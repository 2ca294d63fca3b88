//! One-dimensional searches used for the embedding constants and radii.

/// Result of a 1-D minimization over `δ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub value: f64,
    pub argmin: f64,
}

const GRID_POINTS: usize = 1201;
const LOG_LO: f64 = -6.0;
const LOG_HI: f64 = 6.0;

/// Infimum of `f` over `δ ∈ [1e-6, 1e6]`.
///
/// A uniform grid on `log10 δ` locates the best bracket, golden-section search
/// refines it to 1e-10 relative width, and `candidates` (points where the
/// caller knows a closed-form value) are always evaluated too.
pub fn log_infimum(f: impl Fn(f64) -> f64, candidates: &[f64]) -> Minimum {
    let step = (LOG_HI - LOG_LO) / (GRID_POINTS - 1) as f64;
    let g = |s: f64| f(10f64.powf(s));
    let mut best = Minimum {
        value: f64::INFINITY,
        argmin: f64::NAN,
    };
    let mut consider = |delta: f64, v: f64| {
        if v < best.value {
            best = Minimum { value: v, argmin: delta };
        }
    };
    let mut best_i = 0;
    let mut best_grid = f64::INFINITY;
    for i in 0..GRID_POINTS {
        let s = LOG_LO + step * i as f64;
        let v = g(s);
        if v < best_grid {
            best_grid = v;
            best_i = i;
        }
        consider(10f64.powf(s), v);
    }
    let (mut a, mut b) = (
        LOG_LO + step * best_i.saturating_sub(1) as f64,
        LOG_LO + step * (best_i + 1).min(GRID_POINTS - 1) as f64,
    );
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while (b - a).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = g(d);
        }
    }
    consider(10f64.powf(c), fc);
    consider(10f64.powf(d), fd);
    for &delta in candidates {
        consider(delta, f(delta));
    }
    best
}

/// Largest `t ∈ [lo, hi]` with `g(t) ≤ target`, for nondecreasing `g` with
/// `g(lo) ≤ target`. Bisection runs until the bracket stops shrinking in `f64`.
pub fn bisect_largest(g: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64) -> f64 {
    if g(hi) <= target {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if g(mid) <= target {
            a = mid;
        } else {
            b = mid;
        }
    }
    a
}
