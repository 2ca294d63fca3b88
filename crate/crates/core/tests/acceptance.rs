//! Acceptance run: every criterion prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lipjet::calculus::{
    compose, embed, embed_constant, general_embed_cap, localize_vanishing, quantitative_factor,
    sym_group_identity_check, EmbedVariant,
};
use lipjet::expr::Expr;
use lipjet::flow::{
    confinement_check, flow_at, flow_jacobian, flow_space_lipschitz_check, time_space_check, VectorField,
};
use lipjet::inverse::{invertibility_radius, inverse_jet, solve_local_inverse, InverseProblem};
use lipjet::jet::{box_grid, certify, grid_1d, jet_of_polynomial, LipGrade, LipJet};
use lipjet::poly::{PolyMap, Polynomial};
use lipjet::smooth::{ExprMap, SmoothMap};
use lipjet::tensor::{lift_linear_map, verify_norm_properties, LinearMap, NormFamily};

type Outcome = Result<String, String>;

fn cubic(points: usize, gamma: f64) -> LipJet {
    let p = PolyMap::scalar(Polynomial::from_terms(1, &[(1.0, &[3])]).unwrap());
    jet_of_polynomial(&p, grid_1d(-1.0, 1.0, points), LipGrade::new(gamma).unwrap()).unwrap()
}

fn sine_problem() -> InverseProblem {
    let phi = ExprMap::parse(1, &["x0 + 0.1*sin(x0)"]).unwrap();
    InverseProblem::calibrate(phi, vec![0.0], 2.0, 0.5, 41).unwrap()
}

/// Targets spread over 90% of V0 = B(φ(x0), α/(2 M2)).
fn v0_targets(prob: &InverseProblem, count: usize) -> Vec<Vec<f64>> {
    let half = 0.9 * prob.alpha() / (2.0 * prob.m2());
    grid_1d(-half, half, count)
}

fn ell_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn combinatorial_lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rational = || BigRational::new(BigInt::from(rng.gen_range(-9..=9)), BigInt::from(rng.gen_range(1..=7)));
    let mut jobs = Vec::new();
    for _ in 0..50 {
        for n in 1..=5 {
            let vs: Vec<Vec<BigRational>> = (0..n).map(|_| (0..3).map(|_| rational()).collect()).collect();
            jobs.extend((1..=n).map(|i| (vs.clone(), i)));
        }
    }
    let verdicts = jobs
        .par_iter()
        .map(|(vs, i)| {
            let c = sym_group_identity_check(vs, *i).map_err(|e| e.to_string())?;
            if c.lhs != c.rhs_tail_symmetrized {
                return Err(format!("N = {}, i = {i}: sides differ", vs.len()));
            }
            Ok(!c.verbatim_equal)
        })
        .collect::<Result<Vec<bool>, String>>()?;
    let verbatim_mismatch = verdicts.iter().filter(|&&m| m).count();
    Ok(format!(
        "{} exact cases agree against symmetric maps ({verbatim_mismatch} differ before tail symmetrization, all with N − i ≥ 2)",
        verdicts.len()
    ))
}

fn composition_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grade = LipGrade::new(4.5).unwrap();
    let fam = NormFamily::ellinf();
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let (d, e, m) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=2));
        let f = PolyMap::new((0..e).map(|_| Polynomial::random(&mut rng, d, 3, 4)).collect()).unwrap();
        let g = PolyMap::new((0..m).map(|_| Polynomial::random(&mut rng, e, 3, 4)).collect()).unwrap();
        let xs: Vec<Vec<f64>> = (0..11).map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        let mut ys: Vec<Vec<f64>> = Vec::new();
        for x in &xs {
            let y = f.eval(x);
            if !ys.contains(&y) {
                ys.push(y);
            }
        }
        let fj = jet_of_polynomial(&f, xs.clone(), grade).unwrap();
        let gj = jet_of_polynomial(&g, ys, grade).unwrap();
        let c = compose(&gj, &fj, &fam, &fam).map_err(|e| format!("trial {trial}: {e}"))?;
        // independent oracle: substitute f into g symbolically, then differentiate
        let inner = f.to_exprs();
        let gf: Vec<Expr> = g.to_exprs().iter().map(|ge| ge.substitute(&inner)).collect();
        let oracle = ExprMap::new(d, gf).unwrap();
        for (i, x) in xs.iter().enumerate() {
            for k in 0..=4 {
                let want = oracle.derivative(x, k).unwrap();
                let got = c.jet.level(i, k);
                let scale = want.coeffs().iter().fold(1.0f64, |s, v| s.max(v.abs()));
                let err = got.coeffs().iter().zip(want.coeffs()).fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
                worst = worst.max(err / scale);
            }
        }
    }
    if worst <= 1e-10 {
        Ok(format!("worst relative error {worst:.2e} over 100 pairs, k ≤ 4"))
    } else {
        Err(format!("worst relative error {worst:.2e}"))
    }
}

fn embedding_caps() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_g, mut worst_c) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let gamma = rng.gen_range(0.05..=6.0);
        let gp: f64 = rng.gen_range(0.0..gamma);
        let gp = gp.max(1e-3).min(gamma * 0.999);
        let g = embed_constant(gamma, gp, EmbedVariant::General).map_err(|e| e.to_string())?;
        let c = embed_constant(gamma, gp, EmbedVariant::Convex).map_err(|e| e.to_string())?;
        worst_g = worst_g.max(g.value / general_embed_cap(gp));
        worst_c = worst_c.max(c.value / 4.0);
    }
    if worst_g <= 1.0 && worst_c <= 1.0 {
        Ok(format!("max M/cap {worst_g:.4}, max m/4 {worst_c:.4}"))
    } else {
        Err(format!("max M/cap {worst_g:.4}, max m/4 {worst_c:.4}"))
    }
}

const EMBED_SCHEDULE: [(f64, f64); 5] = [(2.0, 1.0), (3.0, 1.5), (2.5, 0.5), (4.0, 2.0), (1.5, 1.0)];

fn embedding_contract() -> Outcome {
    let fam = NormFamily::ellinf();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    let mut tightest = 0.0f64;
    let polys: Vec<(PolyMap, Vec<Vec<f64>>)> = (0..20)
        .map(|_| {
            let d = rng.gen_range(1..=2);
            let pts = if d == 1 { grid_1d(-1.0, 1.0, 21) } else { box_grid(&[-1.0; 2], &[1.0; 2], 5) };
            (PolyMap::scalar(Polynomial::random(&mut rng, d, 4, 5)), pts)
        })
        .collect();
    for &(gamma, gp) in &EMBED_SCHEDULE {
        let mut jets = vec![cubic(101, gamma)];
        for (p, pts) in &polys {
            jets.push(jet_of_polynomial(p, pts.clone(), LipGrade::new(gamma).unwrap()).unwrap());
        }
        for j in &jets {
            let e = embed(j, gp, &fam).map_err(|e| e.to_string())?;
            if !e.holds {
                return Err(format!("(γ, γ') = ({gamma}, {gp}): {} > {}", e.certificate.m, e.bound));
            }
            if e.bound > 0.0 {
                tightest = tightest.max(e.certificate.m / e.bound);
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} embeddings hold, tightest ratio {tightest:.3}"))
}

fn quantitative_estimate() -> Outcome {
    let fam = NormFamily::ellinf();
    let jet = cubic(101, 2.0);
    let x0 = jet.find_point(&[0.0]).ok_or("0 is not a grid point")?;
    let mut previous: Option<f64> = None;
    let mut lines = Vec::new();
    for delta in [0.5, 0.25, 0.125] {
        let e = localize_vanishing(&jet, x0, 1.0, delta, &fam).map_err(|e| e.to_string())?;
        if !(e.holds && e.local <= 4.0 * e.m * delta) {
            return Err(format!("δ = {delta}: local {} vs 4Mδ = {}", e.local, 4.0 * e.m * delta));
        }
        let factor = quantitative_factor(2.0, 1.0, delta).map_err(|e| e.to_string())?;
        if let Some(p) = previous {
            if ((factor / p) - 0.5).abs() > 1e-12 {
                return Err(format!("bound ratio {} at δ = {delta}", factor / p));
            }
        }
        previous = Some(factor);
        lines.push(format!("δ={delta}: {:.4} ≤ {:.4}", e.local, 4.0 * e.m * delta));
    }
    Ok(lines.join(", "))
}

fn radius_closed_forms() -> Outcome {
    let a = invertibility_radius(1.0, 1.0).map_err(|e| e.to_string())?;
    let b = invertibility_radius(2.0, 1.0).map_err(|e| e.to_string())?;
    let want = (3f64.sqrt() - 1.0) / 2.0;
    if a == 0.5 && (b - want).abs() <= 1e-10 {
        Ok(format!("δ(1) = {a}, δ(2) = {b:.12}"))
    } else {
        Err(format!("δ(1) = {a}, δ(2) = {b} vs {want}"))
    }
}

fn fixed_point_solver() -> Outcome {
    let prob = sine_problem();
    let mut worst_res = 0.0f64;
    let mut worst_q = 0.0f64;
    for y in v0_targets(&prob, 20) {
        let r = solve_local_inverse(&prob, &y, 1e-14).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(r.residual);
        worst_q = worst_q.max(r.max_contraction);
    }
    let ball = prob.check_inner_ball(50).map_err(|e| e.to_string())?;
    let detail = format!(
        "residual {worst_res:.1e}, contraction {worst_q:.3}, {} ball samples inside",
        ball.samples
    );
    if worst_res <= 1e-12 && worst_q <= 0.5 && ball.passed {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn inverse_jet_identity() -> Outcome {
    let prob = sine_problem();
    let ij = inverse_jet(&prob, v0_targets(&prob, 21), 1e-14).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (i, x) in ij.preimages.iter().enumerate() {
        let dpsi = ij.jet.level(i, 1).to_linear().map_err(|e| e.to_string())?;
        let dphi = prob.phi().jacobian(x).map_err(|e| e.to_string())?;
        let prod = dpsi.compose(&dphi).map_err(|e| e.to_string())?;
        let id = LinearMap::identity(prod.rows());
        let err = prod.entries().iter().zip(id.entries()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err);
    }
    let m = certify(&ij.jet, &NormFamily::ellinf()).map_err(|e| e.to_string())?.m;
    let detail = format!("max |dψ·dφ − I| {worst:.1e}, M = {m:.4}");
    if worst <= 1e-10 && m.is_finite() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn flow_closed_form() -> Outcome {
    let f = ExprMap::parse(1, &["sin(x0)"]).unwrap();
    let y = flow_at(&f, &[1.0], 1.0, 1e-8).map_err(|e| e.to_string())?[0];
    let exact = 2.0 * ((0.5f64).tan() * 1f64.exp()).atan();
    let err = (y - exact).abs();
    if err <= 1e-6 {
        Ok(format!("error {err:.1e}"))
    } else {
        Err(format!("error {err:.1e}"))
    }
}

fn pendulum() -> VectorField {
    VectorField::parse(&["x1", "-sin(x0)"], vec![[-4.0, 4.0], [-4.0, 4.0]], 2.0).unwrap()
}

fn flow_bounds() -> Outcome {
    let a = pendulum();
    let norms = a.measure(41).map_err(|e| e.to_string())?;
    let tol = 1e-10;
    let x0 = [0.5, 0.0];
    let r = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut point = || -> Vec<f64> { x0.iter().map(|c| c + rng.gen_range(-r..=r)).collect() };
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..50).map(|_| (point(), point())).collect();
    let space = flow_space_lipschitz_check(&a, &norms, &[1.0, -1.0], &pairs, tol).map_err(|e| e.to_string())?;
    let samples: Vec<(f64, Vec<f64>)> = (0..30).map(|i| (-1.0 + 2.0 * i as f64 / 29.0, point())).collect();
    let ts = time_space_check(&a, &norms, &samples, tol).map_err(|e| e.to_string())?;
    let conf = confinement_check(&a, &norms, &x0, r, 1.0, 5, tol).map_err(|e| e.to_string())?;
    // Jacobian against central differences of the flow
    let h = 1e-5;
    let mut worst = 0.0f64;
    for y in pairs.iter().take(5).map(|p| &p.0) {
        let js = flow_jacobian(&a, y, &[1.0, -1.0], 1e-12).map_err(|e| e.to_string())?;
        for s in &js {
            let scale = ell_inf(s.jacobian.entries()).max(1.0);
            for col in 0..2 {
                let mut up = y.clone();
                let mut dn = y.clone();
                up[col] += h;
                dn[col] -= h;
                let fu = flow_at(a.map(), &up, s.t, 1e-13).map_err(|e| e.to_string())?;
                let fd = flow_at(a.map(), &dn, s.t, 1e-13).map_err(|e| e.to_string())?;
                for row in 0..2 {
                    let cd = (fu[row] - fd[row]) / (2.0 * h);
                    worst = worst.max((cd - s.jacobian.get(row, col)).abs() / scale);
                }
            }
        }
    }
    let allowance = 10.0 * tol;
    let detail = format!(
        "space margin {:.2e}, time-space margin {:.2e}, confinement margin {:.2e}, Jacobian rel err {worst:.1e}",
        space.margin, ts.margin, conf.margin
    );
    if space.margin >= -allowance && space.passed && ts.passed && conf.passed && worst <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn norm_suite() -> Outcome {
    let mut lines = Vec::new();
    for fam in [NormFamily::ell1(), NormFamily::ellinf()] {
        for dim in [2, 4] {
            let rep = verify_norm_properties(&fam, dim, 4, 1000, 11).map_err(|e| e.to_string())?;
            for prop in ["projective", "symmetric"] {
                let c = rep.check(prop).ok_or(format!("{prop} not declared"))?;
                if !c.passed {
                    return Err(format!("{:?} d={dim}: {prop} fails, ratio {}", fam.kind(), c.worst_ratio));
                }
            }
        }
    }
    lines.push("ℓ1/ℓ∞ projective and symmetric at d ∈ {2, 4}, k ≤ 4".to_string());
    let fam = NormFamily::ellinf();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for dim in 1..=4usize {
        for _ in 0..60 {
            let u = LinearMap::new(dim, dim, (0..dim * dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap();
            let un = u.subordinate_norm(&fam);
            for k in 1..=4 {
                let lifted = lift_linear_map(&u, k).unwrap().op_norm(&fam, &fam).map_err(|e| e.to_string())?;
                let cap = (dim as f64).powi(k as i32) * un.powi(k as i32);
                if cap > 0.0 {
                    worst = worst.max(lifted / cap);
                }
            }
        }
    }
    if worst > 1.0 + 1e-12 {
        return Err(format!("ℓ∞ lift exceeds pᵏ‖u‖ᵏ, ratio {worst}"));
    }
    lines.push(format!("ℓ∞ lift / pᵏ‖u‖ᵏ ≤ {worst:.3}"));
    Ok(lines.join("; "))
}

fn flow_group() -> Outcome {
    let a = pendulum();
    let tol = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let (s, t) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let direct = flow_at(a.map(), &y, s + t, tol).map_err(|e| e.to_string())?;
        let mid = flow_at(a.map(), &y, t, tol).map_err(|e| e.to_string())?;
        let two = flow_at(a.map(), &mid, s, tol).map_err(|e| e.to_string())?;
        let d: Vec<f64> = direct.iter().zip(&two).map(|(p, q)| p - q).collect();
        worst = worst.max(ell_inf(&d));
    }
    if worst <= 10.0 * tol {
        Ok(format!("max deviation {worst:.1e} ≤ {:.0e}", 10.0 * tol))
    } else {
        Err(format!("max deviation {worst:.1e}"))
    }
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 12] = [
        ("combinatorial lemma exactness", combinatorial_lemma, 10),
        ("composition oracle equivalence", composition_oracle, 30),
        ("embedding constant caps", embedding_caps, 5),
        ("embedding contract on jets", embedding_contract, 20),
        ("quantitative estimate decay", quantitative_estimate, 5),
        ("inverse radius closed forms", radius_closed_forms, 1),
        ("fixed-point solver", fixed_point_solver, 5),
        ("inverse-jet correctness", inverse_jet_identity, 10),
        ("flow closed form", flow_closed_form, 1),
        ("flow bounds", flow_bounds, 30),
        ("norm property suite", norm_suite, 20),
        ("flow-group property", flow_group, 10),
    ];
    let mut failures = Vec::new();
    for (n, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget} s budget")),
            Err(d) => (false, d),
        };
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s]",
            if ok { "PASS" } else { "FAIL" },
            n + 1,
            elapsed.as_secs_f64()
        );
        if !ok {
            failures.push(n + 1);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
