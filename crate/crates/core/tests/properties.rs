use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use lipjet::calculus::{bilinear_image, embed, postcompose_linear, BilinearMap};
use lipjet::flow::{flow_at, integrate};
use lipjet::inverse::{invertibility_radius, solve_local_inverse, InverseProblem};
use lipjet::jet::{certify, grid_1d, jet_of_polynomial, remainders, LipGrade};
use lipjet::poly::{PolyMap, Polynomial};
use lipjet::smooth::ExprMap;
use lipjet::tensor::{lift_linear_map, LinearMap, NormFamily, Permutation, SymTensor};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn rational_tensor(dim: usize, order: usize) -> impl Strategy<Value = SymTensor<BigRational>> {
    prop::collection::vec((-20i64..=20, 1i64..=9), dim.pow(order as u32)).prop_map(move |c| {
        let coeffs = c.into_iter().map(|(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d))).collect();
        SymTensor::new(dim, order, coeffs).unwrap()
    })
}

fn tensor(dim: usize, order: usize) -> impl Strategy<Value = SymTensor> {
    prop::collection::vec(-2.0f64..2.0, dim.pow(order as u32)).prop_map(move |c| SymTensor::new(dim, order, c).unwrap())
}

fn matrix(n: usize) -> impl Strategy<Value = LinearMap> {
    prop::collection::vec(-1.5f64..1.5, n * n).prop_map(move |e| LinearMap::new(n, n, e).unwrap())
}

fn permutation(k: usize) -> impl Strategy<Value = Permutation> {
    Just((0..k).collect::<Vec<usize>>()).prop_shuffle().prop_map(|v| Permutation::new(v).unwrap())
}

fn cubic_poly() -> impl Strategy<Value = PolyMap> {
    prop::collection::vec(-2.0f64..2.0, 4).prop_map(|c| {
        let terms: Vec<(f64, &[u32])> = vec![(c[0], &[0]), (c[1], &[1]), (c[2], &[2]), (c[3], &[3])];
        PolyMap::scalar(Polynomial::from_terms(1, &terms).unwrap())
    })
}

fn sine_problem() -> InverseProblem {
    let phi = ExprMap::parse(1, &["x0 + 0.1*sin(x0)"]).unwrap();
    InverseProblem::calibrate(phi, vec![0.0], 2.0, 0.5, 41).unwrap()
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn rational_norms_are_permutation_invariant(t in rational_tensor(2, 3), sigma in permutation(3)) {
        for fam in [NormFamily::ell1(), NormFamily::ellinf()] {
            let moved = t.apply_permutation(&sigma).unwrap();
            prop_assert_eq!(fam.tensor_norm_exact(&moved).unwrap(), fam.tensor_norm_exact(&t).unwrap());
        }
    }

    #[test]
    fn projectivity_and_rescaled_families(a in tensor(3, 1), b in tensor(3, 2), alpha in 0.2f64..3.0, beta in 1.0f64..4.0) {
        let base = NormFamily::ell1();
        let families = [
            base.clone(),
            NormFamily::ellinf(),
            base.clone().with_geometric_scales(alpha, 3).unwrap(),
            base.with_scales(vec![beta; 3]).unwrap(),
        ];
        let ab = a.tensor_product(&b).unwrap();
        for fam in &families {
            let lhs = fam.tensor_norm(&ab).unwrap();
            let rhs = fam.tensor_norm(&a).unwrap() * fam.tensor_norm(&b).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300, "{fam}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn lifting_is_functorial(u in matrix(2), v in matrix(2), k in 1usize..=3) {
        let uv = u.compose(&v).unwrap();
        let lhs = lift_linear_map(&uv, k).unwrap();
        let rhs = lift_linear_map(&u, k).unwrap().matrix().compose(lift_linear_map(&v, k).unwrap().matrix()).unwrap();
        let scale = rhs.entries().iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (a, b) in lhs.matrix().entries().iter().zip(rhs.entries()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn polynomial_remainders_vanish(p in cubic_poly()) {
        let jet = jet_of_polynomial(&p, grid_1d(-1.0, 1.0, 7), LipGrade::new(4.0).unwrap()).unwrap();
        let table = remainders(&jet, &NormFamily::ellinf()).unwrap();
        for e in &table.entries {
            prop_assert!(e.norm <= 1e-10, "R_{}({}, {}) = {}", e.k, e.x, e.y, e.norm);
        }
    }

    #[test]
    fn certificate_is_attained(p in cubic_poly()) {
        let fam = NormFamily::ellinf();
        let jet = jet_of_polynomial(&p, grid_1d(-1.0, 1.0, 9), LipGrade::new(2.5).unwrap()).unwrap();
        let c = certify(&jet, &fam).unwrap();
        let again = c.witness.recompute(&jet, &fam).unwrap();
        prop_assert!((again - c.m).abs() <= 1e-12 * c.m.max(1.0));
        prop_assert_eq!(c.m == 0.0, jet.all_levels().iter().flatten().all(|l| l.max_abs() == 0.0));
        for levels in jet.all_levels() {
            for l in levels {
                prop_assert!(l.components().iter().all(|t| t.is_symmetric()));
            }
        }
    }

    #[test]
    fn embedding_contract(p in cubic_poly(), gp in 0.2f64..1.9) {
        let jet = jet_of_polynomial(&p, grid_1d(-1.0, 1.0, 11), LipGrade::new(2.0).unwrap()).unwrap();
        prop_assert!(embed(&jet, gp, &NormFamily::ellinf()).unwrap().holds);
    }

    #[test]
    fn bilinear_product_rule(p in cubic_poly(), q in cubic_poly()) {
        let pts = grid_1d(-1.0, 1.0, 5);
        let g = LipGrade::new(2.0).unwrap();
        let (f, h) = (jet_of_polynomial(&p, pts.clone(), g).unwrap(), jet_of_polynomial(&q, pts, g).unwrap());
        let prod = bilinear_image(&BilinearMap::scalar_product(), &f, &h, &NormFamily::ellinf()).unwrap();
        for i in 0..f.len() {
            let want = f.level(i, 1).coeffs()[0] * h.value(i)[0] + f.value(i)[0] * h.level(i, 1).coeffs()[0];
            prop_assert_eq!(prod.level(i, 1).coeffs()[0], want);
        }
    }

    #[test]
    fn postcompose_scales_certificate(p in cubic_poly(), lambda in -3.0f64..3.0) {
        let fam = NormFamily::ellinf();
        let jet = jet_of_polynomial(&p, grid_1d(-1.0, 1.0, 7), LipGrade::new(2.5).unwrap()).unwrap();
        let u = LinearMap::from_rows(&[vec![1.0], vec![-0.5]]).unwrap();
        let base = certify(&postcompose_linear(&u, &jet).unwrap(), &fam).unwrap().m;
        let scaled = certify(&postcompose_linear(&u.scale(lambda), &jet).unwrap(), &fam).unwrap().m;
        prop_assert!((scaled - lambda.abs() * base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn radius_monotonicity(a in 0.05f64..1.0, b in 0.05f64..1.0, g1 in 1.05f64..3.0, g2 in 1.05f64..3.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        for gamma in [g1, g2] {
            prop_assert!(invertibility_radius(gamma, hi).unwrap() <= invertibility_radius(gamma, lo).unwrap() + 1e-12);
        }
        // within one integer part, t^{n+ε} falls with ε exactly when t < 1
        let n = g1.ceil() - 1.0;
        let (e1, e2) = (g1 - n, (g2 - g2.ceil() + 1.0).max(g1 - n));
        let r1 = invertibility_radius(n + e1, a).unwrap();
        let r2 = invertibility_radius(n + e2, a).unwrap();
        if r1 <= 1.0 {
            prop_assert!(r2 + 1e-9 >= r1, "ε {e1} → {e2}: {r1} vs {r2}");
        } else {
            prop_assert!(r2 <= r1 + 1e-9, "ε {e1} → {e2}: {r1} vs {r2}");
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn inverse_round_trip(x in -0.15f64..0.15) {
        let prob = sine_problem();
        let tol = 1e-13;
        let y = x + 0.1 * x.sin();
        let r = solve_local_inverse(&prob, &[y], tol).unwrap();
        prop_assert!((r.x[0] - x).abs() <= 2.0 * tol / 0.5);
        prop_assert!(r.residual <= tol);
        for w in r.steps.windows(2) {
            if w[0] > 1e-12 {
                prop_assert!(w[1] <= 0.5 * w[0]);
            }
        }
    }

    #[test]
    fn flow_is_deterministic_and_a_group(y in -2.0f64..2.0, s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let a = ExprMap::parse(1, &["sin(x0)"]).unwrap();
        let tol = 1e-10;
        prop_assert_eq!(integrate(&a, &[y], t, tol).unwrap(), integrate(&a, &[y], t, tol).unwrap());
        let direct = flow_at(&a, &[y], s + t, tol).unwrap()[0];
        let split = flow_at(&a, &flow_at(&a, &[y], t, tol).unwrap(), s, tol).unwrap()[0];
        prop_assert!((direct - split).abs() <= 10.0 * tol);
    }
}
