//! Local inverse of φ(x) = x + 0.1 sin x by the contraction x ↦ x + dφ(x0)⁻¹(y − φ(x)).

use lipjet::inverse::{inverse_jet, solve_local_inverse, InverseProblem};
use lipjet::jet::grid_1d;
use lipjet::smooth::ExprMap;

fn main() -> lipjet::Result<()> {
    let phi = ExprMap::parse(1, &["x0 + 0.1*sin(x0)"])?;
    let prob = InverseProblem::calibrate(phi, vec![0.0], 2.5, 0.5, 41)?;
    println!(
        "M1 = {:.4}, M2 = {:.4}, radius {:.4}, working ball α = {:.4}",
        prob.m1(),
        prob.m2(),
        prob.radius(),
        prob.alpha()
    );
    for y in [0.1, -0.08] {
        let r = solve_local_inverse(&prob, &[y], 1e-14)?;
        println!(
            "y = {y}: x = {:.12} in {} steps, residual {:.1e}, contraction ≤ {:.4}",
            r.x[0], r.iterations, r.residual, r.max_contraction
        );
    }
    let ball = prob.check_inner_ball(40)?;
    println!("B(x0, α/3) maps into V0: {} ({} samples)", ball.passed, ball.samples);

    let half = 0.9 * prob.alpha() / (2.0 * prob.m2());
    let ij = inverse_jet(&prob, grid_1d(-half, half, 11), 1e-14)?;
    for i in [0, 5, 10] {
        let y = ij.jet.points()[i][0];
        println!(
            "ψ({y:+.3}) = {:+.6}, ψ' = {:.6}, ψ'' = {:+.6}",
            ij.jet.value(i)[0],
            ij.jet.level(i, 1).coeffs()[0],
            ij.jet.level(i, 2).coeffs()[0]
        );
    }
    Ok(())
}
