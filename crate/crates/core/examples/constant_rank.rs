//! Normal form of a rank-one map R² → R² and rank stability of a matrix-valued jet.

use lipjet::inverse::{constant_rank_decompose, perturbation_rank_check, DecomposeOptions};
use lipjet::jet::{box_grid, LipGrade, LipJet};
use lipjet::smooth::{ExprMap, SmoothMap};

fn main() -> lipjet::Result<()> {
    let phi = ExprMap::parse(2, &["x0 + x1", "(x0 + x1)^2"])?;
    let d = constant_rank_decompose(&phi, &[0.2, 0.1], &[0], &[0], 2.0, DecomposeOptions::default())?;
    let r = &d.report;
    println!(
        "rank {}: normal form error {:.1e} on {} of {} samples (passed {})",
        d.rank(),
        r.max_error,
        r.samples_used,
        r.samples,
        r.passed
    );
    // a target inside H, the neighbourhood where f is inverted
    let p = d.problem();
    let half = p.alpha() / (2.0 * p.m2());
    let centre = p.phi().eval(p.x0());
    let y = [centre[0] + 0.4 * half, centre[1] - 0.3 * half];
    println!("g∘φ∘f⁻¹({y:.4?}) = {:.4?}", d.normal_form(&y)?);

    // 2×2 matrices A(x) = [[2 + x0, x1], [0, 1]]: the full minor stays invertible near 0
    let a = ExprMap::parse(2, &["2 + x0", "x1", "0", "1"])?;
    let jet = LipJet::from_map(&a, box_grid(&[-0.5, -0.5], &[0.5, 0.5], 11), LipGrade::new(1.0)?)?;
    let x0 = jet.find_point(&[0.0, 0.0]).expect("centre is on the lattice");
    let c = perturbation_rank_check(&jet, (2, 2), x0, &[0, 1], &[0, 1], None, 1.0)?;
    println!(
        "δ = {:.4}: {} points checked, deviation {:.4} ≤ {:.4}, min rank {} (passed {})",
        c.delta, c.points_checked, c.max_deviation, c.allowed_deviation, c.min_rank, c.passed
    );
    Ok(())
}
