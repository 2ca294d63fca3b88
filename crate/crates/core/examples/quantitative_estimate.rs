//! Near a point where every level vanishes the Lip-γ' norm shrinks linearly with the ball.

use lipjet::calculus::{localize_vanishing, quantitative_factor};
use lipjet::jet::{grid_1d, LipGrade, LipJet};
use lipjet::smooth::ExprMap;
use lipjet::tensor::NormFamily;

fn main() -> lipjet::Result<()> {
    let f = ExprMap::parse(1, &["x0^3"])?;
    let jet = LipJet::from_map(&f, grid_1d(-1.0, 1.0, 101), LipGrade::new(2.0)?)?;
    let x0 = jet.find_point(&[0.0]).expect("0 is on the grid");
    let fam = NormFamily::ellinf();
    for delta in [0.5, 0.25, 0.125, 0.0625] {
        let e = localize_vanishing(&jet, x0, 1.0, delta, &fam)?;
        println!(
            "δ = {delta:<6}: local Lip-1 {:.5} ≤ {:.5} (factor {:.4}, {} points)",
            e.local,
            e.bound,
            quantitative_factor(2.0, 1.0, delta)?,
            e.ball_points
        );
    }
    Ok(())
}
