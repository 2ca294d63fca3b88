//! Certify the Lip-γ norm of t ↦ t³ sampled on [−1, 1].

use lipjet::jet::{certify, grid_1d, LipGrade, LipJet, Witness};
use lipjet::smooth::ExprMap;
use lipjet::tensor::NormFamily;

fn main() -> lipjet::Result<()> {
    let f = ExprMap::parse(1, &["x0^3"])?;
    let fam = NormFamily::ellinf();
    for gamma in [1.0, 1.5, 2.0, 3.0] {
        let jet = LipJet::from_map(&f, grid_1d(-1.0, 1.0, 101), LipGrade::new(gamma)?)?;
        let c = certify(&jet, &fam)?;
        let at = match c.witness {
            Witness::Level { point, k, .. } => format!("‖f^{k}‖ at x = {:.2}", jet.points()[point][0]),
            Witness::Remainder { x, y, k, .. } => {
                format!("R_{k} between {:.2} and {:.2}", jet.points()[x][0], jet.points()[y][0])
            }
        };
        println!("γ = {gamma}: M = {:.4} ({at}), {} pairs", c.m, c.pairs);
    }
    Ok(())
}
