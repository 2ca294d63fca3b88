//! Embed a Lip-γ jet into Lip-γ' and compare with the embedding constants.

use lipjet::calculus::{embed, embed_constant, general_embed_cap, EmbedVariant};
use lipjet::jet::{grid_1d, LipGrade, LipJet};
use lipjet::smooth::ExprMap;
use lipjet::tensor::NormFamily;

fn main() -> lipjet::Result<()> {
    let f = ExprMap::parse(1, &["sin(3*x0)"])?;
    let jet = LipJet::from_map(&f, grid_1d(-1.0, 1.0, 61), LipGrade::new(3.0)?)?;
    let fam = NormFamily::ellinf();
    for gp in [0.5, 1.0, 2.0, 2.5] {
        let e = embed(&jet, gp, &fam)?;
        let convex = embed_constant(3.0, gp, EmbedVariant::Convex)?;
        println!(
            "γ' = {gp}: M' = {:.4} ≤ {:.3}·{:.4} = {:.4} ({}); convex constant {:.3}, cap {:.2}",
            e.certificate.m,
            e.constant.value,
            e.source.m,
            e.bound,
            e.holds,
            convex.value,
            general_embed_cap(gp)
        );
    }
    Ok(())
}
