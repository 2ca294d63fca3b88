//! Cartesian product and bilinear images of jets on a shared cloud.

use lipjet::calculus::{bilinear_image, cartesian_product, BilinearMap};
use lipjet::jet::{certify, grid_1d, LipGrade, LipJet, Pairing};
use lipjet::smooth::ExprMap;
use lipjet::tensor::NormFamily;

fn main() -> lipjet::Result<()> {
    let pts = grid_1d(-1.0, 1.0, 41);
    let grade = LipGrade::new(2.0)?;
    let f = LipJet::from_map(&ExprMap::parse(1, &["x0^2"])?, pts.clone(), grade)?;
    let g = LipJet::from_map(&ExprMap::parse(1, &["cos(x0)"])?, pts, grade)?;
    let fam = NormFamily::ellinf();
    let (mf, mg) = (certify(&f, &fam)?.m, certify(&g, &fam)?.m);
    println!("M(f) = {mf:.4}, M(g) = {mg:.4}");

    for pairing in [Pairing::L1, Pairing::L2, Pairing::Linf] {
        let fg = cartesian_product(&f, &g, pairing)?;
        println!("(f, g) with {pairing:?} pairing: M = {:.4}", certify(&fg, &fam)?.m);
    }

    let b = BilinearMap::scalar_product();
    let prod = bilinear_image(&b, &f, &g, &fam)?;
    let m = certify(&prod, &fam)?.m;
    println!("f·g: M = {m:.4}, ratio to M(f)M(g) = {:.4}", m / (mf * mg));
    Ok(())
}
