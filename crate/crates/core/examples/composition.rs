//! Compose two jets whose clouds line up and compare with the symbolic chain rule.

use lipjet::calculus::compose;
use lipjet::jet::{grid_1d, LipGrade, LipJet};
use lipjet::smooth::{ExprMap, SmoothMap};
use lipjet::tensor::NormFamily;

fn main() -> lipjet::Result<()> {
    let grade = LipGrade::new(3.5)?;
    let f = ExprMap::parse(1, &["sin(x0)"])?;
    let g = ExprMap::parse(1, &["exp(x0)"])?;
    let xs = grid_1d(-1.0, 1.0, 21);
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| f.eval(x)).collect();
    let fj = LipJet::from_map(&f, xs.clone(), grade)?;
    let gj = LipJet::from_map(&g, ys, grade)?;
    let fam = NormFamily::ellinf();
    let c = compose(&gj, &fj, &fam, &fam)?;

    let oracle = ExprMap::parse(1, &["exp(sin(x0))"])?;
    let mut worst = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        for k in 0..=grade.n {
            let want = oracle.derivative(x, k)?.coeffs()[0];
            worst = worst.max((c.jet.level(i, k).coeffs()[0] - want).abs());
        }
    }
    println!("levels 0..={} of exp∘sin match the chain rule to {worst:.1e}", grade.n);
    println!(
        "M(g∘f) = {:.4}, M(g) = {:.4}, M(f) = {:.4}, realized constant {:.4}",
        c.certificate.m, c.outer.m, c.inner.m, c.realized_constant
    );
    Ok(())
}
