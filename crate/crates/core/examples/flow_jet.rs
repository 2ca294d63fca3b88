//! The flow of a Lip-γ field as a space-time jet, with the derivative Hölder checks.

use lipjet::flow::{flow_jet, FlowGrid, VectorField};

fn main() -> lipjet::Result<()> {
    let a = VectorField::parse(&["sin(x0)"], vec![[-4.0, 4.0]], 2.5)?;
    let grid = FlowGrid { times: 5, per_axis: 5, measure_per_axis: 81 };
    let fj = flow_jet(&a, &[0.5], 0.5, 1.0, grid, 1e-11)?;
    println!("flow jet on {} space-time points: M = {:.4}", fj.jet.len(), fj.certificate.m);
    if let Some(h) = fj.holder {
        println!("ε = {}: m1 = {:.3}, m2 = {:.3}, m3 = {:.3}, m4 = {:.3}", h.eps, h.m1, h.m2, h.m3, h.m4);
    }
    for c in &fj.checks {
        println!("{:?}: margin {:.4}, passed {}", c.kind, c.margin, c.passed);
    }
    let i = fj.jet.len() - 1;
    let p = &fj.jet.points()[i];
    println!(
        "at (t, y) = ({}, {}): Ã = {:.6}, ∂t Ã = {:.6}, ∂y Ã = {:.6}",
        p[0],
        p[1],
        fj.jet.value(i)[0],
        fj.jet.level(i, 1).coeffs()[0],
        fj.jet.level(i, 1).coeffs()[1]
    );
    Ok(())
}
