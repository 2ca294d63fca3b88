//! Integrate the pendulum field and check the flow's Lipschitz and confinement bounds.

use lipjet::flow::{
    comparison_bound, confinement_check, flow_space_lipschitz_check, integrate, time_space_check, VectorField,
};

fn main() -> lipjet::Result<()> {
    let a = VectorField::parse(&["x1", "-sin(x0)"], vec![[-4.0, 4.0], [-4.0, 4.0]], 2.0)?;
    let norms = a.measure(41)?;
    println!("‖A‖∞ = {:.4}, ‖A‖Lip-1 = {:.4}, ‖A‖Lip-γ = {:.4}", norms.sup, norms.lip1, norms.lip_gamma);

    let tol = 1e-10;
    let tr = integrate(a.map(), &[1.0, 0.0], 2.0, tol)?;
    println!(
        "Ã(2, (1, 0)) = {:?} after {} steps ({} rejected)",
        tr.final_state(),
        tr.accepted,
        tr.rejected
    );
    println!("Grönwall bound for ‖u'‖ ≤ u + 1, u(0) = 0.1 at t = 2: {:.4}", comparison_bound(1.0, 1.0, 0.1, 2.0));

    let pairs = vec![(vec![0.9, 0.1], vec![1.1, -0.1]), (vec![0.5, 0.0], vec![0.6, 0.2])];
    let samples = vec![(0.0, vec![1.0, 0.0]), (0.5, vec![1.1, 0.0]), (-0.7, vec![0.8, 0.3])];
    let certs = [
        flow_space_lipschitz_check(&a, &norms, &[1.0, -1.0], &pairs, tol)?,
        time_space_check(&a, &norms, &samples, tol)?,
        confinement_check(&a, &norms, &[1.0, 0.0], 0.5, 1.0, 4, tol)?,
    ];
    for c in &certs {
        println!("{:?}: margin {:.4}, worst ratio {:.4}, passed {}", c.kind, c.margin, c.max_ratio, c.passed);
    }
    Ok(())
}
