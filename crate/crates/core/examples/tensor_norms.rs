//! Projective, symmetric and compatibility checks for the ℓ1 and ℓ∞ tensor norms.
//!
//! cargo run --example tensor_norms

use lipjet::tensor::{lift_linear_map, verify_norm_properties, LinearMap, NormFamily, SymTensor};

fn main() -> lipjet::Result<()> {
    let a = SymTensor::vector(vec![1.0, -2.0])?;
    let b = SymTensor::vector(vec![0.5, 3.0])?;
    let ab = a.tensor_product(&b)?;
    for fam in [NormFamily::ell1(), NormFamily::ellinf()] {
        println!(
            "{fam}: ‖a⊗b‖ = {:.3}, ‖a‖‖b‖ = {:.3}",
            fam.tensor_norm(&ab)?,
            fam.tensor_norm(&a)? * fam.tensor_norm(&b)?
        );
        let report = verify_norm_properties(&fam, 3, 3, 200, 42)?;
        for c in &report.checks {
            println!("  {:<14} passed={} worst ratio {:.6}", c.property, c.passed, c.worst_ratio);
        }
    }

    let u = LinearMap::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]])?;
    let fam = NormFamily::ellinf();
    for k in 1..=3 {
        let lifted = lift_linear_map(&u, k)?.op_norm(&fam, &fam)?;
        println!("ℓ∞: ‖u^⊗{k}‖ = {lifted:.4}, ‖u‖^{k} = {:.4}", u.subordinate_norm(&fam).powi(k as i32));
    }
    Ok(())
}
