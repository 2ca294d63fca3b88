//! The shuffle identity over S_N checked in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;

use lipjet::calculus::sym_group_identity_check;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn main() -> lipjet::Result<()> {
    let vs = vec![
        vec![q(1, 2), q(-3, 1), q(2, 5)],
        vec![q(0, 1), q(7, 3), q(-1, 4)],
        vec![q(5, 6), q(1, 1), q(-2, 1)],
        vec![q(-1, 7), q(2, 3), q(3, 2)],
    ];
    for i in 1..=vs.len() {
        let c = sym_group_identity_check(&vs, i)?;
        println!(
            "N = {}, i = {i}: as written {}, against symmetric maps {}",
            vs.len(),
            c.verbatim_equal,
            c.tail_symmetrized_equal
        );
    }
    Ok(())
}
