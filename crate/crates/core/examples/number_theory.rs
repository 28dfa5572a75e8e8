//! The gcd lemma, solution lattices of k(aᵐ−1) + l(aⁿ−1) = 0 and their matrix
//! analogue, and the Bézout polynomials for coprime exponents.

use recurlab::nt::{
    bezout_expand, bezout_polynomials, check_matrix_lattice, check_scalar_lattice, gcd_mersenne, matrix_lattice,
    scalar_lattice,
};

fn main() -> recurlab::error::Result<()> {
    let g = gcd_mersenne(2, 12, 18)?;
    println!("gcd(2^12 − 1, 2^18 − 1) = {} (identity holds: {})", g.gcd, g.holds);

    let lat = scalar_lattice(2, 4, 2)?;
    let check = check_scalar_lattice(&lat, 200)?;
    println!(
        "a = 2, m = 4, n = 2: (k0, l0) = ({}, {}), complete in |k|,|l| ≤ 200: {}",
        lat.k0,
        lat.l0,
        check.complete()
    );

    let fib = vec![vec![1, 1], vec![1, 0]];
    let ml = matrix_lattice(&fib, 3, 2)?;
    println!(
        "Fibonacci matrix, m = 3, n = 2: complete in [−5, 5]: {}",
        check_matrix_lattice(&ml, 5)?.complete()
    );

    let (u, v) = bezout_polynomials(5, 3)?;
    println!("u = {u}, v = {v}, expansion = {}", bezout_expand(5, 3, &u, &v));
    Ok(())
}
