//! Generator bases and the Bloch coordinate map.
//!
//! ```bash
//! cargo run --example basis_tour
//! ```

use qlyap::algebra::{GeneratorBasis, trace_of_product};
use qlyap::state::{DensityMatrix, sample_isospectral};

fn main() -> qlyap::Result<()> {
    for n in [2usize, 3, 4] {
        let basis = GeneratorBasis::new(n)?;
        let mut worst: f64 = 0.0;
        for j in 0..basis.len() {
            for k in 0..basis.len() {
                let t = trace_of_product(basis.generator(j), basis.generator(k));
                let expect = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((t.re - expect).abs()).max(t.im.abs());
            }
        }
        println!("n = {n}: {} generators, orthonormality error {worst:.2e}", basis.len());
    }

    // Bloch map: coordinates of a state, and the exact roundtrip
    let basis = GeneratorBasis::new(3)?;
    let rho = DensityMatrix::from_diagonal(&[0.25, 0.25, 0.5])?;
    let s = basis.bloch_of_matrix(rho.matrix())?;
    println!("\nBloch coordinates of diag(1/4, 1/4, 1/2): {:?}", s.as_slice());
    let back = basis.matrix_of_bloch(&s)?;
    let err = (rho.matrix() - back).iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("roundtrip error: {err:.2e}");

    // the map is an isometry: Hilbert-Schmidt distance = Euclidean distance
    let other = sample_isospectral(&rho, 7);
    let t = basis.bloch_of_matrix(other.matrix())?;
    let d = rho.matrix() - other.matrix();
    let hs: f64 = d.iter().map(|z| z.norm_sqr()).sum();
    let eu = (&s - &t).norm_squared();
    println!("isometry check: Tr[(r1 - r2)^2] = {hs:.12}, |s1 - s2|^2 = {eu:.12}");
    Ok(())
}
