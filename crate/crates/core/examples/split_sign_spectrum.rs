//! The split-sign moment matrix: it satisfies the split sign constraints yet
//! drives the sign objective negative. Its spectrum is `0` (n times), `1` and
//! `nv + 1`.
//!
//! `cargo run --example split_sign_spectrum`

use bnn_verify::sdp::split_sign_matrix;
use nalgebra::SymmetricEigen;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (w, b) in [
        (vec![1i8, -1, 1], 0.5),
        (vec![1, 0, -1, 1, 1], -1.2),
        (vec![-1, -1, 0, 0, 1, 1, 1], 2.0),
    ] {
        let fx = split_sign_matrix(&w, b)?;
        let mut eig: Vec<f64> = SymmetricEigen::new(fx.matrix.clone()).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        println!(
            "w = {w:?}, b = {b}: a = {:.4}, t = {:.4}, nv = {}, objective {:.4}",
            fx.a, fx.t, fx.nv, fx.objective_value
        );
        println!("  eigenvalues {:?}", eig.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>());
        println!("  trace {:.6}", fx.matrix.trace());
    }
    Ok(())
}
