//! The built-in ADMM conic solver on a 2x2 PSD problem:
//! minimize `t` subject to `[[1, t], [t, 1]] ⪰ 0`, optimum -1.
//!
//! `cargo run --example conic_solver`

use bnn_verify::poly::{Monomial, VariableId};
use bnn_verify::sdp::{BlockInfo, ConeSpec, ConicProblem, RowLabel};
use bnn_verify::solver::{residuals, solve_conic, SolveOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r2 = std::f64::consts::SQRT_2;
    let block = |i, j| RowLabel::Block { block: 0, i, j };
    let p = ConicProblem {
        c: vec![1.0],
        c0: 0.0,
        a: vec![(1, 0, -r2)],
        b: vec![1.0, 0.0, 1.0],
        cones: ConeSpec { zero: 0, nonneg: 0, psd: vec![2] },
        columns: vec![Monomial::one()],
        rows: vec![block(0, 0), block(0, 1), block(1, 1)],
        blocks: vec![BlockInfo { clique: 0, variables: vec![VariableId::new(0, 0)] }],
    };
    for tol in [1e-4, 1e-6, 1e-8] {
        let r = solve_conic(&p, &SolveOptions { tol, ..SolveOptions::default() })?;
        let res = residuals(&p, &r.x, &r.y, &r.s);
        println!(
            "tol {tol:.0e}: {:?} after {} iterations, t = {:.10}, dual {:.10}, residuals {res:?}",
            r.status, r.iterations, r.x[0], r.dual_objective
        );
    }
    Ok(())
}
