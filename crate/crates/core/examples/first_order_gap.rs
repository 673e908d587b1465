//! A moment point that the standard order-1 relaxation accepts while the
//! sign objective of one last-layer neuron reaches -1, although that
//! objective is nonnegative on every network point. The LP stays at zero.
//!
//! `cargo run --release --example first_order_gap`

use bnn_verify::encode::{build_cliques, encode_lp, encode_standard, Objective, PerturbationRegion};
use bnn_verify::generate::anchored_net;
use bnn_verify::sdp::{
    assemble_moment_sdp, exact_feasibility, exact_functional_value, first_order_gap_fixture,
    first_order_gap_moments,
};
use bnn_verify::solver::{solve_lp, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let a = anchored_net([5, 6, 5, 2], &mut rng)?;
        let fx = first_order_gap_fixture(&a.net, a.neuron)?;
        println!("net {:?}, last-layer neuron {}", a.net.widths(), a.neuron);
        println!("fixture block:\n{:.3}", fx.moment_matrix);

        let region = PerturbationRegion::linf(vec![0.0; a.net.input_dim()], 1.0)?;
        let obj = Objective::custom(fx.objective.clone());
        let inst = encode_standard(&a.net, &region, &obj)?;
        let msdp = assemble_moment_sdp(&inst, &build_cliques(&a.net))?;
        let y = first_order_gap_moments(&a.net, &msdp, a.neuron, &a.anchor)?;
        exact_feasibility(&msdp, &y)?;
        let value = exact_functional_value(&msdp.index, &fx.objective_exact, &y)?;
        println!("exactly feasible, objective {value}");

        let lp = encode_lp(&a.net, &region, &obj)?;
        let tau = solve_lp(&lp, &SolveOptions { tol: 1e-8, ..SolveOptions::default() })?;
        println!("LP bound {:.2e}\n", tau.primal_objective);
    }
    Ok(())
}
