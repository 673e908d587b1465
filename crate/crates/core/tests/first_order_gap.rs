use bnn_verify::encode::{
    build_cliques, encode_lp, encode_standard, Objective, PerturbationRegion,
};
use bnn_verify::generate::anchored_net;
use bnn_verify::poly::rational;
use bnn_verify::sdp::{
    assemble_moment_sdp, exact_feasibility, exact_functional_value, first_order_gap_fixture,
    first_order_gap_moments,
};
use bnn_verify::solver::{solve_lp, SolveOptions, SolveStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fixture_is_feasible_with_value_minus_one_and_lp_is_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let a = anchored_net([3, 6, 5, 2], &mut rng).unwrap();
        let fx = first_order_gap_fixture(&a.net, a.neuron).unwrap();
        let region = PerturbationRegion::linf(vec![0.0; a.net.input_dim()], 1.0).unwrap();
        let obj = Objective::custom(fx.objective.clone());
        let inst = encode_standard(&a.net, &region, &obj).unwrap();
        let cliques = build_cliques(&a.net);
        let msdp = assemble_moment_sdp(&inst, &cliques).unwrap();
        let y = first_order_gap_moments(&a.net, &msdp, a.neuron, &a.anchor).unwrap();
        exact_feasibility(&msdp, &y).unwrap();
        let value = exact_functional_value(&msdp.index, &fx.objective_exact, &y).unwrap();
        assert_eq!(value, rational(-1, 1));

        let block = msdp
            .blocks
            .iter()
            .find(|b| b.variables == fx.variables)
            .expect("last-layer clique");
        let s = block.size();
        for i in 0..s {
            for j in 0..s {
                assert_eq!(y[block.id(i, j)], fx.moment_matrix_exact[i][j]);
            }
        }

        let lp = encode_lp(&a.net, &region, &obj).unwrap();
        let r = solve_lp(&lp, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.primal_objective >= -1e-6, "{}", r.primal_objective);
    }
}
