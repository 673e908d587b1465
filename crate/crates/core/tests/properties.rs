use bnn_verify::encode::{
    build_cliques, check_rip, encode_lp, encode_milp, encode_standard, encode_tightened, expected_counts,
    trace_assignment, EncodingKind, Objective, PerturbationRegion, RegionKind,
};
use bnn_verify::generate::{random_affine, random_instance, random_net, RandomInstance};
use bnn_verify::model::{prepare, stabilize_over_box, BatchNorm, RawBnn, RawLayer};
use bnn_verify::oracle::{exact_verify, sample_region, sample_upper_bound};
use bnn_verify::poly::{rational, MultilinearPoly, RationalPoly, VariableId};
use bnn_verify::sdp::{assemble_moment_sdp, point_moments, to_conic, MomentSdp};
use bnn_verify::solver::{residuals, solve_conic, solve_lp, SolveOptions, SolveStatus};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, kind: RegionKind) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&[4, 4, 3, 3], kind, 0.1..=0.8, &mut rng).unwrap()
}

fn kind_strategy() -> impl Strategy<Value = RegionKind> {
    prop_oneof![Just(RegionKind::LinfBall), Just(RegionKind::L2BallBox)]
}

fn small_poly() -> impl Strategy<Value = RationalPoly> {
    prop::collection::vec((-3i64..=3, 0u8..8), 0..5).prop_map(|terms| {
        let mut p = RationalPoly::zero();
        for (c, mask) in terms {
            let mut t = RationalPoly::constant(rational(c, 1));
            for bit in 0..3 {
                if mask >> bit & 1 == 1 {
                    t = t.mul_poly(&RationalPoly::var(VariableId::new(1, bit)));
                }
            }
            p = p + t;
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn ring_laws_modulo_binary_squares(p in small_poly(), q in small_poly(), r in small_poly()) {
        prop_assert_eq!(p.mul_reduced(&q), q.mul_reduced(&p));
        prop_assert_eq!(p.mul_reduced(&(&q + &r)), p.mul_reduced(&q) + p.mul_reduced(&r));
        prop_assert_eq!(p.mul_reduced(&q).mul_reduced(&r), p.mul_reduced(&q.mul_reduced(&r)));
        let x = RationalPoly::var(VariableId::new(1, 0));
        prop_assert_eq!(x.mul_reduced(&x), RationalPoly::constant(rational(1, 1)));
    }

    #[test]
    fn folding_preserves_labels(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = [4, 5, 4, 3];
        let affine = random_affine(&widths, 0.3, &mut rng).unwrap();
        let layers = affine
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let n = l.bias.len();
                let bn = (i + 1 < widths.len() - 1).then(|| BatchNorm {
                    gamma: (0..n).map(|_| rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect(),
                    beta: (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
                    mu: (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
                    var: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
                });
                RawLayer { weights: l.weights.clone(), bias: l.bias.clone(), bn }
            })
            .collect();
        let raw = RawBnn { widths: widths.to_vec(), layers, bn_epsilon: 1e-5 };
        let Ok(net) = prepare(&raw) else { return Ok(()) };
        for _ in 0..20 {
            let x: Vec<f64> = (0..widths[0]).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let a = raw.forward_reference(&x).unwrap();
            let b = net.forward(&x).unwrap();
            prop_assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn stabilization_keeps_the_function_on_the_box(seed in any::<u64>(), radius in 0.05f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&[4, 5, 4, 3], 0.3, &mut rng).unwrap();
        let center: Vec<f64> = (0..4).map(|_| rng.random_range(-0.8..0.8)).collect();
        let region = PerturbationRegion::linf(center, radius).unwrap();
        let Ok(stable) = stabilize_over_box(&net, region.lower(), region.upper()) else { return Ok(()) };
        stable.check_invariants().unwrap();
        for _ in 0..20 {
            let x = sample_region(&region, &mut rng);
            prop_assert_eq!(net.forward(&x).unwrap().logits, stable.forward(&x).unwrap().logits);
        }
    }

    #[test]
    fn encodings_hold_at_network_points(seed in any::<u64>(), kind in kind_strategy()) {
        let ri = instance(seed, kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let encodings = [
            encode_standard(&ri.net, &ri.region, &ri.objective).unwrap(),
            encode_tightened(&ri.net, &ri.region, &ri.objective).unwrap(),
            encode_lp(&ri.net, &ri.region, &ri.objective).unwrap(),
        ];
        for _ in 0..10 {
            let x = sample_region(&ri.region, &mut rng);
            let t = ri.net.forward(&x).unwrap();
            let at = trace_assignment(&t.input, &t.activations);
            for inst in &encodings {
                for c in &inst.constraints.inequalities {
                    let v = c.poly.eval_with(&at).unwrap();
                    prop_assert!(v >= -1e-9, "{:?} {:?} row at ({}, {}) is {}", inst.kind, c.family, c.layer, c.neuron, v);
                }
                for e in &inst.constraints.equalities {
                    prop_assert!(e.eval_with(&at).unwrap().abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constraint_counts_match(seed in any::<u64>(), kind in kind_strategy()) {
        let ri = instance(seed, kind);
        for (inst, k) in [
            (encode_standard(&ri.net, &ri.region, &ri.objective).unwrap(), EncodingKind::Standard),
            (encode_tightened(&ri.net, &ri.region, &ri.objective).unwrap(), EncodingKind::Tightened),
            (encode_lp(&ri.net, &ri.region, &ri.objective).unwrap(), EncodingKind::Lp),
        ] {
            let (eq, ineq) = expected_counts(&ri.net, &ri.region, k);
            prop_assert_eq!(inst.constraints.equalities.len(), eq);
            prop_assert_eq!(inst.constraints.inequalities.len(), ineq);
        }
        let milp = encode_milp(&ri.net, &ri.region, &ri.objective, None).unwrap();
        prop_assert_eq!(milp.binaries.len(), ri.net.hidden_neurons());
    }

    #[test]
    fn cliques_cover_every_monomial(seed in any::<u64>(), depth in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths: Vec<usize> = (0..depth + 2).map(|_| rng.random_range(1..=5)).collect();
        let net = random_net(&widths, 0.3, &mut rng).unwrap();
        let cliques = build_cliques(&net);
        prop_assert!(check_rip(&cliques));
        let region = PerturbationRegion::linf(vec![0.0; widths[0]], 1.0).unwrap();
        let obj = Objective::custom(MultilinearPoly::var(VariableId::new(depth, 0)));
        let inst = encode_tightened(&net, &region, &obj).unwrap();
        for c in &inst.constraints.inequalities {
            for (m, _) in c.poly.terms() {
                prop_assert!(cliques.iter().any(|k| m.variables().all(|v| k.contains(v))), "{}", m);
            }
        }
    }

    #[test]
    fn rank_one_moments_are_feasible(seed in any::<u64>(), kind in kind_strategy()) {
        let ri = instance(seed, kind);
        let cliques = build_cliques(&ri.net);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for inst in [
            encode_standard(&ri.net, &ri.region, &ri.objective).unwrap(),
            encode_tightened(&ri.net, &ri.region, &ri.objective).unwrap(),
        ] {
            let msdp = assemble_moment_sdp(&inst, &cliques).unwrap();
            for _ in 0..5 {
                let x = sample_region(&ri.region, &mut rng);
                let t = ri.net.forward(&x).unwrap();
                let at = trace_assignment(&t.input, &t.activations);
                let y = point_moments(&msdp.index, |v| at(v).unwrap());
                for g in &msdp.inequalities {
                    prop_assert!(MomentSdp::apply(&g.functional, &y) >= -1e-9);
                }
                for k in 0..msdp.blocks.len() {
                    let rows = msdp.block_matrix(k, &y);
                    let s = rows.len();
                    let m = DMatrix::from_fn(s, s, |i, j| rows[i][j]);
                    prop_assert!(SymmetricEigen::new(m).eigenvalues.min() >= -1e-9);
                }
                let f = ri.objective.poly.eval_with(&at).unwrap();
                prop_assert!((MomentSdp::apply(&msdp.objective, &y) - f).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn solver_is_deterministic_and_meets_its_residual_contract(seed in any::<u64>(), kind in kind_strategy()) {
        let ri = instance(seed, kind);
        let inst = encode_tightened(&ri.net, &ri.region, &ri.objective).unwrap();
        let p = to_conic(&assemble_moment_sdp(&inst, &build_cliques(&ri.net)).unwrap());
        let opts = SolveOptions::default();
        let a = solve_conic(&p, &opts).unwrap();
        let b = solve_conic(&p, &opts).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.x), bits(&b.x));
        prop_assert_eq!(bits(&a.y), bits(&b.y));
        prop_assert_eq!(a.status, SolveStatus::Optimal);
        let r = residuals(&p, &a.x, &a.y, &a.s);
        prop_assert!(r.primal <= opts.tol && r.dual <= opts.tol);
        prop_assert!(r.gap <= opts.tol * (1.0 + a.primal_objective.abs()));
    }

    #[test]
    fn lp_bound_scales_with_power_of_two_objectives(seed in any::<u64>(), k in -3i32..=3) {
        let ri = instance(seed, RegionKind::LinfBall);
        let factor = 2f64.powi(k);
        let scaled = Objective::custom(ri.objective.poly.scale(&factor));
        let opts = SolveOptions::default();
        let base = solve_lp(&encode_lp(&ri.net, &ri.region, &ri.objective).unwrap(), &opts).unwrap();
        let other = solve_lp(&encode_lp(&ri.net, &ri.region, &scaled).unwrap(), &opts).unwrap();
        prop_assert_eq!(base.status, SolveStatus::Optimal);
        prop_assert_eq!(other.status, SolveStatus::Optimal);
        let tol = 1e-5 * (1.0 + base.primal_objective.abs()) * factor.max(1.0);
        prop_assert!((other.primal_objective - factor * base.primal_objective).abs() <= tol,
            "{} vs {} x {}", other.primal_objective, factor, base.primal_objective);
    }

    #[test]
    fn lp_bound_is_monotone_in_the_radius(seed in any::<u64>(), shrink in 0.2f64..0.9) {
        let ri = instance(seed, RegionKind::LinfBall);
        let inner = PerturbationRegion::linf(ri.region.center().to_vec(), ri.region.radius() * shrink).unwrap();
        let opts = SolveOptions::default();
        let outer_lp = encode_lp(&ri.net, &ri.region, &ri.objective).unwrap();
        let Ok(inner_lp) = encode_lp(&ri.net, &inner, &ri.objective) else { return Ok(()) };
        let a = solve_lp(&outer_lp, &opts).unwrap();
        let b = solve_lp(&inner_lp, &opts).unwrap();
        prop_assert!(b.primal_objective >= a.primal_objective - 1e-5 * (1.0 + a.primal_objective.abs()));
    }

    #[test]
    fn sampling_never_beats_the_exact_minimum(seed in any::<u64>(), kind in kind_strategy()) {
        let ri = instance(seed, kind);
        let exact = exact_verify(&ri.net, &ri.region, &ri.objective.poly).unwrap();
        let ub = sample_upper_bound(&ri.net, &ri.region, &ri.objective.poly, 200, seed).unwrap();
        prop_assert!(ub >= exact.tau - 1e-12);
        if let Some(w) = exact.witness {
            prop_assert!(ri.region.contains(&w, 1e-9));
        }
    }
}
