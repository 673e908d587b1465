//! Exact minimum by enumerating feasible activation patterns, compared with
//! random sampling and the MILP encoding.
//!
//! `cargo run --release --example exact_oracle`

use bnn_verify::encode::{encode_milp, RegionKind};
use bnn_verify::generate::random_instance;
use bnn_verify::oracle::{encoded_patterns, enumerate_patterns, exact_verify, sample_minimizer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CAP: usize = 12;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for i in 0..4 {
        let ri = random_instance(&[4, 6, 6, 3], RegionKind::LinfBall, 0.3..=1.0, &mut rng)?;
        let f = &ri.objective.poly;
        let patterns = enumerate_patterns(&ri.net, &ri.region, f, CAP)?;
        let exact = exact_verify(&ri.net, &ri.region, f)?;
        let sampled = sample_minimizer(&ri.net, &ri.region, f, 2000, 1)?;
        let milp = encode_milp(&ri.net, &ri.region, &ri.objective, None)?;
        let encoded = encoded_patterns(&milp, CAP)?;
        println!(
            "{i}: {} of {} patterns feasible ({} LP solves), MILP sees {}; τ_exact = {}, best sample {} (label {})",
            patterns.feasible.len(),
            patterns.total,
            patterns.feasibility_solves,
            encoded.len(),
            exact.tau,
            sampled.value,
            sampled.label + 1
        );
        if let Some(w) = exact.witness {
            println!("   witness {w:.3?}");
        }
    }
    Ok(())
}
