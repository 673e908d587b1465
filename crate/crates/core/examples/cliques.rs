//! Builds the sparse clique cover of a network and checks the running
//! intersection property.
//!
//! `cargo run --example cliques`

use bnn_verify::encode::{build_cliques, check_rip, expected_clique_shape};
use bnn_verify::generate::random_net;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for widths in [vec![3, 2, 2, 2], vec![4, 5, 4, 3, 2], vec![2, 3, 3, 3, 3, 2]] {
        let net = random_net(&widths, 0.2, &mut rng)?;
        let cliques = build_cliques(&net);
        let (count, max) = expected_clique_shape(net.widths());
        println!(
            "widths {:?}: {} cliques (expected {count}), largest {} (expected {max}), RIP {}",
            net.widths(),
            cliques.len(),
            cliques.iter().map(|c| c.len()).max().unwrap_or(0),
            check_rip(&cliques)
        );
        for c in cliques.iter().take(3) {
            let names: Vec<String> = c.variables.iter().map(|v| v.to_string()).collect();
            println!("  clique {}: {}", c.id, names.join(" "));
        }
    }
    Ok(())
}
