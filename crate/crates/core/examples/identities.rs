//! Checks the polynomial identities behind the tightened encoding in exact
//! rational arithmetic, one neuron at a time.
//!
//! `cargo run --example identities`

use bnn_verify::encode::identities::{check_all, identity_residual, Identity};
use bnn_verify::encode::RegionKind;
use bnn_verify::generate::random_instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ri = random_instance(&[4, 5, 4, 2], RegionKind::LinfBall, 0.3..=0.8, &mut rng)?;
    let (lower, upper) = (ri.region.lower(), ri.region.upper());
    println!("net {:?} over a box of radius {:.3}", ri.net.widths(), ri.region.radius());

    for layer in [1, ri.net.depth()] {
        println!("layer {layer}, neuron 0:");
        for id in Identity::ALL.into_iter().filter(|id| id.applies_to(layer)) {
            let r = identity_residual(&ri.net, lower, upper, id, layer, 0)?;
            println!("  {id:?}: residual has {} terms", r.len());
        }
    }
    let failures = check_all(&ri.net, lower, upper)?;
    println!("{} hidden neurons, {} failures", ri.net.hidden_neurons(), failures.len());
    Ok(())
}
