//! Batch-norm folding on the bundled model, then interval stabilization of a
//! random network over shrinking and growing boxes.
//!
//! `cargo run --example fold_and_stabilize`

use bnn_verify::generate::random_net;
use bnn_verify::model::{
    fold_batchnorm, load_model, preactivation_range, stabilize_over_box, weight_sparsity,
    ModelError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/example1.json"))?;
    let (affine, log) = fold_batchnorm(&raw)?;
    for (i, layer) in affine.layers().iter().enumerate() {
        println!("folded layer {}: bias {:?}", i + 1, layer.bias);
    }
    println!("{} folding records: {log:?}", log.len());

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = random_net(&[5, 6, 6, 3], 0.3, &mut rng)?;
    println!(
        "\nrandom net {:?}, zero-weight fraction {:.2}",
        net.widths(),
        weight_sparsity(&net)
    );
    let center = [0.2f64, -0.4, 0.0, 0.6, -0.1];
    for radius in [0.3f64, 0.6, 0.8, 1.0] {
        let lower: Vec<f64> = center.iter().map(|c| (c - radius).max(-1.0)).collect();
        let upper: Vec<f64> = center.iter().map(|c| (c + radius).min(1.0)).collect();
        let first = net.layer(1);
        let pinned = (0..first.weights.rows())
            .map(|r| preactivation_range(first.weights.row(r), first.bias[r], &lower, &upper))
            .filter(|(lo, hi)| *lo > 0.0 || *hi < 0.0)
            .count();
        match stabilize_over_box(&net, &lower, &upper) {
            Ok(live) => println!(
                "radius {radius:<4} {pinned} first-layer neurons pinned, live widths {:?}",
                live.widths()
            ),
            Err(ModelError::LayerFullyStabilized { layer }) => {
                println!("radius {radius:<4} layer {layer} is constant, so the output is too")
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
