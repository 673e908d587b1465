//! The full verification pipeline on the bundled model across radii and
//! methods, as the command line runs it.
//!
//! `cargo run --release --example verify_pipeline`

use bnn_verify::cli::{verify, Method, Norm, VerifyConfig};
use bnn_verify::model::load_model;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/example1.json"))?;
    let xbar = [0.0, 0.5, 0.0];
    for (norm, eps) in [(Norm::Linf, 0.5), (Norm::Linf, 0.7), (Norm::Linf, 1.0), (Norm::L2, 0.8)] {
        for method in [Method::Lp, Method::Sdp1Tight, Method::Oracle] {
            let cfg = VerifyConfig { norm, eps, method, samples: 50, metrics: true, ..VerifyConfig::default() };
            let r = verify(&raw, &xbar, "example1", &cfg)?;
            let t = &r.targets[0];
            println!(
                "{norm:?} ε = {eps}: {method:?} → {:?} (λ_rig {:?}, exit {})",
                r.verdict,
                t.lambda_rig,
                r.verdict.exit_code()
            );
        }
    }
    let cfg = VerifyConfig { norm: Norm::L2, eps: 0.8, metrics: true, ..VerifyConfig::default() };
    println!("\n{}", serde_json::to_string_pretty(&verify(&raw, &xbar, "example1", &cfg)?)?);
    Ok(())
}
