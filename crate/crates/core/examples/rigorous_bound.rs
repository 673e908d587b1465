//! Turns a floating SDP solution into a certified lower bound by exact
//! rational accounting of the dual certificate.
//!
//! `cargo run --release --example rigorous_bound`

use bnn_verify::encode::{build_cliques, encode_lp, encode_tightened, RegionKind};
use bnn_verify::generate::random_instance;
use bnn_verify::solver::{rigorous_lower_bound, solve_lp, solve_sdp, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let opts = SolveOptions::default();
    for i in 0..5 {
        let ri = random_instance(&[5, 5, 4, 3], RegionKind::LinfBall, 0.2..=0.8, &mut rng)?;
        let cliques = build_cliques(&ri.net);
        let tight = encode_tightened(&ri.net, &ri.region, &ri.objective)?;
        let r = solve_sdp(&tight, &cliques, &opts)?;
        let b = rigorous_lower_bound(&r, &tight, &cliques)?;
        let lp = encode_lp(&ri.net, &ri.region, &ri.objective)?;
        let lp_b = rigorous_lower_bound(&solve_lp(&lp, &opts)?, &lp, &[])?;
        println!(
            "{i}: SDP λ = {:.6} λ_rig = {:.6} (budget {:.1e}, coefficient residual {:.1e}, worst block deficit {:.1e}); LP λ_rig = {:.6}",
            b.lambda,
            b.lambda_rig,
            b.budget(),
            b.coefficient_residual,
            b.block_deficits.iter().copied().fold(0.0, f64::max),
            lp_b.lambda_rig
        );
    }
    Ok(())
}
