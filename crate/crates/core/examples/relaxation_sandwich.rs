//! Compares the LP, standard SDP and tightened SDP bounds against the exact
//! minimum on random instances.
//!
//! `cargo run --release --example relaxation_sandwich [l2]`

use bnn_verify::encode::{build_cliques, encode_lp, encode_standard, encode_tightened, RegionKind};
use bnn_verify::generate::random_instance;
use bnn_verify::oracle::exact_verify;
use bnn_verify::solver::{solve_lp, solve_sdp, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kind = match std::env::args().nth(1).as_deref() {
        Some("l2") => RegionKind::L2BallBox,
        _ => RegionKind::LinfBall,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let opts = SolveOptions::default();
    println!("{:>3} {:>10} {:>10} {:>10} {:>10} {:>8}", "#", "LP", "SDP", "tight", "exact", "closed");
    for i in 0..12 {
        let ri = random_instance(&[6, 5, 4, 3], kind, 0.2..=1.0, &mut rng)?;
        let cliques = build_cliques(&ri.net);
        let lp = solve_lp(&encode_lp(&ri.net, &ri.region, &ri.objective)?, &opts)?;
        let standard = encode_standard(&ri.net, &ri.region, &ri.objective)?;
        let sdp = solve_sdp(&standard, &cliques, &opts)?;
        let tightened = encode_tightened(&ri.net, &ri.region, &ri.objective)?;
        let tight = solve_sdp(&tightened, &cliques, &opts)?;
        let exact = exact_verify(&ri.net, &ri.region, &ri.objective.poly)?;
        let (lo, mid) = (lp.primal_objective, tight.primal_objective);
        let closed = if exact.tau - lo > 1e-3 { format!("{:.0}%", 100.0 * (mid - lo) / (exact.tau - lo)) } else { "-".into() };
        println!(
            "{i:>3} {lo:>10.4} {:>10.4} {mid:>10.4} {:>10.4} {closed:>8}",
            sdp.primal_objective, exact.tau
        );
    }
    Ok(())
}
