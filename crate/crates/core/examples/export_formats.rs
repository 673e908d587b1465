//! Writes one targeted instance as SDPA, MPS and CPLEX LP text.
//!
//! `cargo run --example export_formats`

use bnn_verify::cli::{export, ExportConfig, ExportKind, Norm, SdpEncoding};
use bnn_verify::encode::read_mps;
use bnn_verify::model::load_model;
use bnn_verify::sdp::read_sdpa;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/example1.json"))?;
    let xbar = [0.0, 0.5, 0.0];
    let cfg = |kind, norm, eps, integral| ExportConfig {
        norm,
        eps,
        label: None,
        target: None,
        kind,
        encoding: SdpEncoding::Tightened,
        integral,
    };

    let mut sdpa = Vec::new();
    export(&raw, &xbar, &cfg(ExportKind::Sdpa, Norm::L2, 0.8, false), &mut sdpa)?;
    let parsed = read_sdpa(std::str::from_utf8(&sdpa)?)?;
    println!("SDPA: {} bytes, block sizes {:?}", sdpa.len(), parsed.block_sizes);

    let mut mps = Vec::new();
    export(&raw, &xbar, &cfg(ExportKind::Mps, Norm::Linf, 1.0, true), &mut mps)?;
    let parsed = read_mps(std::str::from_utf8(&mps)?)?;
    println!(
        "MPS: {} rows, {} columns, {} integer",
        parsed.rows.len(),
        parsed.columns.len(),
        parsed.integer_count()
    );

    let mut lp = Vec::new();
    export(&raw, &xbar, &cfg(ExportKind::Lp, Norm::Linf, 1.0, true), &mut lp)?;
    println!("\n{}", String::from_utf8(lp)?);
    Ok(())
}
