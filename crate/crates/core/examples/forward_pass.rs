//! Loads the bundled two-layer network, folds batch norm, and runs one input.
//!
//! `cargo run --example forward_pass`

use bnn_verify::encode::{objective_targeted, trace_assignment};
use bnn_verify::model::{load_inputs, load_model, prepare};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data");
    let raw = load_model(format!("{dir}/example1.json"))?;
    let xbar = load_inputs(format!("{dir}/example1_input.txt"))?.remove(0);
    let net = prepare(&raw)?;
    println!("{net}");

    let trace = net.forward(&xbar)?;
    println!("input       {:?}", trace.input);
    for (l, a) in trace.activations.iter().enumerate() {
        println!("layer {}     {a:?}", l + 1);
    }
    println!("logits      {:?}", trace.logits);
    println!("label       {}", trace.label + 1);

    let reference = raw.forward_reference(&xbar)?;
    assert_eq!(reference.logits, trace.logits);

    let target = (trace.label + 1) % net.output_dim();
    let obj = objective_targeted(&net, trace.label, target)?;
    let margin = obj.poly.eval_with(trace_assignment(&trace.input, &trace.activations))?;
    println!("margin against label {}: {margin}", target + 1);
    println!("objective   {}", obj.poly);
    Ok(())
}
