//! Seeded random ternary networks and verification instances.

use rand::Rng;
use serde::Serialize;

use crate::encode::{objective_targeted, EncodeError, Objective, PerturbationRegion, RegionKind};
use crate::model::{
    stabilize, stabilize_over_box, AffineBnn, FoldedBnn, Layer, ModelError, TernaryMatrix,
};

/// Ternary weights with `P(0) = zero_fraction`, every row keeping at least one
/// nonzero; hidden biases strictly inside `(-nv, nv)`, output biases in `[-1, 1]`.
pub fn random_affine(
    widths: &[usize],
    zero_fraction: f64,
    rng: &mut impl Rng,
) -> Result<AffineBnn, ModelError> {
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for i in 1..widths.len() {
        let (rows, cols) = (widths[i], widths[i - 1]);
        let output = i == widths.len() - 1;
        let mut w = TernaryMatrix::zeros(rows, cols);
        let mut bias = Vec::with_capacity(rows);
        for r in 0..rows {
            for c in 0..cols {
                if !rng.random_bool(zero_fraction) {
                    w.set(r, c, if rng.random_bool(0.5) { 1 } else { -1 });
                }
            }
            if w.row(r).iter().all(|&x| x == 0) {
                w.set(
                    r,
                    rng.random_range(0..cols),
                    if rng.random_bool(0.5) { 1 } else { -1 },
                );
            }
            let nv = w.row(r).iter().filter(|&&x| x != 0).count() as f64;
            bias.push(if output {
                rng.random_range(-1.0..=1.0)
            } else {
                rng.random_range(-0.9..0.9) * nv
            });
        }
        layers.push(Layer { weights: w, bias });
    }
    AffineBnn::new(widths.to_vec(), layers)
}

pub fn random_net(
    widths: &[usize],
    zero_fraction: f64,
    rng: &mut impl Rng,
) -> Result<FoldedBnn, ModelError> {
    stabilize(random_affine(widths, zero_fraction, rng)?)
}

/// Widths with `widths[0] = max[0]`, the output width fixed, and each hidden
/// width uniform in `ceil(max[i] / 2)..=max[i]`.
pub fn random_widths(max: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let last = max.len() - 1;
    max.iter()
        .enumerate()
        .map(|(i, &m)| {
            if i == 0 || i == last {
                m
            } else {
                rng.random_range(m.div_ceil(2).max(1)..=m)
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomInstance {
    #[serde(skip)]
    pub net: FoldedBnn,
    pub region: PerturbationRegion,
    #[serde(skip)]
    pub objective: Objective,
    pub true_label: usize,
    pub target: usize,
}

/// A random net stabilized over a random region around a random center,
/// with a targeted objective for a random wrong label. Retries until the
/// region leaves every layer with a live neuron.
pub fn random_instance(
    max_widths: &[usize],
    kind: RegionKind,
    radius: std::ops::RangeInclusive<f64>,
    rng: &mut impl Rng,
) -> Result<RandomInstance, EncodeError> {
    loop {
        let widths = random_widths(max_widths, rng);
        let Ok(net) = random_net(&widths, 0.3, rng) else {
            continue;
        };
        let center: Vec<f64> = (0..widths[0])
            .map(|_| rng.random_range(-0.8..=0.8))
            .collect();
        let eps = rng.random_range(radius.clone());
        let region = PerturbationRegion::new(kind, center, eps)?;
        let Ok(net) = stabilize_over_box(&net, region.lower(), region.upper()) else {
            continue;
        };
        let Ok(trace) = net.forward(region.center()) else {
            continue;
        };
        let outputs = net.output_dim();
        let mut target = rng.random_range(0..outputs - 1);
        if target >= trace.label {
            target += 1;
        }
        let objective = objective_targeted(&net, trace.label, target)?;
        return Ok(RandomInstance {
            net,
            region,
            objective,
            true_label: trace.label,
            target,
        });
    }
}

/// A net with two hidden layers together with an input whose layer-1 activations equal the
/// incoming row of output neuron `neuron`.
#[derive(Clone, Debug)]
pub struct AnchoredNet {
    pub net: FoldedBnn,
    pub anchor: Vec<f64>,
    pub neuron: usize,
}

/// Random `[n0, n1, n2, n_out]` net (hidden widths drawn up to `max`) whose
/// row `W^[2]_(j,:)` is overwritten by the sign pattern of a random anchor input.
pub fn anchored_net(max: [usize; 4], rng: &mut impl Rng) -> Result<AnchoredNet, ModelError> {
    loop {
        let widths = random_widths(&max, rng);
        let affine = random_affine(&widths, 0.3, rng)?;
        let anchor: Vec<f64> = (0..widths[0])
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let trace = affine.forward(&anchor)?;
        if trace.any_zero_preactivation() {
            continue;
        }
        let neuron = rng.random_range(0..widths[2]);
        let mut layers = affine.layers().to_vec();
        for (c, &a) in trace.activations[0].iter().enumerate() {
            layers[1].weights.set(neuron, c, a);
        }
        let nv = widths[1] as f64;
        layers[1].bias[neuron] = rng.random_range(-0.9..0.9) * nv;
        let Ok(net) = stabilize(AffineBnn::new(widths, layers)?) else {
            continue;
        };
        let trace = net.forward(&anchor)?;
        if trace.any_zero_preactivation()
            || trace.activations[0] != net.layer(2).weights.row(neuron)
        {
            continue;
        }
        return Ok(AnchoredNet {
            net,
            anchor,
            neuron,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nets_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let net = random_net(&[4, 5, 3, 2], 0.4, &mut rng).unwrap();
            net.check_invariants().unwrap();
            assert_eq!(net.widths(), &[4, 5, 3, 2]);
        }
    }

    #[test]
    fn anchored_row_matches_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = anchored_net([3, 8, 8, 2], &mut rng).unwrap();
            let trace = a.net.forward(&a.anchor).unwrap();
            assert_eq!(trace.activations[0], a.net.layer(2).weights.row(a.neuron));
        }
    }

    #[test]
    fn instances_are_reproducible() {
        let a = random_instance(
            &[3, 4, 3, 2],
            RegionKind::LinfBall,
            0.1..=0.5,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let b = random_instance(
            &[3, 4, 3, 2],
            RegionKind::LinfBall,
            0.1..=0.5,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        assert_eq!(a.region, b.region);
        assert_eq!(a.objective.poly, b.objective.poly);
    }
}
