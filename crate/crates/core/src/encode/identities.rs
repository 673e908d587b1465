//! Exact certificates tying the linear sign encodings to the quadratic module
//! of the polynomial encodings.
//!
//! Each [`Identity`] yields `lhs - rhs` as an unreduced rational polynomial;
//! it vanishes once binary squares are replaced by one. The linear sides are
//! normalized: `ĝ+ = g+ / c+` and `ĝ- = g- / c-`.

use num_rational::BigRational;
use num_traits::{One, Signed};

use super::{EncodeError, NeuronTerms};
use crate::model::FoldedBnn;
use crate::poly::{Coefficient, RationalPoly, VariableId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Identity {
    /// `1 - y = ½ (1 - y)^2 - ½ (y^2 - 1)`
    BoxUpperSquare,
    /// `1 + y = ½ (1 + y)^2 - ½ (y^2 - 1)`
    BoxLowerSquare,
    /// `ĝ+ = (1-y)^2/(2c+) g + (1+y)^2/(4c+) Σ_{w≠0} (1 - w x)^2`, hidden inputs.
    HiddenUpperSos,
    /// `ĝ- = (1+y)^2/(2c-) g + (1-y)^2/(4c-) Σ_{w≠0} (1 + w x)^2`, hidden inputs.
    HiddenLowerSos,
    /// `ĝ+ = (1-y)^2/(2c+) g + (1+y)^2/(2c+) Σ (|w| r + w c - w x)`, box inputs.
    InputUpperSos,
    /// `ĝ- = (1+y)^2/(2c-) g + (1-y)^2/(2c-) Σ (|w| r - w c + w x)`, box inputs.
    InputLowerSos,
    /// `g = ½ g̃+ + ½ g̃-`
    SignSplit,
    /// `ĝ+ = (g̃- + t+) / c+`, hidden inputs.
    HiddenUpperTight,
    /// `ĝ- = (g̃+ + t-) / c-`, hidden inputs.
    HiddenLowerTight,
    /// `ĝ+ = (g̃- + t+) / c+`, box inputs.
    InputUpperTight,
    /// `ĝ- = (g̃+ + t-) / c-`, box inputs.
    InputLowerTight,
}

impl Identity {
    pub const ALL: [Identity; 11] = [
        Identity::BoxUpperSquare,
        Identity::BoxLowerSquare,
        Identity::HiddenUpperSos,
        Identity::HiddenLowerSos,
        Identity::InputUpperSos,
        Identity::InputLowerSos,
        Identity::SignSplit,
        Identity::HiddenUpperTight,
        Identity::HiddenLowerTight,
        Identity::InputUpperTight,
        Identity::InputLowerTight,
    ];

    /// Whether the identity concerns neurons of `layer` (1-based).
    pub fn applies_to(self, layer: usize) -> bool {
        match self {
            Self::HiddenUpperSos
            | Self::HiddenLowerSos
            | Self::HiddenUpperTight
            | Self::HiddenLowerTight => layer >= 2,
            Self::InputUpperSos
            | Self::InputLowerSos
            | Self::InputUpperTight
            | Self::InputLowerTight => layer == 1,
            _ => layer >= 1,
        }
    }
}

fn q(x: f64) -> BigRational {
    <BigRational as Coefficient>::from_f64(x)
}

fn cst(c: BigRational) -> RationalPoly {
    RationalPoly::constant(c)
}

fn half() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

/// `lhs - rhs` for neuron `(layer, neuron)`; `lower`/`upper` bound the input
/// layer and are only read for layer 1.
pub fn identity_residual(
    net: &FoldedBnn,
    lower: &[f64],
    upper: &[f64],
    identity: Identity,
    layer: usize,
    neuron: usize,
) -> Result<RationalPoly, EncodeError> {
    assert!(
        identity.applies_to(layer),
        "{identity:?} does not apply to layer {layer}"
    );
    let l = net.layer(layer);
    let (lo, up): (Vec<BigRational>, Vec<BigRational>) = if layer == 1 {
        (
            lower.iter().map(|&v| q(v)).collect(),
            upper.iter().map(|&v| q(v)).collect(),
        )
    } else {
        let n = net.widths()[layer - 1];
        (vec![-BigRational::one(); n], vec![BigRational::one(); n])
    };
    let t = NeuronTerms {
        output: VariableId::new(layer, neuron),
        input_layer: layer - 1,
        weights: l.weights.row(neuron),
        bias: q(l.bias[neuron]),
        lower: &lo,
        upper: &up,
    };
    let y = RationalPoly::var(t.output);
    let one = cst(BigRational::one());
    let (c_plus, c_minus) = (t.c_plus(), t.c_minus());
    let needs_plus = matches!(
        identity,
        Identity::HiddenUpperSos
            | Identity::InputUpperSos
            | Identity::HiddenUpperTight
            | Identity::InputUpperTight
    );
    let needs_minus = matches!(
        identity,
        Identity::HiddenLowerSos
            | Identity::InputLowerSos
            | Identity::HiddenLowerTight
            | Identity::InputLowerTight
    );
    for (needed, c) in [(needs_plus, &c_plus), (needs_minus, &c_minus)] {
        if needed && !c.is_positive() {
            return Err(EncodeError::StabilizedNeuron {
                layer,
                neuron,
                coefficient: Coefficient::to_f64(c),
            });
        }
    }
    let inv = |c: &BigRational| c.recip();
    let g_plus_hat = || t.lin_upper().scale(&inv(&c_plus));
    let g_minus_hat = || t.lin_lower().scale(&inv(&c_minus));
    let sq = |p: RationalPoly| &p * &p;
    let input = |k: usize| RationalPoly::var(VariableId::new(layer - 1, k));

    let residual = match identity {
        Identity::BoxUpperSquare => {
            let h = &y * &y - one.clone();
            t.box_upper() - (sq(one.clone() - y.clone()).scale(&half()) - h.scale(&half()))
        }
        Identity::BoxLowerSquare => {
            let h = &y * &y - one.clone();
            t.box_lower() - (sq(one.clone() + y.clone()).scale(&half()) - h.scale(&half()))
        }
        Identity::HiddenUpperSos | Identity::HiddenLowerSos => {
            let upper_side = identity == Identity::HiddenUpperSos;
            let c = if upper_side { &c_plus } else { &c_minus };
            let (on_sign, on_sum) = if upper_side {
                (sq(one.clone() - y.clone()), sq(one.clone() + y.clone()))
            } else {
                (sq(one.clone() + y.clone()), sq(one.clone() - y.clone()))
            };
            let mut sum = RationalPoly::zero();
            for (k, &w) in t.weights.iter().enumerate() {
                if w != 0 {
                    let wx = input(k).scale(&q(w as f64));
                    sum = sum
                        + sq(if upper_side {
                            one.clone() - wx
                        } else {
                            one.clone() + wx
                        });
                }
            }
            let rhs = (on_sign * t.sign()).scale(&(inv(c) * half()))
                + (on_sum * sum).scale(&(inv(c) * half() * half()));
            let lhs = if upper_side {
                g_plus_hat()
            } else {
                g_minus_hat()
            };
            lhs - rhs
        }
        Identity::InputUpperSos | Identity::InputLowerSos => {
            let upper_side = identity == Identity::InputUpperSos;
            let c = if upper_side { &c_plus } else { &c_minus };
            let (on_sign, on_sum) = if upper_side {
                (sq(one.clone() - y.clone()), sq(one.clone() + y.clone()))
            } else {
                (sq(one.clone() + y.clone()), sq(one.clone() - y.clone()))
            };
            let mut sum = RationalPoly::zero();
            for (k, &w) in t.weights.iter().enumerate() {
                let w = q(w as f64);
                let center = (lo[k].clone() + up[k].clone()) * half();
                let radius = (up[k].clone() - lo[k].clone()) * half();
                let spread = cst(w.abs() * radius);
                let wx = input(k).scale(&w) - cst(w * center);
                sum = sum + if upper_side { spread - wx } else { spread + wx };
            }
            let rhs = (on_sign * t.sign()).scale(&(inv(c) * half()))
                + (on_sum * sum).scale(&(inv(c) * half()));
            let lhs = if upper_side {
                g_plus_hat()
            } else {
                g_minus_hat()
            };
            lhs - rhs
        }
        Identity::SignSplit => t.sign() - (t.sign_plus() + t.sign_minus()).scale(&half()),
        Identity::HiddenUpperTight | Identity::InputUpperTight => {
            g_plus_hat() - (t.sign_minus() + t.tautology_upper()).scale(&inv(&c_plus))
        }
        Identity::HiddenLowerTight | Identity::InputLowerTight => {
            g_minus_hat() - (t.sign_plus() + t.tautology_lower()).scale(&inv(&c_minus))
        }
    };
    Ok(residual)
}

/// Checks every applicable identity on every hidden neuron; returns the
/// failures as `(identity, layer, neuron)`.
pub fn check_all(
    net: &FoldedBnn,
    lower: &[f64],
    upper: &[f64],
) -> Result<Vec<(Identity, usize, usize)>, EncodeError> {
    let mut failures = Vec::new();
    for layer in 1..=net.depth() {
        for neuron in 0..net.widths()[layer] {
            for id in Identity::ALL.into_iter().filter(|id| id.applies_to(layer)) {
                let r = identity_residual(net, lower, upper, id, layer, neuron)?;
                if !r.identity_zero() {
                    failures.push((id, layer, neuron));
                }
            }
        }
    }
    Ok(failures)
}

/// Floating evaluation of a residual, for cross-checks at sample points.
pub fn residual_at(p: &RationalPoly, point: impl Fn(VariableId) -> f64) -> f64 {
    p.to_f64().eval_with(|v| Some(point(v))).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::tests::example1;

    #[test]
    fn example1_identities_vanish() {
        let net = example1();
        let failures = check_all(&net, &[-1.0; 3], &[1.0; 3]).unwrap();
        assert!(failures.is_empty(), "{failures:?}");
    }

    #[test]
    fn sub_box_identities_vanish() {
        let net = example1();
        let failures = check_all(&net, &[-0.9, 0.1, -1.0], &[0.9, 0.9, 1.0]).unwrap();
        assert!(failures.is_empty(), "{failures:?}");
    }

    #[test]
    fn hidden_sos_needs_reduction() {
        let net = example1();
        let r =
            identity_residual(&net, &[-1.0; 3], &[1.0; 3], Identity::HiddenUpperSos, 2, 1).unwrap();
        assert!(!r.is_zero());
        assert!(r.degree() >= 4);
        assert!(r.identity_zero());
    }
}
