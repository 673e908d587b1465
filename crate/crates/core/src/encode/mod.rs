//! Optimization encodings of the verification problem: standard QCQP,
//! tightened POP with tautologies, LP relaxation and MILP, plus targeted
//! objectives and the clique structure used by the sparse relaxation.

mod cliques;
mod export;
pub mod identities;

pub use cliques::{build_cliques, check_rip, expected_clique_shape, Clique};
pub use export::{read_mps, write_lp_format, write_mps, MpsProblem};

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{nv, FoldedBnn};
use crate::poly::{Coefficient, MultilinearPoly, VariableId};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("invalid region: {0}")]
    Region(String),
    #[error("target label {0} equals the true label")]
    TargetIsTrueLabel(usize),
    #[error("label {label} out of range (network has {outputs} outputs)")]
    LabelOutOfRange { label: usize, outputs: usize },
    #[error("neuron ({layer}, {neuron}) is constant over the region (coefficient {coefficient} <= 0); stabilize and retry")]
    StabilizedNeuron {
        layer: usize,
        neuron: usize,
        coefficient: f64,
    },
    #[error("{0} encoding is not linear")]
    NotLinear(EncodingKind),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("MPS parse error: {0}")]
    MpsParse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegionKind {
    LinfBall,
    L2BallBox,
}

/// Perturbation ball around `center`, intersected with `[-1, 1]^n0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationRegion {
    kind: RegionKind,
    center: Vec<f64>,
    radius: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PerturbationRegion {
    pub fn new(kind: RegionKind, center: Vec<f64>, radius: f64) -> Result<Self, EncodeError> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(EncodeError::Region(format!(
                "radius {radius} must be finite and >= 0"
            )));
        }
        if let Some(j) = center.iter().position(|c| !(-1.0..=1.0).contains(c)) {
            return Err(EncodeError::Region(format!(
                "center coordinate {} = {} outside [-1, 1]",
                j + 1,
                center[j]
            )));
        }
        let lower = center.iter().map(|c| (c - radius).max(-1.0)).collect();
        let upper = center.iter().map(|c| (c + radius).min(1.0)).collect();
        Ok(Self {
            kind,
            center,
            radius,
            lower,
            upper,
        })
    }

    pub fn linf(center: Vec<f64>, radius: f64) -> Result<Self, EncodeError> {
        Self::new(RegionKind::LinfBall, center, radius)
    }

    pub fn l2(center: Vec<f64>, radius: f64) -> Result<Self, EncodeError> {
        Self::new(RegionKind::L2BallBox, center, radius)
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Per-coordinate lower bounds, clipped to `-1`.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Number of region polynomials.
    pub fn region_count(&self) -> usize {
        match self.kind {
            RegionKind::LinfBall => self.dim(),
            RegionKind::L2BallBox => self.dim() + 1,
        }
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let in_box = x
            .iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((&v, &l), &u)| v >= l - slack && v <= u + slack);
        match self.kind {
            RegionKind::LinfBall => in_box,
            RegionKind::L2BallBox => {
                let d2: f64 = x
                    .iter()
                    .zip(&self.center)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                in_box && d2.sqrt() <= self.radius + slack
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    /// `y * z >= 0`
    Sign,
    /// `(y + 1) * z >= 0`
    SignPlus,
    /// `(y - 1) * z >= 0`
    SignMinus,
    /// `(y + 1) * (U - <w, x>) >= 0`
    TautologyUpper,
    /// `(1 - y) * (<w, x> - Lo) >= 0`
    TautologyLower,
    Region,
    Box,
    /// `c+ (y + 1) - 2 z >= 0`
    LinUpper,
    /// `c- (1 - y) + 2 z >= 0`
    LinLower,
    /// `1 - y >= 0` and `1 + y >= 0`
    LinBox,
    /// `threshold - f >= 0`
    Threshold,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub family: Family,
    /// Hidden layer (1-based); `0` for region and threshold constraints.
    pub layer: usize,
    pub neuron: usize,
    pub poly: MultilinearPoly,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConstraintSet {
    /// `x^2 - 1 = 0` per hidden neuron.
    pub equalities: Vec<MultilinearPoly>,
    /// All polynomials are constrained `>= 0`.
    pub inequalities: Vec<Constraint>,
    pub objective: MultilinearPoly,
}

impl ConstraintSet {
    pub fn count(&self, family: Family) -> usize {
        self.inequalities
            .iter()
            .filter(|c| c.family == family)
            .count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EncodingKind {
    Standard,
    Tightened,
    Lp,
    Milp,
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Standard => "standard",
            Self::Tightened => "tightened",
            Self::Lp => "lp",
            Self::Milp => "milp",
        };
        f.write_str(s)
    }
}

/// Objective with the labels it was derived from, when targeted.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub poly: MultilinearPoly,
    /// `(true label, target)`, 0-based.
    pub labels: Option<(usize, usize)>,
}

impl Objective {
    pub fn custom(poly: MultilinearPoly) -> Self {
        Self { poly, labels: None }
    }
}

#[derive(Clone, Debug)]
pub struct VerificationInstance {
    pub net: FoldedBnn,
    pub region: PerturbationRegion,
    pub labels: Option<(usize, usize)>,
    pub kind: EncodingKind,
    pub constraints: ConstraintSet,
    /// Variables restricted to `{-1, 1}` (every hidden neuron).
    pub binaries: Vec<VariableId>,
}

impl VerificationInstance {
    pub fn objective(&self) -> &MultilinearPoly {
        &self.constraints.objective
    }

    pub fn inputs(&self) -> Vec<VariableId> {
        (0..self.net.input_dim())
            .map(|k| VariableId::new(0, k))
            .collect()
    }

    /// Input variables followed by hidden variables, layer by layer.
    pub fn variables(&self) -> Vec<VariableId> {
        let mut vs = self.inputs();
        vs.extend(self.binaries.iter().copied());
        vs
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, EncodingKind::Lp | EncodingKind::Milp)
    }
}

/// `f_k(x_L) = <W_(ybar,:) - W_(k,:), x_L> + b_ybar - b_k` for 0-based labels.
pub fn objective_targeted(
    net: &FoldedBnn,
    true_label: usize,
    target: usize,
) -> Result<Objective, EncodeError> {
    let outputs = net.output_dim();
    for label in [true_label, target] {
        if label >= outputs {
            return Err(EncodeError::LabelOutOfRange { label, outputs });
        }
    }
    if true_label == target {
        return Err(EncodeError::TargetIsTrueLabel(target));
    }
    let out = net.layer(net.depth() + 1);
    let w: Vec<f64> = out
        .weights
        .row(true_label)
        .iter()
        .zip(out.weights.row(target))
        .map(|(&a, &b)| (a - b) as f64)
        .collect();
    let poly = MultilinearPoly::affine(net.depth(), &w, out.bias[true_label] - out.bias[target]);
    Ok(Objective {
        poly,
        labels: Some((true_label, target)),
    })
}

pub fn region_polynomials(
    region: &PerturbationRegion,
) -> Result<Vec<MultilinearPoly>, EncodeError> {
    if !(region.radius > 0.0) {
        return Err(EncodeError::Region(format!(
            "radius {} must be positive for a polynomial description",
            region.radius
        )));
    }
    let x = |k: usize| MultilinearPoly::<f64>::var(VariableId::new(0, k));
    let cst = MultilinearPoly::<f64>::constant;
    let mut out = Vec::new();
    match region.kind {
        RegionKind::LinfBall => {
            for k in 0..region.dim() {
                out.push((cst(region.upper[k]) - x(k)) * (x(k) - cst(region.lower[k])));
            }
        }
        RegionKind::L2BallBox => {
            let mut ball = cst(region.radius * region.radius);
            for k in 0..region.dim() {
                let d = x(k) - cst(region.center[k]);
                ball = ball - &d * &d;
            }
            out.push(ball);
            for k in 0..region.dim() {
                out.push((cst(1.0) - x(k)) * (cst(1.0) + x(k)));
            }
        }
    }
    Ok(out)
}

/// A hidden neuron `y = sign(<w, x> + b)` with box bounds on its inputs.
///
/// Generic in the coefficient type so the exact identity checks reuse the
/// same builders as the floating-point encodings.
pub struct NeuronTerms<'a, C> {
    pub output: VariableId,
    pub input_layer: usize,
    pub weights: &'a [i8],
    pub bias: C,
    pub lower: &'a [C],
    pub upper: &'a [C],
}

impl<C: Coefficient> NeuronTerms<'_, C> {
    fn y(&self) -> MultilinearPoly<C> {
        MultilinearPoly::var(self.output)
    }

    fn one() -> MultilinearPoly<C> {
        MultilinearPoly::constant(C::one())
    }

    /// `<w, x>`
    pub fn linear(&self) -> MultilinearPoly<C> {
        let w: Vec<C> = self
            .weights
            .iter()
            .map(|&w| C::from_f64(w as f64))
            .collect();
        MultilinearPoly::affine(self.input_layer, &w, C::zero())
    }

    /// `<w, x> + b`
    pub fn preactivation(&self) -> MultilinearPoly<C> {
        self.linear() + MultilinearPoly::constant(self.bias.clone())
    }

    /// Max of `<w, x>` over the input box.
    pub fn upper_linear(&self) -> C {
        let mut acc = C::zero();
        for ((&w, l), u) in self.weights.iter().zip(self.lower).zip(self.upper) {
            acc = match w {
                1 => acc + u.clone(),
                -1 => acc - l.clone(),
                _ => acc,
            };
        }
        acc
    }

    /// Min of `<w, x>` over the input box.
    pub fn lower_linear(&self) -> C {
        let mut acc = C::zero();
        for ((&w, l), u) in self.weights.iter().zip(self.lower).zip(self.upper) {
            acc = match w {
                1 => acc + l.clone(),
                -1 => acc - u.clone(),
                _ => acc,
            };
        }
        acc
    }

    /// `c+ = max z`
    pub fn c_plus(&self) -> C {
        self.upper_linear() + self.bias.clone()
    }

    /// `c- = -min z`
    pub fn c_minus(&self) -> C {
        -(self.lower_linear() + self.bias.clone())
    }

    pub fn sign(&self) -> MultilinearPoly<C> {
        self.y() * self.preactivation()
    }

    pub fn sign_plus(&self) -> MultilinearPoly<C> {
        (self.y() + Self::one()) * self.preactivation()
    }

    pub fn sign_minus(&self) -> MultilinearPoly<C> {
        (self.y() - Self::one()) * self.preactivation()
    }

    pub fn tautology_upper(&self) -> MultilinearPoly<C> {
        (self.y() + Self::one()) * (MultilinearPoly::constant(self.upper_linear()) - self.linear())
    }

    pub fn tautology_lower(&self) -> MultilinearPoly<C> {
        (Self::one() - self.y()) * (self.linear() - MultilinearPoly::constant(self.lower_linear()))
    }

    pub fn lin_upper(&self) -> MultilinearPoly<C> {
        (self.y() + Self::one()).scale(&self.c_plus())
            - self.preactivation().scale(&C::from_f64(2.0))
    }

    pub fn lin_lower(&self) -> MultilinearPoly<C> {
        (Self::one() - self.y()).scale(&self.c_minus())
            + self.preactivation().scale(&C::from_f64(2.0))
    }

    pub fn box_upper(&self) -> MultilinearPoly<C> {
        Self::one() - self.y()
    }

    pub fn box_lower(&self) -> MultilinearPoly<C> {
        Self::one() + self.y()
    }
}

/// Input bounds for every hidden neuron's predecessor layer: the region box
/// for layer 1, `[-1, 1]` beyond.
pub(crate) fn predecessor_bounds(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    layer: usize,
) -> (Vec<f64>, Vec<f64>) {
    if layer == 1 {
        (region.lower.clone(), region.upper.clone())
    } else {
        let n = net.widths()[layer - 1];
        (vec![-1.0; n], vec![1.0; n])
    }
}

fn for_each_neuron(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    mut f: impl FnMut(usize, usize, &NeuronTerms<'_, f64>),
) {
    for layer in 1..=net.depth() {
        let (lower, upper) = predecessor_bounds(net, region, layer);
        let l = net.layer(layer);
        for j in 0..l.bias.len() {
            let terms = NeuronTerms {
                output: VariableId::new(layer, j),
                input_layer: layer - 1,
                weights: l.weights.row(j),
                bias: l.bias[j],
                lower: &lower,
                upper: &upper,
            };
            f(layer, j, &terms);
        }
    }
}

fn hidden_variables(net: &FoldedBnn) -> Vec<VariableId> {
    (1..=net.depth())
        .flat_map(|i| (0..net.widths()[i]).map(move |j| VariableId::new(i, j)))
        .collect()
}

fn squares_minus_one(net: &FoldedBnn) -> Vec<MultilinearPoly> {
    hidden_variables(net)
        .into_iter()
        .map(|v| {
            let x = MultilinearPoly::var(v);
            &x * &x - MultilinearPoly::constant(1.0)
        })
        .collect()
}

fn check_dims(net: &FoldedBnn, region: &PerturbationRegion) -> Result<(), EncodeError> {
    if region.dim() != net.input_dim() {
        return Err(EncodeError::Region(format!(
            "region has dimension {}, network expects {}",
            region.dim(),
            net.input_dim()
        )));
    }
    Ok(())
}

fn region_constraints(region: &PerturbationRegion) -> Result<Vec<Constraint>, EncodeError> {
    let polys = region_polynomials(region)?;
    Ok(polys
        .into_iter()
        .enumerate()
        .map(|(i, poly)| {
            let (family, neuron) = match region.kind {
                RegionKind::LinfBall => (Family::Region, i),
                RegionKind::L2BallBox if i == 0 => (Family::Region, 0),
                RegionKind::L2BallBox => (Family::Box, i - 1),
            };
            Constraint {
                family,
                layer: 0,
                neuron,
                poly,
            }
        })
        .collect())
}

fn instance(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &Objective,
    kind: EncodingKind,
    inequalities: Vec<Constraint>,
) -> VerificationInstance {
    VerificationInstance {
        net: net.clone(),
        region: region.clone(),
        labels: objective.labels,
        kind,
        constraints: ConstraintSet {
            equalities: squares_minus_one(net),
            inequalities,
            objective: objective.poly.clone(),
        },
        binaries: hidden_variables(net),
    }
}

pub fn encode_standard(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &Objective,
) -> Result<VerificationInstance, EncodeError> {
    check_dims(net, region)?;
    let mut ineq = Vec::new();
    for_each_neuron(net, region, |layer, neuron, t| {
        ineq.push(Constraint {
            family: Family::Sign,
            layer,
            neuron,
            poly: t.sign(),
        });
    });
    ineq.extend(region_constraints(region)?);
    Ok(instance(
        net,
        region,
        objective,
        EncodingKind::Standard,
        ineq,
    ))
}

pub fn encode_tightened(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &Objective,
) -> Result<VerificationInstance, EncodeError> {
    check_dims(net, region)?;
    let mut ineq = Vec::new();
    for_each_neuron(net, region, |layer, neuron, t| {
        for (family, poly) in [
            (Family::SignPlus, t.sign_plus()),
            (Family::SignMinus, t.sign_minus()),
            (Family::TautologyUpper, t.tautology_upper()),
            (Family::TautologyLower, t.tautology_lower()),
        ] {
            ineq.push(Constraint {
                family,
                layer,
                neuron,
                poly,
            });
        }
    });
    ineq.extend(region_constraints(region)?);
    Ok(instance(
        net,
        region,
        objective,
        EncodingKind::Tightened,
        ineq,
    ))
}

pub fn encode_lp(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &Objective,
) -> Result<VerificationInstance, EncodeError> {
    check_dims(net, region)?;
    let mut ineq = Vec::new();
    let mut bad = None;
    for_each_neuron(net, region, |layer, neuron, t| {
        for c in [t.c_plus(), t.c_minus()] {
            if !(c > 0.0) && bad.is_none() {
                bad = Some(EncodeError::StabilizedNeuron {
                    layer,
                    neuron,
                    coefficient: c,
                });
            }
        }
        for (family, poly) in [
            (Family::LinUpper, t.lin_upper()),
            (Family::LinLower, t.lin_lower()),
            (Family::LinBox, t.box_upper()),
            (Family::LinBox, t.box_lower()),
        ] {
            ineq.push(Constraint {
                family,
                layer,
                neuron,
                poly,
            });
        }
    });
    if let Some(e) = bad {
        return Err(e);
    }
    for k in 0..region.dim() {
        let x = MultilinearPoly::var(VariableId::new(0, k));
        ineq.push(Constraint {
            family: Family::Region,
            layer: 0,
            neuron: k,
            poly: x.clone() - MultilinearPoly::constant(region.lower[k]),
        });
        ineq.push(Constraint {
            family: Family::Region,
            layer: 0,
            neuron: k,
            poly: MultilinearPoly::constant(region.upper[k]) - x,
        });
    }
    if objective.poly.degree() > 1 {
        return Err(EncodeError::NotLinear(EncodingKind::Lp));
    }
    Ok(instance(net, region, objective, EncodingKind::Lp, ineq))
}

/// LP constraints plus integrality of every hidden variable. With a
/// threshold the problem becomes the attack-feasibility question
/// `f <= threshold` with a zero objective.
pub fn encode_milp(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &Objective,
    feasibility_threshold: Option<f64>,
) -> Result<VerificationInstance, EncodeError> {
    let mut inst = encode_lp(net, region, objective)?;
    inst.kind = EncodingKind::Milp;
    if let Some(thr) = feasibility_threshold {
        inst.constraints.inequalities.push(Constraint {
            family: Family::Threshold,
            layer: 0,
            neuron: 0,
            poly: MultilinearPoly::constant(thr) - objective.poly.clone(),
        });
        inst.constraints.objective = MultilinearPoly::zero();
    }
    Ok(inst)
}

/// Expected `(equalities, inequalities)` counts for the standard and tightened encodings.
pub fn expected_counts(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    kind: EncodingKind,
) -> (usize, usize) {
    let hidden = net.hidden_neurons();
    let n_b = region.region_count();
    match kind {
        EncodingKind::Standard => (hidden, hidden + n_b),
        EncodingKind::Tightened => (hidden, 4 * hidden + n_b),
        EncodingKind::Lp | EncodingKind::Milp => (hidden, 4 * hidden + 2 * region.dim()),
    }
}

/// Row 1-norms of a hidden layer's weights, re-exported for encoders.
pub fn layer_nv(net: &FoldedBnn, layer: usize) -> Vec<f64> {
    nv(&net.layer(layer).weights)
}

/// Full point `(x0, x1, ..., xL)` as a variable assignment.
pub fn trace_assignment<'a>(
    x0: &'a [f64],
    activations: &'a [Vec<i8>],
) -> impl Fn(VariableId) -> Option<f64> + 'a {
    move |v: VariableId| {
        if v.layer == 0 {
            x0.get(v.index).copied()
        } else {
            activations
                .get(v.layer - 1)?
                .get(v.index)
                .map(|&a| a as f64)
        }
    }
}

/// Linear part of a degree-1 polynomial: `(coefficients by variable, constant)`.
pub fn linear_parts(p: &MultilinearPoly) -> (Vec<(VariableId, f64)>, f64) {
    let mut lin = Vec::new();
    let mut c0 = 0.0;
    for (m, &c) in p.terms() {
        match m.powers() {
            [] => c0 = c,
            [(v, 1)] => lin.push((*v, c)),
            _ => panic!("linear_parts on nonlinear term {m}"),
        }
    }
    (lin, c0)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{prepare, RawBnn};
    use crate::poly::Monomial;

    pub(crate) fn example1() -> FoldedBnn {
        let raw = RawBnn::from_json(include_str!("../../examples/data/example1.json")).unwrap();
        prepare(&raw).unwrap()
    }

    fn xbar() -> Vec<f64> {
        vec![0.0, 0.5, 0.0]
    }

    #[test]
    fn l2_region_polynomials() {
        let r = PerturbationRegion::l2(xbar(), 0.2).unwrap();
        let ps = region_polynomials(&r).unwrap();
        assert_eq!(ps.len(), 4);
        // 0.04 - x1^2 - (x2 - 0.5)^2 - x3^2
        let at = |x: [f64; 3]| ps[0].eval_with(|v| Some(x[v.index])).unwrap();
        assert!((at([0.0, 0.5, 0.0]) - 0.04).abs() < 1e-15);
        assert!((at([0.2, 0.5, 0.0])).abs() < 1e-15);
        assert_eq!(ps[1].eval_with(|_| Some(0.5)).unwrap(), 0.75);
    }

    #[test]
    fn linf_region_polynomials() {
        let r = PerturbationRegion::linf(vec![0.0, 0.0], 1.0).unwrap();
        let ps = region_polynomials(&r).unwrap();
        let x = MultilinearPoly::var(VariableId::new(0, 0));
        let one = MultilinearPoly::constant(1.0);
        assert_eq!(ps[0], (one.clone() - x.clone()) * (x + one));

        let r = PerturbationRegion::linf(vec![0.9], 0.5).unwrap();
        assert!((r.lower()[0] - 0.4).abs() < 1e-15);
        assert_eq!(r.upper()[0], 1.0);
        assert!(region_polynomials(&PerturbationRegion::linf(vec![0.0], 0.0).unwrap()).is_err());
    }

    #[test]
    fn example1_objective() {
        let net = example1();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        assert_eq!(obj.poly.to_string(), "-2*x[2,2] + 1");
        let t = net.forward(&xbar()).unwrap();
        let v = obj
            .poly
            .eval_with(trace_assignment(&t.input, &t.activations))
            .unwrap();
        assert_eq!(v, 3.0);
        assert!(matches!(
            objective_targeted(&net, 1, 1),
            Err(EncodeError::TargetIsTrueLabel(1))
        ));
    }

    #[test]
    fn example1_counts() {
        let net = example1();
        let r = PerturbationRegion::l2(xbar(), 0.2).unwrap();
        let wide = PerturbationRegion::l2(xbar(), 1.0).unwrap();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        let s = encode_standard(&net, &r, &obj).unwrap();
        assert_eq!(s.constraints.equalities.len(), 4);
        assert_eq!(s.constraints.count(Family::Sign), 4);
        assert_eq!(
            s.constraints.count(Family::Region) + s.constraints.count(Family::Box),
            4
        );
        let t = encode_tightened(&net, &r, &obj).unwrap();
        assert_eq!(t.constraints.inequalities.len(), 16 + 4);
        assert_eq!(expected_counts(&net, &r, EncodingKind::Tightened), (4, 20));
        let m = encode_milp(&net, &wide, &obj, None).unwrap();
        assert_eq!(m.binaries.len(), 4);
    }

    #[test]
    fn example1_lp_row() {
        let net = example1();
        let r = PerturbationRegion::linf(xbar(), 1.0).unwrap();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        let lp = encode_lp(&net, &r, &obj).unwrap();
        let row = lp
            .constraints
            .inequalities
            .iter()
            .find(|c| c.family == Family::LinUpper && c.layer == 2 && c.neuron == 1)
            .unwrap();
        let scaled = row.poly.scale(&(1.0 / 1.5));
        let get = |l, i| scaled.coefficient(&Monomial::var(VariableId::new(l, i)));
        assert!((get(2, 1) - 1.0).abs() < 1e-15);
        assert!((get(1, 0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((get(1, 1) + 4.0 / 3.0).abs() < 1e-15);
        assert!((scaled.constant_term() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lp_signals_region_stable_neuron() {
        let net = example1();
        // neuron (1,1) = -x1 + x2 + x3 + 1.5 > 0 on this small box
        let r = PerturbationRegion::linf(xbar(), 0.1).unwrap();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        assert!(matches!(
            encode_lp(&net, &r, &obj),
            Err(EncodeError::StabilizedNeuron { layer: 1, .. })
        ));
    }
}
