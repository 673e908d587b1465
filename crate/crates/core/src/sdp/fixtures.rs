//! Explicit moment matrices exhibiting the gap between the relaxations.

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::encode::NeuronTerms;
use crate::linalg::{is_psd_exact, RationalMatrix};
use crate::model::{nv, FoldedBnn};
use crate::poly::{Coefficient, MultilinearPoly, RationalPoly, VariableId};

use super::{MomentIndex, MomentSdp, SdpError};

fn q(x: f64) -> BigRational {
    BigRational::from_f64(x)
}

fn last_layer_terms(net: &FoldedBnn, j: usize) -> Result<(Vec<i8>, f64), SdpError> {
    let depth = net.depth();
    if depth < 2 {
        return Err(SdpError::Fixture(format!(
            "need at least two hidden layers, got {depth}"
        )));
    }
    if j >= net.widths()[depth] {
        return Err(SdpError::Fixture(format!("neuron {j} out of range")));
    }
    let layer = net.layer(depth);
    Ok((layer.weights.row(j).to_vec(), layer.bias[j]))
}

/// `ĝ+ = (c+ (y + 1) - 2 (<w, x> + b)) / c+` for last-layer neuron `j`, exactly.
pub fn normalized_upper_sign(net: &FoldedBnn, j: usize) -> Result<RationalPoly, SdpError> {
    let (w, b) = last_layer_terms(net, j)?;
    let depth = net.depth();
    let n = w.len();
    let lower = vec![-BigRational::one(); n];
    let upper = vec![BigRational::one(); n];
    let t = NeuronTerms {
        output: VariableId::new(depth, j),
        input_layer: depth - 1,
        weights: &w,
        bias: q(b),
        lower: &lower,
        upper: &upper,
    };
    Ok(t.lin_upper().scale(&t.c_plus().recip()))
}

#[derive(Clone, Debug)]
pub struct FirstOrderGapFixture {
    /// Objective `ĝ+` of last-layer neuron `j`.
    pub objective: MultilinearPoly,
    pub objective_exact: RationalPoly,
    /// Rows and columns after the constant: `x_{L-1}` then `x_{L,j}`.
    pub variables: Vec<VariableId>,
    pub moment_matrix: DMatrix<f64>,
    pub moment_matrix_exact: RationalMatrix,
}

/// Moment matrix `[[1, w', 0], [w, ww' + diag(1 - w∘w), 0], [0, 0, 1]]`
/// with `w` the incoming row of last-layer neuron `j`. It is feasible for the
/// standard order-1 relaxation and gives `L_y(ĝ+) = -1`. The diagonal term
/// only matters for zero weights, keeping binary diagonals at one.
pub fn first_order_gap_fixture(net: &FoldedBnn, j: usize) -> Result<FirstOrderGapFixture, SdpError> {
    let (w, _) = last_layer_terms(net, j)?;
    let depth = net.depth();
    let n = w.len();
    let s = n + 2;
    let mut exact = vec![vec![BigRational::zero(); s]; s];
    let r = |v: i64| BigRational::from_integer(v.into());
    exact[0][0] = BigRational::one();
    exact[s - 1][s - 1] = BigRational::one();
    for a in 0..n {
        exact[0][a + 1] = r(w[a] as i64);
        exact[a + 1][0] = r(w[a] as i64);
        for b in 0..n {
            exact[a + 1][b + 1] = r((w[a] * w[b]) as i64);
        }
        exact[a + 1][a + 1] = BigRational::one();
    }
    let moment_matrix = DMatrix::from_fn(s, s, |a, b| exact[a][b].to_f64());
    let objective_exact = normalized_upper_sign(net, j)?;
    let variables = (0..n)
        .map(|k| VariableId::new(depth - 1, k))
        .chain(std::iter::once(VariableId::new(depth, j)))
        .collect();
    Ok(FirstOrderGapFixture {
        objective: objective_exact.to_f64(),
        objective_exact,
        variables,
        moment_matrix,
        moment_matrix_exact: exact,
    })
}

/// Moments of the point `anchor` pushed through the network, except that
/// last-layer neuron `j` gets zero mean and zero cross-moments. When
/// `W^[L]_(j,:)` equals the anchor's layer `L-1` activations, the last-layer
/// clique block of `j` is the [`first_order_gap_fixture`] matrix.
pub fn first_order_gap_moments(
    net: &FoldedBnn,
    msdp: &MomentSdp,
    j: usize,
    anchor: &[f64],
) -> Result<Vec<BigRational>, SdpError> {
    let (w, _) = last_layer_terms(net, j)?;
    let depth = net.depth();
    let trace = net
        .forward(anchor)
        .map_err(|e| SdpError::Fixture(e.to_string()))?;
    if trace.any_zero_preactivation() {
        return Err(SdpError::Fixture("anchor has a zero pre-activation".into()));
    }
    if trace.activations[depth - 2] != w {
        return Err(SdpError::Fixture(format!(
            "incoming row of neuron ({depth}, {j}) must equal the anchor's layer-{} activations",
            depth - 1
        )));
    }
    let special = VariableId::new(depth, j);
    let value = |v: VariableId| {
        if v.layer == 0 {
            q(anchor[v.index])
        } else {
            BigRational::from_integer((trace.activations[v.layer - 1][v.index] as i64).into())
        }
    };
    Ok(msdp
        .index
        .monomials()
        .iter()
        .map(|m| {
            if m.variables().any(|v| v == special) && m.degree() > 0 {
                BigRational::zero()
            } else {
                m.eval::<BigRational>(|v| Some(value(v))).expect("total")
            }
        })
        .collect())
}

/// Exact feasibility audit of a moment vector: every block PSD and every
/// `L_y(g) >= 0`, with the assembled floating coefficients read exactly.
/// Returns the exact objective value.
pub fn exact_feasibility(msdp: &MomentSdp, y: &[BigRational]) -> Result<BigRational, String> {
    if y.first() != Some(&BigRational::one()) {
        return Err("constant moment must be one".into());
    }
    let apply = |f: &[(usize, f64)]| {
        f.iter().fold(BigRational::zero(), |acc, &(id, c)| {
            acc + q(c) * y[id].clone()
        })
    };
    for g in &msdp.inequalities {
        let v = apply(&g.functional);
        if v.is_negative() {
            return Err(format!(
                "inequality {:?} at ({}, {}) evaluates to {}",
                g.family,
                g.layer,
                g.neuron,
                v.to_f64()
            ));
        }
    }
    for (k, b) in msdp.blocks.iter().enumerate() {
        let s = b.size();
        let m: RationalMatrix = (0..s)
            .map(|i| (0..s).map(|jj| y[b.id(i, jj)].clone()).collect())
            .collect();
        if !is_psd_exact(&m) {
            return Err(format!("block {k} is not PSD"));
        }
    }
    Ok(apply(&msdp.objective))
}

/// `L_y(p)` with exact coefficients; errors on a monomial outside the index.
pub fn exact_functional_value(
    index: &MomentIndex,
    p: &RationalPoly,
    y: &[BigRational],
) -> Result<BigRational, String> {
    p.terms().try_fold(BigRational::zero(), |acc, (m, c)| {
        let id = index
            .id(&m.reduce())
            .ok_or_else(|| format!("monomial {m} has no moment"))?;
        Ok(acc + c.clone() * y[id].clone())
    })
}

#[derive(Clone, Debug)]
pub struct SplitSignFixture {
    pub a: f64,
    pub t: f64,
    pub nv: f64,
    pub bias: f64,
    /// Rows `(1, x_{L-1}, x_{L,j})`.
    pub matrix: DMatrix<f64>,
    /// `L_y(ĝ+)` at this matrix.
    pub objective_value: f64,
}

/// Moment matrix `[[1, a w', 0], [a w, ww', t w], [0, t w', 1]]` with
/// `a = ½ sqrt(2 - b²/nv²) - b/(2 nv)` and `t = sqrt(1 - a²)`; it satisfies the
/// split sign constraints yet drives `ĝ+` negative.
pub fn split_sign_fixture(net: &FoldedBnn, j: usize) -> Result<SplitSignFixture, SdpError> {
    let (w, b) = last_layer_terms(net, j)?;
    let norm = nv(&net.layer(net.depth()).weights)[j];
    if !(b.abs() < norm) {
        return Err(SdpError::Fixture(format!(
            "need |b| < nv, got b = {b}, nv = {norm}"
        )));
    }
    split_sign_matrix(&w, b)
}

/// [`split_sign_fixture`] from an explicit row and bias.
pub fn split_sign_matrix(w: &[i8], b: f64) -> Result<SplitSignFixture, SdpError> {
    let norm: f64 = w.iter().map(|x| x.unsigned_abs() as f64).sum();
    if !(b.abs() < norm) {
        return Err(SdpError::Fixture(format!(
            "need |b| < nv, got b = {b}, nv = {norm}"
        )));
    }
    let beta = b / norm;
    let a = 0.5 * (2.0 - beta * beta).sqrt() - beta / 2.0;
    let t = (1.0 - a * a).max(0.0).sqrt();
    let n = w.len();
    let s = n + 2;
    let mut m = DMatrix::zeros(s, s);
    m[(0, 0)] = 1.0;
    m[(s - 1, s - 1)] = 1.0;
    for i in 0..n {
        let wi = w[i] as f64;
        m[(0, i + 1)] = a * wi;
        m[(i + 1, 0)] = a * wi;
        m[(i + 1, s - 1)] = t * wi;
        m[(s - 1, i + 1)] = t * wi;
        for k in 0..n {
            m[(i + 1, k + 1)] = wi * w[k] as f64;
        }
    }
    let objective_value = -norm / (norm + b) * ((2.0 - beta * beta).sqrt() - 1.0);
    Ok(SplitSignFixture {
        a,
        t,
        nv: norm,
        bias: b,
        matrix: m,
        objective_value,
    })
}
