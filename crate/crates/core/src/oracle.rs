//! Ground truth for small networks: exact optimum by activation-pattern
//! enumeration, sampled upper bounds, and the LP-gap closure metric.
//!
//! Given the first-layer pattern, the input constraints are linear
//! (`σ_j (<w_j, x0> + b_j) >= 0`) and every deeper activation is fixed by
//! constant arithmetic; an exact zero pre-activation admits both signs.
//! Feasibility over the region is an LP (box) or SOCP (ball) solved with
//! clarabel as `max t` over the smallest sign slack.

use std::collections::HashMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::encode::{
    trace_assignment, EncodeError, Family, PerturbationRegion, RegionKind, VerificationInstance,
};
use crate::model::{FoldedBnn, ModelError};
use crate::poly::{MultilinearPoly, VariableId};

/// Accept a pattern when the best achievable sign slack is at least `-FEAS_TOL`.
pub const FEAS_TOL: f64 = 1e-9;
pub const DEFAULT_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{hidden} hidden neurons exceed the enumeration cap of {cap}")]
    CapExceeded { hidden: usize, cap: usize },
    #[error("objective depends on input variable {0}; only hidden variables are allowed")]
    NonConstantObjective(VariableId),
    #[error("no feasible activation pattern")]
    NoFeasiblePattern,
    #[error("region has dimension {got}, network expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("feasibility solve failed: {0}")]
    Feasibility(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// A feasible activation pattern: one `±1` vector per hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternRecord {
    pub pattern: Vec<Vec<i8>>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternEnumeration {
    /// Feasible patterns in lexicographic order (`-1 < +1`).
    pub feasible: Vec<PatternRecord>,
    /// `2^(hidden neurons)`
    pub total: u64,
    pub feasibility_solves: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactResult {
    pub tau: f64,
    /// An input in the region whose forward pass attains `tau`.
    pub witness: Option<Vec<f64>>,
    pub pattern: Vec<Vec<i8>>,
    pub feasible_patterns: usize,
}

fn check_region(net: &FoldedBnn, region: &PerturbationRegion) -> Result<(), OracleError> {
    if region.dim() != net.input_dim() {
        return Err(OracleError::Dimension {
            expected: net.input_dim(),
            got: region.dim(),
        });
    }
    Ok(())
}

/// `a'x + c >= t` rows (soft) and `a'x + c >= 0` rows (hard) over the region.
struct SlackProblem<'a> {
    dim: usize,
    soft: Vec<(Vec<f64>, f64)>,
    hard: Vec<(Vec<f64>, f64)>,
    ball: Option<(&'a [f64], f64)>,
}

impl SlackProblem<'_> {
    /// Largest common slack `t <= 1` and its maximizer, or `None` when even
    /// the hard rows are infeasible (or `t` would fall below `-1e3`).
    fn solve(&self) -> Result<Option<(f64, Vec<f64>)>, OracleError> {
        let n = self.dim + 1;
        let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut push_row = |coeffs: &[f64], t: f64, rhs: f64, b: &mut Vec<f64>| {
            let r = b.len();
            for (k, &a) in coeffs.iter().enumerate() {
                if a != 0.0 {
                    ri.push(r);
                    ci.push(k);
                    vals.push(-a);
                }
            }
            if t != 0.0 {
                ri.push(r);
                ci.push(self.dim);
                vals.push(t);
            }
            b.push(rhs);
        };
        for (a, c) in &self.soft {
            push_row(a, 1.0, *c, &mut b);
        }
        for (a, c) in &self.hard {
            push_row(a, 0.0, *c, &mut b);
        }
        let zeros = vec![0.0; self.dim];
        push_row(&zeros, 1.0, 1.0, &mut b);
        push_row(&zeros, -1.0, 1e3, &mut b);
        let nonneg = b.len();
        let mut cones = vec![SupportedConeT::NonnegativeConeT(nonneg)];
        if let Some((center, radius)) = self.ball {
            // (radius, x - center) in the second-order cone
            b.push(radius);
            for (k, &c) in center.iter().enumerate() {
                let r = b.len();
                ri.push(r);
                ci.push(k);
                vals.push(-1.0);
                b.push(-c);
            }
            cones.push(SupportedConeT::SecondOrderConeT(self.dim + 1));
        }
        let a = CscMatrix::new_from_triplets(b.len(), n, ri, ci, vals);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        q[self.dim] = -1.0;
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .build()
            .map_err(|e| OracleError::Feasibility(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| OracleError::Feasibility(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {
                Ok(Some((sol.x[self.dim], sol.x[..self.dim].to_vec())))
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(None),
            other => Err(OracleError::Feasibility(format!("{other:?}"))),
        }
    }
}

fn region_rows(region: &PerturbationRegion) -> (Vec<(Vec<f64>, f64)>, Option<(&[f64], f64)>) {
    let n = region.dim();
    let mut rows = Vec::with_capacity(2 * n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        rows.push((e.clone(), -region.lower()[k]));
        e[k] = -1.0;
        rows.push((e, region.upper()[k]));
    }
    let ball = (region.kind() == RegionKind::L2BallBox).then(|| (region.center(), region.radius()));
    (rows, ball)
}

fn is_point(region: &PerturbationRegion) -> bool {
    region
        .lower()
        .iter()
        .zip(region.upper())
        .all(|(l, u)| l == u)
}

/// Value of `objective` under a hidden pattern.
fn pattern_value(objective: &MultilinearPoly, pattern: &[Vec<i8>]) -> Result<f64, OracleError> {
    if let Some(v) = objective.variables().into_iter().find(|v| v.layer == 0) {
        return Err(OracleError::NonConstantObjective(v));
    }
    Ok(objective
        .eval_with(|v| {
            pattern
                .get(v.layer - 1)
                .and_then(|p| p.get(v.index))
                .map(|&s| s as f64)
        })
        .map_err(|e| OracleError::Feasibility(e.to_string()))?)
}

/// All sign vectors of deeper layers consistent with `first`.
fn propagate(net: &FoldedBnn, first: Vec<i8>) -> Vec<Vec<Vec<i8>>> {
    let mut partial = vec![vec![first]];
    for layer in 2..=net.depth() {
        let lay = net.layer(layer);
        let mut next = Vec::new();
        for p in partial {
            let prev: Vec<f64> = p.last().unwrap().iter().map(|&s| s as f64).collect();
            let z = lay.weights.apply(&prev);
            let mut options: Vec<Vec<i8>> = vec![Vec::new()];
            for (j, zj) in z.iter().enumerate() {
                let zj = zj + lay.bias[j];
                let signs: &[i8] = if zj > 0.0 {
                    &[1]
                } else if zj < 0.0 {
                    &[-1]
                } else {
                    &[-1, 1]
                };
                options = options
                    .into_iter()
                    .flat_map(|o| {
                        signs.iter().map(move |&s| {
                            let mut o = o.clone();
                            o.push(s);
                            o
                        })
                    })
                    .collect();
            }
            for o in options {
                let mut q = p.clone();
                q.push(o);
                next.push(q);
            }
        }
        partial = next;
    }
    partial
}

/// Feasible first-layer patterns with a region point for each.
fn first_layer_patterns(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    solves: &mut usize,
) -> Result<Vec<(Vec<i8>, Vec<f64>)>, OracleError> {
    let lay = net.layer(1);
    let n1 = net.widths()[1];
    let pre = |j: usize, x: &[f64]| {
        lay.weights
            .row(j)
            .iter()
            .zip(x)
            .map(|(&w, v)| w as f64 * v)
            .sum::<f64>()
            + lay.bias[j]
    };
    let mut out = Vec::new();
    if is_point(region) {
        let x = region.center().to_vec();
        let mut pats: Vec<Vec<i8>> = vec![Vec::new()];
        for j in 0..n1 {
            let z = pre(j, &x);
            let signs: &[i8] = if z > 0.0 {
                &[1]
            } else if z < 0.0 {
                &[-1]
            } else {
                &[-1, 1]
            };
            pats = pats
                .into_iter()
                .flat_map(|p| {
                    signs.iter().map(move |&s| {
                        let mut p = p.clone();
                        p.push(s);
                        p
                    })
                })
                .collect();
        }
        return Ok(pats.into_iter().map(|p| (p, x.clone())).collect());
    }
    let (hard, ball) = region_rows(region);
    let solve = |sigma: &[i8], solves: &mut usize| -> Result<Option<Vec<f64>>, OracleError> {
        *solves += 1;
        let soft = sigma
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let s = s as f64;
                (
                    lay.weights.row(j).iter().map(|&w| s * w as f64).collect(),
                    s * lay.bias[j],
                )
            })
            .collect();
        let prob = SlackProblem {
            dim: net.input_dim(),
            soft,
            hard: hard.clone(),
            ball,
        };
        Ok(prob
            .solve()?
            .filter(|(t, _)| *t >= -FEAS_TOL)
            .map(|(_, x)| x))
    };
    let Some(root) = solve(&[], solves)? else {
        return Err(OracleError::NoFeasiblePattern);
    };
    // depth-first over neurons, reusing the parent's point when it already
    // satisfies the new sign
    let mut stack = vec![(Vec::<i8>::new(), root)];
    while let Some((sigma, x)) = stack.pop() {
        let j = sigma.len();
        if j == n1 {
            out.push((sigma, x));
            continue;
        }
        let z = pre(j, &x);
        for s in [1i8, -1] {
            let mut child = sigma.clone();
            child.push(s);
            if s as f64 * z >= 0.0 {
                stack.push((child, x.clone()));
            } else if let Some(y) = solve(&child, solves)? {
                stack.push((child, y));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

pub fn enumerate_patterns(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &MultilinearPoly,
    cap: usize,
) -> Result<PatternEnumeration, OracleError> {
    check_region(net, region)?;
    let hidden = net.hidden_neurons();
    if hidden > cap {
        return Err(OracleError::CapExceeded { hidden, cap });
    }
    let mut solves = 0;
    let firsts = first_layer_patterns(net, region, &mut solves)?;
    let mut feasible = Vec::new();
    for (first, _) in firsts {
        for pattern in propagate(net, first) {
            let objective = pattern_value(objective, &pattern)?;
            feasible.push(PatternRecord { pattern, objective });
        }
    }
    feasible.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(PatternEnumeration {
        feasible,
        total: 1u64 << hidden,
        feasibility_solves: solves,
    })
}

/// τ_exact with the default enumeration cap.
pub fn exact_verify(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &MultilinearPoly,
) -> Result<ExactResult, OracleError> {
    exact_verify_with_cap(net, region, objective, DEFAULT_CAP)
}

pub fn exact_verify_with_cap(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &MultilinearPoly,
    cap: usize,
) -> Result<ExactResult, OracleError> {
    let en = enumerate_patterns(net, region, objective, cap)?;
    let best = en
        .feasible
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .ok_or(OracleError::NoFeasiblePattern)?;
    let witness = find_witness(net, region, objective, best.objective, &en)?;
    Ok(ExactResult {
        tau: best.objective,
        witness,
        pattern: best.pattern.clone(),
        feasible_patterns: en.feasible.len(),
    })
}

/// A region point whose forward pass attains `tau`, searched over the
/// minimizing first-layer patterns at maximal sign slack.
fn find_witness(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &MultilinearPoly,
    tau: f64,
    en: &PatternEnumeration,
) -> Result<Option<Vec<f64>>, OracleError> {
    let lay = net.layer(1);
    let (hard, ball) = region_rows(region);
    let mut tried: Vec<&Vec<i8>> = Vec::new();
    for rec in en.feasible.iter().filter(|r| r.objective == tau) {
        let first = &rec.pattern[0];
        if tried.contains(&first) {
            continue;
        }
        tried.push(first);
        let x = if is_point(region) {
            region.center().to_vec()
        } else {
            let soft = first
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    let s = s as f64;
                    (
                        lay.weights.row(j).iter().map(|&w| s * w as f64).collect(),
                        s * lay.bias[j],
                    )
                })
                .collect();
            let prob = SlackProblem {
                dim: net.input_dim(),
                soft,
                hard: hard.clone(),
                ball,
            };
            match prob.solve()? {
                Some((_, x)) => clip_into(region, x),
                None => continue,
            }
        };
        if !region.contains(&x, 1e-9) {
            continue;
        }
        let trace = net.forward(&x)?;
        let value = objective
            .eval_with(trace_assignment(&trace.input, &trace.activations))
            .map_err(|e| OracleError::Feasibility(e.to_string()))?;
        if value == tau {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

fn clip_into(region: &PerturbationRegion, mut x: Vec<f64>) -> Vec<f64> {
    for (k, v) in x.iter_mut().enumerate() {
        *v = v.clamp(region.lower()[k], region.upper()[k]);
    }
    x
}

/// Feasible hidden patterns of a linear (LP or MILP) encoding, found by
/// substituting every `±1` pattern and checking the remaining input rows.
/// Returns `(pattern, objective)` in lexicographic order.
pub fn encoded_patterns(
    instance: &VerificationInstance,
    cap: usize,
) -> Result<Vec<PatternRecord>, OracleError> {
    let net = &instance.net;
    let hidden = net.hidden_neurons();
    if hidden > cap {
        return Err(OracleError::CapExceeded { hidden, cap });
    }
    let widths = &net.widths()[1..=net.depth()];
    let n0 = net.input_dim();
    let mut cache: HashMap<Vec<(Vec<u64>, u64)>, bool> = HashMap::new();
    let mut out = Vec::new();
    for code in 0..(1u64 << hidden) {
        let mut bit = hidden;
        let pattern: Vec<Vec<i8>> = widths
            .iter()
            .map(|&w| {
                (0..w)
                    .map(|_| {
                        bit -= 1;
                        if code >> bit & 1 == 1 {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect()
            })
            .collect();
        let value = |v: VariableId| -> Option<f64> {
            if v.layer == 0 {
                None
            } else {
                Some(pattern[v.layer - 1][v.index] as f64)
            }
        };
        let mut soft = Vec::new();
        let mut hard = Vec::new();
        let mut ok = true;
        for c in &instance.constraints.inequalities {
            let (coeffs, c0) = substitute(&c.poly, &value, n0);
            if coeffs.iter().all(|&a| a == 0.0) {
                if c0 < -FEAS_TOL {
                    ok = false;
                    break;
                }
            } else if c.family == Family::Region {
                hard.push((coeffs, c0));
            } else {
                soft.push((coeffs, c0));
            }
        }
        if !ok {
            continue;
        }
        let key: Vec<(Vec<u64>, u64)> = soft
            .iter()
            .chain(&hard)
            .map(|(a, c): &(Vec<f64>, f64)| (a.iter().map(|v| v.to_bits()).collect(), c.to_bits()))
            .collect();
        let feasible = match cache.get(&key) {
            Some(&f) => f,
            None => {
                let prob = SlackProblem {
                    dim: n0,
                    soft,
                    hard,
                    ball: None,
                };
                let f = prob.solve()?.is_some_and(|(t, _)| t >= -FEAS_TOL);
                cache.insert(key, f);
                f
            }
        };
        if feasible {
            let objective = pattern_value(instance.objective(), &pattern)?;
            out.push(PatternRecord { pattern, objective });
        }
    }
    out.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(out)
}

/// Substitutes hidden values into a degree-1-in-inputs polynomial:
/// `(input coefficients, constant)`.
fn substitute(
    p: &MultilinearPoly,
    value: &dyn Fn(VariableId) -> Option<f64>,
    n0: usize,
) -> (Vec<f64>, f64) {
    let mut coeffs = vec![0.0; n0];
    let mut c0 = 0.0;
    for (m, &c) in p.terms() {
        let mut coef = c;
        let mut input = None;
        for (v, e) in m.powers() {
            match value(*v) {
                Some(s) => coef *= s.powi(*e as i32),
                None => {
                    assert!(input.is_none() && *e == 1, "nonlinear input term {m}");
                    input = Some(v.index);
                }
            }
        }
        match input {
            Some(k) => coeffs[k] += coef,
            None => c0 += coef,
        }
    }
    (coeffs, c0)
}

/// Uniform sample of the region (ball samples are projected onto the box,
/// which keeps them in the ball).
pub fn sample_region(region: &PerturbationRegion, rng: &mut impl Rng) -> Vec<f64> {
    let n = region.dim();
    match region.kind() {
        RegionKind::LinfBall => (0..n)
            .map(|k| {
                let (l, u) = (region.lower()[k], region.upper()[k]);
                if l == u {
                    l
                } else {
                    rng.random_range(l..=u)
                }
            })
            .collect(),
        RegionKind::L2BallBox => {
            let dir: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = dir
                .iter()
                .map(|d| d * d)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let r = region.radius() * rng.random::<f64>().powf(1.0 / n as f64);
            let x = region
                .center()
                .iter()
                .zip(&dir)
                .map(|(c, d)| c + r * d / norm)
                .collect();
            clip_into(region, x)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledBound {
    pub value: f64,
    pub point: Vec<f64>,
    /// Forward label at `point`, 0-based.
    pub label: usize,
}

/// Minimum of the objective over `n` region samples pushed through the network.
pub fn sample_upper_bound(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &MultilinearPoly,
    n: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    Ok(sample_minimizer(net, region, objective, n, seed)?.value)
}

pub fn sample_minimizer(
    net: &FoldedBnn,
    region: &PerturbationRegion,
    objective: &MultilinearPoly,
    n: usize,
    seed: u64,
) -> Result<SampledBound, OracleError> {
    check_region(net, region)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<SampledBound> = None;
    for _ in 0..n.max(1) {
        let x = sample_region(region, &mut rng);
        let trace = net.forward(&x)?;
        let value = objective
            .eval_with(trace_assignment(&trace.input, &trace.activations))
            .map_err(|e| OracleError::Feasibility(e.to_string()))?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(SampledBound {
                value,
                point: x,
                label: trace.label,
            });
        }
    }
    Ok(best.expect("at least one sample"))
}

/// `(τ_sdp - τ_lp) / (ub - τ_lp)`, undefined when `ub <= τ_lp`.
pub fn relative_improvement(tau_sdp: f64, tau_lp: f64, ub: f64) -> Option<f64> {
    (ub > tau_lp).then(|| (tau_sdp - tau_lp) / (ub - tau_lp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::tests::example1;
    use crate::encode::{encode_milp, objective_targeted};

    #[test]
    fn point_region_is_the_trace() {
        let net = example1();
        let region = PerturbationRegion::l2(vec![0.0, 0.5, 0.0], 0.0).unwrap();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        let r = exact_verify(&net, &region, &obj.poly).unwrap();
        assert_eq!(r.tau, 3.0);
        assert_eq!(r.witness.as_deref(), Some(&[0.0, 0.5, 0.0][..]));
        assert_eq!(
            sample_upper_bound(&net, &region, &obj.poly, 1, 7).unwrap(),
            3.0
        );
    }

    #[test]
    fn l2_region_enumeration() {
        let net = example1();
        let region = PerturbationRegion::l2(vec![0.0, 0.5, 0.0], 0.2).unwrap();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        let en = enumerate_patterns(&net, &region, &obj.poly, DEFAULT_CAP).unwrap();
        assert_eq!(en.total, 16);
        let r = exact_verify(&net, &region, &obj.poly).unwrap();
        assert!(r.tau <= 3.0);
        let w = r.witness.expect("witness");
        assert!(region.contains(&w, 1e-9));
        let ub = sample_upper_bound(&net, &region, &obj.poly, 500, 1).unwrap();
        assert!(ub >= r.tau);
    }

    #[test]
    fn constant_objective() {
        let net = example1();
        let region = PerturbationRegion::linf(vec![0.0, 0.5, 0.0], 0.3).unwrap();
        let r = exact_verify(&net, &region, &MultilinearPoly::constant(-1.5)).unwrap();
        assert_eq!(r.tau, -1.5);
    }

    #[test]
    fn input_objective_is_rejected() {
        let net = example1();
        let region = PerturbationRegion::linf(vec![0.0, 0.5, 0.0], 0.3).unwrap();
        let obj = MultilinearPoly::var(VariableId::new(0, 0));
        assert!(matches!(
            exact_verify(&net, &region, &obj),
            Err(OracleError::NonConstantObjective(_))
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let net = example1();
        let region = PerturbationRegion::linf(vec![0.0, 0.5, 0.0], 0.3).unwrap();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        assert!(matches!(
            exact_verify_with_cap(&net, &region, &obj.poly, 3),
            Err(OracleError::CapExceeded { hidden: 4, cap: 3 })
        ));
    }

    #[test]
    fn milp_patterns_match() {
        let net = example1();
        let region = PerturbationRegion::linf(vec![0.0, 0.5, 0.0], 1.0).unwrap();
        let obj = objective_targeted(&net, 1, 0).unwrap();
        let milp = encode_milp(&net, &region, &obj, None).unwrap();
        let enc = encoded_patterns(&milp, DEFAULT_CAP).unwrap();
        let en = enumerate_patterns(&net, &region, &obj.poly, DEFAULT_CAP).unwrap();
        assert_eq!(enc, en.feasible);
    }

    #[test]
    fn improvement_metric() {
        assert_eq!(relative_improvement(2.0, 0.0, 2.0), Some(1.0));
        assert_eq!(relative_improvement(0.0, 0.0, 2.0), Some(0.0));
        assert_eq!(relative_improvement(0.0, 1.0, 1.0), None);
    }
}
