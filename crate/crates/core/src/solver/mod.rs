//! Conic solver for the LP and moment relaxations, plus rigorous bounds.
//!
//! [`solve_conic`] runs a homogeneous self-dual operator-splitting iteration
//! over `{Ax + s = b} × K`. LP instances go through the same path with
//! nonnegative rows only.

mod admm;
mod rigorous;

pub use rigorous::{
    block_deficit, certify, floor_f64, gram_lower_eigenvalue, rigorous_lower_bound, Certificate,
    RigorousBound,
};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::encode::{Clique, EncodingKind, VerificationInstance};
use crate::poly::VariableId;
use crate::sdp::{
    assemble_moment_sdp, linear_conic, svec_to_matrix, to_conic, ConicProblem, RowLabel, SdpError,
};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("non-finite certificate entry in {0}")]
    NonFinite(String),
    #[error("certificate does not match the instance: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub scaling: bool,
    /// Only perturbs the starting point; zero starts from the origin.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50_000,
            scaling: true,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolveError::Options(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(SolveError::Options("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    /// Primal infeasibility certificate found.
    Infeasible,
    /// Dual infeasibility certificate found.
    Unbounded,
}

/// Relative residuals of a candidate primal-dual triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residuals {
    /// `|Ax + s - b| / (1 + |b|)`
    pub primal: f64,
    /// `|A'y + c| / (1 + |c|)`
    pub dual: f64,
    /// `|c'x + b'y|`, the absolute duality gap.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GramBlock {
    pub clique: usize,
    /// Rows and columns after the constant.
    pub variables: Vec<VariableId>,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

/// Dual certificate read off `y`: one multiplier per instance inequality and
/// one Gram matrix per clique block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualCertificate {
    pub multipliers: Vec<f64>,
    pub grams: Vec<GramBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// `c'x + c0`, the approximate bound λ.
    pub primal_objective: f64,
    /// `c0 - b'y`
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub certificate: DualCertificate,
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub y: Vec<f64>,
    #[serde(skip)]
    pub s: Vec<f64>,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Recomputes the residuals of `(x, y, s)` from the problem data.
pub fn residuals(p: &ConicProblem, x: &[f64], y: &[f64], s: &[f64]) -> Residuals {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let ax = p.apply(x);
    let pr: Vec<f64> = (0..p.num_rows()).map(|i| ax[i] + s[i] - p.b[i]).collect();
    let aty = p.apply_transpose(y);
    let dr: Vec<f64> = (0..p.num_vars()).map(|j| aty[j] + p.c[j]).collect();
    Residuals {
        primal: norm(&pr) / (1.0 + norm(&p.b)),
        dual: norm(&dr) / (1.0 + norm(&p.c)),
        gap: (dot(&p.c, x) + dot(&p.b, y)).abs(),
    }
}

/// The optimality test applied to unscaled iterates.
pub fn meets_tolerance(r: &Residuals, primal_objective: f64, tol: f64) -> bool {
    r.primal <= tol && r.dual <= tol && r.gap <= tol * (1.0 + primal_objective.abs())
}

pub fn solve_conic(problem: &ConicProblem, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    opts.validate()?;
    problem.validate()?;
    let (status, iterations, x, y, s) = admm::run(problem, opts);
    let residuals = residuals(problem, &x, &y, &s);
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let primal_objective = dot(&problem.c, &x) + problem.c0;
    let dual_objective = problem.c0 - dot(&problem.b, &y);
    let certificate = read_certificate(problem, &y);
    Ok(SolveResult {
        status,
        primal_objective,
        dual_objective,
        residuals,
        iterations,
        certificate,
        x,
        y,
        s,
    })
}

fn read_certificate(p: &ConicProblem, y: &[f64]) -> DualCertificate {
    let n_ineq = p
        .rows
        .iter()
        .filter_map(|r| match r {
            RowLabel::Inequality(i) => Some(i + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut multipliers = vec![0.0; n_ineq];
    for (r, label) in p.rows.iter().enumerate() {
        if let RowLabel::Inequality(i) = label {
            multipliers[*i] = y[r];
        }
    }
    let grams = p
        .psd_ranges()
        .into_iter()
        .zip(&p.blocks)
        .zip(&p.cones.psd)
        .map(|((range, info), &size)| GramBlock {
            clique: info.clique,
            variables: info.variables.clone(),
            matrix: svec_to_matrix(&y[range], size),
        })
        .collect();
    DualCertificate { multipliers, grams }
}

/// τ_LP: the linear instance solved through [`solve_conic`].
pub fn solve_lp(
    instance: &VerificationInstance,
    opts: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    let p = linear_conic(instance)?;
    solve_conic(&p, opts)
}

/// Order-1 moment relaxation of a standard or tightened instance.
pub fn solve_sdp(
    instance: &VerificationInstance,
    cliques: &[Clique],
    opts: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    if !matches!(
        instance.kind,
        EncodingKind::Standard | EncodingKind::Tightened
    ) {
        return Err(SdpError::WrongEncoding(instance.kind).into());
    }
    let msdp = assemble_moment_sdp(instance, cliques)?;
    solve_conic(&to_conic(&msdp), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;
    use crate::sdp::{BlockInfo, ConeSpec};

    fn two_by_two() -> ConicProblem {
        // y ↦ [[1, y], [y, 1]] ⪰ 0 as s = b - A y
        let r2 = std::f64::consts::SQRT_2;
        ConicProblem {
            c: vec![1.0],
            c0: 0.0,
            a: vec![(1, 0, -r2)],
            b: vec![1.0, 0.0, 1.0],
            cones: ConeSpec {
                zero: 0,
                nonneg: 0,
                psd: vec![2],
            },
            columns: vec![Monomial::one()],
            rows: vec![
                RowLabel::Block {
                    block: 0,
                    i: 0,
                    j: 0,
                },
                RowLabel::Block {
                    block: 0,
                    i: 0,
                    j: 1,
                },
                RowLabel::Block {
                    block: 0,
                    i: 1,
                    j: 1,
                },
            ],
            blocks: vec![BlockInfo {
                clique: 0,
                variables: vec![VariableId::new(0, 0)],
            }],
        }
    }

    #[test]
    fn analytic_sdp() {
        let r = solve_conic(&two_by_two(), &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(
            (r.primal_objective + 1.0).abs() < 1e-6,
            "{}",
            r.primal_objective
        );
        assert!(meets_tolerance(&r.residuals, r.primal_objective, 1e-6));
    }

    #[test]
    fn small_lp() {
        // min -x1 - x2  s.t. x1 + 2 x2 <= 4, 3 x1 + x2 <= 6, x >= 0 → (8/5, 6/5), -14/5
        let p = ConicProblem {
            c: vec![-1.0, -1.0],
            c0: 0.0,
            a: vec![
                (0, 0, 1.0),
                (0, 1, 2.0),
                (1, 0, 3.0),
                (1, 1, 1.0),
                (2, 0, -1.0),
                (3, 1, -1.0),
            ],
            b: vec![4.0, 6.0, 0.0, 0.0],
            cones: ConeSpec {
                zero: 0,
                nonneg: 4,
                psd: vec![],
            },
            columns: vec![Monomial::one(); 2],
            rows: (0..4).map(RowLabel::Inequality).collect(),
            blocks: vec![],
        };
        let r = solve_conic(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.primal_objective + 2.8).abs() < 1e-5);
        assert!((r.x[0] - 1.6).abs() < 1e-4 && (r.x[1] - 1.2).abs() < 1e-4);
        assert!(r.certificate.multipliers.iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn infeasible_lp() {
        // x <= -1 and x >= 0
        let p = ConicProblem {
            c: vec![1.0],
            c0: 0.0,
            a: vec![(0, 0, 1.0), (1, 0, -1.0)],
            b: vec![-1.0, 0.0],
            cones: ConeSpec {
                zero: 0,
                nonneg: 2,
                psd: vec![],
            },
            columns: vec![Monomial::one()],
            rows: (0..2).map(RowLabel::Inequality).collect(),
            blocks: vec![],
        };
        let r = solve_conic(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn deterministic() {
        let p = two_by_two();
        let a = solve_conic(&p, &SolveOptions::default()).unwrap();
        let b = solve_conic(&p, &SolveOptions::default()).unwrap();
        assert_eq!(
            a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn options_are_checked() {
        let bad = SolveOptions {
            tol: 0.0,
            ..SolveOptions::default()
        };
        assert!(solve_conic(&two_by_two(), &bad).is_err());
    }
}
