//! Certificate-side enclosure of floating-point error.
//!
//! From `f - λ = Σ σ_g g + Σ v_k' G_k v_k + r`, reduced modulo `x² = 1` for
//! binaries, and `|m| <= 1` for every monomial on the feasible set, it follows
//! that `f >= λ - Σ|r_α| - Σ s_k max(0, -λmin(G_k))` there. All arithmetic
//! after reading the floats is exact.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{SolveError, SolveResult};
use crate::encode::{Clique, VerificationInstance};
use crate::linalg::{is_psd_exact, shifted, to_rational};
use crate::poly::{Coefficient, Monomial, MultilinearPoly, VariableId};

/// An approximate Positivstellensatz certificate for `f >= λ`.
#[derive(Clone, Debug)]
pub struct Certificate<'a> {
    pub objective: &'a MultilinearPoly,
    pub lambda: f64,
    pub multipliers: Vec<(f64, &'a MultilinearPoly)>,
    /// Gram matrices over `(1, x_vars...)`.
    pub grams: Vec<(&'a [VariableId], &'a DMatrix<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigorousBound {
    pub lambda_rig: f64,
    pub lambda: f64,
    /// `Σ |r_α|`, rounded up.
    pub coefficient_residual: f64,
    /// `s_k · max(0, -λmin_lower(G_k))` per block, rounded up.
    pub block_deficits: Vec<f64>,
    pub clamped_multipliers: usize,
}

impl RigorousBound {
    pub fn budget(&self) -> f64 {
        self.lambda - self.lambda_rig
    }
}

/// Largest double not above `q`.
pub fn floor_f64(q: &BigRational) -> f64 {
    let x = q.to_f64();
    if BigRational::from_f64(x) > *q {
        x.next_down()
    } else {
        x
    }
}

fn ceil_f64(q: &BigRational) -> f64 {
    -floor_f64(&-q.clone())
}

/// A verified lower bound on `λmin(G)`: the floating estimate widened until
/// `G - μI ⪰ 0` holds exactly, with a Gershgorin fallback.
pub fn gram_lower_eigenvalue(g: &DMatrix<f64>) -> BigRational {
    let s = g.nrows();
    let exact = to_rational(g);
    let sym = (g + g.transpose()) * 0.5;
    let lmin = SymmetricEigen::new(sym).eigenvalues.min();
    let mut eta = 4.0 * f64::EPSILON * s as f64 * g.norm().max(1.0);
    for _ in 0..40 {
        let mu = BigRational::from_f64(lmin - eta);
        if is_psd_exact(&shifted(&exact, &mu)) {
            return mu;
        }
        eta *= 2.0;
    }
    (0..s)
        .map(|i| {
            let off = (0..s)
                .filter(|&j| j != i)
                .fold(BigRational::zero(), |acc, j| acc + exact[i][j].abs());
            exact[i][i].clone() - off
        })
        .min()
        .unwrap_or_else(BigRational::zero)
}

fn deficit_exact(g: &DMatrix<f64>) -> BigRational {
    let mu = gram_lower_eigenvalue(g);
    if mu.is_negative() {
        BigRational::from_integer((g.nrows() as i64).into()) * -mu
    } else {
        BigRational::zero()
    }
}

/// `s · max(0, -λmin_lower(G))` for a size-`s` Gram block, rounded up.
pub fn block_deficit(g: &DMatrix<f64>) -> f64 {
    ceil_f64(&deficit_exact(g))
}

pub fn certify(cert: &Certificate<'_>) -> Result<RigorousBound, SolveError> {
    if !cert.lambda.is_finite() {
        return Err(SolveError::NonFinite("lambda".into()));
    }
    let mut r: BTreeMap<Monomial, BigRational> = BTreeMap::new();
    let mut add = |m: Monomial, c: BigRational| {
        let e = r.entry(m.reduce()).or_insert_with(BigRational::zero);
        *e += c;
    };
    for (m, &c) in cert.objective.terms() {
        add(m.clone(), BigRational::from_f64(c));
    }
    add(Monomial::one(), -BigRational::from_f64(cert.lambda));
    let mut clamped = 0;
    for (k, &(sigma, g)) in cert.multipliers.iter().enumerate() {
        if !sigma.is_finite() {
            return Err(SolveError::NonFinite(format!("multiplier {k}")));
        }
        if sigma <= 0.0 {
            clamped += usize::from(sigma < 0.0);
            continue;
        }
        let s = BigRational::from_f64(sigma);
        for (m, &c) in g.terms() {
            add(m.clone(), -(s.clone() * BigRational::from_f64(c)));
        }
    }
    let mut deficits = Vec::with_capacity(cert.grams.len());
    let mut total = BigRational::zero();
    for (k, &(vars, g)) in cert.grams.iter().enumerate() {
        let s = vars.len() + 1;
        if g.nrows() != s || g.ncols() != s {
            return Err(SolveError::Mismatch(format!(
                "Gram block {k} is {}x{} for {} variables",
                g.nrows(),
                g.ncols(),
                vars.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite(format!("Gram block {k}")));
        }
        let basis: Vec<Monomial> = std::iter::once(Monomial::one())
            .chain(vars.iter().map(|&v| Monomial::var(v)))
            .collect();
        for i in 0..s {
            for j in 0..s {
                if g[(i, j)] != 0.0 {
                    add(basis[i].mul(&basis[j]), -BigRational::from_f64(g[(i, j)]));
                }
            }
        }
        let d = deficit_exact(g);
        deficits.push(ceil_f64(&d));
        total += d;
    }
    let residual = r.values().fold(BigRational::zero(), |acc, c| acc + c.abs());
    let lambda_rig = BigRational::from_f64(cert.lambda) - residual.clone() - total;
    Ok(RigorousBound {
        lambda_rig: floor_f64(&lambda_rig),
        lambda: cert.lambda,
        coefficient_residual: ceil_f64(&residual),
        block_deficits: deficits,
        clamped_multipliers: clamped,
    })
}

/// Rigorous bound for a solved LP or moment relaxation of `instance`.
/// `cliques` must be the clique list the relaxation was assembled from
/// (empty for LP).
pub fn rigorous_lower_bound(
    result: &SolveResult,
    instance: &VerificationInstance,
    cliques: &[Clique],
) -> Result<RigorousBound, SolveError> {
    let cert = &result.certificate;
    let ineqs = &instance.constraints.inequalities;
    if cert.multipliers.len() != ineqs.len() {
        return Err(SolveError::Mismatch(format!(
            "{} multipliers for {} inequalities",
            cert.multipliers.len(),
            ineqs.len()
        )));
    }
    if cert.grams.len() != cliques.len() {
        return Err(SolveError::Mismatch(format!(
            "{} Gram blocks for {} cliques",
            cert.grams.len(),
            cliques.len()
        )));
    }
    for (g, c) in cert.grams.iter().zip(cliques) {
        if g.variables != c.variables {
            return Err(SolveError::Mismatch(format!(
                "block of clique {} has different variables",
                c.id
            )));
        }
    }
    certify(&Certificate {
        objective: instance.objective(),
        lambda: result.primal_objective,
        multipliers: cert
            .multipliers
            .iter()
            .cloned()
            .zip(ineqs.iter().map(|c| &c.poly))
            .collect(),
        grams: cert
            .grams
            .iter()
            .map(|g| (g.variables.as_slice(), &g.matrix))
            .collect(),
    })
}
