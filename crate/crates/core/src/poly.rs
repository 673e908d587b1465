//! Polynomials over network variables with the `x^2 = 1` rule for hidden
//! (binary) variables.
//!
//! Coefficients are generic: `f64` when building encodings, [`BigRational`]
//! when checking identities exactly.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("unassigned variable {0}")]
    Unassigned(VariableId),
}

/// Network variable `x_{layer, index}`; `layer = 0` is the (continuous) input,
/// deeper layers are binary. `index` is 0-based, rendered 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct VariableId {
    pub layer: usize,
    pub index: usize,
}

impl VariableId {
    pub const fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }

    pub fn is_binary(self) -> bool {
        self.layer > 0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x[{},{}]", self.layer, self.index + 1)
    }
}

/// Product of variables with positive exponents, sorted by variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(VariableId, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn var(v: VariableId) -> Self {
        Self(vec![(v, 1)])
    }

    pub fn from_powers(powers: impl IntoIterator<Item = (VariableId, u32)>) -> Self {
        let mut acc: BTreeMap<VariableId, u32> = BTreeMap::new();
        for (v, e) in powers {
            if e > 0 {
                *acc.entry(v).or_default() += e;
            }
        }
        Self(acc.into_iter().collect())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn powers(&self) -> &[(VariableId, u32)] {
        &self.0
    }

    pub fn variables(&self) -> impl Iterator<Item = VariableId> + '_ {
        self.0.iter().map(|&(v, _)| v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Binary variables keep exponent parity; inputs are untouched.
    pub fn reduce(&self) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|&(v, e)| match (v.is_binary(), e % 2) {
                    (false, _) => Some((v, e)),
                    (true, 1) => Some((v, 1)),
                    (true, _) => None,
                })
                .collect(),
        )
    }

    pub fn eval<C: Coefficient>(
        &self,
        value: impl Fn(VariableId) -> Option<C>,
    ) -> Result<C, PolyError> {
        let mut acc = C::one();
        for &(v, e) in &self.0 {
            let x = value(v).ok_or(PolyError::Unassigned(v))?;
            for _ in 0..e {
                acc = acc * x.clone();
            }
        }
        Ok(acc)
    }
}

/// Graded order: total degree first, then lexicographic on `(variable, exponent)`.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, &(v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            write!(f, "{v}")?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

pub trait Coefficient:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// Exact for rationals (every finite double is a dyadic rational).
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Coefficient for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coefficient for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite coefficient")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sparse polynomial in canonical form: no zero coefficients, monomials in graded order.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilinearPoly<C = f64> {
    terms: BTreeMap<Monomial, C>,
}

pub type RationalPoly = MultilinearPoly<BigRational>;

impl<C: Coefficient> Default for MultilinearPoly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> MultilinearPoly<C> {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: C) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(v: VariableId) -> Self {
        Self::term(Monomial::var(v), C::one())
    }

    pub fn term(m: Monomial, c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// `sum_k w_k x_{layer,k} + b`.
    pub fn affine(layer: usize, weights: &[C], bias: C) -> Self {
        let mut p = Self::constant(bias);
        for (k, w) in weights.iter().enumerate() {
            p.add_term(Monomial::var(VariableId::new(layer, k)), w.clone());
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn constant_term(&self) -> C {
        self.coefficient(&Monomial::one())
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> Vec<VariableId> {
        let mut vs: Vec<VariableId> = self.terms.keys().flat_map(|m| m.variables()).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero();
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a.clone() * c.clone());
        }
        out
    }

    pub fn mul_poly(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, a) in &self.terms {
            for (m2, b) in &other.terms {
                out.add_term(m1.mul(m2), a.clone() * b.clone());
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(C::one());
        for _ in 0..e {
            out = out.mul_poly(self);
        }
        out
    }

    pub fn reduce_binary_squares(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.reduce(), c.clone());
        }
        out
    }

    /// Product followed by reduction.
    pub fn mul_reduced(&self, other: &Self) -> Self {
        self.mul_poly(other).reduce_binary_squares()
    }

    pub fn eval_with(&self, value: impl Fn(VariableId) -> Option<C>) -> Result<C, PolyError> {
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            acc = acc + c.clone() * m.eval(&value)?;
        }
        Ok(acc)
    }

    pub fn eval(&self, assignment: &BTreeMap<VariableId, C>) -> Result<C, PolyError> {
        self.eval_with(|v| assignment.get(&v).cloned())
    }

    /// True iff the reduced polynomial has no terms.
    pub fn identity_zero(&self) -> bool {
        self.reduce_binary_squares().is_zero()
    }

    pub fn map_coefficients<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> MultilinearPoly<D> {
        let mut out = MultilinearPoly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn to_f64(&self) -> MultilinearPoly<f64> {
        self.map_coefficients(|c| c.to_f64())
    }

    pub fn to_rational(&self) -> RationalPoly {
        self.map_coefficients(|c| BigRational::from_f64(c.to_f64()))
    }
}

impl<C: Coefficient> Add for MultilinearPoly<C> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl<C: Coefficient> Add for &MultilinearPoly<C> {
    type Output = MultilinearPoly<C>;
    fn add(self, rhs: Self) -> MultilinearPoly<C> {
        self.clone() + rhs.clone()
    }
}

impl<C: Coefficient> Neg for MultilinearPoly<C> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(&-C::one())
    }
}

impl<C: Coefficient> Sub for MultilinearPoly<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<C: Coefficient> Sub for &MultilinearPoly<C> {
    type Output = MultilinearPoly<C>;
    fn sub(self, rhs: Self) -> MultilinearPoly<C> {
        self.clone() - rhs.clone()
    }
}

impl<C: Coefficient> Mul for MultilinearPoly<C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.mul_poly(&rhs)
    }
}

impl<C: Coefficient> Mul for &MultilinearPoly<C> {
    type Output = MultilinearPoly<C>;
    fn mul(self, rhs: Self) -> MultilinearPoly<C> {
        self.mul_poly(rhs)
    }
}

impl<C: Coefficient> fmt::Display for MultilinearPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest degree first reads naturally
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let s = c.to_string();
            let (neg, mag) = match s.strip_prefix('-') {
                Some(rest) => (true, rest.to_string()),
                None => (false, s),
            };
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if m.is_one() {
                write!(f, "{mag}")?;
            } else if mag == "1" {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

/// Sum of absolute coefficient values.
pub fn l1_norm(p: &RationalPoly) -> BigRational {
    p.terms()
        .fold(BigRational::zero(), |acc, (_, c)| acc + c.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(layer: usize, index: usize) -> RationalPoly {
        RationalPoly::var(VariableId::new(layer, index))
    }

    fn c(v: i64) -> RationalPoly {
        RationalPoly::constant(rational(v, 1))
    }

    #[test]
    fn binary_difference_of_squares_vanishes() {
        let p = (x(1, 0) + c(1)) * (x(1, 0) - c(1));
        assert!(!p.is_zero());
        assert!(p.reduce_binary_squares().is_zero());
    }

    #[test]
    fn p_minus_p_is_zero() {
        let p = x(0, 1) * x(2, 0) + c(3);
        assert!((p.clone() + p.scale(&rational(-1, 1))).is_zero());
    }

    #[test]
    fn square_of_shifted_binary() {
        let p = (x(1, 0) + c(1)).pow(2).reduce_binary_squares();
        assert_eq!(p, x(1, 0).scale(&rational(2, 1)) + c(2));
    }

    #[test]
    fn reduction_rules() {
        assert!((x(1, 0).pow(2) - c(1)).reduce_binary_squares().is_zero());
        let input_sq = x(0, 0).pow(2);
        assert_eq!(input_sq.reduce_binary_squares(), input_sq);
        let p = x(1, 0).pow(3) * x(2, 0).pow(2);
        assert_eq!(p.reduce_binary_squares(), x(1, 0));
    }

    #[test]
    fn evaluation() {
        let p = x(0, 0) * x(1, 0);
        let mut a = BTreeMap::new();
        a.insert(VariableId::new(0, 0), rational(1, 2));
        a.insert(VariableId::new(1, 0), rational(-1, 1));
        assert_eq!(p.eval(&a).unwrap(), rational(-1, 2));
        assert_eq!(
            RationalPoly::zero().eval(&BTreeMap::new()).unwrap(),
            rational(0, 1)
        );
        assert_eq!(
            x(3, 2).eval(&a),
            Err(PolyError::Unassigned(VariableId::new(3, 2)))
        );
    }

    #[test]
    fn identity_zero_rejects_variable() {
        assert!(!x(1, 0).identity_zero());
        assert!(RationalPoly::zero().identity_zero());
    }

    #[test]
    fn graded_order_and_display() {
        let p: MultilinearPoly = MultilinearPoly::var(VariableId::new(2, 1)).scale(&-2.0)
            + MultilinearPoly::constant(1.0);
        assert_eq!(p.to_string(), "-2*x[2,2] + 1");
        let m1 = Monomial::var(VariableId::new(2, 0));
        let m2 = Monomial::from_powers([(VariableId::new(0, 0), 1), (VariableId::new(0, 1), 1)]);
        assert!(m1 < m2);
        assert!(Monomial::one() < m1);
    }

    #[test]
    fn exact_float_conversion() {
        let q = BigRational::from_f64(0.1);
        assert_ne!(q, rational(1, 10));
        assert_eq!(Coefficient::to_f64(&q), 0.1);
    }
}
