//! Univariate polynomials, in coefficient form and in factored form.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{rational_str, CRat, Field, Scalar};

/// Dense polynomial `a_0 + a_1 t + … + a_d t^d` with no trailing zero coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> Poly<S> {
    pub fn new(mut coeffs: Vec<S>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        Poly::new(vec![c])
    }

    /// `t - r`.
    pub fn linear_root(r: S) -> Self {
        Poly::new(vec![-r, S::one()])
    }

    /// `∏ (t - x_i)`.
    pub fn char_poly(xs: &[S]) -> Self {
        xs.iter().fold(Poly::constant(S::one()), |acc, x| acc.mul(&Poly::linear_root(x.clone())))
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Coefficient of `t^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn leading(&self) -> S {
        self.coeffs.last().cloned().unwrap_or_else(S::zero)
    }

    pub fn eval(&self, t: &S) -> S {
        self.coeffs.iter().rev().fold(S::zero(), |acc, c| acc.mul_ref(t).add_ref(c))
    }

    /// Horner evaluation at an element of any field over the coefficient scalars.
    pub fn eval_field<R: Field<Base = S>>(&self, t: &R) -> R {
        let mut acc = R::int(0);
        for c in self.coeffs.iter().rev() {
            acc = acc * t.clone() + R::constant(c.clone());
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        Poly::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c.mul_ref(&S::from_i64(k as i64))).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        let m = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..m).map(|k| self.coeff(k).add_ref(&o.coeff(k))).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        let m = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..m).map(|k| self.coeff(k).sub_ref(&o.coeff(k))).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![S::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add_ref(&a.mul_ref(b));
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, c: &S) -> Self {
        Poly::new(self.coeffs.iter().map(|a| a.mul_ref(c)).collect())
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Poly::constant(S::one()), |acc, _| acc.mul(self))
    }

    /// Synthetic division by `t - r`: returns `(quotient, remainder)`.
    pub fn div_linear(&self, r: &S) -> (Self, S) {
        if self.coeffs.is_empty() {
            return (Poly::zero(), S::zero());
        }
        let d = self.coeffs.len() - 1;
        let mut q = vec![S::zero(); d];
        let mut carry = S::zero();
        for k in (0..=d).rev() {
            let v = self.coeffs[k].add_ref(&carry.mul_ref(r));
            if k == 0 {
                return (Poly::new(q), v);
            }
            q[k - 1] = v.clone();
            carry = v;
        }
        unreachable!()
    }

    /// Taylor coefficients at `mu`: the coefficients of `P(mu + τ)` in `τ`.
    pub fn taylor_at(&self, mu: &S) -> Vec<S> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        let mut p = self.clone();
        while !p.is_zero() {
            let (q, r) = p.div_linear(mu);
            out.push(r);
            p = q;
        }
        out
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Poly<T> {
        Poly::new(self.coeffs.iter().map(f).collect())
    }
}

impl Poly<CRat> {
    /// Horner evaluation with the exact coefficients lifted into `R`.
    pub fn eval_lifted<R: Field>(&self, t: &R) -> R {
        let mut acc = R::int(0);
        for c in self.coeffs.iter().rev() {
            acc = acc * t.clone() + R::lift(c);
        }
        acc
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("the zero polynomial is not allowed")]
    Zero,
    #[error("root {0} is listed more than once")]
    RepeatedRoot(String),
    #[error("root {0} has multiplicity zero")]
    ZeroMultiplicity(String),
}

/// `c · ∏ (t - r_i)^{k_i}` with exact rational `c ≠ 0` and distinct roots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoredPoly {
    #[serde(with = "rational_str")]
    pub leading: BigRational,
    #[serde(default)]
    pub roots: Vec<(CRat, u32)>,
}

impl FactoredPoly {
    pub fn new(leading: BigRational, roots: Vec<(CRat, u32)>) -> Result<Self, PolyError> {
        let p = FactoredPoly { leading, roots };
        p.check()?;
        Ok(p)
    }

    pub fn constant(c: BigRational) -> Result<Self, PolyError> {
        Self::new(c, Vec::new())
    }

    pub fn check(&self) -> Result<(), PolyError> {
        if self.leading.is_zero() {
            return Err(PolyError::Zero);
        }
        for (i, (r, k)) in self.roots.iter().enumerate() {
            if *k == 0 {
                return Err(PolyError::ZeroMultiplicity(r.to_string()));
            }
            if self.roots[..i].iter().any(|(s, _)| s == r) {
                return Err(PolyError::RepeatedRoot(r.to_string()));
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.roots.iter().map(|(_, k)| *k as usize).sum()
    }

    pub fn leading_crat(&self) -> CRat {
        CRat::real(self.leading.clone())
    }

    /// Multiplicity of `r` as a root (zero if it is not a root).
    pub fn multiplicity(&self, r: &CRat) -> u32 {
        self.roots.iter().find(|(s, _)| s == r).map_or(0, |(_, k)| *k)
    }

    pub fn expand(&self) -> Poly<CRat> {
        let mut p = Poly::constant(self.leading_crat());
        for (r, k) in &self.roots {
            p = p.mul(&Poly::linear_root(r.clone()).pow(*k));
        }
        p
    }

    /// Product over the roots other than `skip` (leading coefficient one).
    pub fn cofactor(&self, skip: usize) -> Poly<CRat> {
        let mut p = Poly::constant(CRat::int(1));
        for (i, (r, k)) in self.roots.iter().enumerate() {
            if i != skip {
                p = p.mul(&Poly::linear_root(r.clone()).pow(*k));
            }
        }
        p
    }

    /// Roots in ascending order; used to compare polynomials structurally.
    pub fn normalized(&self) -> Self {
        let mut roots = self.roots.clone();
        roots.sort();
        FactoredPoly { leading: self.leading.clone(), roots }
    }

    pub fn is_one(&self) -> bool {
        self.roots.is_empty() && self.leading.is_one()
    }
}

impl std::fmt::Display for FactoredPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", crate::scalar::fmt_rational(&self.leading))?;
        for (r, k) in &self.roots {
            if *k == 1 {
                write!(f, "(t - {r})")?;
            } else {
                write!(f, "(t - {r})^{k}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn p(cs: &[i64]) -> Poly<CRat> {
        Poly::new(cs.iter().map(|&c| CRat::int(c)).collect())
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        assert_eq!(p(&[1, 2, 0, 0]).degree(), Some(1));
        assert_eq!(p(&[0, 0]).degree(), None);
    }

    #[test]
    fn horner_and_derivative() {
        let q = p(&[1, -3, 0, 2]);
        assert_eq!(q.eval(&CRat::int(2)), CRat::int(11));
        assert_eq!(q.derivative(), p(&[-3, 0, 6]));
    }

    #[test]
    fn synthetic_division() {
        let q = p(&[-6, 11, -6, 1]);
        let (quot, rem) = q.div_linear(&CRat::int(1));
        assert_eq!(rem, CRat::int(0));
        assert_eq!(quot, p(&[6, -5, 1]));
        assert_eq!(q.taylor_at(&CRat::int(2)), vec![CRat::int(0), CRat::int(-1), CRat::int(0), CRat::int(1)]);
    }

    #[test]
    fn factored_expand() {
        let f = FactoredPoly::new(rat(-4, 1), vec![(CRat::int(1), 1), (CRat::int(2), 2)]).unwrap();
        assert_eq!(f.expand(), p(&[16, -32, 20, -4]));
        assert_eq!(f.degree(), 3);
        assert_eq!(f.multiplicity(&CRat::int(2)), 2);
    }

    #[test]
    fn factored_rejects_bad_input() {
        assert_eq!(FactoredPoly::constant(rat(0, 1)), Err(PolyError::Zero));
        assert!(FactoredPoly::new(rat(1, 1), vec![(CRat::int(1), 1), (CRat::int(1), 2)]).is_err());
        assert!(FactoredPoly::new(rat(1, 1), vec![(CRat::int(1), 0)]).is_err());
    }

    #[test]
    fn factored_json() {
        let s = r#"{"leading":"-4","roots":[["1",1],[{"re":"1","im":"2"},2]]}"#;
        let f: FactoredPoly = serde_json::from_str(s).unwrap();
        assert_eq!(f.degree(), 3);
        assert_eq!(f.roots[1].0, CRat::new(rat(1, 1), rat(2, 1)));
    }
}
