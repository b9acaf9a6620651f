//! Second-order jets in `n` directions and truncated power series in one
//! variable.
//!
//! A jet with an empty gradient is a constant; mixing constants with seeded
//! jets never allocates derivative storage for the constant side.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::{Field, Scalar, Transcendental};

/// Value, gradient and dense symmetric Hessian (row-major `n × n`).
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<S> {
    pub value: S,
    pub grad: Vec<S>,
    pub hess: Vec<S>,
}

impl<S: Scalar> Jet2<S> {
    pub fn constant(value: S) -> Self {
        Jet2 { value, grad: Vec::new(), hess: Vec::new() }
    }

    /// The coordinate function `x^i` at value `v` among `n` variables.
    pub fn variable(value: S, i: usize, n: usize) -> Self {
        let mut grad = vec![S::zero(); n];
        grad[i] = S::one();
        Jet2 { value, grad, hess: vec![S::zero(); n * n] }
    }

    /// Seed every coordinate of `point` as an independent variable.
    pub fn seed(point: &[S]) -> Vec<Self> {
        let n = point.len();
        point.iter().enumerate().map(|(i, v)| Self::variable(v.clone(), i, n)).collect()
    }

    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    pub fn d(&self, i: usize) -> S {
        self.grad.get(i).cloned().unwrap_or_else(S::zero)
    }

    pub fn dd(&self, i: usize, j: usize) -> S {
        let n = self.grad.len();
        if n == 0 {
            S::zero()
        } else {
            self.hess[i * n + j].clone()
        }
    }

    /// Compose with a univariate function given `f(u), f'(u), f''(u)` at the value.
    pub fn compose(&self, f0: S, f1: S, f2: S) -> Self {
        let n = self.grad.len();
        if n == 0 {
            return Jet2::constant(f0);
        }
        let grad: Vec<S> = self.grad.iter().map(|g| f1.mul_ref(g)).collect();
        let mut hess = vec![S::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = f1.mul_ref(&self.hess[i * n + j]).add_ref(&f2.mul_ref(&self.grad[i]).mul_ref(&self.grad[j]));
                hess[j * n + i] = v.clone();
                hess[i * n + j] = v;
            }
        }
        Jet2 { value: f0, grad, hess }
    }

    fn zip(&self, o: &Self, f: impl Fn(&S, &S) -> S) -> Self {
        let value = f(&self.value, &o.value);
        let (grad, hess) = match (self.grad.is_empty(), o.grad.is_empty()) {
            (true, true) => (Vec::new(), Vec::new()),
            (false, true) => {
                let z = S::zero();
                (self.grad.iter().map(|a| f(a, &z)).collect(), self.hess.iter().map(|a| f(a, &z)).collect())
            }
            (true, false) => {
                let z = S::zero();
                (o.grad.iter().map(|b| f(&z, b)).collect(), o.hess.iter().map(|b| f(&z, b)).collect())
            }
            (false, false) => (
                self.grad.iter().zip(&o.grad).map(|(a, b)| f(a, b)).collect(),
                self.hess.iter().zip(&o.hess).map(|(a, b)| f(a, b)).collect(),
            ),
        };
        Jet2 { value, grad, hess }
    }

    pub fn mul_jet(&self, o: &Self) -> Self {
        if o.grad.is_empty() {
            return self.scale_by(&o.value);
        }
        if self.grad.is_empty() {
            return o.scale_by(&self.value);
        }
        let n = self.grad.len();
        let (a, b) = (&self.value, &o.value);
        let grad = (0..n).map(|i| self.grad[i].mul_ref(b).add_ref(&a.mul_ref(&o.grad[i]))).collect();
        let mut hess = vec![S::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.hess[i * n + j]
                    .mul_ref(b)
                    .add_ref(&a.mul_ref(&o.hess[i * n + j]))
                    .add_ref(&self.grad[i].mul_ref(&o.grad[j]))
                    .add_ref(&self.grad[j].mul_ref(&o.grad[i]));
                hess[j * n + i] = v.clone();
                hess[i * n + j] = v;
            }
        }
        Jet2 { value: a.mul_ref(b), grad, hess }
    }

    pub fn scale_by(&self, c: &S) -> Self {
        Jet2 {
            value: self.value.mul_ref(c),
            grad: self.grad.iter().map(|g| g.mul_ref(c)).collect(),
            hess: self.hess.iter().map(|h| h.mul_ref(c)).collect(),
        }
    }

    /// Reciprocal; `None` at a zero value (singular point).
    pub fn recip_jet(&self) -> Option<Self> {
        if self.value.is_zero() {
            return None;
        }
        let r = S::one() / self.value.clone();
        let r2 = r.mul_ref(&r);
        let r3 = r2.mul_ref(&r);
        Some(self.compose(r, -r2, S::from_i64(2) * r3))
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.zip(&o, |a, b| a.add_ref(b))
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.zip(&o, |a, b| a.sub_ref(b))
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.mul_jet(&o)
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet2 {
            value: -self.value,
            grad: self.grad.into_iter().map(|g| -g).collect(),
            hess: self.hess.into_iter().map(|h| -h).collect(),
        }
    }
}

impl<S: Scalar> Field for Jet2<S> {
    type Base = S;
    fn constant(c: S) -> Self {
        Jet2::constant(c)
    }
    fn value(&self) -> &S {
        &self.value
    }
    fn recip(&self) -> Option<Self> {
        self.recip_jet()
    }
    fn scale(&self, c: &S) -> Self {
        self.scale_by(c)
    }
}

impl<S: Scalar + Transcendental> Transcendental for Jet2<S> {
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        let half = S::one() / S::from_i64(2);
        let d1 = half.clone() / s.clone();
        let d2 = -(half.clone() * d1.clone() / self.value.clone());
        self.compose(s, d1, d2)
    }

    fn ln(&self) -> Self {
        let r = S::one() / self.value.clone();
        let r2 = r.mul_ref(&r);
        self.compose(self.value.ln(), r, -r2)
    }
}

/// Truncated power series `c_0 + c_1 τ + … + c_{m} τ^m` with coefficients in a field.
#[derive(Clone, Debug)]
pub struct Series<R> {
    pub coeffs: Vec<R>,
}

impl<R: Field> Series<R> {
    /// `a + b τ` truncated at order `order`.
    pub fn linear(a: R, b: R, order: usize) -> Self {
        let mut coeffs = vec![R::int(0); order + 1];
        coeffs[0] = a;
        if order >= 1 {
            coeffs[1] = b;
        }
        Series { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn mul(&self, o: &Self) -> Self {
        let m = self.order().min(o.order());
        let coeffs = (0..=m)
            .map(|k| {
                let mut acc = self.coeffs[0].clone() * o.coeffs[k].clone();
                for j in 1..=k {
                    acc = acc + self.coeffs[j].clone() * o.coeffs[k - j].clone();
                }
                acc
            })
            .collect();
        Series { coeffs }
    }

    pub fn scale(&self, c: &R) -> Self {
        Series { coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect() }
    }
}

impl<R: Field + Transcendental> Series<R> {
    /// Square root with principal branch at the constant term; `None` when the
    /// constant term vanishes.
    pub fn sqrt(&self) -> Option<Self> {
        let c0 = &self.coeffs[0];
        if c0.value().is_zero() {
            return None;
        }
        let s0 = c0.sqrt();
        let two_s0_inv = (s0.clone() * R::int(2)).recip()?;
        let mut out: Vec<R> = vec![s0];
        for k in 1..=self.order() {
            let mut acc = self.coeffs[k].clone();
            for j in 1..k {
                acc = acc - out[j].clone() * out[k - j].clone();
            }
            out.push(acc * two_s0_inv.clone());
        }
        Some(Series { coeffs: out })
    }
}
