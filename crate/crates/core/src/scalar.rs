//! Scalar types: exact complex rationals and complex doubles.
//!
//! Both implement [`Scalar`]; arithmetic never mixes the two. Square roots and
//! logarithms exist only on the floating tag (principal branch).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

/// Which scalar tag a computation runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Exact,
    Float,
}

impl FromStr for Tag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Tag::Exact),
            "float" => Ok(Tag::Float),
            other => Err(format!("unknown tag `{other}` (expected exact|float)")),
        }
    }
}

/// Common interface of the two scalar tags.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Field<Base = Self>
{
    const TAG: Tag;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_exact(c: &CRat) -> Self;
    fn is_zero(&self) -> bool;
    fn to_c64(&self) -> Complex64;

    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }
    fn add_ref(&self, o: &Self) -> Self {
        self.clone() + o.clone()
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self.clone() - o.clone()
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self.clone() * o.clone()
    }
}

/// Principal-branch square root and logarithm (floating tag only).
pub trait Transcendental: Sized {
    fn sqrt(&self) -> Self;
    fn ln(&self) -> Self;
}

/// Exact complex rational `re + i·im`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct CRat {
    pub re: BigRational,
    pub im: BigRational,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let t = s.trim();
    if t.is_empty() {
        return Err("empty rational".into());
    }
    let r = BigRational::from_str(t).map_err(|_| format!("malformed rational `{s}`"))?;
    Ok(r)
}

pub fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl CRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        CRat { re, im }
    }
    pub fn real(re: BigRational) -> Self {
        CRat { re, im: BigRational::zero() }
    }
    pub fn int(v: i64) -> Self {
        Self::real(BigRational::from_integer(BigInt::from(v)))
    }
    pub fn frac(n: i64, d: i64) -> Self {
        Self::real(rat(n, d))
    }
    pub fn i() -> Self {
        CRat { re: BigRational::zero(), im: BigRational::one() }
    }
    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }
    pub fn conj(&self) -> Self {
        CRat { re: self.re.clone(), im: -self.im.clone() }
    }
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }
    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        if self.im.is_zero() {
            return Some(CRat::real(self.re.recip()));
        }
        let d = self.norm_sqr();
        Some(CRat { re: &self.re / &d, im: -(&self.im / &d) })
    }
    pub fn pow(&self, e: u32) -> Self {
        let mut acc = CRat::int(1);
        for _ in 0..e {
            acc = acc.mul_ref(self);
        }
        acc
    }
    /// Integer power allowing negative exponents; `None` when inverting zero.
    pub fn powi(&self, e: i64) -> Option<Self> {
        if e >= 0 {
            Some(self.pow(e as u32))
        } else {
            self.recip().map(|r| r.pow((-e) as u32))
        }
    }
    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(CRat::real(parse_rational(s)?))
    }
}

impl Ord for CRat {
    fn cmp(&self, other: &Self) -> Ordering {
        self.re.cmp(&other.re).then_with(|| self.im.cmp(&other.im))
    }
}

impl PartialOrd for CRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", fmt_rational(&self.re));
        }
        let im = if self.im.abs().is_one() {
            if self.im.is_negative() {
                "-".to_string()
            } else {
                String::new()
            }
        } else {
            fmt_rational(&self.im)
        };
        if self.re.is_zero() {
            write!(f, "{im}i")
        } else if self.im.is_negative() {
            write!(f, "{}{im}i", fmt_rational(&self.re))
        } else {
            write!(f, "{}+{im}i", fmt_rational(&self.re))
        }
    }
}

impl fmt::Debug for CRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for CRat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.im.is_zero() {
            s.serialize_str(&fmt_rational(&self.re))
        } else {
            let mut m = s.serialize_map(Some(2))?;
            m.serialize_entry("re", &fmt_rational(&self.re))?;
            m.serialize_entry("im", &fmt_rational(&self.im))?;
            m.end()
        }
    }
}

impl<'de> Deserialize<'de> for CRat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
            Pair { re: String, im: String },
        }
        match Repr::deserialize(d)? {
            Repr::Text(t) => CRat::parse(&t).map_err(de::Error::custom),
            Repr::Int(v) => Ok(CRat::int(v)),
            Repr::Pair { re, im } => Ok(CRat::new(
                parse_rational(&re).map_err(de::Error::custom)?,
                parse_rational(&im).map_err(de::Error::custom)?,
            )),
        }
    }
}

/// Serde adapter writing a rational as a `"p/q"` string.
pub mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(t) => parse_rational(&t).map_err(de::Error::custom),
            Repr::Int(v) => Ok(BigRational::from_integer(BigInt::from(v))),
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr for CRat {
            type Output = CRat;
            fn $m(self, o: CRat) -> CRat {
                let f: fn(&CRat, &CRat) -> CRat = $body;
                f(&self, &o)
            }
        }
        impl<'a> $tr<&'a CRat> for &'a CRat {
            type Output = CRat;
            fn $m(self, o: &'a CRat) -> CRat {
                let f: fn(&CRat, &CRat) -> CRat = $body;
                f(self, o)
            }
        }
    };
}

fn crat_mul(a: &CRat, b: &CRat) -> CRat {
    if a.im.is_zero() && b.im.is_zero() {
        return CRat::real(&a.re * &b.re);
    }
    CRat { re: &a.re * &b.re - &a.im * &b.im, im: &a.re * &b.im + &a.im * &b.re }
}

forward_binop!(Add, add, |a, b| CRat { re: &a.re + &b.re, im: &a.im + &b.im });
forward_binop!(Sub, sub, |a, b| CRat { re: &a.re - &b.re, im: &a.im - &b.im });
forward_binop!(Mul, mul, crat_mul);
forward_binop!(Div, div, |a, b| { crat_mul(a, &b.recip().expect("division of exact scalar by zero")) });

impl Neg for CRat {
    type Output = CRat;
    fn neg(self) -> CRat {
        CRat { re: -self.re, im: -self.im }
    }
}

impl Scalar for CRat {
    const TAG: Tag = Tag::Exact;
    fn zero() -> Self {
        CRat::default()
    }
    fn one() -> Self {
        CRat::int(1)
    }
    fn from_i64(v: i64) -> Self {
        CRat::int(v)
    }
    fn from_exact(c: &CRat) -> Self {
        c.clone()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        crat_mul(self, o)
    }
}

impl Scalar for Complex64 {
    const TAG: Tag = Tag::Float;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn from_exact(c: &CRat) -> Self {
        c.to_c64()
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
}

impl Transcendental for Complex64 {
    fn sqrt(&self) -> Self {
        Complex64::sqrt(*self)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
}

/// Arithmetic shared by scalars and jets, so one formula serves values and
/// derivatives alike.
pub trait Field:
    Clone + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    type Base: Scalar;
    fn constant(c: Self::Base) -> Self;
    fn value(&self) -> &Self::Base;
    /// `None` when the value is zero.
    fn recip(&self) -> Option<Self>;
    fn scale(&self, c: &Self::Base) -> Self;

    fn checked_div(&self, o: &Self) -> Option<Self> {
        o.recip().map(|r| self.clone() * r)
    }
    fn lift(c: &CRat) -> Self {
        Self::constant(Self::Base::from_exact(c))
    }
    fn int(v: i64) -> Self {
        Self::constant(Self::Base::from_i64(v))
    }
}

impl Field for CRat {
    type Base = CRat;
    fn constant(c: CRat) -> Self {
        c
    }
    fn value(&self) -> &CRat {
        self
    }
    fn recip(&self) -> Option<Self> {
        CRat::recip(self)
    }
    fn scale(&self, c: &CRat) -> Self {
        self.mul_ref(c)
    }
}

impl Field for Complex64 {
    type Base = Complex64;
    fn constant(c: Complex64) -> Self {
        c
    }
    fn value(&self) -> &Complex64 {
        self
    }
    fn recip(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            None
        } else {
            Some(Complex64::new(1.0, 0.0) / self)
        }
    }
    fn scale(&self, c: &Complex64) -> Self {
        self * c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_complex_arithmetic() {
        let a = CRat::new(rat(1, 2), rat(1, 1));
        let b = CRat::new(rat(-3, 1), rat(2, 3));
        let q = a.clone() / b.clone();
        assert_eq!(q * b, a);
        assert_eq!(CRat::i() * CRat::i(), CRat::int(-1));
    }

    #[test]
    fn display_and_parse() {
        assert_eq!(CRat::frac(-3, 6).to_string(), "-1/2");
        assert_eq!(CRat::new(rat(1, 1), rat(-1, 1)).to_string(), "1-i");
        assert_eq!(CRat::parse("7/14").unwrap(), CRat::frac(1, 2));
        assert!(CRat::parse("x").is_err());
    }

    #[test]
    fn json_round_trip() {
        let z = CRat::new(rat(2, 3), rat(-5, 7));
        let s = serde_json::to_string(&z).unwrap();
        let back: CRat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
        let r: CRat = serde_json::from_str("\"-4\"").unwrap();
        assert_eq!(r, CRat::int(-4));
    }

    #[test]
    fn zero_has_no_inverse() {
        assert!(CRat::int(0).recip().is_none());
        assert!(Field::recip(&Complex64::new(0.0, 0.0)).is_none());
    }
}
