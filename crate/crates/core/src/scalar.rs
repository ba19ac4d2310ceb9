//! Number types: exact rationals or binary floats, complex values over them, and a tagged
//! first-order extension used to evaluate removable singularities.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;
pub type Cx<R> = Complex<R>;

/// Real field used for frequencies, divisors and counterterms.
pub trait Real: Clone + Debug + PartialEq + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static {
    /// True when arithmetic performs no rounding.
    const EXACT: bool;
    /// Exact conversion for rationals (binary expansion of the float).
    fn from_f64(x: f64) -> Self;
    fn from_ratio(n: i64, d: i64) -> Self;
    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }
    fn to_f64(&self) -> f64;
    fn abs_val(&self) -> Self;
    fn mode_name() -> &'static str {
        if Self::EXACT {
            "rational"
        } else {
            "float"
        }
    }
}

impl Real for f64 {
    const EXACT: bool = false;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Real for BigRational {
    const EXACT: bool = true;
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
}

/// Parses `p/q`, an integer, or a decimal literal into a rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Some(BigRational::from_integer(n));
    }
    let (int, frac) = s.split_once('.')?;
    let neg = int.trim_start().starts_with('-');
    let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(num, den);
    Some(if neg { -r } else { r })
}

pub fn cx<R: Real>(re: R, im: R) -> Cx<R> {
    Complex::new(re, im)
}

pub fn cx_real<R: Real>(re: R) -> Cx<R> {
    Complex::new(re, R::zero())
}

pub fn to_c64<R: Real>(z: &Cx<R>) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

pub fn modulus_f64<R: Real>(z: &Cx<R>) -> f64 {
    to_c64(z).norm()
}

/// `|z|^2` in the field itself.
pub fn norm_sqr<R: Real>(z: &Cx<R>) -> R {
    z.re.clone() * z.re.clone() + z.im.clone() * z.im.clone()
}

/// `z` for `Sign::Plus`, its conjugate otherwise.
pub fn signed_value<R: Real>(z: &Cx<R>, sign: crate::momentum::Sign) -> Cx<R> {
    match sign {
        crate::momentum::Sign::Plus => z.clone(),
        crate::momentum::Sign::Minus => z.conj(),
    }
}

/// Ring of series coefficients handled by the order-by-order engine.
pub trait Coeff<R: Real>: Clone + Debug + PartialEq + Send + Sync + 'static {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn from_complex(z: Cx<R>) -> Self;
    fn add_assign_ref(&mut self, o: &Self);
    fn sub_ref(&self, o: &Self) -> Self;
    fn mul_ref(&self, o: &Self) -> Self;
    fn conj(&self) -> Self;
    fn scale(&self, r: &R) -> Self;
    fn div_real(&self, r: &R) -> Self;
    /// Modulus of the finite part, as a float.
    fn magnitude(&self) -> f64;
}

impl<R: Real> Coeff<R> for Cx<R> {
    fn zero() -> Self {
        Complex::new(R::zero(), R::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn from_complex(z: Cx<R>) -> Self {
        z
    }
    fn add_assign_ref(&mut self, o: &Self) {
        self.re = self.re.clone() + o.re.clone();
        self.im = self.im.clone() + o.im.clone();
    }
    fn sub_ref(&self, o: &Self) -> Self {
        Complex::new(self.re.clone() - o.re.clone(), self.im.clone() - o.im.clone())
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn scale(&self, r: &R) -> Self {
        Complex::new(self.re.clone() * r.clone(), self.im.clone() * r.clone())
    }
    fn div_real(&self, r: &R) -> Self {
        Complex::new(self.re.clone() / r.clone(), self.im.clone() / r.clone())
    }
    fn magnitude(&self) -> f64 {
        modulus_f64(self)
    }
}

/// `base + d * delta + dbar * conj(delta)` with every product of two infinitesimals dropped.
///
/// Conjugation swaps the two infinitesimal parts, so the ring stays closed under the
/// sign-flip of the quintic nonlinearity.
#[derive(Clone, Debug, PartialEq)]
pub struct Tagged<R: Real> {
    pub base: Cx<R>,
    pub d: Cx<R>,
    pub dbar: Cx<R>,
}

impl<R: Real> Tagged<R> {
    pub fn constant(base: Cx<R>) -> Self {
        Tagged { base, d: Coeff::<R>::zero(), dbar: Coeff::<R>::zero() }
    }

    /// The bare infinitesimal `delta`.
    pub fn delta() -> Self {
        Tagged { base: Coeff::<R>::zero(), d: cx_real(R::one()), dbar: Coeff::<R>::zero() }
    }
}

impl<R: Real> Coeff<R> for Tagged<R> {
    fn zero() -> Self {
        Tagged::constant(Coeff::<R>::zero())
    }
    fn is_zero(&self) -> bool {
        Coeff::<R>::is_zero(&self.base) && Coeff::<R>::is_zero(&self.d) && Coeff::<R>::is_zero(&self.dbar)
    }
    fn from_complex(z: Cx<R>) -> Self {
        Tagged::constant(z)
    }
    fn add_assign_ref(&mut self, o: &Self) {
        self.base.add_assign_ref(&o.base);
        self.d.add_assign_ref(&o.d);
        self.dbar.add_assign_ref(&o.dbar);
    }
    fn sub_ref(&self, o: &Self) -> Self {
        Tagged { base: self.base.sub_ref(&o.base), d: self.d.sub_ref(&o.d), dbar: self.dbar.sub_ref(&o.dbar) }
    }
    fn mul_ref(&self, o: &Self) -> Self {
        let mut d = self.base.mul_ref(&o.d);
        d.add_assign_ref(&self.d.mul_ref(&o.base));
        let mut dbar = self.base.mul_ref(&o.dbar);
        dbar.add_assign_ref(&self.dbar.mul_ref(&o.base));
        Tagged { base: self.base.mul_ref(&o.base), d, dbar }
    }
    fn conj(&self) -> Self {
        Tagged { base: Complex::conj(&self.base), d: Complex::conj(&self.dbar), dbar: Complex::conj(&self.d) }
    }
    fn scale(&self, r: &R) -> Self {
        Tagged { base: Coeff::<R>::scale(&self.base, r), d: Coeff::<R>::scale(&self.d, r), dbar: Coeff::<R>::scale(&self.dbar, r) }
    }
    fn div_real(&self, r: &R) -> Self {
        Tagged { base: self.base.div_real(r), d: self.d.div_real(r), dbar: self.dbar.div_real(r) }
    }
    fn magnitude(&self) -> f64 {
        self.base.magnitude()
    }
}

/// Sums of float values with Neumaier compensation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact unit complex number `((1 - t^2) + 2 i t) / (1 + t^2)`.
pub fn rational_rotation<R: Real>(t: &R) -> Cx<R> {
    let t2 = t.clone() * t.clone();
    let den = R::one() + t2.clone();
    let two = R::from_int(2);
    Complex::new((R::one() - t2) / den.clone(), two * t.clone() / den)
}

pub fn is_one<R: Real>(x: &R) -> bool {
    x.is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    use num_traits::One;

    type Q = BigRational;

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/4").unwrap(), Q::from_ratio(3, 4));
        assert_eq!(parse_rational("-0.25").unwrap(), Q::from_ratio(-1, 4));
        assert_eq!(parse_rational("7").unwrap(), Q::from_int(7));
        assert!(parse_rational("1/0").is_none());
    }

    #[test]
    fn tagged_ring_rules() {
        let a = Tagged::<Q> { base: cx(Q::from_int(2), Q::from_int(1)), d: cx_real(Q::from_int(3)), dbar: cx_real(Q::zero()) };
        let dl = Tagged::<Q>::delta();
        let p = a.mul_ref(&dl);
        assert_eq!(p.d, a.base);
        assert!(Coeff::<Q>::is_zero(&p.base));
        let sq = dl.mul_ref(&dl);
        assert!(Coeff::<Q>::is_zero(&sq));
        let c = dl.conj();
        assert!(Coeff::<Q>::is_zero(&c.d));
        assert_eq!(c.dbar, cx_real(Q::one()));
        assert!(Coeff::<Q>::is_zero(&dl.mul_ref(&dl.conj())));
    }

    #[test]
    fn rotation_has_unit_modulus() {
        let z = rational_rotation(&Q::from_ratio(2, 7));
        assert_eq!(norm_sqr(&z), Q::one());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }
}
