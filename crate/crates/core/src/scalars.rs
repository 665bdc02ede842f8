//! Scalar rings: exact rationals, residue rings Z/m, prime fields and a
//! tolerance-based complex float backend.
//!
//! Every tensor in this crate is built over one of these rings. The exact
//! rings give literal zero tests, which is what the verification suite
//! ultimately relies on; the complex backend exists as a convenience and
//! compares with a componentwise absolute tolerance.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Identifies one of the supported coefficient rings.
///
/// `ModRing(m)` is the residue ring Z/m with `m >= 2` (units are the residues
/// coprime to `m`); `PrimeField(p)` is Z/p for prime `p`; `ComplexFloat(tol)`
/// compares componentwise with absolute tolerance `tol > 0`.
#[derive(Clone, Copy, Debug)]
pub enum RingDescriptor {
    Rational,
    ModRing(u64),
    PrimeField(u64),
    ComplexFloat(f64),
}

impl PartialEq for RingDescriptor {
    fn eq(&self, other: &Self) -> bool {
        use RingDescriptor::*;
        match (self, other) {
            (Rational, Rational) => true,
            (ModRing(a), ModRing(b)) => a == b,
            (PrimeField(a), PrimeField(b)) => a == b,
            (ComplexFloat(a), ComplexFloat(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for RingDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingDescriptor::Rational => write!(f, "Q"),
            RingDescriptor::ModRing(m) => write!(f, "Z/{m}"),
            RingDescriptor::PrimeField(p) => write!(f, "F_{p}"),
            RingDescriptor::ComplexFloat(t) => write!(f, "C(tol={t})"),
        }
    }
}

/// Ring-dependent payload of a [`RingElement`].
///
/// Modular residues are kept canonical in `[0, m)`; rationals are kept in
/// lowest terms with positive denominator (enforced by `BigRational`).
#[derive(Clone, Debug)]
pub enum Scalar {
    Rational(BigRational),
    Modular(u64),
    Complex(Complex64),
}

/// A scalar together with the ring it lives in.
#[derive(Clone, Debug)]
pub struct RingElement {
    ring: RingDescriptor,
    value: Scalar,
}

impl RingDescriptor {
    pub fn rational() -> Self {
        RingDescriptor::Rational
    }

    pub fn mod_ring(modulus: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidSpec(format!(
                "modulus must be >= 2, got {modulus}"
            )));
        }
        Ok(RingDescriptor::ModRing(modulus))
    }

    pub fn prime_field(p: u64) -> Result<Self> {
        if !is_prime_u64(p) {
            return Err(Error::InvalidSpec(format!("{p} is not prime")));
        }
        Ok(RingDescriptor::PrimeField(p))
    }

    pub fn complex_float(tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "tolerance must be > 0, got {tolerance}"
            )));
        }
        Ok(RingDescriptor::ComplexFloat(tolerance))
    }

    /// Exact rings admit literal zero tests; the complex backend does not.
    pub fn is_exact(&self) -> bool {
        !matches!(self, RingDescriptor::ComplexFloat(_))
    }

    pub fn modulus(&self) -> Option<u64> {
        match self {
            RingDescriptor::ModRing(m) => Some(*m),
            RingDescriptor::PrimeField(p) => Some(*p),
            _ => None,
        }
    }

    pub fn zero(&self) -> RingElement {
        self.element(self.zero_scalar())
    }

    pub fn one(&self) -> RingElement {
        self.element(self.one_scalar())
    }

    pub fn from_i64(&self, v: i64) -> RingElement {
        self.element(self.scalar_from_i64(v))
    }

    /// Rational a/b as an element; errors when b has no inverse in the ring.
    pub fn from_fraction(&self, num: i64, den: i64) -> Result<RingElement> {
        let n = self.scalar_from_i64(num);
        let d = self.scalar_from_i64(den);
        let d_inv = self.inv_scalar(&d)?;
        Ok(self.element(self.mul_scalar(&n, &d_inv)))
    }

    pub(crate) fn element(&self, value: Scalar) -> RingElement {
        RingElement { ring: *self, value }
    }

    pub(crate) fn zero_scalar(&self) -> Scalar {
        match self {
            RingDescriptor::Rational => Scalar::Rational(BigRational::zero()),
            RingDescriptor::ModRing(_) | RingDescriptor::PrimeField(_) => Scalar::Modular(0),
            RingDescriptor::ComplexFloat(_) => Scalar::Complex(Complex64::new(0.0, 0.0)),
        }
    }

    pub(crate) fn one_scalar(&self) -> Scalar {
        match self {
            RingDescriptor::Rational => Scalar::Rational(BigRational::one()),
            RingDescriptor::ModRing(_) | RingDescriptor::PrimeField(_) => Scalar::Modular(1),
            RingDescriptor::ComplexFloat(_) => Scalar::Complex(Complex64::new(1.0, 0.0)),
        }
    }

    pub(crate) fn scalar_from_i64(&self, v: i64) -> Scalar {
        match self {
            RingDescriptor::Rational => Scalar::Rational(BigRational::from(BigInt::from(v))),
            RingDescriptor::ModRing(m) | RingDescriptor::PrimeField(m) => {
                Scalar::Modular(v.rem_euclid(*m as i64) as u64)
            }
            RingDescriptor::ComplexFloat(_) => Scalar::Complex(Complex64::new(v as f64, 0.0)),
        }
    }

    pub(crate) fn add_scalar(&self, a: &Scalar, b: &Scalar) -> Scalar {
        match (self, a, b) {
            (RingDescriptor::Rational, Scalar::Rational(x), Scalar::Rational(y)) => {
                Scalar::Rational(x + y)
            }
            (
                RingDescriptor::ModRing(m) | RingDescriptor::PrimeField(m),
                Scalar::Modular(x),
                Scalar::Modular(y),
            ) => Scalar::Modular(((*x as u128 + *y as u128) % *m as u128) as u64),
            (RingDescriptor::ComplexFloat(_), Scalar::Complex(x), Scalar::Complex(y)) => {
                Scalar::Complex(x + y)
            }
            _ => unreachable!("scalar/ring variant mismatch"),
        }
    }

    pub(crate) fn sub_scalar(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.add_scalar(a, &self.neg_scalar(b))
    }

    pub(crate) fn neg_scalar(&self, a: &Scalar) -> Scalar {
        match (self, a) {
            (RingDescriptor::Rational, Scalar::Rational(x)) => Scalar::Rational(-x),
            (RingDescriptor::ModRing(m) | RingDescriptor::PrimeField(m), Scalar::Modular(x)) => {
                Scalar::Modular(if *x == 0 { 0 } else { m - x })
            }
            (RingDescriptor::ComplexFloat(_), Scalar::Complex(x)) => Scalar::Complex(-x),
            _ => unreachable!("scalar/ring variant mismatch"),
        }
    }

    pub(crate) fn mul_scalar(&self, a: &Scalar, b: &Scalar) -> Scalar {
        match (self, a, b) {
            (RingDescriptor::Rational, Scalar::Rational(x), Scalar::Rational(y)) => {
                Scalar::Rational(x * y)
            }
            (
                RingDescriptor::ModRing(m) | RingDescriptor::PrimeField(m),
                Scalar::Modular(x),
                Scalar::Modular(y),
            ) => Scalar::Modular(((*x as u128 * *y as u128) % *m as u128) as u64),
            (RingDescriptor::ComplexFloat(_), Scalar::Complex(x), Scalar::Complex(y)) => {
                Scalar::Complex(x * y)
            }
            _ => unreachable!("scalar/ring variant mismatch"),
        }
    }

    pub(crate) fn inv_scalar(&self, a: &Scalar) -> Result<Scalar> {
        let non_unit = || Error::NonUnit {
            value: self.format_scalar(a),
            ring: self.to_string(),
        };
        match (self, a) {
            (RingDescriptor::Rational, Scalar::Rational(x)) => {
                if x.is_zero() {
                    Err(non_unit())
                } else {
                    Ok(Scalar::Rational(x.recip()))
                }
            }
            (RingDescriptor::ModRing(m) | RingDescriptor::PrimeField(m), Scalar::Modular(x)) => {
                mod_inverse_u64(*x, *m).map(Scalar::Modular).ok_or_else(non_unit)
            }
            (RingDescriptor::ComplexFloat(tol), Scalar::Complex(x)) => {
                if x.re.abs() <= *tol && x.im.abs() <= *tol {
                    Err(non_unit())
                } else {
                    Ok(Scalar::Complex(x.inv()))
                }
            }
            _ => unreachable!("scalar/ring variant mismatch"),
        }
    }

    /// Integer power; negative exponents require a unit base.
    pub(crate) fn pow_scalar(&self, a: &Scalar, exp: i64) -> Result<Scalar> {
        let (base, e) = if exp < 0 {
            (self.inv_scalar(a)?, exp.unsigned_abs())
        } else {
            (a.clone(), exp as u64)
        };
        let mut acc = self.one_scalar();
        let mut sq = base;
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_scalar(&acc, &sq);
            }
            sq = self.mul_scalar(&sq, &sq);
            e >>= 1;
        }
        Ok(acc)
    }

    pub(crate) fn is_zero_scalar(&self, a: &Scalar) -> bool {
        match (self, a) {
            (RingDescriptor::Rational, Scalar::Rational(x)) => x.is_zero(),
            (RingDescriptor::ModRing(_) | RingDescriptor::PrimeField(_), Scalar::Modular(x)) => {
                *x == 0
            }
            (RingDescriptor::ComplexFloat(tol), Scalar::Complex(x)) => {
                x.re.abs() <= *tol && x.im.abs() <= *tol
            }
            _ => unreachable!("scalar/ring variant mismatch"),
        }
    }

    pub(crate) fn eq_scalar(&self, a: &Scalar, b: &Scalar) -> bool {
        self.is_zero_scalar(&self.sub_scalar(a, b))
    }

    pub(crate) fn is_unit_scalar(&self, a: &Scalar) -> bool {
        match (self, a) {
            (RingDescriptor::ModRing(m), Scalar::Modular(x)) => gcd_u64(*x, *m) == 1,
            _ => !self.is_zero_scalar(a),
        }
    }

    pub(crate) fn format_scalar(&self, a: &Scalar) -> String {
        match a {
            Scalar::Rational(x) => {
                if x.denom().is_one() {
                    x.numer().to_string()
                } else {
                    format!("{}/{}", x.numer(), x.denom())
                }
            }
            Scalar::Modular(x) => x.to_string(),
            Scalar::Complex(z) => format!("{}{:+}i", z.re, z.im),
        }
    }

    /// Magnitude used in residual strings: exact absolute value for
    /// rationals, componentwise maximum for complex, the residue itself for
    /// modular rings.
    pub(crate) fn abs_scalar(&self, a: &Scalar) -> Scalar {
        match a {
            Scalar::Rational(x) => Scalar::Rational(x.abs()),
            Scalar::Modular(x) => Scalar::Modular(*x),
            Scalar::Complex(z) => Scalar::Complex(Complex64::new(z.re.abs().max(z.im.abs()), 0.0)),
        }
    }

    /// `a < b` on magnitudes, used to pick the largest residual entry.
    pub(crate) fn lt_abs_scalar(&self, a: &Scalar, b: &Scalar) -> bool {
        match (self.abs_scalar(a), self.abs_scalar(b)) {
            (Scalar::Rational(x), Scalar::Rational(y)) => x < y,
            (Scalar::Modular(x), Scalar::Modular(y)) => x < y,
            (Scalar::Complex(x), Scalar::Complex(y)) => x.re < y.re,
            _ => unreachable!("scalar/ring variant mismatch"),
        }
    }

    /// JSON form of one scalar: rationals as `"a/b"` strings, modular values
    /// as integers, complex values as `[re, im]` pairs.
    pub fn scalar_to_json(&self, a: &Scalar) -> Value {
        match a {
            Scalar::Rational(_) => Value::String(self.format_scalar(a)),
            Scalar::Modular(x) => json!(x),
            Scalar::Complex(z) => json!([z.re, z.im]),
        }
    }

    pub fn scalar_from_json(&self, v: &Value) -> Result<Scalar> {
        let bad = || Error::InvalidInput(format!("cannot read {v} as element of {self}"));
        match self {
            RingDescriptor::Rational => {
                let s = v.as_str().ok_or_else(bad)?;
                parse_rational(s).ok_or_else(bad).map(Scalar::Rational)
            }
            RingDescriptor::ModRing(m) | RingDescriptor::PrimeField(m) => {
                let x = v.as_i64().ok_or_else(bad)?;
                Ok(Scalar::Modular(x.rem_euclid(*m as i64) as u64))
            }
            RingDescriptor::ComplexFloat(_) => {
                let arr = v.as_array().ok_or_else(bad)?;
                if arr.len() != 2 {
                    return Err(bad());
                }
                let re = arr[0].as_f64().ok_or_else(bad)?;
                let im = arr[1].as_f64().ok_or_else(bad)?;
                Ok(Scalar::Complex(Complex64::new(re, im)))
            }
        }
    }

    pub fn element_from_json(&self, v: &Value) -> Result<RingElement> {
        Ok(self.element(self.scalar_from_json(v)?))
    }

    /// A small random element, used by seeded property checks. Rationals are
    /// drawn with numerator and denominator of height at most 9.
    pub fn random_small(&self, rng: &mut impl Rng) -> RingElement {
        let value = match self {
            RingDescriptor::Rational => {
                let mut num = rng.gen_range(-9i64..=9);
                if num == 0 {
                    num = 1;
                }
                let den = rng.gen_range(1i64..=9);
                Scalar::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
            }
            RingDescriptor::ModRing(m) | RingDescriptor::PrimeField(m) => {
                Scalar::Modular(rng.gen_range(0..*m))
            }
            RingDescriptor::ComplexFloat(_) => Scalar::Complex(Complex64::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )),
        };
        self.element(value)
    }

    /// JSON descriptor form used in files:
    /// `{"ring":"rational"}`, `{"ring":"mod","modulus":4}`,
    /// `{"ring":"prime_field","p":5}` or `{"ring":"complex","tolerance":1e-9}`.
    pub fn to_json(&self) -> Value {
        match self {
            RingDescriptor::Rational => json!({"ring": "rational"}),
            RingDescriptor::ModRing(m) => json!({"ring": "mod", "modulus": m}),
            RingDescriptor::PrimeField(p) => json!({"ring": "prime_field", "p": p}),
            RingDescriptor::ComplexFloat(t) => json!({"ring": "complex", "tolerance": t}),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("ring descriptor: {msg} in {v}"));
        let kind = v
            .get("ring")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing \"ring\" tag"))?;
        match kind {
            "rational" => Ok(RingDescriptor::Rational),
            "mod" => {
                let m = v
                    .get("modulus")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad("missing \"modulus\""))?;
                RingDescriptor::mod_ring(m)
            }
            "prime_field" => {
                let p = v
                    .get("p")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad("missing \"p\""))?;
                RingDescriptor::prime_field(p)
            }
            "complex" => {
                let t = v
                    .get("tolerance")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| bad("missing \"tolerance\""))?;
                RingDescriptor::complex_float(t)
            }
            other => Err(bad(&format!("unknown kind {other:?}"))),
        }
    }
}

impl RingElement {
    pub fn ring(&self) -> RingDescriptor {
        self.ring
    }

    pub(crate) fn scalar(&self) -> &Scalar {
        &self.value
    }

    pub(crate) fn into_scalar(self) -> Scalar {
        self.value
    }

    fn same_ring<'a>(&self, other: &'a RingElement) -> Result<&'a RingElement> {
        if self.ring == other.ring {
            Ok(other)
        } else {
            Err(Error::RingMismatch {
                left: self.ring.to_string(),
                right: other.ring.to_string(),
            })
        }
    }

    pub fn add(&self, other: &RingElement) -> Result<RingElement> {
        let other = self.same_ring(other)?;
        Ok(self.ring.element(self.ring.add_scalar(&self.value, &other.value)))
    }

    pub fn sub(&self, other: &RingElement) -> Result<RingElement> {
        let other = self.same_ring(other)?;
        Ok(self.ring.element(self.ring.sub_scalar(&self.value, &other.value)))
    }

    pub fn mul(&self, other: &RingElement) -> Result<RingElement> {
        let other = self.same_ring(other)?;
        Ok(self.ring.element(self.ring.mul_scalar(&self.value, &other.value)))
    }

    pub fn neg(&self) -> RingElement {
        self.ring.element(self.ring.neg_scalar(&self.value))
    }

    /// Multiplicative inverse; `NonUnit` identifies the offending element.
    pub fn inv(&self) -> Result<RingElement> {
        Ok(self.ring.element(self.ring.inv_scalar(&self.value)?))
    }

    pub fn pow(&self, exp: i64) -> Result<RingElement> {
        Ok(self.ring.element(self.ring.pow_scalar(&self.value, exp)?))
    }

    pub fn is_zero(&self) -> bool {
        self.ring.is_zero_scalar(&self.value)
    }

    pub fn is_one(&self) -> bool {
        self.ring.eq_scalar(&self.value, &self.ring.one_scalar())
    }

    pub fn is_unit(&self) -> bool {
        self.ring.is_unit_scalar(&self.value)
    }

    pub fn to_json(&self) -> Value {
        self.ring.scalar_to_json(&self.value)
    }

    /// The canonical residue for modular rings, if applicable.
    pub fn residue(&self) -> Option<u64> {
        match &self.value {
            Scalar::Modular(x) => Some(*x),
            _ => None,
        }
    }

    pub fn to_rational(&self) -> Option<&BigRational> {
        match &self.value {
            Scalar::Rational(x) => Some(x),
            _ => None,
        }
    }
}

/// Equality is exact on exact rings and tolerance-based on the complex
/// backend; elements of different rings are never equal.
impl PartialEq for RingElement {
    fn eq(&self, other: &Self) -> bool {
        self.ring == other.ring && self.ring.eq_scalar(&self.value, &other.value)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ring.format_scalar(&self.value))
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let num = BigInt::from_str(n.trim()).ok()?;
            let den = BigInt::from_str(d.trim()).ok()?;
            if den.is_zero() {
                return None;
            }
            Some(BigRational::new(num, den))
        }
        None => Some(BigRational::from(BigInt::from_str(s).ok()?)),
    }
}

// ---------------------------------------------------------------------------
// integer helpers
// ---------------------------------------------------------------------------

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

/// Inverse of `a` modulo `m`, when `gcd(a, m) = 1`.
pub fn mod_inverse_u64(a: u64, m: u64) -> Option<u64> {
    let (g, x, _) = ext_gcd(a as i128, m as i128);
    if g != 1 {
        return None;
    }
    Some(x.rem_euclid(m as i128) as u64)
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

pub fn mod_pow_u64(base: u64, mut exp: u64, m: u64) -> u64 {
    let m = m as u128;
    let mut acc: u128 = 1;
    let mut b = base as u128 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

/// Deterministic Miller-Rabin over the full u64 range.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `p^k` with overflow check.
pub fn checked_pow_u64(p: u64, k: u32) -> Option<u64> {
    p.checked_pow(k)
}

/// Prime factorization of a u64 (trial division; desk-scale moduli).
pub fn factorize_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut k = 0;
            while n % p == 0 {
                n /= p;
                k += 1;
            }
            out.push((p, k));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// All square roots of -1 in Z/p, in ascending order.
pub fn sqrt_minus_one(p: u64) -> Vec<u64> {
    (0..p)
        .filter(|&e| (e as u128 * e as u128 + 1) % p as u128 == 0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q() -> RingDescriptor {
        RingDescriptor::rational()
    }

    #[test]
    fn rational_add() {
        let a = q().from_fraction(1, 2).unwrap();
        let b = q().from_fraction(1, 3).unwrap();
        assert_eq!(a.add(&b).unwrap(), q().from_fraction(5, 6).unwrap());
    }

    #[test]
    fn mod4_mul() {
        let z4 = RingDescriptor::mod_ring(4).unwrap();
        let three = z4.from_i64(3);
        assert_eq!(three.mul(&three).unwrap(), z4.one());
    }

    #[test]
    fn mod4_inverses() {
        let z4 = RingDescriptor::mod_ring(4).unwrap();
        assert_eq!(z4.from_i64(3).inv().unwrap(), z4.from_i64(3));
        assert!(matches!(z4.from_i64(2).inv(), Err(Error::NonUnit { .. })));
    }

    #[test]
    fn rational_invert() {
        let a = q().from_fraction(5, 7).unwrap();
        assert_eq!(a.inv().unwrap(), q().from_fraction(7, 5).unwrap());
        assert!(q().zero().inv().is_err());
    }

    #[test]
    fn ring_mismatch_reported() {
        let z4 = RingDescriptor::mod_ring(4).unwrap();
        let err = q().one().add(&z4.one()).unwrap_err();
        assert!(matches!(err, Error::RingMismatch { .. }));
    }

    #[test]
    fn descriptor_validation() {
        assert!(RingDescriptor::mod_ring(1).is_err());
        assert!(RingDescriptor::prime_field(6).is_err());
        assert!(RingDescriptor::prime_field(5).is_ok());
        assert!(RingDescriptor::complex_float(0.0).is_err());
    }

    #[test]
    fn complex_tolerance_equality() {
        let c = RingDescriptor::complex_float(1e-9).unwrap();
        let a = c.element_from_json(&json!([1.0, 0.0])).unwrap();
        let b = c.element_from_json(&json!([1.0 + 1e-10, -1e-10])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        for ring in [
            q(),
            RingDescriptor::mod_ring(4).unwrap(),
            RingDescriptor::prime_field(5).unwrap(),
            RingDescriptor::complex_float(1e-9).unwrap(),
        ] {
            let back = RingDescriptor::from_json(&ring.to_json()).unwrap();
            assert_eq!(ring, back);
        }
        let x = q().from_fraction(-3, 4).unwrap();
        assert_eq!(x.to_json(), json!("-3/4"));
        assert_eq!(q().element_from_json(&json!("-3/4")).unwrap(), x);
        assert_eq!(q().element_from_json(&json!("7")).unwrap(), q().from_i64(7));
    }

    #[test]
    fn rational_normalization_idempotent() {
        // BigRational reduces on construction; re-normalizing is a no-op.
        let a = BigRational::new(BigInt::from(6), BigInt::from(-8));
        let b = BigRational::new(a.numer().clone(), a.denom().clone());
        assert_eq!(a, b);
        assert_eq!(a.denom(), &BigInt::from(4));
    }

    #[test]
    fn prime_tests() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(5));
        assert!(is_prime_u64(1_000_003));
        assert!(!is_prime_u64(1));
        assert!(!is_prime_u64(25));
    }

    #[test]
    fn sqrt_minus_one_mod5() {
        assert_eq!(sqrt_minus_one(5), vec![2, 3]);
        assert_eq!(sqrt_minus_one(2), vec![1]);
        assert!(sqrt_minus_one(3).is_empty());
    }

    #[test]
    fn additive_inverse_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for ring in [q(), RingDescriptor::mod_ring(12).unwrap()] {
            for _ in 0..64 {
                let a = ring.random_small(&mut rng);
                assert!(a.add(&a.neg()).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn invert_involution_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..64 {
            let a = q().random_small(&mut rng);
            if !a.is_zero() {
                assert_eq!(a.inv().unwrap().inv().unwrap(), a);
            }
        }
    }

    proptest! {
        #[test]
        fn modular_matches_integer_arithmetic(a in 0i128..10_000, b in 0i128..10_000, m in 2u64..500) {
            let ring = RingDescriptor::mod_ring(m).unwrap();
            let x = ring.from_i64(a as i64);
            let y = ring.from_i64(b as i64);
            let m = m as i128;
            prop_assert_eq!(x.add(&y).unwrap().residue().unwrap() as i128, (a + b).rem_euclid(m));
            prop_assert_eq!(x.mul(&y).unwrap().residue().unwrap() as i128, (a * b).rem_euclid(m));
            prop_assert_eq!(x.sub(&y).unwrap().residue().unwrap() as i128, (a - b).rem_euclid(m));
        }

        #[test]
        fn rational_field_axioms(n1 in -20i64..20, d1 in 1i64..9, n2 in -20i64..20, d2 in 1i64..9) {
            let a = q().from_fraction(n1, d1).unwrap();
            let b = q().from_fraction(n2, d2).unwrap();
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
            if !b.is_zero() {
                let q_ = a.mul(&b.inv().unwrap()).unwrap();
                prop_assert_eq!(q_.mul(&b).unwrap(), a);
            }
        }
    }
}
