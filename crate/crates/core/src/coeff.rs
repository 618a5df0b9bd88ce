//! Exact coefficients for the base field: rationals (characteristic zero) or
//! residues modulo a prime.
//!
//! Rationals carry a machine-word fast path. A value is stored as
//! `Ratio<i64>` whenever numerator and denominator fit, and as a boxed
//! `BigRational` otherwise; the choice is canonical, so derived equality and
//! hashing are structural.

use std::borrow::Cow;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest modulus accepted for prime fields. Keeps primality checking by
/// trial division instant and residue products inside `u64`.
pub const MAX_MODULUS: u64 = u32::MAX as u64;

/// The base field `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldSpec {
    Rationals,
    PrimeField(u64),
}

impl FieldSpec {
    /// `GF(p)`, rejecting composite or out-of-range moduli.
    pub fn prime(p: u64) -> Result<Self> {
        if p > MAX_MODULUS {
            return Err(Error::ModulusTooLarge(p));
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(FieldSpec::PrimeField(p))
    }

    pub fn characteristic(&self) -> u64 {
        match self {
            FieldSpec::Rationals => 0,
            FieldSpec::PrimeField(p) => *p,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, FieldSpec::PrimeField(_))
    }

    pub fn zero(&self) -> Coefficient {
        self.from_i64(0)
    }

    pub fn one(&self) -> Coefficient {
        self.from_i64(1)
    }

    pub fn from_i64(&self, v: i64) -> Coefficient {
        match *self {
            FieldSpec::Rationals => Coefficient::from_ratio64(Ratio::from_integer(v)),
            FieldSpec::PrimeField(p) => Coefficient(Repr::Residue {
                value: v.rem_euclid(p as i64) as u64,
                modulus: p,
            }),
        }
    }

    pub fn from_bigint(&self, v: &BigInt) -> Coefficient {
        match *self {
            FieldSpec::Rationals => {
                Coefficient::from_big(BigRational::from_integer(v.clone()))
            }
            FieldSpec::PrimeField(p) => {
                let r = v.mod_floor(&BigInt::from(p));
                Coefficient(Repr::Residue {
                    value: r.to_u64().expect("residue below modulus"),
                    modulus: p,
                })
            }
        }
    }

    /// `num / den` mapped into the field.
    pub fn from_fraction(&self, num: &BigInt, den: &BigInt) -> Result<Coefficient> {
        let d = self.from_bigint(den);
        if d.is_zero() {
            return Err(Error::DivisionByZero);
        }
        match self {
            FieldSpec::Rationals => Ok(Coefficient::from_big(BigRational::new(
                num.clone(),
                den.clone(),
            ))),
            FieldSpec::PrimeField(_) => self.from_bigint(num).try_div(&d),
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Rationals => write!(f, "Q"),
            FieldSpec::PrimeField(p) => write!(f, "GF({p})"),
        }
    }
}

impl Serialize for FieldSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub(crate) fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut q = 2u64;
    while q * q <= p {
        if p % q == 0 {
            return false;
        }
        q += 1;
    }
    true
}

/// An element of the field named by a [`FieldSpec`], in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coefficient(Repr);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Repr {
    // numerator is never i64::MIN, so negation cannot overflow
    Small(Ratio<i64>),
    Big(Box<BigRational>),
    Residue { value: u64, modulus: u64 },
}

impl Coefficient {
    fn from_ratio64(r: Ratio<i64>) -> Self {
        if *r.numer() == i64::MIN {
            let big = BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
            return Coefficient(Repr::Big(Box::new(big)));
        }
        Coefficient(Repr::Small(r))
    }

    fn from_int64(n: i64) -> Self {
        Coefficient::from_ratio64(Ratio::new_raw(n, 1))
    }

    fn from_bigint(n: BigInt) -> Self {
        match n.to_i64() {
            Some(v) if v != i64::MIN => Coefficient(Repr::Small(Ratio::new_raw(v, 1))),
            _ => Coefficient(Repr::Big(Box::new(BigRational::from_integer(n)))),
        }
    }

    fn from_big(r: BigRational) -> Self {
        if let (Some(n), Some(d)) = (r.numer().to_i64(), r.denom().to_i64()) {
            if n != i64::MIN {
                // already reduced with positive denominator
                return Coefficient(Repr::Small(Ratio::new_raw(n, d)));
            }
        }
        Coefficient(Repr::Big(Box::new(r)))
    }

    fn residue(value: u64, modulus: u64) -> Self {
        Coefficient(Repr::Residue { value, modulus })
    }

    pub fn field(&self) -> FieldSpec {
        match &self.0 {
            Repr::Small(_) | Repr::Big(_) => FieldSpec::Rationals,
            Repr::Residue { modulus, .. } => FieldSpec::PrimeField(*modulus),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_zero(),
            Repr::Big(r) => r.is_zero(),
            Repr::Residue { value, .. } => *value == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_one(),
            Repr::Big(r) => r.is_one(),
            Repr::Residue { value, .. } => *value == 1,
        }
    }

    /// Strictly negative rational. Residues are never negative.
    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_negative(),
            Repr::Big(r) => r.is_negative(),
            Repr::Residue { .. } => false,
        }
    }

    /// The value as a big rational; `None` for residues.
    pub fn to_rational(&self) -> Option<BigRational> {
        match &self.0 {
            Repr::Small(r) => Some(BigRational::new_raw(
                BigInt::from(*r.numer()),
                BigInt::from(*r.denom()),
            )),
            Repr::Big(r) => Some((**r).clone()),
            Repr::Residue { .. } => None,
        }
    }

    /// The residue value in `[0, p)`; `None` for rationals.
    pub fn residue_value(&self) -> Option<u64> {
        match &self.0 {
            Repr::Residue { value, .. } => Some(*value),
            _ => None,
        }
    }

    fn same_field(&self, other: &Self) -> Result<()> {
        let (a, b) = (self.field(), other.field());
        if a != b {
            return Err(Error::MixedFields(a, b));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        Ok(self.add_unchecked(other))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        Ok(self.add_unchecked(&other.neg_ref()))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub fn try_div(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        Ok(self.mul_unchecked(&other.inv()?))
    }

    /// Multiplicative inverse.
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(match &self.0 {
            Repr::Small(r) => Coefficient::from_ratio64(r.recip()),
            Repr::Big(r) => Coefficient::from_big(r.recip()),
            Repr::Residue { value, modulus } => {
                // p prime: a^(p-2)
                Coefficient::residue(pow_mod(*value, modulus - 2, *modulus), *modulus)
            }
        })
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = self.field().one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_unchecked(&base);
            }
            base = base.mul_unchecked(&base);
            e >>= 1;
        }
        acc
    }

    /// Maps this value into another field. Rationals map into `GF(p)`
    /// when their denominator is a unit there.
    pub fn map_into(&self, target: FieldSpec) -> Result<Self> {
        if self.field() == target {
            return Ok(self.clone());
        }
        match (&self.0, target) {
            (Repr::Residue { .. }, _) => Err(Error::MixedFields(self.field(), target)),
            (_, FieldSpec::Rationals) => unreachable!("rational already in Q"),
            (_, FieldSpec::PrimeField(_)) => {
                let r = self.to_rational().expect("rational");
                target.from_fraction(r.numer(), r.denom())
            }
        }
    }

    fn neg_ref(&self) -> Self {
        match &self.0 {
            Repr::Small(r) => Coefficient(Repr::Small(-r)),
            Repr::Big(r) => Coefficient::from_big(-(**r).clone()),
            Repr::Residue { value, modulus } => {
                Coefficient::residue(if *value == 0 { 0 } else { modulus - value }, *modulus)
            }
        }
    }

    fn add_unchecked(&self, other: &Self) -> Self {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) if a.is_integer() && b.is_integer() => {
                match i64::checked_add(*a.numer(), *b.numer()) {
                    Some(n) => Coefficient::from_int64(n),
                    None => Coefficient::from_bigint(BigInt::from(*a.numer()) + b.numer()),
                }
            }
            (Repr::Small(a), Repr::Small(b)) => match a.checked_add(b) {
                Some(r) => Coefficient::from_ratio64(r),
                None => Coefficient::from_big(to_big(self) + to_big(other)),
            },
            (Repr::Residue { value: a, modulus }, Repr::Residue { value: b, .. }) => {
                Coefficient::residue(((*a as u128 + *b as u128) % *modulus as u128) as u64, *modulus)
            }
            _ => match integer_pair(self, other) {
                Some((a, b)) => Coefficient::from_bigint(a.as_ref() + b.as_ref()),
                None => Coefficient::from_big(to_big(self) + to_big(other)),
            },
        }
    }

    fn sub_unchecked(&self, other: &Self) -> Self {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) if a.is_integer() && b.is_integer() => {
                match i64::checked_sub(*a.numer(), *b.numer()) {
                    Some(n) => Coefficient::from_int64(n),
                    None => Coefficient::from_bigint(BigInt::from(*a.numer()) - b.numer()),
                }
            }
            (Repr::Small(a), Repr::Small(b)) => match a.checked_sub(b) {
                Some(r) => Coefficient::from_ratio64(r),
                None => Coefficient::from_big(to_big(self) - to_big(other)),
            },
            _ => self.add_unchecked(&other.neg_ref()),
        }
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        match (&self.0, &other.0) {
            (Repr::Small(a), _) if a.is_one() => other.clone(),
            (_, Repr::Small(b)) if b.is_one() => self.clone(),
            (Repr::Small(a), Repr::Small(b)) if a.is_integer() && b.is_integer() => {
                match i64::checked_mul(*a.numer(), *b.numer()) {
                    Some(n) => Coefficient::from_int64(n),
                    None => Coefficient::from_bigint(BigInt::from(*a.numer()) * b.numer()),
                }
            }
            (Repr::Small(a), Repr::Small(b)) => match a.checked_mul(b) {
                Some(r) => Coefficient::from_ratio64(r),
                None => Coefficient::from_big(to_big(self) * to_big(other)),
            },
            (Repr::Residue { value: a, modulus }, Repr::Residue { value: b, .. }) => {
                Coefficient::residue(((*a as u128 * *b as u128) % *modulus as u128) as u64, *modulus)
            }
            _ => match integer_pair(self, other) {
                Some((a, b)) => Coefficient::from_bigint(a.as_ref() * b.as_ref()),
                None => Coefficient::from_big(to_big(self) * to_big(other)),
            },
        }
    }

    fn assert_same(&self, other: &Self) {
        if let Err(e) = self.same_field(other) {
            panic!("{e}");
        }
    }
}

/// Both operands as integers, when neither has a denominator. Skips the
/// gcd work of general rational arithmetic.
fn integer_pair<'a>(a: &'a Coefficient, b: &'a Coefficient) -> Option<(Cow<'a, BigInt>, Cow<'a, BigInt>)> {
    fn int(c: &Coefficient) -> Option<Cow<'_, BigInt>> {
        match &c.0 {
            Repr::Small(r) if r.is_integer() => Some(Cow::Owned(BigInt::from(*r.numer()))),
            Repr::Big(r) if r.is_integer() => Some(Cow::Borrowed(r.numer())),
            _ => None,
        }
    }
    Some((int(a)?, int(b)?))
}

fn to_big(c: &Coefficient) -> BigRational {
    c.to_rational().expect("rational coefficient")
}

fn pow_mod(base: u64, mut e: u64, m: u64) -> u64 {
    let m = m as u128;
    let mut acc = 1u128;
    let mut b = base as u128 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc as u64
}

/// `C(m, l)` computed over the integers, then mapped into `spec`.
/// Returns zero when `l > m`.
pub fn binomial_in_field(m: u64, l: u64, spec: FieldSpec) -> Coefficient {
    if l > m {
        return spec.zero();
    }
    let l = l.min(m - l);
    let mut acc = BigUint::one();
    for i in 0..l {
        acc = acc * BigUint::from(m - i) / BigUint::from(i + 1);
    }
    spec.from_bigint(&BigInt::from(acc))
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(r) => write!(f, "{r}"),
            Repr::Big(r) => write!(f, "{r}"),
            Repr::Residue { value, .. } => write!(f, "{value}"),
        }
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

// Operator impls panic on mixed fields. Polynomial code checks ambients
// once up front and then relies on these in its inner loops.

impl Add for &Coefficient {
    type Output = Coefficient;
    fn add(self, rhs: &Coefficient) -> Coefficient {
        self.assert_same(rhs);
        self.add_unchecked(rhs)
    }
}

impl Sub for &Coefficient {
    type Output = Coefficient;
    fn sub(self, rhs: &Coefficient) -> Coefficient {
        self.assert_same(rhs);
        self.sub_unchecked(rhs)
    }
}

impl Mul for &Coefficient {
    type Output = Coefficient;
    fn mul(self, rhs: &Coefficient) -> Coefficient {
        self.assert_same(rhs);
        self.mul_unchecked(rhs)
    }
}

impl Neg for &Coefficient {
    type Output = Coefficient;
    fn neg(self) -> Coefficient {
        self.neg_ref()
    }
}

impl Neg for Coefficient {
    type Output = Coefficient;
    fn neg(self) -> Coefficient {
        self.neg_ref()
    }
}

impl AddAssign<&Coefficient> for Coefficient {
    fn add_assign(&mut self, rhs: &Coefficient) {
        self.assert_same(rhs);
        match (&mut self.0, &rhs.0) {
            (Repr::Small(a), Repr::Small(b)) => {
                let sum = if a.is_integer() && b.is_integer() {
                    i64::checked_add(*a.numer(), *b.numer()).map(|n| Ratio::new_raw(n, 1))
                } else {
                    a.checked_add(b)
                };
                if let Some(r) = sum.filter(|r| *r.numer() != i64::MIN) {
                    *a = r;
                    return;
                }
            }
            (Repr::Big(a), Repr::Small(b)) if a.is_integer() && b.is_integer() => {
                let n = std::mem::take(&mut **a).into_raw().0 + b.numer();
                *self = Coefficient::from_bigint(n);
                return;
            }
            (Repr::Big(a), Repr::Big(b)) if a.is_integer() && b.is_integer() => {
                let n = std::mem::take(&mut **a).into_raw().0 + b.numer();
                *self = Coefficient::from_bigint(n);
                return;
            }
            _ => {}
        }
        *self = self.add_unchecked(rhs);
    }
}

impl SubAssign<&Coefficient> for Coefficient {
    fn sub_assign(&mut self, rhs: &Coefficient) {
        self.assert_same(rhs);
        *self = self.sub_unchecked(rhs);
    }
}
