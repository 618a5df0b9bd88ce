//! Sparse multivariate polynomials over a [`FieldSpec`], with optional
//! degree truncation (arithmetic modulo all monomials of degree `> N`).

use std::cmp::Ordering;
use std::cell::Cell;
use std::collections::hash_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Serialize, Serializer};
use smallvec::SmallVec;

use crate::coeff::{Coefficient, FieldSpec};
use crate::error::{Error, Resource, Result};

/// Exponent vector of a monomial `X_1^e_1 ... X_n^e_n`.
///
/// Ordered graded-lexicographically: total degree first, then the exponent
/// of `X_1`, then `X_2`, and so on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: SmallVec<[u32; 6]>,
    degree: u32,
}

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial { exps: SmallVec::from_elem(0, nvars), degree: 0 }
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut m = Self::one(nvars);
        m.exps[i] = 1;
        m.degree = 1;
        m
    }

    /// Panics if the total degree overflows `u32`.
    pub fn from_exponents(exps: impl IntoIterator<Item = u32>) -> Self {
        let exps: SmallVec<[u32; 6]> = exps.into_iter().collect();
        let degree = exps
            .iter()
            .try_fold(0u32, |acc, &e| acc.checked_add(e))
            .expect("monomial degree overflows u32");
        Monomial { exps, degree }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_one(&self) -> bool {
        self.degree == 0
    }

    pub fn mul(&self, other: &Monomial) -> Result<Monomial> {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        let degree = self.degree.checked_add(other.degree).ok_or(Error::ExponentOverflow)?;
        // each exponent is at most the total degree, so none overflows
        let mut exps = self.exps.clone();
        for (a, b) in exps.iter_mut().zip(&other.exps) {
            *a += b;
        }
        Ok(Monomial { exps, degree })
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut exps = SmallVec::with_capacity(self.exps.len());
        for (a, b) in self.exps.iter().zip(&other.exps) {
            exps.push(a.checked_sub(*b)?);
        }
        Some(Monomial { exps, degree: self.degree - other.degree })
    }

    fn with_exponent(&self, var: usize, e: u32) -> Monomial {
        let mut m = self.clone();
        m.degree = m.degree - m.exps[var] + e;
        m.exps[var] = e;
        m
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Degree or order of vanishing with the two infinite sentinels:
/// `deg 0 = NegInf`, `ord 0 = PosInf`. The derived ordering puts
/// `NegInf < Finite(_) < PosInf`, so max/min folds behave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtDegree {
    NegInf,
    Finite(u32),
    PosInf,
}

impl ExtDegree {
    pub fn finite(self) -> Option<u32> {
        match self {
            ExtDegree::Finite(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtDegree::Finite(_))
    }
}

impl fmt::Display for ExtDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtDegree::NegInf => write!(f, "-inf"),
            ExtDegree::Finite(d) => write!(f, "{d}"),
            ExtDegree::PosInf => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtDegree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtDegree::NegInf => s.serialize_str("-inf"),
            ExtDegree::Finite(d) => s.serialize_u32(*d),
            ExtDegree::PosInf => s.serialize_str("inf"),
        }
    }
}

/// Variable count and base field shared by every polynomial in a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ambient {
    pub nvars: usize,
    pub field: FieldSpec,
}

impl Ambient {
    pub fn new(nvars: usize, field: FieldSpec) -> Self {
        Ambient { nvars, field }
    }

    pub(crate) fn check(&self, other: &Ambient) -> Result<()> {
        if self != other {
            return Err(Error::AmbientMismatch {
                left: self.to_string(),
                right: other.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Ambient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{} vars]", self.field, self.nvars)
    }
}

/// Degree cutoff applied after every elementary product.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Truncation {
    #[default]
    Unbounded,
    Degree(u32),
}

impl Truncation {
    #[inline]
    pub fn admits(self, degree: u64) -> bool {
        match self {
            Truncation::Unbounded => true,
            Truncation::Degree(n) => degree <= n as u64,
        }
    }

    pub fn max_degree(self) -> Option<u32> {
        match self {
            Truncation::Unbounded => None,
            Truncation::Degree(n) => Some(n),
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Unbounded => write!(f, "unbounded"),
            Truncation::Degree(n) => write!(f, "{n}"),
        }
    }
}

/// A polynomial in canonical sparse form: no zero coefficient is stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    ambient: Ambient,
    // strictly ascending in graded-lex order
    terms: Vec<(Monomial, Coefficient)>,
}

impl Poly {
    pub fn zero(ambient: Ambient) -> Self {
        Poly { ambient, terms: Vec::new() }
    }

    pub fn constant(ambient: Ambient, c: Coefficient) -> Self {
        Self::monomial(ambient, Monomial::one(ambient.nvars), c)
    }

    pub fn one(ambient: Ambient) -> Self {
        Self::constant(ambient, ambient.field.one())
    }

    /// The variable `X_{i+1}` (zero-based index).
    pub fn var(ambient: Ambient, i: usize) -> Self {
        Self::monomial(ambient, Monomial::var(ambient.nvars, i), ambient.field.one())
    }

    pub fn monomial(ambient: Ambient, m: Monomial, c: Coefficient) -> Self {
        debug_assert_eq!(m.nvars(), ambient.nvars);
        let terms = if c.is_zero() { Vec::new() } else { vec![(m, c)] };
        Poly { ambient, terms }
    }

    /// Sums the given terms; repeated monomials are combined.
    pub fn from_terms(
        ambient: Ambient,
        terms: impl IntoIterator<Item = (Monomial, Coefficient)>,
    ) -> Result<Self> {
        let mut all = Vec::new();
        for (m, c) in terms {
            if m.nvars() != ambient.nvars {
                return Err(Error::ArityMismatch { expected: ambient.nvars, found: m.nvars() });
            }
            if c.field() != ambient.field {
                return Err(Error::MixedFields(ambient.field, c.field()));
            }
            all.push((m, c));
        }
        all.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Poly { ambient, terms: combine_sorted(all) })
    }

    fn from_sorted(ambient: Ambient, terms: Vec<(Monomial, Coefficient)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        Poly { ambient, terms }
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn nvars(&self) -> usize {
        self.ambient.nvars
    }

    pub fn field(&self) -> FieldSpec {
        self.ambient.field
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(m, _)| m.is_one())
    }

    /// The constant term, or zero.
    pub fn constant_term(&self) -> Coefficient {
        self.coefficient(&Monomial::one(self.nvars()))
    }

    pub fn coefficient(&self, m: &Monomial) -> Coefficient {
        match self.terms.binary_search_by(|(k, _)| k.cmp(m)) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => self.field().zero(),
        }
    }

    /// Number of stored (nonzero) terms.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Coefficient)> + '_ {
        self.terms.iter().map(|(m, c)| (m, c))
    }

    /// Leading term in graded-lex order.
    pub fn leading_term(&self) -> Option<(&Monomial, &Coefficient)> {
        self.terms.last().map(|(m, c)| (m, c))
    }

    pub fn degree(&self) -> ExtDegree {
        self.terms
            .last()
            .map_or(ExtDegree::NegInf, |(m, _)| ExtDegree::Finite(m.degree()))
    }

    /// Order of vanishing: the smallest total degree present.
    pub fn order(&self) -> ExtDegree {
        self.terms
            .first()
            .map_or(ExtDegree::PosInf, |(m, _)| ExtDegree::Finite(m.degree()))
    }

    pub fn homogeneous_component(&self, d: u32) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.degree() == d)
            .map(|(m, c)| (m.clone(), c.clone()))
            .collect();
        Poly { ambient: self.ambient, terms }
    }

    /// Distinct total degrees of the nonzero homogeneous components, ascending.
    pub fn layer_degrees(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.terms.iter().map(|(m, _)| m.degree()).collect();
        out.dedup();
        out
    }

    pub fn is_homogeneous(&self) -> bool {
        self.layer_degrees().len() <= 1
    }

    pub fn truncate(&self, trunc: Truncation) -> Poly {
        match trunc {
            Truncation::Unbounded => self.clone(),
            Truncation::Degree(n) => {
                let terms = self
                    .terms
                    .iter()
                    .take_while(|(m, _)| m.degree() <= n)
                    .map(|(m, c)| (m.clone(), c.clone()))
                    .collect();
                Poly { ambient: self.ambient, terms }
            }
        }
    }

    /// Whether `X_{i+1}` occurs in some term.
    pub fn uses_var(&self, i: usize) -> bool {
        self.terms.iter().any(|(m, _)| m.exps[i] > 0)
    }

    pub fn add(&self, other: &Poly, trunc: Truncation) -> Result<Poly> {
        self.ambient.check(&other.ambient)?;
        Ok(self.merge(other, false, trunc))
    }

    pub fn sub(&self, other: &Poly, trunc: Truncation) -> Result<Poly> {
        self.ambient.check(&other.ambient)?;
        Ok(self.merge(other, true, trunc))
    }

    pub fn mul(&self, other: &Poly, trunc: Truncation) -> Result<Poly> {
        self.ambient.check(&other.ambient)?;
        self.mul_unchecked(other, trunc)
    }

    pub fn neg(&self) -> Poly {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect();
        Poly { ambient: self.ambient, terms }
    }

    pub fn scale(&self, c: &Coefficient) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.ambient);
        }
        let terms = self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect();
        Poly { ambient: self.ambient, terms }
    }

    pub fn pow(&self, mut e: u32, trunc: Truncation) -> Result<Poly> {
        let mut base = self.truncate(trunc);
        let mut acc = Poly::one(self.ambient).truncate(trunc);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_unchecked(&base, trunc)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_unchecked(&base, trunc)?;
            }
        }
        Ok(acc)
    }

    fn merge(&self, other: &Poly, negate: bool, trunc: Truncation) -> Poly {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let mut a = self.terms.iter().peekable();
        let mut b = other.terms.iter().peekable();
        loop {
            let next = match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => {
                    let (m, c) = a.next().unwrap();
                    (m.clone(), c.clone())
                }
                (None, Some(_)) => {
                    let (m, c) = b.next().unwrap();
                    (m.clone(), if negate { -c } else { c.clone() })
                }
                (Some((ma, _)), Some((mb, _))) => match ma.cmp(mb) {
                    Ordering::Less => {
                        let (m, c) = a.next().unwrap();
                        (m.clone(), c.clone())
                    }
                    Ordering::Greater => {
                        let (m, c) = b.next().unwrap();
                        (m.clone(), if negate { -c } else { c.clone() })
                    }
                    Ordering::Equal => {
                        let (m, ca) = a.next().unwrap();
                        let (_, cb) = b.next().unwrap();
                        let c = if negate { ca - cb } else { ca + cb };
                        if c.is_zero() {
                            continue;
                        }
                        (m.clone(), c)
                    }
                },
            };
            if !trunc.admits(next.0.degree() as u64) {
                // ascending order: everything after is at least as high
                break;
            }
            out.push(next);
        }
        Poly::from_sorted(self.ambient, out)
    }

    /// Sorted merge that consumes both operands.
    fn merge_owned(self, other: Poly, trunc: Truncation) -> Poly {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let mut a = self.terms.into_iter().peekable();
        let mut b = other.terms.into_iter().peekable();
        loop {
            let next = match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => a.next().unwrap(),
                (None, Some(_)) => b.next().unwrap(),
                (Some((ma, _)), Some((mb, _))) => match ma.cmp(mb) {
                    Ordering::Less => a.next().unwrap(),
                    Ordering::Greater => b.next().unwrap(),
                    Ordering::Equal => {
                        let (m, mut c) = a.next().unwrap();
                        let (_, cb) = b.next().unwrap();
                        c += &cb;
                        if c.is_zero() {
                            continue;
                        }
                        (m, c)
                    }
                },
            };
            if !trunc.admits(next.0.degree() as u64) {
                break;
            }
            out.push(next);
        }
        Poly { ambient: self.ambient, terms: out }
    }

    fn mul_unchecked(&self, other: &Poly, trunc: Truncation) -> Result<Poly> {
        if self.is_zero() || other.is_zero() {
            return Ok(Poly::zero(self.ambient));
        }
        let (small, large) = if self.terms.len() <= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        if small.terms.len() == 1 {
            let (m, c) = &small.terms[0];
            return large.mul_term(m, c, trunc);
        }
        if small.terms.len() <= SHORT_FACTOR {
            // shifted copies of the long factor are already sorted
            let mut parts = small
                .terms
                .iter()
                .map(|(m, c)| large.mul_term(m, c, trunc))
                .collect::<Result<Vec<_>>>()?;
            while parts.len() > 1 {
                let mut next = Vec::with_capacity(parts.len().div_ceil(2));
                let mut it = parts.into_iter();
                while let Some(a) = it.next() {
                    next.push(match it.next() {
                        Some(b) => a.merge_owned(b, trunc),
                        None => a,
                    });
                }
                parts = next;
            }
            return Ok(parts.pop().unwrap());
        }

        let n = self.ambient.nvars;
        let top = small.terms.last().unwrap().0.degree as u64 + large.terms.last().unwrap().0.degree as u64;
        if let Some(packing) = Packing::fitting(n, top) {
            return Ok(small.mul_packed(large, packing, trunc));
        }
        small.mul_hashed(large, trunc)
    }

    fn mul_hashed(&self, large: &Poly, trunc: Truncation) -> Result<Poly> {
        let small = self;
        let rhs: Vec<(&Monomial, &Coefficient, u64)> = large
            .terms
            .iter()
            .map(|(m, c)| (m, c, m.degree() as u64))
            .collect();
        let mut acc: FxHashMap<Monomial, Coefficient> = FxHashMap::default();
        acc.reserve(small.terms.len().max(rhs.len()) * 2);
        for (ma, ca) in &small.terms {
            let da = ma.degree() as u64;
            if !trunc.admits(da) {
                break;
            }
            for &(mb, cb, db) in &rhs {
                if !trunc.admits(da + db) {
                    break;
                }
                let m = ma.mul(mb)?;
                let c = ca * cb;
                match acc.entry(m) {
                    Entry::Occupied(mut e) => *e.get_mut() += &c,
                    Entry::Vacant(e) => {
                        e.insert(c);
                    }
                }
            }
        }
        let mut terms: Vec<(Monomial, Coefficient)> =
            acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(Poly::from_sorted(self.ambient, terms))
    }

    /// Schoolbook product with exponent vectors packed into one `u64`, for
    /// when no exponent can reach the field width.
    fn mul_packed(&self, other: &Poly, packing: Packing, trunc: Truncation) -> Poly {
        let rhs: Vec<(u64, u32, &Coefficient)> =
            other.terms.iter().map(|(m, c)| (packing.pack(m), m.degree, c)).collect();
        let mut acc: FxHashMap<u64, (u32, Coefficient)> = FxHashMap::default();
        acc.reserve(self.terms.len().max(rhs.len()) * 2);
        for (ma, ca) in &self.terms {
            if !trunc.admits(ma.degree as u64) {
                break;
            }
            let ka = packing.pack(ma);
            for &(kb, db, cb) in &rhs {
                let degree = ma.degree + db;
                if !trunc.admits(degree as u64) {
                    break;
                }
                let c = ca * cb;
                match acc.entry(ka + kb) {
                    Entry::Occupied(mut e) => e.get_mut().1 += &c,
                    Entry::Vacant(e) => {
                        e.insert((degree, c));
                    }
                }
            }
        }
        let mut terms: Vec<(u32, u64, Coefficient)> =
            acc.into_iter().filter(|(_, (_, c))| !c.is_zero()).map(|(k, (d, c))| (d, k, c)).collect();
        // the packed key compares like the exponent vector
        terms.sort_unstable_by_key(|&(d, k, _)| (d, k));
        let terms = terms.into_iter().map(|(d, k, c)| (packing.unpack(k, d), c)).collect();
        Poly::from_sorted(self.ambient, terms)
    }

    /// Multiplication by a single term. Graded lex is a monomial order, so
    /// the shifted terms stay sorted.
    fn mul_term(&self, m: &Monomial, c: &Coefficient, trunc: Truncation) -> Result<Poly> {
        let mut out = Vec::with_capacity(self.terms.len());
        for (mm, cc) in &self.terms {
            let prod = mm.mul(m)?;
            if !trunc.admits(prod.degree() as u64) {
                break;
            }
            out.push((prod, cc * c));
        }
        Ok(Poly::from_sorted(self.ambient, out))
    }

    /// Replaces `X_i` by `images[i]`. The result lives in the images'
    /// ambient, which may have a different variable count.
    ///
    /// Evaluation is a nested Horner scheme, one variable per level, with the
    /// truncation applied after every product. When each image has order
    /// `>= 1` the truncated result equals the low-degree part of the exact
    /// substitution.
    pub fn substitute(&self, images: &[Poly], trunc: Truncation) -> Result<Poly> {
        self.substitute_within(images, trunc, Budget::UNLIMITED)
    }

    /// [`Poly::substitute`] within a [`Budget`], giving up with
    /// `ResourceLimit` (reported at step 0) once it is exceeded.
    pub fn substitute_within(&self, images: &[Poly], trunc: Truncation, budget: Budget) -> Result<Poly> {
        if images.len() != self.nvars() {
            return Err(Error::ArityMismatch { expected: self.nvars(), found: images.len() });
        }
        let Some(first) = images.first() else {
            // zero variables: only constants exist, and there is no target ambient
            return Err(Error::ArityMismatch { expected: 1, found: 0 });
        };
        let target = first.ambient;
        for img in images {
            target.check(&img.ambient)?;
        }
        if target.field != self.field() {
            return Err(Error::MixedFields(self.field(), target.field));
        }
        let terms: Vec<(&Monomial, &Coefficient)> = self.terms.iter().map(|(m, c)| (m, c)).collect();
        if terms.is_empty() {
            return Ok(Poly::zero(target));
        }
        // variables mapped to themselves are left in place
        let fixed: Vec<bool> = images
            .iter()
            .enumerate()
            .map(|(i, img)| target == self.ambient && img.is_var(i))
            .collect();
        let order: Vec<usize> = substitution_order(images, &fixed);
        let ctx = HornerCtx { fixed: &fixed, images, trunc, target, budget, work: Cell::new(0) };
        let out = horner(&ctx, &terms, &order)?;
        log::trace!("substitution: {} terms, {} work", out.term_count(), ctx.work.get());
        Ok(out)
    }

    /// Whether this is exactly the variable `X_{i+1}`.
    fn is_var(&self, i: usize) -> bool {
        match self.terms.as_slice() {
            [(m, c)] => c.is_one() && m.degree() == 1 && m.exps[i] == 1,
            _ => false,
        }
    }

    /// Formal partial derivative with respect to `X_{var+1}`.
    pub fn derivative(&self, var: usize) -> Poly {
        let f = self.field();
        let mut out = Vec::new();
        for (m, c) in &self.terms {
            let e = m.exps[var];
            if e == 0 {
                continue;
            }
            let k = c * &f.from_i64(e as i64);
            if k.is_zero() {
                continue;
            }
            out.push((m.with_exponent(var, e - 1), k));
        }
        // lowering the same exponent in every term preserves graded-lex order
        Poly::from_sorted(self.ambient, out)
    }

    pub fn eval(&self, point: &[Coefficient]) -> Result<Coefficient> {
        if point.len() != self.nvars() {
            return Err(Error::ArityMismatch { expected: self.nvars(), found: point.len() });
        }
        for p in point {
            if p.field() != self.field() {
                return Err(Error::MixedFields(self.field(), p.field()));
            }
        }
        let mut acc = self.field().zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(m.exponents()) {
                if e > 0 {
                    t = &t * &x.pow(e);
                }
            }
            acc += &t;
        }
        Ok(acc)
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Result<Option<Poly>> {
        self.ambient.check(&d.ambient)?;
        let Some((lm_d, lc_d)) = d.leading_term() else {
            return Err(Error::DivisionByZero);
        };
        let lc_inv = lc_d.inv()?;
        let mut rem = self.clone();
        let mut quotient = Vec::new();
        while let Some((lm_r, lc_r)) = rem.leading_term() {
            let Some(m) = lm_r.div(lm_d) else {
                return Ok(None);
            };
            let c = lc_r * &lc_inv;
            let step = d.mul_term(&m, &c, Truncation::Unbounded)?;
            rem = rem.merge(&step, true, Truncation::Unbounded);
            quotient.push((m, c));
        }
        quotient.reverse();
        Ok(Some(Poly::from_sorted(self.ambient, quotient)))
    }

    /// The same polynomial with coefficients mapped into another field.
    pub fn to_field(&self, field: FieldSpec) -> Result<Poly> {
        let ambient = Ambient::new(self.nvars(), field);
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let v = c.map_into(field)?;
            if !v.is_zero() {
                terms.push((m.clone(), v));
            }
        }
        Ok(Poly { ambient, terms })
    }

    /// Writes the polynomial in canonical text form: descending graded-lex
    /// order, explicit `*` and `^`, signs folded into the term sequence.
    pub fn write_with_names(&self, out: &mut impl fmt::Write, names: &[impl AsRef<str>]) -> fmt::Result {
        if self.is_zero() {
            return out.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => out.write_str("-")?,
                (0, false) => {}
                (_, true) => out.write_str(" - ")?,
                (_, false) => out.write_str(" + ")?,
            }
            let abs = if negative { -c } else { c.clone() };
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || m.is_one() {
                factors.push(abs.to_string());
            }
            for (v, &e) in m.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(names[v].as_ref().to_string()),
                    _ => factors.push(format!("{}^{}", names[v].as_ref(), e)),
                }
            }
            out.write_str(&factors.join("*"))?;
        }
        Ok(())
    }

    pub fn to_string_with_names(&self, names: &[impl AsRef<str>]) -> String {
        let mut s = String::new();
        self.write_with_names(&mut s, names).expect("writing to a String");
        s
    }
}

/// Multiplications with at most this many terms in the shorter factor use
/// sorted merges instead of hashing.
const SHORT_FACTOR: usize = 16;

/// Exponent vectors as fixed-width fields of a `u64`, `X_1` in the high
/// bits, so integer order is lexicographic order and addition multiplies.
#[derive(Clone, Copy)]
struct Packing {
    nvars: usize,
    bits: u32,
}

impl Packing {
    /// A packing in which every exponent up to `max_exp` fits.
    fn fitting(nvars: usize, max_exp: u64) -> Option<Packing> {
        if nvars == 0 || nvars > 64 {
            return None;
        }
        let bits = (64 / nvars as u32).min(32);
        (max_exp < 1u64 << bits).then_some(Packing { nvars, bits })
    }

    fn pack(self, m: &Monomial) -> u64 {
        m.exps.iter().fold(0u64, |k, &e| (k << self.bits) | u64::from(e))
    }

    fn unpack(self, key: u64, degree: u32) -> Monomial {
        let mask = (1u64 << self.bits) - 1;
        let exps = (0..self.nvars)
            .map(|i| ((key >> (self.bits as usize * (self.nvars - 1 - i))) & mask) as u32)
            .collect();
        Monomial { exps, degree }
    }
}

/// Combines adjacent equal monomials of a sorted list and drops zeros.
fn combine_sorted(terms: Vec<(Monomial, Coefficient)>) -> Vec<(Monomial, Coefficient)> {
    let mut out: Vec<(Monomial, Coefficient)> = Vec::with_capacity(terms.len());
    for (m, c) in terms {
        match out.last_mut() {
            Some((lm, lc)) if *lm == m => *lc += &c,
            _ => {
                if let Some((_, lc)) = out.last() {
                    if lc.is_zero() {
                        out.pop();
                    }
                }
                out.push((m, c));
            }
        }
    }
    if out.last().is_some_and(|(_, c)| c.is_zero()) {
        out.pop();
    }
    out
}

/// Default variable names `x1 .. xn`.
pub fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_with_names(f, &default_names(self.nvars()))
    }
}

fn substitution_order(images: &[Poly], fixed: &[bool]) -> Vec<usize> {
    (0..images.len()).rev().filter(|&i| !fixed[i]).collect()
}

/// Limits for one substitution: the size of any intermediate result and
/// the number of term operations (one per term product, one per merged
/// term).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_terms: usize,
    pub max_work: u64,
}

impl Budget {
    pub const UNLIMITED: Budget = Budget { max_terms: usize::MAX, max_work: u64::MAX };
}

struct HornerCtx<'a> {
    fixed: &'a [bool],
    images: &'a [Poly],
    trunc: Truncation,
    target: Ambient,
    budget: Budget,
    work: Cell<u64>,
}

impl HornerCtx<'_> {
    fn spend(&self, ops: usize, acc: &Poly) -> Result<()> {
        let work = self.work.get().saturating_add(ops as u64);
        self.work.set(work);
        if work > self.budget.max_work {
            return Err(Error::ResourceLimit {
                step: 0,
                resource: Resource::Work,
                used: work,
                ceiling: self.budget.max_work,
            });
        }
        if acc.terms.len() > self.budget.max_terms {
            return Err(Error::ResourceLimit {
                step: 0,
                resource: Resource::Terms,
                used: acc.terms.len() as u64,
                ceiling: self.budget.max_terms as u64,
            });
        }
        Ok(())
    }
}

fn horner(ctx: &HornerCtx<'_>, terms: &[(&Monomial, &Coefficient)], order: &[usize]) -> Result<Poly> {
    let trunc = ctx.trunc;
    let Some((&var, rest)) = order.split_first() else {
        if !ctx.fixed.contains(&true) {
            // every exponent is used up: a single constant remains
            debug_assert_eq!(terms.len(), 1);
            let c = terms.iter().fold(ctx.target.field.zero(), |acc, (_, c)| &acc + c);
            return Ok(Poly::constant(ctx.target, c).truncate(trunc));
        }
        // only fixed variables remain; zeroing the same exponents keeps the order
        let out = terms
            .iter()
            .map(|&(m, c)| {
                let exps = m.exps.iter().zip(ctx.fixed).map(|(&e, &keep)| if keep { e } else { 0 });
                (Monomial::from_exponents(exps), c.clone())
            })
            .filter(|(m, _)| trunc.admits(m.degree() as u64))
            .collect();
        return Ok(Poly { ambient: ctx.target, terms: out });
    };
    let mut groups: BTreeMap<u32, Vec<(&Monomial, &Coefficient)>> = BTreeMap::new();
    for &(m, c) in terms {
        groups.entry(m.exps[var]).or_default().push((m, c));
    }
    if groups.len() == 1 && groups.contains_key(&0) {
        return horner(ctx, terms, rest);
    }
    let max_e = *groups.keys().next_back().unwrap();
    let image = &ctx.images[var];
    let mut acc = Poly::zero(ctx.target);
    for e in (0..=max_e).rev() {
        let mut ops = 0;
        if !acc.is_zero() {
            ops += acc.terms.len() * image.terms.len();
            acc = acc.mul_unchecked(image, trunc)?;
        }
        if let Some(group) = groups.get(&e) {
            let inner = horner(ctx, group, rest)?;
            ops += acc.terms.len() + inner.terms.len();
            acc = acc.merge_owned(inner, trunc);
        }
        ctx.spend(ops, &acc)?;
    }
    Ok(acc)
}

// Infallible operators for untruncated arithmetic; they panic on ambient
// mismatch, which is a programming error at every internal call site.

impl std::ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        Poly::add(self, rhs, Truncation::Unbounded).expect("ambient mismatch in +")
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        Poly::sub(self, rhs, Truncation::Unbounded).expect("ambient mismatch in -")
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        Poly::mul(self, rhs, Truncation::Unbounded).expect("ambient mismatch in *")
    }
}

impl std::ops::Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q3() -> Ambient {
        Ambient::new(3, FieldSpec::Rationals)
    }

    fn x(i: usize) -> Poly {
        Poly::var(q3(), i)
    }

    fn c(v: i64) -> Poly {
        Poly::constant(q3(), FieldSpec::Rationals.from_i64(v))
    }

    fn nagata_sigma() -> Poly {
        // X1 X3 + X2^2
        &(&x(0) * &x(2)) + &(&x(1) * &x(1))
    }

    fn nagata_f1() -> Poly {
        let s = nagata_sigma();
        let a = &(&c(2) * &s) * &x(1);
        let b = &(&s * &s) * &x(2);
        &(&x(0) - &a) - &b
    }

    #[test]
    fn packed_and_hashed_products_agree() {
        let a = (0..20).fold(Poly::zero(q3()), |acc, k| &(&acc + &x(k % 3).pow(k as u32, Truncation::Unbounded).unwrap()) + &c(k as i64 - 7));
        let b = &(&nagata_f1() * &nagata_sigma()) + &(&x(1) * &c(-3));
        for trunc in [Truncation::Unbounded, Truncation::Degree(9)] {
            let packing = Packing::fitting(3, 64).unwrap();
            assert_eq!(a.mul_packed(&b, packing, trunc), a.mul_hashed(&b, trunc).unwrap());
            assert_eq!(b.mul_packed(&a, packing, trunc), a.mul_hashed(&b, trunc).unwrap());
        }
    }

    #[test]
    fn exponents_too_wide_to_pack() {
        let big = x(0).pow(1 << 21, Truncation::Unbounded).unwrap();
        assert!(Packing::fitting(3, 1 << 21).is_none());
        // long enough to skip the shifted-copy path
        let long = (0..18).fold(Poly::zero(q3()), |acc, k| &acc + &x(2).pow(k, Truncation::Unbounded).unwrap());
        let p = &long * &(&big + &x(1));
        assert_eq!(p.term_count(), 36);
        assert_eq!(p.degree(), ExtDegree::Finite((1 << 21) + 17));
        assert_eq!(p.coefficient(&Monomial::from_exponents([1 << 21, 0, 17])), FieldSpec::Rationals.one());
    }

    #[test]
    fn arithmetic_examples() {
        let s = &x(0) + &x(1);
        assert!((&s - &s).is_zero());
        let sq = &nagata_sigma() * &nagata_sigma();
        let expected = Poly::from_terms(
            q3(),
            [
                (Monomial::from_exponents([2, 0, 2]), FieldSpec::Rationals.from_i64(1)),
                (Monomial::from_exponents([1, 2, 1]), FieldSpec::Rationals.from_i64(2)),
                (Monomial::from_exponents([0, 4, 0]), FieldSpec::Rationals.from_i64(1)),
            ],
        )
        .unwrap();
        assert_eq!(sq, expected);
        let x2sq = &x(1) * &x(1);
        assert!(x2sq.mul(&x2sq, Truncation::Degree(3)).unwrap().is_zero());
        assert_eq!(x2sq.mul(&x2sq, Truncation::Degree(4)).unwrap().degree(), ExtDegree::Finite(4));
    }

    #[test]
    fn degree_and_order() {
        let z = Poly::zero(q3());
        assert_eq!(z.degree(), ExtDegree::NegInf);
        assert_eq!(z.order(), ExtDegree::PosInf);
        assert_eq!(nagata_f1().degree(), ExtDegree::Finite(5));
        let h2 = &nagata_sigma() * &x(2);
        assert_eq!(h2.order(), ExtDegree::Finite(3));
        assert_eq!((&x(1) + &(&x(0) * &x(2))).order(), ExtDegree::Finite(1));
        let a5 = Ambient::new(5, FieldSpec::Rationals);
        let h4 = &(&Poly::var(a5, 0) * &Poly::var(a5, 4)) - &(&Poly::var(a5, 1) * &Poly::var(a5, 2));
        assert_eq!(h4.degree(), ExtDegree::Finite(2));
    }

    #[test]
    fn homogeneous_components() {
        let p = &x(0) + &(&x(0) * &x(2));
        assert_eq!(p.homogeneous_component(2), &x(0) * &x(2));
        assert!(p.homogeneous_component(7).is_zero());
        let expected = &(&c(-2) * &(&(&x(0) * &x(1)) * &x(2))) - &(&c(2) * &(&(&x(1) * &x(1)) * &x(1)));
        assert_eq!(nagata_f1().homogeneous_component(3), expected);
        assert_eq!(nagata_f1().layer_degrees(), vec![1, 3, 5]);
    }

    #[test]
    fn substitution_examples() {
        // X_i -> F_i
        let f = [&x(0) + &(&x(1) * &x(1)), x(1), x(2)];
        for (i, fi) in f.iter().enumerate() {
            assert_eq!(x(i).substitute(&f, Truncation::Unbounded).unwrap(), *fi);
        }
        // H_1(F) - H_1 = F_2^2 - X_2^2 = 0
        let h1 = &x(1) * &x(1);
        let p2 = &h1.substitute(&f, Truncation::Unbounded).unwrap() - &h1;
        assert!(p2.is_zero());
        // identity images
        let id = [x(0), x(1), x(2)];
        assert_eq!(nagata_f1().substitute(&id, Truncation::Unbounded).unwrap(), nagata_f1());
        // arity
        assert!(matches!(
            nagata_f1().substitute(&id[..2], Truncation::Unbounded),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn substitution_into_larger_ambient() {
        let a2 = Ambient::new(2, FieldSpec::Rationals);
        let p = &Poly::var(a2, 0) * &Poly::var(a2, 1);
        let a4 = Ambient::new(4, FieldSpec::Rationals);
        let images = [Poly::var(a4, 2), Poly::var(a4, 3)];
        let r = p.substitute(&images, Truncation::Unbounded).unwrap();
        assert_eq!(r.ambient(), a4);
        assert_eq!(r, &Poly::var(a4, 2) * &Poly::var(a4, 3));
    }

    #[test]
    fn affine_substitution_with_constants() {
        // P = X1 + X2 + a under F = (2X1 + X2 + a, X1 + X2 + b), a = 1, b = 2
        let a2 = Ambient::new(2, FieldSpec::Rationals);
        let k = |v| Poly::constant(a2, FieldSpec::Rationals.from_i64(v));
        let (x1, x2) = (Poly::var(a2, 0), Poly::var(a2, 1));
        let f = [&(&(&k(2) * &x1) + &x2) + &k(1), &(&x1 + &x2) + &k(2)];
        let p = &(&x1 + &x2) + &k(1);
        let r = p.substitute(&f, Truncation::Unbounded).unwrap();
        // 3X1 + 2X2 + 2a + b with a = 1, b = 2
        assert_eq!(r, &(&(&k(3) * &x1) + &(&k(2) * &x2)) + &k(4));
    }

    #[test]
    fn derivatives() {
        let f = nagata_f1();
        // d/dX1 of X1 - 2 X1 X2 X3 - 2 X2^3 - X1^2 X3^3 - 2 X1 X2^2 X3^2 - X2^4 X3
        let expected = &(&(&c(1) - &(&c(2) * &(&x(1) * &x(2))))
            - &(&c(2) * &(&(&x(0) * &x(2)) * &(&x(2) * &x(2)))))
            - &(&c(2) * &(&(&x(1) * &x(1)) * &(&x(2) * &x(2))));
        assert_eq!(f.derivative(0), expected);
        let gf3 = Ambient::new(1, FieldSpec::prime(3).unwrap());
        let cube = Poly::var(gf3, 0).pow(3, Truncation::Unbounded).unwrap();
        assert!(cube.derivative(0).is_zero());
    }

    #[test]
    fn exact_division() {
        let a = &nagata_sigma() * &nagata_f1();
        assert_eq!(a.div_exact(&nagata_sigma()).unwrap().unwrap(), nagata_f1());
        assert_eq!(a.div_exact(&nagata_f1()).unwrap().unwrap(), nagata_sigma());
        assert!((&a + &c(1)).div_exact(&nagata_sigma()).unwrap().is_none());
        assert!(matches!(a.div_exact(&Poly::zero(q3())), Err(Error::DivisionByZero)));
    }

    #[test]
    fn canonical_text() {
        let names = ["x1", "x2", "x3"];
        assert_eq!(Poly::zero(q3()).to_string_with_names(&names), "0");
        assert_eq!(
            nagata_f1().to_string_with_names(&names),
            "-x1^2*x3^3 - 2*x1*x2^2*x3^2 - x2^4*x3 - 2*x1*x2*x3 - 2*x2^3 + x1"
        );
        let eighth = FieldSpec::Rationals
            .from_fraction(&(-1).into(), &8.into())
            .unwrap();
        let p = &x(1) + &Poly::monomial(q3(), Monomial::from_exponents([1, 4, 0]), eighth);
        assert_eq!(p.to_string(), "-1/8*x1*x2^4 + x2");
        assert_eq!((&x(0) - &c(1)).to_string(), "x1 - 1");
    }

    #[test]
    fn ambient_checks() {
        let other = Poly::var(Ambient::new(2, FieldSpec::Rationals), 0);
        assert!(matches!(x(0).add(&other, Truncation::Unbounded), Err(Error::AmbientMismatch { .. })));
        let gf = Poly::var(Ambient::new(3, FieldSpec::PrimeField(5)), 0);
        assert!(matches!(x(0).mul(&gf, Truncation::Unbounded), Err(Error::AmbientMismatch { .. })));
        assert_eq!(&x(0) + &x(1), &x(1) + &x(0));
        assert_ne!(x(0), &c(2) * &x(0));
        assert_eq!(Poly::zero(q3()), Poly::from_terms(q3(), []).unwrap());
    }

    #[test]
    fn exponent_overflow_is_an_error() {
        let a1 = Ambient::new(1, FieldSpec::Rationals);
        let big = Poly::monomial(a1, Monomial::from_exponents([u32::MAX]), FieldSpec::Rationals.one());
        assert!(matches!(big.mul(&Poly::var(a1, 0), Truncation::Unbounded), Err(Error::ExponentOverflow)));
        let deg16 = Poly::var(a1, 0).pow(1 << 16, Truncation::Unbounded).unwrap();
        assert_eq!(deg16.degree(), ExtDegree::Finite(65_536));
    }
}
