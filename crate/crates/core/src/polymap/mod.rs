//! Polynomial maps `F: K^n -> K^n`: composition, Jacobians, the Keller
//! test, reduction to the normal form `F = X + H`, triangularity and
//! linear conjugation.

mod matrix;

use std::fmt;

use rayon::prelude::*;

pub use matrix::{ConstMatrix, PolyMatrix};

use crate::coeff::{Coefficient, FieldSpec};
use crate::error::{Error, Result};
use crate::poly::{default_names, Ambient, Budget, ExtDegree, Monomial, Poly, Truncation};

/// `n` polynomials in `n` variables over one ambient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMap {
    ambient: Ambient,
    components: Vec<Poly>,
}

impl PolyMap {
    pub fn new(components: Vec<Poly>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::ArityMismatch { expected: 1, found: 0 });
        };
        let ambient = first.ambient();
        for c in &components {
            ambient.check(&c.ambient())?;
        }
        if components.len() != ambient.nvars {
            return Err(Error::ArityMismatch { expected: ambient.nvars, found: components.len() });
        }
        Ok(PolyMap { ambient, components })
    }

    pub fn identity(ambient: Ambient) -> Self {
        let components = (0..ambient.nvars).map(|i| Poly::var(ambient, i)).collect();
        PolyMap { ambient, components }
    }

    /// The linear map `X -> M X`.
    pub fn linear(m: &ConstMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
        }
        let ambient = Ambient::new(m.rows(), m.field());
        let components = (0..m.rows())
            .map(|i| {
                Poly::from_terms(
                    ambient,
                    (0..m.cols()).map(|j| (Monomial::var(ambient.nvars, j), m.get(i, j).clone())),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap { ambient, components })
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

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Poly {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<Poly> {
        self.components
    }

    pub fn is_identity(&self) -> bool {
        *self == PolyMap::identity(self.ambient)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    /// `deg F = max deg F_i`.
    pub fn degree(&self) -> ExtDegree {
        self.components.iter().map(Poly::degree).max().unwrap_or(ExtDegree::NegInf)
    }

    pub fn term_count(&self) -> usize {
        self.components.iter().map(Poly::term_count).sum()
    }

    pub fn add(&self, other: &PolyMap) -> Result<PolyMap> {
        self.zip_with(other, |a, b| a.add(b, Truncation::Unbounded))
    }

    pub fn sub(&self, other: &PolyMap) -> Result<PolyMap> {
        self.zip_with(other, |a, b| a.sub(b, Truncation::Unbounded))
    }

    fn zip_with(
        &self,
        other: &PolyMap,
        op: impl Fn(&Poly, &Poly) -> Result<Poly>,
    ) -> Result<PolyMap> {
        self.ambient.check(&other.ambient)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| op(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap { ambient: self.ambient, components })
    }

    /// `self ∘ inner`, i.e. `X -> self(inner(X))`.
    pub fn compose(&self, inner: &PolyMap, trunc: Truncation) -> Result<PolyMap> {
        self.ambient.check(&inner.ambient)?;
        let components = self
            .components
            .par_iter()
            .map(|c| c.substitute(&inner.components, trunc))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap { ambient: self.ambient, components })
    }

    /// [`PolyMap::compose`] with a [`Budget`] for each component.
    pub fn compose_within(&self, inner: &PolyMap, trunc: Truncation, budget: Budget) -> Result<PolyMap> {
        self.ambient.check(&inner.ambient)?;
        let components = self
            .components
            .par_iter()
            .map(|c| c.substitute_within(&inner.components, trunc, budget))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap { ambient: self.ambient, components })
    }

    /// `F^k`, with `F^0 = Id`.
    pub fn iterate(&self, k: usize, trunc: Truncation) -> Result<PolyMap> {
        let mut acc = PolyMap::identity(self.ambient);
        for _ in 0..k {
            acc = acc.compose(self, trunc)?;
        }
        Ok(acc)
    }

    pub fn truncate(&self, trunc: Truncation) -> PolyMap {
        let components = self.components.iter().map(|c| c.truncate(trunc)).collect();
        PolyMap { ambient: self.ambient, components }
    }

    /// `J_F = (dF_i / dX_j)`.
    pub fn jacobian(&self) -> PolyMatrix {
        let n = self.nvars();
        let entries = (0..n * n)
            .map(|k| self.components[k / n].derivative(k % n))
            .collect();
        PolyMatrix::new(n, n, entries).expect("square by construction")
    }

    pub fn is_keller(&self) -> Result<KellerStatus> {
        let det = self.jacobian().determinant()?;
        if det.is_constant() && !det.is_zero() {
            Ok(KellerStatus::Yes(det.constant_term()))
        } else {
            Ok(KellerStatus::No(det))
        }
    }

    /// Reduces to `A^{-1} (F - F(0))` with `A = J_F(0)`, so that the
    /// result fixes the origin and has identity linear part.
    pub fn normalize(&self) -> Result<NormalForm> {
        let n = self.nvars();
        let field = self.field();
        let translation: Vec<Coefficient> =
            self.components.iter().map(Poly::constant_term).collect();
        let mut linear = ConstMatrix::zero(n, n, field);
        for (i, c) in self.components.iter().enumerate() {
            for j in 0..n {
                linear.set(i, j, c.coefficient(&Monomial::var(n, j)));
            }
        }
        let linear_inv = linear.inverse().map_err(|e| match e {
            Error::SingularMatrix => Error::SingularLinearPart,
            other => other,
        })?;
        let shifted: Vec<Poly> = self
            .components
            .iter()
            .zip(&translation)
            .map(|(c, t)| c - &Poly::constant(self.ambient, t.clone()))
            .collect();
        let mut map = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = Poly::zero(self.ambient);
            for (j, s) in shifted.iter().enumerate() {
                let k = linear_inv.get(i, j);
                if !k.is_zero() {
                    acc = &acc + &s.scale(k);
                }
            }
            map.push(acc);
        }
        NormalForm::from_parts(PolyMap { ambient: self.ambient, components: map }, linear, translation)
    }

    /// Upper: each `F_i` uses only `X_i .. X_n`; lower: only `X_1 .. X_i`.
    /// A map that is both (e.g. diagonal) reports upper.
    pub fn is_triangular(&self) -> Triangularity {
        let n = self.nvars();
        let uses = |i: usize, vars: std::ops::Range<usize>| {
            vars.into_iter().any(|v| self.components[i].uses_var(v))
        };
        if (0..n).all(|i| !uses(i, 0..i)) {
            Triangularity::Upper
        } else if (0..n).all(|i| !uses(i, i + 1..n)) {
            Triangularity::Lower
        } else {
            Triangularity::NotTriangular
        }
    }

    /// `T^{-1} ∘ F ∘ T`, after checking that `T ∘ T^{-1} = Id`.
    pub fn conjugate(&self, t: &PolyMap, t_inv: &PolyMap) -> Result<PolyMap> {
        if !t.compose(t_inv, Truncation::Unbounded)?.is_identity() {
            return Err(Error::NotInverse);
        }
        t_inv.compose(&self.compose(t, Truncation::Unbounded)?, Truncation::Unbounded)
    }

    pub fn to_field(&self, field: FieldSpec) -> Result<PolyMap> {
        PolyMap::new(self.components.iter().map(|c| c.to_field(field)).collect::<Result<_>>()?)
    }

    pub fn to_string_with_names(&self, names: &[impl AsRef<str>]) -> String {
        let parts: Vec<String> =
            self.components.iter().map(|c| c.to_string_with_names(names)).collect();
        format!("({})", parts.join(", "))
    }
}

impl fmt::Display for PolyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_with_names(&default_names(self.nvars())))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KellerStatus {
    /// `det J_F` is this nonzero constant.
    Yes(Coefficient),
    /// `det J_F` is not a nonzero constant; the determinant is attached.
    No(Poly),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Triangularity {
    Upper,
    Lower,
    NotTriangular,
}

impl fmt::Display for Triangularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Triangularity::Upper => "upper",
            Triangularity::Lower => "lower",
            Triangularity::NotTriangular => "none",
        })
    }
}

/// A map `F = X + H` with `F(0) = 0` and identity linear part, together with
/// the affine change `F_orig = A F + c` it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    map: PolyMap,
    h: PolyMap,
    orders: Vec<ExtDegree>,
    degrees: Vec<ExtDegree>,
    linear_part: ConstMatrix,
    translation: Vec<Coefficient>,
}

impl NormalForm {
    fn from_parts(map: PolyMap, linear_part: ConstMatrix, translation: Vec<Coefficient>) -> Result<Self> {
        let h = map.sub(&PolyMap::identity(map.ambient()))?;
        let orders: Vec<ExtDegree> = h.components().iter().map(Poly::order).collect();
        let degrees = h.components().iter().map(Poly::degree).collect();
        debug_assert!(orders.iter().all(|o| *o >= ExtDegree::Finite(2)));
        Ok(NormalForm { map, h, orders, degrees, linear_part, translation })
    }

    /// Treats an already-normalized map as its own normal form.
    pub fn from_map(map: &PolyMap) -> Result<Self> {
        let nf = map.normalize()?;
        if nf.map != *map {
            return Err(Error::SingularLinearPart);
        }
        Ok(nf)
    }

    pub fn map(&self) -> &PolyMap {
        &self.map
    }

    /// `H = F - X`.
    pub fn h(&self) -> &PolyMap {
        &self.h
    }

    pub fn nvars(&self) -> usize {
        self.map.nvars()
    }

    /// Per-component order of vanishing `d_i` (`inf` where `H_i = 0`).
    pub fn orders(&self) -> &[ExtDegree] {
        &self.orders
    }

    /// Per-component degree `D_i` (`-inf` where `H_i = 0`).
    pub fn degrees(&self) -> &[ExtDegree] {
        &self.degrees
    }

    /// `d = min d_i`; `inf` when `H = 0`.
    pub fn min_order(&self) -> ExtDegree {
        self.orders.iter().copied().min().unwrap_or(ExtDegree::PosInf)
    }

    /// `D = max D_i`; `-inf` when `H = 0`.
    pub fn max_degree(&self) -> ExtDegree {
        self.degrees.iter().copied().max().unwrap_or(ExtDegree::NegInf)
    }

    pub fn is_identity(&self) -> bool {
        self.h.is_zero()
    }

    pub fn linear_part(&self) -> &ConstMatrix {
        &self.linear_part
    }

    pub fn translation(&self) -> &[Coefficient] {
        &self.translation
    }

    /// Given an inverse `G` of the normal form, returns the inverse of the
    /// original map: `F_orig^{-1}(y) = G(A^{-1}(y - c))`.
    pub fn denormalize_inverse(&self, g: &PolyMap) -> Result<PolyMap> {
        let a_inv = self.linear_part.inverse()?;
        let ambient = self.map.ambient();
        let lin = PolyMap::linear(&a_inv)?;
        let shift = PolyMap::new(
            (0..self.nvars())
                .map(|i| {
                    &Poly::var(ambient, i) - &Poly::constant(ambient, self.translation[i].clone())
                })
                .collect(),
        )?;
        let pre = lin.compose(&shift, Truncation::Unbounded)?;
        g.compose(&pre, Truncation::Unbounded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amb(n: usize) -> Ambient {
        Ambient::new(n, FieldSpec::Rationals)
    }

    fn k(a: Ambient, v: i64) -> Poly {
        Poly::constant(a, FieldSpec::Rationals.from_i64(v))
    }

    fn nagata() -> PolyMap {
        let a = amb(3);
        let x = |i| Poly::var(a, i);
        let s = &(&x(0) * &x(2)) + &(&x(1) * &x(1));
        let f1 = &(&x(0) - &(&(&k(a, 2) * &s) * &x(1))) - &(&(&s * &s) * &x(2));
        let f2 = &x(1) + &(&s * &x(2));
        PolyMap::new(vec![f1, f2, x(2)]).unwrap()
    }

    #[test]
    fn compose_with_identity() {
        let f = nagata();
        let id = PolyMap::identity(f.ambient());
        assert_eq!(f.compose(&id, Truncation::Unbounded).unwrap(), f);
        assert_eq!(id.compose(&f, Truncation::Unbounded).unwrap(), f);
        assert_eq!(f.iterate(0, Truncation::Unbounded).unwrap(), id);
        assert_eq!(f.iterate(1, Truncation::Unbounded).unwrap(), f);
    }

    #[test]
    fn jacobian_examples() {
        let a = amb(2);
        assert_eq!(PolyMap::identity(a).jacobian(), PolyMatrix::identity(2, a));
        let h = PolyMap::new(vec![&Poly::var(a, 1) * &Poly::var(a, 1), Poly::zero(a)]).unwrap();
        let j = h.jacobian();
        assert!(j.get(0, 0).is_zero());
        assert_eq!(*j.get(0, 1), &k(a, 2) * &Poly::var(a, 1));
        assert!(j.get(1, 0).is_zero() && j.get(1, 1).is_zero());
    }

    #[test]
    fn keller_examples() {
        assert_eq!(
            PolyMap::identity(amb(3)).is_keller().unwrap(),
            KellerStatus::Yes(FieldSpec::Rationals.one())
        );
        assert_eq!(nagata().is_keller().unwrap(), KellerStatus::Yes(FieldSpec::Rationals.one()));
        let a = amb(2);
        let f = PolyMap::new(vec![&Poly::var(a, 0) * &Poly::var(a, 0), Poly::var(a, 1)]).unwrap();
        assert_eq!(f.is_keller().unwrap(), KellerStatus::No(&k(a, 2) * &Poly::var(a, 0)));
    }

    #[test]
    fn fibonacci_determinant() {
        let a = amb(2);
        let (x1, x2) = (Poly::var(a, 0), Poly::var(a, 1));
        let f = PolyMap::new(vec![
            &(&(&k(a, 2) * &x1) + &x2) + &k(a, 1),
            &(&x1 + &x2) + &k(a, 2),
        ])
        .unwrap();
        assert_eq!(f.jacobian().determinant().unwrap(), k(a, 1));
    }

    #[test]
    fn normalize_examples() {
        let nf = nagata().normalize().unwrap();
        assert_eq!(nf.map(), &nagata());
        assert_eq!(nf.min_order(), ExtDegree::Finite(3));
        assert_eq!(nf.max_degree(), ExtDegree::Finite(5));
        assert_eq!(nf.orders()[2], ExtDegree::PosInf);
        assert_eq!(nf.degrees()[2], ExtDegree::NegInf);

        let a = amb(3);
        let translation = PolyMap::new((0..3).map(|i| &Poly::var(a, i) + &k(a, 7)).collect()).unwrap();
        let nf = translation.normalize().unwrap();
        assert!(nf.is_identity());
        assert_eq!(nf.min_order(), ExtDegree::PosInf);
        assert_eq!(nf.max_degree(), ExtDegree::NegInf);

        let a2 = amb(2);
        let sing = PolyMap::new(vec![&Poly::var(a2, 0) * &Poly::var(a2, 0), Poly::var(a2, 1)]).unwrap();
        assert!(matches!(sing.normalize(), Err(Error::SingularLinearPart)));
    }

    #[test]
    fn normalize_then_denormalize_inverse() {
        // F = A (X + H) + c with H = (X2^2, 0), A = [[2,1],[1,1]], c = (1, -3)
        let a = amb(2);
        let (x1, x2) = (Poly::var(a, 0), Poly::var(a, 1));
        let inner = PolyMap::new(vec![&x1 + &(&x2 * &x2), x2.clone()]).unwrap();
        let lin = PolyMap::linear(&ConstMatrix::from_i64(FieldSpec::Rationals, &[vec![2, 1], vec![1, 1]]).unwrap()).unwrap();
        let shift = PolyMap::new(vec![&x1 + &k(a, 1), &x2 - &k(a, 3)]).unwrap();
        let f = shift
            .compose(&lin.compose(&inner, Truncation::Unbounded).unwrap(), Truncation::Unbounded)
            .unwrap();
        let nf = f.normalize().unwrap();
        assert_eq!(nf.map(), &inner);
        let g_nf = PolyMap::new(vec![&x1 - &(&x2 * &x2), x2.clone()]).unwrap();
        let g = nf.denormalize_inverse(&g_nf).unwrap();
        assert!(g.compose(&f, Truncation::Unbounded).unwrap().is_identity());
        assert!(f.compose(&g, Truncation::Unbounded).unwrap().is_identity());
    }

    #[test]
    fn triangularity() {
        let a = amb(2);
        let (x1, x2) = (Poly::var(a, 0), Poly::var(a, 1));
        let g = PolyMap::new(vec![&x1 + &x2.pow(3, Truncation::Unbounded).unwrap(), x2.clone()]).unwrap();
        assert_eq!(g.is_triangular(), Triangularity::Upper);
        let h = PolyMap::new(vec![x1.clone(), &x2 + &(&x1 * &x1)]).unwrap();
        assert_eq!(h.is_triangular(), Triangularity::Lower);
        assert_eq!(nagata().is_triangular(), Triangularity::NotTriangular);
    }

    #[test]
    fn conjugation_by_swap() {
        let a = amb(2);
        let (x1, x2) = (Poly::var(a, 0), Poly::var(a, 1));
        let f = PolyMap::new(vec![&x1 + &(&x2 * &x2), x2.clone()]).unwrap();
        let swap = PolyMap::new(vec![x2.clone(), x1.clone()]).unwrap();
        let c = f.conjugate(&swap, &swap).unwrap();
        assert_eq!(c, PolyMap::new(vec![x1.clone(), &x2 + &(&x1 * &x1)]).unwrap());
        assert_eq!(c.is_triangular(), Triangularity::Lower);
        let id = PolyMap::identity(a);
        assert_eq!(f.conjugate(&id, &id).unwrap(), f);
        assert!(matches!(f.conjugate(&swap, &id), Err(Error::NotInverse)));
    }
}
