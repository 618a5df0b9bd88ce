//! Matrices over the polynomial ring and over the coefficient field.

use std::fmt;

use rayon::prelude::*;

use crate::coeff::{Coefficient, FieldSpec};
use crate::error::{Error, Result};
use crate::poly::{Ambient, Poly, Truncation};

/// Row-major matrix of polynomials over one ambient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    ambient: Ambient,
    entries: Vec<Poly>,
}

impl PolyMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Poly>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ArityMismatch { expected: rows * cols, found: entries.len() });
        }
        let Some(first) = entries.first() else {
            return Err(Error::ArityMismatch { expected: 1, found: 0 });
        };
        let ambient = first.ambient();
        for e in &entries {
            ambient.check(&e.ambient())?;
        }
        Ok(PolyMatrix { rows, cols, ambient, entries })
    }

    pub fn zero(rows: usize, cols: usize, ambient: Ambient) -> Self {
        PolyMatrix { rows, cols, ambient, entries: vec![Poly::zero(ambient); rows * cols] }
    }

    pub fn identity(n: usize, ambient: Ambient) -> Self {
        let mut m = Self::zero(n, n, ambient);
        for i in 0..n {
            m.entries[i * n + i] = Poly::one(ambient);
        }
        m
    }

    /// Embeds a constant matrix.
    pub fn from_const(m: &ConstMatrix, ambient: Ambient) -> Self {
        let entries = m.entries.iter().map(|c| Poly::constant(ambient, c.clone())).collect();
        PolyMatrix { rows: m.rows, cols: m.cols, ambient, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn get(&self, r: usize, c: usize) -> &Poly {
        &self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[Poly] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Poly::is_zero)
    }

    /// First nonzero entry in row-major order.
    pub fn first_nonzero(&self) -> Option<(usize, usize, &Poly)> {
        self.entries
            .iter()
            .position(|p| !p.is_zero())
            .map(|k| (k / self.cols, k % self.cols, &self.entries[k]))
    }

    pub fn is_strictly_upper_triangular(&self) -> bool {
        (0..self.rows).all(|r| (0..self.cols.min(r + 1)).all(|c| self.get(r, c).is_zero()))
    }

    pub fn mul(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.ambient.check(&other.ambient)?;
        if self.cols != other.rows {
            return Err(Error::ArityMismatch { expected: self.cols, found: other.rows });
        }
        let (n, m, k) = (self.rows, other.cols, self.cols);
        let entries = (0..n * m)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                let mut acc = Poly::zero(self.ambient);
                for t in 0..k {
                    let (a, b) = (self.get(i, t), other.get(t, j));
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = &acc + &(a * b);
                }
                acc
            })
            .collect();
        Ok(PolyMatrix { rows: n, cols: m, ambient: self.ambient, entries })
    }

    /// Applies a substitution to every entry; the result lives in the
    /// images' ambient.
    pub fn substitute(&self, images: &[Poly], trunc: Truncation) -> Result<PolyMatrix> {
        let entries = self
            .entries
            .par_iter()
            .map(|p| p.substitute(images, trunc))
            .collect::<Result<Vec<_>>>()?;
        let ambient = images.first().map_or(self.ambient, Poly::ambient);
        Ok(PolyMatrix { rows: self.rows, cols: self.cols, ambient, entries })
    }

    /// Evaluates every entry at a point of `K^n`.
    pub fn eval(&self, point: &[Coefficient]) -> Result<ConstMatrix> {
        let entries = self.entries.iter().map(|p| p.eval(point)).collect::<Result<Vec<_>>>()?;
        Ok(ConstMatrix { rows: self.rows, cols: self.cols, field: self.ambient.field, entries })
    }

    /// Determinant over the polynomial ring: cofactor expansion up to 4x4,
    /// fraction-free Bareiss elimination above that.
    pub fn determinant(&self) -> Result<Poly> {
        if self.rows != self.cols {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        if self.rows <= 4 {
            Ok(self.determinant_cofactor())
        } else {
            self.determinant_bareiss()
        }
    }

    pub(crate) fn determinant_cofactor(&self) -> Poly {
        let cols: Vec<usize> = (0..self.cols).collect();
        self.laplace(0, &cols)
    }

    fn laplace(&self, row: usize, cols: &[usize]) -> Poly {
        if cols.is_empty() {
            return Poly::one(self.ambient);
        }
        let mut acc = Poly::zero(self.ambient);
        for (k, &c) in cols.iter().enumerate() {
            let entry = self.get(row, c);
            if entry.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let term = entry * &self.laplace(row + 1, &rest);
            acc = if k % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        acc
    }

    pub(crate) fn determinant_bareiss(&self) -> Result<Poly> {
        let n = self.rows;
        if n == 0 {
            return Ok(Poly::one(self.ambient));
        }
        let mut m: Vec<Vec<Poly>> = (0..n)
            .map(|r| (0..n).map(|c| self.get(r, c).clone()).collect())
            .collect();
        let mut negate = false;
        let mut prev = Poly::one(self.ambient);
        for k in 0..n - 1 {
            if m[k][k].is_zero() {
                let Some(swap) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                    return Ok(Poly::zero(self.ambient));
                };
                m.swap(k, swap);
                negate = !negate;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &(&m[i][j] * &m[k][k]) - &(&m[i][k] * &m[k][j]);
                    m[i][j] = num
                        .div_exact(&prev)?
                        .expect("Bareiss quotients are exact over an integral domain");
                }
            }
            prev = m[k][k].clone();
        }
        let det = m[n - 1][n - 1].clone();
        Ok(if negate { det.neg() } else { det })
    }
}

impl fmt::Display for PolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Row-major matrix over the coefficient field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstMatrix {
    rows: usize,
    cols: usize,
    field: FieldSpec,
    entries: Vec<Coefficient>,
}

impl ConstMatrix {
    pub fn zero(rows: usize, cols: usize, field: FieldSpec) -> Self {
        ConstMatrix { rows, cols, field, entries: vec![field.zero(); rows * cols] }
    }

    pub fn identity(n: usize, field: FieldSpec) -> Self {
        let mut m = Self::zero(n, n, field);
        for i in 0..n {
            m.entries[i * n + i] = field.one();
        }
        m
    }

    pub fn from_rows(field: FieldSpec, rows: Vec<Vec<Coefficient>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(nrows * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::ArityMismatch { expected: ncols, found: row.len() });
            }
            for c in row {
                if c.field() != field {
                    return Err(Error::MixedFields(field, c.field()));
                }
                entries.push(c);
            }
        }
        Ok(ConstMatrix { rows: nrows, cols: ncols, field, entries })
    }

    pub fn from_i64(field: FieldSpec, rows: &[Vec<i64>]) -> Result<Self> {
        Self::from_rows(
            field,
            rows.iter().map(|r| r.iter().map(|&v| field.from_i64(v)).collect()).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn get(&self, r: usize, c: usize) -> &Coefficient {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Coefficient) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Coefficient::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.rows, self.field)
    }

    pub fn mul(&self, other: &ConstMatrix) -> Result<ConstMatrix> {
        if self.field != other.field {
            return Err(Error::MixedFields(self.field, other.field));
        }
        if self.cols != other.rows {
            return Err(Error::ArityMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Self::zero(self.rows, other.cols, self.field);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = self.field.zero();
                for k in 0..self.cols {
                    acc += &(self.get(i, k) * other.get(k, j));
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Result<ConstMatrix> {
        if self.rows != self.cols {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        let mut acc = Self::identity(self.rows, self.field);
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Exact inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<ConstMatrix> {
        if self.rows != self.cols {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n, self.field);
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a.get(r, col).is_zero()).ok_or(Error::SingularMatrix)?;
            a.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            let p = a.get(col, col).inv()?;
            a.scale_row(col, &p);
            inv.scale_row(col, &p);
            for r in 0..n {
                if r == col || a.get(r, col).is_zero() {
                    continue;
                }
                let factor = a.get(r, col).clone();
                a.add_row_multiple(r, col, &-&factor);
                inv.add_row_multiple(r, col, &-&factor);
            }
        }
        Ok(inv)
    }

    pub fn determinant(&self) -> Result<Coefficient> {
        if self.rows != self.cols {
            return Err(Error::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = self.field.one();
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&r| !a.get(r, col).is_zero()) else {
                return Ok(self.field.zero());
            };
            if pivot != col {
                a.swap_rows(col, pivot);
                det = -det;
            }
            let p = a.get(col, col).clone();
            det = &det * &p;
            let p_inv = p.inv()?;
            for r in col + 1..n {
                if a.get(r, col).is_zero() {
                    continue;
                }
                let factor = a.get(r, col) * &p_inv;
                a.add_row_multiple(r, col, &-&factor);
            }
        }
        Ok(det)
    }

    pub(crate) fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.entries.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    pub(crate) fn scale_row(&mut self, r: usize, k: &Coefficient) {
        for c in 0..self.cols {
            let v = self.get(r, c) * k;
            self.set(r, c, v);
        }
    }

    /// `row[target] += k * row[source]`.
    pub(crate) fn add_row_multiple(&mut self, target: usize, source: usize, k: &Coefficient) {
        for c in 0..self.cols {
            let v = self.get(target, c) + &(self.get(source, c) * k);
            self.set(target, c, v);
        }
    }
}

impl fmt::Display for ConstMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}
