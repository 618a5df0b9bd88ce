//! Nilpotency and strong nilpotency of `J_H`.

use serde::Serialize;

use crate::coeff::{Coefficient, FieldSpec};
use crate::error::{Error, Result};
use crate::poly::{Ambient, ExtDegree, Poly, Truncation};
use crate::polymap::{ConstMatrix, PolyMap, PolyMatrix};

/// `J_H` for `H = F - X`.
pub fn jacobian_of_h(f: &PolyMap) -> PolyMatrix {
    let n = f.nvars();
    let j = f.jacobian();
    let ambient = f.ambient();
    let entries = (0..n * n)
        .map(|k| {
            let e = j.get(k / n, k % n);
            if k / n == k % n {
                e - &Poly::one(ambient)
            } else {
                e.clone()
            }
        })
        .collect();
    PolyMatrix::new(n, n, entries).expect("square")
}

fn check_square(m: &PolyMatrix) -> Result<usize> {
    if m.rows() != m.cols() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    Ok(m.rows())
}

/// Least `k ≤ n` with `jh^k = 0`.
pub fn nilpotency_index(jh: &PolyMatrix) -> Result<Option<usize>> {
    let n = check_square(jh)?;
    let mut power = jh.clone();
    for k in 1..=n.max(1) {
        if power.is_zero() {
            return Ok(Some(k));
        }
        if k < n {
            power = power.mul(jh)?;
        }
    }
    Ok(None)
}

/// A nonzero entry of a product of Jacobians, rendered with fresh-variable
/// names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub factors: usize,
    pub row: usize,
    pub col: usize,
    pub entry: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrongNilpotency {
    pub strongly_nilpotent: bool,
    /// Least number of factors whose product vanishes.
    pub index: Option<usize>,
    pub witness: Option<Witness>,
}

/// Names of the `n` fresh variable sets: `y{k}_{j}` for factor `k` and
/// coordinate `j`. Fails if one of them is already a variable of the map.
pub fn fresh_names(n: usize, existing: &[impl AsRef<str>]) -> Result<Vec<String>> {
    let fresh: Vec<String> = (1..=n)
        .flat_map(|k| (1..=n).map(move |j| format!("y{k}_{j}")))
        .collect();
    if fresh.iter().any(|y| existing.iter().any(|e| e.as_ref() == y)) {
        return Err(Error::NameCollision);
    }
    Ok(fresh)
}

/// Multiplies `J_H(Y^{(1)}) · J_H(Y^{(2)}) · …`, each factor evaluated at its
/// own set of `n` fresh variables, and reports the first prefix that
/// vanishes. The variables live in an ambient of `n + n^2` variables whose
/// first `n` are the original ones.
pub fn strong_nilpotency(jh: &PolyMatrix, names: &[impl AsRef<str>]) -> Result<StrongNilpotency> {
    let n = check_square(jh)?;
    let fresh = fresh_names(n, names)?;
    let wide = Ambient::new(n + n * n, jh.ambient().field);
    let factor = |k: usize| -> Result<PolyMatrix> {
        let images: Vec<Poly> = (0..n).map(|j| Poly::var(wide, n + k * n + j)).collect();
        jh.substitute(&images, Truncation::Unbounded)
    };
    let mut product = factor(0)?;
    for k in 1..=n {
        if product.is_zero() {
            return Ok(StrongNilpotency { strongly_nilpotent: true, index: Some(k), witness: None });
        }
        if k < n {
            product = product.mul(&factor(k)?)?;
        }
    }
    let all_names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).chain(fresh).collect();
    let witness = product.first_nonzero().map(|(row, col, p)| Witness {
        factors: n,
        row,
        col,
        entry: p.to_string_with_names(&all_names),
    });
    Ok(StrongNilpotency { strongly_nilpotent: false, index: None, witness })
}

/// `J_H(v_1) · … · J_H(v_p)` for concrete vectors.
pub fn strong_nilpotency_numeric(jh: &PolyMatrix, vectors: &[Vec<Coefficient>]) -> Result<PolyMatrix> {
    let n = check_square(jh)?;
    let field = jh.ambient().field;
    let mut acc = ConstMatrix::identity(n, field);
    for v in vectors {
        if v.len() != jh.ambient().nvars {
            return Err(Error::ArityMismatch { expected: jh.ambient().nvars, found: v.len() });
        }
        acc = acc.mul(&jh.eval(v)?)?;
    }
    Ok(PolyMatrix::from_const(&acc, jh.ambient()))
}

/// The `i`-th standard basis vector.
pub fn basis_vector(n: usize, i: usize, field: FieldSpec) -> Vec<Coefficient> {
    (0..n).map(|j| if i == j { field.one() } else { field.zero() }).collect()
}

/// Searches sequences of `n` standard basis vectors, in lexicographic order,
/// for one whose evaluated product is nonzero.
pub fn basis_witness(jh: &PolyMatrix) -> Result<Option<Vec<usize>>> {
    let n = check_square(jh)?;
    let field = jh.ambient().field;
    let evaluated: Vec<ConstMatrix> = (0..n)
        .map(|i| jh.eval(&basis_vector(n, i, field)))
        .collect::<Result<_>>()?;
    let mut seq = vec![0usize; n];
    loop {
        let mut acc = evaluated[seq[0]].clone();
        for &i in &seq[1..] {
            acc = acc.mul(&evaluated[i])?;
        }
        if !acc.is_zero() {
            return Ok(Some(seq));
        }
        // next sequence in lexicographic order
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(None);
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// Checks that `T^{-1} ∘ F ∘ T` has the form `X + H` with
/// `H_i ∈ K[X_{i+1}, …, X_n]` for `i < n` and `H_n ∈ K`.
pub fn verify_triangularization(f: &PolyMap, t: &ConstMatrix) -> Result<bool> {
    let t_inv = t.inverse()?;
    let conj = f.conjugate(&PolyMap::linear(t)?, &PolyMap::linear(&t_inv)?)?;
    let h = conj.sub(&PolyMap::identity(f.ambient()))?;
    Ok(h.components().iter().enumerate().all(|(i, c)| (0..=i).all(|v| !c.uses_var(v))))
}

/// `X - H` when `(J_H)^2 = 0`, after checking it inverts `F`.
pub fn quick_inverse_jh2(f: &PolyMap) -> Result<Option<PolyMap>> {
    let id = PolyMap::identity(f.ambient());
    let h = f.sub(&id)?;
    if h.is_zero() {
        return Ok(Some(id));
    }
    let jh = h.jacobian();
    if !jh.mul(&jh)?.is_zero() {
        return Ok(None);
    }
    let g = id.sub(&h)?;
    if g.compose(f, Truncation::Unbounded)?.is_identity() {
        Ok(Some(g))
    } else {
        Ok(None)
    }
}

/// `deg G ≤ (deg F)^{p-1}` with `p` the strong nilpotency index of `J_H`.
pub fn johnston_bound_check(f: &PolyMap, inverse: &PolyMap) -> Result<bool> {
    let sn = strong_nilpotency(&jacobian_of_h(f), &crate::poly::default_names(f.nvars()))?;
    let p = sn.index.ok_or(Error::NotStronglyNilpotent)?;
    Ok(johnston_bound_holds(f.degree(), inverse.degree(), p))
}

pub fn johnston_bound_holds(deg_f: ExtDegree, deg_g: ExtDegree, p: usize) -> bool {
    power_bound_holds(deg_f, deg_g, p.saturating_sub(1))
}

/// `deg_g ≤ deg_f^e`; degrees of zero maps are `-inf` and always pass.
pub fn power_bound_holds(deg_f: ExtDegree, deg_g: ExtDegree, e: usize) -> bool {
    let Some(g) = deg_g.finite() else { return true };
    let Some(f) = deg_f.finite() else { return false };
    match u64::from(f).checked_pow(e as u32) {
        Some(bound) => u64::from(g) <= bound,
        None => true,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NilpotencyReport {
    pub nilpotent: bool,
    pub index: Option<usize>,
    pub strongly_nilpotent: bool,
    pub strong_index: Option<usize>,
    pub witness: Option<Witness>,
    /// Basis vectors `e_i` (0-based) whose evaluated product is nonzero.
    pub basis_witness: Option<Vec<usize>>,
    /// Over a finite field the symbolic test is sufficient but possibly not
    /// necessary for vanishing at every point.
    pub finite_field_caveat: bool,
}

pub fn nilpotency_report(jh: &PolyMatrix, names: &[impl AsRef<str>]) -> Result<NilpotencyReport> {
    let index = nilpotency_index(jh)?;
    let sn = strong_nilpotency(jh, names)?;
    let basis_witness = if sn.strongly_nilpotent { None } else { basis_witness(jh)? };
    Ok(NilpotencyReport {
        nilpotent: index.is_some(),
        index,
        strongly_nilpotent: sn.strongly_nilpotent,
        strong_index: sn.index,
        witness: sn.witness,
        basis_witness,
        finite_field_caveat: jh.ambient().field.is_finite(),
    })
}
