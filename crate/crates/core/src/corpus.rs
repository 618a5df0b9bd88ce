//! Named example maps with their known facts, and seeded random generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeff::{Coefficient, FieldSpec};
use crate::error::{Error, Result};
use crate::mapfile::parse_map;
use crate::poly::{Ambient, Monomial, Poly, Truncation};
use crate::polymap::{ConstMatrix, PolyMap, Triangularity};

const NAGATA: &str = include_str!("../data/v1/nagata.map");
const VASYUNIN: &str = include_str!("../data/v1/vasyunin.map");
const VASYUNIN_INVERSE: &str = include_str!("../data/v1/vasyunin_inverse.map");

/// Where a recorded fact comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated in the literature for this example.
    Published,
    /// Obtained by running a computation.
    Computed,
    /// Immediate from how the map is built.
    ByConstruction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fact<T> {
    pub value: T,
    pub provenance: Provenance,
}

fn fact<T>(value: T, provenance: Provenance) -> Option<Fact<T>> {
    Some(Fact { value, provenance })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectedPascal {
    Finite(usize),
    NotFinite,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expected {
    pub pascal: Option<Fact<ExpectedPascal>>,
    pub per_component_indices: Option<Fact<Vec<usize>>>,
    pub inverse: Option<Fact<PolyMap>>,
    pub keller_constant: Option<Fact<i64>>,
    pub nilpotency_index: Option<Fact<usize>>,
    pub strongly_nilpotent: Option<Fact<bool>>,
    pub tame: Option<Fact<bool>>,
    pub triangular: Option<Fact<Triangularity>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedExample {
    pub name: String,
    pub map: PolyMap,
    pub expected: Expected,
}

/// Names accepted by [`builtin`], with their parameters spelled out.
pub const BUILTIN_NAMES: &[&str] = &[
    "identity(n)",
    "nagata",
    "nagata_extended_4",
    "vasyunin",
    "fibonacci_affine(a,b)",
    "gh_composition",
    "simple_triangular",
];

fn parse(text: &str) -> PolyMap {
    parse_map(text).expect("built-in map text is well formed")
}

pub fn nagata() -> PolyMap {
    parse(NAGATA)
}

pub fn vasyunin() -> PolyMap {
    parse(VASYUNIN)
}

/// The inverse of [`vasyunin`] as published, stored as text.
pub fn vasyunin_inverse() -> PolyMap {
    parse(VASYUNIN_INVERSE)
}

pub fn vasyunin_inverse_text() -> &'static str {
    VASYUNIN_INVERSE
}

pub fn fibonacci_affine(a: i64, b: i64) -> PolyMap {
    parse(&format!("vars: x1 x2\n2*x1 + x2 + ({a})\nx1 + x2 + ({b})\n"))
}

/// `G ∘ H` with `G = (X1 + X2^3, X2)` and `H = (X1, X2 + X1^2)`.
pub fn gh_composition() -> PolyMap {
    let (g, h) = gh_factors();
    g.compose(&h, Truncation::Unbounded).expect("same ambient")
}

pub fn gh_factors() -> (PolyMap, PolyMap) {
    (parse("vars: x1 x2\nx1 + x2^3\nx2\n"), parse("vars: x1 x2\nx1\nx2 + x1^2\n"))
}

pub fn simple_triangular() -> PolyMap {
    parse("vars: x1 x2\nx1 + x2^2\nx2\n")
}

/// `(F, X_{n+1})`.
pub fn extend(f: &PolyMap) -> PolyMap {
    let n = f.nvars();
    let wide = Ambient::new(n + 1, f.field());
    let images: Vec<Poly> = (0..n).map(|i| Poly::var(wide, i)).collect();
    let mut comps: Vec<Poly> = f
        .components()
        .iter()
        .map(|c| c.substitute(&images, Truncation::Unbounded).expect("arity matches"))
        .collect();
    comps.push(Poly::var(wide, n));
    PolyMap::new(comps).expect("n + 1 components")
}

fn parse_args(args: &str) -> Option<Vec<i64>> {
    if args.trim().is_empty() {
        return Some(Vec::new());
    }
    args.split(',').map(|a| a.trim().parse().ok()).collect()
}

/// Looks up a built-in example by name, e.g. `nagata`, `identity(3)` or
/// `fibonacci_affine(1,2)`.
pub fn builtin(name: &str) -> Result<NamedExample> {
    use Provenance::*;
    let unknown = || Error::UnknownExample(name.to_string());
    let (base, args) = match name.split_once('(') {
        Some((b, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(unknown)?;
            (b.trim(), parse_args(inner).ok_or_else(unknown)?)
        }
        None => (name.trim(), Vec::new()),
    };
    let mut expected = Expected::default();
    let map = match (base, args.as_slice()) {
        ("identity", [] | [_]) => {
            let n = match args.first() {
                Some(&n) if (1..=64).contains(&n) => n as usize,
                Some(_) => return Err(unknown()),
                None => 3,
            };
            expected.pascal = fact(ExpectedPascal::Finite(1), ByConstruction);
            expected.per_component_indices = fact(vec![1; n], ByConstruction);
            expected.keller_constant = fact(1, ByConstruction);
            expected.nilpotency_index = fact(1, ByConstruction);
            expected.strongly_nilpotent = fact(true, ByConstruction);
            expected.tame = fact(true, ByConstruction);
            expected.triangular = fact(Triangularity::Upper, ByConstruction);
            let id = PolyMap::identity(Ambient::new(n, FieldSpec::Rationals));
            expected.inverse = fact(id.clone(), ByConstruction);
            id
        }
        ("nagata", []) => {
            expected.pascal = fact(ExpectedPascal::Finite(3), Published);
            expected.per_component_indices = fact(vec![3, 2, 1], Published);
            expected.keller_constant = fact(1, Computed);
            expected.strongly_nilpotent = fact(false, Published);
            expected.tame = fact(false, Published);
            expected.triangular = fact(Triangularity::NotTriangular, ByConstruction);
            nagata()
        }
        ("nagata_extended_4", []) => {
            expected.pascal = fact(ExpectedPascal::Finite(3), Published);
            expected.per_component_indices = fact(vec![3, 2, 1, 1], Computed);
            expected.keller_constant = fact(1, Computed);
            expected.tame = fact(true, Published);
            extend(&nagata())
        }
        ("vasyunin", []) => {
            expected.pascal = fact(ExpectedPascal::NotFinite, Published);
            expected.inverse = fact(vasyunin_inverse(), Published);
            expected.keller_constant = fact(1, Computed);
            expected.nilpotency_index = fact(5, Published);
            expected.strongly_nilpotent = fact(false, Published);
            vasyunin()
        }
        ("fibonacci_affine", [] | [_, _]) => {
            let (a, b) = match args.as_slice() {
                [a, b] => (*a, *b),
                _ => (0, 0),
            };
            expected.pascal = fact(ExpectedPascal::NotFinite, Published);
            expected.keller_constant = fact(1, Published);
            expected.tame = fact(true, Published);
            fibonacci_affine(a, b)
        }
        ("gh_composition", []) => {
            expected.pascal = fact(ExpectedPascal::NotFinite, Published);
            expected.keller_constant = fact(1, Computed);
            expected.tame = fact(true, ByConstruction);
            gh_composition()
        }
        ("simple_triangular", []) => {
            expected.pascal = fact(ExpectedPascal::Finite(2), ByConstruction);
            expected.per_component_indices = fact(vec![2, 1], ByConstruction);
            expected.keller_constant = fact(1, ByConstruction);
            expected.nilpotency_index = fact(2, ByConstruction);
            expected.strongly_nilpotent = fact(true, ByConstruction);
            expected.tame = fact(true, ByConstruction);
            expected.triangular = fact(Triangularity::Upper, ByConstruction);
            expected.inverse = fact(parse("vars: x1 x2\nx1 - x2^2\nx2\n"), ByConstruction);
            simple_triangular()
        }
        _ => return Err(unknown()),
    };
    Ok(NamedExample { name: name.trim().to_string(), map, expected })
}

/// One representative of every built-in family.
pub fn all_builtins() -> Vec<NamedExample> {
    [
        "identity(3)",
        "nagata",
        "nagata_extended_4",
        "vasyunin",
        "fibonacci_affine(0,0)",
        "fibonacci_affine(1,2)",
        "gh_composition",
        "simple_triangular",
    ]
    .iter()
    .map(|n| builtin(n).expect("listed names resolve"))
    .collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_coefficient(rng: &mut ChaCha8Rng, field: FieldSpec) -> Coefficient {
    let v = *[-3i64, -2, -1, 1, 2, 3].choose(rng).expect("nonempty");
    field.from_i64(v)
}

/// A random exponent vector of total degree `deg` supported on `vars`.
fn random_monomial(rng: &mut ChaCha8Rng, n: usize, vars: &[usize], deg: u32) -> Monomial {
    let mut exps = vec![0u32; n];
    for _ in 0..deg {
        exps[*vars.choose(rng).expect("nonempty")] += 1;
    }
    Monomial::from_exponents(exps)
}

/// A random polynomial in `vars` with up to `max_terms` terms of degree in
/// `min_deg..=max_deg`.
fn random_poly(
    rng: &mut ChaCha8Rng,
    ambient: Ambient,
    vars: &[usize],
    min_deg: u32,
    max_deg: u32,
    max_terms: usize,
) -> Poly {
    let count = rng.gen_range(1..=max_terms);
    let mut acc = Poly::zero(ambient);
    for _ in 0..count {
        let deg = rng.gen_range(min_deg..=max_deg);
        let m = random_monomial(rng, ambient.nvars, vars, deg);
        acc = &acc + &Poly::monomial(ambient, m, small_coefficient(rng, ambient.field));
    }
    acc
}

/// Upper triangular `F_i = X_i + H_i` with `H_i` a polynomial in
/// `X_{i+1}, …, X_n` of degree `2..=max_deg`, and `H_n` zero or a constant.
pub fn random_triangular(n: usize, max_deg: u32, seed: u64) -> PolyMap {
    random_triangular_in(FieldSpec::Rationals, n, max_deg, seed)
}

pub fn random_triangular_in(field: FieldSpec, n: usize, max_deg: u32, seed: u64) -> PolyMap {
    assert!(n >= 1 && max_deg >= 2);
    let mut rng = rng(seed);
    let ambient = Ambient::new(n, field);
    let comps = (0..n)
        .map(|i| {
            let x = Poly::var(ambient, i);
            let h = if i + 1 == n {
                if rng.gen_bool(0.5) {
                    Poly::constant(ambient, small_coefficient(&mut rng, field))
                } else {
                    Poly::zero(ambient)
                }
            } else if rng.gen_bool(0.15) {
                Poly::zero(ambient)
            } else {
                let vars: Vec<usize> = (i + 1..n).collect();
                random_poly(&mut rng, ambient, &vars, 2, max_deg, 3)
            };
            &x + &h
        })
        .collect();
    PolyMap::new(comps).expect("n components")
}

/// A unimodular integer matrix built from `ops` random elementary row
/// operations, with its exact inverse.
pub fn random_unimodular(n: usize, ops: usize, rng: &mut impl Rng) -> (ConstMatrix, ConstMatrix) {
    let field = FieldSpec::Rationals;
    let mut t = ConstMatrix::identity(n, field);
    let mut t_inv = ConstMatrix::identity(n, field);
    if n < 2 {
        return (t, t_inv);
    }
    for _ in 0..ops {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if rng.gen_bool(0.2) {
            t.swap_rows(i, j);
            // (S T)^{-1} = T^{-1} S: swap columns of the inverse
            t_inv = t_inv.mul(&swap_matrix(n, i, j)).expect("square");
        } else {
            let c = *[-2i64, -1, 1, 2].choose(rng).expect("nonempty");
            let k = field.from_i64(c);
            t.add_row_multiple(i, j, &k);
            // inverse of E = I + k e_ij is I - k e_ij, applied on the right
            let mut e = ConstMatrix::identity(n, field);
            e.set(i, j, -k);
            t_inv = t_inv.mul(&e).expect("square");
        }
    }
    (t, t_inv)
}

fn swap_matrix(n: usize, i: usize, j: usize) -> ConstMatrix {
    let mut s = ConstMatrix::identity(n, FieldSpec::Rationals);
    s.swap_rows(i, j);
    s
}

/// `(T^{-1} ∘ F ∘ T, T, T^{-1})` for a random unimodular `T`.
pub fn random_linear_conjugate(f: &PolyMap, seed: u64) -> (PolyMap, ConstMatrix, ConstMatrix) {
    let mut rng = rng(seed);
    let n = f.nvars();
    let (t, t_inv) = random_unimodular(n, 2 * n, &mut rng);
    let t = to_field(&t, f.field());
    let t_inv = to_field(&t_inv, f.field());
    let lt = PolyMap::linear(&t).expect("square");
    let lt_inv = PolyMap::linear(&t_inv).expect("square");
    let conj = f.conjugate(&lt, &lt_inv).expect("T and its inverse are built together");
    (conj, t, t_inv)
}

fn to_field(m: &ConstMatrix, field: FieldSpec) -> ConstMatrix {
    if m.field() == field {
        return m.clone();
    }
    let rows = (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c).map_into(field).expect("integer entries")).collect())
        .collect();
    ConstMatrix::from_rows(field, rows).expect("rectangular")
}

/// A composition of `num_factors` random elementary and affine maps,
/// returned with its inverse `(F, G)`.
pub fn random_tame(n: usize, num_factors: usize, max_deg: u32, seed: u64) -> (PolyMap, PolyMap) {
    assert!(n >= 2);
    let mut rng = rng(seed);
    let ambient = Ambient::new(n, FieldSpec::Rationals);
    let mut f = PolyMap::identity(ambient);
    let mut g = PolyMap::identity(ambient);
    for _ in 0..num_factors {
        let (step, step_inv) = if rng.gen_bool(0.5) {
            // elementary: X_i + a with a free of X_i
            let i = rng.gen_range(0..n);
            let vars: Vec<usize> = (0..n).filter(|&v| v != i).collect();
            let a = random_poly(&mut rng, ambient, &vars, 0, max_deg.max(1), 3);
            let mut fwd = PolyMap::identity(ambient).into_components();
            let mut back = fwd.clone();
            fwd[i] = &fwd[i] + &a;
            back[i] = &back[i] - &a;
            (PolyMap::new(fwd).expect("n"), PolyMap::new(back).expect("n"))
        } else {
            // affine: M X + c
            let (m, m_inv) = random_unimodular(n, n, &mut rng);
            let c: Vec<Poly> = (0..n)
                .map(|_| Poly::constant(ambient, FieldSpec::Rationals.from_i64(rng.gen_range(-2..=2))))
                .collect();
            let lin = PolyMap::linear(&m).expect("square");
            let fwd = lin.add(&PolyMap::new(c.clone()).expect("n")).expect("same ambient");
            let shift_back = PolyMap::new(
                (0..n).map(|i| &Poly::var(ambient, i) - &c[i]).collect(),
            )
            .expect("n");
            let back = PolyMap::linear(&m_inv)
                .expect("square")
                .compose(&shift_back, Truncation::Unbounded)
                .expect("same ambient");
            (fwd, back)
        };
        f = step.compose(&f, Truncation::Unbounded).expect("same ambient");
        g = g.compose(&step_inv, Truncation::Unbounded).expect("same ambient");
    }
    (f, g)
}

/// `X + A X` for an integer matrix `A`.
pub fn affine_homogeneous(a: &ConstMatrix) -> PolyMap {
    let id = PolyMap::identity(Ambient::new(a.rows(), a.field()));
    id.add(&PolyMap::linear(a).expect("square")).expect("same ambient")
}

/// A random `n × n` integer matrix with entries in `-2..=2`; when `nilpotent`
/// is set it is a random unimodular conjugate of a strictly upper
/// triangular matrix.
pub fn random_integer_matrix(n: usize, nilpotent: bool, seed: u64) -> ConstMatrix {
    let mut rng = rng(seed);
    let field = FieldSpec::Rationals;
    let mut a = ConstMatrix::zero(n, n, field);
    for r in 0..n {
        for c in 0..n {
            if !nilpotent || c > r {
                a.set(r, c, field.from_i64(rng.gen_range(-2..=2)));
            }
        }
    }
    if nilpotent {
        let (t, t_inv) = random_unimodular(n, n, &mut rng);
        a = t_inv.mul(&a).and_then(|m| m.mul(&t)).expect("square");
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_examples_components() {
        let n = builtin("nagata").unwrap().map;
        assert_eq!(n.component(2).to_string(), "x3");
        assert_eq!(n.component(1).to_string(), "x1*x3^2 + x2^2*x3 + x2");
        let v = builtin("vasyunin").unwrap().map;
        assert_eq!(v.component(4).to_string(), "1/2*x3^2 + x5");
        assert_eq!(v.component(1).to_string(), "x1*x3 + x2");
        let id = builtin("identity(3)").unwrap().map;
        assert!(id.is_identity() && id.nvars() == 3);
    }

    #[test]
    fn parameterized_names() {
        let f = builtin("fibonacci_affine(1,2)").unwrap().map;
        assert_eq!(f.to_string(), "(2*x1 + x2 + 1, x1 + x2 + 2)");
        let f = builtin("fibonacci_affine(-1, 0)").unwrap().map;
        assert_eq!(f.to_string(), "(2*x1 + x2 - 1, x1 + x2)");
        assert_eq!(builtin("fibonacci_affine").unwrap().map.to_string(), "(2*x1 + x2, x1 + x2)");
        assert_eq!(builtin("identity(5)").unwrap().map.nvars(), 5);
        for bad in ["nope", "identity(0)", "identity(x)", "nagata(1)", "fibonacci_affine(1)", "identity(3"] {
            assert!(matches!(builtin(bad), Err(Error::UnknownExample(_))), "{bad}");
        }
    }

    #[test]
    fn gh_composition_components() {
        let f = gh_composition();
        assert_eq!(f.component(1).to_string(), "x1^2 + x2");
        assert_eq!(f.degree(), crate::poly::ExtDegree::Finite(6));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_triangular(4, 3, 7), random_triangular(4, 3, 7));
        assert_eq!(random_tame(3, 3, 2, 7), random_tame(3, 3, 2, 7));
        let f = random_triangular(3, 3, 1);
        assert_eq!(random_linear_conjugate(&f, 5), random_linear_conjugate(&f, 5));
    }

    #[test]
    fn triangular_outputs_are_upper() {
        for seed in 0..50 {
            let f = random_triangular(4, 3, seed);
            assert_eq!(f.is_triangular(), Triangularity::Upper, "seed {seed}");
        }
    }

    #[test]
    fn unimodular_inverse_is_exact() {
        let mut r = rng(3);
        for n in 1..=5 {
            let (t, t_inv) = random_unimodular(n, 10, &mut r);
            assert!(t.mul(&t_inv).unwrap().is_identity());
            let det = t.determinant().unwrap();
            assert!(det.is_one() || (-&det).is_one());
        }
    }

    #[test]
    fn tame_inverse_composes_to_identity() {
        let (f, g) = random_tame(3, 0, 2, 1);
        assert!(f.is_identity() && g.is_identity());
        for seed in 0..10 {
            let (f, g) = random_tame(3, 4, 2, seed);
            assert!(g.compose(&f, Truncation::Unbounded).unwrap().is_identity());
            assert!(f.compose(&g, Truncation::Unbounded).unwrap().is_identity());
        }
    }

    #[test]
    fn nilpotent_matrices_are_nilpotent() {
        for seed in 0..10 {
            let a = random_integer_matrix(4, true, seed);
            assert!(a.pow(4).unwrap().is_zero());
        }
    }
}
