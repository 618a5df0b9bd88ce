use num_bigint::BigInt;
use pascalis::nilpotency::{jacobian_of_h, strong_nilpotency};
use pascalis::poly::default_names;
use pascalis::{
    corpus, parse_map, pascal, serialize_map, Ambient, Coefficient, ConstMatrix, ExtDegree, FieldSpec, KellerStatus,
    MapFile, Monomial, Poly, PolyMap, PolyMatrix, Truncation,
};
use proptest::prelude::*;

const GF7: FieldSpec = FieldSpec::PrimeField(7);

fn field() -> impl Strategy<Value = FieldSpec> {
    prop_oneof![Just(FieldSpec::Rationals), Just(GF7)]
}

fn coefficient(field: FieldSpec) -> impl Strategy<Value = Coefficient> {
    // `wide` pushes numerators past i64 products
    (-30i64..=30, 1i64..=6, any::<bool>()).prop_map(move |(num, den, wide)| {
        let mut n = BigInt::from(num);
        if wide {
            n *= BigInt::from(10u64).pow(17);
            n += 1;
        }
        field.from_fraction(&n, &BigInt::from(den)).expect("denominator is a unit")
    })
}

fn poly_in(ambient: Ambient, max_exp: u32, max_terms: usize, min_degree: u32) -> impl Strategy<Value = Poly> {
    let n = ambient.nvars;
    prop::collection::vec((prop::collection::vec(0..=max_exp, n), coefficient(ambient.field)), 0..=max_terms).prop_map(
        move |terms| {
            let terms = terms
                .into_iter()
                .map(|(e, c)| (Monomial::from_exponents(e), c))
                .filter(|(m, _)| m.degree() >= min_degree);
            Poly::from_terms(ambient, terms).unwrap()
        },
    )
}

fn poly3(f: FieldSpec) -> impl Strategy<Value = Poly> {
    poly_in(Ambient::new(3, f), 3, 6, 0)
}

/// Three polynomials over one field.
fn triple() -> impl Strategy<Value = (Poly, Poly, Poly)> {
    field().prop_flat_map(|f| (poly3(f), poly3(f), poly3(f)))
}

/// A map with components of order at least one.
fn map_in(ambient: Ambient, max_exp: u32, max_terms: usize) -> impl Strategy<Value = PolyMap> {
    prop::collection::vec(poly_in(ambient, max_exp, max_terms, 1), ambient.nvars)
        .prop_map(|c| PolyMap::new(c).unwrap())
}

fn small_maps(count: usize) -> impl Strategy<Value = Vec<PolyMap>> {
    (field(), 1usize..=3).prop_flat_map(move |(f, n)| prop::collection::vec(map_in(Ambient::new(n, f), 2, 3), count))
}

fn vars(a: Ambient) -> Vec<Poly> {
    (0..a.nvars).map(|i| Poly::var(a, i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn addition_is_a_commutative_group((a, b, c) in triple()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert!((&a - &a).is_zero());
        prop_assert_eq!(&a + &Poly::zero(a.ambient()), a.clone());
        prop_assert_eq!(&a - &b, &a + &(-&b));
    }

    #[test]
    fn multiplication_is_commutative_associative_unital((a, b, c) in triple()) {
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &Poly::one(a.ambient()), a.clone());
        prop_assert!((&a * &Poly::zero(a.ambient())).is_zero());
    }

    #[test]
    fn multiplication_distributes((a, b, c) in triple()) {
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
    }

    #[test]
    fn degree_and_order_add_under_products((a, b, _) in triple()) {
        let p = &a * &b;
        if a.is_zero() || b.is_zero() {
            prop_assert!(p.is_zero());
        } else {
            let (da, db) = (a.degree().finite().unwrap(), b.degree().finite().unwrap());
            let (oa, ob) = (a.order().finite().unwrap(), b.order().finite().unwrap());
            prop_assert_eq!(p.degree(), ExtDegree::Finite(da + db));
            prop_assert_eq!(p.order(), ExtDegree::Finite(oa + ob));
        }
    }

    #[test]
    fn truncated_products_are_truncated_exact_products((a, b, _) in triple(), n in 0u32..8) {
        let t = Truncation::Degree(n);
        prop_assert_eq!(a.mul(&b, t).unwrap(), (&a * &b).truncate(t));
        prop_assert_eq!(a.pow(3, t).unwrap(), (&(&a * &a) * &a).truncate(t));
    }

    #[test]
    fn substituting_variables_is_the_identity((a, _, _) in triple()) {
        prop_assert_eq!(a.substitute(&vars(a.ambient()), Truncation::Unbounded).unwrap(), a);
    }

    #[test]
    fn substitution_is_a_ring_homomorphism(
        (a, b, g) in field().prop_flat_map(|f| (poly3(f), poly3(f), map_in(Ambient::new(3, f), 2, 3)))
    ) {
        let s = |p: &Poly| p.substitute(g.components(), Truncation::Unbounded).unwrap();
        prop_assert_eq!(s(&(&a * &b)), &s(&a) * &s(&b));
        prop_assert_eq!(s(&(&a + &b)), &s(&a) + &s(&b));
    }

    #[test]
    fn truncated_substitution_is_sound(
        (a, g) in field().prop_flat_map(|f| (poly3(f), map_in(Ambient::new(3, f), 2, 3))),
        n in 0u32..7,
    ) {
        let t = Truncation::Degree(n);
        let exact = a.substitute(g.components(), Truncation::Unbounded).unwrap();
        prop_assert_eq!(a.substitute(g.components(), t).unwrap(), exact.truncate(t));
    }

    #[test]
    fn composition_is_associative(maps in small_maps(3)) {
        let (f, g, h) = (&maps[0], &maps[1], &maps[2]);
        let u = Truncation::Unbounded;
        let left = f.compose(g, u).unwrap().compose(h, u).unwrap();
        let right = f.compose(&g.compose(h, u).unwrap(), u).unwrap();
        prop_assert_eq!(left, right);
        prop_assert_eq!(f.compose(&PolyMap::identity(f.ambient()), u).unwrap(), f.clone());
    }

    #[test]
    fn jacobian_obeys_the_chain_rule(maps in small_maps(2)) {
        let (f, g) = (&maps[0], &maps[1]);
        let u = Truncation::Unbounded;
        let lhs = f.compose(g, u).unwrap().jacobian();
        let rhs = f.jacobian().substitute(g.components(), u).unwrap().mul(&g.jacobian()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn determinant_is_multiplicative(
        (a, b) in (field(), 1usize..=3).prop_flat_map(|(f, n)| {
            let amb = Ambient::new(2, f);
            let entries = || prop::collection::vec(poly_in(amb, 2, 2, 0), n * n);
            (entries(), entries()).prop_map(move |(x, y)| {
                (PolyMatrix::new(n, n, x).unwrap(), PolyMatrix::new(n, n, y).unwrap())
            })
        })
    ) {
        let ab = a.mul(&b).unwrap().determinant().unwrap();
        prop_assert_eq!(ab, &a.determinant().unwrap() * &b.determinant().unwrap());
    }

    #[test]
    fn normalization_is_idempotent(
        (h, diag, upper, shift) in (1usize..=3).prop_flat_map(|n| {
            let amb = Ambient::new(n, FieldSpec::Rationals);
            (
                map_in(amb, 2, 3),
                prop::collection::vec(prop_oneof![-3i64..=-1, 1i64..=3], n),
                prop::collection::vec(-2i64..=2, n * n),
                prop::collection::vec(-2i64..=2, n),
            )
        })
    ) {
        let n = h.nvars();
        let amb = h.ambient();
        // F = A(X + H_{≥2}) + c with A upper triangular and invertible
        let rows: Vec<Vec<i64>> = (0..n)
            .map(|r| (0..n).map(|c| match r.cmp(&c) {
                std::cmp::Ordering::Equal => diag[r],
                std::cmp::Ordering::Less => upper[r * n + c],
                std::cmp::Ordering::Greater => 0,
            }).collect())
            .collect();
        let a = PolyMap::linear(&ConstMatrix::from_i64(FieldSpec::Rationals, &rows).unwrap()).unwrap();
        let quadratic: Vec<Poly> = h.components().iter().map(|c| {
            let lin: Vec<u32> = c.layer_degrees().into_iter().filter(|&d| d >= 2).collect();
            lin.iter().fold(Poly::zero(amb), |acc, &d| &acc + &c.homogeneous_component(d))
        }).collect();
        let inner = PolyMap::identity(amb).add(&PolyMap::new(quadratic).unwrap()).unwrap();
        let c = PolyMap::new(shift.iter().map(|&v| Poly::constant(amb, FieldSpec::Rationals.from_i64(v))).collect()).unwrap();
        let f = a.compose(&inner, Truncation::Unbounded).unwrap().add(&c).unwrap();

        let nf = f.normalize().unwrap();
        let again = nf.map().normalize().unwrap();
        prop_assert_eq!(again.map(), nf.map());
        prop_assert!(again.linear_part().is_identity());
        prop_assert!(again.translation().iter().all(Coefficient::is_zero));
        prop_assert_eq!(nf.map(), &inner);
    }

    #[test]
    fn serialization_round_trips(maps in small_maps(1)) {
        let f = &maps[0];
        let text = serialize_map(f);
        prop_assert_eq!(&parse_map(&text).unwrap(), f);
        // canonical text is a fixed point
        prop_assert_eq!(serialize_map(&parse_map(&text).unwrap()), text);
    }

    #[test]
    fn mutated_input_fails_with_a_position_inside_the_text(
        which in 0usize..4,
        pos in any::<prop::sample::Index>(),
        ch in prop::sample::select(vec!['+', '-', '*', '^', '/', '(', ')', 'x', 'q', '1', '0', ' ', ':', '#', '\n', '$']),
        op in 0u8..3,
    ) {
        let corpus = corpus::all_builtins();
        let text = serialize_map(&corpus[which % corpus.len()].map);
        let mut chars: Vec<char> = text.chars().collect();
        let i = pos.index(chars.len());
        match op {
            0 => chars[i] = ch,
            1 => chars.insert(i, ch),
            _ => { chars.remove(i); }
        }
        let mutated: String = chars.into_iter().collect();
        if let Err(e) = parse_map(&mutated) {
            let lines: Vec<&str> = mutated.split('\n').collect();
            if let Some((line, column)) = e.position() {
                prop_assert!(line >= 1 && line <= lines.len(), "{e} in {mutated:?}");
                prop_assert!(column >= 1 && column <= lines[line - 1].chars().count() + 1, "{e} in {mutated:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn triangular_maps_are_keller_and_strongly_nilpotent(n in 1usize..=4, d in 2u32..=3, seed in any::<u64>()) {
        let f = corpus::random_triangular(n, d, seed);
        prop_assert!(matches!(f.is_keller().unwrap(), KellerStatus::Yes(c) if c.is_one()));
        let jh = jacobian_of_h(&f);
        prop_assert!(strong_nilpotency(&jh, &default_names(n)).unwrap().strongly_nilpotent);
    }

    #[test]
    fn tame_inverses_compose_to_the_identity(n in 2usize..=3, k in 0usize..=3, seed in any::<u64>()) {
        let (f, g) = corpus::random_tame(n, k, 2, seed);
        let u = Truncation::Unbounded;
        prop_assert!(g.compose(&f, u).unwrap().is_identity());
        prop_assert!(f.compose(&g, u).unwrap().is_identity());
    }

    #[test]
    fn report_text_round_trips_through_map_files(n in 1usize..=4, seed in any::<u64>()) {
        let f = corpus::random_triangular(n, 3, seed);
        let file = MapFile::from_map(Some("t".into()), f);
        prop_assert_eq!(MapFile::parse(&file.to_text()).unwrap(), file);
    }

    #[test]
    fn certificates_match_exact_evaluation(a in -3i64..=3, b in -3i64..=3, m in 2usize..=6) {
        // the exact walk stops at once; the certificate must agree with P_m
        let f = corpus::fibonacci_affine(a, b);
        let limits = pascal::Limits::with_term_ceiling(0);
        let status = pascal::pascal_check(&f, m, limits).unwrap();
        let cert = status.certificate.expect("fibonacci maps are not Pascal finite");
        let gf = FieldSpec::prime(cert.modulus).unwrap();
        let tableau = pascal::pascal_tableau(&f, m, Truncation::Unbounded, pascal::Limits::default()).unwrap();
        let point: Vec<Coefficient> = cert.point.iter().map(|&v| gf.from_i64(v as i64)).collect();
        let exact = tableau.steps[m].component(cert.component).to_field(gf).unwrap().eval(&point).unwrap();
        prop_assert_eq!(exact.residue_value(), Some(cert.value));
        prop_assert!(cert.check(&f).unwrap());
    }
}
