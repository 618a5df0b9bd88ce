//! Pascal sequences `P_0 = X`, `P_{k+1} = P_k ∘ F - P_k`, bounded
//! finiteness checks, truncated inversion, and the identities relating the
//! sequence to iterates of `F`.
//!
//! The functions here take the map as given; they do not normalize it. The
//! inversion routines need `F(0) = 0` and an identity linear part and so take
//! a [`NormalForm`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeff::{binomial_in_field, Coefficient, FieldSpec};
use crate::error::{Error, Resource, Result};
use crate::poly::{Budget, ExtDegree, Poly, Truncation};
use crate::polymap::{NormalForm, PolyMap};

pub const DEFAULT_TERM_CEILING: usize = 5_000_000;
pub const DEFAULT_WORK_CEILING: u64 = 10_000_000;
pub const DEFAULT_M_MAX_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of stored terms in one step, summed over components.
    pub term_ceiling: usize,
    /// Maximum number of term operations spent on one component of one
    /// step. Deterministic, unlike a time limit.
    pub work_ceiling: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { term_ceiling: DEFAULT_TERM_CEILING, work_ceiling: DEFAULT_WORK_CEILING }
    }
}

impl Limits {
    pub fn with_term_ceiling(term_ceiling: usize) -> Self {
        Limits { term_ceiling, ..Limits::default() }
    }

    fn check(&self, step: usize, p: &PolyMap) -> Result<()> {
        let terms = p.term_count();
        if terms > self.term_ceiling {
            return Err(Error::ResourceLimit {
                step,
                resource: Resource::Terms,
                used: terms as u64,
                ceiling: self.term_ceiling as u64,
            });
        }
        Ok(())
    }

    fn budget(&self) -> Budget {
        Budget { max_terms: self.term_ceiling, max_work: self.work_ceiling }
    }
}

/// Re-labels a limit hit inside a substitution with the step it belongs to.
fn at_step(e: Error, k: usize) -> Error {
    match e {
        Error::ResourceLimit { resource, used, ceiling, .. } => Error::ResourceLimit { step: k, resource, used, ceiling },
        other => other,
    }
}

/// `Δ_F(P) = P ∘ F - P`.
pub fn delta(f: &PolyMap, p: &PolyMap, trunc: Truncation) -> Result<PolyMap> {
    f.ambient().check(&p.ambient())?;
    p.compose(f, trunc)?.sub(&p.truncate(trunc))
}

/// Per-step shape of a tableau entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepMetadata {
    pub k: usize,
    pub degrees: Vec<ExtDegree>,
    pub orders: Vec<ExtDegree>,
    pub terms: Vec<usize>,
}

impl StepMetadata {
    fn of(k: usize, p: &PolyMap) -> Self {
        StepMetadata {
            k,
            degrees: p.components().iter().map(Poly::degree).collect(),
            orders: p.components().iter().map(Poly::order).collect(),
            terms: p.components().iter().map(Poly::term_count).collect(),
        }
    }

    pub fn total_terms(&self) -> usize {
        self.terms.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct PascalTableau {
    pub steps: Vec<PolyMap>,
    pub metadata: Vec<StepMetadata>,
    pub trunc: Truncation,
}

impl PascalTableau {
    /// Index of the last computed step.
    pub fn last_step(&self) -> usize {
        self.metadata.len() - 1
    }

    /// First `k` with `P_k^i = 0`, per component, if reached.
    pub fn component_indices(&self) -> Vec<Option<usize>> {
        first_zero_steps(&self.metadata)
    }
}

fn first_zero_steps(metadata: &[StepMetadata]) -> Vec<Option<usize>> {
    let n = metadata[0].terms.len();
    (0..n)
        .map(|i| metadata.iter().find(|m| m.terms[i] == 0).map(|m| m.k))
        .collect()
}

struct Walk {
    metadata: Vec<StepMetadata>,
    /// Set when the term ceiling stopped the walk early.
    stopped: Option<Error>,
}

impl Walk {
    fn finished(self) -> Result<Vec<StepMetadata>> {
        match self.stopped {
            Some(e) => Err(e),
            None => Ok(self.metadata),
        }
    }
}

/// Walks the sequence, handing each step to `visit`, until a zero step,
/// `m_max` or the term ceiling.
fn walk(
    f: &PolyMap,
    m_max: usize,
    trunc: Truncation,
    limits: Limits,
    mut visit: impl FnMut(usize, &PolyMap),
) -> Result<Walk> {
    let mut p = PolyMap::identity(f.ambient()).truncate(trunc);
    let mut metadata = vec![StepMetadata::of(0, &p)];
    visit(0, &p);
    for k in 1..=m_max {
        let next = p
            .compose_within(f, trunc, limits.budget())
            .and_then(|pf| pf.sub(&p.truncate(trunc)))
            .and_then(|next| limits.check(k, &next).map(|()| next));
        p = match next.map_err(|e| at_step(e, k)) {
            Ok(next) => next,
            Err(e @ Error::ResourceLimit { .. }) => return Ok(Walk { metadata, stopped: Some(e) }),
            Err(e) => return Err(e),
        };
        let meta = StepMetadata::of(k, &p);
        log::info!(
            "pascal step {k}: {} terms, degrees {:?}",
            meta.total_terms(),
            meta.degrees.iter().map(ToString::to_string).collect::<Vec<_>>()
        );
        metadata.push(meta);
        visit(k, &p);
        if p.is_zero() {
            break;
        }
    }
    Ok(Walk { metadata, stopped: None })
}

/// `P_0, …, P_m` where `m` is the first zero step or `m_max`.
pub fn pascal_tableau(f: &PolyMap, m_max: usize, trunc: Truncation, limits: Limits) -> Result<PascalTableau> {
    let mut steps = Vec::new();
    let metadata = walk(f, m_max, trunc, limits, |_, p| steps.push(p.clone()))?.finished()?;
    Ok(PascalTableau { steps, metadata, trunc })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", content = "index", rename_all = "snake_case")]
pub enum PascalOutcome {
    Finite(usize),
    NotWithinBound,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PascalStatus {
    pub outcome: PascalOutcome,
    pub m_max: usize,
    /// First zero step per component, if reached within `m_max`.
    pub per_component: Vec<Option<usize>>,
    /// Exactly computed steps. Shorter than `m_max + 1` when the term
    /// ceiling stopped the walk and `certificate` settled the outcome.
    pub trajectory: Vec<StepMetadata>,
    pub certificate: Option<Certificate>,
}

/// Proof that `P_step^component` is not the zero polynomial: its value at
/// `point` in GF(`modulus`) is `value ≠ 0`.
///
/// The value is `Σ_l (-1)^(step-l) C(step, l) F^l(point)` evaluated in
/// GF(`modulus`), which equals `P_step(point)` because `P_m` is that
/// alternating sum of iterates. The modulus divides no coefficient
/// denominator of `F`, so reduction commutes with evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub step: usize,
    pub component: usize,
    pub modulus: u64,
    pub point: Vec<u64>,
    pub value: u64,
}

impl Certificate {
    /// Recomputes the value from scratch.
    pub fn check(&self, f: &PolyMap) -> Result<bool> {
        let field = FieldSpec::prime(self.modulus)?;
        let g = reduce(f, field)?;
        let point: Vec<Coefficient> = self.point.iter().map(|&v| field.from_i64(v as i64)).collect();
        let value = alternating_iterate_sum(&g, self.step, &point)?;
        Ok(value[self.component].residue_value() == Some(self.value) && self.value != 0)
    }
}

const CERTIFICATE_PRIMES: [u64; 3] = [4_294_967_291, 4_294_967_279, 4_294_967_231];
const CERTIFICATE_POINTS: usize = 8;

fn reduce(f: &PolyMap, field: FieldSpec) -> Result<PolyMap> {
    if f.field() == field {
        Ok(f.clone())
    } else {
        f.to_field(field)
    }
}

/// `Σ_l (-1)^(m-l) C(m, l) F^l(a)`, all in the field of `f`.
fn alternating_iterate_sum(f: &PolyMap, m: usize, a: &[Coefficient]) -> Result<Vec<Coefficient>> {
    let field = f.field();
    let mut x = a.to_vec();
    let mut acc: Vec<Coefficient> = vec![field.zero(); a.len()];
    for l in 0..=m {
        if l > 0 {
            x = f.components().iter().map(|c| c.eval(&x)).collect::<Result<_>>()?;
        }
        let mut b = binomial_in_field(m as u64, l as u64, field);
        if (m - l) % 2 == 1 {
            b = -b;
        }
        for (s, v) in acc.iter_mut().zip(&x) {
            *s += &(&b * v);
        }
    }
    Ok(acc)
}

/// Looks for a point where `P_m` does not vanish, over the map's own prime
/// field or over GF(q) for a large prime `q`.
fn nonvanishing_certificate(f: &PolyMap, m: usize) -> Result<Option<Certificate>> {
    let fields: Vec<FieldSpec> = match f.field() {
        FieldSpec::Rationals => CERTIFICATE_PRIMES.iter().map(|&q| FieldSpec::PrimeField(q)).collect(),
        own => vec![own],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for field in fields {
        let Ok(g) = reduce(f, field) else {
            // q divides a denominator
            continue;
        };
        let q = field.characteristic();
        for _ in 0..CERTIFICATE_POINTS {
            let point: Vec<u64> = (0..f.nvars()).map(|_| rng.gen_range(0..q)).collect();
            let a: Vec<Coefficient> = point.iter().map(|&v| field.from_i64(v as i64)).collect();
            let value = alternating_iterate_sum(&g, m, &a)?;
            if let Some(i) = value.iter().position(|v| !v.is_zero()) {
                let value = value[i].residue_value().expect("prime field");
                return Ok(Some(Certificate { step: m, component: i, modulus: q, point, value }));
            }
        }
    }
    Ok(None)
}

impl PascalStatus {
    pub fn index(&self) -> Option<usize> {
        match self.outcome {
            PascalOutcome::Finite(m) => Some(m),
            PascalOutcome::NotWithinBound => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.index().is_some()
    }
}

/// Looks for the least `m ≤ m_max` with `P_m = 0`, using exact arithmetic.
///
/// When the term ceiling stops the walk first, a nonzero value of
/// `P_{m_max}` at some point still decides the question, since a zero step
/// stays zero. The outcome is then `NotWithinBound` with a [`Certificate`];
/// if no such point turns up, the `ResourceLimit` error is returned.
pub fn pascal_check(f: &PolyMap, m_max: usize, limits: Limits) -> Result<PascalStatus> {
    let m_max = m_max.max(1);
    let Walk { metadata: trajectory, stopped } = walk(f, m_max, Truncation::Unbounded, limits, |_, _| {})?;
    let per_component = first_zero_steps(&trajectory);
    if let Some(e) = stopped {
        let Some(cert) = nonvanishing_certificate(f, m_max)? else {
            return Err(e);
        };
        log::info!("{e}; P_{m_max} is nonzero at a point mod {}", cert.modulus);
        return Ok(PascalStatus {
            outcome: PascalOutcome::NotWithinBound,
            m_max,
            per_component,
            trajectory,
            certificate: Some(cert),
        });
    }
    let last = trajectory.last().expect("step 0 is always present");
    let outcome = if last.total_terms() == 0 {
        PascalOutcome::Finite(last.k)
    } else {
        PascalOutcome::NotWithinBound
    };
    Ok(PascalStatus { outcome, m_max, per_component, trajectory, certificate: None })
}

/// `D^{n-1}` for a normal form, the degree bound on its inverse.
pub fn inverse_degree_bound(nf: &NormalForm) -> Result<u32> {
    let big_d = nf.max_degree().finite().ok_or(Error::DegenerateMap)?;
    let n = nf.nvars() as u32;
    big_d
        .checked_pow(n - 1)
        .ok_or_else(|| Error::BoundOverflow(format!("{big_d}^{}", n - 1)))
}

/// `m = ⌊(D^{n-1} - d_i)/(d - 1) + 1⌋ + 1`, clamped below at 1.
pub fn criterion_bound(nf: &NormalForm, i: usize) -> Result<usize> {
    if nf.is_identity() {
        return Err(Error::DegenerateMap);
    }
    let d_i = nf.orders()[i].finite().ok_or(Error::InfiniteOrder(i))?;
    let d = nf.min_order().finite().expect("some H_i is nonzero");
    let bound = inverse_degree_bound(nf)?;
    let num = i64::from(bound) - i64::from(d_i);
    let m = num.div_euclid(i64::from(d) - 1) + 2;
    Ok(m.max(1) as usize)
}

/// `3 × max_i criterion_bound`, capped at [`DEFAULT_M_MAX_CAP`]; the cap
/// itself when the map has no usable normal form.
pub fn default_m_max(f: &PolyMap) -> usize {
    let Ok(nf) = f.normalize() else {
        return DEFAULT_M_MAX_CAP;
    };
    if nf.is_identity() {
        return if f.is_identity() { 1 } else { DEFAULT_M_MAX_CAP };
    }
    let mut best = 0usize;
    for i in 0..nf.nvars() {
        match criterion_bound(&nf, i) {
            Ok(m) => best = best.max(m),
            Err(Error::InfiniteOrder(_)) => {}
            Err(_) => return DEFAULT_M_MAX_CAP,
        }
    }
    best.saturating_mul(3).min(DEFAULT_M_MAX_CAP)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InverseResult {
    pub inverse: PolyMap,
    /// Largest number of tableau steps summed, over all components.
    pub m_used: usize,
    pub verified: bool,
}

/// The first `m` entries of component `i` of the sequence, truncated.
fn component_steps(f: &PolyMap, i: usize, m: usize, trunc: Truncation, limits: Limits) -> Result<Vec<Poly>> {
    let mut p = Poly::var(f.ambient(), i).truncate(trunc);
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        if k > 0 {
            let pf = p.substitute_within(f.components(), trunc, limits.budget()).map_err(|e| at_step(e, k))?;
            p = pf.sub(&p, trunc)?;
            if p.term_count() > limits.term_ceiling {
                return Err(Error::ResourceLimit {
                    step: k,
                    resource: Resource::Terms,
                    used: p.term_count() as u64,
                    ceiling: limits.term_ceiling as u64,
                });
            }
            log::debug!("component {i}, step {k}: {} terms", p.term_count());
        }
        if p.is_zero() {
            break;
        }
        out.push(p.clone());
    }
    Ok(out)
}

fn alternating_sum(steps: &[Poly], nf: &NormalForm) -> Poly {
    let mut acc = Poly::zero(nf.map().ambient());
    for (l, p) in steps.iter().enumerate() {
        acc = if l % 2 == 0 { &acc + p } else { &acc - p };
    }
    acc
}

fn is_two_sided_inverse(f: &PolyMap, g: &PolyMap) -> Result<bool> {
    if !g.compose(f, Truncation::Unbounded)?.is_identity() {
        return Ok(false);
    }
    // over a field of characteristic zero a left inverse is two-sided
    if f.field().is_finite() {
        return Ok(f.compose(g, Truncation::Unbounded)?.is_identity());
    }
    Ok(true)
}

/// Inverts a normal form with the truncated alternating sum
/// `G_i = Σ_{l<m_i} (-1)^l P̃_l^i`, truncating at `D^{n-1}`, then checks the
/// candidate by exact composition.
pub fn invert(nf: &NormalForm, limits: Limits) -> Result<InverseResult> {
    let f = nf.map();
    if nf.is_identity() {
        return Ok(InverseResult { inverse: f.clone(), m_used: 1, verified: true });
    }
    let trunc = Truncation::Degree(inverse_degree_bound(nf)?);
    let bounds = (0..nf.nvars())
        .map(|i| match criterion_bound(nf, i) {
            Err(Error::InfiniteOrder(_)) => Ok(1),
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    log::info!("inverting with truncation {trunc} and step bounds {bounds:?}");
    let components = bounds
        .par_iter()
        .enumerate()
        .map(|(i, &m)| Ok(alternating_sum(&component_steps(f, i, m, trunc, limits)?, nf)))
        .collect::<Result<Vec<_>>>()?;
    let inverse = PolyMap::new(components)?;
    let verified = is_two_sided_inverse(f, &inverse)?;
    let m_used = bounds.into_iter().max().unwrap_or(1);
    Ok(InverseResult { inverse, m_used, verified })
}

/// Inverts an arbitrary map with invertible linear part by normalizing,
/// inverting the normal form and undoing the affine change.
pub fn invert_map(f: &PolyMap, limits: Limits) -> Result<InverseResult> {
    let nf = f.normalize()?;
    let res = invert(&nf, limits)?;
    let inverse = nf.denormalize_inverse(&res.inverse)?;
    let verified = res.verified && is_two_sided_inverse(f, &inverse)?;
    Ok(InverseResult { inverse, m_used: res.m_used, verified })
}

/// The degree `≤ order_n` part of the formal inverse `Σ_k (-1)^k P_k`.
/// Steps stop once the order bound `(k-1)(d-1) + d` exceeds `order_n`.
pub fn formal_inverse_truncated(nf: &NormalForm, order_n: u32, limits: Limits) -> Result<PolyMap> {
    let f = nf.map();
    let trunc = Truncation::Degree(order_n);
    let Some(d) = nf.min_order().finite() else {
        return Ok(f.truncate(trunc));
    };
    let mut steps = 1usize;
    while (steps as u64) * u64::from(d - 1) + u64::from(d) <= u64::from(order_n) {
        steps += 1;
    }
    // steps k = 0 ..= steps may contribute
    let components = (0..nf.nvars())
        .into_par_iter()
        .map(|i| Ok(alternating_sum(&component_steps(f, i, steps + 1, trunc, limits)?, nf)))
        .collect::<Result<Vec<_>>>()?;
    PolyMap::new(components)
}

/// Checks `X = Σ_{k<m} (-1)^k P_k(F) + (-1)^m P_m` exactly, with each
/// `P_k(F)` formed by composition.
pub fn reconstruction_check(f: &PolyMap, m: usize, limits: Limits) -> Result<bool> {
    let mut steps = Vec::with_capacity(m + 1);
    let meta = walk(f, m, Truncation::Unbounded, limits, |_, p| steps.push(p.clone()))?.finished()?;
    let zero = PolyMap::new(vec![Poly::zero(f.ambient()); f.nvars()])?;
    while steps.len() <= m {
        steps.push(zero.clone());
    }
    debug_assert!(meta.len() <= m + 1);
    let mut acc = zero.clone();
    for (k, p) in steps.iter().take(m).enumerate() {
        let pf = p.compose(f, Truncation::Unbounded)?;
        acc = if k % 2 == 0 { acc.add(&pf)? } else { acc.sub(&pf)? };
    }
    acc = if m % 2 == 0 { acc.add(&steps[m])? } else { acc.sub(&steps[m])? };
    Ok(acc.is_identity())
}

/// Checks `Σ_{l=0}^m (-1)^{m-l} C(m,l) F^l = 0` using the iterates `F^l`.
pub fn binomial_relation_check(f: &PolyMap, m: usize, trunc: Truncation, limits: Limits) -> Result<bool> {
    let field = f.field();
    let mut power = PolyMap::identity(f.ambient()).truncate(trunc);
    let mut acc: Vec<Poly> = vec![Poly::zero(f.ambient()); f.nvars()];
    for l in 0..=m {
        if l > 0 {
            power = power.compose(f, trunc)?;
            limits.check(l, &power)?;
        }
        let mut c = binomial_in_field(m as u64, l as u64, field);
        if (m - l) % 2 == 1 {
            c = -c;
        }
        for (a, p) in acc.iter_mut().zip(power.components()) {
            *a = a.add(&p.scale(&c), trunc)?;
        }
    }
    Ok(acc.iter().all(Poly::is_zero))
}

/// For `H` homogeneous of one degree `d`, checks that every homogeneous
/// layer of `P_k` (for `1 ≤ k ≤ max_step`) has degree `(k+j-1)(d-1)+1` for
/// some `1 ≤ j ≤ (d^k - 1)/(d - 1) - k + 1`.
pub fn homogeneous_layers_check(f: &PolyMap, max_step: usize, limits: Limits) -> Result<bool> {
    let h = f.sub(&PolyMap::identity(f.ambient()))?;
    let mut degrees = h.components().iter().filter(|c| !c.is_zero()).map(|c| {
        if c.is_homogeneous() {
            c.degree().finite()
        } else {
            None
        }
    });
    let d = match degrees.next() {
        None => return Ok(true),
        Some(Some(d)) => d,
        Some(None) => return Err(Error::NotHomogeneous),
    };
    if d == 0 || degrees.any(|e| e != Some(d)) {
        return Err(Error::NotHomogeneous);
    }
    let mut ok = true;
    walk(f, max_step, Truncation::Unbounded, limits, |k, p| {
        if k == 0 || !ok {
            return;
        }
        for c in p.components() {
            for e in c.layer_degrees() {
                if !layer_degree_allowed(k as u64, u64::from(d), u64::from(e)) {
                    ok = false;
                }
            }
        }
    })?
    .finished()?;
    Ok(ok)
}

fn layer_degree_allowed(k: u64, d: u64, e: u64) -> bool {
    if d == 1 {
        return e == 1;
    }
    if e == 0 || (e - 1) % (d - 1) != 0 {
        return false;
    }
    let j_plus = (e - 1) / (d - 1); // k + j - 1
    if j_plus < k {
        return false;
    }
    // e ≤ d^k, the degree at the largest admissible j
    match d.checked_pow(k as u32) {
        Some(top) => e <= top,
        None => true,
    }
}
