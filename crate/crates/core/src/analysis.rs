//! The full analysis pipeline behind `pascalis analyze`.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::mapfile::report::{
    BoundsSection, ComponentShape, InverseSection, KellerSection, NormalFormSection, PascalSection,
};
use crate::mapfile::{AnalysisReport, MapFile, REPORT_SCHEMA};
use crate::nilpotency::{self, jacobian_of_h, johnston_bound_holds, power_bound_holds, NilpotencyReport};
use crate::pascal::{self, default_m_max, Limits, PascalOutcome};
use crate::poly::default_names;
use crate::polymap::{KellerStatus, NormalForm};

#[derive(Clone, Debug, Default)]
pub struct AnalysisConfig {
    pub m_max: Option<usize>,
    pub limits: Limits,
    pub timings: bool,
}

struct Clock {
    enabled: bool,
    start: Instant,
    laps: BTreeMap<String, u64>,
}

impl Clock {
    fn lap(&mut self, name: &str) {
        if self.enabled {
            self.laps.insert(name.to_string(), self.start.elapsed().as_millis() as u64);
            self.start = Instant::now();
        }
    }
}

/// Whether `det J_F` is a nonzero constant, with the determinant written in
/// the file's variable names.
pub fn keller_section(file: &MapFile) -> Result<KellerSection> {
    Ok(match file.map.is_keller()? {
        KellerStatus::Yes(c) => KellerSection {
            status: "yes",
            constant: Some(c.to_string()),
            determinant: c.to_string(),
        },
        KellerStatus::No(det) => KellerSection {
            status: "no",
            constant: None,
            determinant: det.to_string_with_names(&file.vars),
        },
    })
}

/// Nilpotency data for `J_H`, where `H` comes from the normal form when
/// `J_F(0)` is invertible and from the raw map otherwise.
pub fn nilpotency_section(file: &MapFile) -> Result<NilpotencyReport> {
    let nf = match file.map.normalize() {
        Ok(nf) => Some(nf),
        Err(Error::SingularLinearPart) => None,
        Err(e) => return Err(e),
    };
    nilpotency_of(file, nf.as_ref())
}

fn nilpotency_of(file: &MapFile, nf: Option<&NormalForm>) -> Result<NilpotencyReport> {
    let jh = jacobian_of_h(nf.map_or(&file.map, |nf| nf.map()));
    match nilpotency::nilpotency_report(&jh, &file.vars) {
        Err(Error::NameCollision) => nilpotency::nilpotency_report(&jh, &default_names(file.map.nvars())),
        other => other,
    }
}

/// Runs every analysis on the map. Hitting the term ceiling is recorded in
/// the report (see [`AnalysisReport::hit_resource_limit`]) rather than
/// returned as an error.
pub fn analyze(file: &MapFile, cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    let f = &file.map;
    let n = f.nvars();
    let mut clock = Clock { enabled: cfg.timings, start: Instant::now(), laps: BTreeMap::new() };

    let keller = keller_section(file)?;
    let is_keller = keller.status == "yes";
    clock.lap("keller");

    let nf = match f.normalize() {
        Ok(nf) => Some(nf),
        Err(Error::SingularLinearPart) => None,
        Err(e) => return Err(e),
    };
    let normal_form = nf.as_ref().map(|nf| NormalFormSection {
        d: nf.min_order(),
        big_d: nf.max_degree(),
        per_component: nf
            .orders()
            .iter()
            .zip(nf.degrees())
            .map(|(&d_i, &big_d_i)| ComponentShape { d_i, big_d_i })
            .collect(),
        triangular: f.is_triangular().to_string(),
    });
    clock.lap("normal_form");

    let m_max = cfg.m_max.unwrap_or_else(|| default_m_max(f));
    let pascal = match pascal::pascal_check(f, m_max, cfg.limits) {
        Ok(status) => PascalSection {
            outcome: match status.outcome {
                PascalOutcome::Finite(_) => "finite",
                PascalOutcome::NotWithinBound => "not_within_bound",
            },
            index: status.index(),
            per_component_indices: status.per_component,
            m_max,
            evidence: status.trajectory,
            certificate: status.certificate,
            error: None,
        },
        Err(e @ Error::ResourceLimit { .. }) => PascalSection {
            outcome: "resource_limit",
            index: None,
            per_component_indices: vec![None; n],
            m_max,
            evidence: Vec::new(),
            certificate: None,
            error: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    };
    clock.lap("pascal");

    let mut inverse = InverseSection {
        present: false,
        verified: false,
        degree: None,
        m_used: None,
        components: Vec::new(),
        note: None,
    };
    let mut inverse_degree = None;
    if nf.is_none() {
        inverse.note = Some("J_F(0) is singular".into());
    } else if !is_keller {
        inverse.note = Some("not a Keller map".into());
    } else {
        match pascal::invert_map(f, cfg.limits) {
            Ok(res) => {
                inverse.present = true;
                inverse.verified = res.verified;
                inverse.degree = Some(res.inverse.degree());
                inverse.m_used = Some(res.m_used);
                inverse.components =
                    res.inverse.components().iter().map(|c| c.to_string_with_names(&file.vars)).collect();
                if res.verified {
                    inverse_degree = Some(res.inverse.degree());
                } else {
                    inverse.note = Some("candidate fails G ∘ F = X".into());
                }
            }
            Err(e @ (Error::ResourceLimit { .. } | Error::BoundOverflow(_))) => {
                inverse.note = Some(match e {
                    Error::ResourceLimit { .. } => e.to_string(),
                    other => other.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    clock.lap("inverse");

    let nilpotency = Some(nilpotency_of(file, nf.as_ref())?);
    clock.lap("nilpotency");

    let bounds = BoundsSection {
        deg_bound_n_minus_1: match inverse_degree {
            Some(g) if power_bound_holds(f.degree(), g, n - 1) => "ok",
            Some(_) => "violated",
            None => "not_applicable",
        },
        johnston: match (inverse_degree, nilpotency.as_ref().and_then(|r| r.strong_index)) {
            (Some(g), Some(p)) if johnston_bound_holds(f.degree(), g, p) => "ok",
            (Some(_), Some(_)) => "violated",
            _ => "not_applicable",
        },
    };

    Ok(AnalysisReport {
        schema: REPORT_SCHEMA,
        map_name: file.name.clone(),
        n,
        field: f.field(),
        keller,
        normal_form,
        pascal,
        inverse,
        nilpotency,
        bounds,
        timings_ms: cfg.timings.then_some(clock.laps),
    })
}
