use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::coeff::FieldSpec;
use crate::nilpotency::NilpotencyReport;
use crate::pascal::{Certificate, StepMetadata};
use crate::poly::ExtDegree;

pub const REPORT_SCHEMA: &str = "pascalis-report/1";

/// Everything `analyze` finds out about one map. Field order is the JSON key
/// order.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub schema: &'static str,
    pub map_name: Option<String>,
    pub n: usize,
    pub field: FieldSpec,
    pub keller: KellerSection,
    pub normal_form: Option<NormalFormSection>,
    pub pascal: PascalSection,
    pub inverse: InverseSection,
    pub nilpotency: Option<NilpotencyReport>,
    pub bounds: BoundsSection,
    pub timings_ms: Option<BTreeMap<String, u64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KellerSection {
    /// `"yes"` or `"no"`.
    pub status: &'static str,
    pub constant: Option<String>,
    pub determinant: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentShape {
    pub d_i: ExtDegree,
    #[serde(rename = "D_i")]
    pub big_d_i: ExtDegree,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalFormSection {
    pub d: ExtDegree,
    #[serde(rename = "D")]
    pub big_d: ExtDegree,
    pub per_component: Vec<ComponentShape>,
    pub triangular: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PascalSection {
    /// `"finite"`, `"not_within_bound"` or `"resource_limit"`.
    pub outcome: &'static str,
    pub index: Option<usize>,
    pub per_component_indices: Vec<Option<usize>>,
    pub m_max: usize,
    pub evidence: Vec<StepMetadata>,
    pub certificate: Option<Certificate>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseSection {
    pub present: bool,
    pub verified: bool,
    pub degree: Option<ExtDegree>,
    pub m_used: Option<usize>,
    pub components: Vec<String>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsSection {
    /// `"ok"`, `"violated"` or `"not_applicable"`.
    pub deg_bound_n_minus_1: &'static str,
    pub johnston: &'static str,
}

impl AnalysisReport {
    /// Whether some stage stopped at the term ceiling.
    pub fn hit_resource_limit(&self) -> bool {
        self.pascal.outcome == "resource_limit"
            || self.inverse.note.as_deref().is_some_and(|n| n.contains("ceiling exceeded"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let name = self.map_name.as_deref().unwrap_or("(unnamed)");
        writeln!(s, "map: {name} (n = {}, field {})", self.n, self.field).unwrap();
        match &self.keller.constant {
            Some(c) => writeln!(s, "keller: yes, det J_F = {c}").unwrap(),
            None => writeln!(s, "keller: no, det J_F = {}", self.keller.determinant).unwrap(),
        }
        match &self.normal_form {
            Some(nf) => {
                let shapes: Vec<String> =
                    nf.per_component.iter().map(|c| format!("({}, {})", c.d_i, c.big_d_i)).collect();
                writeln!(s, "normal form: d = {}, D = {}, (d_i, D_i) = {}", nf.d, nf.big_d, shapes.join(" ")).unwrap();
                writeln!(s, "triangular: {}", nf.triangular).unwrap();
            }
            None => writeln!(s, "normal form: none (J_F(0) is singular)").unwrap(),
        }
        let p = &self.pascal;
        match p.index {
            Some(m) => writeln!(s, "pascal: finite, index {m}, per component {}", fmt_opts(&p.per_component_indices)).unwrap(),
            None => writeln!(s, "pascal: {} (m_max = {})", p.outcome.replace('_', " "), p.m_max).unwrap(),
        }
        if let Some(c) = &p.certificate {
            let point: Vec<String> = c.point.iter().map(u64::to_string).collect();
            writeln!(
                s,
                "  P_{} component {} is {} at ({}) mod {}",
                c.step,
                c.component + 1,
                c.value,
                point.join(", "),
                c.modulus
            )
            .unwrap();
        }
        if let Some(e) = &p.error {
            writeln!(s, "  {e}").unwrap();
        }
        if p.index.is_none() {
            for step in &p.evidence {
                let degs: Vec<String> = step.degrees.iter().map(ExtDegree::to_string).collect();
                writeln!(s, "  k = {:>2}: degrees [{}], {} terms", step.k, degs.join(", "), step.total_terms()).unwrap();
            }
        }
        let inv = &self.inverse;
        if inv.present {
            let degree = inv.degree.map(|d| d.to_string()).unwrap_or_default();
            writeln!(s, "inverse: degree {degree}, verified {}", inv.verified).unwrap();
            for c in &inv.components {
                writeln!(s, "  {c}").unwrap();
            }
        } else {
            writeln!(s, "inverse: none").unwrap();
        }
        if let Some(note) = &inv.note {
            writeln!(s, "  {note}").unwrap();
        }
        if let Some(nil) = &self.nilpotency {
            writeln!(
                s,
                "nilpotency: nilpotent {} (index {}), strongly nilpotent {} (index {})",
                nil.nilpotent,
                fmt_opt(nil.index),
                nil.strongly_nilpotent,
                fmt_opt(nil.strong_index)
            )
            .unwrap();
            if let Some(w) = &nil.witness {
                writeln!(s, "  product of {} factors, entry ({}, {}) = {}", w.factors, w.row + 1, w.col + 1, w.entry).unwrap();
            }
        }
        writeln!(s, "bounds: deg G <= (deg F)^(n-1) {}, johnston {}", self.bounds.deg_bound_n_minus_1, self.bounds.johnston).unwrap();
        if let Some(t) = &self.timings_ms {
            let parts: Vec<String> = t.iter().map(|(k, v)| format!("{k} {v} ms")).collect();
            writeln!(s, "timings: {}", parts.join(", ")).unwrap();
        }
        s
    }
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn fmt_opts(v: &[Option<usize>]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_opt(*x)).collect();
    format!("({})", parts.join(", "))
}

/// Pretty JSON with a trailing newline.
pub fn emit_report(r: &AnalysisReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}
