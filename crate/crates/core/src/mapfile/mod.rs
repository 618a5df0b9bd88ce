//! The `.map` text format and the JSON analysis report.
//!
//! ```text
//! # name: example
//! vars: x1 x2
//! field: Q
//! x1 + x2^2
//! x2
//! ```

mod parser;
pub mod report;

use std::fmt::Write as _;

use thiserror::Error;

use crate::coeff::FieldSpec;
use crate::poly::default_names;
use crate::polymap::PolyMap;

pub use report::{emit_report, AnalysisReport, REPORT_SCHEMA};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: expected {expected}, found {found}")]
    Syntax { line: usize, column: usize, expected: String, found: String },
    #[error("line {line}, column {column}: unknown variable `{name}`")]
    UnknownVariable { name: String, line: usize, column: usize },
    #[error("line {line}, column {column}: duplicate variable `{name}`")]
    DuplicateVariable { name: String, line: usize, column: usize },
    #[error("expected {expected} components (one per variable), found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("line {line}, column {column}: exponents must be natural numbers")]
    NonNaturalExponent { line: usize, column: usize },
    #[error("line {line}, column {column}: exponent too large")]
    ExponentOverflow { line: usize, column: usize },
    #[error("line {line}, column {column}: zero denominator")]
    ZeroDenominator { line: usize, column: usize },
    #[error("line {line}, column {column}: invalid field: {reason}")]
    InvalidField { line: usize, column: usize, reason: String },
}

impl ParseError {
    /// `(line, column)` of the offending token, when there is one.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            ParseError::Syntax { line, column, .. }
            | ParseError::UnknownVariable { line, column, .. }
            | ParseError::DuplicateVariable { line, column, .. }
            | ParseError::NonNaturalExponent { line, column }
            | ParseError::ExponentOverflow { line, column }
            | ParseError::ZeroDenominator { line, column }
            | ParseError::InvalidField { line, column, .. } => Some((*line, *column)),
            ParseError::ArityMismatch { .. } => None,
        }
    }
}

/// A parsed map file: the map plus its variable names, field and optional
/// name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapFile {
    pub name: Option<String>,
    pub vars: Vec<String>,
    pub field: FieldSpec,
    pub map: PolyMap,
}

impl MapFile {
    /// Wraps a map with default variable names `x1 .. xn`.
    pub fn from_map(name: Option<String>, map: PolyMap) -> Self {
        MapFile { name, vars: default_names(map.nvars()), field: map.field(), map }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parser::parse(text)
    }

    /// Canonical text: `vars:` and `field:` headers, then one component per
    /// line in descending graded-lex order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(name) = &self.name {
            writeln!(out, "# name: {name}").unwrap();
        }
        writeln!(out, "vars: {}", self.vars.join(" ")).unwrap();
        writeln!(out, "field: {}", self.field).unwrap();
        for c in self.map.components() {
            c.write_with_names(&mut out, &self.vars).unwrap();
            out.push('\n');
        }
        out
    }
}

pub fn parse_map(text: &str) -> Result<PolyMap, ParseError> {
    parser::parse(text).map(|f| f.map)
}

pub fn serialize_map(f: &PolyMap) -> String {
    MapFile::from_map(None, f.clone()).to_text()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{Ambient, Poly};

    fn q(n: usize) -> Ambient {
        Ambient::new(n, FieldSpec::Rationals)
    }

    #[test]
    fn parses_simple_map() {
        let f = parse_map("vars: x1 x2\nx1 + x2^2\nx2\n").unwrap();
        let a = q(2);
        let x2 = Poly::var(a, 1);
        assert_eq!(f.component(0), &(&Poly::var(a, 0) + &(&x2 * &x2)));
        assert_eq!(f.component(1), &x2);
    }

    #[test]
    fn parses_rationals_and_parentheses() {
        let f = parse_map("vars: x1 x2 x3\nx1 + 1/2*x3^2\n-(x2 - x1)^2 + x2\nx3 # trailing\n").unwrap();
        let a = q(3);
        let half = Poly::constant(a, FieldSpec::Rationals.from_fraction(&1.into(), &2.into()).unwrap());
        let x = |i| Poly::var(a, i);
        assert_eq!(f.component(0), &(&x(0) + &(&half * &(&x(2) * &x(2)))));
        let d = &x(1) - &x(0);
        assert_eq!(f.component(1), &(&x(1) - &(&d * &d)));
    }

    #[test]
    fn unary_minus_binds_at_expression_level() {
        let f = parse_map("vars: x\n-x^2\n").unwrap();
        let x = Poly::var(q(1), 0);
        assert_eq!(f.component(0), &(&x * &x).neg());
        let err = parse_map("vars: x\nx - -x\n").unwrap_err();
        assert_eq!(err.position(), Some((2, 5)));
    }

    #[test]
    fn name_and_field_headers() {
        let mf = MapFile::parse("# name: tiny\nvars: a b\nfield: GF(3)\na + 2*b^3\nb\n").unwrap();
        assert_eq!(mf.name.as_deref(), Some("tiny"));
        assert_eq!(mf.field, FieldSpec::PrimeField(3));
        assert_eq!(mf.to_text(), "# name: tiny\nvars: a b\nfield: GF(3)\n2*b^3 + a\nb\n");
        let mf = MapFile::parse("vars: a\nfield: GF(3)\n1/2*a\n").unwrap();
        assert_eq!(mf.map.component(0).to_string(), "2*x1");
    }

    #[test]
    fn error_positions() {
        let cases: &[(&str, ParseError)] = &[
            ("vars: x1 x2\nx1 + y\nx2\n", ParseError::UnknownVariable { name: "y".into(), line: 2, column: 6 }),
            ("vars: x1\nx1 ^ -2\n", ParseError::NonNaturalExponent { line: 2, column: 6 }),
            ("vars: x1\nx1^1/2\n", ParseError::NonNaturalExponent { line: 2, column: 4 }),
            ("vars: x1\n3/0*x1\n", ParseError::ZeroDenominator { line: 2, column: 3 }),
            ("vars: x1 x1\nx1\nx1\n", ParseError::DuplicateVariable { name: "x1".into(), line: 1, column: 10 }),
            ("vars: x1 x2\nx1\n", ParseError::ArityMismatch { expected: 2, found: 1 }),
            ("vars: x1\nfield: GF(4)\nx1\n", ParseError::InvalidField { line: 2, column: 11, reason: "4 is not prime".into() }),
            ("vars: x1\nfield: GF(5)\n1/5*x1\n", ParseError::ZeroDenominator { line: 3, column: 1 }),
        ];
        for (text, want) in cases {
            assert_eq!(&parse_map(text).unwrap_err(), want, "{text:?}");
        }
        let syntax = [
            ("vars: x1\nx1 x1\n", (2, 4)),
            ("vars: x1\n2x1\n", (2, 2)),
            ("vars: x1\n(x1 + 1\n", (2, 8)),
            ("vars: x1\nx1 @ 2\n", (2, 4)),
            ("x1\n", (1, 1)),
            ("", (1, 1)),
        ];
        for (text, pos) in syntax {
            let err = parse_map(text).unwrap_err();
            assert!(matches!(err, ParseError::Syntax { .. }), "{text:?}: {err}");
            assert_eq!(err.position(), Some(pos), "{text:?}: {err}");
        }
    }

    #[test]
    fn serialization_conventions() {
        let f = parse_map("vars: x1 x2\nx2 - 1/8*x1*x2^4\n0\n").unwrap();
        assert_eq!(serialize_map(&f), "vars: x1 x2\nfield: Q\n-1/8*x1*x2^4 + x2\n0\n");
        assert_eq!(parse_map(&serialize_map(&f)).unwrap(), f);
    }
}
