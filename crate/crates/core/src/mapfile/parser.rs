use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use super::{MapFile, ParseError};
use crate::coeff::FieldSpec;
use crate::poly::{Ambient, Poly, Truncation};
use crate::polymap::PolyMap;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    LParen,
    RParen,
    Colon,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("number `{n}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Colon => "`:`".into(),
            Tok::End => "end of line".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    column: usize,
}

fn lex(line: usize, text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '^' => Some(Tok::Caret),
            '/' => Some(Tok::Slash),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, column });
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let n = digits.parse::<BigInt>().expect("ascii digits");
            out.push(Spanned { tok: Tok::Int(n), column });
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), column });
        } else {
            return Err(ParseError::Syntax {
                line,
                column,
                expected: "a token".into(),
                found: format!("`{c}`"),
            });
        }
    }
    out.push(Spanned { tok: Tok::End, column: chars.len() + 1 });
    Ok(out)
}

/// Single-line cursor with one token of lookahead.
struct Cursor<'a> {
    line: usize,
    toks: Vec<Spanned>,
    pos: usize,
    vars: &'a [String],
    ambient: Ambient,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn column(&self) -> usize {
        self.toks[self.pos].column
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column: self.column(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Spanned, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::End => Ok(()),
            _ => Err(self.unexpected("`+`, `-`, `*` or end of line")),
        }
    }

    // expr := ["-"] term (("+" | "-") term)*
    fn expr(&mut self) -> Result<Poly, ParseError> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let first = self.term()?;
        let mut acc = if negate { first.neg() } else { first };
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    // term := factor ("*" factor)*
    fn term(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.factor()?;
        while *self.peek() == Tok::Star {
            let column = self.bump().column;
            let rhs = self.factor()?;
            acc = acc
                .mul(&rhs, Truncation::Unbounded)
                .map_err(|_| ParseError::ExponentOverflow { line: self.line, column })?;
        }
        Ok(acc)
    }

    // factor := base ["^" nat]
    fn factor(&mut self) -> Result<Poly, ParseError> {
        let base = self.base()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        let caret = self.bump().column;
        let column = self.column();
        let e = match self.peek().clone() {
            Tok::Int(n) => {
                if *self.peek_at(1) == Tok::Slash {
                    return Err(ParseError::NonNaturalExponent { line: self.line, column });
                }
                self.bump();
                n.to_u32().ok_or(ParseError::ExponentOverflow { line: self.line, column })?
            }
            Tok::Minus => return Err(ParseError::NonNaturalExponent { line: self.line, column }),
            _ => return Err(self.unexpected("a natural exponent")),
        };
        base.pow(e, Truncation::Unbounded)
            .map_err(|_| ParseError::ExponentOverflow { line: self.line, column: caret })
    }

    // base := rational | ident | "(" expr ")"
    fn base(&mut self) -> Result<Poly, ParseError> {
        match self.peek().clone() {
            Tok::Int(num) => {
                let start = self.column();
                self.bump();
                let mut den = BigInt::from(1);
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let column = self.column();
                    match self.peek().clone() {
                        Tok::Int(d) => {
                            self.bump();
                            if d.is_zero() {
                                return Err(ParseError::ZeroDenominator { line: self.line, column });
                            }
                            den = d;
                        }
                        _ => return Err(self.unexpected("a positive denominator")),
                    }
                }
                let c = self
                    .ambient
                    .field
                    .from_fraction(&num, &den)
                    .map_err(|_| ParseError::ZeroDenominator { line: self.line, column: start })?;
                Ok(Poly::constant(self.ambient, c))
            }
            Tok::Ident(name) => {
                let column = self.column();
                self.bump();
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Poly::var(self.ambient, i)),
                    None => Err(ParseError::UnknownVariable { name, line: self.line, column }),
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a number, variable or `(`")),
        }
    }
}

struct Line<'t> {
    number: usize,
    text: &'t str,
}

/// Strips `#` comments, returning the code part and the `name:` value of a
/// `# name: ...` comment if present.
fn split_comment(text: &str) -> (&str, Option<&str>) {
    match text.find('#') {
        None => (text, None),
        Some(i) => {
            let comment = text[i + 1..].trim();
            let name = comment.strip_prefix("name:").map(str::trim).filter(|s| !s.is_empty());
            (&text[..i], name)
        }
    }
}

pub(super) fn parse(text: &str) -> Result<MapFile, ParseError> {
    let mut name = None;
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let (code, n) = split_comment(raw);
        if let Some(n) = n {
            name.get_or_insert_with(|| n.to_string());
        }
        if !code.trim().is_empty() {
            lines.push(Line { number: i + 1, text: code });
        }
    }
    let mut rest = lines.iter();
    let Some(header) = rest.next() else {
        let line = text.lines().count().max(1);
        return Err(ParseError::Syntax {
            line,
            column: 1,
            expected: "`vars:` header".into(),
            found: "end of input".into(),
        });
    };
    let vars = parse_vars(header)?;

    let mut field = FieldSpec::Rationals;
    let mut body: Vec<&Line> = rest.collect();
    if let Some(first) = body.first() {
        let toks = lex(first.number, first.text)?;
        if matches!(&toks[0].tok, Tok::Ident(s) if s == "field") && toks[1].tok == Tok::Colon {
            field = parse_field(first.number, &toks)?;
            body.remove(0);
        }
    }

    let ambient = Ambient::new(vars.len(), field);
    if body.len() != vars.len() {
        return Err(ParseError::ArityMismatch { expected: vars.len(), found: body.len() });
    }
    let mut components = Vec::with_capacity(vars.len());
    for line in body {
        let mut cur = Cursor { line: line.number, toks: lex(line.number, line.text)?, pos: 0, vars: &vars, ambient };
        let p = cur.expr()?;
        cur.expect_end()?;
        components.push(p);
    }
    let map = PolyMap::new(components).expect("component count matches variable count");
    Ok(MapFile { name, vars, field, map })
}

fn parse_vars(line: &Line) -> Result<Vec<String>, ParseError> {
    let toks = lex(line.number, line.text)?;
    let syntax = |t: &Spanned, expected: &str| ParseError::Syntax {
        line: line.number,
        column: t.column,
        expected: expected.into(),
        found: t.tok.describe(),
    };
    if !matches!(&toks[0].tok, Tok::Ident(s) if s == "vars") {
        return Err(syntax(&toks[0], "`vars:` header"));
    }
    if toks[1].tok != Tok::Colon {
        return Err(syntax(&toks[1], "`:`"));
    }
    let mut vars: Vec<String> = Vec::new();
    for t in &toks[2..] {
        match &t.tok {
            Tok::Ident(s) => {
                if vars.contains(s) {
                    return Err(ParseError::DuplicateVariable {
                        name: s.clone(),
                        line: line.number,
                        column: t.column,
                    });
                }
                vars.push(s.clone());
            }
            Tok::End if !vars.is_empty() => break,
            _ => return Err(syntax(t, "a variable name")),
        }
    }
    Ok(vars)
}

fn parse_field(line: usize, toks: &[Spanned]) -> Result<FieldSpec, ParseError> {
    let syntax = |t: &Spanned, expected: &str| ParseError::Syntax {
        line,
        column: t.column,
        expected: expected.into(),
        found: t.tok.describe(),
    };
    let t = &toks[2];
    let (field, next) = match &t.tok {
        Tok::Ident(s) if s == "Q" => (FieldSpec::Rationals, 3),
        Tok::Ident(s) if s == "GF" => {
            if toks[3].tok != Tok::LParen {
                return Err(syntax(&toks[3], "`(`"));
            }
            let p = match &toks[4].tok {
                Tok::Int(p) => p,
                _ => return Err(syntax(&toks[4], "a prime modulus")),
            };
            if toks[5].tok != Tok::RParen {
                return Err(syntax(&toks[5], "`)`"));
            }
            let invalid = |reason: String| ParseError::InvalidField { line, column: toks[4].column, reason };
            let p = p.to_u64().ok_or_else(|| invalid(format!("modulus {p} is too large")))?;
            (FieldSpec::prime(p).map_err(|e| invalid(e.to_string()))?, 6)
        }
        _ => return Err(syntax(t, "`Q` or `GF(p)`")),
    };
    match toks.get(next) {
        Some(Spanned { tok: Tok::End, .. }) => Ok(field),
        Some(t) => Err(syntax(t, "end of line")),
        None => Ok(field),
    }
}
