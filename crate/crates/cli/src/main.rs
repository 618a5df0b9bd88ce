use std::fmt::Write as _;
use std::io::Read;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use pascalis::analysis::{analyze, keller_section, nilpotency_section, AnalysisConfig};
use pascalis::corpus::{self, ExpectedPascal, BUILTIN_NAMES};
use pascalis::mapfile::emit_report;
use pascalis::mapfile::report::PascalSection;
use pascalis::pascal::{self, Limits, PascalOutcome, DEFAULT_TERM_CEILING, DEFAULT_WORK_CEILING};
use pascalis::{Error, FieldSpec, MapFile, ParseError, PolyMap, Truncation};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pascalis", version, about = "Exact analysis of polynomial maps K^n -> K^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(clap::Args)]
struct Options {
    /// Largest Pascal step to examine (default: 3x the criterion bound, at most 64)
    #[arg(long, global = true, value_name = "N")]
    m_max: Option<usize>,
    /// Degree truncation for compose and iterate
    #[arg(long, global = true, value_name = "N|unbounded", value_parser = parse_truncation)]
    truncate: Option<Truncation>,
    /// Maximum number of terms held by one step before giving up
    #[arg(long, global = true, env = "PASCALIS_TERM_CEILING", default_value_t = DEFAULT_TERM_CEILING)]
    term_ceiling: usize,
    /// Maximum number of term operations for one component of one step
    #[arg(long, global = true, env = "PASCALIS_WORK_CEILING", default_value_t = DEFAULT_WORK_CEILING)]
    work_ceiling: u64,
    /// Reinterpret the input over another field
    #[arg(long, global = true, value_name = "q|gf:P", value_parser = parse_field)]
    field: Option<FieldSpec>,
    /// Output format (maps default to map-file text, everything else to json)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for builtin:random_triangular(..) and builtin:random_tame(..)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Include per-stage wall-clock times in analyze reports
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full report: Keller, normal form, Pascal check, inverse, nilpotency, bounds
    Analyze { input: String },
    /// Inverse via the truncated Pascal series, as a map file
    Invert { input: String },
    /// Decide whether P_m = 0 for some m <= m_max
    Pascal { input: String },
    /// Nilpotency and strong nilpotency of J_H
    Nilpotent { input: String },
    /// Jacobian determinant
    Keller { input: String },
    /// The composition outer ∘ inner
    Compose { outer: String, inner: String },
    /// The k-th iterate F^k
    Iterate { input: String, k: usize },
    /// List the built-in examples with their recorded facts
    Corpus,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn parse_truncation(s: &str) -> Result<Truncation, String> {
    if s == "unbounded" {
        return Ok(Truncation::Unbounded);
    }
    s.parse::<u32>().map(Truncation::Degree).map_err(|_| format!("expected a natural number or `unbounded`, got `{s}`"))
}

fn parse_field(s: &str) -> Result<FieldSpec, String> {
    if s.eq_ignore_ascii_case("q") {
        return Ok(FieldSpec::Rationals);
    }
    let p = s
        .strip_prefix("gf:")
        .and_then(|p| p.parse::<u64>().ok())
        .ok_or_else(|| format!("expected `q` or `gf:P`, got `{s}`"))?;
    FieldSpec::prime(p).map_err(|e| e.to_string())
}

enum Failure {
    Input(String),
    Resource(String),
    Unverified,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Resource(_) => 2,
            Failure::Unverified => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ResourceLimit { .. } => Failure::Resource(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn parse_error(source: &str, e: ParseError) -> Failure {
    let kind = match e {
        ParseError::Syntax { .. } => "syntax error",
        _ => "parse error",
    };
    Failure::Input(format!("{source}: {kind}: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(jobs) = cli.opts.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err((out, failure)) => {
            print!("{out}");
            match &failure {
                Failure::Input(msg) | Failure::Resource(msg) => eprintln!("error: {msg}"),
                Failure::Unverified => eprintln!("error: the candidate inverse fails G ∘ F = X"),
            }
            ExitCode::from(failure.code())
        }
    }
}

/// Stdout text, or stdout text plus the failure that sets the exit code.
type Outcome = Result<String, (String, Failure)>;

fn fail(f: impl Into<Failure>) -> (String, Failure) {
    (String::new(), f.into())
}

fn run(cli: &Cli) -> Outcome {
    let o = &cli.opts;
    let limits = Limits { term_ceiling: o.term_ceiling, work_ceiling: o.work_ceiling };
    let truncation_used = matches!(cli.command, Command::Compose { .. } | Command::Iterate { .. });
    if o.truncate.is_some() && !truncation_used {
        return Err(fail(Failure::Input("--truncate applies to compose and iterate only".into())));
    }
    let trunc = o.truncate.unwrap_or_default();
    match &cli.command {
        Command::Analyze { input } => {
            let file = load(input, o).map_err(fail)?;
            let cfg = AnalysisConfig { m_max: o.m_max, limits, timings: o.timings };
            let report = analyze(&file, &cfg).map_err(fail)?;
            let out = match o.format.unwrap_or(Format::Json) {
                Format::Json => emit_report(&report),
                Format::Text => report.to_text(),
            };
            if report.hit_resource_limit() {
                let msg = report.pascal.error.clone().or_else(|| report.inverse.note.clone()).unwrap_or_default();
                return Err((out, Failure::Resource(msg)));
            }
            Ok(out)
        }
        Command::Invert { input } => {
            let file = load(input, o).map_err(fail)?;
            let res = pascal::invert_map(&file.map, limits).map_err(fail)?;
            let name = file.name.as_ref().map(|n| format!("{n}_inverse"));
            let inv = MapFile { name, vars: file.vars.clone(), field: file.field, map: res.inverse };
            let out = match o.format.unwrap_or(Format::Text) {
                Format::Text => inv.to_text(),
                Format::Json => {
                    let mut v = map_json(&inv);
                    v["verified"] = json!(res.verified);
                    v["m_used"] = json!(res.m_used);
                    v["degree"] = json!(inv.map.degree());
                    to_json(&v)
                }
            };
            if res.verified {
                Ok(out)
            } else {
                Err((out, Failure::Unverified))
            }
        }
        Command::Pascal { input } => {
            let file = load(input, o).map_err(fail)?;
            let m_max = o.m_max.unwrap_or_else(|| pascal::default_m_max(&file.map));
            info!("pascal check up to m = {m_max}");
            let status = pascal::pascal_check(&file.map, m_max, limits).map_err(fail)?;
            let section = PascalSection {
                outcome: match status.outcome {
                    PascalOutcome::Finite(_) => "finite",
                    PascalOutcome::NotWithinBound => "not_within_bound",
                },
                index: status.index(),
                per_component_indices: status.per_component.clone(),
                m_max,
                evidence: status.trajectory.clone(),
                certificate: status.certificate.clone(),
                error: None,
            };
            Ok(match o.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&section),
                Format::Text => pascal_text(&section),
            })
        }
        Command::Nilpotent { input } => {
            let file = load(input, o).map_err(fail)?;
            let r = nilpotency_section(&file).map_err(fail)?;
            Ok(match o.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&r),
                Format::Text => {
                    let mut s = String::new();
                    writeln!(s, "nilpotent: {} (index {})", r.nilpotent, opt(r.index)).unwrap();
                    writeln!(s, "strongly nilpotent: {} (index {})", r.strongly_nilpotent, opt(r.strong_index)).unwrap();
                    if let Some(w) = &r.witness {
                        writeln!(s, "witness: product of {} factors, entry ({}, {}) = {}", w.factors, w.row + 1, w.col + 1, w.entry)
                            .unwrap();
                    }
                    if let Some(b) = &r.basis_witness {
                        let e: Vec<String> = b.iter().map(|i| format!("e{}", i + 1)).collect();
                        writeln!(s, "nonzero at basis vectors: {}", e.join(", ")).unwrap();
                    }
                    s
                }
            })
        }
        Command::Keller { input } => {
            let file = load(input, o).map_err(fail)?;
            let k = keller_section(&file).map_err(fail)?;
            Ok(match o.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&k),
                Format::Text => format!("keller: {}, det J_F = {}\n", k.status, k.determinant),
            })
        }
        Command::Compose { outer, inner } => {
            let a = load(outer, o).map_err(fail)?;
            let b = load(inner, o).map_err(fail)?;
            let map = a.map.compose(&b.map, trunc).map_err(fail)?;
            let name = match (&a.name, &b.name) {
                (Some(x), Some(y)) => Some(format!("{x}_after_{y}")),
                _ => None,
            };
            Ok(emit_map(&MapFile { name, vars: a.vars, field: a.field, map }, o.format))
        }
        Command::Iterate { input, k } => {
            let file = load(input, o).map_err(fail)?;
            let map = file.map.iterate(*k, trunc).map_err(fail)?;
            let name = file.name.as_ref().map(|n| format!("{n}_iterate_{k}"));
            Ok(emit_map(&MapFile { name, vars: file.vars, field: file.field, map }, o.format))
        }
        Command::Corpus => {
            let entries: Vec<Value> = BUILTIN_NAMES.iter().map(|n| corpus_entry(n)).collect::<Result<_, _>>().map_err(fail)?;
            Ok(match o.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&entries),
                Format::Text => {
                    let mut s = String::new();
                    for (name, e) in BUILTIN_NAMES.iter().zip(&entries) {
                        writeln!(s, "{name}: n = {}, pascal {}", e["n"], e["expected"]["pascal"]["value"]).unwrap();
                    }
                    s
                }
            })
        }
    }
}

fn load(input: &str, o: &Options) -> Result<MapFile, Failure> {
    let mut file = if let Some(name) = input.strip_prefix("builtin:") {
        let map = random_builtin(name, o.seed).unwrap_or_else(|| corpus::builtin(name).map(|ex| ex.map))?;
        MapFile::from_map(Some(name.to_string()), map)
    } else {
        let text = if input == "-" {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Input(format!("stdin: {e}")))?;
            s
        } else {
            std::fs::read_to_string(input).map_err(|e| Failure::Input(format!("{input}: {e}")))?
        };
        let source = if input == "-" { "stdin" } else { input };
        MapFile::parse(&text).map_err(|e| parse_error(source, e))?
    };
    if let Some(field) = o.field {
        if field != file.field {
            file.map = file.map.to_field(field).map_err(|e| Failure::Input(format!("{input}: cannot move to {field}: {e}")))?;
            file.field = field;
        }
    }
    Ok(file)
}

/// `random_triangular(n,max_deg)` and `random_tame(n,factors,max_deg)`,
/// drawn with the `--seed`.
fn random_builtin(name: &str, seed: u64) -> Option<Result<PolyMap, Error>> {
    let (base, rest) = name.split_once('(')?;
    let args: Vec<u64> = rest.strip_suffix(')')?.split(',').map(|a| a.trim().parse().ok()).collect::<Option<_>>()?;
    let bad = || Err(Error::UnknownExample(name.to_string()));
    Some(match (base, args.as_slice()) {
        ("random_triangular", &[n, d]) if (1..=16).contains(&n) && (2..=8).contains(&d) => {
            Ok(corpus::random_triangular(n as usize, d as u32, seed))
        }
        ("random_tame", &[n, k, d]) if (2..=16).contains(&n) && k <= 16 && (2..=8).contains(&d) => {
            Ok(corpus::random_tame(n as usize, k as usize, d as u32, seed).0)
        }
        ("random_triangular" | "random_tame", _) => bad(),
        _ => return None,
    })
}

fn corpus_entry(name: &str) -> Result<Value, Error> {
    // parameterised families are listed with their default instance
    let instance = name.split_once('(').map_or(name, |(base, _)| base);
    let ex = corpus::builtin(instance)?;
    let e = &ex.expected;
    let fact = |v: Option<(Value, corpus::Provenance)>| match v {
        Some((value, p)) => json!({ "value": value, "provenance": p }),
        None => Value::Null,
    };
    Ok(json!({
        "name": name,
        "n": ex.map.nvars(),
        "map": ex.map.to_string(),
        "expected": {
            "pascal": fact(e.pascal.as_ref().map(|f| (match f.value {
                ExpectedPascal::Finite(m) => json!(m),
                ExpectedPascal::NotFinite => json!("not_finite"),
            }, f.provenance))),
            "per_component_indices": fact(e.per_component_indices.as_ref().map(|f| (json!(f.value), f.provenance))),
            "inverse": fact(e.inverse.as_ref().map(|f| (json!(f.value.to_string()), f.provenance))),
            "keller_constant": fact(e.keller_constant.as_ref().map(|f| (json!(f.value), f.provenance))),
            "nilpotency_index": fact(e.nilpotency_index.as_ref().map(|f| (json!(f.value), f.provenance))),
            "strongly_nilpotent": fact(e.strongly_nilpotent.as_ref().map(|f| (json!(f.value), f.provenance))),
            "tame": fact(e.tame.as_ref().map(|f| (json!(f.value), f.provenance))),
            "triangular": fact(e.triangular.as_ref().map(|f| (json!(f.value.to_string()), f.provenance))),
        },
    }))
}

fn map_json(f: &MapFile) -> Value {
    let components: Vec<String> = f.map.components().iter().map(|c| c.to_string_with_names(&f.vars)).collect();
    json!({ "map_name": f.name, "vars": f.vars, "field": f.field, "components": components })
}

fn emit_map(f: &MapFile, format: Option<Format>) -> String {
    match format.unwrap_or(Format::Text) {
        Format::Text => f.to_text(),
        Format::Json => to_json(&map_json(f)),
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

fn pascal_text(p: &PascalSection) -> String {
    let mut s = String::new();
    match p.index {
        Some(m) => {
            let per: Vec<String> = p.per_component_indices.iter().map(|v| opt(*v)).collect();
            writeln!(s, "finite, index {m}, per component ({})", per.join(", ")).unwrap();
        }
        None => writeln!(s, "not within bound (m_max = {})", p.m_max).unwrap(),
    }
    for step in &p.evidence {
        let degs: Vec<String> = step.degrees.iter().map(ToString::to_string).collect();
        writeln!(s, "k = {:>2}: degrees [{}], {} terms", step.k, degs.join(", "), step.total_terms()).unwrap();
    }
    if let Some(c) = &p.certificate {
        let point: Vec<String> = c.point.iter().map(u64::to_string).collect();
        writeln!(s, "P_{} component {} is {} at ({}) mod {}", c.step, c.component + 1, c.value, point.join(", "), c.modulus)
            .unwrap();
    }
    s
}
