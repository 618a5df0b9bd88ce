use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use pascalis::{parse_map, serialize_map, MapFile};
use serde_json::Value;

const GOLDEN_INVERSE: &str = include_str!("../../core/data/v1/vasyunin_inverse.map");

fn pascalis(args: &[&str]) -> Output {
    run(args, None, &[])
}

fn run(args: &[&str], stdin: Option<&str>, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pascalis"));
    cmd.args(args)
        .env_remove("PASCALIS_TERM_CEILING")
        .env_remove("PASCALIS_WORK_CEILING")
        .env("RUST_LOG", "warn")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("binary runs");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(text) = stdin {
            pipe.write_all(text.as_bytes()).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn canonical(text: &str) -> String {
    serialize_map(&parse_map(text).unwrap())
}

#[test]
fn analyze_nagata() {
    let out = pascalis(&["analyze", "builtin:nagata"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["schema"], "pascalis-report/1");
    assert_eq!(r["pascal"]["outcome"], "finite");
    assert_eq!(r["pascal"]["index"], 3);
    assert_eq!(r["pascal"]["per_component_indices"], serde_json::json!([3, 2, 1]));
    assert_eq!(r["keller"]["status"], "yes");
    assert_eq!(r["inverse"]["verified"], true);
    assert_eq!(r["nilpotency"]["strongly_nilpotent"], false);
    assert_eq!(r["timings_ms"], Value::Null);
}

#[test]
fn analyze_vasyunin_is_not_finite_but_invertible() {
    let out = pascalis(&["analyze", "builtin:vasyunin", "--m-max", "12"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["pascal"]["outcome"], "not_within_bound");
    assert_eq!(r["pascal"]["certificate"]["step"], 12);
    assert_eq!(r["inverse"]["verified"], true);
    assert_eq!(r["nilpotency"]["index"], 5);
}

#[test]
fn malformed_stdin_is_a_positioned_syntax_error() {
    let out = run(&["analyze", "-"], Some("vars: x y\nx + * y\ny\n"), &[]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("stdin: syntax error: line 2, column 5"), "{err}");
    assert!(stdout(&out).is_empty());
}

#[test]
fn invert_vasyunin_matches_the_golden_file() {
    let out = pascalis(&["invert", "builtin:vasyunin"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# name: vasyunin_inverse\n"));
    assert_eq!(canonical(&text), canonical(GOLDEN_INVERSE));
}

#[test]
fn invert_identity() {
    let out = pascalis(&["invert", "builtin:identity(3)"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "# name: identity(3)_inverse\nvars: x1 x2 x3\nfield: Q\nx1\nx2\nx3\n");
}

#[test]
fn invert_singular_linear_part_is_an_input_error() {
    let path = temp_file("singular.map", "vars: x1 x2\nx1^2\nx2\n");
    let out = pascalis(&["invert", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("error:"));
}

#[test]
fn unverified_inverse_exits_3() {
    // Keller over GF(2) but not injective: 0 and 1 both map to 0
    let path = temp_file("frobenius.map", "vars: x\nfield: GF(2)\nx + x^2\n");
    let out = pascalis(&["invert", path.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(!stdout(&out).is_empty());
}

#[test]
fn pascal_gh_composition_is_not_finite() {
    let out = pascalis(&["pascal", "builtin:gh_composition", "--m-max", "10"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["outcome"], "not_within_bound");
    assert_eq!(r["m_max"], 10);
    assert!(r["certificate"]["value"].as_u64().unwrap() > 0);
}

#[test]
fn nilpotent_vasyunin() {
    let out = pascalis(&["nilpotent", "builtin:vasyunin"]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["nilpotent"], true);
    assert_eq!(r["index"], 5);
    assert_eq!(r["strongly_nilpotent"], false);
    assert_eq!(r["basis_witness"].as_array().map(Vec::len), Some(5));
    assert!(r["witness"]["entry"].as_str().is_some());
}

#[test]
fn composing_with_the_inverse_gives_the_identity() {
    let inverse = pascalis(&["invert", "builtin:nagata"]);
    assert_eq!(code(&inverse), 0);
    let g = temp_file("nagata_inverse.map", &stdout(&inverse));
    let f = temp_file("nagata.map", &stdout(&pascalis(&["iterate", "builtin:nagata", "1"])));
    for (outer, inner) in [(&g, &f), (&f, &g)] {
        let out = pascalis(&["compose", outer.to_str().unwrap(), inner.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let m = MapFile::parse(&stdout(&out)).unwrap();
        assert!(m.map.is_identity(), "{}", stdout(&out));
    }
}

#[test]
fn truncated_iterate() {
    let out = pascalis(&["iterate", "builtin:simple_triangular", "3", "--truncate", "1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).ends_with("x1\nx2\n"), "{}", stdout(&out));
    let full = pascalis(&["iterate", "builtin:simple_triangular", "3"]);
    assert!(stdout(&full).ends_with("3*x2^2 + x1\nx2\n"), "{}", stdout(&full));
}

#[test]
fn keller_over_a_prime_field() {
    let out = pascalis(&["keller", "builtin:nagata", "--field", "gf:5", "--format", "text"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "keller: yes, det J_F = 1\n");
    let out = pascalis(&["keller", "builtin:fibonacci_affine(0,0)"]);
    assert_eq!(json(&out)["constant"], "1");
}

#[test]
fn corpus_lists_every_builtin() {
    let out = pascalis(&["corpus"]);
    assert_eq!(code(&out), 0);
    let entries = json(&out);
    let names: Vec<&str> = entries.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"nagata") && names.contains(&"vasyunin") && names.contains(&"gh_composition"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["analyze", "builtin:random_triangular(3,3)", "--seed", "7"];
    let a = pascalis(&args);
    let b = pascalis(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let other = pascalis(&["analyze", "builtin:random_triangular(3,3)", "--seed", "8"]);
    assert_ne!(a.stdout, other.stdout);
    let text = ["analyze", "builtin:vasyunin", "--format", "text"];
    assert_eq!(pascalis(&text).stdout, pascalis(&text).stdout);
}

#[test]
fn term_ceiling_from_environment_and_flag() {
    let env = [("PASCALIS_TERM_CEILING", "1")];
    let out = run(&["pascal", "builtin:nagata"], None, &env);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("term ceiling exceeded"));
    // the flag beats the environment
    let out = run(&["pascal", "builtin:nagata", "--term-ceiling", "100000"], None, &env);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["index"], 3);
}

#[test]
fn analyze_reports_and_exits_2_at_the_ceiling() {
    let out = pascalis(&["analyze", "builtin:nagata", "--term-ceiling", "1"]);
    assert_eq!(code(&out), 2);
    let r = json(&out);
    assert_eq!(r["pascal"]["outcome"], "resource_limit");
}

#[test]
fn timings_only_on_request() {
    let out = pascalis(&["analyze", "builtin:simple_triangular", "--timings"]);
    assert!(json(&out)["timings_ms"]["pascal"].is_u64());
}

#[test]
fn exit_code_matrix() {
    let cases: &[(&[&str], i32)] = &[
        (&["--help"], 0),
        (&["--version"], 0),
        (&["corpus"], 0),
        (&["keller", "builtin:vasyunin"], 0),
        (&["bogus"], 1),
        (&["analyze"], 1),
        (&["analyze", "builtin:nagata", "--format", "yaml"], 1),
        (&["analyze", "builtin:no_such_map"], 1),
        (&["analyze", "/nonexistent/f.map"], 1),
        (&["analyze", "builtin:nagata", "--truncate", "4"], 1),
        (&["pascal", "builtin:nagata", "--field", "gf:4"], 1),
        (&["pascal", "builtin:nagata", "--term-ceiling", "1"], 2),
        (&["analyze", "builtin:nagata", "--term-ceiling", "1"], 2),
        (&["pascal", "builtin:vasyunin", "--m-max", "12"], 0),
    ];
    for (args, expected) in cases {
        let out = pascalis(args);
        assert_eq!(code(&out), *expected, "{args:?}: {}", stderr(&out));
    }
}
