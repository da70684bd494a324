use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const PATH_A: &str = "N 3\nE 1 2 0.5\nE 2 3 0.6\n";
const STAR_B: &str = "N 3\nE 1 2 0.5\nE 1 3 0.6\n";
const OTHER_DET: &str = "N 3\nE 1 2 0.5\nE 2 3 0.7\n";

fn gtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtc")).args(args).env_remove("GTC_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key} in {text}")).parse().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture { dir: TempDir::new().unwrap() };
        f.write("a.gtree", PATH_A);
        f.write("b.gtree", STAR_B);
        f.write("c.gtree", OTHER_DET);
        f
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_owned()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ci_on_three_node_pair() {
    let f = Fixture::new();
    let o = gtc(&["ci", &f.path("a.gtree"), &f.path("b.gtree")]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "ci=0.065788\nlambda_star=0.500000\n");
}

#[test]
fn ci_of_identical_inputs_is_zero() {
    let f = Fixture::new();
    let o = gtc(&["ci", &f.path("a.gtree"), &f.path("a.gtree")]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ci=0.000000\n"));
}

#[test]
fn unequal_determinants_exit_4() {
    let f = Fixture::new();
    let o = gtc(&["ci", &f.path("a.gtree"), &f.path("c.gtree")]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("entropy"));
}

#[test]
fn oracle_agrees_with_spectral() {
    let f = Fixture::new();
    let fixtures = [
        ("a.gtree", "b.gtree"),
        ("p.gtree", "q.gtree"),
    ];
    f.write("p.gtree", "N 5\nE 1 2 0.3\nE 2 3 -0.7\nE 3 4 0.8\nE 4 5 0.45\n");
    f.write("q.gtree", "N 5\nE 1 3 0.3\nE 2 3 -0.7\nE 2 4 0.8\nE 4 5 0.45\n");
    for (x, y) in fixtures {
        let args = ["--precision", "12", "ci", &f.path(x), &f.path(y)];
        let exact = field(&stdout(&gtc(&args)), "ci");
        let mut with_oracle = args.to_vec();
        with_oracle.push("--oracle");
        let scan = field(&stdout(&gtc(&with_oracle)), "ci");
        assert!((exact - scan).abs() < 1e-6, "{x} {y}: {exact} vs {scan}");
    }
}

#[test]
fn bits_divide_by_ln2() {
    let f = Fixture::new();
    let nats = field(&stdout(&gtc(&["--precision", "15", "ci", &f.path("a.gtree"), &f.path("b.gtree")])), "ci");
    let bits = field(&stdout(&gtc(&["--precision", "15", "ci", &f.path("a.gtree"), &f.path("b.gtree"), "--bits"])), "ci");
    assert!((bits * std::f64::consts::LN_2 - nats).abs() < 1e-12);
}

#[test]
fn eig_lists_reciprocal_spectrum() {
    let f = Fixture::new();
    let o = gtc(&["eig", &f.path("a.gtree"), &f.path("b.gtree")]);
    let vals: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    assert!((vals[0] * vals[2] - 1.0).abs() < 1e-5);
    assert!((vals[1] - 1.0).abs() < 1e-6);
}

#[test]
fn graft_writes_moved_tree() {
    let f = Fixture::new();
    let out = f.dir.path().join("g.gtree");
    let o = gtc(&["graft", &f.path("a.gtree"), "--cut", "3", "2", "--paste", "1", "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let moved = gtc(&["ci", s(&out), &f.path("b.gtree")]);
    assert!(stdout(&moved).starts_with("ci=0.000000\n"));
}

#[test]
fn graft_rejects_missing_edge() {
    let f = Fixture::new();
    let out = f.dir.path().join("g.gtree");
    let o = gtc(&["graft", &f.path("a.gtree"), "--cut", "3", "1", "--paste", "2", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simplify_preserves_ci() {
    let f = Fixture::new();
    f.write("x.gtree", "N 6\nE 1 2 0.5\nE 2 3 0.6\nE 3 4 0.7\nE 4 5 -0.4\nE 2 6 0.9\n");
    f.write("y.gtree", "N 6\nE 1 2 0.5\nE 1 3 0.6\nE 3 4 0.7\nE 4 5 -0.4\nE 2 6 0.9\n");
    let prefix = f.path("s");
    let o = gtc(&["simplify", &f.path("x.gtree"), &f.path("y.gtree"), "--o-prefix", &prefix]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(field(&stdout(&o), "nodes") < 6.0);
    let full = field(&stdout(&gtc(&["--precision", "15", "ci", &f.path("x.gtree"), &f.path("y.gtree")])), "ci");
    let reduced = field(&stdout(&gtc(&["--precision", "15", "ci", &f.path("s1.gtree"), &f.path("s2.gtree")])), "ci");
    assert!((full - reduced).abs() < 1e-9, "{full} vs {reduced}");
}

#[test]
fn chain_reports_minimum() {
    let f = Fixture::new();
    let chain = f.write("c.chain", &format!("{PATH_A}G 3 2 1\n"));
    let o = gtc(&["chain", s(&chain), "--matrix"]);
    let text = stdout(&o);
    assert!(text.contains("independent=true\n"));
    assert!(text.contains("method=adjacent-only\n"));
    assert!(text.contains("min_ci=0.065788\n"));
    let o = gtc(&["chain", s(&chain), "--exhaustive"]);
    assert!(stdout(&o).contains("method=exhaustive\n"));
}

#[test]
fn reduce_to_one_dimension() {
    let f = Fixture::new();
    let o = gtc(&["reduce", &f.path("a.gtree"), &f.path("b.gtree"), "--dim", "1"]);
    let text = stdout(&o);
    assert!((field(&text, "ci") - 0.0334).abs() < 1e-3);
    assert_eq!(text.lines().filter(|l| l.starts_with("row ")).count(), 1);
    let bad = gtc(&["reduce", &f.path("a.gtree"), &f.path("b.gtree"), "--dim", "4"]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn simulate_is_reproducible_across_threads() {
    let f = Fixture::new();
    let run = |threads: &str| {
        stdout(&gtc(&[
            "--threads", threads, "simulate", &f.path("a.gtree"), &f.path("b.gtree"),
            "--trials", "10000", "--t", "1,4", "--seed", "9",
        ]))
    };
    let one = run("1");
    assert!(one.starts_with("T,trials,errors,pe,wilson_lo,wilson_hi\n"));
    assert_eq!(one.lines().count(), 4);
    assert_eq!(one, run("3"));
    assert_eq!(one, run("0"));
}

#[test]
fn search_cex_finds_table_pattern() {
    let o = gtc(&["search-cex", "--seed", "1", "--attempts", "20000", "--units", "3", "--table-pattern"]);
    let text = stdout(&o);
    assert!(text.starts_with("attempt="), "{text}");
    assert!(text.contains("lambda_star\teigenvalues\tci_13\tci_12\tci_23\n"));
}

#[test]
fn verify_passes() {
    let o = gtc(&["verify"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS ")).count(), 7);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(gtc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gtc(&["ci", "only-one"]).status.code(), Some(2));
    assert_eq!(gtc(&["--precision", "18", "verify"]).status.code(), Some(2));
    assert_eq!(gtc(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_input_exits_3() {
    let f = Fixture::new();
    f.write("bad.gtree", "N 3\nE 1 2 1.5\nE 2 3 0.6\n");
    assert_eq!(gtc(&["ci", &f.path("bad.gtree"), &f.path("a.gtree")]).status.code(), Some(3));
    assert_eq!(gtc(&["ci", &f.path("missing.gtree"), &f.path("a.gtree")]).status.code(), Some(3));
}

#[test]
fn crlf_input_accepted() {
    let f = Fixture::new();
    f.write("crlf.gtree", "# path\r\nN 3\r\nE 1 2 0.5\r\nE 2 3 0.6\r\n");
    let o = gtc(&["ci", &f.path("crlf.gtree"), &f.path("b.gtree")]);
    assert_eq!(stdout(&o), "ci=0.065788\nlambda_star=0.500000\n");
}
