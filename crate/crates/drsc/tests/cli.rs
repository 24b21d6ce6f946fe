use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use drsc_core::bounds::KAPPA;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn drsc(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_drsc"))
        .args(args)
        .env_remove("DRSC_PRECISION_CEILING")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Deterministic text over the tokens of `text.pmf`.
fn text_input(n: usize) -> String {
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwx \n#\\".chars().collect();
    let mut state = 12345u64;
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            alphabet[(state >> 33) as usize % alphabet.len()]
        })
        .collect()
}

#[test]
fn chars_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    let packed = dir.path().join("x.drsc");
    let back = dir.path().join("out.txt");
    fs::write(&input, text_input(10_000)).unwrap();
    let pmf = data("text.pmf");
    let o = drsc(&["encode", "--pmf", p(&pmf), "--d", "4", "--chars", "-i", p(&input), "-o", p(&packed)], b"");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = stderr(&o);
    assert!(summary.contains("config: "));
    let max_delay: u64 = summary.split("max_delay=").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(max_delay <= 4);
    assert!(summary.contains("N=10000 "));
    let o = drsc(&["decode", "--pmf", p(&pmf), "--chars", "-i", p(&packed), "-o", p(&back)], b"");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(&input).unwrap(), fs::read(&back).unwrap());
}

#[test]
fn token_roundtrip_through_pipes() {
    let pmf = data("uniform20.pmf");
    let text = "a b c\n  t s\tq a\n";
    let o = drsc(&["encode", "--pmf", p(&pmf), "--d", "2"], text.as_bytes());
    assert_eq!(o.status.code(), Some(0));
    let o = drsc(&["decode", "--pmf", p(&pmf)], &o.stdout);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "a b c t s q a\n");
}

#[test]
fn empty_input_gives_an_empty_container() {
    let pmf = data("tern.pmf");
    let o = drsc(&["encode", "--pmf", p(&pmf), "--d", "9"], b"");
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("N=0 "));
    let (h, bits, _) = drsc::container::read_container(&o.stdout).unwrap();
    assert_eq!((h.n, h.d), (0, 9));
    assert!(bits.is_empty());
    let o = drsc(&["decode"], &o.stdout);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn data_errors_exit_with_two() {
    let pmf = data("tern.pmf");
    let o = drsc(&["encode", "--pmf", p(&pmf), "--d", "9"], b"a b z a");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown symbol \"z\" at position 3"));

    let o = drsc(&["encode", "--pmf", p(&pmf), "--d", "4"], b"a");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("minimal workable d is 9"));

    let good = drsc(&["encode", "--pmf", p(&pmf), "--d", "9"], "a b c ".repeat(200).as_bytes()).stdout;
    let mut bad = good.clone();
    bad[1] = b'X';
    let o = drsc(&["decode"], &bad);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("byte 0: bad magic"));

    let o = drsc(&["decode"], &good[..good.len() - 10]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&format!("byte {}: payload truncated", good.len() - 10)), "{}", stderr(&o));

    let o = drsc(&["decode", "--pmf", p(&data("uniform20.pmf"))], &good);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not match"));

    let o = drsc(&["encode", "--pmf", "/nonexistent.pmf", "--d", "9"], b"");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(drsc(&["encode"], b"").status.code(), Some(1));
    assert_eq!(drsc(&["frobnicate"], b"").status.code(), Some(1));
    assert_eq!(drsc(&["encode", "--pmf", "x", "--d", "many"], b"").status.code(), Some(1));
    let o = drsc(&["encode", "--pmf", p(&data("tern.pmf")), "--d", "9"], b"");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(drsc(&["--help"], b"").status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_drsc")).args(["verify", "--list"]).env("DRSC_PRECISION_CEILING", "lots").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn precision_ceiling_comes_from_the_environment() {
    let pmf = data("uniform20.pmf");
    let o = Command::new(env!("CARGO_BIN_EXE_drsc"))
        .args(["simulate", "delay-tail", "--pmf", p(&pmf), "--q", p(&data("uniform20.pmf")), "--dmax", "2", "--samples", "10", "--horizon", "50"])
        .env("DRSC_PRECISION_CEILING", "8")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("precision_ceiling=8"));
    assert!(stderr(&o).contains("above the ceiling of 8"));
}

#[test]
fn bounds_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = drsc(&["bounds", "--pmf", p(&data("uniform20.pmf")), "--dmax", "6", "--csv", p(&out)], b"");
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["d", "delay_tail_bound", "insertion_bound", "redundancy_bound"]);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    let row4 = &rows[3];
    let num = |i: usize| row4[i].parse::<f64>().unwrap();
    // Uniform-20 at d = 4: pmax = 1/20, eps = 20^-4, k = 1.
    let pm = 0.05f64;
    let tail = 2.0 * pm.powi(4) * (4.0 * 20f64.log2() + KAPPA) + 2.0 * pm.powi(4);
    let ins = 2.0 * pm.powi(4) * (4.0 * (1.0 / ((1.0 - 2.0 / 160_000.0) * pm)).log2() + KAPPA + 1.0);
    let red = 2.0 * pm.powi(4) * (4.0 * 40f64.log2() + 1.0 + KAPPA).powi(2);
    assert!((num(1) / tail - 1.0).abs() < 1e-6);
    assert!((num(2) / ins - 1.0).abs() < 1e-6);
    assert!((num(3) / red - 1.0).abs() < 1e-6);
    assert!((num(3) - 7.0e-3).abs() < 1e-4);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("exponent lower H2"));
    assert!(!text.contains("dyadic"));

    let o = drsc(&["bounds", "--pmf", p(&data("tern.pmf")), "--dmax", "3"], b"");
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("note: dyadic source"));
    // d below the minimal workable d of the delay codec.
    assert!(text.lines().nth(1).unwrap().contains("undefined"));
}

#[test]
fn simulate_reports_bound_violations() {
    let args = |scale: &'static str| {
        vec![
            "simulate", "delay-tail", "--pmf", "", "--q", "", "--dmax", "4", "--samples", "2000", "--horizon", "40", "--seed", "3", "--bound-scale", scale,
        ]
    };
    let (pp, qq) = (data("tern.pmf"), data("tern_q.pmf"));
    let run = |scale| {
        let mut a = args(scale);
        a[3] = p(&pp);
        a[5] = p(&qq);
        drsc(&a, b"")
    };
    let ok = run("1");
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let bad = run("0.001");
    assert_eq!(bad.status.code(), Some(3));
    assert!(stderr(&bad).contains("above its bound"));
    // Same seed, same bytes.
    assert_eq!(run("1").stdout, ok.stdout);

    let o = drsc(&["simulate", "redundancy", "--pmf", p(&data("uniform20.pmf")), "--dmax", "2", "--samples", "4000", "--bound-scale", "0"], b"");
    assert_eq!(o.status.code(), Some(3));
    let o = drsc(&["simulate", "redundancy", "--pmf", p(&pp), "--dmax", "9", "--samples", "1000"], b"");
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("skipping d = 8"));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
}

#[test]
fn ensemble_csv() {
    let o = drsc(&["simulate", "ensemble", "--pmf", p(&data("tern.pmf")), "--dmax", "3", "--samples", "50000", "--seed", "2"], b"");
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("# ensemble seed=2 p=1/2,1/4,1/4\n"));
    assert_eq!(text.lines().nth(1).unwrap(), "d,trials,hits,hit_rate,ci_lo,ci_hi,exact,renyi_reference");
    let o = drsc(&["simulate", "ensemble", "--pmf", p(&data("uniform20.pmf")), "--dmax", "5", "--samples", "10"], b"");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let o = drsc(&["verify", "--list"], b"");
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), drsc::verify::SUITES.len());
    let o = drsc(&["verify", "--samples", "15", "--seed", "4"], b"");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    for s in drsc::verify::SUITES {
        let o = drsc(&["verify", "--samples", "15", "--inject-failure", s.name], b"");
        assert_eq!(o.status.code(), Some(3), "{}", s.name);
        assert!(String::from_utf8(o.stdout).unwrap().contains(s.name));
    }
    assert_eq!(drsc(&["verify", "--inject-failure", "nope"], b"").status.code(), Some(1));
}
