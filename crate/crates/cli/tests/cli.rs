use std::path::PathBuf;

use orbitspace_cli::config::{load_config, ConfigError};
use orbitspace_cli::run;
use proptest::prelude::*;

fn bundled(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    p.to_string_lossy().into_owned()
}

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    p.to_string_lossy().into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("orbitspace").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn report(r: &Run) -> serde_json::Value {
    serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{e}: {}", r.stdout))
}

fn expect(args: &[&str], code: i32) -> Run {
    let r = cli(args);
    assert_eq!(r.code, code, "{args:?}\nstdout: {}\nstderr: {}", r.stdout, r.stderr);
    r
}

#[test]
fn bundled_doublewell_loads() {
    let cfg = load_config(bundled("doublewell.json").as_ref()).unwrap();
    assert_eq!(cfg.dof, 1);
    assert_eq!(cfg.integrals, vec!["p1^2/2 + (q1^2-1)^2"]);
    assert_eq!((cfg.min.clone(), cfg.max.clone()), (vec![-2.5, -3.0], vec![2.5, 3.0]));
}

#[test]
fn schema_errors_name_the_field() {
    let e = load_config(fixture("bad_dof.json").as_ref()).unwrap_err();
    assert_eq!(e.to_string(), "integrals: expected 2");
    let e = load_config(fixture("bad_box.json").as_ref()).unwrap_err();
    assert!(e.to_string().starts_with("box.min[1]:"), "{e}");
    let e = load_config(fixture("bad_expr.json").as_ref()).unwrap_err();
    assert!(matches!(e, ConfigError::Parse { index: 1, .. }), "{e}");
    assert!(matches!(load_config(fixture("truncated.json").as_ref()), Err(ConfigError::Json(_))));
}

#[test]
fn check_exit_classes() {
    let r = expect(&["check", &bundled("osc2.json")], 0);
    assert_eq!(report(&r)["verdict"], "integrable-at-resolution");
    let r = expect(&["check", &bundled("degenerate.json")], 1);
    assert_eq!(report(&r)["result"]["rank"]["full_rank_fraction"], 0.0);
    expect(&["check", &bundled("osc2p1.json")], 1);
    let r = expect(&["check", &fixture("bad_dof.json")], 2);
    assert!(r.stderr.contains("integrals: expected 2"), "{}", r.stderr);
    expect(&["check", &fixture("bad_expr.json")], 2);
    expect(&["check", &fixture("missing.json")], 2);
}

#[test]
fn doublewell_check_is_vacuous_involution_with_full_rank() {
    let r = expect(&["check", &bundled("doublewell.json")], 0);
    let v = report(&r);
    assert_eq!(v["result"]["involution"]["pass"], true);
    assert!(v["result"]["rank"]["full_rank_fraction"].as_f64().unwrap() > 0.999);
}

#[test]
fn rank_exit_classes() {
    let r = expect(&["rank", &bundled("osc1.json"), "--seed-point", "1,0"], 0);
    assert_eq!(report(&r)["result"]["at_point"]["rank"], 1);
    expect(&["rank", &bundled("degenerate.json")], 1);
    expect(&["rank", &bundled("osc1.json"), "--seed-point", "1,0,0"], 2);
}

#[test]
fn orbit_exit_classes() {
    let r = expect(&["orbit", &bundled("osc1.json"), "--seed-point", "1,0"], 0);
    let v = report(&r);
    assert!(v["result"]["check"]["coverage"].as_f64().unwrap() >= 0.95);
    assert_eq!(v["result"]["orbit_dimension"], 1);
    // the flows of a non-involutive pair leave the fiber component
    expect(&["orbit", &bundled("osc2p1.json"), "--seed-point", "1,0,0.5,0.5", "--budget", "3000"], 1);
    expect(&["orbit", &bundled("osc1.json")], 2);
    expect(&["orbit", &bundled("osc1.json"), "--seed-point", "5,0"], 2);
}

#[test]
fn orbit_trajectory_mode() {
    let r = expect(
        &["orbit", &bundled("freeparticle.json"), "--seed-point", "0,1", "--time", "1.5", "--format", "csv"],
        0,
    );
    let last: Vec<f64> = r.stdout.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    // 1500 steps of a constant field: exact up to summation rounding
    assert_eq!(last[0], 1.5);
    assert!((last[1] - 1.5).abs() < 1e-12, "{last:?}");
    assert_eq!(last[2], 1.0);
    assert!(r.stdout.starts_with("t,q1,p1\n"));
}

#[test]
fn fiber_exit_classes() {
    let r = expect(&["fiber", &bundled("doublewell.json"), "--value", "0.5"], 0);
    assert_eq!(report(&r)["result"]["components"], 2);
    let r = expect(&["fiber", &bundled("doublewell.json"), "--value", "1"], 0);
    assert!(r.stderr.contains("critical value suspected"), "{}", r.stderr);
    expect(&["fiber", &bundled("doublewell.json")], 2);
    expect(&["fiber", &bundled("doublewell.json"), "--value", "0.5,1"], 2);
}

#[test]
fn scan_reports_counts_and_critical_flag() {
    let r = expect(&["scan", &bundled("doublewell.json"), "--lattice", "0:2:20", "--format", "csv"], 0);
    let mut lines = r.stdout.lines();
    assert_eq!(lines.next(), Some("f1,count,marked,near_critical,critical"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let (c, count, critical): (f64, usize, bool) =
            (cols[0].parse().unwrap(), cols[1].parse().unwrap(), cols[4].parse().unwrap());
        if c > 0.0 && c < 1.0 {
            assert_eq!(count, 2, "{line}");
        } else if c > 1.0 {
            assert_eq!(count, 1, "{line}");
        } else if c == 1.0 {
            assert!(critical, "{line}");
        }
    }
    expect(&["scan", &bundled("doublewell.json"), "--lattice", "0:1:4,0:1:4"], 2);
    expect(&["scan", &bundled("doublewell.json"), "--lattice", "0:1"], 2);
}

#[test]
fn atlas_writes_graph_artifacts() {
    let dir = tempdir("atlas");
    let r = expect(&["atlas", &bundled("doublewell.json"), "--out", dir.to_str().unwrap()], 0);
    let v = report(&r);
    assert_eq!(v["result"]["is_y_shaped"], true);
    for f in ["report.json", "labels.csv", "edges.csv", "projection.csv", "base_space.dot"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let dot = std::fs::read_to_string(dir.join("base_space.dot")).unwrap();
    assert!(dot.starts_with("graph base_space {") && dot.contains(" -- "));
    let edges = std::fs::read_to_string(dir.join("edges.csv")).unwrap();
    assert!(edges.starts_with("source,target\n"));
    expect(&["atlas", &bundled("doublewell.json"), "--lattice", "0.5;1.5"], 2);
}

#[test]
fn mu_exit_classes() {
    expect(&["mu", &bundled("osc1.json")], 0);
    let r = expect(&["mu", &bundled("doublewell.json")], 1);
    assert_eq!(report(&r)["verdict"], "disconnected-fibers");
    expect(&["mu", &fixture("gaussian.json")], 2);
}

#[test]
fn equiv_exit_classes() {
    let r = expect(&["equiv", &bundled("osc2.json"), &bundled("osc2recomb.json")], 0);
    assert_eq!(report(&r)["verdict"], "equivalent-at-resolution");
    let r = expect(&["equiv", &bundled("osc2.json"), &bundled("osc2p1.json")], 1);
    assert_eq!(report(&r)["result"]["evidence"][0]["kind"], "bracket");
    expect(&["equiv", &bundled("osc2.json"), &bundled("osc1.json")], 2);
}

#[test]
fn sympeq_exit_classes() {
    let osc = bundled("osc1.json");
    expect(&["sympeq", &osc, &osc], 0);
    expect(&["sympeq", &osc, &osc, "--map=p1,-q1"], 0);
    let r = expect(&["sympeq", &osc, &osc, "--map", "2*q1,p1"], 1);
    let defect = report(&r)["result"]["max_symplectic_defect"].as_f64().unwrap();
    assert!((defect - 1.0).abs() <= 1e-9);
    expect(&["sympeq", &osc, &osc, "--map", "q1,p1 +"], 2);
    expect(&["sympeq", &osc, &osc, "--map", "q1"], 2);
}

#[test]
fn closedness_exit_classes() {
    expect(&["closedness", &bundled("osc1.json")], 0);
    let r = expect(&["closedness", &fixture("gaussian.json")], 1);
    assert_eq!(report(&r)["result"]["bounds"][0]["status"], "suspect");
    expect(&["closedness", &bundled("osc1.json"), "--resolution", "0"], 2);
}

#[test]
fn probe_complete_exit_classes() {
    let r = expect(&["probe-complete", &bundled("freeparticle.json")], 0);
    assert!(!report(&r)["result"]["linear_escapes"].as_array().unwrap().is_empty());
    expect(&["probe-complete", &fixture("blowup.json")], 1);
    expect(&["probe-complete", &fixture("truncated.json")], 2);
}

#[test]
fn trajectory_follows_the_chosen_integral() {
    let osc2 = bundled("osc2.json");
    let quarter = std::f64::consts::FRAC_PI_2.to_string();
    let args = ["orbit", &osc2, "--seed-point", "1,1,0,0", "--field", "2", "--time", &quarter, "--format", "csv"];
    let r = expect(&args, 0);
    let last: Vec<f64> = r.stdout.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    // f2 rotates (q2, p2) clockwise and leaves (q1, p1) fixed
    let exact = [std::f64::consts::FRAC_PI_2, 1.0, 0.0, 0.0, -1.0];
    for (got, want) in last.iter().zip(exact) {
        assert!((got - want).abs() < 1e-9, "{last:?}");
    }
    for bad in ["0", "3"] {
        let r = expect(&["orbit", &osc2, "--seed-point", "1,1,0,0", "--field", bad, "--time", "1"], 2);
        assert!(r.stderr.contains("--field"), "{}", r.stderr);
    }
}

#[test]
fn usage_errors_exit_2() {
    expect(&["frobnicate", &bundled("osc1.json")], 2);
    expect(&["check", &bundled("osc1.json"), "--bogus"], 2);
    expect(&["check"], 2);
    expect(&["check", &bundled("osc1.json"), "--format", "xml"], 2);
    expect(&["--help"], 0);
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("orbitspace-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn strip_timing(report: &str) -> &str {
    let k = report.find("\"timing\"").expect("timing key present");
    &report[..k]
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: Vec<Vec<String>> = vec![
        vec!["atlas".into(), bundled("doublewell.json")],
        vec!["orbit".into(), bundled("osc1.json"), "--seed-point".into(), "0.3,1.1".into()],
        vec!["check".into(), bundled("osc2.json"), "--seed".into(), "7".into(), "--samples".into(), "500".into()],
        vec!["equiv".into(), bundled("osc2.json"), bundled("osc2recomb.json"), "--seed".into(), "3".into()],
        vec!["probe-complete".into(), fixture("blowup.json"), "--seed".into(), "5".into()],
    ];
    for (k, args) in cases.iter().enumerate() {
        let dirs = [tempdir(&format!("repro{k}a")), tempdir(&format!("repro{k}b"))];
        for dir in &dirs {
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--out", dir.to_str().unwrap()]);
            cli(&a);
        }
        let mut names: Vec<_> = std::fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.iter().any(|n| n == "report.json"));
        for name in names {
            let a = std::fs::read_to_string(dirs[0].join(&name)).unwrap();
            let b = std::fs::read_to_string(dirs[1].join(&name)).unwrap();
            if name == "report.json" {
                assert_eq!(strip_timing(&a), strip_timing(&b), "{args:?}");
                assert!(a.trim_end().ends_with('}'));
            } else {
                assert_eq!(a, b, "{args:?} {name:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn check_exit_class_does_not_depend_on_seed(seed in any::<u64>()) {
        let s = seed.to_string();
        prop_assert_eq!(cli(&["check", &bundled("osc2.json"), "--seed", &s, "--samples", "300"]).code, 0);
        prop_assert_eq!(cli(&["check", &bundled("degenerate.json"), "--seed", &s, "--samples", "300"]).code, 1);
        prop_assert_eq!(cli(&["check", &fixture("bad_box.json"), "--seed", &s]).code, 2);
    }

    #[test]
    fn equiv_exit_class_does_not_depend_on_seed(seed in 0u64..10_000) {
        let s = seed.to_string();
        let (f, g, h) = (bundled("osc2.json"), bundled("osc2recomb.json"), bundled("osc2p1.json"));
        prop_assert_eq!(cli(&["equiv", &f, &g, "--seed", &s]).code, 0);
        prop_assert_eq!(cli(&["equiv", &f, &h, "--seed", &s]).code, 1);
    }
}
