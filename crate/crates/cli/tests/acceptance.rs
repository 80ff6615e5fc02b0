//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the summary prints in
//! order; the process fails if any criterion fails.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use orbitspace::dspace::{
    build_orbit_space, check_factorization, mu_bijectivity_test, symplectic_equivalence_check, systems_equivalent,
    EquivalenceEvidence, EquivalenceOptions, Verdict,
};
use orbitspace::expr::random::random_expr;
use orbitspace::expr::ZeroVerdict;
use orbitspace::fiber::{
    bifurcation_scan, connected_components, orbit_vs_fiber_check, sample_fiber, CellGrid, Connectivity, GridField,
    ImageLattice, DEFAULT_ATOL,
};
use orbitspace::flow::{conservation_check, integrate_flow, ExploreOptions};
use orbitspace::hamsys::{check_involution, poisson_bracket, rank_scan, DEFAULT_RANK_TOL};
use orbitspace::phase::seeded_rng;
use orbitspace::{parse, Expr, VariableList};
use orbitspace_cli::config::{load_config, SystemConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bundled(name: &str) -> SystemConfig {
    load_config(&configs_dir().join(format!("{name}.json"))).expect("bundled config loads")
}

const BUNDLED: [&str; 7] = ["osc1", "osc2", "osc2recomb", "osc2p1", "freeparticle", "doublewell", "degenerate"];

fn field(cfg: &SystemConfig, res: Option<usize>) -> GridField {
    let res = match res {
        Some(r) => vec![r; 2 * cfg.dof],
        None => cfg.defaults.resolution.clone().expect("bundled configs set a resolution"),
    };
    GridField::compute(&cfg.system, CellGrid::new(cfg.system.bounds().clone(), res).unwrap())
}

fn lattice(cfg: &SystemConfig) -> ImageLattice {
    cfg.defaults.lattice.as_deref().expect("bundled configs set a lattice").parse().unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_points(seed: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed, 99);
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn bracket_axioms() -> Outcome {
    let start = Instant::now();
    let dof = 2;
    let vars: Vec<usize> = (0..2 * dof).collect();
    let mut rng = seeded_rng(1, 0);
    let (mut worst_anti, mut worst_leib, mut worst_jac) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..50 {
        let f = random_expr(&mut rng, 3, &vars);
        let g = random_expr(&mut rng, 3, &vars);
        let h = random_expr(&mut rng, 3, &vars);
        let b = |a: &Expr, c: &Expr| poisson_bracket(a, c, dof);
        let anti = Expr::add(b(&f, &g), b(&g, &f)).compile();
        let leib = Expr::sub(
            b(&f, &Expr::mul(g.clone(), h.clone())),
            Expr::add(Expr::mul(g.clone(), b(&f, &h)), Expr::mul(h.clone(), b(&f, &g))),
        )
        .compile();
        let jac = Expr::add(Expr::add(b(&f, &b(&g, &h)), b(&g, &b(&h, &f))), b(&h, &b(&f, &g))).compile();
        for x in random_points(case, 100, 2 * dof) {
            worst_anti = worst_anti.max(anti.eval(&x).map_err(|e| e.to_string())?.abs());
            worst_leib = worst_leib.max(leib.eval(&x).map_err(|e| e.to_string())?.abs());
            worst_jac = worst_jac.max(jac.eval(&x).map_err(|e| e.to_string())?.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "max residuals: antisymmetry {worst_anti:.1e}, Leibniz {worst_leib:.1e}, Jacobi {worst_jac:.1e}; {secs:.2} s"
    );
    ensure(worst_anti <= 1e-10 && worst_leib <= 1e-9 && worst_jac <= 1e-7 && secs < 10.0, &detail)?;
    Ok(detail)
}

fn derivatives() -> Outcome {
    let vars: Vec<usize> = (0..4).collect();
    let mut rng = seeded_rng(2, 0);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let e = random_expr(&mut rng, 4, &vars);
        let v = rng.gen_range(0..4);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let exact = e.differentiate(v).evaluate(&x).map_err(|e| e.to_string())?;
        // relative error needs a derivative away from zero
        if exact.abs() < 1e-3 {
            continue;
        }
        let h = 1e-5;
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[v] += h;
        xm[v] -= h;
        let fd = (e.evaluate(&xp).unwrap() - e.evaluate(&xm).unwrap()) / (2.0 * h);
        worst = worst.max((exact - fd).abs() / exact.abs());
        checked += 1;
    }
    let detail = format!("100 pairs, max relative error {worst:.1e}");
    ensure(worst < 1e-6, &detail)?;
    Ok(detail)
}

fn integrability_gate() -> Outcome {
    let osc = bundled("osc2");
    let inv = check_involution(&osc.system, 100, 1e-9, 0).map_err(|e| e.to_string())?;
    let symbolic = inv.verdicts.iter().flatten().all(|v| *v == ZeroVerdict::SymbolicZero);
    let rank = rank_scan(&osc.system, 10_000, DEFAULT_RANK_TOL, 0);
    let degenerate = rank_scan(&bundled("degenerate").system, 10_000, DEFAULT_RANK_TOL, 0);
    let detail = format!(
        "osc2 involution symbolic-zero: {symbolic}, full-rank fraction {:.4}; degenerate fraction {}",
        rank.full_rank_fraction, degenerate.full_rank_fraction
    );
    ensure(
        inv.pass && symbolic && rank.full_rank_fraction >= 0.99 && degenerate.full_rank_fraction == 0.0,
        &detail,
    )?;
    Ok(detail)
}

fn orbit_containment() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    let mut failures = Vec::new();
    let mut min_cov = f64::INFINITY;
    for (k, name) in ["osc1", "freeparticle", "doublewell", "osc2"].iter().enumerate() {
        let cfg = bundled(name);
        let grid_res = if *name == "osc1" { Some(200) } else { None };
        let fld = field(&cfg, grid_res);
        let opts = ExploreOptions::for_grid(cfg.system.bounds(), fld.grid().res());
        let mut rng = seeded_rng(4, k as u64);
        for _ in 0..10 {
            let x0 = cfg.system.bounds().sample(&mut rng);
            let r = orbit_vs_fiber_check(&cfg.system, &fld, &x0, 10_000, DEFAULT_ATOL, Connectivity::Face, &opts)
                .map_err(|e| e.to_string())?;
            runs += 1;
            if !r.containment {
                failures.push(format!("{name} from {x0:?}: labels {:?}", r.labels_hit));
            }
            if *name == "osc1" {
                min_cov = min_cov.min(r.coverage);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "containment in {}/{runs} runs, min osc1 coverage {min_cov:.3}; {secs:.1} s",
        runs - failures.len()
    );
    ensure(failures.is_empty() && min_cov >= 0.95 && secs < 60.0, format!("{detail}; {failures:?}"))?;
    Ok(detail)
}

/// 4-connected component count of the closed-form marking on a 2D grid.
fn flood_fill_count(f: impl Fn(f64, f64) -> f64, grad: impl Fn(f64, f64) -> (f64, f64), res: usize, c: f64) -> usize {
    let (lo, hi) = ([-2.5, -3.0], [2.5, 3.0]);
    let h = [(hi[0] - lo[0]) / res as f64, (hi[1] - lo[1]) / res as f64];
    let marked: Vec<bool> = (0..res * res)
        .map(|k| {
            let (i, j) = (k / res, k % res);
            let (q, p) = (lo[0] + (i as f64 + 0.5) * h[0], lo[1] + (j as f64 + 0.5) * h[1]);
            let (gq, gp) = grad(q, p);
            let band = (0.75 * ((h[0] * gq).powi(2) + (h[1] * gp).powi(2)).sqrt()).max(DEFAULT_ATOL);
            (f(q, p) - c).abs() <= band
        })
        .collect();
    let mut seen = vec![false; res * res];
    let mut count = 0;
    for s in 0..res * res {
        if !marked[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k / res, k % res);
            let mut nbs = Vec::new();
            if i > 0 {
                nbs.push(k - res);
            }
            if i + 1 < res {
                nbs.push(k + res);
            }
            if j > 0 {
                nbs.push(k - 1);
            }
            if j + 1 < res {
                nbs.push(k + 1);
            }
            for nb in nbs {
                if marked[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    count
}

fn fiber_components() -> Outcome {
    let dw = bundled("doublewell");
    let fld = field(&dw, Some(300));
    let mut counts = Vec::new();
    for (c, expected) in [(0.5, 2), (1.5, 1)] {
        let ours = connected_components(fld.grid(), &sample_fiber(&fld, &[c], DEFAULT_ATOL), Connectivity::Face).count;
        let oracle = flood_fill_count(
            |q, p| p * p / 2.0 + (q * q - 1.0).powi(2),
            |q, p| (4.0 * q * (q * q - 1.0), p),
            300,
            c,
        );
        ensure(ours == oracle && ours == expected, format!("c = {c}: ours {ours}, oracle {oracle}"))?;
        counts.push(ours);
    }
    let osc = bundled("osc1");
    let rows = bifurcation_scan(&field(&osc, Some(200)), &lattice(&osc), DEFAULT_ATOL, Connectivity::Face);
    let bad: Vec<f64> = rows.iter().filter(|r| r.value[0] > 0.0 && r.count != 1).map(|r| r.value[0]).collect();
    let scanned = rows.iter().filter(|r| r.value[0] > 0.0).count();
    ensure(bad.is_empty(), format!("osc1 counts differ from 1 at {bad:?}"))?;
    Ok(format!("double well counts {counts:?} match the oracle; osc1 count 1 at {scanned} values in (0, 2]"))
}

fn factorization() -> Outcome {
    let mut cells = 0;
    for name in BUNDLED {
        let cfg = bundled(name);
        let fld = field(&cfg, None);
        let os = build_orbit_space(&fld, &lattice(&cfg), DEFAULT_ATOL, Connectivity::Face).map_err(|e| e.to_string())?;
        check_factorization(&os, &fld).map_err(|f| format!("{name}: {f:?}"))?;
        cells += os.cells.len();
    }
    Ok(format!("{} bundled systems, {cells} marked cells, 100% factorize", BUNDLED.len()))
}

fn mu_injectivity() -> Outcome {
    for name in ["osc1", "osc2"] {
        let cfg = bundled(name);
        let os = build_orbit_space(&field(&cfg, None), &lattice(&cfg), DEFAULT_ATOL, Connectivity::Face)
            .map_err(|e| e.to_string())?;
        ensure(mu_bijectivity_test(&os).bijective, format!("{name} is not bijective"))?;
    }
    let dw = bundled("doublewell");
    let os = build_orbit_space(&field(&dw, None), &lattice(&dw), DEFAULT_ATOL, Connectivity::Face)
        .map_err(|e| e.to_string())?;
    let mu = mu_bijectivity_test(&os);
    let below: Vec<usize> = (0..os.lattice[0].cells).filter(|&k| os.lattice[0].center(k) < 1.0).collect();
    let witnessed: Vec<usize> = mu.witnesses.iter().map(|w| w.slab[0]).collect();
    let missing: Vec<usize> = below.iter().copied().filter(|k| !witnessed.contains(k)).collect();
    ensure(missing.is_empty(), format!("double well slabs without witnesses: {missing:?}"))?;
    ensure(os.is_y_shaped(), format!("double well graph degrees {:?}", os.degrees()))?;
    Ok(format!(
        "osc1, osc2 bijective; double well witnesses at all {} slabs below 1; base-space graph Y-shaped ({} labels)",
        below.len(),
        os.labels.len()
    ))
}

fn equivalence() -> Outcome {
    let (f, g, h) = (bundled("osc2"), bundled("osc2recomb"), bundled("osc2p1"));
    let (ff, gf, hf) = (field(&f, None), field(&g, None), field(&h, None));
    let opts = EquivalenceOptions::default();
    let fg = systems_equivalent(&f.system, &g.system, &ff, &gf, &opts).map_err(|e| e.to_string())?;
    ensure(fg.verdict == Verdict::Equivalent, format!("recombination: {fg:?}"))?;
    let fh = systems_equivalent(&f.system, &h.system, &ff, &hf, &opts).map_err(|e| e.to_string())?;
    let bracket = fh.evidence.iter().any(|e| matches!(e, EquivalenceEvidence::Bracket { .. }));
    ensure(fh.verdict == Verdict::NotEquivalent && bracket, format!("(f1, p1): {fh:?}"))?;

    let osc = bundled("osc1");
    let vars = VariableList::canonical(1);
    let map = |srcs: [&str; 2]| -> Vec<Expr> { srcs.iter().map(|s| parse(s, &vars).unwrap()).collect() };
    let check = |m: Vec<Expr>| symplectic_equivalence_check(&osc.system, &osc.system, &m, 100, 1e-9, 0).unwrap();
    let identity = check(map(["q1", "p1"]));
    let rotation = check(map(["p1", "-q1"]));
    let scaling = check(map(["2*q1", "p1"]));
    ensure(identity.pass && rotation.pass, "identity or quarter rotation failed")?;
    let defect = scaling.failure.as_ref().map(|f| f.defect).unwrap_or(0.0);
    ensure(
        !scaling.pass && (defect - 1.0).abs() <= 1e-9 && (scaling.max_symplectic_defect - 1.0).abs() <= 1e-9,
        format!("scaling defect {defect}"),
    )?;
    Ok(format!(
        "recombination equivalent ({} cells compared); (f1, p1) not equivalent by bracket witness; scaling defect {defect}",
        fg.compared_cells
    ))
}

fn integrator() -> Outcome {
    let osc = bundled("osc1");
    let x0 = [1.0, 0.0];
    let err = |h: f64| -> Result<f64, String> {
        let traj = integrate_flow(&osc.system, 0, &x0, 2.0 * PI, h).map_err(|e| e.to_string())?;
        // exact flow returns to the start after one period
        Ok(traj.end().iter().zip(x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    };
    let ratio = err(2e-3)? / err(1e-3)?;
    let traj = integrate_flow(&osc.system, 0, &[1.2, -0.4], 10.0, 1e-3).map_err(|e| e.to_string())?;
    let drift = conservation_check(&osc.system, &traj).map_err(|e| e.to_string())?.max_drift[0];
    let detail = format!("error ratio {ratio:.2}, drift {drift:.1e} at h = 1e-3, t = 10");
    ensure((12.0..=20.0).contains(&ratio) && drift < 1e-8, &detail)?;
    Ok(detail)
}

fn reproducibility() -> Outcome {
    let dir = configs_dir();
    let path = |n: &str| dir.join(n).to_string_lossy().into_owned();
    let cases: Vec<Vec<String>> = vec![
        vec!["check".into(), path("osc2.json"), "--seed".into(), "11".into()],
        vec!["rank".into(), path("doublewell.json"), "--seed".into(), "3".into()],
        vec!["orbit".into(), path("doublewell.json"), "--seed-point".into(), "1,0.5".into()],
        vec!["fiber".into(), path("osc2.json"), "--value".into(), "0.5,1".into()],
        vec!["scan".into(), path("doublewell.json")],
        vec!["atlas".into(), path("doublewell.json")],
        vec!["mu".into(), path("osc2.json")],
        vec!["equiv".into(), path("osc2.json"), path("osc2recomb.json"), "--seed".into(), "5".into()],
        vec!["sympeq".into(), path("osc1.json"), path("osc1.json"), "--map=p1,-q1".into(), "--seed".into(), "2".into()],
        vec!["closedness".into(), path("osc1.json")],
        vec!["probe-complete".into(), path("freeparticle.json"), "--seed".into(), "9".into()],
    ];
    for args in &cases {
        let once = || {
            let mut out = Vec::new();
            let argv = std::iter::once("orbitspace").chain(args.iter().map(String::as_str));
            let code = orbitspace_cli::run(argv, &mut out, &mut std::io::sink());
            let text = String::from_utf8(out).unwrap();
            let cut = text.find("\"timing\"").unwrap_or(text.len());
            (code, text[..cut].to_string())
        };
        let (a, b) = (once(), once());
        ensure(a.1.contains("\"verdict\""), format!("{}: no report", args[0]))?;
        ensure(a == b, format!("{} differs between runs", args[0]))?;
    }
    Ok(format!("{} commands, byte-identical reports up to timing", cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("bracket axioms", bracket_axioms),
        ("derivative correctness", derivatives),
        ("integrability gate", integrability_gate),
        ("orbit equals fiber component", orbit_containment),
        ("fiber component oracle", fiber_components),
        ("factorization F = mu . pi", factorization),
        ("disconnected-fiber detection", mu_injectivity),
        ("equivalence and symplectic checks", equivalence),
        ("integrator order and conservation", integrator),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
