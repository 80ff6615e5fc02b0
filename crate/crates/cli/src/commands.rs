use anyhow::{anyhow, bail, Context, Result};
use orbitspace::dspace::{
    build_orbit_space, check_factorization, image_closedness_probe, mu_bijectivity_test, symplectic_equivalence_check,
    systems_equivalent, BoundStatus, EquivalenceOptions, OrbitSpace, Verdict,
};
use orbitspace::fiber::{
    bifurcation_scan, compare_orbit_with_fiber, connected_components, near_critical_cells, sample_fiber, CellGrid,
    GridField,
};
use orbitspace::flow::{
    completeness_probe, conservation_check, integrate_flow, orbit_dimension, orbit_explore, ExploreOptions, ProbeOptions,
    Termination, DEFAULT_STEP,
};
use orbitspace::hamsys::{check_involution, jacobian_rank, rank_scan, RankReport};
use orbitspace::{parse, IntegrableSystem, VariableList};
use serde_json::json;

use crate::config::SystemConfig;
use crate::params::Params;
use crate::report::{num, Outcome, Status, Table};

fn grid_field(sys: &IntegrableSystem, p: &Params) -> Result<GridField> {
    let grid = CellGrid::new(sys.bounds().clone(), p.resolution.clone()).context("building the phase grid")?;
    Ok(GridField::compute(sys, grid))
}

fn coord_header(sys: &IntegrableSystem) -> Vec<String> {
    sys.vars().names().to_vec()
}

fn value_header(dof: usize) -> Vec<String> {
    (1..=dof).map(|i| format!("f{i}")).collect()
}

fn nums(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|x| num(*x))
}

fn invalid_warning(field: &GridField, warnings: &mut Vec<String>) {
    if field.invalid_count() > 0 {
        warnings.push(format!(
            "{} grid cells skipped: the integrals cannot be evaluated there",
            field.invalid_count()
        ));
    }
}

fn rank_table(r: &RankReport) -> Table {
    let mut t = Table::new("rank_histogram", vec!["rank".into(), "count".into()]);
    for (rank, count) in r.histogram.iter().enumerate() {
        t.push(vec![rank.to_string(), count.to_string()]);
    }
    t
}

fn rank_warnings(r: &RankReport, warnings: &mut Vec<String>) {
    if r.skipped > 0 {
        warnings.push(format!("{} rank samples skipped on domain errors", r.skipped));
    }
}

pub fn check(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let sys = &cfg.system;
    let inv = check_involution(sys, p.count, p.tol, p.seed).context("involution test")?;
    let rank = rank_scan(sys, p.samples, p.rank_tol, p.seed);
    let dense = rank.dense_full_rank(p.full_rank_threshold);
    let pass = inv.pass && dense;
    let verdict = match (inv.pass, dense) {
        (true, true) => "integrable-at-resolution",
        (false, _) => "not-involutive",
        (true, false) => "rank-deficient",
    };
    let mut out = Outcome::new(
        Status::from_bool(pass),
        verdict,
        json!({ "involution": inv, "dense_full_rank": dense, "rank": rank }),
    );
    if inv.numeric_only {
        out.warnings.push("involution accepted on samples only (numeric-only)".into());
    }
    for (i, j, v) in inv.failures() {
        out.warnings.push(format!("{{f{}, f{}}} is nonzero: {v:?}", i + 1, j + 1));
    }
    rank_warnings(&rank, &mut out.warnings);
    out.tables.push(rank_table(&rank));
    Ok(out)
}

pub fn rank(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let sys = &cfg.system;
    let report = rank_scan(sys, p.samples, p.rank_tol, p.seed);
    let dense = report.dense_full_rank(p.full_rank_threshold);
    let at_point = match &p.seed_point {
        Some(x) => {
            let sigma = sys.singular_values(x).context("singular values at --seed-point")?;
            let r = jacobian_rank(sys, x, p.rank_tol).context("rank at --seed-point")?;
            Some(json!({ "point": x, "rank": r, "singular_values": sigma }))
        }
        None => None,
    };
    let verdict = if dense { "dense-full-rank" } else { "rank-deficient" };
    let mut out = Outcome::new(
        Status::from_bool(dense),
        verdict,
        json!({ "scan": report, "at_point": at_point }),
    );
    rank_warnings(&report, &mut out.warnings);
    out.tables.push(rank_table(&report));
    Ok(out)
}

pub fn orbit(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let sys = &cfg.system;
    let x0 = p
        .seed_point
        .as_deref()
        .ok_or_else(|| anyhow!("orbit needs --seed-point"))?;
    if p.time.is_some() {
        return trajectory(sys, x0, p);
    }
    let field = grid_field(sys, p)?;
    let mut opts = ExploreOptions::for_grid(sys.bounds(), field.grid().res());
    if let Some(h) = p.step {
        opts.step = h;
    }
    let cloud = orbit_explore(sys, x0, p.budget, &opts).context("exploring the orbit")?;
    let check = compare_orbit_with_fiber(sys, &field, &cloud, p.atol, p.connectivity).context("comparing with the fiber")?;
    let dimension = orbit_dimension(sys, x0, p.rank_tol).context("orbit dimension")?;
    let verdict = if check.containment { "contained" } else { "not-contained" };
    let mut out = Outcome::new(
        Status::from_bool(check.containment),
        verdict,
        json!({ "orbit_dimension": dimension, "check": check }),
    );
    if check.escaped_points > 0 {
        out.warnings.push(format!("{} cloud points left the box and were not expanded", check.escaped_points));
    }
    if check.unmarked_cells > 0 {
        out.warnings.push(format!("{} cloud cells lie outside the marking band", check.unmarked_cells));
    }
    if !check.closed {
        out.warnings.push("budget exhausted before the orbit closed".into());
    }
    invalid_warning(&field, &mut out.warnings);
    let mut header = vec!["index".to_string(), "escaped".to_string()];
    header.extend(coord_header(sys));
    let mut t = Table::new("orbit_points", header);
    for (k, (x, e)) in cloud.points.iter().zip(&cloud.escaped).enumerate() {
        let mut row = vec![k.to_string(), e.to_string()];
        row.extend(nums(x));
        t.push(row);
    }
    out.tables.push(t);
    Ok(out)
}

fn trajectory(sys: &IntegrableSystem, x0: &[f64], p: &Params) -> Result<Outcome> {
    let i = p.field.map_or(0, |k| k - 1);
    let t_final = p.time.expect("checked by caller");
    let traj = integrate_flow(sys, i, x0, t_final, p.step.unwrap_or(DEFAULT_STEP)).context("integrating the flow")?;
    let drift = conservation_check(sys, &traj).context("conservation check")?;
    let verdict = match traj.termination {
        Termination::Completed => "completed",
        Termination::Escaped { .. } => "escaped",
        Termination::DomainError { .. } => "domain-error",
    };
    let mut out = Outcome::new(
        Status::Pass,
        verdict,
        json!({
            "field": i + 1,
            "step": traj.step,
            "termination": traj.termination,
            "end": traj.end(),
            "max_drift": drift.max_drift,
        }),
    );
    match traj.termination {
        Termination::Escaped { t } => out.warnings.push(format!("trajectory left the inflated box at t = {t}")),
        Termination::DomainError { t } => out.warnings.push(format!("vector field undefined after t = {t}")),
        Termination::Completed => {}
    }
    let mut header = vec!["t".to_string()];
    header.extend(coord_header(sys));
    let mut t = Table::new("trajectory", header);
    for (time, x) in traj.times.iter().zip(&traj.points) {
        let mut row = vec![num(*time)];
        row.extend(nums(x));
        t.push(row);
    }
    out.tables.push(t);
    Ok(out)
}

pub fn fiber(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let sys = &cfg.system;
    let c = p.value.as_deref().ok_or_else(|| anyhow!("fiber needs --value"))?;
    let field = grid_field(sys, p)?;
    let fs = sample_fiber(&field, c, p.atol);
    let lab = connected_components(field.grid(), &fs, p.connectivity);
    let near = near_critical_cells(&field, &fs);
    let mut out = Outcome::new(
        Status::Pass,
        format!("{}-components", lab.count),
        json!({
            "value": c,
            "marked": fs.marked.len(),
            "skipped": fs.skipped,
            "components": lab.count,
            "sizes": lab.sizes(),
            "representatives": lab.representatives,
            "near_critical": near,
        }),
    );
    if fs.is_empty() {
        out.warnings.push("no cell is marked: the value is outside the sampled image".into());
    }
    if near > 0 {
        out.warnings.push(format!(
            "critical value suspected: {near} marked cells may contain rank drops; the count is resolution-dependent"
        ));
    }
    invalid_warning(&field, &mut out.warnings);
    let mut header = vec!["cell".to_string(), "label".to_string()];
    header.extend(coord_header(sys));
    let mut t = Table::new("fiber_cells", header);
    for (&cell, &label) in lab.cells.iter().zip(&lab.labels) {
        let mut row = vec![cell.to_string(), label.to_string()];
        row.extend(nums(&field.grid().center(cell)));
        t.push(row);
    }
    out.tables.push(t);
    Ok(out)
}

pub fn scan(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let sys = &cfg.system;
    let lattice = p.lattice()?;
    let field = grid_field(sys, p)?;
    let rows = bifurcation_scan(&field, &lattice, p.atol, p.connectivity);
    let critical: Vec<&Vec<f64>> = rows.iter().filter(|r| r.critical()).map(|r| &r.value).collect();
    let mut out = Outcome::new(
        Status::Pass,
        "scanned",
        json!({ "rows": rows.len(), "max_count": rows.iter().map(|r| r.count).max(), "critical_values": critical }),
    );
    if !critical.is_empty() {
        out.warnings.push(format!(
            "{} lattice values flagged critical; their counts are resolution-dependent",
            critical.len()
        ));
    }
    invalid_warning(&field, &mut out.warnings);
    let mut header = value_header(sys.dof());
    header.extend(["count", "marked", "near_critical", "critical"].map(String::from));
    let mut t = Table::new("scan", header);
    for r in &rows {
        let mut row: Vec<String> = nums(&r.value).collect();
        row.extend([r.count.to_string(), r.marked.to_string(), r.near_critical.to_string(), r.critical().to_string()]);
        t.push(row);
    }
    out.tables.push(t);
    Ok(out)
}

fn orbit_space(cfg: &SystemConfig, p: &Params) -> Result<(GridField, OrbitSpace)> {
    let lattice = p.lattice()?;
    let field = grid_field(&cfg.system, p)?;
    let os = build_orbit_space(&field, &lattice, p.atol, p.connectivity).context("building the orbit space")?;
    Ok((field, os))
}

fn dot(os: &OrbitSpace) -> String {
    let mut s = String::from("graph base_space {\n");
    for (k, l) in os.labels.iter().enumerate() {
        let value: Vec<String> = nums(&l.value).collect();
        s.push_str(&format!("  {k} [label=\"{k}: {}\"];\n", value.join(", ")));
    }
    for (a, b) in &os.edges {
        s.push_str(&format!("  {a} -- {b};\n"));
    }
    s.push_str("}\n");
    s
}

pub fn atlas(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let (field, os) = orbit_space(cfg, p)?;
    let factorization = check_factorization(&os, &field);
    let degrees = os.degrees();
    let mut out = Outcome::new(
        Status::from_bool(factorization.is_ok()),
        if factorization.is_ok() { "factorizes" } else { "factorization-failed" },
        json!({
            "labels": os.labels.len(),
            "edges": os.edges.len(),
            "marked_cells": os.cells.len(),
            "graph_components": os.graph_components(),
            "max_degree": degrees.iter().max(),
            "branch_points": degrees.iter().filter(|d| **d >= 3).count(),
            "is_path": os.is_path(),
            "is_y_shaped": os.is_y_shaped(),
            "factorization": factorization.as_ref().err(),
        }),
    );
    invalid_warning(&field, &mut out.warnings);
    let dof = field.dof();
    let mut header = vec!["label".to_string()];
    header.extend((1..=dof).map(|i| format!("slab{i}")));
    header.extend(value_header(dof));
    header.extend(["component", "cells", "representative", "degree"].map(String::from));
    let mut labels = Table::new("labels", header);
    for (k, l) in os.labels.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(l.slab.iter().map(usize::to_string));
        row.extend(nums(&l.value));
        row.extend([l.component.to_string(), l.cells.to_string(), l.representative.to_string(), degrees[k].to_string()]);
        labels.push(row);
    }
    let mut edges = Table::new("edges", vec!["source".into(), "target".into()]);
    for (a, b) in &os.edges {
        edges.push(vec![a.to_string(), b.to_string()]);
    }
    let mut projection = Table::new("projection", vec!["cell".into(), "label".into()]);
    for (cell, label) in os.cells.iter().zip(&os.pi) {
        projection.push(vec![cell.to_string(), label.to_string()]);
    }
    out.dot = Some(dot(&os));
    out.tables.extend([labels, edges, projection]);
    Ok(out)
}

pub fn mu(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let (field, os) = orbit_space(cfg, p)?;
    let report = mu_bijectivity_test(&os);
    let mut out = Outcome::new(
        Status::from_bool(report.bijective),
        if report.bijective { "bijective-at-resolution" } else { "disconnected-fibers" },
        &report,
    );
    if !report.witnesses.is_empty() {
        out.warnings.push(format!("{} image cells have disconnected fibers", report.witnesses.len()));
    }
    invalid_warning(&field, &mut out.warnings);
    let dof = field.dof();
    let mut header: Vec<String> = (1..=dof).map(|i| format!("slab{i}")).collect();
    header.extend(value_header(dof));
    header.push("components".into());
    let mut t = Table::new("mu_witnesses", header);
    for w in &report.witnesses {
        let mut row: Vec<String> = w.slab.iter().map(usize::to_string).collect();
        row.extend(nums(&w.value));
        row.push(w.components.to_string());
        t.push(row);
    }
    out.tables.push(t);
    Ok(out)
}

fn same_box(a: &SystemConfig, b: &SystemConfig) -> Result<()> {
    if a.dof != b.dof {
        bail!("{} has {} degrees of freedom, {} has {}", a.name, a.dof, b.name, b.dof);
    }
    if a.system.bounds() != b.system.bounds() {
        bail!("{} and {} use different boxes", a.name, b.name);
    }
    Ok(())
}

pub fn equiv(f: &SystemConfig, g: &SystemConfig, p: &Params) -> Result<Outcome> {
    same_box(f, g)?;
    let f_field = grid_field(&f.system, p)?;
    let g_field = grid_field(&g.system, p)?;
    let opts = EquivalenceOptions {
        count: p.count,
        tol: p.tol,
        seed: p.seed,
        atol: p.atol,
        rank_tol: p.rank_tol,
        connectivity: p.connectivity,
        ..Default::default()
    };
    let v = systems_equivalent(&f.system, &g.system, &f_field, &g_field, &opts).context("equivalence test")?;
    let (status, verdict) = match v.verdict {
        Verdict::Equivalent => (Status::Pass, "equivalent-at-resolution"),
        Verdict::NotEquivalent => (Status::Fail, "not-equivalent"),
        Verdict::Inconclusive => (Status::Inconclusive, "inconclusive"),
    };
    let mut out = Outcome::new(status, verdict, &v);
    if v.numeric_only {
        out.warnings.push("some brackets were accepted on samples only (numeric-only)".into());
    }
    if let Some(reason) = &v.reason {
        out.warnings.push(reason.clone());
    }
    Ok(out)
}

pub fn sympeq(f: &SystemConfig, g: &SystemConfig, p: &Params) -> Result<Outcome> {
    if f.dof != g.dof {
        bail!("{} has {} degrees of freedom, {} has {}", f.name, f.dof, g.name, g.dof);
    }
    let vars = VariableList::canonical(f.dof);
    let phi = match &p.map {
        Some(srcs) => srcs
            .iter()
            .enumerate()
            .map(|(k, s)| parse(s, &vars).with_context(|| format!("--map component {k}")))
            .collect::<Result<Vec<_>>>()?,
        None => (0..2 * f.dof).map(orbitspace::Expr::var).collect(),
    };
    let r = symplectic_equivalence_check(&f.system, &g.system, &phi, p.count, p.tol, p.seed).context("symplectic check")?;
    let mut out = Outcome::new(
        Status::from_bool(r.pass),
        if r.pass { "symplectically-equivalent-at-samples" } else { "not-symplectically-equivalent" },
        &r,
    );
    if !r.domain_errors.is_empty() {
        out.warnings.push(format!("{} samples hit domain errors", r.domain_errors.len()));
    }
    if r.outside_target > 0 {
        out.warnings.push(format!("{} samples mapped outside the target box", r.outside_target));
    }
    Ok(out)
}

pub fn closedness(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let field = grid_field(&cfg.system, p)?;
    let r = image_closedness_probe(&cfg.system, &field, p.tol);
    let mut out = Outcome::new(
        Status::from_bool(r.closed_in_box),
        if r.closed_in_box { "closed-in-box" } else { "not-closed-suspected" },
        &r,
    );
    out.warnings.push(r.note.to_string());
    invalid_warning(&field, &mut out.warnings);
    let header = ["integral", "extreme", "sampled", "on_boundary", "status", "limit"].map(String::from).to_vec();
    let mut t = Table::new("bounds", header);
    for b in &r.bounds {
        let (status, limit) = match &b.status {
            BoundStatus::Attained => ("attained", String::new()),
            BoundStatus::BoxLimited => ("box-limited", String::new()),
            BoundStatus::Suspect { limit } => ("suspect", num(*limit)),
        };
        let extreme = serde_json::to_value(b.extreme)?.as_str().unwrap_or_default().to_string();
        t.push(vec![
            (b.integral + 1).to_string(),
            extreme,
            num(b.sampled),
            b.on_boundary.to_string(),
            status.to_string(),
            limit,
        ]);
    }
    out.tables.push(t);
    Ok(out)
}

pub fn probe_complete(cfg: &SystemConfig, p: &Params) -> Result<Outcome> {
    let sys = &cfg.system;
    let mut opts = ProbeOptions {
        seed: p.seed,
        ..Default::default()
    };
    if let Some(h) = p.step {
        opts.step = h;
    }
    let r = completeness_probe(sys, &opts);
    let ok = r.no_blowup_observed();
    let mut out = Outcome::new(
        Status::from_bool(ok),
        if ok { "no-blowup-observed" } else { "blowup-suspected" },
        &r,
    );
    out.warnings.push(r.note.to_string());
    if r.interrupted > 0 {
        out.warnings.push(format!("{} runs stopped on domain errors", r.interrupted));
    }
    let mut header = ["growth", "field", "direction", "escape_time", "initial_speed", "max_speed"]
        .map(String::from)
        .to_vec();
    header.extend(coord_header(sys));
    let mut t = Table::new("escapes", header);
    for (growth, e) in r
        .witnesses
        .iter()
        .map(|e| ("super-linear", e))
        .chain(r.linear_escapes.iter().map(|e| ("linear", e)))
    {
        let mut row = vec![
            growth.to_string(),
            (e.field + 1).to_string(),
            num(e.direction),
            num(e.escape_time),
            num(e.initial_speed),
            num(e.max_speed),
        ];
        row.extend(nums(&e.seed));
        t.push(row);
    }
    out.tables.push(t);
    Ok(out)
}
