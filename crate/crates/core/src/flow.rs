//! Numerical flows of the Hamiltonian vector fields `X_{f_i}`.
//!
//! All integration is fixed-step classical RK4. A trajectory is stopped
//! when it leaves the analysis box scaled by [`ESCAPE_INFLATION`] about its
//! center.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{DomainFault, EvalError};
use crate::hamsys::{jacobian_rank, IntegrableSystem, VectorFieldExpr};
use crate::phase::{seeded_rng, PhaseBox};

pub const DEFAULT_STEP: f64 = 1e-3;
/// Flow time per exploration move.
pub const DEFAULT_QUANTUM: f64 = 0.1;
pub const ESCAPE_INFLATION: f64 = 1.1;

const MAX_STEPS: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("field index {index} out of range for {dof} integrals")]
    FieldIndex { index: usize, dof: usize },
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("start point {0:?} lies outside the analysis box")]
    OutsideBox(Vec<f64>),
    #[error("vector field cannot be evaluated at the start point: {0}")]
    Domain(EvalError),
    #[error("step size {step} is unusable for flow time {time}")]
    StepUnderflow { step: f64, time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    /// Left the inflated box at time `t`.
    Escaped { t: f64 },
    /// The field could not be evaluated after time `t`.
    DomainError { t: f64 },
}

/// Scratch buffers for RK4 on one vector field.
struct Rk4<'a> {
    field: &'a VectorFieldExpr,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    stack: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(field: &'a VectorFieldExpr) -> Self {
        let d = field.dim();
        Rk4 {
            field,
            k: [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]],
            tmp: vec![0.0; d],
            stack: Vec::new(),
        }
    }

    fn step(&mut self, x: &mut [f64], h: f64) -> Result<(), DomainFault> {
        let [k1, k2, k3, k4] = &mut self.k;
        self.field.eval_into(x, k1, &mut self.stack)?;
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
            *t = xi + 0.5 * h * ki;
        }
        self.field.eval_into(&self.tmp, k2, &mut self.stack)?;
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
            *t = xi + 0.5 * h * ki;
        }
        self.field.eval_into(&self.tmp, k3, &mut self.stack)?;
        for ((t, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
            *t = xi + h * ki;
        }
        self.field.eval_into(&self.tmp, k4, &mut self.stack)?;
        for (j, xi) in x.iter_mut().enumerate() {
            *xi += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        Ok(())
    }
}

/// Splits flow time `t` into equal steps no longer than `h`.
fn step_plan(t: f64, h: f64) -> Result<(usize, f64), FlowError> {
    let bad = || FlowError::StepUnderflow { step: h, time: t };
    if !(h > 0.0) || !h.is_finite() || !t.is_finite() {
        return Err(bad());
    }
    if t == 0.0 {
        return Ok((0, 0.0));
    }
    let ratio = t.abs() / h;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    };
    if steps > MAX_STEPS as f64 {
        return Err(bad());
    }
    let steps = (steps as usize).max(1);
    let dt = t / steps as f64;
    if dt.abs() <= f64::EPSILON * t.abs() {
        return Err(bad());
    }
    Ok((steps, dt))
}

fn check_field(sys: &IntegrableSystem, i: usize, x0: &[f64]) -> Result<(), FlowError> {
    if i >= sys.dof() {
        return Err(FlowError::FieldIndex { index: i, dof: sys.dof() });
    }
    if x0.len() != sys.dim() {
        return Err(FlowError::Dimension {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    sys.field(i).eval(x0).map_err(FlowError::Domain)?;
    Ok(())
}

/// Time-stamped samples of `phi_t^{f_i}(x0)`. Times are strictly monotone
/// in the direction of integration (decreasing for negative flow time).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub field: usize,
    pub step: f64,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        self.points.last().expect("trajectory is never empty")
    }

    pub fn escaped(&self) -> bool {
        matches!(self.termination, Termination::Escaped { .. })
    }
}

/// Integrates `X_{f_i}` from `x0` for time `t_final` (either sign) with
/// steps of at most `h`.
pub fn integrate_flow(
    sys: &IntegrableSystem,
    i: usize,
    x0: &[f64],
    t_final: f64,
    h: f64,
) -> Result<Trajectory, FlowError> {
    check_field(sys, i, x0)?;
    if !sys.bounds().contains(x0) {
        return Err(FlowError::OutsideBox(x0.to_vec()));
    }
    let (steps, dt) = step_plan(t_final, h)?;
    let escape_box = sys.bounds().inflated(ESCAPE_INFLATION);
    let mut rk = Rk4::new(sys.field(i));
    let mut x = x0.to_vec();
    let mut times = vec![0.0];
    let mut points = vec![x.clone()];
    let mut termination = Termination::Completed;
    for k in 1..=steps {
        if rk.step(&mut x, dt).is_err() {
            termination = Termination::DomainError { t: (k - 1) as f64 * dt };
            break;
        }
        let t = if k == steps { t_final } else { k as f64 * dt };
        times.push(t);
        points.push(x.clone());
        if !escape_box.contains(&x) {
            termination = Termination::Escaped { t };
            break;
        }
    }
    Ok(Trajectory {
        field: i,
        step: dt.abs(),
        times,
        points,
        termination,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    pub field: usize,
    /// `max_t |f_j(x(t)) - f_j(x0)|` for each integral `j`.
    pub max_drift: Vec<f64>,
}

impl ConservationReport {
    pub fn conserved(&self, j: usize, tol: f64) -> bool {
        self.max_drift[j] <= tol
    }
}

pub fn conservation_check(
    sys: &IntegrableSystem,
    traj: &Trajectory,
) -> Result<ConservationReport, EvalError> {
    let f0 = sys.values(traj.start())?;
    let mut max_drift = vec![0.0f64; sys.dof()];
    for x in &traj.points {
        let f = sys.values(x)?;
        for (d, (a, b)) in max_drift.iter_mut().zip(f.iter().zip(&f0)) {
            *d = d.max((a - b).abs());
        }
    }
    Ok(ConservationReport {
        field: traj.field,
        max_drift,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploreOptions {
    pub step: f64,
    pub quantum: f64,
    /// Dedup resolution per axis.
    pub delta: Vec<f64>,
}

impl ExploreOptions {
    pub fn new(delta: Vec<f64>) -> Self {
        ExploreOptions {
            step: DEFAULT_STEP,
            quantum: DEFAULT_QUANTUM,
            delta,
        }
    }

    /// Dedup cells of the same size as a `res`-per-axis grid on `bounds`.
    pub fn for_grid(bounds: &PhaseBox, res: &[usize]) -> Self {
        let delta = (0..bounds.dim()).map(|k| bounds.width(k) / res[k] as f64).collect();
        ExploreOptions::new(delta)
    }
}

/// One exploration move: flow of `X_{f_field}` for `time` from cloud point `from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Move {
    pub from: usize,
    pub field: usize,
    pub time: f64,
    pub termination: Termination,
}

/// A point cloud approximating the orbit through `seed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSample {
    pub seed: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// `escaped[k]` is set when `points[k]` was reached after its branch
    /// left the analysis box; such points are never expanded.
    pub escaped: Vec<bool>,
    pub moves: Vec<Move>,
    pub budget_used: usize,
    /// The frontier emptied before the budget ran out.
    pub closed: bool,
}

impl OrbitSample {
    /// `max |F(x) - F(seed)|_inf` over the cloud.
    pub fn max_integral_deviation(&self, sys: &IntegrableSystem) -> Result<f64, EvalError> {
        let f0 = sys.values(&self.seed)?;
        let mut worst = 0.0f64;
        for x in &self.points {
            for (a, b) in sys.values(x)?.iter().zip(&f0) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    pub fn interior_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points
            .iter()
            .zip(&self.escaped)
            .filter(|(_, e)| !**e)
            .map(|(p, _)| p.as_slice())
    }
}

fn dedup_key(x: &[f64], origin: &[f64], delta: &[f64]) -> Vec<i64> {
    x.iter()
        .zip(origin.iter().zip(delta))
        .map(|(v, (o, d))| ((v - o) / d).floor() as i64)
        .collect()
}

struct MoveResult {
    points: Vec<(Vec<f64>, bool)>,
    /// Flow time actually used, signed.
    time: f64,
    termination: Termination,
}

/// A move that has not left its start cell after one quantum keeps going
/// for up to this many quanta, so slow fields still make progress on
/// coarse dedup grids.
const MAX_EXTENSION: usize = 64;

fn run_move(
    sys: &IntegrableSystem,
    field: usize,
    x0: &[f64],
    time: f64,
    opts: &ExploreOptions,
    escape_box: &PhaseBox,
) -> MoveResult {
    let (steps, dt) = step_plan(time, opts.step).expect("validated options");
    let origin = sys.bounds().min();
    let mut rk = Rk4::new(sys.field(field));
    let mut x = x0.to_vec();
    let mut last_key = dedup_key(&x, origin, &opts.delta);
    let mut outside = false;
    let mut points = Vec::new();
    let mut termination = Termination::Completed;
    let mut k = 0;
    while k < steps || (points.is_empty() && k < steps * MAX_EXTENSION) {
        k += 1;
        if rk.step(&mut x, dt).is_err() {
            termination = Termination::DomainError { t: (k - 1) as f64 * dt };
            break;
        }
        outside |= !sys.bounds().contains(&x);
        let key = dedup_key(&x, origin, &opts.delta);
        if key != last_key {
            points.push((x.clone(), outside));
            last_key = key;
        }
        if !escape_box.contains(&x) {
            termination = Termination::Escaped { t: k as f64 * dt };
            break;
        }
    }
    MoveResult {
        points,
        time: k as f64 * dt,
        termination,
    }
}

/// Breadth-first exploration of the orbit through `x0` by composing the
/// flows of every `X_{f_i}` forward and backward for one time quantum, or
/// until the flow first leaves its start cell if that takes longer.
///
/// Each expanded point costs one unit of `budget`. Points are kept at the
/// resolution `opts.delta`; every newly reached cell becomes a frontier
/// point unless its branch has left the box. The result does not depend
/// on thread scheduling.
pub fn orbit_explore(
    sys: &IntegrableSystem,
    x0: &[f64],
    budget: usize,
    opts: &ExploreOptions,
) -> Result<OrbitSample, FlowError> {
    assert!(budget >= 1, "budget must be at least 1");
    assert_eq!(opts.delta.len(), sys.dim(), "delta must have one entry per axis");
    for i in 0..sys.dof() {
        check_field(sys, i, x0)?;
    }
    if !sys.bounds().contains(x0) {
        return Err(FlowError::OutsideBox(x0.to_vec()));
    }
    step_plan(opts.quantum, opts.step)?;

    let escape_box = sys.bounds().inflated(ESCAPE_INFLATION);
    let origin = sys.bounds().min();
    let mut seen = HashSet::new();
    seen.insert(dedup_key(x0, origin, &opts.delta));
    let mut points = vec![x0.to_vec()];
    let mut escaped = vec![false];
    let mut moves = Vec::new();
    let mut frontier = vec![0usize];
    let mut used = 0;

    let directions: Vec<(usize, f64)> = (0..sys.dof())
        .flat_map(|i| [(i, opts.quantum), (i, -opts.quantum)])
        .collect();

    while !frontier.is_empty() && used < budget {
        let take = frontier.len().min(budget - used);
        let layer: Vec<usize> = frontier.drain(..take).collect();
        let results: Vec<Vec<MoveResult>> = layer
            .par_iter()
            .map(|&from| {
                directions
                    .iter()
                    .map(|&(field, time)| run_move(sys, field, &points[from], time, opts, &escape_box))
                    .collect()
            })
            .collect();
        used += take;
        let mut next = Vec::new();
        for (&from, per_point) in layer.iter().zip(results) {
            for (&(field, time), result) in directions.iter().zip(per_point) {
                debug_assert_eq!(time.signum(), result.time.signum());
                moves.push(Move {
                    from,
                    field,
                    time: result.time,
                    termination: result.termination,
                });
                for (x, outside) in result.points {
                    if seen.insert(dedup_key(&x, origin, &opts.delta)) {
                        if !outside {
                            next.push(points.len());
                        }
                        points.push(x);
                        escaped.push(outside);
                    }
                }
            }
        }
        // Points left over from a budget-truncated layer stay ahead of the new ones.
        frontier.extend(next);
    }

    Ok(OrbitSample {
        seed: x0.to_vec(),
        points,
        escaped,
        moves,
        budget_used: used,
        closed: frontier.is_empty(),
    })
}

/// Dimension of the orbit through `x`: the span of the `X_{f_i}(x)`,
/// which equals the rank of `DF(x)` since the symplectic form is
/// nondegenerate.
pub fn orbit_dimension(sys: &IntegrableSystem, x: &[f64], tol: f64) -> Result<usize, EvalError> {
    jacobian_rank(sys, x, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    /// Speed stayed within a constant factor of its initial value.
    Linear,
    /// Speed grew along the escape: blow-up suspected.
    SuperLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeRecord {
    pub seed: Vec<f64>,
    pub field: usize,
    pub direction: f64,
    pub escape_time: f64,
    pub initial_speed: f64,
    pub max_speed: f64,
    pub growth: Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeOptions {
    pub trials: usize,
    pub horizon: f64,
    pub step: f64,
    /// Escape radius as a multiple of the box's corner radius.
    pub radius_factor: f64,
    /// Speed ratio above which an escape is classed super-linear.
    pub growth_factor: f64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            trials: 16,
            horizon: 20.0,
            step: 1e-2,
            radius_factor: 4.0,
            growth_factor: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub runs: usize,
    /// Runs stopped by a domain error before the horizon.
    pub interrupted: usize,
    pub linear_escapes: Vec<EscapeRecord>,
    /// Super-linear escapes: candidate evidence of incompleteness.
    pub witnesses: Vec<EscapeRecord>,
    pub note: &'static str,
}

impl ProbeReport {
    pub fn no_blowup_observed(&self) -> bool {
        self.witnesses.is_empty()
    }
}

const PROBE_NOTE: &str = "heuristic: finite-time sampling cannot certify completeness; \
an empty witness list only means no blow-up was observed";

/// Looks for trajectories that run away faster than linearly within
/// `horizon`, from random seeds in the box, for every field and both
/// time directions.
pub fn completeness_probe(sys: &IntegrableSystem, opts: &ProbeOptions) -> ProbeReport {
    assert!(opts.trials >= 1, "trials must be at least 1");
    let mut rng = seeded_rng(opts.seed, 0x7072_6f62);
    let seeds: Vec<Vec<f64>> = (0..opts.trials).map(|_| sys.bounds().sample(&mut rng)).collect();
    let radius = opts.radius_factor * sys.bounds().corner_radius();
    let jobs: Vec<(usize, usize, f64)> = (0..seeds.len())
        .flat_map(|s| (0..sys.dof()).flat_map(move |i| [(s, i, 1.0), (s, i, -1.0)]))
        .collect();
    let outcomes: Vec<Option<Result<EscapeRecord, ()>>> = jobs
        .par_iter()
        .map(|&(s, field, dir)| probe_one(sys, &seeds[s], field, dir, radius, opts))
        .collect();
    let mut report = ProbeReport {
        runs: jobs.len(),
        interrupted: 0,
        linear_escapes: Vec::new(),
        witnesses: Vec::new(),
        note: PROBE_NOTE,
    };
    for outcome in outcomes {
        match outcome {
            None => {}
            Some(Err(())) => report.interrupted += 1,
            Some(Ok(rec)) if rec.growth == Growth::Linear => report.linear_escapes.push(rec),
            Some(Ok(rec)) => report.witnesses.push(rec),
        }
    }
    report
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `None`: stayed within the radius. `Some(Err)`: domain error.
fn probe_one(
    sys: &IntegrableSystem,
    seed: &[f64],
    field: usize,
    dir: f64,
    radius: f64,
    opts: &ProbeOptions,
) -> Option<Result<EscapeRecord, ()>> {
    let f = sys.field(field);
    let mut stack = Vec::new();
    let mut v = vec![0.0; sys.dim()];
    if f.eval_into(seed, &mut v, &mut stack).is_err() {
        return Some(Err(()));
    }
    let initial_speed = norm(&v);
    let mut max_speed = initial_speed;
    let (steps, dt) = step_plan(dir * opts.horizon, opts.step).ok()?;
    let mut rk = Rk4::new(f);
    let mut x = seed.to_vec();
    for k in 1..=steps {
        if rk.step(&mut x, dt).is_err() || f.eval_into(&x, &mut v, &mut stack).is_err() {
            return Some(Err(()));
        }
        let speed = norm(&v);
        max_speed = max_speed.max(speed);
        if !speed.is_finite() || norm(&x) > radius {
            let growth = if max_speed <= opts.growth_factor * initial_speed + 1e-12 {
                Growth::Linear
            } else {
                Growth::SuperLinear
            };
            return Some(Ok(EscapeRecord {
                seed: seed.to_vec(),
                field,
                direction: dir,
                escape_time: k as f64 * dt.abs(),
                initial_speed,
                max_speed,
                growth,
            }));
        }
    }
    None
}
