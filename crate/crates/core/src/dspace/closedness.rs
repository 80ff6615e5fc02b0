use serde::Serialize;

use crate::fiber::GridField;
use crate::hamsys::IntegrableSystem;

const MAX_DOUBLINGS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extreme {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BoundStatus {
    /// The sampled extreme is attained at a grid point, or nothing more
    /// extreme shows up outside the box.
    Attained,
    /// Values continue past the box; the bound is an artifact of the box.
    BoxLimited,
    /// Values approach `limit` outside the box without reaching it: the
    /// image may not be closed.
    Suspect { limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateBound {
    pub integral: usize,
    pub extreme: Extreme,
    pub sampled: f64,
    pub cell: usize,
    pub on_boundary: bool,
    #[serde(flatten)]
    pub status: BoundStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosednessReport {
    pub closed_in_box: bool,
    pub bounds: Vec<CoordinateBound>,
    pub note: &'static str,
}

const NOTE: &str = "heuristic: extremes are taken over grid centers inside the box and \
extrapolated along one outward ray; a clean report does not prove the image is closed";

/// Walks from `x` along `x + (2^k - 1)(x - center)` and classifies the
/// minimum of `sign * f_i` against the value at `x`.
fn classify_ray(sys: &IntegrableSystem, i: usize, sign: f64, x: &[f64], margin: f64) -> BoundStatus {
    let center = sys.bounds().center();
    let dir: Vec<f64> = x.iter().zip(&center).map(|(a, c)| a - c).collect();
    let mut stack = Vec::new();
    let mut values = vec![0.0; sys.dof()];
    let mut ws = Vec::new();
    let mut point = x.to_vec();
    for k in 0..=MAX_DOUBLINGS {
        let t = (2f64).powi(k as i32) - 1.0;
        for ((p, a), d) in point.iter_mut().zip(x).zip(&dir) {
            *p = a + t * d;
        }
        if sys.values_into(&point, &mut values, &mut stack).is_err() || !values[i].is_finite() {
            break;
        }
        ws.push(sign * values[i]);
        let n = ws.len();
        if n >= 3 {
            let settled = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
            if settled(ws[n - 1], ws[n - 2]) && settled(ws[n - 2], ws[n - 3]) {
                break;
            }
        }
    }
    let w0 = ws[0];
    let best = ws.iter().copied().fold(f64::INFINITY, f64::min);
    if best >= w0 - margin {
        return BoundStatus::Attained;
    }
    let n = ws.len();
    let converged = n >= 3 && {
        let settled = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
        settled(ws[n - 1], ws[n - 2]) && settled(ws[n - 2], ws[n - 3])
    };
    if !converged {
        return BoundStatus::BoxLimited;
    }
    let limit = ws[n - 1];
    if best < limit - margin {
        // passes through a more extreme value and comes back
        BoundStatus::BoxLimited
    } else {
        BoundStatus::Suspect { limit: sign * limit }
    }
}

/// Per-coordinate extremes of the sampled image `{F(center)}` and whether
/// each is attained, box-induced, or only approached.
pub fn image_closedness_probe(sys: &IntegrableSystem, field: &GridField, margin: f64) -> ClosednessReport {
    assert!(margin >= 0.0, "margin must be nonnegative");
    let grid = field.grid();
    let mut bounds = Vec::new();
    for i in 0..field.dof() {
        for extreme in [Extreme::Min, Extreme::Max] {
            let sign = if extreme == Extreme::Min { 1.0 } else { -1.0 };
            let best = (0..grid.cell_count())
                .filter(|&c| field.is_valid(c))
                .map(|c| (sign * field.value(c)[i], c))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let Some((w, cell)) = best else { continue };
            let on_boundary = grid.on_boundary(cell);
            let status = if on_boundary {
                classify_ray(sys, i, sign, &grid.center(cell), margin)
            } else {
                BoundStatus::Attained
            };
            bounds.push(CoordinateBound {
                integral: i,
                extreme,
                sampled: sign * w,
                cell,
                on_boundary,
                status,
            });
        }
    }
    ClosednessReport {
        closed_in_box: bounds.iter().all(|b| !matches!(b.status, BoundStatus::Suspect { .. })),
        bounds,
        note: NOTE,
    }
}
