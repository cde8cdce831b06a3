//! The billiard map in its three branches, the free rotation `F` on the outer
//! circle and the first return map `G` to the obstacle.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::phase::{wrap, CurveSet, InnerState, OuterState, Params, RegionSet, Reversible};

pub const DEFAULT_MAX_OUTER_STEPS: usize = 1_000_000;

/// Tolerance for recognising that `F` has closed up without a collision.
const PERIODIC_TOL: f64 = 1e-13;

/// Obstacle to table: ray from the obstacle point, intersected with the unit
/// circle in the direction of motion.
pub fn map_inner_to_outer(x: InnerState, p: &Params) -> OuterState {
    let q = [-p.delta + p.r * x.omega.cos(), -p.r * x.omega.sin()];
    let a = x.direction_angle();
    let u = [a.cos(), a.sin()];
    let b = q[0] * u[0] + q[1] * u[1];
    let c = q[0] * q[0] + q[1] * q[1] - 1.0;
    let sq = (b * b - c).max(0.0).sqrt();
    let t = if b <= 0.0 { -b + sq } else { -c / (b + sq) };
    let pt = [q[0] + t * u[0], q[1] + t * u[1]];
    let s = pt[1].atan2(pt[0]);
    let theta = (pt[0] * u[1] - pt[1] * u[0]).atan2(pt[0] * u[0] + pt[1] * u[1]);
    OuterState { s: wrap(s), theta }
}

/// The free map `F(s, theta) = (s + pi - 2 theta, theta)`.
#[inline]
pub fn free_flight(x: OuterState) -> OuterState {
    OuterState { s: wrap(x.s + PI - 2.0 * x.theta), theta: x.theta }
}

/// Signed distance from the obstacle centre to the chord leaving `x`.
#[inline]
pub fn impact_parameter(x: &OuterState, p: &Params) -> f64 {
    x.theta.sin() + p.delta * (x.theta - x.s).sin()
}

/// Table to obstacle, if the chord leaving `x` meets the obstacle. A chord
/// tangent to the obstacle counts as a hit with `|beta| = pi/2`.
pub fn hit_obstacle(x: &OuterState, p: &Params) -> Option<InnerState> {
    if impact_parameter(x, p).abs() > p.r {
        return None;
    }
    let a = x.s + PI - x.theta;
    let u = [a.cos(), a.sin()];
    let e = [-u[1], u[0]];
    let w = [x.s.cos() + p.delta, x.s.sin()];
    // entry point relative to the centre: d e - sqrt(r^2 - d^2) u, with the
    // square root factored to avoid cancellation near grazing
    let d = (w[0] * e[0] + w[1] * e[1]).clamp(-p.r, p.r);
    let sq = ((p.r - d.abs()) * (p.r + d.abs())).sqrt();
    let mut n = [d * e[0] - sq * u[0], d * e[1] - sq * u[1]];
    let len = n[0].hypot(n[1]);
    n = [n[0] / len, n[1] / len];
    let un = u[0] * n[0] + u[1] * n[1];
    let v = [u[0] - 2.0 * un * n[0], u[1] - 2.0 * un * n[1]];
    let omega = -n[1].atan2(n[0]);
    let beta = -(n[0] * v[1] - n[1] * v[0]).atan2(n[0] * v[0] + n[1] * v[1]);
    Some(InnerState { omega: wrap(omega), beta: beta.clamp(-PI / 2.0, PI / 2.0) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterStep {
    Obstacle(InnerState),
    Free(OuterState),
}

pub fn map_outer(x: OuterState, p: &Params) -> OuterStep {
    match hit_obstacle(&x, p) {
        Some(y) => OuterStep::Obstacle(y),
        None => OuterStep::Free(free_flight(x)),
    }
}

/// Residuals of the obstacle-to-table equations:
/// `sin theta + delta sin(theta + s) + r sin beta` and `omega + beta + s + theta (mod 2 pi)`.
pub fn inner_to_outer_residuals(x: &InnerState, y: &OuterState, p: &Params) -> [f64; 2] {
    [
        y.theta.sin() + p.delta * (y.theta + y.s).sin() + p.r * x.beta.sin(),
        wrap(x.omega + x.beta + y.s + y.theta),
    ]
}

/// Residuals of the table-to-obstacle equations:
/// `sin theta + delta sin(theta - s) + r sin beta` and `omega - beta - theta + s (mod 2 pi)`.
pub fn outer_to_inner_residuals(x: &OuterState, y: &InnerState, p: &Params) -> [f64; 2] {
    [
        x.theta.sin() + p.delta * (x.theta - x.s).sin() + p.r * y.beta.sin(),
        wrap(y.omega - y.beta - x.theta + x.s),
    ]
}

/// One obstacle-to-obstacle excursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnRecord {
    pub start: InnerState,
    pub end: InnerState,
    /// First outer collision.
    pub first: OuterState,
    /// Last outer collision, whose chord hits the obstacle.
    pub last: OuterState,
    /// Free flights between the first and the last outer collision.
    pub m: usize,
    /// Number of full turns accumulated by `s` from `first` to `last`.
    pub winding: i64,
}

impl ReturnRecord {
    /// Return time in billiard steps.
    pub fn nu(&self) -> usize {
        self.m + 2
    }

    /// Common reflection angle of the outer collisions.
    pub fn theta(&self) -> f64 {
        self.first.theta
    }

    /// All outer collisions in order, regenerated with the same arithmetic as
    /// the tracer. Length `m + 1`.
    pub fn outer_hits(&self) -> Vec<OuterState> {
        let mut v = Vec::with_capacity(self.m + 1);
        let mut x = self.first;
        v.push(x);
        for _ in 0..self.m {
            x = free_flight(x);
            v.push(x);
        }
        v
    }

    /// Unwrapped arc position of the last collision.
    pub fn s_last_unwrapped(&self) -> f64 {
        self.last.s + TAU * self.winding as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum OrbitClass {
    Returns(ReturnRecord),
    Whispering { launch: OuterState },
    PeriodicNonColliding { launch: OuterState, period: usize },
    MaxIterExceeded { launch: OuterState, steps: usize },
}

impl OrbitClass {
    pub fn record(&self) -> Option<&ReturnRecord> {
        match self {
            OrbitClass::Returns(r) => Some(r),
            _ => None,
        }
    }
}

/// Follows the orbit of an outer state until it meets the obstacle.
/// `start` is only copied into the record.
pub fn launch(start: InnerState, out: OuterState, p: &Params, max_outer_steps: usize) -> OrbitClass {
    if RegionSet::new(*p).in_whispering(&out) {
        return OrbitClass::Whispering { launch: out };
    }
    let step = PI - 2.0 * out.theta;
    let mut x = out;
    let mut unwrapped = out.s;
    for k in 0..=max_outer_steps {
        if let Some(end) = hit_obstacle(&x, p) {
            let winding = ((unwrapped - x.s) / TAU).round() as i64;
            return OrbitClass::Returns(ReturnRecord { start, end, first: out, last: x, m: k, winding });
        }
        if k == max_outer_steps {
            break;
        }
        x = free_flight(x);
        unwrapped += step;
        if (wrap(x.s - out.s)).abs() < PERIODIC_TOL {
            return OrbitClass::PeriodicNonColliding { launch: out, period: k + 1 };
        }
    }
    OrbitClass::MaxIterExceeded { launch: out, steps: max_outer_steps }
}

pub fn first_return(x: InnerState, p: &Params, max_outer_steps: usize) -> OrbitClass {
    let out = map_inner_to_outer(x, p);
    launch(x, out, p, max_outer_steps)
}

/// The first return map `G`.
pub fn g_map(x: InnerState, p: &Params) -> Result<ReturnRecord> {
    match first_return(x, p, DEFAULT_MAX_OUTER_STEPS) {
        OrbitClass::Returns(rec) => Ok(rec),
        other => Err(Error::NonReturning(format!("{x:?}: {other:?}"))),
    }
}

/// `G^{-1} = R G R`.
pub fn g_inverse(x: InnerState, p: &Params) -> Result<InnerState> {
    g_map(x.involution(), p).map(|rec| rec.end.involution())
}

/// The branch of `G` with prescribed return time `m + 2`, ignoring earlier
/// collisions. `None` when the chord after `m` free flights misses.
pub fn g_fixed(x: InnerState, m: usize, p: &Params) -> Option<ReturnRecord> {
    let first = map_inner_to_outer(x, p);
    let mut last = first;
    for _ in 0..m {
        last = free_flight(last);
    }
    let end = hit_obstacle(&last, p)?;
    let unwrapped = first.s + m as f64 * (PI - 2.0 * first.theta);
    let winding = ((unwrapped - last.s) / TAU).round() as i64;
    Some(ReturnRecord { start: x, end, first, last, m, winding })
}

/// Impact parameter of the chord after `m` free flights, a smooth function of
/// the launch state. The branch `g_fixed(x, m)` exists iff `|D| <= r`.
pub fn impact_after(x: InnerState, m: usize, p: &Params) -> f64 {
    let first = map_inner_to_outer(x, p);
    let s = first.s + m as f64 * (PI - 2.0 * first.theta);
    first.theta.sin() + p.delta * (first.theta - s).sin()
}

/// `min_{k < m} (|D_k| - r)`: positive iff no chord before the `m`-th meets the
/// obstacle.
pub fn clearance_before(x: InnerState, m: usize, p: &Params) -> f64 {
    let first = map_inner_to_outer(x, p);
    let mut best = f64::INFINITY;
    let mut y = first;
    for _ in 0..m {
        best = best.min(impact_parameter(&y, p).abs() - p.r);
        y = free_flight(y);
    }
    best
}

/// Curve residuals for the obstacle-bound region, re-exported for checks.
pub fn l_minus_residual(x: &OuterState, p: &Params) -> f64 {
    CurveSet::new(*p).l_minus(x)
}
