//! Polylines on the cylinder `S^1 x [-pi/2, pi/2]`.

use std::f64::consts::TAU;

use crate::phase::{angle_diff, InnerState};

/// Maximum turning between consecutive segments before refinement.
pub const MAX_TURNING: f64 = 0.05;
/// Maximum segment length before refinement.
pub const MAX_SEGMENT: f64 = 0.02;

/// Unwraps `omega` so that consecutive vertices differ by less than `pi`.
pub fn lift(points: &[InnerState]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(points.len());
    for p in points {
        match out.last() {
            None => out.push([p.omega, p.beta]),
            Some(q) => out.push([q[0] + angle_diff(p.omega, q[0]), p.beta]),
        }
    }
    out
}

fn seg_point_dist(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
    };
    (a[0] + t * d[0] - p[0]).hypot(a[1] + t * d[1] - p[1])
}

/// Distance on the cylinder from a point to a polyline.
pub fn point_to_polyline(p: &InnerState, line: &[InnerState]) -> f64 {
    let lifted = lift(line);
    if lifted.len() == 1 {
        return p.distance(&line[0]);
    }
    let mut best = f64::INFINITY;
    for w in lifted.windows(2) {
        let mid = 0.5 * (w[0][0] + w[1][0]);
        let q = [mid + angle_diff(p.omega, mid), p.beta];
        for shift in [-TAU, 0.0, TAU] {
            best = best.min(seg_point_dist(w[0], w[1], [q[0] + shift, q[1]]));
        }
    }
    best
}

/// One-sided distance `max_{a} dist(a, B)`.
pub fn directed_hausdorff(a: &[InnerState], b: &[InnerState]) -> f64 {
    a.iter().map(|p| point_to_polyline(p, b)).fold(0.0, f64::max)
}

pub fn hausdorff(a: &[InnerState], b: &[InnerState]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Total length in lifted coordinates.
pub fn length(points: &[InnerState]) -> f64 {
    lift(points).windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
}

/// Absolute turning angle at each interior vertex.
pub fn turning(points: &[InnerState]) -> Vec<f64> {
    let l = lift(points);
    l.windows(3)
        .map(|w| {
            let a = (w[1][1] - w[0][1]).atan2(w[1][0] - w[0][0]);
            let b = (w[2][1] - w[1][1]).atan2(w[2][0] - w[1][0]);
            angle_diff(b, a).abs()
        })
        .collect()
}

/// Slopes `d beta / d omega` of every segment.
pub fn slopes(points: &[InnerState]) -> Vec<f64> {
    lift(points)
        .windows(2)
        .filter(|w| w[1][0] != w[0][0])
        .map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]))
        .collect()
}

/// A curve that is a graph `omega = f(beta)`, stored with strictly increasing
/// `beta` and lifted `omega`.
#[derive(Debug, Clone)]
pub struct BetaGraph {
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl BetaGraph {
    pub fn from_polyline(points: &[InnerState]) -> Option<Self> {
        let mut l = lift(points);
        if l.len() < 2 {
            return None;
        }
        if l[0][1] > l[l.len() - 1][1] {
            l.reverse();
        }
        if l.windows(2).any(|w| w[1][1] <= w[0][1]) {
            return None;
        }
        Some(BetaGraph { beta: l.iter().map(|p| p[1]).collect(), omega: l.iter().map(|p| p[0]).collect() })
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta[0], self.beta[self.beta.len() - 1])
    }

    /// Linear interpolation; `None` outside the range.
    pub fn eval(&self, b: f64) -> Option<f64> {
        let (lo, hi) = self.beta_range();
        if b < lo || b > hi {
            return None;
        }
        let i = match self.beta.binary_search_by(|x| x.partial_cmp(&b).unwrap()) {
            Ok(i) => return Some(self.omega[i]),
            Err(i) => i,
        };
        let (b0, b1) = (self.beta[i - 1], self.beta[i]);
        let t = (b - b0) / (b1 - b0);
        Some(self.omega[i - 1] + t * (self.omega[i] - self.omega[i - 1]))
    }
}

/// Intersections of two beta-graphs on the cylinder: the `beta` values where
/// `f(beta) - g(beta)` is a multiple of `2 pi`, together with a flag telling
/// whether the difference was monotone (transverse) on the common range.
pub fn graph_intersections(f: &BetaGraph, g: &BetaGraph) -> (Vec<f64>, bool) {
    let lo = f.beta_range().0.max(g.beta_range().0);
    let hi = f.beta_range().1.min(g.beta_range().1);
    if lo >= hi {
        return (Vec::new(), true);
    }
    let mut nodes: Vec<f64> = f
        .beta
        .iter()
        .chain(g.beta.iter())
        .copied()
        .filter(|&b| b >= lo && b <= hi)
        .collect();
    nodes.push(lo);
    nodes.push(hi);
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();
    let h: Vec<f64> = nodes.iter().map(|&b| f.eval(b).unwrap() - g.eval(b).unwrap()).collect();
    let inc = h.windows(2).all(|w| w[1] >= w[0]);
    let dec = h.windows(2).all(|w| w[1] <= w[0]);
    let mut out = Vec::new();
    for i in 0..nodes.len() - 1 {
        let (h0, h1) = (h[i], h[i + 1]);
        let kmin = (h0.min(h1) / TAU).ceil() as i64;
        let kmax = (h0.max(h1) / TAU).floor() as i64;
        for k in kmin..=kmax {
            let target = k as f64 * TAU;
            // endpoint shared with the next segment is counted once
            if i + 1 < nodes.len() - 1 && target == h1 {
                continue;
            }
            let t = if h1 == h0 { 0.0 } else { (target - h0) / (h1 - h0) };
            out.push(nodes[i] + t * (nodes[i + 1] - nodes[i]));
        }
    }
    (out, inc || dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn line(c: f64, slope: f64, n: usize) -> Vec<InnerState> {
        (0..=n)
            .map(|i| {
                let b = -FRAC_PI_2 + PI * i as f64 / n as f64;
                InnerState::new(c + slope * b, b)
            })
            .collect()
    }

    #[test]
    fn crossing_lines_meet_once() {
        let s = BetaGraph::from_polyline(&line(0.3, -1.0, 50)).unwrap();
        let u = BetaGraph::from_polyline(&line(1.0, 1.0, 50)).unwrap();
        let (x, transverse) = graph_intersections(&s, &u);
        assert!(transverse);
        assert_eq!(x.len(), 1);
        assert!((x[0] - (-0.35)).abs() < 1e-12);
    }

    #[test]
    fn wrapped_lines() {
        let s = BetaGraph::from_polyline(&line(3.0, -1.0, 50)).unwrap();
        let u = BetaGraph::from_polyline(&line(-3.0, 1.0, 50)).unwrap();
        let (x, _) = graph_intersections(&s, &u);
        assert_eq!(x.len(), 1);
    }

    #[test]
    fn distances() {
        let a = line(0.0, -1.0, 20);
        let b = line(0.01, -1.0, 7);
        let h = hausdorff(&a, &b);
        // the end vertices are offset horizontally
        assert!((h - 0.01).abs() < 1e-9, "{h}");
        let inner = directed_hausdorff(&a[1..20], &b);
        assert!((inner - 0.01 / 2f64.sqrt()).abs() < 1e-9, "{inner}");
        assert!((length(&a) - PI * 2f64.sqrt()).abs() < 1e-12);
        assert!(turning(&a).iter().all(|t| *t < 1e-12));
        assert!(slopes(&a).iter().all(|s| (s + 1.0).abs() < 1e-12));
        let p = InnerState::new(PI - 0.01, 0.0);
        let q = vec![InnerState::new(-PI + 0.01, -0.1), InnerState::new(-PI + 0.01, 0.1)];
        assert!((point_to_polyline(&p, &q) - 0.02).abs() < 1e-12);
    }
}
