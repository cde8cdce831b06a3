//! Normal periodic orbits: trajectories that leave and re-enter the obstacle
//! orthogonally, in the small-obstacle limit where they do not depend on `r`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::par::{map_range, Execution};
use crate::phase::{angle_diff, wrap};
use crate::roots::{bisect, scan_roots};

pub const SCAN_PANELS: usize = 20_000;
pub const ROOT_TOL: f64 = 1e-13;
pub const DEDUP_TOL: f64 = 1e-9;
pub const TANGENT_TOL: f64 = 1e-9;
pub const BORDERLINE_TOL: f64 = 1e-7;
const SNAP_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalKind {
    Transverse,
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPoint {
    pub omega: f64,
    pub theta: f64,
    pub m: usize,
    pub kind: NormalKind,
    pub delta: f64,
    /// Distance of the tangency indicator from the threshold lies in
    /// `(1e-9, 1e-7)`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub borderline: bool,
}

/// `theta = arcsin(delta sin omega)`.
pub fn normal_theta(omega: f64, delta: f64) -> f64 {
    (delta * omega.sin()).clamp(-1.0, 1.0).asin()
}

/// Second equation of the normal system with `theta` eliminated:
/// `sin theta - delta sin(omega - (m+1)(pi - 2 theta))`.
pub fn normal_residual(omega: f64, m: usize, delta: f64) -> f64 {
    let th = normal_theta(omega, delta);
    th.sin() - delta * (omega - (m as f64 + 1.0) * (PI - 2.0 * th)).sin()
}

/// `zeta = delta cos omega / cos theta`.
pub fn zeta(omega: f64, delta: f64) -> f64 {
    delta * omega.cos() / normal_theta(omega, delta).cos()
}

/// Position on the obstacle where the normal orbit launched at `omega` returns.
pub fn return_image(omega: f64, theta: f64, m: usize) -> f64 {
    wrap(omega + 2.0 * theta - m as f64 * (PI - 2.0 * theta))
}

fn tangency_indicator(omega: f64, m: usize, delta: f64) -> f64 {
    omega.cos().abs().min((zeta(omega, delta) + 1.0 / (m as f64 + 1.0)).abs())
}

impl NormalPoint {
    fn classify(omega: f64, m: usize, delta: f64) -> Self {
        let omega = wrap(omega);
        let c = tangency_indicator(omega, m, delta);
        NormalPoint {
            omega,
            theta: normal_theta(omega, delta),
            m,
            kind: if c <= TANGENT_TOL { NormalKind::Tangent } else { NormalKind::Transverse },
            delta,
            borderline: c > TANGENT_TOL && c < BORDERLINE_TOL,
        }
    }

    /// `[sin theta - delta sin omega, sin theta - delta sin(omega - (m+1)(pi - 2 theta))]`.
    pub fn residuals(&self) -> [f64; 2] {
        [
            self.theta.sin() - self.delta * self.omega.sin(),
            self.theta.sin() - self.delta * (self.omega - (self.m as f64 + 1.0) * (PI - 2.0 * self.theta)).sin(),
        ]
    }

    pub fn return_image(&self) -> f64 {
        return_image(self.omega, self.theta, self.m)
    }

    pub fn in_h_minus(&self) -> bool {
        self.omega.sin().abs() < self.delta
    }
}

/// Points where the tangency condition holds for this `m`:
/// `omega = +-pi/2` and the roots of `zeta + 1/(m+1)`.
fn tangency_candidates(m: usize, delta: f64) -> Vec<f64> {
    let k = 1.0 / (m as f64 + 1.0);
    let mut c = vec![-FRAC_PI_2, FRAC_PI_2];
    c.extend(scan_roots(|w| zeta(w, delta) + k, -PI, PI, 2000, ROOT_TOL));
    c
}

fn roots_for_m(m: usize, delta: f64) -> Vec<NormalPoint> {
    let f = |w: f64| normal_residual(w, m, delta);
    let tangent: Vec<f64> = tangency_candidates(m, delta).into_iter().filter(|&w| f(w).abs() <= 1e-10).collect();
    let mut found: Vec<f64> = Vec::new();
    // shifted so that omega = pi is interior to a panel
    let shift = 0.37 * TAU / SCAN_PANELS as f64;
    for w in scan_roots(f, -PI + shift, PI + shift, SCAN_PANELS, 0.0) {
        let h = 1e-6;
        let slope = (f(w + h) - f(w - h)) / (2.0 * h);
        let snap = tangent
            .iter()
            .copied()
            .filter(|t| angle_diff(*t, w).abs() < SNAP_RADIUS)
            .min_by(|a, b| angle_diff(*a, w).abs().partial_cmp(&angle_diff(*b, w).abs()).unwrap());
        match snap {
            Some(t) if slope.abs() < 1e-3 => found.push(t),
            _ => found.push(w),
        }
    }
    // even-order contacts give no sign change
    found.extend(tangent.iter().copied());
    let mut out: Vec<NormalPoint> = Vec::new();
    for w in found {
        let w = wrap(w);
        if !out.iter().any(|q| angle_diff(q.omega, w).abs() < DEDUP_TOL) {
            out.push(NormalPoint::classify(w, m, delta));
        }
    }
    out
}

/// All normal points with `m <= m_max`, sorted by `(m, omega)`. A point that
/// solves the system for several `m` is kept with the smallest one.
pub fn find_normals(delta: f64, m_max: usize) -> Vec<NormalPoint> {
    find_normals_with(delta, m_max, Execution::default())
}

pub fn find_normals_with(delta: f64, m_max: usize, exec: Execution) -> Vec<NormalPoint> {
    let per_m = map_range(exec, m_max + 1, |m| roots_for_m(m, delta));
    let mut out: Vec<NormalPoint> = Vec::new();
    for mut level in per_m {
        level.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
        for p in level {
            if !out.iter().any(|q| angle_diff(q.omega, p.omega).abs() < DEDUP_TOL) {
                out.push(p);
            }
        }
    }
    out
}

/// The normal point with `theta = -(p/q) pi` and `m` free flights, if the
/// system closes there.
pub fn normal_from_rational(p: u32, q: u32, m: usize, delta: f64) -> Option<NormalPoint> {
    if p == 0 || p >= q {
        return None;
    }
    let theta = -(p as f64 / q as f64) * PI;
    let s = theta.sin() / delta;
    if s.abs() > 1.0 {
        return None;
    }
    let a = s.asin();
    [a, PI - a].into_iter().map(wrap).find_map(|w| {
        let pt = NormalPoint::classify(w, m, delta);
        let res = pt.residuals();
        (res[0].abs() <= 1e-10 && res[1].abs() <= 1e-10).then_some(pt)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    /// Smallest acceptable number of points.
    pub min_points: usize,
    pub exec: Execution,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { min_points: 1, exec: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFamily {
    pub delta: f64,
    pub n: usize,
    pub d: f64,
    /// `pi - 2 arcsin delta`.
    pub bound: f64,
    pub points: Vec<NormalPoint>,
}

impl NormalFamily {
    /// Index of the member at the return image of member `i`.
    pub fn image_index(&self, i: usize) -> Option<usize> {
        let w = self.points[i].return_image();
        self.points.iter().position(|q| angle_diff(q.omega, w).abs() < 1e-8)
    }
}

/// Largest gap between consecutive points of `omegas` on the circle, with the
/// arcs `|sin omega| >= delta` collapsed.
pub fn family_gap(omegas: &[f64], delta: f64) -> f64 {
    if omegas.is_empty() {
        return f64::INFINITY;
    }
    let excluded = PI - 2.0 * delta.asin();
    let mut w: Vec<f64> = omegas.iter().map(|&x| wrap(x)).collect();
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: f64 = 0.0;
    for i in 0..w.len() {
        let a = w[i];
        let b = if i + 1 < w.len() { w[i + 1] } else { w[0] + TAU };
        let mut g = b - a;
        for c in [-FRAC_PI_2, FRAC_PI_2, 3.0 * FRAC_PI_2, 5.0 * FRAC_PI_2] {
            if a < c && c < b {
                g -= excluded;
            }
        }
        best = best.max(g);
    }
    best
}

/// Greedy family: whole `m`-levels of transverse normals inside `H-` are added
/// in increasing `m` until the gap bound and `min_points` are met.
pub fn build_x(delta: f64, m_max: usize, cfg: FamilyConfig) -> Result<NormalFamily> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Precondition(format!("delta = {delta} not in (0, 1)")));
    }
    let bound = PI - 2.0 * delta.asin();
    let all = find_normals_with(delta, m_max, cfg.exec);
    let mut chosen: Vec<NormalPoint> = Vec::new();
    let mut best_gap = f64::INFINITY;
    for m in 0..=m_max {
        let level: Vec<NormalPoint> = all
            .iter()
            .filter(|p| p.m == m && p.kind == NormalKind::Transverse && !p.borderline && p.in_h_minus())
            .copied()
            .collect();
        if level.is_empty() {
            continue;
        }
        // members come in closed sets: the image of a normal point solves the
        // same system with the same m
        chosen.extend(level);
        let omegas: Vec<f64> = chosen.iter().map(|p| p.omega).collect();
        let d = family_gap(&omegas, delta);
        best_gap = d;
        if d < bound && chosen.len() >= cfg.min_points {
            chosen.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
            let fam = NormalFamily { delta, n: chosen.len(), d, bound, points: chosen };
            for i in 0..fam.n {
                if fam.image_index(i).is_none() {
                    return Err(Error::Numerical(format!("family not closed at omega = {}", fam.points[i].omega)));
                }
            }
            return Ok(fam);
        }
    }
    Err(Error::SpacingUnattainable(format!(
        "delta = {delta}, m_max = {m_max}: gap {best_gap} with {} points, need < {bound} and >= {}",
        chosen.len(),
        cfg.min_points
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldingRoots {
    pub delta0: f64,
    pub delta: f64,
    /// Half-width of the basin around `pi/2` that belongs to the tangency.
    pub basin: f64,
    /// Roots `(phi, theta)` inside the basin.
    pub roots: Vec<(f64, f64)>,
    /// All roots with `|phi - pi/2| <= 0.5`.
    pub window_roots: Vec<(f64, f64)>,
}

/// `sin phi - sin(phi + 2(m+1) arcsin(delta sin phi))`.
pub fn unfolding_residual(phi: f64, m: usize, delta: f64) -> f64 {
    phi.sin() - (phi + 2.0 * (m as f64 + 1.0) * (delta * phi.sin()).asin()).sin()
}

/// Roots of the unfolding equation near `phi = pi/2` at `delta = sin(p pi/q) + d_delta`.
pub fn cubic_unfolding_roots(p: u32, q: u32, m: usize, d_delta: f64) -> Result<UnfoldingRoots> {
    if p == 0 || p >= q || !((m as u64 + 1) * p as u64).is_multiple_of(q as u64) {
        return Err(Error::Precondition(format!("(m+1)p/q must be an integer: m = {m}, p/q = {p}/{q}")));
    }
    let a = p as f64 * PI / q as f64;
    let delta0 = a.sin();
    let delta = delta0 + d_delta;
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Precondition(format!("delta = {delta} not in (0, 1)")));
    }
    let basin = (1.0 / ((m as f64 + 1.0) * a.tan().abs())).min(0.5);
    let f = |phi: f64| unfolding_residual(phi, m, delta);
    let all = scan_roots(f, FRAC_PI_2 - 0.5, FRAC_PI_2 + 0.5, SCAN_PANELS, 1e-15);
    let pair = |phi: f64| (phi, -(delta * phi.sin()).asin());
    let window_roots: Vec<(f64, f64)> = all.iter().map(|&x| pair(x)).collect();
    let roots = all.iter().filter(|&&x| (x - FRAC_PI_2).abs() <= basin).map(|&x| pair(x)).collect();
    Ok(UnfoldingRoots { delta0, delta, basin, roots, window_roots })
}

/// Refines a root of `f` known to lie in `[a, b]`.
pub fn refine(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    bisect(f, a, b, ROOT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight::g_map;
    use crate::phase::{InnerState, Params};

    #[test]
    fn period_two_orbits_for_every_m() {
        for m in 0..4 {
            for d in [0.3, 0.8] {
                assert!(normal_residual(0.0, m, d).abs() < 1e-15);
                assert!(normal_residual(PI, m, d).abs() < 1e-15);
            }
        }
        let all = find_normals(0.8, 6);
        let zero = all.iter().find(|p| p.omega.abs() < 1e-12).unwrap();
        assert_eq!(zero.m, 0);
        assert!(all.iter().any(|p| (p.omega - PI).abs() < 1e-12 && p.m == 0));
    }

    #[test]
    fn tangent_point_needs_five_flights() {
        let d = (PI / 3.0).sin();
        assert!((normal_residual(-FRAC_PI_2, 2, d) + 2.0 * d).abs() < 1e-12);
        assert!(normal_residual(-FRAC_PI_2, 5, d).abs() < 1e-12);
        assert!(normal_from_rational(1, 3, 2, d).is_none());
        let t = normal_from_rational(1, 3, 5, d).unwrap();
        assert_eq!(t.kind, NormalKind::Tangent);
        assert!((t.omega + FRAC_PI_2).abs() < 1e-12 && (t.theta + PI / 3.0).abs() < 1e-12);
        let all = find_normals(d, 6);
        let hit = all.iter().find(|p| (p.omega + FRAC_PI_2).abs() < 1e-9).unwrap();
        assert_eq!((hit.m, hit.kind), (5, NormalKind::Tangent));
    }

    #[test]
    fn quarter_family() {
        let d = (PI / 4.0).sin();
        let t = normal_from_rational(1, 4, 3, d).unwrap();
        assert!((t.omega + FRAC_PI_2).abs() < 1e-12);
        assert_eq!(t.kind, NormalKind::Tangent);
        assert!(t.residuals().iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn images_match_trajectories() {
        let p = Params::new(0.8, 1e-5).unwrap();
        for n in find_normals(0.8, 4).iter().filter(|n| n.in_h_minus()) {
            let rec = g_map(InnerState::new(n.omega, 0.0), &p).unwrap();
            assert_eq!(rec.m, n.m, "{n:?}");
            assert!(rec.end.beta.abs() < 1e-7, "{n:?} {rec:?}");
            assert!(angle_diff(rec.end.omega, n.return_image()).abs() < 1e-8, "{n:?} {:?} {}", rec.end, n.return_image());
        }
    }

    #[test]
    fn family_at_point_eight() {
        let fam = build_x(0.8, 12, FamilyConfig::default()).unwrap();
        assert!(fam.d < PI - 2.0 * 0.8f64.asin());
        assert!(fam.points.iter().all(|p| p.kind == NormalKind::Transverse));
        assert!(build_x(0.8, 0, FamilyConfig::default()).is_err());
    }

    #[test]
    fn gap_collapses_excluded_arcs() {
        let d = 0.8;
        let g = family_gap(&[0.0, PI], d);
        assert!((g - 2.0 * d.asin()).abs() < 1e-12);
    }

    #[test]
    fn unfolding_counts() {
        let below = cubic_unfolding_roots(1, 3, 2, -0.01).unwrap();
        assert_eq!(below.roots.len(), 1);
        let above = cubic_unfolding_roots(1, 3, 2, 0.01).unwrap();
        assert_eq!(above.roots.len(), 3, "{above:?}");
        let est = (0.02 / below.delta0).sqrt();
        let outer = above.roots[2].0 - FRAC_PI_2;
        assert!((outer - est).abs() / est < 0.15, "{outer} {est}");
        assert!(cubic_unfolding_roots(1, 3, 1, 0.01).is_err());
    }

    #[test]
    fn unfolding_is_cubic_at_threshold() {
        let d0 = (PI / 3.0).sin();
        let f = |x: f64| unfolding_residual(x, 2, d0);
        let h = 1e-4;
        let x = FRAC_PI_2;
        assert!(f(x).abs() < 1e-15);
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let d3 = (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h);
        assert!(d1.abs() < 1e-6 && d2.abs() < 1e-6, "{d1} {d2}");
        assert!(d3.abs() > 1.0, "{d3}");
    }
}
