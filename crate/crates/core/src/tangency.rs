//! Local invariant manifolds of symmetric periodic points, the leading-order
//! tangency curve near a tangent normal point, and the detection of quadratic
//! homoclinic tangencies as `r` varies.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::{clearance_before, g_fixed};
use crate::linearize::dg_analytic;
use crate::normal::{family_gap, find_normals, normal_from_rational, NormalFamily, NormalKind, NormalPoint};
use crate::par::{map_range, Execution};
use crate::phase::{angle_diff, InnerState, LimitLine, Params, Reversible};
use crate::polyline::{point_to_polyline, slopes, turning, MAX_SEGMENT, MAX_TURNING};
use crate::roots::bisect_bracket;
use crate::strata::{build_strips, crossing_matrix, symmetric_periodic_from_word, Strip, StripConfig, StripSet, SymmetricPeriodicPoint};

/// Offset along the expanding direction at which a trial point counts as
/// having left the periodic point.
const ESCAPE: f64 = 1e-3;
const MAX_PERIODS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldSide {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCurve {
    pub base: SymmetricPeriodicPoint,
    pub side: ManifoldSide,
    /// Vertices ordered by increasing `beta` for stable curves and by
    /// decreasing `beta` for unstable ones.
    pub polyline: Vec<InnerState>,
    /// Smallest and largest segment slope `d beta / d omega`, segments touching
    /// the boundary excluded.
    pub slope_band: (f64, f64),
    /// `omega` of the anchor whose strip holds the curve.
    pub anchor_omega: f64,
    /// Largest distance between the involution image of a vertex and the
    /// independently computed opposite manifold at the same height.
    pub reversibility_gap: f64,
    pub truncated: bool,
}

impl ManifoldCurve {
    pub fn limit_line(&self) -> LimitLine {
        match self.side {
            ManifoldSide::Stable => LimitLine::Decreasing { c: self.anchor_omega },
            ManifoldSide::Unstable => LimitLine::Increasing { c: self.anchor_omega },
        }
    }

    /// Largest distance of a vertex from the limit line through the anchor.
    pub fn limit_distance(&self) -> f64 {
        let l = self.limit_line();
        self.polyline.iter().map(|x| l.distance(x)).fold(0.0, f64::max)
    }

    /// Both ends lie on `|beta| = pi/2`.
    pub fn connects_boundary(&self) -> bool {
        match (self.polyline.first(), self.polyline.last()) {
            (Some(a), Some(b)) => a.on_boundary() && b.on_boundary() && a.beta * b.beta < 0.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldConfig {
    /// Uniform `beta` levels before refinement.
    pub levels: usize,
    pub max_points: usize,
    pub exec: Execution,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        ManifoldConfig { levels: 64, max_points: 4000, exec: Execution::default() }
    }
}

/// The period map of a symmetric periodic point with its eigen-directions
/// carried along the orbit.
struct PeriodMap<'a> {
    p: Params,
    orbit: Vec<InnerState>,
    times: Vec<usize>,
    lambda_u: f64,
    /// Unit stable and unstable directions at each orbit point, pushed forward
    /// by `DG` with positive scaling.
    vs: Vec<[f64; 2]>,
    vu: Vec<[f64; 2]>,
    strip: &'a Strip,
}

fn eigvec(m: &Matrix2<f64>, lambda: f64) -> [f64; 2] {
    let a = [m[(0, 1)], lambda - m[(0, 0)]];
    let b = [lambda - m[(1, 1)], m[(1, 0)]];
    let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

fn push(m: &Matrix2<f64>, v: [f64; 2]) -> [f64; 2] {
    let w = [m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]];
    let n = w[0].hypot(w[1]);
    [w[0] / n, w[1] / n]
}

impl<'a> PeriodMap<'a> {
    fn new(z: &SymmetricPeriodicPoint, set: &'a StripSet) -> Result<Self> {
        let p = z.params;
        let times = z.return_times(set);
        let orbit: Vec<InnerState> = z.orbit[..times.len()].to_vec();
        let mut mats = Vec::with_capacity(times.len());
        for (x, m) in orbit.iter().zip(times.iter()) {
            let rec = g_fixed(*x, *m, &p).ok_or_else(|| Error::Numerical("periodic orbit misses the obstacle".into()))?;
            mats.push(dg_analytic(&rec, &p)?.matrix());
        }
        let m = mats.iter().fold(Matrix2::identity(), |acc, d| d * acc);
        let (tr, det) = (m.trace(), m.determinant());
        if tr.abs() <= 2.0 {
            return Err(Error::Precondition(format!("periodic point is not hyperbolic (trace {tr})")));
        }
        let lambda_u = tr / 2.0 + (tr * tr / 4.0 - det).sqrt().copysign(tr);
        let lambda_s = det / lambda_u;
        let mut vs = vec![eigvec(&m, lambda_s)];
        let mut vu = vec![eigvec(&m, lambda_u)];
        for d in &mats[..mats.len() - 1] {
            vs.push(push(d, *vs.last().unwrap()));
            vu.push(push(d, *vu.last().unwrap()));
        }
        Ok(PeriodMap { p, orbit, times, lambda_u, vs, vu, strip: &set.stable[z.word[0]] })
    }

    /// Which side of the manifold `y` lies on, read off from the sign of the
    /// expanding coordinate once it exceeds [`ESCAPE`], after at least one
    /// application of `G` (resp. `G^-1`). `None` when `y` is not mapped at all.
    fn side_of(&self, y: InnerState, side: ManifoldSide) -> Option<bool> {
        let n = self.times.len();
        let flip = self.lambda_u.signum();
        let coord = |y: &InnerState, j: usize| {
            let (keep, grow) = match side {
                ManifoldSide::Stable => (self.vs[j], self.vu[j]),
                ManifoldSide::Unstable => (self.vu[j], self.vs[j]),
            };
            let l = [-keep[1], keep[0]];
            let z = self.orbit[j];
            (l[0] * angle_diff(y.omega, z.omega) + l[1] * (y.beta - z.beta)) / (l[0] * grow[0] + l[1] * grow[1])
        };
        // one application of G or G^-1 from orbit index j
        let step = |y: InnerState, j: usize| -> Option<(InnerState, usize, f64)> {
            match side {
                ManifoldSide::Stable => {
                    let e = g_fixed(y, self.times[j], &self.p)?.end;
                    Some(if j + 1 == n { (e, 0, flip) } else { (e, j + 1, 1.0) })
                }
                ManifoldSide::Unstable => {
                    let i = if j == 0 { n - 1 } else { j - 1 };
                    let e = g_fixed(y.involution(), self.times[i], &self.p)?.end.involution();
                    Some((e, i, if j == 0 { flip } else { 1.0 }))
                }
            }
        };
        let (mut y, mut j, mut orient) = step(y, 0)?;
        for _ in 0..MAX_PERIODS * n {
            let a = coord(&y, j);
            if a.abs() > ESCAPE {
                return Some(a * orient > 0.0);
            }
            match step(y, j) {
                Some((e, i, f)) => {
                    y = e;
                    j = i;
                    orient *= f;
                }
                None => return Some(a * orient > 0.0),
            }
        }
        Some(coord(&y, j) * orient > 0.0)
    }

    /// The manifold point at height `beta`, inside the strip of the first word
    /// letter (stable) or its involution image (unstable).
    fn at(&self, beta: f64, side: ManifoldSide) -> Option<InnerState> {
        let lv = match side {
            ManifoldSide::Stable => self.strip.level_at(beta)?,
            ManifoldSide::Unstable => self.strip.level_at(-beta)?,
        };
        let cls = |w: f64| self.side_of(InnerState::new(w, beta), side);
        let w = lv[3] - lv[1];
        // interpolated edges can sit just outside the strip
        let end = |from: f64, dir: f64| {
            (0..40).map(|k| from + dir * w * 1e-9 * 2f64.powi(k)).find_map(|x| cls(x).map(|s| (x, s)))
        };
        let (a, sa) = end(lv[1], 1.0)?;
        let (b, sb) = end(lv[3], -1.0)?;
        if sa == sb {
            return None;
        }
        let (a, b) = bisect_bracket(|x| cls(x).unwrap_or(sa) == sa, a, b, 0.0);
        Some(InnerState::new(0.5 * (a + b), beta))
    }
}

fn refine_curve<F>(f: F, levels: usize, max_points: usize, exec: Execution) -> (Vec<InnerState>, bool)
where
    F: Fn(f64) -> Option<InnerState> + Sync + Send,
{
    let n = levels.max(2);
    let base: Vec<Option<InnerState>> = map_range(exec, n + 1, |k| f(-FRAC_PI_2 + PI * k as f64 / n as f64));
    let mut truncated = base.iter().any(|x| x.is_none());
    let base: Vec<InnerState> = base.into_iter().flatten().collect();
    let mut out = Vec::with_capacity(base.len());
    let mut budget = max_points.saturating_sub(base.len());
    fn go<F: Fn(f64) -> Option<InnerState>>(
        f: &F,
        a: InnerState,
        b: InnerState,
        depth: usize,
        budget: &mut usize,
        truncated: &mut bool,
        out: &mut Vec<InnerState>,
    ) {
        if depth >= 30 || *budget == 0 {
            *truncated |= a.distance(&b) > MAX_SEGMENT;
            out.push(b);
            return;
        }
        *budget -= 1;
        let Some(mid) = f(0.5 * (a.beta + b.beta)) else {
            *truncated = true;
            out.push(b);
            return;
        };
        if a.distance(&b) <= MAX_SEGMENT && turning(&[a, mid, b])[0] <= MAX_TURNING {
            out.push(mid);
            out.push(b);
        } else {
            go(f, a, mid, depth + 1, budget, truncated, out);
            go(f, mid, b, depth + 1, budget, truncated, out);
        }
    }
    if let Some(first) = base.first() {
        out.push(*first);
    }
    for w in base.windows(2) {
        go(&f, w[0], w[1], 0, &mut budget, &mut truncated, &mut out);
    }
    (out, truncated)
}

fn slope_band(points: &[InnerState]) -> (f64, f64) {
    let inner: Vec<f64> = points
        .windows(2)
        .filter(|w| !w[0].on_boundary() && !w[1].on_boundary())
        .flat_map(slopes)
        .collect();
    inner.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(*s), hi.max(*s)))
}

/// The local stable or unstable manifold of `z`: the graph over `beta` of the
/// points of the strip of `z` whose period-map orbit does not leave `z` along
/// the expanding (resp. contracting) direction.
pub fn local_manifold(z: &SymmetricPeriodicPoint, side: ManifoldSide, set: &StripSet, cfg: ManifoldConfig) -> Result<ManifoldCurve> {
    let pm = PeriodMap::new(z, set)?;
    let (mut polyline, truncated) = refine_curve(|b| pm.at(b, side), cfg.levels, cfg.max_points, cfg.exec);
    if polyline.len() < 2 {
        return Err(Error::Numerical("manifold could not be located in its strip".into()));
    }
    let other = match side {
        ManifoldSide::Stable => ManifoldSide::Unstable,
        ManifoldSide::Unstable => ManifoldSide::Stable,
    };
    let gaps = map_range(cfg.exec, polyline.len(), |i| {
        let x = polyline[i];
        pm.at(-x.beta, other).map_or(f64::INFINITY, |y| y.distance(&x.involution()))
    });
    let reversibility_gap = gaps.into_iter().fold(0.0, f64::max);
    if side == ManifoldSide::Unstable {
        polyline.reverse();
    }
    Ok(ManifoldCurve {
        base: z.clone(),
        side,
        slope_band: slope_band(&polyline),
        polyline,
        anchor_omega: pm.strip.anchor.omega,
        reversibility_gap,
        truncated,
    })
}

/// A symmetric periodic point specified by a word over a list of anchors, to be
/// continued in `r` at fixed `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFamily {
    pub delta: f64,
    pub anchors: Vec<NormalPoint>,
    pub word: Vec<usize>,
}

impl PointFamily {
    /// The fixed point on `L0` at the normal point `omega` with return time at
    /// most `m_max`.
    pub fn fixed(delta: f64, omega: f64, m_max: usize) -> Result<Self> {
        let a = find_normals(delta, m_max)
            .into_iter()
            .find(|n| angle_diff(n.omega, omega).abs() < 1e-8)
            .ok_or_else(|| Error::Precondition(format!("no normal point at omega = {omega} for delta = {delta}")))?;
        if angle_diff(a.return_image(), a.omega).abs() > 1e-8 {
            return Err(Error::Precondition(format!("normal point at omega = {omega} is not fixed")));
        }
        Ok(PointFamily { delta, anchors: vec![a], word: vec![0] })
    }

    pub fn strips(&self, r: f64, cfg: StripConfig) -> Result<StripSet> {
        let p = Params::new(self.delta, r)?;
        let omegas: Vec<f64> = self.anchors.iter().map(|a| a.omega).collect();
        let family = NormalFamily {
            delta: self.delta,
            n: self.anchors.len(),
            d: family_gap(&omegas, self.delta),
            bound: PI - 2.0 * self.delta.asin(),
            points: self.anchors.clone(),
        };
        build_strips(&family, &p, cfg)
    }

    pub fn realize(&self, r: f64, cfg: StripConfig) -> Result<(StripSet, SymmetricPeriodicPoint)> {
        let set = self.strips(r, cfg)?;
        let cross = crossing_matrix(&set, cfg.exec);
        let z = symmetric_periodic_from_word(&self.word, &set, &cross)?;
        Ok((set, z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSample {
    pub t: f64,
    pub delta: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyCurve {
    pub p_over_q: (u32, u32),
    pub m: usize,
    pub anchor_omega: f64,
    pub delta0: f64,
    pub d0: f64,
    pub samples: Vec<GammaSample>,
}

impl TangencyCurve {
    /// `(delta(t), r(t))` at leading order, valid or not.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let (p, q) = self.p_over_q;
        let a = p as f64 / q as f64 * PI;
        (self.delta0 + 1.5 * self.delta0 * t * t, 2.0 * (self.m as f64 + 1.0) * a.tan() / (-self.d0) * t.powi(3))
    }

    /// The curve parameter and `r` of the point above `delta`, on the branch
    /// with `r > 0`.
    pub fn r_at_delta(&self, delta: f64) -> Option<(f64, f64)> {
        if delta <= self.delta0 {
            return None;
        }
        let t = ((delta - self.delta0) / (1.5 * self.delta0)).sqrt();
        [t, -t].into_iter().map(|t| (t, self.at(t).1)).find(|(_, r)| *r > 0.0)
    }
}

/// `sin((omega + pi/2)/2 - (m+1)(p/q) pi + m pi/2)`.
pub fn d0(p: u32, q: u32, m: usize, anchor_omega: f64) -> f64 {
    let m = m as f64;
    ((anchor_omega + FRAC_PI_2) / 2.0 - (m + 1.0) * p as f64 / q as f64 * PI + m * FRAC_PI_2).sin()
}

pub fn gamma_curve(p_over_q: (u32, u32), m: usize, anchor_omega: f64, t_grid: &[f64]) -> Result<TangencyCurve> {
    let (p, q) = p_over_q;
    if p == 0 || p >= q || !((m as u32 + 1) * p).is_multiple_of(q) {
        return Err(Error::Precondition(format!("(m+1) p/q = {}/{q} is not an integer", (m as u32 + 1) * p)));
    }
    let d = d0(p, q, m, anchor_omega);
    if d.abs() < 1e-6 {
        return Err(Error::Precondition(format!("D0 = {d:e} is too close to zero")));
    }
    let mut curve = TangencyCurve {
        p_over_q,
        m,
        anchor_omega,
        delta0: (p as f64 / q as f64 * PI).sin(),
        d0: d,
        samples: Vec::new(),
    };
    curve.samples = t_grid
        .iter()
        .filter_map(|&t| {
            let (delta, r) = curve.at(t);
            (r > 0.0 && Params::new(delta, r).is_ok()).then_some(GammaSample { t, delta, r })
        })
        .collect();
    Ok(curve)
}

/// The tangent normal point `omega = -pi/2` at `delta0 = sin(p pi / q)` with the
/// smallest return time not above `m_max`.
pub fn tangent_normal(p: u32, q: u32, m_max: usize) -> Option<NormalPoint> {
    let delta0 = (p as f64 / q as f64 * PI).sin();
    (0..=m_max).find_map(|m| {
        normal_from_rational(p, q, m, delta0)
            .filter(|n| n.kind == NormalKind::Tangent && angle_diff(n.omega, -FRAC_PI_2).abs() < 1e-9)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyConfig {
    /// Return time of the pullback into the neighborhood of `(-pi/2, 0)`.
    pub pullback_m: usize,
    /// `beta` samples of the stable manifold.
    pub scan: usize,
    /// Half width in `omega` of the neighborhood of `(-pi/2, 0)`.
    pub span: f64,
    /// Width of the final `r` bracket.
    pub r_tol: f64,
    /// Step of the second difference in `beta_q`.
    pub fd_step: f64,
    pub strip: StripConfig,
}

impl TangencyConfig {
    pub fn new(pullback_m: usize) -> Self {
        TangencyConfig { pullback_m, scan: 2400, span: 1.0, r_tol: 1e-10, fd_step: 1e-3, strip: StripConfig::default() }
    }
}

/// Smallest accepted second difference `d^2 beta / d beta_q^2` at a quadratic
/// contact.
pub const QUADRATIC_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Height of the stable manifold point.
    pub beta_q: f64,
    /// The stable manifold point.
    pub q: InnerState,
    /// Its pullback near `(-pi/2, 0)`.
    pub point: InnerState,
}

/// The connected arc of the pulled-back stable manifold near `(-pi/2, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub r: f64,
    pub points: Vec<BranchPoint>,
    /// The refined minimum of `beta` along the arc.
    pub min: BranchPoint,
    /// Whether the minimum is interior to the arc.
    pub interior_min: bool,
    /// Sign changes of `beta` along the arc, the refined minimum included.
    pub l0_crossings: usize,
    /// The stable arc being pulled back stays off `L0`.
    pub arc_disjoint_from_l0: bool,
}

struct BranchEval<'a> {
    pm: PeriodMap<'a>,
    m: usize,
    span: f64,
}

impl BranchEval<'_> {
    fn pullback(&self, q: InnerState) -> Option<InnerState> {
        let rq = q.involution();
        if clearance_before(rq, self.m, &self.pm.p) <= 0.0 {
            return None;
        }
        let y = g_fixed(rq, self.m, &self.pm.p)?.end.involution();
        (angle_diff(y.omega, -FRAC_PI_2).abs() <= self.span).then_some(y)
    }

    fn at(&self, beta_q: f64) -> Option<BranchPoint> {
        let q = self.pm.at(beta_q, ManifoldSide::Stable)?;
        self.pullback(q).map(|point| BranchPoint { beta_q, q, point })
    }
}

fn golden_min(f: impl Fn(f64) -> Option<f64>, mut a: f64, mut b: f64) -> Option<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Some(0.5 * (a + b))
}

fn longest_run(samples: &[Option<BranchPoint>]) -> Vec<BranchPoint> {
    let mut best: Vec<BranchPoint> = Vec::new();
    let mut cur: Vec<BranchPoint> = Vec::new();
    for s in samples {
        match s {
            Some(b) if cur.last().is_none_or(|l| l.point.distance(&b.point) < 0.3) => cur.push(*b),
            Some(b) => {
                if cur.len() > best.len() {
                    best = std::mem::take(&mut cur);
                }
                cur = vec![*b];
            }
            None => {
                if cur.len() > best.len() {
                    best = std::mem::take(&mut cur);
                }
                cur.clear();
            }
        }
    }
    if cur.len() > best.len() {
        best = cur;
    }
    best
}

/// The pullback of the stable manifold of `z` into the neighborhood of
/// `(-pi/2, 0)` with return time `cfg.pullback_m`.
pub fn pulled_branch(z: &SymmetricPeriodicPoint, set: &StripSet, cfg: &TangencyConfig) -> Result<Branch> {
    let ev = BranchEval { pm: PeriodMap::new(z, set)?, m: cfg.pullback_m, span: cfg.span };
    let n = cfg.scan.max(8);
    let h = PI / n as f64;
    let samples = map_range(cfg.strip.exec, n - 1, |k| ev.at(-FRAC_PI_2 + h * (k + 1) as f64));
    let points = longest_run(&samples);
    if points.len() < 3 {
        return Err(Error::Numerical(format!("no pulled-back branch near (-pi/2, 0) at r = {}", z.params.r)));
    }
    let i = (0..points.len()).min_by(|&a, &b| points[a].point.beta.total_cmp(&points[b].point.beta)).unwrap();
    let interior_min = i > 0 && i + 1 < points.len();
    let min = if interior_min {
        golden_min(|b| ev.at(b).map(|x| x.point.beta), points[i - 1].beta_q, points[i + 1].beta_q)
            .and_then(|b| ev.at(b))
            .filter(|x| x.point.beta <= points[i].point.beta)
            .unwrap_or(points[i])
    } else {
        points[i]
    };
    let mut betas: Vec<f64> = points.iter().map(|x| x.point.beta).collect();
    let at = points.partition_point(|x| x.beta_q < min.beta_q);
    betas.insert(at, min.point.beta);
    let l0_crossings = betas.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    let s0 = points[0].q.beta.signum();
    let arc_disjoint_from_l0 = points.iter().all(|x| x.q.beta.signum() == s0 && x.q.beta != 0.0);
    Ok(Branch { r: z.params.r, points, min, interior_min, l0_crossings, arc_disjoint_from_l0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyReport {
    pub delta: f64,
    pub word: Vec<usize>,
    pub pullback_m: usize,
    pub r_star: f64,
    /// Final bracket width.
    pub r_width: f64,
    pub bisection_steps: usize,
    /// Signed minimum of `beta` along the branch at the ends of the bracket.
    pub g_bracket: (f64, f64),
    pub g_star: f64,
    pub tangency_point: InnerState,
    pub manifold_point: InnerState,
    /// `d^2 beta / d beta_q^2` at the minimum.
    pub second_difference: f64,
    pub quadratic: bool,
    /// `(r, crossings)` at `0.8 r_star` and `1.2 r_star`.
    pub crossings_below: (f64, usize),
    pub crossings_above: (f64, usize),
    pub unfolds: bool,
    /// Smallest distance between the branch and its involution image near the
    /// tangency point.
    pub ws_wu_distance: f64,
    pub arc_disjoint_from_l0: bool,
}

pub fn branch_at(family: &PointFamily, r: f64, cfg: &TangencyConfig) -> Result<Branch> {
    let (set, z) = family.realize(r, cfg.strip)?;
    pulled_branch(&z, &set, cfg)
}

/// The value of `r` in `r_bracket` at which the pulled-back stable manifold of
/// the family's periodic point touches `L0`, refined by bisection on the sign
/// of the branch minimum.
pub fn find_tangency_r(family: &PointFamily, r_bracket: (f64, f64), cfg: &TangencyConfig) -> Result<TangencyReport> {
    let g = |r: f64| branch_at(family, r, cfg).map(|b| b.min.point.beta);
    let (mut lo, mut hi) = r_bracket;
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if (glo < 0.0) == (ghi < 0.0) {
        return Err(Error::NoTangency(format!("g({lo}) = {glo}, g({hi}) = {ghi} have the same sign")));
    }
    let neg_lo = glo < 0.0;
    let mut steps = 0;
    while hi - lo > cfg.r_tol {
        let mid = 0.5 * (lo + hi);
        if (g(mid)? < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let r_star = 0.5 * (lo + hi);
    let (set, z) = family.realize(r_star, cfg.strip)?;
    let branch = pulled_branch(&z, &set, cfg)?;
    let ev = BranchEval { pm: PeriodMap::new(&z, &set)?, m: cfg.pullback_m, span: cfg.span };
    let b0 = branch.min.beta_q;
    let h = cfg.fd_step;
    let f = |b: f64| ev.at(b).map(|x| x.point.beta).ok_or_else(|| Error::Numerical("branch lost near its minimum".into()));
    let second_difference = (f(b0 + h)? - 2.0 * f(b0)? + f(b0 - h)?) / (h * h);

    let near: Vec<InnerState> = (0..=400).filter_map(|k| ev.at(b0 - 0.02 + 1e-4 * k as f64)).map(|x| x.point).collect();
    let mirrored: Vec<InnerState> = near.iter().map(|x| x.involution()).collect();
    let ws_wu_distance = near.iter().map(|x| point_to_polyline(x, &mirrored)).fold(f64::INFINITY, f64::min);

    let below = branch_at(family, 0.8 * r_star, cfg)?;
    let above = branch_at(family, 1.2 * r_star, cfg)?;
    let counts = (below.l0_crossings, above.l0_crossings);
    Ok(TangencyReport {
        delta: family.delta,
        word: family.word.clone(),
        pullback_m: cfg.pullback_m,
        r_star,
        r_width: hi - lo,
        bisection_steps: steps,
        g_bracket: (glo, ghi),
        g_star: branch.min.point.beta,
        tangency_point: branch.min.point,
        manifold_point: branch.min.q,
        second_difference,
        quadratic: branch.interior_min && second_difference.abs() >= QUADRATIC_TOL,
        crossings_below: (0.8 * r_star, below.l0_crossings),
        crossings_above: (1.2 * r_star, above.l0_crossings),
        unfolds: counts == (0, 2) || counts == (2, 0),
        ws_wu_distance,
        arc_disjoint_from_l0: below.arc_disjoint_from_l0 && above.arc_disjoint_from_l0 && branch.arc_disjoint_from_l0,
    })
}
