//! Singular curves, the stable and unstable strips around normal points,
//! their crossing matrix, and symmetric periodic points coded by words.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::flight::{clearance_before, first_return, g_fixed, g_map, impact_after, OrbitClass};
use crate::linearize::dg_analytic;
use crate::normal::{NormalFamily, NormalPoint};
use crate::par::{map_range, map_slice, Execution};
use crate::phase::{angle_diff, wrap, InnerState, LimitLine, Params, RegionSet, Reversible};
use crate::polyline::{graph_intersections, turning, BetaGraph, MAX_SEGMENT, MAX_TURNING};
use crate::roots::{bisect, bisect_bracket, expand_bracket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSide {
    /// Part of `G^{-1}(dM)`.
    Preimage,
    /// Part of `G(dM)`.
    Image,
}

/// How a traced piece terminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveEnd {
    /// On `dM`, with `|beta| = pi/2`.
    Boundary,
    /// On another singular curve, where the return time jumps without a
    /// grazing limit on this side.
    Junction,
    /// Non-returning launches or an exhausted budget.
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularCurve {
    pub polyline: Vec<InnerState>,
    pub side: CurveSide,
    pub component_id: usize,
    /// Free flights of the excursion that grazes on this piece.
    pub m: usize,
    pub ends: [CurveEnd; 2],
    /// Some vertex lies outside `H-` (preimage side) or `H+` (image side).
    pub leaves_band: bool,
    /// The refinement budget ran out on this piece.
    pub truncated: bool,
}

impl SingularCurve {
    pub fn involution(&self) -> SingularCurve {
        SingularCurve {
            polyline: self.polyline.iter().rev().map(|x| x.involution()).collect(),
            side: match self.side {
                CurveSide::Preimage => CurveSide::Image,
                CurveSide::Image => CurveSide::Preimage,
            },
            component_id: self.component_id,
            m: self.m,
            ends: [self.ends[1], self.ends[0]],
            leaves_band: self.leaves_band,
            truncated: self.truncated,
        }
    }

    pub fn graph(&self) -> Option<BetaGraph> {
        BetaGraph::from_polyline(&self.polyline)
    }

    pub fn endpoints_on_boundary(&self) -> [bool; 2] {
        let n = self.polyline.len();
        [self.polyline[0].on_boundary(), self.polyline[n - 1].on_boundary()]
    }

    /// Range of segment slopes `d beta / d omega` over segments with both
    /// ends in `inside`.
    pub fn slope_range<F: Fn(&InnerState) -> bool>(&self, inside: F) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for w in self.polyline.windows(2) {
            if !(inside(&w[0]) && inside(&w[1])) {
                continue;
            }
            let dw = angle_diff(w[1].omega, w[0].omega);
            if dw == 0.0 {
                continue;
            }
            let s = (w[1].beta - w[0].beta) / dw;
            out = Some(match out {
                None => (s, s),
                Some((a, b)) => (a.min(s), b.max(s)),
            });
        }
        out
    }

    /// Length in the flat metric of the cylinder.
    pub fn length(&self) -> f64 {
        self.polyline.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub seeds: usize,
    pub max_depth: usize,
    /// Budget of return-map evaluations per boundary component.
    pub max_points: usize,
    /// Free flights after which a boundary launch counts as non-returning.
    pub max_steps: usize,
    pub exec: Execution,
}

impl TraceConfig {
    pub fn new(seeds: usize) -> Self {
        TraceConfig { seeds, max_depth: 40, max_points: 1_000_000, max_steps: 200, exec: Execution::default() }
    }
}

/// Bisection toward a grazing hit leaves `|beta|` about `sqrt(ulp)` short of
/// `pi/2`.
const GRAZING_SNAP: f64 = 1e-4;

/// The launch states on `dM` that seed a trace with `seeds` points per
/// component. Doubling `seeds` keeps every earlier seed.
pub fn trace_seeds(seeds: usize) -> Vec<InnerState> {
    [-FRAC_PI_2, FRAC_PI_2]
        .iter()
        .flat_map(|&beta| (0..seeds).map(move |k| boundary_point(k as f64 / seeds as f64, beta)))
        .collect()
}

fn boundary_point(u: f64, beta: f64) -> InnerState {
    InnerState::new(-PI + TAU * u, beta)
}

fn boundary_image(u: f64, beta: f64, p: &Params, max_steps: usize) -> Option<(usize, InnerState)> {
    match first_return(boundary_point(u, beta), p, max_steps) {
        OrbitClass::Returns(rec) => Some((rec.m, rec.end)),
        _ => None,
    }
}

struct Tracer<'a> {
    p: &'a Params,
    beta: f64,
    cfg: TraceConfig,
    points: usize,
    truncated: bool,
    events: Vec<Event>,
}

#[derive(Clone, Copy)]
struct Vertex {
    u: f64,
    m: usize,
    y: InnerState,
}

/// A boundary parameter and its return, if any.
#[derive(Clone, Copy)]
struct Sample {
    u: f64,
    v: Option<Vertex>,
}

impl Sample {
    fn class(&self) -> Option<usize> {
        self.v.map(|v| v.m)
    }
}

enum Event {
    Vertex(Vertex),
    End(CurveEnd),
    Start(CurveEnd),
}

struct Run {
    verts: Vec<Vertex>,
    ends: [CurveEnd; 2],
    truncated: bool,
}

/// Classifies a vertex next to a jump in return time, snapping grazing
/// limits onto `dM`.
fn break_end(v: &mut Vertex) -> CurveEnd {
    if FRAC_PI_2 - v.y.beta.abs() < GRAZING_SNAP {
        v.y.beta = FRAC_PI_2.copysign(v.y.beta);
        CurveEnd::Boundary
    } else {
        CurveEnd::Junction
    }
}

impl Tracer<'_> {
    fn eval(&mut self, u: f64) -> Sample {
        self.points += 1;
        let v = boundary_image(u, self.beta, self.p, self.cfg.max_steps).map(|(m, y)| Vertex { u, m, y });
        Sample { u, v }
    }

    fn exhausted(&self) -> bool {
        self.points >= self.cfg.max_points
    }

    /// Emits everything in `(lo, hi]` in order of the boundary parameter.
    fn sweep(&mut self, lo: Sample, hi: Sample, depth: usize) {
        if self.exhausted() {
            if !self.truncated {
                self.truncated = true;
                self.events.push(Event::End(CurveEnd::Open));
            }
            return;
        }
        let class = lo.class();
        if class == hi.class() {
            let (Some(a), Some(b)) = (lo.v, hi.v) else {
                return;
            };
            if depth >= self.cfg.max_depth {
                self.truncated = true;
                self.events.push(Event::Vertex(b));
                return;
            }
            let mid = self.eval(0.5 * (lo.u + hi.u));
            if a.y.distance(&b.y) <= MAX_SEGMENT {
                if let Some(c) = mid.v.filter(|c| c.m == a.m) {
                    if turning(&[a.y, c.y, b.y])[0] <= MAX_TURNING {
                        self.events.push(Event::Vertex(c));
                        self.events.push(Event::Vertex(b));
                        return;
                    }
                }
            }
            self.sweep(lo, mid, depth + 1);
            self.sweep(mid, hi, depth + 1);
            return;
        }
        let (p, beta, steps) = (self.p, self.beta, self.cfg.max_steps);
        let mut calls = 0;
        let (ua, ub) = bisect_bracket(
            |u| {
                calls += 1;
                boundary_image(u, beta, p, steps).map(|v| v.0) == class
            },
            lo.u,
            hi.u,
            0.0,
        );
        self.points += calls;
        let mut a = self.eval(ua);
        let mut b = self.eval(ub);
        let tail = a.v.as_mut().map_or(CurveEnd::Open, break_end);
        let head = b.v.as_mut().map_or(CurveEnd::Open, break_end);
        self.sweep(lo, a, depth);
        if a.v.is_some() {
            self.events.push(Event::End(tail));
        }
        if let Some(vb) = b.v {
            self.events.push(Event::Start(head));
            self.events.push(Event::Vertex(vb));
        }
        self.sweep(b, hi, depth);
    }

    fn trace(&mut self) -> Vec<Run> {
        let n = self.cfg.seeds;
        let seeds: Vec<Sample> = (0..n).map(|k| self.eval(k as f64 / n as f64)).collect();
        let seam = Sample { u: seeds[0].u + 1.0, v: seeds[0].v.map(|v| Vertex { u: v.u + 1.0, ..v }) };
        if let Some(v) = seeds[0].v {
            self.events.push(Event::Start(CurveEnd::Open));
            self.events.push(Event::Vertex(v));
        }
        for k in 0..n {
            let hi = if k + 1 == n { seam } else { seeds[k + 1] };
            self.sweep(seeds[k], hi, 0);
        }
        let mut runs: Vec<Run> = Vec::new();
        let mut cur: Vec<Vertex> = Vec::new();
        let mut start = CurveEnd::Open;
        let truncated = self.truncated;
        let mut close = |cur: &mut Vec<Vertex>, start: CurveEnd, end: CurveEnd| {
            if cur.len() >= 2 {
                runs.push(Run { verts: std::mem::take(cur), ends: [start, end], truncated });
            }
            cur.clear();
        };
        for e in self.events.drain(..) {
            match e {
                Event::Start(s) => {
                    cur.clear();
                    start = s;
                }
                Event::End(t) => close(&mut cur, start, t),
                Event::Vertex(v) => match cur.last_mut() {
                    Some(last) if last.u == v.u => *last = v,
                    _ => cur.push(v),
                },
            }
        }
        let seamed = !cur.is_empty();
        close(&mut cur, start, CurveEnd::Open);
        let joins = seamed && runs.len() >= 2 && runs[0].verts[0].u == seeds[0].u && runs[0].ends[0] == CurveEnd::Open;
        if joins {
            let first = runs.remove(0);
            let last = runs.last_mut().unwrap();
            if last.verts.last().is_some_and(|v| v.u == seam.u) {
                last.verts.pop();
                last.verts.extend(first.verts);
                last.ends[1] = first.ends[1];
            } else {
                runs.insert(0, first);
            }
        }
        runs
    }
}

/// Pieces of `G(dM)` (side `Image`) or of `G^{-1}(dM) = R G(dM)` (side
/// `Preimage`), traced from `seeds` points on each boundary component.
pub fn trace_singularity(p: &Params, side: CurveSide, cfg: TraceConfig) -> Result<Vec<SingularCurve>> {
    if cfg.seeds < 2 {
        return Err(Error::Precondition("need at least two seeds".into()));
    }
    let comps = map_slice(cfg.exec, &[-FRAC_PI_2, FRAC_PI_2], |&beta| {
        let mut t = Tracer { p, beta, cfg, points: 0, truncated: false, events: Vec::new() };
        t.trace()
    });
    let reg = RegionSet::new(*p);
    let mut out = Vec::new();
    for runs in comps {
        for run in runs {
            let polyline: Vec<InnerState> = run.verts.iter().map(|v| v.y).collect();
            let curve = SingularCurve {
                leaves_band: polyline.iter().any(|x| !reg.in_h_plus(x)),
                polyline,
                side: CurveSide::Image,
                component_id: out.len(),
                m: run.verts[0].m,
                ends: run.ends,
                truncated: run.truncated,
            };
            out.push(match side {
                CurveSide::Image => curve,
                CurveSide::Preimage => curve.involution(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripKind {
    Stable,
    Unstable,
}

/// One `beta` level of a stable strip: `[beta, omega_a, omega_mid, omega_b]`
/// with lifted, increasing `omega`.
pub type Level = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub kind: StripKind,
    pub index: usize,
    pub anchor: NormalPoint,
    /// Family index of the stable strip this one is built from (itself for
    /// stable strips; the return-image anchor for unstable ones).
    pub source: usize,
    pub m: usize,
    pub boundary_a: SingularCurve,
    pub boundary_b: SingularCurve,
    pub limit_line: LimitLine,
    pub params: Params,
    /// Levels of the source stable strip.
    pub levels: Vec<Level>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripConfig {
    /// Uniform `beta` levels before turning refinement.
    pub levels: usize,
    pub exec: Execution,
}

impl Default for StripConfig {
    fn default() -> Self {
        StripConfig { levels: 256, exec: Execution::default() }
    }
}

fn solve_level(p: &Params, m: usize, beta: f64, c: f64, guess: f64) -> Option<f64> {
    let g = |w: f64| impact_after(InnerState { omega: wrap(w), beta }, m, p) - c;
    let (a, b) = expand_bracket(g, guess, 1e-12, 0.5)?;
    if a == b {
        return Some(a);
    }
    Some(bisect(g, a, b, 0.0))
}

struct LevelSolver<'a> {
    p: &'a Params,
    m: usize,
}

impl LevelSolver<'_> {
    fn solve(&self, beta: f64, mid_guess: f64, offsets: (f64, f64)) -> Result<Level> {
        let fail = || Error::AnchorNotEnclosed(format!("m = {} lost at beta = {beta}", self.m));
        let c = solve_level(self.p, self.m, beta, 0.0, mid_guess).ok_or_else(fail)?;
        let lo = solve_level(self.p, self.m, beta, -self.p.r, c + offsets.0).ok_or_else(fail)?;
        let hi = solve_level(self.p, self.m, beta, self.p.r, c + offsets.1).ok_or_else(fail)?;
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        if !(a <= c && c <= b) || b - a > 0.5 {
            return Err(Error::AnchorNotEnclosed(format!("strip of m = {} degenerates at beta = {beta}", self.m)));
        }
        for w in [a, c, b] {
            if clearance_before(InnerState { omega: wrap(w), beta }, self.m, self.p) <= 0.0 {
                return Err(Error::AnchorNotEnclosed(format!(
                    "an earlier chord meets the obstacle at ({}, {beta}) for m = {}",
                    wrap(w),
                    self.m
                )));
            }
        }
        Ok([beta, a, c, b])
    }
}

fn offsets(l: &Level) -> (f64, f64) {
    // signed offsets of the -r and +r solutions are unknown; keep both sides
    (l[1] - l[2], l[3] - l[2])
}

/// The stable strip: the component of `{|D_m| <= r}` around the anchor, where
/// `D_m` is the impact parameter of the chord after `m` free flights.
pub fn stable_strip(anchor: &NormalPoint, index: usize, p: &Params, cfg: StripConfig) -> Result<Strip> {
    let solver = LevelSolver { p, m: anchor.m };
    let n = cfg.levels.max(4) & !1;
    let betas: Vec<f64> = (0..=n).map(|k| -FRAC_PI_2 + PI * k as f64 / n as f64).collect();
    let half = n / 2;
    let start = solver.solve(0.0, anchor.omega, (-p.r, p.r))?;
    let mut levels: Vec<Option<Level>> = vec![None; n + 1];
    levels[half] = Some(start);
    for dir in [1i64, -1] {
        let mut prev = start;
        let mut prev2: Option<Level> = None;
        let mut k = half as i64 + dir;
        while k >= 0 && k <= n as i64 {
            let b = betas[k as usize];
            let guess = match prev2 {
                Some(q) => 2.0 * prev[2] - q[2],
                None => prev[2] - (b - prev[0]),
            };
            let l = solver.solve(b, guess, offsets(&prev))?;
            levels[k as usize] = Some(l);
            prev2 = Some(prev);
            prev = l;
            k += dir;
        }
    }
    let mut levels: Vec<Level> = levels.into_iter().map(|l| l.unwrap()).collect();
    for _ in 0..6 {
        let mut bad = vec![false; levels.len() - 1];
        for side in [1, 3] {
            let pts: Vec<InnerState> = levels.iter().map(|l| InnerState { omega: l[side], beta: l[0] }).collect();
            for (i, t) in turning(&pts).iter().enumerate() {
                if *t > MAX_TURNING {
                    bad[i] = true;
                    bad[i + 1] = true;
                }
            }
            for (i, w) in pts.windows(2).enumerate() {
                if (w[1].omega - w[0].omega).hypot(w[1].beta - w[0].beta) > MAX_SEGMENT {
                    bad[i] = true;
                }
            }
        }
        if !bad.iter().any(|b| *b) {
            break;
        }
        let mut next = Vec::with_capacity(levels.len() * 2);
        for i in 0..levels.len() - 1 {
            next.push(levels[i]);
            if bad[i] {
                let (l0, l1) = (levels[i], levels[i + 1]);
                let b = 0.5 * (l0[0] + l1[0]);
                next.push(solver.solve(b, 0.5 * (l0[2] + l1[2]), offsets(&l0))?);
            }
        }
        next.push(levels[levels.len() - 1]);
        levels = next;
    }
    Ok(Strip::from_levels(StripKind::Stable, index, *anchor, index, levels, *p))
}

impl Strip {
    fn from_levels(kind: StripKind, index: usize, anchor: NormalPoint, source: usize, levels: Vec<Level>, p: Params) -> Strip {
        let reg = RegionSet::new(p);
        let curve = |col: usize, id: usize| {
            let polyline: Vec<InnerState> = levels.iter().map(|l| InnerState::new(l[col], l[0])).collect();
            SingularCurve {
                leaves_band: polyline.iter().any(|x| !reg.in_h_minus(x)),
                polyline,
                side: CurveSide::Preimage,
                component_id: id,
                m: anchor.m,
                ends: [CurveEnd::Boundary; 2],
                truncated: false,
            }
        };
        let mut s = Strip {
            kind: StripKind::Stable,
            index,
            anchor,
            source,
            m: anchor.m,
            boundary_a: curve(1, 2 * source),
            boundary_b: curve(3, 2 * source + 1),
            limit_line: LimitLine::Decreasing { c: anchor.omega },
            params: p,
            levels,
        };
        if kind == StripKind::Unstable {
            s.kind = kind;
            s.boundary_a = s.boundary_a.involution();
            s.boundary_b = s.boundary_b.involution();
        }
        s
    }

    /// The unstable strip `U_index = R(self)`, where `self` is the stable strip
    /// of the return image of `anchor`.
    pub fn mirror(&self, index: usize, anchor: NormalPoint) -> Strip {
        let mut u = Strip::from_levels(StripKind::Unstable, index, anchor, self.index, self.levels.clone(), self.params);
        u.limit_line = LimitLine::Increasing { c: self.anchor.omega };
        u.m = self.m;
        u
    }

    /// The boundary and mid offsets of the strip at height `beta`, interpolated
    /// between traced levels.
    pub fn level_at(&self, beta: f64) -> Option<Level> {
        let i = self.levels.partition_point(|l| l[0] < beta);
        if i == 0 {
            return (self.levels[0][0] == beta).then_some(self.levels[0]);
        }
        if i == self.levels.len() {
            return None;
        }
        let (a, b) = (self.levels[i - 1], self.levels[i]);
        let t = (beta - a[0]) / (b[0] - a[0]);
        let mut out = [beta, 0.0, 0.0, 0.0];
        for c in 1..4 {
            out[c] = a[c] + t * (b[c] - a[c]);
        }
        Some(out)
    }

    /// Membership decided by the impact parameter itself, localized to this
    /// component by the traced boundaries.
    pub fn contains(&self, x: &InnerState) -> bool {
        let y = match self.kind {
            StripKind::Stable => *x,
            StripKind::Unstable => x.involution(),
        };
        let Some(l) = self.level_at(y.beta) else { return false };
        let w = l[3] - l[1];
        let off = angle_diff(y.omega, wrap(l[2]));
        if off < l[1] - l[2] - w || off > l[3] - l[2] + w {
            return false;
        }
        impact_after(y, self.m, &self.params).abs() <= self.params.r && clearance_before(y, self.m, &self.params) > 0.0
    }

    /// Largest horizontal chord.
    pub fn horizontal_width(&self) -> f64 {
        self.levels.iter().map(|l| l[3] - l[1]).fold(0.0, f64::max)
    }

    /// Horizontal chord on `L0`.
    pub fn width_at_zero(&self) -> f64 {
        let l = self.level_at(0.0).unwrap();
        l[3] - l[1]
    }

    /// Largest distance of a boundary vertex from the limit line.
    pub fn limit_distance(&self) -> f64 {
        self.boundary_a
            .polyline
            .iter()
            .chain(self.boundary_b.polyline.iter())
            .map(|x| self.limit_line.distance(x))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSet {
    pub params: Params,
    pub family: NormalFamily,
    pub stable: Vec<Strip>,
    pub unstable: Vec<Strip>,
}

/// Stable strips for every anchor of the family, and `U_i = R(S_{image(i)})`.
pub fn build_strips(family: &NormalFamily, p: &Params, cfg: StripConfig) -> Result<StripSet> {
    let idx: Vec<usize> = (0..family.n).collect();
    let stable: Vec<Strip> =
        map_slice(cfg.exec, &idx, |&i| stable_strip(&family.points[i], i, p, cfg)).into_iter().collect::<Result<_>>()?;
    let mut unstable = Vec::with_capacity(family.n);
    for i in 0..family.n {
        let j = family
            .image_index(i)
            .ok_or_else(|| Error::Numerical(format!("return image of anchor {i} is not in the family")))?;
        unstable.push(stable[j].mirror(i, family.points[i]));
    }
    Ok(StripSet { params: *p, family: family.clone(), stable, unstable })
}

/// Halves `r` from `r_start` until the strip of `anchor` can be built.
pub fn strip_threshold(anchor: &NormalPoint, r_start: f64, r_min: f64) -> Option<f64> {
    let mut r = r_start;
    while r >= r_min {
        let p = Params::unchecked(anchor.delta, r);
        if p.in_omega() && stable_strip(anchor, 0, &p, StripConfig::default()).is_ok() {
            return Some(r);
        }
        r *= 0.5;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingMatrix {
    pub n: usize,
    /// `cross[i][j]`: `U_i` crosses `S_j`.
    pub cross: Vec<Vec<bool>>,
    /// Pairs whose four boundary intersection counts disagree or are not transverse.
    pub ambiguous: Vec<(usize, usize)>,
}

impl CrossingMatrix {
    pub fn is_admissible(&self, word: &[usize]) -> bool {
        !word.is_empty() && word.iter().all(|&a| a < self.n) && word.windows(2).all(|w| self.cross[w[0]][w[1]])
    }

    #[allow(clippy::needless_range_loop)]
    fn reach(&self, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut q = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = q.pop_front() {
            for j in 0..self.n {
                let e = if forward { self.cross[i][j] } else { self.cross[j][i] };
                if e && !seen[j] {
                    seen[j] = true;
                    q.push_back(j);
                }
            }
        }
        seen
    }

    pub fn strongly_connected(&self) -> bool {
        self.n > 0 && self.reach(true).iter().all(|s| *s) && self.reach(false).iter().all(|s| *s)
    }

    pub fn crossing_count(&self) -> usize {
        self.cross.iter().flatten().filter(|c| **c).count()
    }
}

/// Intersection counts of the four boundary pairs of `U_i` and `S_j`.
pub fn boundary_crossings(u: &Strip, s: &Strip) -> ([usize; 4], bool) {
    let g = |c: &SingularCurve| c.graph().expect("strip boundaries are beta-graphs");
    let (ua, ub, sa, sb) = (g(&u.boundary_a), g(&u.boundary_b), g(&s.boundary_a), g(&s.boundary_b));
    let mut counts = [0; 4];
    let mut transverse = true;
    for (k, (f, h)) in [(&ua, &sa), (&ua, &sb), (&ub, &sa), (&ub, &sb)].into_iter().enumerate() {
        let (x, t) = graph_intersections(f, h);
        counts[k] = x.len();
        transverse &= t;
    }
    (counts, transverse)
}

pub fn crossing_matrix(set: &StripSet, exec: Execution) -> CrossingMatrix {
    let n = set.stable.len();
    let rows = map_range(exec, n, |i| {
        (0..n).map(|j| boundary_crossings(&set.unstable[i], &set.stable[j])).collect::<Vec<_>>()
    });
    let mut cross = vec![vec![false; n]; n];
    let mut ambiguous = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, (counts, transverse)) in row.iter().enumerate() {
            cross[i][j] = *transverse && counts.iter().all(|c| *c == 1);
            if !transverse || counts.iter().any(|c| *c != counts[0]) {
                ambiguous.push((i, j));
            }
        }
    }
    CrossingMatrix { n, cross, ambiguous }
}

fn newton2(f: impl Fn(InnerState) -> Option<[f64; 2]>, x0: InnerState) -> Option<InnerState> {
    let mut x = x0;
    let h = 1e-7;
    let norm = |v: [f64; 2]| v[0].abs().max(v[1].abs());
    let mut fx = f(x)?;
    for _ in 0..60 {
        if norm(fx) <= 1e-14 {
            return Some(x);
        }
        let mut jac = Matrix2::zeros();
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            if c == 0 {
                xp.omega += h;
                xm.omega -= h;
            } else {
                xp.beta += h;
                xm.beta -= h;
            }
            let (fp, fm) = (f(xp)?, f(xm)?);
            jac[(0, c)] = (fp[0] - fm[0]) / (2.0 * h);
            jac[(1, c)] = (fp[1] - fm[1]) / (2.0 * h);
        }
        let step = jac.lu().solve(&nalgebra::Vector2::new(fx[0], fx[1]))?;
        let mut lambda = 1.0;
        loop {
            let y = InnerState { omega: wrap(x.omega - lambda * step[0]), beta: (x.beta - lambda * step[1]).clamp(-FRAC_PI_2, FRAC_PI_2) };
            if let Some(fy) = f(y) {
                if norm(fy) < norm(fx) {
                    x = y;
                    fx = fy;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return (norm(fx) <= 1e-12).then_some(x);
            }
        }
    }
    (norm(fx) <= 1e-12).then_some(x)
}

/// A point of `U_i ∩ S_j` where both midlines meet.
pub fn cell_center(set: &StripSet, i: usize, j: usize) -> Result<InnerState> {
    let p = &set.params;
    let s = &set.stable[j];
    let u = &set.unstable[i];
    let w_hat = set.family.points[i].return_image();
    let beta = 0.5 * wrap(s.anchor.omega - w_hat);
    let x0 = InnerState::new(s.anchor.omega - beta, beta);
    let f = |x: InnerState| Some([impact_after(x, s.m, p), impact_after(x.involution(), u.m, p)]);
    let x = newton2(f, x0).ok_or_else(|| Error::WordNotRealizable(format!("no centre for cell ({i}, {j})")))?;
    if s.contains(&x) && u.contains(&x) {
        Ok(x)
    } else {
        Err(Error::WordNotRealizable(format!("centre of cell ({i}, {j}) at {x:?} lies outside its strips")))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum End {
    OnL0,
    Midline,
}

/// Multiple shooting along a word with prescribed return times.
struct Shooting<'a> {
    p: &'a Params,
    ms: Vec<usize>,
    end: End,
}

impl Shooting<'_> {
    fn k(&self) -> usize {
        self.ms.len() - 1
    }

    fn dim(&self) -> usize {
        1 + 2 * self.k() + if self.end == End::OnL0 { 1 } else { 0 }
    }

    fn nodes(&self, z: &DVector<f64>) -> Vec<InnerState> {
        let k = self.k();
        let mut v = vec![InnerState { omega: wrap(z[0]), beta: 0.0 }];
        for j in 1..=k {
            v.push(InnerState { omega: wrap(z[2 * j - 1]), beta: z[2 * j] });
        }
        if self.end == End::OnL0 {
            v.push(InnerState { omega: wrap(z[2 * k + 1]), beta: 0.0 });
        }
        v
    }

    fn pack(&self, nodes: &[InnerState]) -> DVector<f64> {
        let mut z = DVector::zeros(self.dim());
        z[0] = nodes[0].omega;
        for j in 1..=self.k() {
            z[2 * j - 1] = nodes[j].omega;
            z[2 * j] = nodes[j].beta;
        }
        if self.end == End::OnL0 {
            z[2 * self.k() + 1] = nodes[self.k() + 1].omega;
        }
        z
    }

    fn residual(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        let x = self.nodes(z);
        let k = self.k();
        let mut f = DVector::zeros(self.dim());
        for j in 0..=k {
            if j == k && self.end == End::Midline {
                f[2 * k] = impact_after(x[k], self.ms[k], self.p);
                continue;
            }
            let y = g_fixed(x[j], self.ms[j], self.p)?.end;
            f[2 * j] = angle_diff(y.omega, x[j + 1].omega);
            f[2 * j + 1] = y.beta - x[j + 1].beta;
        }
        Some(f)
    }

    fn jacobian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        let x = self.nodes(z);
        let k = self.k();
        let n = self.dim();
        let mut jm = DMatrix::zeros(n, n);
        // column of omega_j and beta_j in z, if free
        let col = |j: usize, c: usize| -> Option<usize> {
            match (j, c) {
                (0, 0) => Some(0),
                (0, _) => None,
                (j, c) if j <= k => Some(2 * j - 1 + c),
                (_, 0) if self.end == End::OnL0 => Some(2 * k + 1),
                _ => None,
            }
        };
        for j in 0..=k {
            if j == k && self.end == End::Midline {
                let h = 1e-7;
                for c in 0..2 {
                    let Some(cj) = col(j, c) else { continue };
                    let mut xp = x[j];
                    let mut xm = x[j];
                    if c == 0 {
                        xp.omega += h;
                        xm.omega -= h;
                    } else {
                        xp.beta += h;
                        xm.beta -= h;
                    }
                    jm[(2 * k, cj)] = (impact_after(xp, self.ms[k], self.p) - impact_after(xm, self.ms[k], self.p)) / (2.0 * h);
                }
                continue;
            }
            let rec = g_fixed(x[j], self.ms[j], self.p)?;
            let d = dg_analytic(&rec, self.p).ok()?.matrix();
            for r in 0..2 {
                for c in 0..2 {
                    if let Some(cj) = col(j, c) {
                        jm[(2 * j + r, cj)] += d[(r, c)];
                    }
                }
                if let Some(cj) = col(j + 1, r) {
                    jm[(2 * j + r, cj)] -= 1.0;
                }
            }
        }
        Some(jm)
    }

    fn solve(&self, init: &[InnerState]) -> Option<(Vec<InnerState>, f64)> {
        let mut z = self.pack(init);
        let mut f = self.residual(&z)?;
        let norm = |v: &DVector<f64>| v.amax();
        for _ in 0..80 {
            if norm(&f) <= 1e-14 {
                break;
            }
            let jm = self.jacobian(&z)?;
            let step = jm.lu().solve(&f)?;
            let mut lambda = 1.0;
            let mut moved = false;
            while lambda >= 1e-8 {
                let zn = &z - &step * lambda;
                if let Some(fnew) = self.residual(&zn) {
                    if norm(&fnew) < norm(&f) {
                        z = zn;
                        f = fnew;
                        moved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let r = norm(&f);
        Some((self.nodes(&z), r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPeriodicPoint {
    pub word: Vec<usize>,
    pub state: InnerState,
    /// Period in returns to the obstacle.
    pub period: usize,
    pub params: Params,
    /// The full periodic orbit starting at `state`.
    pub orbit: Vec<InnerState>,
    /// Trace of the tangent map along one period.
    pub trace: f64,
    /// Largest mismatch `|G(x_j) - x_{j+1}|` between consecutive orbit points.
    pub closure_residual: f64,
    /// `|beta|` of the image of the last word point, which closes the orbit on `L0`.
    pub closure_beta: f64,
    /// `|beta|` after iterating `G` from `state` alone; dominated by round-off
    /// growing like the expansion rate to the power of the word length.
    pub direct_closure_beta: f64,
    pub in_h_minus: bool,
}

impl SymmetricPeriodicPoint {
    /// Return times `m` along one period.
    pub fn return_times(&self, set: &StripSet) -> Vec<usize> {
        let ms: Vec<usize> = self.word.iter().map(|&a| set.stable[a].m).collect();
        let mut out = ms.clone();
        out.extend(ms.iter().rev());
        out
    }
}

fn word_init(word: &[usize], set: &StripSet) -> Result<Vec<InnerState>> {
    let p = &set.params;
    let k = word.len() - 1;
    let mut nodes = vec![InnerState { omega: set.family.points[word[0]].omega, beta: 0.0 }];
    for j in 1..=k {
        nodes.push(cell_center(set, word[j - 1], word[j])?);
    }
    if k >= 1 {
        let m0 = set.unstable[word[0]].m;
        if let Some(rec) = g_fixed(nodes[1].involution(), m0, p) {
            nodes[0] = InnerState { omega: rec.end.omega, beta: 0.0 };
        }
    }
    Ok(nodes)
}

/// The symmetric periodic point whose orbit starts on `L0` in `S_{a_0}`, runs
/// through the cells `U_{a_{j-1}} ∩ S_{a_j}` and returns to `L0` in `U_{a_k}`.
pub fn symmetric_periodic_from_word(word: &[usize], set: &StripSet, cross: &CrossingMatrix) -> Result<SymmetricPeriodicPoint> {
    if !cross.is_admissible(word) {
        return Err(Error::Precondition(format!("word {word:?} is not admissible")));
    }
    let p = &set.params;
    let k = word.len() - 1;
    let ms: Vec<usize> = word.iter().map(|&a| set.stable[a].m).collect();
    let mut init = word_init(word, set)?;
    let last_guess = match k {
        0 => set.family.points[word[0]].return_image(),
        _ => g_fixed(init[k], ms[k], p).map_or(set.family.points[word[k]].return_image(), |r| r.end.omega),
    };
    init.push(InnerState { omega: last_guess, beta: 0.0 });
    let shoot = Shooting { p, ms: ms.clone(), end: End::OnL0 };
    let not_realized = |why: String| Error::WordNotRealizable(format!("word {word:?} at r = {}: {why}", p.r));
    let (nodes, closure) = shoot.solve(&init).ok_or_else(|| not_realized("shooting failed".into()))?;
    if closure > 1e-9 {
        return Err(not_realized(format!("shooting residual {closure}")));
    }
    for j in 0..=k {
        if !set.stable[word[j]].contains(&nodes[j]) {
            return Err(not_realized(format!("point {j} leaves S_{}", word[j])));
        }
        if j > 0 && !set.unstable[word[j - 1]].contains(&nodes[j]) {
            return Err(not_realized(format!("point {j} leaves U_{}", word[j - 1])));
        }
        let rec = g_map(nodes[j], p).map_err(|e| not_realized(e.to_string()))?;
        if rec.m != ms[j] {
            return Err(not_realized(format!("point {j} returns after {} flights, expected {}", rec.m, ms[j])));
        }
    }
    if !set.unstable[word[k]].contains(&nodes[k + 1]) {
        return Err(not_realized("closing point leaves its unstable strip".into()));
    }
    let closure_beta = g_fixed(nodes[k], ms[k], p).map_or(f64::INFINITY, |r| r.end.beta.abs());

    let mut orbit = nodes.clone();
    for j in (1..=k).rev() {
        orbit.push(nodes[j].involution());
    }
    let mut times = ms.clone();
    times.extend(ms.iter().rev());
    let mut prod = Matrix2::identity();
    for (x, m) in orbit.iter().zip(times.iter()) {
        let rec = g_fixed(*x, *m, p).ok_or_else(|| not_realized("orbit point misses".into()))?;
        prod = dg_analytic(&rec, p)?.matrix() * prod;
    }
    let mut y = nodes[0];
    for _ in 0..=k {
        y = match g_map(y, p) {
            Ok(r) => r.end,
            Err(_) => break,
        };
    }
    let reg = RegionSet::new(*p);
    Ok(SymmetricPeriodicPoint {
        word: word.to_vec(),
        state: nodes[0],
        period: 2 * (k + 1),
        params: *p,
        in_h_minus: reg.in_h_minus(&nodes[0]),
        orbit,
        trace: prod.trace(),
        closure_residual: closure,
        closure_beta,
        direct_closure_beta: y.beta.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedWidth {
    pub word: Vec<usize>,
    /// Number of pullbacks, `word.len() - 1`.
    pub n: usize,
    /// A point of `L0` inside the nested strip.
    pub center: f64,
    /// Horizontal width on `L0`: the bisection width when it is resolved,
    /// otherwise the linearized width.
    pub width: f64,
    /// Width from bisecting the membership test along `L0`, if the test
    /// resolves the strip at all.
    pub bisection_width: Option<f64>,
    /// `2r / |d D_{m_n}(G^n(omega, 0)) / d omega|` at the centre.
    pub linear_width: f64,
    /// Absolute round-off scale of the angles involved.
    pub resolution: f64,
}

/// Widths below this many ulps are taken from the linearization.
const RESOLVED_ULPS: f64 = 1e3;

/// Width on `L0` of `S_{a_0} ∩ G^{-1} S_{a_1} ∩ ... ∩ G^{-n} S_{a_n}`.
pub fn nested_width(word: &[usize], set: &StripSet, cross: &CrossingMatrix) -> Result<NestedWidth> {
    if !cross.is_admissible(word) {
        return Err(Error::Precondition(format!("word {word:?} is not admissible")));
    }
    let p = &set.params;
    let n = word.len() - 1;
    let ms: Vec<usize> = word.iter().map(|&a| set.stable[a].m).collect();
    let init = word_init(word, set)?;
    let shoot = Shooting { p, ms: ms.clone(), end: End::Midline };
    let (nodes, res) = shoot
        .solve(&init)
        .ok_or_else(|| Error::WordNotRealizable(format!("word {word:?}: no point on L0")))?;
    if res > 1e-9 {
        return Err(Error::WordNotRealizable(format!("word {word:?}: residual {res}")));
    }
    let inside = |w: f64| {
        let mut x = InnerState { omega: wrap(w), beta: 0.0 };
        for j in 0..=n {
            if !set.stable[word[j]].contains(&x) {
                return false;
            }
            if j < n {
                match g_fixed(x, ms[j], p) {
                    Some(r) => x = r.end,
                    None => return false,
                }
            }
        }
        true
    };
    let c = nodes[0].omega;
    let mut v = nalgebra::Vector2::new(1.0, 0.0);
    for j in 0..n {
        let rec = g_fixed(nodes[j], ms[j], p).ok_or_else(|| Error::WordNotRealizable(format!("word {word:?}: node {j} misses")))?;
        v = dg_analytic(&rec, p)?.matrix() * v;
    }
    let h = 1e-7;
    let x = nodes[n];
    let d = |dw: f64, db: f64| impact_after(InnerState { omega: x.omega + dw, beta: x.beta + db }, ms[n], p);
    let grad = [(d(h, 0.0) - d(-h, 0.0)) / (2.0 * h), (d(0.0, h) - d(0.0, -h)) / (2.0 * h)];
    let linear_width = 2.0 * p.r / (grad[0] * v[0] + grad[1] * v[1]).abs();
    let resolution = f64::EPSILON * (1.0 + c.abs());
    let bisection_width = inside(c).then(|| {
        let reach = 2.0 * set.stable[word[0]].width_at_zero() + 1e-12;
        let (hi, _) = bisect_bracket(&inside, c, c + reach, 0.0);
        let (lo, _) = bisect_bracket(&inside, c, c - reach, 0.0);
        hi - lo
    });
    let width = match bisection_width {
        Some(w) if w > RESOLVED_ULPS * resolution => w,
        _ => linear_width,
    };
    Ok(NestedWidth { word: word.to_vec(), n, center: c, width, bisection_width, linear_width, resolution })
}

/// Centres of all crossing cells `U_i ∩ S_j`.
pub fn lattice_nodes(set: &StripSet, cross: &CrossingMatrix, exec: Execution) -> Vec<InnerState> {
    let pairs: Vec<(usize, usize)> =
        (0..cross.n).flat_map(|i| (0..cross.n).map(move |j| (i, j))).filter(|&(i, j)| cross.cross[i][j]).collect();
    map_slice(exec, &pairs, |&(i, j)| cell_center(set, i, j).ok()).into_iter().flatten().collect()
}

pub const DENSITY_GRID: (usize, usize) = (400, 200);

/// Largest cylinder distance from a grid point of `M_inn` to the node set.
pub fn density_estimate(nodes: &[InnerState], exec: Execution) -> f64 {
    if nodes.is_empty() {
        return f64::INFINITY;
    }
    let (nw, nb) = DENSITY_GRID;
    let rows = map_range(exec, nb, |jb| {
        let beta = -FRAC_PI_2 + PI * jb as f64 / (nb - 1) as f64;
        let mut worst: f64 = 0.0;
        for iw in 0..nw {
            let x = InnerState::new(-PI + TAU * (iw as f64 + 0.5) / nw as f64, beta);
            let d = nodes.iter().map(|q| x.distance(q)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        worst
    });
    rows.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::{build_x, find_normals, FamilyConfig};

    fn family() -> NormalFamily {
        build_x(0.8, 12, FamilyConfig { min_points: 5, ..Default::default() }).unwrap()
    }

    #[test]
    fn strip_of_the_centre() {
        let p = Params::new(0.8, 1e-4).unwrap();
        let a = find_normals(0.8, 0).into_iter().find(|n| n.omega.abs() < 1e-12).unwrap();
        let s = stable_strip(&a, 0, &p, StripConfig::default()).unwrap();
        assert!(s.contains(&InnerState::new(0.0, 0.0)));
        assert!(!s.contains(&InnerState::new(0.01, 0.0)));
        assert!(s.limit_distance() < 1e-3, "{}", s.limit_distance());
        for c in [&s.boundary_a, &s.boundary_b] {
            assert_eq!(c.endpoints_on_boundary(), [true, true]);
        }
    }

    #[test]
    fn strips_cross_unless_opposite() {
        let p = Params::new(0.8, 1e-4).unwrap();
        let fam = family();
        let set = build_strips(&fam, &p, StripConfig::default()).unwrap();
        let cm = crossing_matrix(&set, Execution::default());
        for i in 0..cm.n {
            for j in 0..cm.n {
                let opposite = angle_diff(fam.points[i].return_image() - PI, fam.points[j].omega).abs() < 1e-2;
                assert_eq!(cm.cross[i][j], !opposite, "{i} {j}");
            }
        }
        assert!(cm.strongly_connected());
    }

    #[test]
    fn normal_orbit_is_the_symmetric_point_of_its_letter() {
        let p = Params::new(0.8, 1e-3).unwrap();
        let fam = family();
        let set = build_strips(&fam, &p, StripConfig::default()).unwrap();
        let cm = crossing_matrix(&set, Execution::default());
        for i in 0..fam.n {
            let z = symmetric_periodic_from_word(&[i], &set, &cm).unwrap();
            assert!(angle_diff(z.state.omega, fam.points[i].omega).abs() < 1e-10, "{z:?}");
            assert!(z.trace.abs() > 2.0);
        }
    }

    #[test]
    fn single_node_density() {
        let d = density_estimate(&[InnerState::new(0.0, 0.0)], Execution::Sequential);
        assert!((d - PI.hypot(FRAC_PI_2)).abs() < 0.01, "{d}");
    }
}
