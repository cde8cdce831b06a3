use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use annulus::cones::{a21_bound_check, cone_preservation_check, slope_bounds, zeta_bounds_check, A21Report, ConeReport, SampleConfig, ZetaReport};
use annulus::flight::{first_return, g_map, map_inner_to_outer, inner_to_outer_residuals, outer_to_inner_residuals, OrbitClass, ReturnRecord, DEFAULT_MAX_OUTER_STEPS};
use annulus::linearize::{dg_analytic, dg_numeric, JacobianTerms};
use annulus::normal::{build_x, find_normals, FamilyConfig, NormalFamily, NormalPoint};
use annulus::par::map_range;
use annulus::phase::{angle_diff, InnerState, Params, Reversible};
use annulus::strata::{
    build_strips, crossing_matrix, density_estimate, lattice_nodes, nested_width, symmetric_periodic_from_word, CrossingMatrix,
    NestedWidth, StripConfig, StripSet, SymmetricPeriodicPoint,
};
use annulus::tangency::{find_tangency_r, gamma_curve, tangent_normal, PointFamily, TangencyConfig, TangencyCurve, TangencyReport};
use annulus::{Error, Execution};

use crate::output::{csv_string, ensure_dir, write_json, Row};
use crate::svg::Plot;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn uniform_state(r: &mut ChaCha8Rng) -> InnerState {
    InnerState::new(r.gen_range(-PI..PI), r.gen_range(-FRAC_PI_2..FRAC_PI_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitPoint {
    pub iter: usize,
    pub omega: f64,
    pub beta: f64,
    pub nu: usize,
}

/// Iterates `G`, stopping early at the first state that does not return.
pub fn orbit(x: InnerState, p: &Params, iters: usize) -> (Vec<OrbitPoint>, Option<String>) {
    let mut out = vec![OrbitPoint { iter: 0, omega: x.omega, beta: x.beta, nu: 0 }];
    let mut y = x;
    for k in 1..=iters {
        match g_map(y, p) {
            Ok(rec) => {
                y = rec.end;
                out.push(OrbitPoint { iter: k, omega: y.omega, beta: y.beta, nu: rec.nu() });
            }
            Err(e) => return (out, Some(e.to_string())),
        }
    }
    (out, None)
}

pub fn orbit_csv(points: &[OrbitPoint]) -> Result<String> {
    let rows: Vec<([i64; 2], [f64; 2])> = points.iter().map(|o| ([o.iter as i64, o.nu as i64], [o.omega, o.beta])).collect();
    csv_string(&["iter", "nu", "omega", "beta"], rows.iter().map(|(i, r)| Row { ints: i, reals: r }))
}

#[derive(Debug, Clone, Serialize)]
pub struct PortraitReport {
    pub params: Params,
    pub orbits: usize,
    pub iters: usize,
    pub seed: u64,
    pub points: usize,
    /// Orbits cut short, with the reason.
    pub skipped: Vec<(usize, String)>,
    /// `max |beta_k - beta_0|` over all orbits.
    pub beta_drift: f64,
}

pub struct Portrait {
    pub report: PortraitReport,
    pub orbits: Vec<Vec<OrbitPoint>>,
}

pub fn portrait(p: &Params, orbits: usize, iters: usize, seed: u64, exec: Execution) -> Portrait {
    let runs = map_range(exec, orbits, |i| {
        let x = uniform_state(&mut rng(seed, i as u64));
        orbit(x, p, iters)
    });
    let mut skipped = Vec::new();
    let mut beta_drift: f64 = 0.0;
    for (i, (pts, err)) in runs.iter().enumerate() {
        if let Some(e) = err {
            skipped.push((i, e.clone()));
        }
        for o in pts {
            beta_drift = beta_drift.max((o.beta - pts[0].beta).abs());
        }
    }
    let points = runs.iter().map(|(pts, _)| pts.len()).sum();
    Portrait {
        report: PortraitReport { params: *p, orbits, iters, seed, points, skipped, beta_drift },
        orbits: runs.into_iter().map(|(pts, _)| pts).collect(),
    }
}

impl Portrait {
    pub fn csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for (i, pts) in self.orbits.iter().enumerate() {
            for o in pts {
                rows.push(([i as i64, o.iter as i64, o.nu as i64], [o.omega, o.beta]));
            }
        }
        csv_string(&["orbit", "iter", "nu", "omega", "beta"], rows.iter().map(|(i, r)| Row { ints: i, reals: r }))
    }

    pub fn svg(&self) -> String {
        let p = self.report.params;
        let mut plot = Plot::new(&format!("delta = {}, r = {}", p.delta, p.r));
        for (i, pts) in self.orbits.iter().enumerate() {
            plot.points(pts.iter().map(|o| (o.omega, o.beta)), i);
        }
        plot.finish()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        fs::write(dir.join("portrait.csv"), self.csv()?)?;
        fs::write(dir.join("portrait.svg"), self.svg())?;
        write_json(&dir.join("portrait.json"), &self.report)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnReport {
    pub params: Params,
    pub start: InnerState,
    pub class: OrbitClass,
    pub residuals: Option<[f64; 4]>,
    pub jacobian: Option<JacobianTerms>,
}

pub fn return_map(x: InnerState, p: &Params) -> ReturnReport {
    let class = first_return(x, p, DEFAULT_MAX_OUTER_STEPS);
    let (residuals, jacobian) = match class.record() {
        Some(rec) => {
            let a = inner_to_outer_residuals(&rec.start, &rec.first, p);
            let b = outer_to_inner_residuals(&rec.last, &rec.end, p);
            (Some([a[0], a[1], b[0], b[1]]), dg_analytic(rec, p).ok())
        }
        None => (None, None),
    };
    ReturnReport { params: *p, start: x, class, residuals, jacobian }
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobianCheck {
    pub params: Params,
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    /// Points compared against central differences.
    pub checked: usize,
    /// Draws dropped because the stencil at ten times the step changes return time.
    pub near_singular: usize,
    pub max_relative_error: f64,
    pub max_det_error: f64,
    pub max_measure_defect: f64,
    pub pass: bool,
}

fn measure_defect(x: InnerState, p: &Params, h: f64) -> f64 {
    let f = |dw: f64, db: f64| map_inner_to_outer(InnerState { omega: x.omega + dw, beta: x.beta + db }, p);
    let (wp, wm, bp, bm) = (f(h, 0.0), f(-h, 0.0), f(0.0, h), f(0.0, -h));
    let jac = angle_diff(wp.s, wm.s) * (bp.theta - bm.theta) - angle_diff(bp.s, bm.s) * (wp.theta - wm.theta);
    let y = map_inner_to_outer(x, p);
    jac.abs() / (4.0 * h * h) * y.theta.cos() - p.r * x.beta.cos()
}

struct JacSample {
    rel: f64,
    det: f64,
    measure: f64,
    near_singular: usize,
}

/// Redraws until a point away from the singular curves is found.
fn jacobian_sample(p: &Params, seed: u64, i: usize, h: f64) -> JacSample {
    let mut r = rng(seed, i as u64);
    let mut near_singular = 0;
    loop {
        let x = InnerState::new(r.gen_range(-PI..PI), r.gen_range(-1.3..1.3));
        let Ok(rec) = g_map(x, p) else { continue };
        if rec.end.beta.abs() > 1.4 {
            continue;
        }
        let Ok(t) = dg_analytic(&rec, p) else { continue };
        let (Ok(_), Ok(num)) = (dg_numeric(x, p, 10.0 * h), dg_numeric(x, p, h)) else {
            near_singular += 1;
            continue;
        };
        let a = t.matrix();
        return JacSample {
            rel: (num - a).abs().max() / a.abs().max(),
            det: (t.det() / t.expected_det() - 1.0).abs(),
            measure: measure_defect(x, p, h).abs(),
            near_singular,
        };
    }
}

pub fn jacobian_check(p: &Params, samples: usize, seed: u64, h: f64, exec: Execution) -> JacobianCheck {
    let all = map_range(exec, samples, |i| jacobian_sample(p, seed, i, h));
    let fold = |f: fn(&JacSample) -> f64| all.iter().map(f).fold(0.0, f64::max);
    let (max_relative_error, max_det_error, max_measure_defect) = (fold(|s| s.rel), fold(|s| s.det), fold(|s| s.measure));
    JacobianCheck {
        params: *p,
        samples,
        seed,
        step: h,
        checked: all.len(),
        near_singular: all.iter().map(|s| s.near_singular).sum(),
        max_relative_error,
        max_det_error,
        max_measure_defect,
        pass: max_relative_error <= 1e-5 && max_det_error <= 1e-8 && max_measure_defect <= 1e-6,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConesReport {
    pub zeta: ZetaReport,
    pub a21: A21Report,
    pub cones: ConeReport,
    pub c1: f64,
    pub c2: f64,
}

pub fn cones(p: &Params, samples: usize, seed: u64, exec: Execution) -> annulus::Result<ConesReport> {
    let cfg = SampleConfig::new(samples, seed).with_exec(exec);
    let zeta = zeta_bounds_check(p, cfg)?;
    let a21 = a21_bound_check(p, cfg)?;
    let cones = cone_preservation_check(p, cfg)?;
    let (c1, c2) = slope_bounds(p, cfg)?;
    Ok(ConesReport { zeta, a21, cones, c1, c2 })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalsReport {
    pub delta: f64,
    pub m_max: usize,
    pub normals: Vec<NormalPoint>,
    pub family: Option<NormalFamily>,
}

pub fn normals(delta: f64, m_max: usize, family_min: Option<usize>) -> annulus::Result<NormalsReport> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Precondition(format!("delta = {delta} is outside [0, 1)")));
    }
    let family = match family_min {
        Some(min_points) => Some(build_x(delta, m_max, FamilyConfig { min_points, ..Default::default() })?),
        None => None,
    };
    Ok(NormalsReport { delta, m_max, normals: find_normals(delta, m_max), family })
}

#[derive(Debug, Clone, Serialize)]
pub struct StripSummary {
    pub index: usize,
    pub anchor: f64,
    pub m: usize,
    pub width: f64,
    pub width_at_zero: f64,
    pub limit_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StripsReport {
    pub params: Params,
    pub family: NormalFamily,
    pub strips: Vec<StripSummary>,
    pub crossing: CrossingMatrix,
    pub density: f64,
    pub word: Option<SymmetricPeriodicPoint>,
    pub nested: Vec<NestedWidth>,
}

pub struct Strips {
    pub report: StripsReport,
    pub set: StripSet,
}

pub fn strips(p: &Params, m_max: usize, min_points: usize, word: Option<&[usize]>, exec: Execution) -> annulus::Result<Strips> {
    let family = build_x(p.delta, m_max, FamilyConfig { min_points, exec })?;
    let set = build_strips(&family, p, StripConfig { exec, ..Default::default() })?;
    let crossing = crossing_matrix(&set, exec);
    let density = density_estimate(&lattice_nodes(&set, &crossing, exec), exec);
    let strips = set
        .stable
        .iter()
        .map(|s| StripSummary {
            index: s.index,
            anchor: s.anchor.omega,
            m: s.m,
            width: s.horizontal_width(),
            width_at_zero: s.width_at_zero(),
            limit_distance: s.limit_distance(),
        })
        .collect();
    let (word, nested) = match word {
        Some(w) => {
            let z = symmetric_periodic_from_word(w, &set, &crossing)?;
            let nested = (1..w.len()).map(|n| nested_width(&w[..=n], &set, &crossing)).collect::<annulus::Result<_>>()?;
            (Some(z), nested)
        }
        None => (None, Vec::new()),
    };
    Ok(Strips { report: StripsReport { params: *p, family, strips, crossing, density, word, nested }, set })
}

impl Strips {
    pub fn csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for (kind, list) in [(0i64, &self.set.stable), (1, &self.set.unstable)] {
            for s in list {
                for (b, c) in [(0i64, &s.boundary_a), (1, &s.boundary_b)] {
                    for x in &c.polyline {
                        rows.push(([s.index as i64, kind, b], [x.omega, x.beta]));
                    }
                }
            }
        }
        csv_string(&["strip", "unstable", "boundary", "omega", "beta"], rows.iter().map(|(i, r)| Row { ints: i, reals: r }))
    }

    pub fn svg(&self) -> String {
        let p = self.report.params;
        let mut plot = Plot::new(&format!("strips at delta = {}, r = {}", p.delta, p.r));
        for (k, list) in [(0, &self.set.stable), (1, &self.set.unstable)] {
            for s in list {
                for c in [&s.boundary_a, &s.boundary_b] {
                    let pts: Vec<(f64, f64)> = c.polyline.iter().map(|x| (x.omega, x.beta)).collect();
                    plot.polyline(&pts, k);
                }
            }
        }
        plot.finish()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        fs::write(dir.join("strips.csv"), self.csv()?)?;
        fs::write(dir.join("strips.svg"), self.svg())?;
        write_json(&dir.join("strips.json"), &self.report)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TangencyRun {
    pub p_over_q: (u32, u32),
    pub delta0: f64,
    pub offset: f64,
    pub pullback_m: usize,
    pub gamma_r: f64,
    pub report: TangencyReport,
    pub relative_to_gamma: f64,
}

/// The tangency in `r` at `delta0 + offset` for the family of the fixed point
/// `(0, 0)`, pulled back along the tangent normal point of `p/q`.
pub fn tangency(p: u32, q: u32, offset: f64, bracket: (f64, f64), m_max: usize) -> annulus::Result<TangencyRun> {
    let t = tangent_normal(p, q, m_max)
        .ok_or_else(|| Error::Precondition(format!("no tangent normal point of {p}/{q} with m <= {m_max}")))?;
    let delta = t.delta + offset;
    let family = PointFamily::fixed(delta, 0.0, 0)?;
    let report = find_tangency_r(&family, bracket, &TangencyConfig::new(t.m))?;
    let curve = gamma_curve((p, q), t.m, 0.0, &[])?;
    let (_, gamma_r) = curve
        .r_at_delta(delta)
        .ok_or_else(|| Error::Precondition(format!("delta = {delta} is not above {}", t.delta)))?;
    Ok(TangencyRun {
        p_over_q: (p, q),
        delta0: t.delta,
        offset,
        pullback_m: t.m,
        gamma_r,
        relative_to_gamma: (report.r_star - gamma_r).abs() / gamma_r,
        report,
    })
}

pub fn gamma(p: u32, q: u32, m: usize, anchor: f64, t_max: f64, samples: usize) -> annulus::Result<TangencyCurve> {
    let grid: Vec<f64> = (0..samples)
        .map(|k| if samples < 2 { 0.0 } else { -t_max + 2.0 * t_max * k as f64 / (samples - 1) as f64 })
        .collect();
    gamma_curve((p, q), m, anchor, &grid)
}

pub fn gamma_csv(c: &TangencyCurve) -> Result<String> {
    let rows: Vec<[f64; 3]> = c.samples.iter().map(|s| [s.t, s.delta, s.r]).collect();
    csv_string(&["t", "delta", "r"], rows.iter().map(|r| Row { ints: &[], reals: r }))
}

/// Reversibility of a record: `G(R G(x)) = R x`.
pub fn reversibility_defect(rec: &ReturnRecord, p: &Params) -> Option<f64> {
    let back = g_map(rec.end.involution(), p).ok()?;
    Some(back.end.involution().distance(&rec.start))
}

pub fn read_word(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|t| t.trim().parse::<usize>().with_context(|| format!("bad symbol {t:?}"))).collect()
}
