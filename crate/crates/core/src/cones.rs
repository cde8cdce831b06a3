//! Sampled hyperbolicity certificates on the strip `H-`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::flight::{first_return, g_inverse, OrbitClass, ReturnRecord};
use crate::linearize::{dg_analytic, JacobianTerms};
use crate::par::{map_range, Execution};
use crate::phase::{constant_a, InnerState, Params, RegionSet};

/// Strictness margin for cone membership of image rays.
pub const CONE_MARGIN: f64 = 1e-9;
const MAX_OUTER_STEPS: usize = 10_000_000;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub samples: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl SampleConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        SampleConfig { samples, seed, exec: Execution::default() }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

/// One random stream per sample index, so results do not depend on the
/// number of threads.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `zeta_min = (delta/2) sqrt(3/(1+delta^2))`, `zeta_max = sqrt(delta)`.
pub fn zeta_bounds(delta: f64) -> (f64, f64) {
    (0.5 * delta * (3.0 / (1.0 + delta * delta)).sqrt(), delta.sqrt())
}

fn gate_regime(p: &Params) -> Result<()> {
    if p.in_cone_regime() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "need delta^2 > 1/2 and r < (delta - delta^2)/4, got delta = {}, r = {}",
            p.delta, p.r
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeBounds {
    pub zeta_min: f64,
    pub zeta_max: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
    /// Largest observed `|~a_ij| / (|a21| sqrt(r))` for `(11, 22, 12)`.
    pub ratio_bounds: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaReport {
    pub params: Params,
    pub samples: usize,
    pub seed: u64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub observed_min: f64,
    pub observed_max: f64,
    pub pass: bool,
}

/// Samples `(phi, theta)` with `|sin theta + delta sin phi| <= r` and
/// `|sin theta| <= delta^2` and checks `zeta_min < |zeta| < zeta_max`.
pub fn zeta_bounds_check(p: &Params, cfg: SampleConfig) -> Result<ZetaReport> {
    gate_regime(p)?;
    let (zmin, zmax) = zeta_bounds(p.delta);
    let d2 = p.delta * p.delta;
    let vals = map_range(cfg.exec, cfg.samples, |i| {
        let mut rng = sample_rng(cfg.seed, i);
        let st: f64 = rng.gen_range(-d2..=d2);
        let theta = st.asin();
        let lo = ((-p.r - st) / p.delta).clamp(-1.0, 1.0);
        let hi = ((p.r - st) / p.delta).clamp(-1.0, 1.0);
        let u: f64 = rng.gen_range(lo..=hi);
        let phi = if rng.gen::<bool>() { u.asin() } else { PI - u.asin() };
        (p.delta * phi.cos() / theta.cos()).abs()
    });
    let observed_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let observed_max = vals.iter().copied().fold(0.0, f64::max);
    Ok(ZetaReport {
        params: *p,
        samples: cfg.samples,
        seed: cfg.seed,
        zeta_min: zmin,
        zeta_max: zmax,
        observed_min,
        observed_max,
        pass: observed_min > zmin && observed_max < zmax,
    })
}

/// A returning, non-grazing sample of `H-` with its tangent map.
#[derive(Debug, Clone, Copy)]
pub struct HSample {
    pub record: ReturnRecord,
    pub terms: JacobianTerms,
    /// Rejected draws (outside `H-`, non-returning or grazing) before this one.
    pub rejected: usize,
}

fn uniform_inner(rng: &mut ChaCha8Rng) -> InnerState {
    let w: f64 = rng.gen_range(-PI..PI);
    let b: f64 = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
    InnerState::new(w, b)
}

/// Rejection sample of `H-` (`plus = false`) or `H+` (`plus = true`).
pub fn sample_h(p: &Params, rng: &mut ChaCha8Rng, plus: bool) -> (InnerState, usize) {
    let reg = RegionSet::new(*p);
    let mut rejected = 0;
    loop {
        let x = uniform_inner(rng);
        let inside = if plus { reg.in_h_plus(&x) } else { reg.in_h_minus(&x) };
        if inside {
            return (x, rejected);
        }
        rejected += 1;
    }
}

pub fn sample_h_minus_record(p: &Params, seed: u64, index: usize) -> Option<HSample> {
    let mut rng = sample_rng(seed, index);
    let mut rejected = 0;
    for _ in 0..MAX_ATTEMPTS {
        let (x, rej) = sample_h(p, &mut rng, false);
        rejected += rej;
        if let OrbitClass::Returns(record) = first_return(x, p, MAX_OUTER_STEPS) {
            if let Ok(terms) = dg_analytic(&record, p) {
                return Some(HSample { record, terms, rejected });
            }
        }
        rejected += 1;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A21Report {
    pub params: Params,
    pub samples: usize,
    pub seed: u64,
    pub bound: f64,
    pub min_abs_a21: f64,
    /// `min |a21| / bound`; the check passes when this exceeds one.
    pub worst_margin: f64,
    pub pass: bool,
}

/// Checks `|a21| >= 4A / sqrt(r)` on sampled returns from `H-`.
pub fn a21_bound_check(p: &Params, cfg: SampleConfig) -> Result<A21Report> {
    gate_regime(p)?;
    let bound = 4.0 * constant_a(p.delta) / p.r.sqrt();
    let vals = map_range(cfg.exec, cfg.samples, |i| {
        sample_h_minus_record(p, cfg.seed, i).map(|s| s.terms.a21.abs())
    });
    let min_abs_a21 = vals.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(A21Report {
        params: *p,
        samples: cfg.samples,
        seed: cfg.seed,
        bound,
        min_abs_a21,
        worst_margin: min_abs_a21 / bound,
        pass: vals.iter().all(|v| v.is_some()) && min_abs_a21 >= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeMargins {
    /// Smallest `min(|x|, |y|) / |(x, y)|` over images of the boundary rays of `C+`.
    pub forward_ray: f64,
    /// Same for `DG^{-1}` acting on the boundary rays of `C-` at points of `H+`.
    pub inverse_ray: f64,
    /// Smallest `|DG (1,1)/sqrt 2| - |a21| (2 - e)`.
    pub expansion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub params: Params,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
    pub margins: ConeMargins,
    pub rho_observed: f64,
    /// `max e / sqrt(r)`, the constant in `e < K sqrt(r)`.
    pub k_measured: f64,
    /// `(4A / sqrt r) (2 - K sqrt r)`.
    pub rho_lower_bound: f64,
    pub violations: usize,
    pub unusable_samples: usize,
    pub in_omega_star: bool,
    pub bounds: ConeBounds,
}

/// `min(|x|, |y|) / |v|` if both components share the sign `sign`, else minus it.
fn ray_margin(v: [f64; 2], same_sign: bool) -> f64 {
    let n = v[0].hypot(v[1]);
    let inside = if same_sign { v[0] * v[1] > 0.0 } else { v[0] * v[1] < 0.0 };
    let m = v[0].abs().min(v[1].abs()) / n;
    if inside {
        m
    } else {
        -m
    }
}

struct ConeSample {
    forward: f64,
    inverse: f64,
    expansion_gap: f64,
    rho: f64,
    e: f64,
    slope_lo: f64,
    slope_hi: f64,
    ratios: (f64, f64, f64),
}

fn cone_sample(p: &Params, seed: u64, i: usize) -> Option<ConeSample> {
    let s = sample_h_minus_record(p, seed, i)?;
    let t = &s.terms;
    let forward = ray_margin([t.a11, t.a21], true).min(ray_margin([t.a12, t.a22], true));
    let img = [(t.a11 + t.a12) / 2f64.sqrt(), (t.a21 + t.a22) / 2f64.sqrt()];
    let rho = img[0].hypot(img[1]);
    let e = ((t.atilde11 + t.atilde12).powi(2) + t.atilde22.powi(2)).sqrt() / (2f64.sqrt() * t.a21.abs());
    let expansion_gap = rho - t.a21.abs() * (2.0 - e);

    // DG^{-1} at a point of H+, through G^{-1} and an explicit matrix inverse
    let mut rng = sample_rng(seed ^ 0x9e37_79b9_7f4a_7c15, i);
    let mut inverse = f64::INFINITY;
    for _ in 0..MAX_ATTEMPTS {
        let (y, _) = sample_h(p, &mut rng, true);
        let Ok(z) = g_inverse(y, p) else { continue };
        let Some(rec) = first_return(z, p, MAX_OUTER_STEPS).record().copied() else { continue };
        let Ok(tz) = dg_analytic(&rec, p) else { continue };
        let Some(inv) = tz.matrix().try_inverse() else { continue };
        inverse = ray_margin([inv[(0, 0)], inv[(1, 0)]], false).min(ray_margin([inv[(0, 1)], inv[(1, 1)]], false));
        break;
    }
    let sr = p.r.sqrt() * t.a21.abs();
    Some(ConeSample {
        forward,
        inverse,
        expansion_gap,
        rho,
        e,
        slope_lo: t.a21 / t.a11,
        slope_hi: t.a22 / t.a12,
        ratios: (t.atilde11.abs() / sr, t.atilde22.abs() / sr, t.atilde12.abs() / sr),
    })
}

/// Strict invariance of `C+ = {u1 u2 >= 0}` under `DG` on `H-`, of `C-` under
/// `DG^{-1}` on `H+`, and the expansion estimate along `(1, 1)`.
pub fn cone_preservation_check(p: &Params, cfg: SampleConfig) -> Result<ConeReport> {
    gate_regime(p)?;
    let all = map_range(cfg.exec, cfg.samples, |i| cone_sample(p, cfg.seed, i));
    let unusable_samples = all.iter().filter(|s| s.is_none()).count();
    let got: Vec<&ConeSample> = all.iter().flatten().collect();
    let fold_min = |f: &dyn Fn(&ConeSample) -> f64| got.iter().map(|s| f(s)).fold(f64::INFINITY, f64::min);
    let fold_max = |f: &dyn Fn(&ConeSample) -> f64| got.iter().map(|s| f(s)).fold(f64::NEG_INFINITY, f64::max);
    let violations = got
        .iter()
        .filter(|s| s.forward <= CONE_MARGIN || s.inverse <= CONE_MARGIN || s.expansion_gap < 0.0)
        .count();
    let k_measured = fold_max(&|s| s.e) / p.r.sqrt();
    let a = constant_a(p.delta);
    let rho_observed = fold_min(&|s| s.rho);
    let (zeta_min, zeta_max) = zeta_bounds(p.delta);
    let bounds = ConeBounds {
        zeta_min,
        zeta_max,
        a,
        rho: rho_observed,
        c1: fold_min(&|s| s.slope_lo),
        c2: fold_max(&|s| s.slope_hi),
        ratio_bounds: (fold_max(&|s| s.ratios.0), fold_max(&|s| s.ratios.1), fold_max(&|s| s.ratios.2)),
    };
    Ok(ConeReport {
        params: *p,
        samples: cfg.samples,
        seed: cfg.seed,
        pass: violations == 0 && unusable_samples == 0,
        margins: ConeMargins {
            forward_ray: fold_min(&|s| s.forward),
            inverse_ray: fold_min(&|s| s.inverse),
            expansion: fold_min(&|s| s.expansion_gap),
        },
        rho_observed,
        k_measured,
        rho_lower_bound: 4.0 * a / p.r.sqrt() * (2.0 - k_measured * p.r.sqrt()),
        violations,
        unusable_samples,
        in_omega_star: p.in_omega_star(),
        bounds,
    })
}

/// `c1 = min a21/a11`, `c2 = max a22/a12` over sampled returns from `H-`.
pub fn slope_bounds(p: &Params, cfg: SampleConfig) -> Result<(f64, f64)> {
    gate_regime(p)?;
    let vals = map_range(cfg.exec, cfg.samples, |i| {
        sample_h_minus_record(p, cfg.seed, i).map(|s| (s.terms.a21 / s.terms.a11, s.terms.a22 / s.terms.a12))
    });
    let c1 = vals.iter().flatten().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let c2 = vals.iter().flatten().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((c1, c2))
}

/// Whether a segment direction `(d omega, d beta)` lies in the stable band
/// `-c2 <= d beta / d omega <= -c1`.
pub fn is_stable_slope(slope: f64, c1: f64, c2: f64) -> bool {
    slope <= -c1 && slope >= -c2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_constants() {
        let (lo, hi) = zeta_bounds(0.8);
        assert!((lo - 0.541_001_780_800_459_4).abs() < 1e-12, "{lo}");
        assert!((hi - 0.894_427_190_999_915_9).abs() < 1e-12);
        for d in [0.71, 0.8, 0.9, 0.99] {
            let (lo, hi) = zeta_bounds(d);
            assert!(lo > 0.5 && hi < 1.0);
            assert!(constant_a(d) > 0.0);
        }
    }

    #[test]
    fn zeta_sampling() {
        let r = zeta_bounds_check(&Params::new(0.8, 0.04).unwrap(), SampleConfig::new(100_000, 1));
        assert!(matches!(r, Err(Error::Precondition(_))), "0.04 is above (0.8 - 0.64)/4");
        let r = zeta_bounds_check(&Params::new(0.8, 0.01).unwrap(), SampleConfig::new(100_000, 1)).unwrap();
        assert!(r.pass, "{r:?}");
        let r = zeta_bounds_check(&Params::new(0.75, 0.04).unwrap(), SampleConfig::new(20_000, 2)).unwrap();
        assert!(r.pass, "{r:?}");
        let r = zeta_bounds_check(&Params::new(0.6, 0.01).unwrap(), SampleConfig::new(10, 2));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn a21_at_center_and_sampled() {
        let p = Params::new(0.8, 0.005).unwrap();
        let rec = crate::flight::g_map(InnerState::new(0.0, 0.0), &p).unwrap();
        let t = dg_analytic(&rec, &p).unwrap();
        assert!((t.a21.abs() - 576.0).abs() < 1e-9);
        assert!(t.a21.abs() >= 4.0 * constant_a(0.8) / p.r.sqrt());
        let rep = a21_bound_check(&p, SampleConfig::new(2000, 3)).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn reports_do_not_depend_on_execution() {
        let p = Params::new(0.8, 3e-3).unwrap();
        let a = cone_preservation_check(&p, SampleConfig::new(300, 9).with_exec(Execution::Sequential)).unwrap();
        let b = cone_preservation_check(&p, SampleConfig::new(300, 9).with_exec(Execution::Parallel)).unwrap();
        assert_eq!(a, b);
        assert!(a.pass, "{a:?}");
    }

    #[test]
    fn gate_outside_regime() {
        let p = Params::new(0.5, 0.01).unwrap();
        assert!(cone_preservation_check(&p, SampleConfig::new(10, 0)).is_err());
        assert!(slope_bounds(&p, SampleConfig::new(10, 0)).is_err());
    }

    #[test]
    fn slope_of_minus_one_is_stable() {
        let (c1, c2) = slope_bounds(&Params::new(0.8, 1e-3).unwrap(), SampleConfig::new(2000, 5)).unwrap();
        assert!(c1 > 0.9 && c2 < 1.1, "{c1} {c2}");
        assert!(is_stable_slope(-1.0, c1.min(1.0), c2.max(1.0)));
    }
}
