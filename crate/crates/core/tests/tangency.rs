use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use annulus::cones::{slope_bounds, SampleConfig};
use annulus::phase::{InnerState, Params};
use annulus::strata::StripConfig;
use annulus::tangency::*;

fn delta0() -> f64 {
    (PI / 3.0).sin()
}

#[test]
fn stable_manifold_of_the_far_fixed_point() {
    let fam = PointFamily::fixed(0.8, PI, 0).unwrap();
    let (set, z) = fam.realize(1e-3, StripConfig::default()).unwrap();
    let w = local_manifold(&z, ManifoldSide::Stable, &set, ManifoldConfig::default()).unwrap();
    assert!(!w.truncated);
    assert!(w.connects_boundary());
    assert!(w.polyline.iter().any(|x| x.distance(&InnerState::new(PI, 0.0)) < 1e-9));
    let (c1, c2) = slope_bounds(&Params::new(0.8, 1e-3).unwrap(), SampleConfig::new(50_000, 1)).unwrap();
    let (lo, hi) = w.slope_band;
    assert!(lo >= -c2 && hi <= -c1, "{:?} vs [{}, {}]", w.slope_band, -c2, -c1);
    assert!((lo + 1.0).abs() < 0.01 && (hi + 1.0).abs() < 0.01);
}

#[test]
fn unstable_manifold_is_the_mirror_image() {
    let fam = PointFamily::fixed(0.8, PI, 0).unwrap();
    let (set, z) = fam.realize(1e-3, StripConfig::default()).unwrap();
    let s = local_manifold(&z, ManifoldSide::Stable, &set, ManifoldConfig::default()).unwrap();
    let u = local_manifold(&z, ManifoldSide::Unstable, &set, ManifoldConfig::default()).unwrap();
    assert!(s.reversibility_gap < 1e-6 && u.reversibility_gap < 1e-6);
    let (c1, c2) = slope_bounds(&Params::new(0.8, 1e-3).unwrap(), SampleConfig::new(50_000, 1)).unwrap();
    assert!(u.slope_band.0 >= c1 && u.slope_band.1 <= c2, "{:?}", u.slope_band);
    let mirrored: Vec<InnerState> = s.polyline.iter().map(|x| InnerState::new(x.omega, -x.beta)).collect();
    assert!(annulus::polyline::hausdorff(&mirrored, &u.polyline) < 1e-6);
}

#[test]
fn manifold_converges_to_its_limit_line() {
    let fam = PointFamily::fixed(0.8, PI, 0).unwrap();
    let d: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&r| {
            let (set, z) = fam.realize(r, StripConfig::default()).unwrap();
            local_manifold(&z, ManifoldSide::Stable, &set, ManifoldConfig::default()).unwrap().limit_distance()
        })
        .collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}

#[test]
fn elliptic_points_have_no_manifolds() {
    // r > delta: the centre fixed point is elliptic
    let fam = PointFamily::fixed(0.3, 0.0, 0).unwrap();
    match fam.realize(0.45, StripConfig::default()) {
        Ok((set, z)) => {
            let e = local_manifold(&z, ManifoldSide::Stable, &set, ManifoldConfig::default()).unwrap_err();
            assert!(e.is_precondition(), "{e}");
        }
        Err(e) => assert!(e.is_precondition(), "{e}"),
    }
}

#[test]
fn gamma_examples() {
    assert!((d0(1, 3, 2, 0.0) - FRAC_PI_4.sin()).abs() < 1e-15);
    let grid: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.01).collect();
    let c = gamma_curve((1, 3), 5, 0.0, &grid).unwrap();
    assert_eq!(c.at(0.0), (delta0(), 0.0));
    assert!(!c.samples.is_empty());
    for s in &c.samples {
        assert!(s.delta > c.delta0 && s.r > 0.0);
        assert!(Params::new(s.delta, s.r).is_ok());
        // r(t) is odd in t with the sign of -D0
        assert!(s.t * c.d0 < 0.0);
    }
    assert!(c.samples.len() < grid.len());
}

#[test]
fn gamma_prediction_at_the_test_offset() {
    let c = gamma_curve((1, 3), 5, 0.0, &[]).unwrap();
    let (t, r) = c.r_at_delta(delta0() + 0.01).unwrap();
    assert!((t.abs() - (0.01 / (1.5 * delta0())).sqrt()).abs() < 1e-15);
    assert!((r - 0.019852903660844808).abs() < 1e-12, "{r}");
    assert!(c.r_at_delta(delta0() - 0.01).is_none());
}

#[test]
fn degenerate_d0_is_refused() {
    // m = 2, p/q = 1/3: the winding terms cancel and only the anchor is left
    let w = -FRAC_PI_2;
    assert!(d0(1, 3, 2, w).abs() < 1e-12);
    assert!(gamma_curve((1, 3), 2, w, &[0.1]).unwrap_err().is_precondition());
}

#[test]
fn pulled_back_branch_is_a_cup_near_the_tangent_normal_point() {
    let fam = PointFamily::fixed(delta0() + 0.01, 0.0, 0).unwrap();
    let m = tangent_normal(1, 3, 8).unwrap().m;
    let cfg = TangencyConfig::new(m);
    let b = branch_at(&fam, 0.03, &cfg).unwrap();
    assert!(b.interior_min && b.arc_disjoint_from_l0);
    let (first, last) = (b.points[0].point, b.points[b.points.len() - 1].point);
    assert!(first.beta > b.min.point.beta + 0.1 && last.beta > b.min.point.beta + 0.1);
    assert!((b.min.point.omega + FRAC_PI_2).abs() < 1.0);
    assert!((b.min.point.beta - 0.18372593758).abs() < 1e-6, "{:?}", b.min);
    assert_eq!(b.l0_crossings, 0);
    let b = branch_at(&fam, 0.025, &cfg).unwrap();
    assert_eq!(b.l0_crossings, 2);
}

#[test]
fn tangency_in_r_for_the_third_family() {
    let fam = PointFamily::fixed(delta0() + 0.01, 0.0, 0).unwrap();
    let m = tangent_normal(1, 3, 8).unwrap().m;
    let rep = find_tangency_r(&fam, (0.022, 0.032), &TangencyConfig::new(m)).unwrap();
    assert!(rep.r_width <= 1e-10);
    assert!((rep.r_star - 0.0280366735).abs() < 1e-8, "{}", rep.r_star);
    assert!(rep.quadratic && rep.second_difference > QUADRATIC_TOL);
    assert!(rep.unfolds);
    assert_eq!(rep.crossings_below.1, 2);
    assert_eq!(rep.crossings_above.1, 0);
    assert!(rep.ws_wu_distance < 1e-6);
    assert!(rep.arc_disjoint_from_l0);
    assert!(rep.tangency_point.beta.abs() < 1e-7);
}

#[test]
fn no_tangency_in_a_bracket_without_sign_change() {
    let fam = PointFamily::fixed(delta0() + 0.01, 0.0, 0).unwrap();
    let cfg = TangencyConfig::new(5);
    let e = find_tangency_r(&fam, (0.02, 0.025), &cfg).unwrap_err();
    assert!(matches!(e, annulus::Error::NoTangency(_)), "{e}");
}
