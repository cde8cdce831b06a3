use std::f64::consts::{FRAC_PI_2, PI};

use annulus::flight::{first_return, g_inverse, g_map, map_inner_to_outer, OrbitClass};
use annulus::linearize::dg_analytic;
use annulus::normal::{find_normals, NormalKind};
use annulus::phase::{angle_diff, omega_star_radius, InnerState, Params, RegionSet, Reversible};
use proptest::prelude::*;

fn inner() -> impl Strategy<Value = InnerState> {
    (-PI..PI, -1.5..1.5f64).prop_map(|(w, b)| InnerState::new(w, b))
}

fn params() -> impl Strategy<Value = Params> {
    (0.05..0.95f64, 0.02..0.95f64).prop_map(|(d, f)| Params::new(d, f * (1.0 - d)).unwrap())
}

fn star_params() -> impl Strategy<Value = Params> {
    (0.72..0.98f64, 0.05..0.95f64).prop_map(|(d, f)| Params::new(d, f * omega_star_radius(d)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn obstacle_to_table_preserves_measure(x in inner(), p in params()) {
        let h = 1e-6;
        let f = |dw: f64, db: f64| map_inner_to_outer(InnerState { omega: x.omega + dw, beta: x.beta + db }, &p);
        let (wp, wm, bp, bm) = (f(h, 0.0), f(-h, 0.0), f(0.0, h), f(0.0, -h));
        let jac = angle_diff(wp.s, wm.s) * (bp.theta - bm.theta) - angle_diff(bp.s, bm.s) * (wp.theta - wm.theta);
        let jac = jac.abs() / (4.0 * h * h);
        let y = map_inner_to_outer(x, &p);
        prop_assert!((jac * y.theta.cos() - p.r * x.beta.cos()).abs() < 1e-6);
    }

    #[test]
    fn inverse_undoes_the_return(x in inner(), p in params()) {
        if let Ok(rec) = g_map(x, &p) {
            if rec.end.beta.abs() < 1.5 {
                let back = g_inverse(rec.end, &p).unwrap();
                prop_assert!(back.distance(&x) < 1e-8, "{:?} -> {:?} -> {:?}", x, rec.end, back);
            }
        }
    }

    #[test]
    fn radial_bounce_without_eccentricity(w in -PI..PI, r in 0.05..0.95f64) {
        let p = Params::new(0.0, r).unwrap();
        let rec = g_map(InnerState::new(w, 0.0), &p).unwrap();
        prop_assert_eq!(rec.nu(), 2);
        prop_assert!(angle_diff(rec.end.omega, w).abs() < 1e-12);
    }

    #[test]
    fn tangent_map_has_one_sign_on_h_minus(x in inner(), p in star_params()) {
        let reg = RegionSet::new(p);
        prop_assume!(reg.in_h_minus(&x));
        if let OrbitClass::Returns(rec) = first_return(x, &p, 1_000_000) {
            if let Ok(t) = dg_analytic(&rec, &p) {
                let s = t.a21.signum();
                prop_assert!([t.a11, t.a12, t.a22].iter().all(|a| a.signum() == s), "{:?}", t);
            }
        }
    }

    #[test]
    fn involution_maps_h_minus_to_h_plus(x in inner(), p in star_params()) {
        let reg = RegionSet::new(p);
        prop_assert_eq!(reg.in_h_minus(&x), reg.in_h_plus(&x.involution()));
    }

    #[test]
    fn normal_points_solve_their_system(d in 0.05..0.98f64) {
        for n in find_normals(d, 4) {
            prop_assert!(n.residuals().iter().all(|r| r.abs() <= 1e-10), "{:?}", n);
            let tangent = (n.omega.abs() - FRAC_PI_2).abs() < 1e-9
                || (d * n.omega.cos() / n.theta.cos() + 1.0 / (n.m as f64 + 1.0)).abs() < 1e-9;
            prop_assert_eq!(n.kind == NormalKind::Tangent, tangent);
        }
    }
}
