use std::f64::consts::{FRAC_PI_2, PI};

use annulus::flight::g_map;
use annulus::normal::*;
use annulus::phase::{angle_diff, InnerState, Params};

#[test]
fn solver_output_satisfies_the_system() {
    for d in [0.3, 0.8, (PI / 3.0).sin(), 0.95] {
        for n in find_normals(d, 6) {
            assert!(n.residuals().iter().all(|r| r.abs() <= 1e-10), "{n:?}");
            assert_eq!(n.delta, d);
        }
    }
}

#[test]
fn normals_come_in_mirror_pairs() {
    let all = find_normals(0.8, 6);
    for n in &all {
        let mirrored = angle_diff(-n.omega, 0.0);
        assert!(
            all.iter().any(|o| o.m == n.m && angle_diff(o.omega, mirrored).abs() < 1e-9),
            "{n:?} has no partner"
        );
    }
}

#[test]
fn tangency_classification() {
    let d = (PI / 4.0).sin();
    let t = normal_from_rational(1, 4, 3, d).unwrap();
    assert_eq!(t.kind, NormalKind::Tangent);
    assert!((t.omega + FRAC_PI_2).abs() < 1e-12);
    for n in find_normals(0.8, 6) {
        let z = n.delta * n.omega.cos() / n.theta.cos();
        let tangent = n.omega.cos().abs() < 1e-9 || (z + 1.0 / (n.m as f64 + 1.0)).abs() < 1e-9;
        assert_eq!(n.kind == NormalKind::Tangent, tangent, "{n:?}");
    }
}

#[test]
fn normal_orbits_on_the_table_are_period_two() {
    let p = Params::new(0.8, 1e-4).unwrap();
    for n in find_normals(0.8, 6).iter().filter(|n| n.in_h_minus()) {
        let rec = g_map(InnerState::new(n.omega, 0.0), &p).unwrap();
        assert!(rec.end.beta.abs() < 1e-7, "{n:?}");
        // one more step amplifies the 1e-11 landing error by |DG| ~ 1/r
        let back = g_map(rec.end, &p).unwrap();
        assert!(angle_diff(back.end.omega, n.omega).abs() < 1e-4, "{n:?}");
    }
}

#[test]
fn family_is_closed_under_the_return() {
    for (d, m) in [(0.8, 12), (0.9, 20), (0.95, 30)] {
        let fam = build_x(d, m, FamilyConfig { min_points: 5, ..Default::default() }).unwrap();
        assert_eq!(fam.n, fam.points.len());
        for (i, a) in fam.points.iter().enumerate() {
            assert!(a.omega.sin().abs() < d);
            let j = fam.image_index(i).expect("image is a member");
            assert!(angle_diff(fam.points[j].omega, a.return_image()).abs() < 1e-8);
        }
        let omegas: Vec<f64> = fam.points.iter().map(|a| a.omega).collect();
        assert!((family_gap(&omegas, d) - fam.d).abs() < 1e-12);
        assert!(fam.d < PI - 2.0 * d.asin(), "{d}: {}", fam.d);
    }
}

#[test]
fn family_spacing_at_point_eight() {
    let fam = build_x(0.8, 12, FamilyConfig { min_points: 5, ..Default::default() }).unwrap();
    assert_eq!(fam.n, 8);
    assert!(fam.d < PI - 2.0 * 0.8f64.asin());
}

#[test]
fn cubic_unfolding_roots_count() {
    let d0 = (PI / 3.0).sin();
    for dd in [-0.01, -0.005, -0.002] {
        assert_eq!(cubic_unfolding_roots(1, 3, 2, dd).unwrap().roots.len(), 1, "{dd}");
    }
    // the outer pair has left the basin
    assert_eq!(cubic_unfolding_roots(1, 3, 2, 0.02).unwrap().roots.len(), 1);
    for dd in [0.002, 0.005, 0.01] {
        let u = cubic_unfolding_roots(1, 3, 2, dd).unwrap();
        assert_eq!(u.roots.len(), 3, "{dd}");
        let est = (2.0 * dd / d0).sqrt();
        for (phi, _) in [u.roots[0], u.roots[2]] {
            let off = (phi - FRAC_PI_2).abs();
            assert!((off - est).abs() / est < 0.15, "{dd}: {off} vs {est}");
        }
    }
}

#[test]
fn tangent_point_of_the_third_family_is_reached_after_five_flights() {
    let d = (PI / 3.0).sin();
    let short = find_normals(d, 3);
    assert!(!short.iter().any(|n| (n.omega + FRAC_PI_2).abs() < 1e-9));
    let long = find_normals(d, 5);
    let t = long.iter().find(|n| (n.omega + FRAC_PI_2).abs() < 1e-9).unwrap();
    assert_eq!((t.m, t.kind), (5, NormalKind::Tangent));
    assert!(t.residuals().iter().all(|r| r.abs() < 1e-10));
}
