use annulus::{Execution, InnerState, Params};
use annulus_cli::commands::{jacobian_check, orbit, portrait, return_map, strips};

#[test]
fn concentric_portrait_keeps_beta() {
    let p = Params::new(0.0, 0.5).unwrap();
    let port = portrait(&p, 20, 200, 3, Execution::default());
    assert!(port.report.skipped.is_empty());
    assert_eq!(port.report.points, 20 * 201);
    assert!(port.report.beta_drift < 1e-9, "{}", port.report.beta_drift);
}

#[test]
fn portrait_does_not_depend_on_execution() {
    let p = Params::new(0.4, 0.3).unwrap();
    let a = portrait(&p, 8, 100, 11, Execution::Sequential);
    let b = portrait(&p, 8, 100, 11, Execution::default());
    assert_eq!(a.csv().unwrap(), b.csv().unwrap());
}

#[test]
fn island_around_the_centre() {
    let p = Params::new(0.3, 0.5).unwrap();
    let (pts, stop) = orbit(InnerState::new(0.02, 0.02), &p, 2000);
    assert!(stop.is_none());
    let far = pts.iter().map(|o| o.omega.abs().max(o.beta.abs())).fold(0.0, f64::max);
    assert!(far < 0.2, "{far}");
}

#[test]
fn hyperbolic_centre_is_left() {
    let p = Params::new(0.7, 0.1).unwrap();
    let rep = return_map(InnerState::new(0.0, 0.0), &p);
    let a = rep.jacobian.unwrap().matrix();
    assert!((a[(0, 0)] + a[(1, 1)]).abs() > 2.0);
    let (pts, _) = orbit(InnerState::new(1e-6, 0.0), &p, 200);
    let far = pts.iter().map(|o| o.omega.abs().max(o.beta.abs())).fold(0.0, f64::max);
    assert!(far > 0.5, "{far}");
}

#[test]
fn jacobian_check_passes_on_a_moderate_table() {
    let rep = jacobian_check(&Params::new(0.5, 0.2).unwrap(), 200, 5, 1e-6, Execution::default());
    assert!(rep.pass, "{rep:?}");
    assert_eq!(rep.checked, 200);
}

#[test]
fn strips_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = strips(&Params::new(0.8, 1e-4).unwrap(), 12, 5, Some(&[3, 4]), Execution::default()).unwrap();
    s.write(dir.path()).unwrap();
    for f in ["strips.csv", "strips.svg", "strips.json"] {
        assert!(dir.path().join(f).metadata().unwrap().len() > 0, "{f}");
    }
    assert!(s.report.word.is_some());
    assert_eq!(s.report.nested.len(), 1);
}
