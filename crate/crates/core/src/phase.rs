//! Parameters, phase cylinders, the involution `R` and the named regions.
//!
//! Conventions. The outer table is the unit circle centred at the origin and
//! `s` is the counterclockwise arc parameter, so the collision point is
//! `(cos s, sin s)`. `theta` is the reflection angle measured from the inward
//! normal; the outgoing velocity has direction angle `s + pi - theta`.
//!
//! The obstacle has centre `(-delta, 0)`. `omega` runs clockwise, so the
//! collision point is `(-delta + r cos omega, -r sin omega)` and the outward
//! normal there is `(cos omega, -sin omega)`. `beta` is measured clockwise from
//! that normal, which puts the outgoing direction at angle `-omega - beta`.
//!
//! With these choices the collision maps satisfy
//! `sin theta + delta sin(theta + s) = -r sin beta`, `omega + beta = -s - theta`
//! (obstacle to table) and the mirrored pair with `theta - s` (table to obstacle).

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

/// Default absolute tolerance on implicit residuals.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Maps any real angle into `(-pi, pi]`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Signed distance between two angles, in `(-pi, pi]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub delta: f64,
    pub r: f64,
}

impl Params {
    /// Checked constructor: `0 <= delta < 1`, `r > 0`, `r + delta < 1`.
    pub fn new(delta: f64, r: f64) -> Result<Self> {
        let p = Params { delta, r };
        if p.in_omega() {
            Ok(p)
        } else {
            Err(Error::Precondition(format!(
                "(delta, r) = ({delta}, {r}) violates 0 <= delta < 1, r > 0, r + delta < 1"
            )))
        }
    }

    /// No validation. Used for local computations that stay meaningful past
    /// `r + delta = 1`, such as the Jacobian at the period-two orbit through
    /// the centres.
    pub fn unchecked(delta: f64, r: f64) -> Self {
        Params { delta, r }
    }

    pub fn in_omega(&self) -> bool {
        self.delta.is_finite()
            && self.r.is_finite()
            && (0.0..1.0).contains(&self.delta)
            && self.r > 0.0
            && self.r + self.delta < 1.0
    }

    /// The hypotheses of the zeta and a21 estimates: `delta^2 > 1/2` and
    /// `r < (delta - delta^2)/4`.
    pub fn in_cone_regime(&self) -> bool {
        self.in_omega()
            && self.delta * self.delta > 0.5
            && self.r < (self.delta - self.delta * self.delta) / 4.0
    }

    pub fn in_omega_star(&self) -> bool {
        self.in_omega() && self.delta * self.delta > 0.5 && self.r < omega_star_radius(self.delta)
    }
}

/// `A = min{ sqrt(delta) - delta, 6 delta^2 / (2(1+delta^2)) - delta sqrt(3) / (2 sqrt(1+delta^2)) }`.
pub fn constant_a(delta: f64) -> f64 {
    let d2 = delta * delta;
    let first = delta.sqrt() - delta;
    let second = 6.0 * d2 / (2.0 * (1.0 + d2)) - delta * 3f64.sqrt() / (2.0 * (1.0 + d2).sqrt());
    first.min(second)
}

/// `r(delta) = min{ (delta - delta^2)/4, A^2 / (1/4 + 4 sqrt(delta))^2 }`.
pub fn omega_star_radius(delta: f64) -> f64 {
    let a = constant_a(delta);
    let q = 0.25 + 4.0 * delta.sqrt();
    ((delta - delta * delta) / 4.0).min(a * a / (q * q))
}

/// Collision with the outer circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterState {
    pub s: f64,
    pub theta: f64,
}

/// Collision with the obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerState {
    pub omega: f64,
    pub beta: f64,
}

/// A ray: base point and unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub point: [f64; 2],
    pub dir: [f64; 2],
}

pub trait Reversible: Sized {
    /// The involution `R`, which reverses the velocity.
    fn involution(self) -> Self;
}

impl OuterState {
    pub fn new(s: f64, theta: f64) -> Self {
        OuterState { s: wrap(s), theta }
    }

    pub fn is_valid(&self) -> bool {
        self.theta.abs() < FRAC_PI_2 && self.s > -PI && self.s <= PI
    }

    pub fn to_cartesian(&self) -> Ray {
        let a = self.s + PI - self.theta;
        Ray {
            point: [self.s.cos(), self.s.sin()],
            dir: [a.cos(), a.sin()],
        }
    }

    /// Inverse of [`OuterState::to_cartesian`]; the point is projected radially
    /// onto the unit circle.
    pub fn from_cartesian(ray: &Ray) -> Self {
        let s = ray.point[1].atan2(ray.point[0]);
        let a = ray.dir[1].atan2(ray.dir[0]);
        OuterState::new(s, wrap(s + PI - a))
    }
}

impl InnerState {
    pub fn new(omega: f64, beta: f64) -> Self {
        InnerState { omega: wrap(omega), beta }
    }

    pub fn is_valid(&self) -> bool {
        self.beta.abs() <= FRAC_PI_2 && self.omega > -PI && self.omega <= PI
    }

    pub fn on_boundary(&self) -> bool {
        (self.beta.abs() - FRAC_PI_2).abs() <= RESIDUAL_TOL
    }

    /// Outgoing direction angle in the plane.
    pub fn direction_angle(&self) -> f64 {
        -self.omega - self.beta
    }

    pub fn to_cartesian(&self, p: &Params) -> Ray {
        let a = self.direction_angle();
        Ray {
            point: [-p.delta + p.r * self.omega.cos(), -p.r * self.omega.sin()],
            dir: [a.cos(), a.sin()],
        }
    }

    pub fn from_cartesian(ray: &Ray, p: &Params) -> Self {
        let omega = -(ray.point[1]).atan2(ray.point[0] + p.delta);
        let a = ray.dir[1].atan2(ray.dir[0]);
        InnerState::new(omega, wrap(-omega - a))
    }

    /// Distance on the cylinder `S^1 x [-pi/2, pi/2]`.
    pub fn distance(&self, other: &InnerState) -> f64 {
        angle_diff(self.omega, other.omega).hypot(self.beta - other.beta)
    }
}

impl Reversible for OuterState {
    fn involution(self) -> Self {
        OuterState { s: self.s, theta: -self.theta }
    }
}

impl Reversible for InnerState {
    fn involution(self) -> Self {
        InnerState { omega: self.omega, beta: -self.beta }
    }
}

/// Membership predicates for the named regions.
#[derive(Debug, Clone, Copy)]
pub struct RegionSet {
    pub params: Params,
}

impl RegionSet {
    pub fn new(params: Params) -> Self {
        RegionSet { params }
    }

    /// States on the outer circle whose next chord meets the obstacle after a
    /// collision with the obstacle (`+`) or that are heading to it (`-`).
    pub fn in_m_inn_plus(&self, x: &OuterState) -> bool {
        CurveSet::new(self.params).l_plus(x).abs() <= self.params.r
    }

    pub fn in_m_inn_minus(&self, x: &OuterState) -> bool {
        CurveSet::new(self.params).l_minus(x).abs() <= self.params.r
    }

    pub fn in_h_delta(&self, x: &OuterState) -> bool {
        x.theta.sin().abs() < self.params.delta * self.params.delta
    }

    pub fn in_whispering(&self, x: &OuterState) -> bool {
        x.theta.sin().abs() > self.params.delta + self.params.r
    }

    /// `-sin theta` of the incoming chord.
    pub fn h_plus_residual(&self, x: &InnerState) -> f64 {
        let Params { delta, r } = self.params;
        delta * (x.omega - x.beta).sin() + r * x.beta.sin()
    }

    /// `sin theta` of the outgoing chord: the obstacle-to-table equations give
    /// `sin theta = delta sin(omega + beta) - r sin beta`.
    pub fn h_minus_residual(&self, x: &InnerState) -> f64 {
        let Params { delta, r } = self.params;
        delta * (x.omega + x.beta).sin() - r * x.beta.sin()
    }

    pub fn in_h_plus(&self, x: &InnerState) -> bool {
        self.h_plus_residual(x).abs() < self.params.delta * self.params.delta
    }

    pub fn in_h_minus(&self, x: &InnerState) -> bool {
        self.h_minus_residual(x).abs() < self.params.delta * self.params.delta
    }
}

/// Implicit functions of the named curves.
#[derive(Debug, Clone, Copy)]
pub struct CurveSet {
    pub params: Params,
}

impl CurveSet {
    pub fn new(params: Params) -> Self {
        CurveSet { params }
    }

    pub fn l0(&self, x: &InnerState) -> f64 {
        x.beta
    }

    pub fn l_plus(&self, x: &OuterState) -> f64 {
        x.theta.sin() + self.params.delta * (x.theta + x.s).sin()
    }

    pub fn l_minus(&self, x: &OuterState) -> f64 {
        x.theta.sin() + self.params.delta * (x.theta - x.s).sin()
    }

    pub fn on_l0(&self, x: &InnerState) -> bool {
        self.l0(x).abs() <= RESIDUAL_TOL
    }

    pub fn on_l_plus(&self, x: &OuterState) -> bool {
        self.l_plus(x).abs() <= RESIDUAL_TOL
    }

    pub fn on_l_minus(&self, x: &OuterState) -> bool {
        self.l_minus(x).abs() <= RESIDUAL_TOL
    }
}

/// Limit lines of the strips: `omega + beta = c` (stable, decreasing) and
/// `omega - beta = c` (unstable, increasing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitLine {
    Decreasing { c: f64 },
    Increasing { c: f64 },
}

impl LimitLine {
    pub fn residual(&self, x: &InnerState) -> f64 {
        match *self {
            LimitLine::Decreasing { c } => wrap(x.omega + x.beta - c),
            LimitLine::Increasing { c } => wrap(x.omega - x.beta - c),
        }
    }

    /// Distance on the cylinder from a point to the line.
    pub fn distance(&self, x: &InnerState) -> f64 {
        self.residual(x).abs() / std::f64::consts::SQRT_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
        assert!((wrap(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap(-0.3) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn params_gate() {
        assert!(Params::new(0.5, 0.2).is_ok());
        assert!(Params::new(0.5, 0.5).is_err());
        assert!(Params::new(-0.1, 0.2).is_err());
        assert!(Params::new(0.3, 0.0).is_err());
        assert!(!Params::unchecked(0.7, 0.7).in_omega());
    }

    #[test]
    fn omega_star_constants() {
        // frozen: A(0.8) and r(0.8)
        assert!((constant_a(0.8) - 0.094_427_190_999_915_86).abs() < 1e-15);
        assert!((omega_star_radius(0.8) - 6.085_781_674_279_268e-4).abs() < 1e-15);
        assert!(Params::new(0.8, 5e-4).unwrap().in_omega_star());
        assert!(!Params::new(0.8, 1e-3).unwrap().in_omega_star());
        assert!(Params::new(0.8, 1e-3).unwrap().in_cone_regime());
        assert!(!Params::new(0.6, 1e-4).unwrap().in_omega_star());
    }

    #[test]
    fn involution_examples() {
        let x = OuterState::new(0.3, 0.2).involution();
        assert_eq!((x.s, x.theta), (0.3, -0.2));
        let y = InnerState::new(PI, 0.0).involution();
        assert_eq!((y.omega, y.beta), (PI, 0.0));
    }

    #[test]
    fn cartesian_examples() {
        let p = Params::new(0.3, 0.1).unwrap();
        let ray = InnerState::new(0.0, 0.0).to_cartesian(&p);
        assert!((ray.point[0] - (-0.2)).abs() < 1e-15 && ray.point[1].abs() < 1e-15);
        assert!((ray.dir[0] - 1.0).abs() < 1e-15 && ray.dir[1].abs() < 1e-15);
        let ray = OuterState::new(0.0, 0.0).to_cartesian();
        assert!((ray.point[0] - 1.0).abs() < 1e-15);
        assert!((ray.dir[0] + 1.0).abs() < 1e-15 && ray.dir[1].abs() < 1e-15);
    }

    #[test]
    fn regions_at_fixed_points() {
        let p = Params::new(0.8, 1e-3).unwrap();
        let reg = RegionSet::new(p);
        assert!(reg.in_h_minus(&InnerState::new(0.0, 0.0)));
        assert!(reg.in_h_minus(&InnerState::new(PI, 0.0)));
        assert!(!reg.in_h_minus(&InnerState::new(FRAC_PI_2, 0.0)));
        assert!(reg.in_whispering(&OuterState::new(0.0, 1.3)));
        assert!(reg.in_m_inn_minus(&OuterState::new(0.0, 0.0)));
    }

    fn inner() -> impl Strategy<Value = InnerState> {
        (-PI..PI, -FRAC_PI_2..FRAC_PI_2).prop_map(|(w, b)| InnerState::new(w, b))
    }

    fn outer() -> impl Strategy<Value = OuterState> {
        (-PI..PI, -1.5..1.5f64).prop_map(|(s, t)| OuterState::new(s, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn involution_is_an_involution(x in inner(), y in outer()) {
            prop_assert_eq!(x.involution().involution(), x);
            prop_assert_eq!(y.involution().involution(), y);
        }

        #[test]
        fn cartesian_round_trip(x in inner(), y in outer()) {
            let p = Params::new(0.45, 0.3).unwrap();
            let back = InnerState::from_cartesian(&x.to_cartesian(&p), &p);
            prop_assert!(back.distance(&x) < 1e-12);
            let back = OuterState::from_cartesian(&y.to_cartesian());
            prop_assert!(angle_diff(back.s, y.s).abs() < 1e-12);
            prop_assert!((back.theta - y.theta).abs() < 1e-12);
        }

        #[test]
        fn involution_swaps_h_plus_and_h_minus(x in inner(), d in 0.72..0.99f64) {
            let p = Params::unchecked(d, 1e-3);
            let reg = RegionSet::new(p);
            prop_assert_eq!(reg.in_h_minus(&x), reg.in_h_plus(&x.involution()));
        }
    }
}
