//! The tangent map of `G` in closed form and its finite-difference oracle.
//!
//! Rows of `DG` are `(d omega_1, d beta_1)`, columns `(d omega_0, d beta_0)`.
//! With `phi_0 = -omega_0 - beta_0`, `phi_1 = -omega_1 + beta_1` and
//! `zeta_i = delta cos(phi_i) / cos(theta)`:
//!
//! ```text
//! a21  = -(cos theta / (r cos beta_1)) (zeta_0 + zeta_1 + 2 (m+1) zeta_0 zeta_1)
//! ~a11 = 1 + 2 (m+1) zeta_0
//! ~a22 = (cos beta_0 / cos beta_1) (1 + 2 (m+1) zeta_1)
//! ~a12 = ~a11 + ~a22 - 2 r (m+1) cos beta_0 / cos theta
//! a11 = a21 + ~a11,  a12 = a21 + ~a12,  a22 = a21 + ~a22
//! ```
//!
//! so that `det DG = cos beta_0 / cos beta_1`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flight::{g_map, ReturnRecord};
use crate::phase::{angle_diff, InnerState, Params};

const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianTerms {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub atilde11: f64,
    pub atilde22: f64,
    pub atilde12: f64,
    /// `~a11 + ~a22 - ~a12 = 2 r (m+1) cos beta0 / cos theta`, kept unrounded.
    pub closing: f64,
    pub zeta0: f64,
    pub zeta1: f64,
    pub m: usize,
    pub phi0: f64,
    pub phi1: f64,
    pub theta: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl JacobianTerms {
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a11, self.a12, self.a21, self.a22)
    }

    /// `a11 a22 - a12 a21`, expanded through the decomposition to avoid the
    /// cancellation of the `a21^2` terms.
    pub fn det(&self) -> f64 {
        self.a21 * self.closing + self.atilde11 * self.atilde22
    }

    /// `a11 a22 - a12 a21` evaluated literally.
    pub fn det_naive(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn expected_det(&self) -> f64 {
        self.beta0.cos() / self.beta1.cos()
    }
}

pub fn dg_analytic(rec: &ReturnRecord, p: &Params) -> Result<JacobianTerms> {
    let theta = rec.theta();
    debug_assert!(rec.last.theta == theta);
    let (b0, b1) = (rec.start.beta, rec.end.beta);
    let (ct, c0, c1) = (theta.cos(), b0.cos(), b1.cos());
    if ct.abs() < DEGENERATE || c1.abs() < DEGENERATE {
        return Err(Error::Degenerate(format!("cos theta = {ct:e}, cos beta1 = {c1:e}")));
    }
    let phi0 = -rec.start.omega - b0;
    let phi1 = -rec.end.omega + b1;
    let zeta0 = p.delta * phi0.cos() / ct;
    let zeta1 = p.delta * phi1.cos() / ct;
    let k = 2.0 * (rec.m as f64 + 1.0);
    let a21 = -(ct / (p.r * c1)) * (zeta0 + zeta1 + k * zeta0 * zeta1);
    let atilde11 = 1.0 + k * zeta0;
    let atilde22 = (c0 / c1) * (1.0 + k * zeta1);
    let closing = k * p.r * c0 / ct;
    let atilde12 = atilde11 + atilde22 - closing;
    Ok(JacobianTerms {
        a11: a21 + atilde11,
        a12: a21 + atilde12,
        a21,
        a22: a21 + atilde22,
        atilde11,
        atilde22,
        atilde12,
        closing,
        zeta0,
        zeta1,
        m: rec.m,
        phi0,
        phi1,
        theta,
        beta0: b0,
        beta1: b1,
    })
}

/// Central differences of `G` with step `h`, fourth order.
pub fn dg_numeric(x: InnerState, p: &Params, h: f64) -> Result<Matrix2<f64>> {
    let base = g_map(x, p)?;
    let eval = |dw: f64, db: f64| -> Result<ReturnRecord> {
        let y = InnerState { omega: x.omega + dw, beta: x.beta + db };
        if y.beta.abs() > PI / 2.0 {
            return Err(Error::ComponentChange(format!("stencil leaves M_inn at {y:?}")));
        }
        let rec = g_map(InnerState::new(y.omega, y.beta), p)?;
        if rec.m != base.m {
            return Err(Error::ComponentChange(format!(
                "return time {} at {:?} differs from {}",
                rec.nu(),
                y,
                base.nu()
            )));
        }
        Ok(rec)
    };
    // five-point stencil: (8 (f(h) - f(-h)) - (f(2h) - f(-2h))) / 12h
    let column = |dir: [f64; 2]| -> Result<[f64; 2]> {
        let at = |k: f64| eval(k * h * dir[0], k * h * dir[1]);
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        let diff = |a: &ReturnRecord, b: &ReturnRecord| [angle_diff(a.end.omega, b.end.omega), a.end.beta - b.end.beta];
        let (d1, d2) = (diff(&p1, &m1), diff(&p2, &m2));
        Ok([0, 1].map(|i| (8.0 * d1[i] - d2[i]) / (12.0 * h)))
    };
    let c0 = column([1.0, 0.0])?;
    let c1 = column([0.0, 1.0])?;
    Ok(Matrix2::new(c0[0], c1[0], c0[1], c1[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhichFixedPoint {
    /// `(0, 0)`, the segment between the circles on the near side.
    Center,
    /// `(pi, 0)`, the segment on the far side.
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub which: WhichFixedPoint,
    pub trace: f64,
    pub class: Stability,
}

pub fn classify_trace(trace: f64) -> Stability {
    let t = trace.abs();
    if (t - 2.0).abs() <= 1e-9 {
        Stability::Parabolic
    } else if t < 2.0 {
        Stability::Elliptic
    } else {
        Stability::Hyperbolic
    }
}

/// Only the local geometry of the period-two segment is used, so `p` may sit
/// on or past `r + delta = 1` as long as the obstacle stays inside the table
/// along that segment.
pub fn fixed_point_stability(which: WhichFixedPoint, p: &Params) -> Result<StabilityReport> {
    let w = match which {
        WhichFixedPoint::Center => 0.0,
        WhichFixedPoint::Far => PI,
    };
    let rec = g_map(InnerState::new(w, 0.0), p)?;
    let terms = dg_analytic(&rec, p)?;
    let trace = terms.trace();
    Ok(StabilityReport { which, trace, class: classify_trace(trace) })
}

/// Product `DG(x_{n-1}) ... DG(x_0)` along a list of records.
pub fn product(records: &[ReturnRecord], p: &Params) -> Result<Matrix2<f64>> {
    let mut m = Matrix2::identity();
    for rec in records {
        m = dg_analytic(rec, p)?.matrix() * m;
    }
    Ok(m)
}
