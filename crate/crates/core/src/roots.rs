//! Scalar root finding: bracketing scans, bisection and a few helpers.

/// Bisection on `[a, b]` with `f(a) f(b) <= 0`, to an interval width of `tol`
/// or until the floating-point midpoint stops moving.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    let fb = f(b);
    if fb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= tol || mid == a || mid == b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Like [`bisect`] but returns the final bracket, for callers that need to
/// know on which side of a discontinuity each end lies.
pub fn bisect_bracket<F: FnMut(f64) -> bool>(mut inside: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    // invariant: inside(a) = true, inside(b) = false
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= tol || mid == a || mid == b {
            break;
        }
        if inside(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    (a, b)
}

/// All roots of `f` in `[lo, hi]` found by sign changes on a uniform grid of
/// `panels` panels followed by bisection. Grid values that are exactly zero are
/// returned as roots.
pub fn scan_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize, tol: f64) -> Vec<f64> {
    let h = (hi - lo) / panels as f64;
    let xs: Vec<f64> = (0..=panels).map(|i| lo + h * i as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..panels {
        if vs[i] == 0.0 {
            out.push(xs[i]);
        } else if vs[i + 1] != 0.0 && (vs[i] < 0.0) != (vs[i + 1] < 0.0) {
            out.push(bisect(&f, xs[i], xs[i + 1], tol));
        }
    }
    if vs[panels] == 0.0 {
        out.push(xs[panels]);
    }
    out
}

/// Newton iteration with a central-difference derivative, falling back to
/// `None` when it does not converge to `|f| <= ftol` within `iters` steps.
pub fn newton_fd<F: Fn(f64) -> f64>(f: F, x0: f64, h: f64, ftol: f64, iters: usize) -> Option<f64> {
    let mut x = x0;
    for _ in 0..iters {
        let v = f(x);
        if !v.is_finite() {
            return None;
        }
        if v.abs() <= ftol {
            return Some(x);
        }
        let d = (f(x + h) - f(x - h)) / (2.0 * h);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        x -= v / d;
    }
    let v = f(x);
    (v.abs() <= ftol).then_some(x)
}

/// Expands a bracket around `x0` in steps growing geometrically from `h`
/// until `f` changes sign, searching both directions. Returns `(a, b)` with a
/// sign change, `a < b`.
pub fn expand_bracket<F: Fn(f64) -> f64>(f: F, x0: f64, h: f64, limit: f64) -> Option<(f64, f64)> {
    let f0 = f(x0);
    if f0 == 0.0 {
        return Some((x0, x0));
    }
    let mut step = h;
    let (mut lo, mut hi) = (x0, x0);
    while step <= limit {
        let a = x0 - step;
        let b = x0 + step;
        let fa = f(a);
        let fb = f(b);
        if (fb < 0.0) != (f0 < 0.0) || fb == 0.0 {
            return Some((hi, b));
        }
        if (fa < 0.0) != (f0 < 0.0) || fa == 0.0 {
            return Some((a, lo));
        }
        lo = a;
        hi = b;
        step *= 2.0;
    }
    None
}
