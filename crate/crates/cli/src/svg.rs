//! Minimal SVG plots of the obstacle cylinder `(omega, beta)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write;

const W: f64 = 800.0;
const H: f64 = 400.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn x(omega: f64) -> f64 {
    (omega + PI) / (2.0 * PI) * W
}

fn y(beta: f64) -> f64 {
    (FRAC_PI_2 - beta) / PI * H
}

pub struct Plot {
    body: String,
}

impl Plot {
    pub fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r##"<rect width="{W}" height="{H}" fill="white" stroke="black"/>"##);
        let _ = writeln!(body, r##"<line x1="0" y1="{0}" x2="{W}" y2="{0}" stroke="#bbb"/>"##, y(0.0));
        let _ = writeln!(body, r##"<line x1="{0}" y1="0" x2="{0}" y2="{H}" stroke="#bbb"/>"##, x(0.0));
        let _ = writeln!(body, r#"<text x="6" y="16" font-size="13" font-family="sans-serif">{}</text>"#, escape(title));
        Plot { body }
    }

    pub fn points(&mut self, pts: impl IntoIterator<Item = (f64, f64)>, series: usize) {
        let c = PALETTE[series % PALETTE.len()];
        for (w, b) in pts {
            let _ = writeln!(self.body, r#"<circle cx="{:.2}" cy="{:.2}" r="0.8" fill="{c}"/>"#, x(w), y(b));
        }
    }

    /// Breaks the line where it wraps around the cylinder.
    pub fn polyline(&mut self, pts: &[(f64, f64)], series: usize) {
        let c = PALETTE[series % PALETTE.len()];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, body: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(body, r#"<polyline fill="none" stroke="{c}" stroke-width="1" points="{}"/>"#, run.join(" "));
            }
            run.clear();
        };
        for (i, &(w, b)) in pts.iter().enumerate() {
            if i > 0 && (w - pts[i - 1].0).abs() > PI {
                flush(&mut run, &mut self.body);
            }
            run.push(format!("{:.2},{:.2}", x(w), y(b)));
        }
        flush(&mut run, &mut self.body);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n{}</svg>\n",
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
