//! Minimal SVG charts. Coordinates are printed with fixed precision so the
//! files are reproducible.

use std::f64::consts::PI;
use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 640.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Doc {
    body: String,
    legend: Vec<String>,
}

impl Doc {
    fn new() -> Self {
        Self {
            body: String::new(),
            legend: Vec::new(),
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            d.trim_end()
        );
    }

    fn dot(&mut self, (x, y): (f64, f64), r: f64, color: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}"/>"#);
    }

    fn text(&mut self, (x, y): (f64, f64), s: &str, anchor: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="11" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn finish(self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}" viewBox="0 0 {W} {}">"#,
            H + 20.0 + 14.0 * self.legend.len() as f64,
            H + 20.0 + 14.0 * self.legend.len() as f64
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="18" font-size="14" font-family="sans-serif" text-anchor="middle">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        out.push_str(&self.body);
        for (i, line) in self.legend.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="10" y="{:.0}" font-size="11" font-family="sans-serif">{}</text>"#,
                H + 8.0 + 14.0 * i as f64,
                escape(line)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polar chart: `(t, θ)` is drawn at Euclidean polar coordinates `(t, θ)`.
pub struct PolarChart {
    doc: Doc,
    extent: f64,
}

impl PolarChart {
    pub fn new(extent: f64) -> Self {
        let mut c = Self {
            doc: Doc::new(),
            extent: extent.max(1e-9),
        };
        for k in 1..=4 {
            let r = c.extent * k as f64 / 4.0;
            let ring: Vec<_> = (0..=128).map(|i| c.map(r, 2.0 * PI * i as f64 / 128.0)).collect();
            c.doc.polyline(&ring, "#dddddd", 1.0);
            let label = c.map(r, 0.0);
            c.doc.text((label.0, label.1 + 12.0), &format!("t = {r:.3}"), "middle");
        }
        let (a, b) = (c.map(c.extent, 0.0), c.map(c.extent, PI));
        c.doc.polyline(&[a, b], "#eeeeee", 1.0);
        let pole = c.map(0.0, 0.0);
        c.doc.dot(pole, 3.0, "black");
        c.doc.legend.push("chart: (t, θ) drawn at Euclidean polar coordinates (t, θ); lengths are not to scale".into());
        c
    }

    fn map(&self, t: f64, theta: f64) -> (f64, f64) {
        let k = 0.45 * W.min(H) / self.extent;
        (W / 2.0 + k * t * theta.cos(), 30.0 + H / 2.0 - k * t * theta.sin())
    }

    /// Polyline through `(t, θ)` samples, cut where `t` leaves the extent.
    pub fn path(&mut self, pts: &[(f64, f64)], series: usize) {
        let mapped: Vec<_> = pts
            .iter()
            .take_while(|p| p.0 <= self.extent)
            .map(|&(t, th)| self.map(t, th))
            .collect();
        self.doc.polyline(&mapped, PALETTE[series % PALETTE.len()], 0.8);
    }

    pub fn point(&mut self, t: f64, theta: f64, series: usize) {
        if t <= self.extent {
            let p = self.map(t, theta);
            self.doc.dot(p, 2.5, PALETTE[series % PALETTE.len()]);
        }
    }

    pub fn legend(&mut self, line: impl Into<String>) {
        self.doc.legend.push(line.into());
    }

    pub fn finish(self, title: &str) -> String {
        self.doc.finish(title)
    }
}

/// Line plot of one or more `(x, y)` series.
pub struct LinePlot {
    series: Vec<(Vec<(f64, f64)>, bool)>,
    legend: Vec<String>,
    x_label: String,
    y_label: String,
}

impl LinePlot {
    pub fn new(x_label: &str, y_label: &str) -> Self {
        Self {
            series: Vec::new(),
            legend: Vec::new(),
            x_label: x_label.into(),
            y_label: y_label.into(),
        }
    }

    pub fn series(&mut self, pts: Vec<(f64, f64)>, markers: bool, label: impl Into<String>) {
        self.legend.push(format!("{}: {}", PALETTE[self.series.len() % PALETTE.len()], label.into()));
        self.series.push((pts, markers));
    }

    pub fn finish(self, title: &str) -> String {
        let all = self.series.iter().flat_map(|s| s.0.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-12 {
            y1 = y0 + 1.0;
        }
        let (l, r, t, b) = (60.0, W - 20.0, 40.0, H - 40.0);
        let map = |x: f64, y: f64| (l + (x - x0) / (x1 - x0) * (r - l), b - (y - y0) / (y1 - y0) * (b - t));
        let mut doc = Doc::new();
        doc.polyline(&[(l, t), (l, b), (r, b)], "black", 1.0);
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            doc.text((map(fx, y0).0, b + 14.0), &format!("{fx:.3}"), "middle");
            doc.text((l - 4.0, map(x0, fy).1 + 4.0), &format!("{fy:.3}"), "end");
        }
        doc.text(((l + r) / 2.0, b + 30.0), &self.x_label, "middle");
        doc.text((l, t - 8.0), &self.y_label, "start");
        for (i, (pts, markers)) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mapped: Vec<_> = pts.iter().map(|&(x, y)| map(x, y)).collect();
            doc.polyline(&mapped, color, 1.5);
            if *markers {
                for p in &mapped {
                    doc.dot(*p, 3.0, color);
                }
            }
        }
        doc.legend = self.legend;
        doc.finish(title)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_chart_is_well_formed() {
        let mut c = PolarChart::new(2.0);
        c.path(&[(1.0, 0.0), (1.5, 1.0), (3.0, 2.0)], 0);
        c.point(1.0, PI, 1);
        let s = c.finish("a < b");
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert!(s.contains("Euclidean polar coordinates"));
    }

    #[test]
    fn line_plot_handles_a_single_point() {
        let mut p = LinePlot::new("R", "m(R)");
        p.series(vec![(1.0, 1.0)], true, "m");
        assert!(p.finish("x").contains("<circle"));
    }
}
