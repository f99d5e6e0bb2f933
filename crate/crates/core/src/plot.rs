//! Bare-bones SVG charts: lines, colored scatter points and text.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

enum Mark {
    Line(Vec<(f64, f64)>, String),
    Point(f64, f64, String),
    Text(f64, f64, String),
}

pub struct SvgPlot {
    title: String,
    x_label: String,
    y_label: String,
    bounds: Option<(f64, f64, f64, f64)>,
    marks: Vec<Mark>,
    legend: Vec<(String, String)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl SvgPlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            bounds: None,
            marks: Vec::new(),
            legend: Vec::new(),
        }
    }

    pub fn with_bounds(mut self, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        self.bounds = Some((x0, x1, y0, y1));
        self
    }

    pub fn line(&mut self, points: &[(f64, f64)], color: &str) {
        self.marks.push(Mark::Line(points.to_vec(), color.to_string()));
    }

    pub fn point(&mut self, x: f64, y: f64, color: &str) {
        self.marks.push(Mark::Point(x, y, color.to_string()));
    }

    pub fn label(&mut self, x: f64, y: f64, text: &str) {
        self.marks.push(Mark::Text(x, y, text.to_string()));
    }

    pub fn legend_entry(&mut self, name: &str, color: &str) {
        self.legend.push((name.to_string(), color.to_string()));
    }

    fn data_bounds(&self) -> (f64, f64, f64, f64) {
        if let Some(b) = self.bounds {
            return b;
        }
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut see = |x: f64, y: f64| {
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
            b.2 = b.2.min(y);
            b.3 = b.3.max(y);
        };
        for m in &self.marks {
            match m {
                Mark::Line(pts, _) => pts.iter().for_each(|&(x, y)| see(x, y)),
                Mark::Point(x, y, _) => see(*x, *y),
                Mark::Text(..) => {}
            }
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let span = if hi > lo { hi - lo } else { 1.0 };
            (lo - 0.05 * span, hi + 0.05 * span)
        };
        let (x0, x1) = pad(b.0, b.1);
        let (y0, y1) = pad(b.2, b.3);
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.data_bounds();
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                sx(fx),
                HEIGHT - MARGIN + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
        }
        for m in &self.marks {
            match m {
                Mark::Line(pts, color) => {
                    let path: Vec<String> = pts
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                        path.join(" ")
                    );
                }
                Mark::Point(x, y, color) => {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.8"/>"#,
                        sx(*x),
                        sy(*y)
                    );
                }
                Mark::Text(x, y, text) => {
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                        sx(*x),
                        sy(*y),
                        escape(text)
                    );
                }
            }
        }
        for (i, (name, color)) in self.legend.iter().enumerate() {
            let y = MARGIN + 16.0 + 16.0 * i as f64;
            let x = WIDTH - MARGIN - 110.0;
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{}" r="4" fill="{color}"/>"#, y - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 10.0, escape(name));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}
