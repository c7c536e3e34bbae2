//! Minimal SVG 1.1 charts.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// `(low, high)` per point.
    pub error_bars: Option<Vec<(f64, f64)>>,
    pub color: String,
    pub dashed: bool,
    pub markers: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, color: &str) -> Self {
        Self {
            name: name.into(),
            points,
            error_bars: None,
            color: color.to_string(),
            dashed: false,
            markers: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn axis_labels(out: &mut String, x_label: &str, y_label: &str) {
    let cx = (LEFT + WIDTH - RIGHT) / 2.0;
    let cy = (TOP + HEIGHT - BOTTOM) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>
<text x="18" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 18 {cy:.1})">{}</text>"#,
        HEIGHT - 14.0,
        escape(x_label),
        escape(y_label)
    );
}

impl LinePlot {
    pub fn render(&self) -> String {
        let tf = |y: f64| if self.log_y { y.log10() } else { y };
        let usable = |y: f64| y.is_finite() && (!self.log_y || y > 0.0);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for (i, &(x, y)) in s.points.iter().enumerate() {
                if x.is_finite() {
                    xs.push(x);
                }
                if usable(y) {
                    ys.push(tf(y));
                }
                if let Some(bars) = &s.error_bars {
                    for v in [bars[i].0, bars[i].1] {
                        if usable(v) {
                            ys.push(tf(v));
                        }
                    }
                }
            }
        }
        let range = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = range(&xs);
        let (mut y0, mut y1) = range(&ys);
        let pad = 0.05 * (y1 - y0);
        y0 -= pad;
        y1 += pad;

        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + (1.0 - (tf(y) - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        header(&mut out, &self.title);
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );
        for i in 0..=5 {
            let xv = x0 + (x1 - x0) * i as f64 / 5.0;
            let x = px(xv);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 19.0,
                tick_label(xv)
            );
        }
        let y_ticks: Vec<f64> = if self.log_y {
            (y0.ceil() as i32..=y1.floor() as i32)
                .map(|e| 10f64.powi(e))
                .collect()
        } else {
            (0..=5).map(|i| y0 + (y1 - y0) * i as f64 / 5.0).collect()
        };
        for yv in y_ticks {
            let y = py(yv);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="#333"/><line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT + pw,
                LEFT - 8.0,
                y + 4.0,
                tick_label(yv)
            );
        }
        axis_labels(&mut out, &self.x_label, &self.y_label);

        for (si, s) in self.series.iter().enumerate() {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && usable(*y))
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let dash = if s.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
                pts.join(" "),
                s.color
            );
            if let Some(bars) = &s.error_bars {
                for (&(x, _), &(lo, hi)) in s.points.iter().zip(bars) {
                    if usable(lo) && usable(hi) {
                        let xp = px(x);
                        let _ = writeln!(
                            out,
                            r#"<path d="M{:.2},{:.2}V{:.2}M{:.2},{:.2}H{:.2}M{:.2},{:.2}H{:.2}" stroke="{}" fill="none"/>"#,
                            xp,
                            py(lo),
                            py(hi),
                            xp - 4.0,
                            py(lo),
                            xp + 4.0,
                            xp - 4.0,
                            py(hi),
                            xp + 4.0,
                            s.color
                        );
                    }
                }
            }
            if s.markers {
                for &(x, y) in &s.points {
                    if x.is_finite() && usable(y) {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="2.6" fill="{}"/>"#,
                            px(x),
                            py(y),
                            s.color
                        );
                    }
                }
            }
            let ly = TOP + 10.0 + 20.0 * si as f64;
            let lx = LEFT + pw + 14.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 22.0,
                s.color,
                lx + 28.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[iy][ix]`.
    pub values: Vec<Vec<f64>>,
    pub pass: Vec<Vec<bool>>,
    /// Color scale limits in `log10(value)`.
    pub log_range: (f64, f64),
}

/// Blue (low) to yellow (high).
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let stops = [
        (0.0, (49.0, 54.0, 149.0)),
        (0.35, (69.0, 117.0, 180.0)),
        (0.6, (171.0, 217.0, 233.0)),
        (0.8, (254.0, 224.0, 144.0)),
        (1.0, (215.0, 48.0, 39.0)),
    ];
    let mut i = 0;
    while i + 2 < stops.len() && t > stops[i + 1].0 {
        i += 1;
    }
    let (ta, ca) = stops[i];
    let (tb, cb) = stops[i + 1];
    let f = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(ca.0, cb.0),
        mix(ca.1, cb.1),
        mix(ca.2, cb.2)
    )
}

impl Heatmap {
    pub fn render(&self) -> String {
        let nx = self.xs.len().max(1);
        let ny = self.ys.len().max(1);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let cw = pw / nx as f64;
        let ch = ph / ny as f64;
        // Row 0 at the bottom.
        let cell_x = |ix: usize| LEFT + cw * ix as f64;
        let cell_y = |iy: usize| TOP + ph - ch * (iy + 1) as f64;
        let (lo, hi) = self.log_range;

        let mut out = String::new();
        header(&mut out, &self.title);
        for (iy, row) in self.values.iter().enumerate() {
            for (ix, &v) in row.iter().enumerate() {
                let t = if v > 0.0 {
                    (v.log10() - lo) / (hi - lo)
                } else {
                    0.0
                };
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{:.3e}</title></rect>"#,
                    cell_x(ix),
                    cell_y(iy),
                    cw,
                    ch,
                    color(t),
                    v
                );
            }
        }
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        // Boundary between passing and failing cells.
        let mut d = String::new();
        let pass = |ix: usize, iy: usize| self.pass[iy][ix];
        for iy in 0..ny {
            for ix in 0..nx {
                if ix + 1 < nx && pass(ix, iy) != pass(ix + 1, iy) {
                    let x = cell_x(ix + 1);
                    let _ = write!(d, "M{x:.2},{:.2}V{:.2}", cell_y(iy), cell_y(iy) + ch);
                }
                if iy + 1 < ny && pass(ix, iy) != pass(ix, iy + 1) {
                    let y = cell_y(iy);
                    let _ = write!(d, "M{:.2},{y:.2}H{:.2}", cell_x(ix), cell_x(ix) + cw);
                }
            }
        }
        if !d.is_empty() {
            let _ = writeln!(
                out,
                r#"<path d="{d}" fill="none" stroke="black" stroke-width="2.5" stroke-dasharray="5 3"/>"#
            );
        }

        for (ix, x) in self.xs.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                cell_x(ix) + cw / 2.0,
                TOP + ph + 18.0,
                tick_label(*x)
            );
        }
        for (iy, y) in self.ys.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                cell_y(iy) + ch / 2.0 + 4.0,
                tick_label(*y)
            );
        }
        axis_labels(&mut out, &self.x_label, &self.y_label);

        let bx = LEFT + pw + 20.0;
        for i in 0..20 {
            let t = i as f64 / 19.0;
            let _ = writeln!(
                out,
                r#"<rect x="{bx:.1}" y="{:.1}" width="16" height="{:.1}" fill="{}"/>"#,
                TOP + ph - (i + 1) as f64 * ph / 20.0,
                ph / 20.0 + 0.5,
                color(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">1e{lo}</text><text x="{:.1}" y="{:.1}">1e{hi}</text><text x="{:.1}" y="{:.1}">rMSE</text>"#,
            bx + 22.0,
            TOP + ph,
            bx + 22.0,
            TOP + 10.0,
            bx,
            TOP - 8.0
        );
        out.push_str("</svg>\n");
        out
    }
}
