//! Minimal static SVG charts: line series with optional bands, scatter
//! layers and polylines in data coordinates.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

enum Layer {
    Line { xs: Vec<f64>, ys: Vec<f64>, color: String, label: Option<String> },
    Band { xs: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>, color: String },
    Scatter { pts: Vec<[f64; 2]>, color: String, radius: f64 },
}

pub struct Plot {
    title: String,
    xlabel: String,
    ylabel: String,
    log_x: bool,
    equal_aspect: bool,
    layers: Vec<Layer>,
}

impl Plot {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Self {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            log_x: false,
            equal_aspect: false,
            layers: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    /// Same scale on both axes (for spatial plots).
    pub fn equal_aspect(mut self) -> Self {
        self.equal_aspect = true;
        self
    }

    pub fn line(&mut self, xs: &[f64], ys: &[f64], color: &str, label: Option<&str>) {
        self.layers.push(Layer::Line {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            color: color.into(),
            label: label.map(Into::into),
        });
    }

    pub fn band(&mut self, xs: &[f64], lo: &[f64], hi: &[f64], color: &str) {
        self.layers.push(Layer::Band {
            xs: xs.to_vec(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            color: color.into(),
        });
    }

    pub fn scatter(&mut self, pts: impl IntoIterator<Item = [f64; 2]>, color: &str, radius: f64) {
        self.layers.push(Layer::Scatter {
            pts: pts.into_iter().collect(),
            color: color.into(),
            radius,
        });
    }

    fn tx(&self, x: f64) -> f64 {
        if self.log_x {
            x.log10()
        } else {
            x
        }
    }

    fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let mut xr = [f64::INFINITY, f64::NEG_INFINITY];
        let mut yr = [f64::INFINITY, f64::NEG_INFINITY];
        let mut add = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                xr = [xr[0].min(x), xr[1].max(x)];
                yr = [yr[0].min(y), yr[1].max(y)];
            }
        };
        for l in &self.layers {
            match l {
                Layer::Line { xs, ys, .. } => xs.iter().zip(ys).for_each(|(&x, &y)| add(self.tx(x), y)),
                Layer::Band { xs, lo, hi, .. } => {
                    for i in 0..xs.len() {
                        add(self.tx(xs[i]), lo[i]);
                        add(self.tx(xs[i]), hi[i]);
                    }
                }
                Layer::Scatter { pts, .. } => pts.iter().for_each(|p| add(self.tx(p[0]), p[1])),
            }
        }
        if !xr[0].is_finite() {
            return ([0.0, 1.0], [0.0, 1.0]);
        }
        for r in [&mut xr, &mut yr] {
            if r[1] - r[0] < 1e-12 {
                r[0] -= 0.5;
                r[1] += 0.5;
            }
            let pad = 0.05 * (r[1] - r[0]);
            r[0] -= pad;
            r[1] += pad;
        }
        if self.equal_aspect {
            let (sx, sy) = (xr[1] - xr[0], yr[1] - yr[0]);
            let want = (W - 2.0 * MARGIN) / (H - 2.0 * MARGIN);
            if sx / sy < want {
                let c = 0.5 * (xr[0] + xr[1]);
                xr = [c - 0.5 * sy * want, c + 0.5 * sy * want];
            } else {
                let c = 0.5 * (yr[0] + yr[1]);
                yr = [c - 0.5 * sx / want, c + 0.5 * sx / want];
            }
        }
        (xr, yr)
    }

    pub fn render(&self) -> String {
        let (xr, yr) = self.extent();
        let px = |x: f64| MARGIN + (self.tx(x) - xr[0]) / (xr[1] - xr[0]) * (W - 2.0 * MARGIN);
        let py = |y: f64| H - MARGIN - (y - yr[0]) / (yr[1] - yr[0]) * (H - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * MARGIN,
            H - 2.0 * MARGIN
        );
        for i in 0..=4 {
            let fx = xr[0] + (xr[1] - xr[0]) * i as f64 / 4.0;
            let fy = yr[0] + (yr[1] - yr[0]) * i as f64 / 4.0;
            let label_x = if self.log_x { 10f64.powf(fx) } else { fx };
            let x = MARGIN + (W - 2.0 * MARGIN) * i as f64 / 4.0;
            let y = H - MARGIN - (H - 2.0 * MARGIN) * i as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - MARGIN + 16.0, tick(label_x));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{}</text>"#, MARGIN - 6.0, tick(fy));
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(&self.ylabel)
        );
        let mut legend = 0;
        for l in &self.layers {
            match l {
                Layer::Band { xs, lo, hi, color } => {
                    let mut pts: Vec<String> = xs.iter().zip(hi).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                    pts.extend(xs.iter().zip(lo).rev().map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))));
                    let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, pts.join(" "));
                }
                Layer::Line { xs, ys, color, label } => {
                    let pts: Vec<String> = xs
                        .iter()
                        .zip(ys)
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
                        .collect();
                    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
                    if let Some(label) = label {
                        let y = MARGIN + 14.0 + 16.0 * legend as f64;
                        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" fill="{color}">{}</text>"#, MARGIN + 8.0, escape(label));
                        legend += 1;
                    }
                }
                Layer::Scatter { pts, color, radius } => {
                    for p in pts {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}"/>"#, px(p[0]), py(p[1]));
                    }
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
