//! Static log-log plots.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    /// `(slope, intercept)` of `ln y = intercept + slope ln x`.
    pub fit: Option<(f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Slope band drawn as a wedge through the first fitted line's centre.
    pub band: Option<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> String {
        let usable: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
            .map(|(x, y)| (x.log10(), y.log10()))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = usable.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
        );
        if usable.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        x0 = x0.floor();
        x1 = x1.ceil().max(x0 + 1.0);
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
        let px = |lx: f64| LEFT + (lx - x0) / (x1 - x0) * (W - LEFT - RIGHT);
        let py = |ly: f64| H - BOTTOM - (ly - y0) / (y1 - y0) * (H - TOP - BOTTOM);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        for d in (x0 as i32)..=(x1 as i32) {
            let x = px(d as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">1e{d}</text>"##,
                H - BOTTOM,
                H - BOTTOM + 16.0
            );
        }
        for d in (y0 as i32)..=(y1 as i32) {
            let y = py(d as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">1e{d}</text>"##,
                W - RIGHT,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 18.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.1})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            esc(&self.y_label)
        );
        let _ = writeln!(s, r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}"/></clipPath>"#, W - LEFT - RIGHT, H - TOP - BOTTOM);

        if let (Some((lo, hi)), Some(first)) = (self.band, self.series.iter().find(|s| s.fit.is_some())) {
            let (slope, intercept) = first.fit.unwrap();
            let logs: Vec<f64> = first.points.iter().filter(|p| p.0 > 0.0).map(|p| p.0.log10()).collect();
            if !logs.is_empty() {
                let cx = logs.iter().sum::<f64>() / logs.len() as f64;
                let cy = (intercept + slope * cx * std::f64::consts::LN_10) / std::f64::consts::LN_10;
                let lo = lo.max(-50.0);
                let hi = hi.min(50.0);
                let at = |m: f64, x: f64| cy + m * (x - cx);
                let _ = writeln!(
                    s,
                    r##"<polygon clip-path="url(#plot)" points="{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}" fill="#4a90d9" fill-opacity="0.12" stroke="none"/>"##,
                    px(x0), py(at(lo, x0)), px(x1), py(at(lo, x1)), px(x1), py(at(hi, x1)), px(x0), py(at(hi, x0))
                );
            }
        }

        for (i, series) in self.series.iter().enumerate() {
            for &(x, y) in &series.points {
                if x > 0.0 && y > 0.0 && y.is_finite() {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{}"/>"#,
                        px(x.log10()),
                        py(y.log10()),
                        series.color
                    );
                }
            }
            if let Some((slope, intercept)) = series.fit {
                let ln = std::f64::consts::LN_10;
                let f = |lx: f64| (intercept + slope * lx * ln) / ln;
                let _ = writeln!(
                    s,
                    r#"<line clip-path="url(#plot)" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-dasharray="6 4"/>"#,
                    px(x0),
                    py(f(x0)),
                    px(x1),
                    py(f(x1)),
                    series.color
                );
            }
            let label = match series.fit {
                Some((slope, _)) => format!("{} (slope {slope:.3})", series.label),
                None => series.label.clone(),
            };
            let ly = TOP + 18.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
                W - RIGHT - 220.0,
                ly - 4.0,
                series.color,
                W - RIGHT - 210.0,
                ly,
                esc(&label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_document() {
        let plot = Plot {
            title: "a < b".into(),
            x_label: "N".into(),
            y_label: "err".into(),
            series: vec![Series {
                label: "coeff_err".into(),
                color: "#c0392b",
                points: vec![(100.0, 1e-2), (1000.0, 1e-3), (10000.0, 0.0)],
                fit: Some((-1.0, (1.0f64).ln())),
            }],
            band: Some((-1.4, -0.6)),
        };
        let svg = plot.render();
        assert!(svg.starts_with("<?xml"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("<polygon"));
        assert_eq!(svg, plot.render());
    }
}
