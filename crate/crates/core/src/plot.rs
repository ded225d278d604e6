//! Static SVG scatter of Phase-1, Phase-2 and merged fronts.

use std::fmt::Write as _;

use crate::moea::ObjectiveVector;

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Points to draw; objectives are `(nonzero weights, error)`.
#[derive(Debug, Clone, Default)]
pub struct FrontPlot {
    pub title: String,
    pub phase1: Vec<ObjectiveVector>,
    pub phase2: Vec<ObjectiveVector>,
    pub merged: Vec<ObjectiveVector>,
    pub heavy: Option<ObjectiveVector>,
    pub light: Option<ObjectiveVector>,
}

struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
}

/// Tick step from {1, 2, 5} x 10^k giving at most about `target` ticks.
fn nice_axis(lo: f64, hi: f64, target: usize) -> Axis {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    Axis {
        lo: start,
        hi: end,
        ticks: (0..=n).map(|i| start + i as f64 * step).collect(),
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

impl FrontPlot {
    fn all_points(&self) -> impl Iterator<Item = &ObjectiveVector> {
        self.phase1
            .iter()
            .chain(&self.phase2)
            .chain(&self.merged)
            .chain(self.heavy.iter())
            .chain(self.light.iter())
    }

    pub fn to_svg(&self) -> String {
        let finite = |v: f64| v.is_finite();
        let xs: Vec<f64> = self.all_points().map(|p| p.f1).filter(|v| finite(*v)).collect();
        let ys: Vec<f64> = self.all_points().map(|p| p.f2).filter(|v| finite(*v)).collect();
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let xa = if xs.is_empty() { nice_axis(0.0, 1.0, 6) } else { nice_axis(min(&xs).min(0.0), max(&xs), 6) };
        let ya = if ys.is_empty() { nice_axis(0.0, 1.0, 5) } else { nice_axis(min(&ys).min(0.0), max(&ys), 5) };
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let px = |x: f64| LEFT + (x - xa.lo) / (xa.hi - xa.lo) * pw;
        let py = |y: f64| TOP + ph - (y - ya.lo) / (ya.hi - ya.lo) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for &t in &xa.ticks {
            let x = px(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP,
                TOP + ph,
                TOP + ph + 18.0,
                fmt_tick(t)
            );
        }
        for &t in &ya.ticks {
            let y = py(t);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">nonzero weights</text>"#,
            LEFT + pw / 2.0,
            H - 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">error</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0
        );

        let mut merged: Vec<&ObjectiveVector> = self.merged.iter().filter(|p| finite(p.f1) && finite(p.f2)).collect();
        merged.sort_by(|a, b| a.f1.total_cmp(&b.f1));
        if merged.len() > 1 {
            let mut pts = String::new();
            for (i, p) in merged.iter().enumerate() {
                if i > 0 {
                    let _ = write!(pts, "{:.2},{:.2} ", px(p.f1), py(merged[i - 1].f2));
                }
                let _ = write!(pts, "{:.2},{:.2} ", px(p.f1), py(p.f2));
            }
            let _ = writeln!(
                s,
                r##"<polyline class="merged" points="{}" fill="none" stroke="#2ca02c" stroke-width="1.5"/>"##,
                pts.trim_end()
            );
        }
        let _ = writeln!(s, r#"<g class="phase1">"#);
        for p in self.phase1.iter().filter(|p| finite(p.f1) && finite(p.f2)) {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#1f77b4" fill-opacity="0.8"/>"##,
                px(p.f1),
                py(p.f2)
            );
        }
        let _ = writeln!(s, "</g>\n<g class=\"phase2\">");
        for p in self.phase2.iter().filter(|p| finite(p.f1) && finite(p.f2)) {
            let _ = writeln!(s, r##"<path d="{}" fill="#ff7f0e" fill-opacity="0.8"/>"##, triangle(px(p.f1), py(p.f2)));
        }
        let _ = writeln!(s, "</g>\n<g class=\"anchors\">");
        for (name, p) in [("heavy", self.heavy), ("light", self.light)] {
            if let Some(p) = p.filter(|p| finite(p.f1) && finite(p.f2)) {
                let (x, y) = (px(p.f1), py(p.f2));
                let _ = writeln!(
                    s,
                    r##"<path d="{}" fill="none" stroke="#d62728" stroke-width="2"/><text x="{:.2}" y="{:.2}" fill="#d62728">{name}</text>"##,
                    diamond(x, y),
                    x + 8.0,
                    y - 8.0
                );
            }
        }
        let _ = writeln!(s, "</g>");

        let lx = W - RIGHT + 15.0;
        let ly = TOP + 10.0;
        let _ = writeln!(
            s,
            r##"<g class="legend"><circle cx="{lx}" cy="{ly}" r="4" fill="#1f77b4"/><text x="{}" y="{}">phase 1</text>"##,
            lx + 12.0,
            ly + 4.0
        );
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="#ff7f0e"/><text x="{}" y="{}">phase 2</text>"##,
            triangle(lx, ly + 20.0),
            lx + 12.0,
            ly + 24.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#2ca02c" stroke-width="1.5"/><text x="{}" y="{}">merged front</text>"##,
            lx - 5.0,
            ly + 40.0,
            lx + 5.0,
            ly + 40.0,
            lx + 12.0,
            ly + 44.0
        );
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="#d62728" stroke-width="2"/><text x="{}" y="{}">anchors</text></g>"##,
            diamond(lx, ly + 60.0),
            lx + 12.0,
            ly + 64.0
        );
        s.push_str("</svg>\n");
        s
    }
}

fn triangle(x: f64, y: f64) -> String {
    format!("M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z", x, y - 5.0, x + 5.0, y + 4.0, x - 5.0, y + 4.0)
}

fn diamond(x: f64, y: f64) -> String {
    format!(
        "M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z",
        x,
        y - 7.0,
        x + 7.0,
        y,
        x,
        y + 7.0,
        x - 7.0,
        y
    )
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(a: f64, b: f64) -> ObjectiveVector {
        ObjectiveVector::new(a, b)
    }

    #[test]
    fn svg_is_well_formed_with_all_series() {
        let plot = FrontPlot {
            title: "fronts <seed 1> & more".into(),
            phase1: vec![ov(100.0, 0.1), ov(50.0, 0.3)],
            phase2: vec![ov(60.0, 0.15), ov(70.0, 0.12), ov(65.0, 0.13)],
            merged: vec![ov(100.0, 0.1), ov(60.0, 0.15), ov(50.0, 0.3)],
            heavy: Some(ov(100.0, 0.1)),
            light: Some(ov(50.0, 0.3)),
        };
        let svg = plot.to_svg();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let count = |class: &str, tag: &str| {
            doc.descendants()
                .find(|n| n.attribute("class") == Some(class))
                .map(|g| g.children().filter(|c| c.has_tag_name(tag)).count())
                .unwrap_or(0)
        };
        assert_eq!(count("phase1", "circle"), 2);
        assert_eq!(count("phase2", "path"), 3);
        assert_eq!(count("anchors", "path"), 2);
        let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
        assert!(texts.contains(&"nonzero weights"));
        assert!(texts.contains(&"error"));
        assert!(texts.contains(&"fronts <seed 1> & more"));
    }

    #[test]
    fn empty_plot_still_parses() {
        let svg = FrontPlot::default().to_svg();
        roxmltree::Document::parse(&svg).unwrap();
    }

    #[test]
    fn axis_covers_range_with_round_steps() {
        let a = nice_axis(0.0, 20352.0, 6);
        assert!(a.lo <= 0.0 && a.hi >= 20352.0);
        assert_eq!(a.ticks[1] - a.ticks[0], 5000.0);
        let b = nice_axis(0.0, 0.0, 5);
        assert!(b.hi > b.lo);
    }
}
