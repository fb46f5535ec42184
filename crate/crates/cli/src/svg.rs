//! Minimal SVG figures: geodesics over the fundamental domain, the
//! displacement heatmap and horosphere polylines.

use std::fmt::Write as _;

use lortorus::ProfileFn;

const PANEL: f64 = 400.0;
const MARGIN: f64 = 40.0;
const STRIP: f64 = 80.0;

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{stroke}" stroke-width="{width}" points="{}"/>"#,
            coords.join(" ")
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, extra: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"{extra}/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12">{s}</text>"#
        );
    }

    fn finish(self, title: &str) -> String {
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
                "\n<!-- lortorus {v} -->\n<title>{t}</title>\n",
                r#"<rect width="100%" height="100%" fill="white"/>"#,
                "\n{b}</svg>\n"
            ),
            w = self.width,
            h = self.height,
            v = env!("CARGO_PKG_VERSION"),
            t = title,
            b = self.body
        )
    }
}

/// Map from `(x, t) ∈ [0, 1]²` to panel pixels, `t` upwards.
fn to_panel(top: f64) -> impl Fn(f64, f64) -> (f64, f64) {
    move |x, t| (MARGIN + x * PANEL, top + (1.0 - t) * PANEL)
}

fn frame(svg: &mut Svg, top: f64) {
    svg.rect(MARGIN, top, PANEL, PANEL, "none", r#" stroke="black""#);
    svg.text(MARGIN + PANEL / 2.0 - 4.0, top + PANEL + 24.0, "x");
    svg.text(MARGIN - 24.0, top + PANEL / 2.0, "t");
}

/// Profile strip `f(x)` over one period, drawn above the panel.
fn profile_strip(svg: &mut Svg, f: &ProfileFn) {
    let (lo, hi) = (f.f_min(), f.f_max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pts: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let x = i as f64 / 200.0;
            let y = (f.value(x) - lo) / span;
            (MARGIN + x * PANEL, MARGIN + (1.0 - y) * (STRIP - 20.0))
        })
        .collect();
    svg.rect(MARGIN, MARGIN - 4.0, PANEL, STRIP - 12.0, "#f4f4f4", "");
    svg.polyline(&pts, "#444444", 1.5);
    svg.text(MARGIN + PANEL + 6.0, MARGIN + 10.0, "f(x)");
}

/// Splits a curve on the universal cover into pieces inside the
/// fundamental domain `[0, 1)²`.
fn wrap(points: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    let mut pieces = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    let mut cell = None;
    for &(t, x) in points {
        let here = (t.floor() as i64, x.floor() as i64);
        if cell != Some(here) && !current.is_empty() {
            pieces.push(std::mem::take(&mut current));
        }
        cell = Some(here);
        current.push((x - x.floor(), t - t.floor()));
    }
    if !current.is_empty() {
        pieces.push(current);
    }
    pieces
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Geodesic curves `(t, x)` reduced to the fundamental domain.
pub fn geodesics(f: &ProfileFn, curves: &[Vec<(f64, f64)>], title: &str) -> String {
    let mut svg = Svg::new(PANEL + 2.0 * MARGIN + 40.0, PANEL + STRIP + 2.0 * MARGIN);
    profile_strip(&mut svg, f);
    let top = MARGIN + STRIP;
    let map = to_panel(top);
    for (i, curve) in curves.iter().enumerate() {
        for piece in wrap(curve) {
            let pts: Vec<(f64, f64)> = piece.iter().map(|&(x, t)| map(x, t)).collect();
            svg.polyline(&pts, PALETTE[i % PALETTE.len()], 1.2);
        }
    }
    frame(&mut svg, top);
    svg.finish(title)
}

/// Two-stop colour ramp from dark blue to yellow.
fn ramp(s: f64) -> String {
    let s = if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * s).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(40.0, 250.0),
        lerp(20.0, 230.0),
        lerp(110.0, 30.0)
    )
}

/// Heatmap of a row-major `n_t × n_x` field with the maximum locus of `f`
/// outlined.
pub fn heatmap(f: &ProfileFn, n_t: usize, n_x: usize, values: &[f64], title: &str) -> String {
    let mut svg = Svg::new(PANEL + 2.0 * MARGIN + 40.0, PANEL + STRIP + 2.0 * MARGIN);
    profile_strip(&mut svg, f);
    let top = MARGIN + STRIP;
    let map = to_panel(top);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (PANEL / n_x as f64, PANEL / n_t as f64);
    for i_t in 0..n_t {
        for i_x in 0..n_x {
            let v = values[i_t * n_x + i_x];
            let (x, y) = map(i_x as f64 / n_x as f64, (i_t + 1) as f64 / n_t as f64);
            svg.rect(x, y, w + 0.05, h + 0.05, &ramp((v - lo) / span), "");
        }
    }
    for &(a, b) in f.max_locus() {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b > a {
            let (x, y) = map(a, 1.0);
            svg.rect(
                x,
                y,
                (b - a) * PANEL,
                PANEL,
                "none",
                r#" stroke="white" stroke-width="2" stroke-dasharray="6 4""#,
            );
        }
    }
    frame(&mut svg, top);
    svg.text(MARGIN, top + PANEL + 36.0, &format!("min {lo:.6}  max {hi:.6}"));
    svg.finish(title)
}

/// Horosphere polylines `t(x)` with the vertical ray at `x₀`.
pub fn horospheres(levels: &[(f64, Vec<(f64, f64)>)], ray_x: f64, ray_t: (f64, f64), title: &str) -> String {
    let mut svg = Svg::new(PANEL + 2.0 * MARGIN + 60.0, PANEL + 2.0 * MARGIN);
    let xs = levels.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).chain([ray_x]);
    let ts = levels
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.1))
        .chain([ray_t.0, ray_t.1]);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (t0, t1) = ts.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (sx, st) = ((x1 - x0).max(1e-9), (t1 - t0).max(1e-9));
    let map = |x: f64, t: f64| (MARGIN + (x - x0) / sx * PANEL, MARGIN + (1.0 - (t - t0) / st) * PANEL);
    svg.polyline(&[map(ray_x, ray_t.0), map(ray_x, ray_t.1)], "#000000", 2.0);
    for (i, (level, pts)) in levels.iter().enumerate() {
        let line: Vec<(f64, f64)> = pts.iter().map(|&(x, t)| map(x, t)).collect();
        svg.polyline(&line, PALETTE[i % PALETTE.len()], 1.5);
        if let Some(&(x, y)) = line.last() {
            svg.text(x + 4.0, y, &format!("b = {level}"));
        }
    }
    svg.rect(MARGIN, MARGIN, PANEL, PANEL, "none", r#" stroke="black""#);
    svg.text(MARGIN + PANEL / 2.0 - 4.0, MARGIN + PANEL + 24.0, "x");
    svg.text(MARGIN - 24.0, MARGIN + PANEL / 2.0, "t");
    svg.finish(title)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping_splits_at_cell_edges() {
        let pieces = wrap(&[(0.1, 0.8), (0.5, 0.95), (0.7, 1.05), (1.2, 1.3)]);
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[0].len(), 2);
        assert!((pieces[1][0].0 - 0.05).abs() < 1e-12);
    }

    #[test]
    fn figures_are_well_formed() {
        let f = ProfileFn::theorem_plateau(0.5).unwrap();
        let g = geodesics(&f, &[vec![(0.0, 0.5), (1.0, 0.5)]], "test");
        assert!(g.starts_with("<svg") && g.ends_with("</svg>\n"));
        let h = heatmap(&f, 2, 2, &[1.0, 2.0, 1.0, 2.0], "map");
        assert_eq!(h.matches("<rect").count(), 1 + 1 + 4 + 1 + 1);
    }
}
