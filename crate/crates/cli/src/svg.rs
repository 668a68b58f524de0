//! SVG 1.1 figure of a planar instance: body, hyperplanes, the homothet.

use std::f64::consts::PI;
use std::fmt::Write;

use plank::geometry::{normalize_hyperplanes, Body, BodyKind, HomothetResult, Hyperplane};
use plank::{Error, Result};

const SIZE: f64 = 480.0;
const PAD: f64 = 40.0;
const LEGEND_LINE: f64 = 18.0;
/// Points on the outline of a smooth ball.
const OUTLINE_SAMPLES: usize = 256;

/// Fixed three decimals, without a negative zero.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn outline(body: &Body) -> Vec<[f64; 2]> {
    match body.kind() {
        BodyKind::LpBall { p } if p.is_infinite() => vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]],
        BodyKind::LpBall { p } if *p == 1.0 => vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        BodyKind::LpBall { p } => (0..OUTLINE_SAMPLES)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / OUTLINE_SAMPLES as f64;
                let (s, c) = t.sin_cos();
                let r = (c.abs().powf(*p) + s.abs().powf(*p)).powf(1.0 / p);
                [c / r, s / r]
            })
            .collect(),
        BodyKind::LinearImage { base, map, .. } => outline(base)
            .into_iter()
            .map(|[x, y]| [map[(0, 0)] * x + map[(0, 1)] * y, map[(1, 0)] * x + map[(1, 1)] * y])
            .collect(),
    }
}

struct View {
    x0: f64,
    y1: f64,
    scale: f64,
    /// World-space bounds of the drawing square.
    bounds: [f64; 4],
}

impl View {
    fn fit(points: &[[f64; 2]]) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let side = (hi[0] - lo[0]).max(hi[1] - lo[1]) * 1.1;
        let cx = (lo[0] + hi[0]) / 2.0;
        let cy = (lo[1] + hi[1]) / 2.0;
        let half = side / 2.0;
        Self { x0: cx - half, y1: cy + half, scale: SIZE / side, bounds: [cx - half, cx + half, cy - half, cy + half] }
    }

    fn px(&self, p: [f64; 2]) -> (String, String) {
        (num(PAD + (p[0] - self.x0) * self.scale), num(PAD + (self.y1 - p[1]) * self.scale))
    }

    fn polygon(&self, points: &[[f64; 2]]) -> String {
        points
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x},{y}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The part of `{x : <normal, x> = offset}` inside the view, if any.
    fn clip(&self, normal: &[f64], offset: f64) -> Option<([f64; 2], [f64; 2])> {
        let nn = normal[0] * normal[0] + normal[1] * normal[1];
        let base = [normal[0] * offset / nn, normal[1] * offset / nn];
        let dir = [-normal[1], normal[0]];
        let [xmin, xmax, ymin, ymax] = self.bounds;
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for (d, p, lo, hi) in [(dir[0], base[0], xmin, xmax), (dir[1], base[1], ymin, ymax)] {
            if d.abs() < 1e-300 {
                if p < lo || p > hi {
                    return None;
                }
                continue;
            }
            let (a, b) = ((lo - p) / d, (hi - p) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        if t0 >= t1 {
            return None;
        }
        let at = |t: f64| [base[0] + t * dir[0], base[1] + t * dir[1]];
        Some((at(t0), at(t1)))
    }
}

/// Renders the figure. Output depends only on the inputs.
pub fn render(body: &Body, hyperplanes: &[Hyperplane], result: &HomothetResult) -> Result<String> {
    if body.dim() != 2 {
        return Err(Error::InvalidDimension(format!("cannot draw a body of dimension {}", body.dim())));
    }
    let normalized = normalize_hyperplanes(body, hyperplanes)?;
    let shape = outline(body);
    let view = View::fit(&shape);
    let c = [result.center[0], result.center[1]];
    let homothet: Vec<[f64; 2]> =
        shape.iter().map(|p| [c[0] + result.ratio * p[0], c[1] + result.ratio * p[1]]).collect();

    let width = SIZE + 2.0 * PAD;
    let height = width + LEGEND_LINE * (hyperplanes.len() + 1) as f64 + PAD / 2.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(width),
        h = num(height)
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, num(width), num(height));
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="none" stroke="#333333" stroke-width="1.5"/>"##,
        view.polygon(&shape)
    );
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="#4a90d9" fill-opacity="0.35" stroke="#1f5fa8" stroke-width="1"/>"##,
        view.polygon(&homothet)
    );
    for (i, (hp, nh)) in hyperplanes.iter().zip(&normalized).enumerate() {
        let Some((a, b)) = view.clip(&hp.normal, hp.offset) else { continue };
        let ((ax, ay), (bx, by)) = (view.px(a), view.px(b));
        let _ = writeln!(s, r##"<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}" stroke="#c0392b" stroke-width="1.2"/>"##);
        let _ = writeln!(
            s,
            r##"<text x="{bx}" y="{by}" font-family="sans-serif" font-size="11" fill="#c0392b">H{i}</text>"##
        );
        // Perpendicular from the center to the line, in the unit-functional scale.
        let f = &nh.functional;
        let gap = f[0] * c[0] + f[1] * c[1] - nh.level;
        let ff = f[0] * f[0] + f[1] * f[1];
        let foot = [c[0] - gap * f[0] / ff, c[1] - gap * f[1] / ff];
        let ((cx, cy), (fx, fy)) = (view.px(c), view.px(foot));
        let _ = writeln!(
            s,
            r##"<line x1="{cx}" y1="{cy}" x2="{fx}" y2="{fy}" stroke="#7f8c8d" stroke-width="0.8" stroke-dasharray="3,3"/>"##
        );
    }
    let (cx, cy) = view.px(c);
    let _ = writeln!(s, r##"<circle cx="{cx}" cy="{cy}" r="2.5" fill="#1f5fa8"/>"##);

    let mut y = width;
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">center ({}, {}), ratio 1/{}</text>"#,
        num(PAD),
        num(y),
        num(c[0]),
        num(c[1]),
        hyperplanes.len() + 1
    );
    for (i, m) in result.margins.iter().enumerate() {
        y += LEGEND_LINE;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">H{i}: margin {} (need {})</text>"#,
            num(PAD),
            num(y),
            num(*m),
            num(result.ratio)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
