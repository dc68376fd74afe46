//! Slice overlays: projected points in red, fitted models in blue, on metric
//! axes with equal scales.

use std::fmt::Write as _;
use std::path::Path;

use stemfit::fitting::{CircleModel, EllipseModel, Point2d};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Overlay {
    Circle(CircleModel),
    Ellipse(EllipseModel),
}

const PLOT: f64 = 480.0;
const LEFT: f64 = 72.0;
const TOP: f64 = 32.0;
const RIGHT: f64 = 16.0;
const BOTTOM: f64 = 56.0;
const POINT_RADIUS: f64 = 1.5;

/// Data-to-pixel mapping for a square window.
struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: &[Point2d], models: &[Overlay]) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        let mut grow = |x: f64, y: f64, r: f64| {
            lo[0] = lo[0].min(x - r);
            lo[1] = lo[1].min(y - r);
            hi[0] = hi[0].max(x + r);
            hi[1] = hi[1].max(y + r);
        };
        for p in points {
            grow(p.x, p.y, 0.0);
        }
        for m in models {
            match m {
                Overlay::Circle(c) => grow(c.center.x, c.center.y, c.radius),
                Overlay::Ellipse(e) => grow(e.center.x, e.center.y, e.semi_major),
            }
        }
        let half = (0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1])).max(1e-6) * 1.1;
        let (cx, cy) = (0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]));
        Frame { x0: cx - half, y1: cy + half, scale: PLOT / (2.0 * half) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) * self.scale
    }

    fn py(&self, y: f64) -> f64 {
        TOP + (self.y1 - y) * self.scale
    }

    fn span(&self) -> (f64, f64) {
        (self.x0, self.x0 + PLOT / self.scale)
    }
}

/// Ticks at 1, 2 or 5 times a power of ten, about five per axis.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

/// Renders the overlay as an SVG document.
pub fn overlay_svg(points: &[Point2d], models: &[Overlay], title: Option<&str>) -> Result<String, HarnessError> {
    if points.is_empty() {
        return Err(HarnessError::EmptyPlot);
    }
    let f = Frame::fit(points, models);
    let (w, h) = (LEFT + PLOT + RIGHT, TOP + PLOT + BOTTOM);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if let Some(t) = title {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
            LEFT + PLOT / 2.0,
            escape(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );

    let (lo, hi) = f.span();
    let (tx, dec) = ticks(lo, hi);
    let _ = writeln!(s, r#"<g class="axis" font-family="sans-serif" font-size="11" stroke="none" fill="black">"#);
    for t in &tx {
        let x = f.px(*t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.dec$}</text>"#,
            TOP + PLOT,
            TOP + PLOT + 5.0,
            TOP + PLOT + 18.0,
        );
    }
    let (ylo, yhi) = (f.y1 - PLOT / f.scale, f.y1);
    let (ty, dec) = ticks(ylo, yhi);
    for t in &ty {
        let y = f.py(*t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.dec$}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x [m]</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 42.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">y [m]</text>"#,
        TOP + PLOT / 2.0,
        TOP + PLOT / 2.0
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g fill="red" stroke="none">"#);
    for p in points {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="{POINT_RADIUS}"/>"#,
            f.px(p.x),
            f.py(p.y)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g fill="none" stroke="blue" stroke-width="1.5">"#);
    for m in models {
        match m {
            Overlay::Circle(c) => {
                let _ = writeln!(
                    s,
                    r#"<circle class="model" cx="{:.2}" cy="{:.2}" r="{:.2}"/>"#,
                    f.px(c.center.x),
                    f.py(c.center.y),
                    c.radius * f.scale
                );
            }
            Overlay::Ellipse(e) => {
                let (cx, cy) = (f.px(e.center.x), f.py(e.center.y));
                // The y axis points down in SVG, so the rotation flips sign.
                let _ = writeln!(
                    s,
                    r#"<ellipse class="model" cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}" transform="rotate({:.3} {cx:.2} {cy:.2})" stroke-dasharray="6 3"/>"#,
                    e.semi_major * f.scale,
                    e.semi_minor * f.scale,
                    -e.rotation.to_degrees()
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_overlay_svg(
    points: &[Point2d],
    models: &[Overlay],
    title: Option<&str>,
    path: &Path,
) -> Result<(), HarnessError> {
    let svg = overlay_svg(points, models, title)?;
    std::fs::write(path, svg).map_err(|e| HarnessError::io(path, e))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
