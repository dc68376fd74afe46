use std::path::PathBuf;

use regex::Regex;
use stemfit::fitting::{ransac_circle, CircleModel, EllipseModel, Point2d, RansacConfig};
use stemfit::synth::{sample_cylinder_arc, ArcRange, CylinderSpec};
use stemfit_cli::svg::{overlay_svg, render_overlay_svg, Overlay};

fn ring(n: usize, cx: f64, cy: f64, r: f64) -> Vec<Point2d> {
    (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            Point2d::new(cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

fn attr(svg_element: &str, name: &str) -> f64 {
    let re = Regex::new(&format!(r#"\b{name}="([-0-9.]+)""#)).unwrap();
    re.captures(svg_element).unwrap()[1].parse().unwrap()
}

#[test]
fn ten_points_one_circle() {
    let pts = ring(10, 0.0, 0.0, 0.2);
    let circle = CircleModel { center: Point2d::new(0.0, 0.0), radius: 0.2 };
    let svg = overlay_svg(&pts, &[Overlay::Circle(circle)], None).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches(r#"class="point""#).count(), 10);
    assert_eq!(svg.matches(r#"<circle class="model""#).count(), 1);
    assert!(svg.contains(r#"fill="red""#) && svg.contains(r#"stroke="blue""#));
    assert!(svg.contains("x [m]") && svg.contains("y [m]"));
}

#[test]
fn points_only() {
    let svg = overlay_svg(&ring(7, 1.0, 2.0, 0.5), &[], Some("points")).unwrap();
    assert_eq!(svg.matches(r#"class="point""#).count(), 7);
    assert!(!svg.contains(r#"class="model""#));
    assert!(overlay_svg(&[], &[], None).is_err());
}

#[test]
fn equal_scales_on_both_axes() {
    let pts = vec![Point2d::new(0.0, 0.0), Point2d::new(2.0, 0.0), Point2d::new(0.0, 0.5)];
    let svg = overlay_svg(&pts, &[], None).unwrap();
    let glyphs: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="point""#)).collect();
    let (x0, y0) = (attr(glyphs[0], "cx"), attr(glyphs[0], "cy"));
    let dx = attr(glyphs[1], "cx") - x0;
    let dy = y0 - attr(glyphs[2], "cy");
    // 2 m across and 0.5 m up must keep a 4:1 pixel ratio, with y pointing up.
    assert!((dx / dy - 4.0).abs() < 0.01, "{dx} {dy}");
}

#[test]
fn partial_arc_circle_sits_inside_points() {
    let spec = CylinderSpec::vertical(0.4, 0.3, [0.0; 3]);
    let cloud = sample_cylinder_arc(&spec, 400, 0.005, ArcRange::from_degrees(0.0, 180.0), 3).unwrap();
    let pts: Vec<Point2d> = cloud.points().iter().map(|p| Point2d::new(p.x, p.y)).collect();
    let fit = ransac_circle(&pts, &RansacConfig { seed: 3, ..RansacConfig::default() }).unwrap();
    let svg = overlay_svg(&pts, &[Overlay::Circle(fit.model)], None).unwrap();

    let model = svg.lines().find(|l| l.contains(r#"<circle class="model""#)).unwrap();
    let (cx, cy, r) = (attr(model, "cx"), attr(model, "cy"), attr(model, "r"));
    let max_point = svg
        .lines()
        .filter(|l| l.contains(r#"class="point""#))
        .map(|l| (attr(l, "cx") - cx).hypot(attr(l, "cy") - cy))
        .fold(0.0, f64::max);
    assert!(r < max_point, "circle radius {r} vs farthest point {max_point}");
}

#[test]
fn matches_golden_file() {
    let pts = ring(12, 0.05, -0.02, 0.2);
    let models = [
        Overlay::Circle(CircleModel { center: Point2d::new(0.05, -0.02), radius: 0.2 }),
        Overlay::Ellipse(EllipseModel {
            center: Point2d::new(0.05, -0.02),
            semi_major: 0.22,
            semi_minor: 0.18,
            rotation: 0.5,
        }),
    ];
    let svg = overlay_svg(&pts, &models, Some("golden <slice>")).unwrap();
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/overlay.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &svg).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).expect("golden file; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(svg, expected);

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("o.svg");
    render_overlay_svg(&pts, &models, Some("golden <slice>"), &path).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), expected);
}
