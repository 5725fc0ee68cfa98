//! Deterministic SVG rendering of scenes, paths, and sampled
//! next-configuration scatters. 3D scenes project onto the x-y plane.

use mnp_core::geometry::Scene;
use mnp_core::robots::Path;
use std::fmt::Write as _;

const CANVAS: f64 = 640.0;
const OBSTACLE_FILL: &str = "#9b7bd4";
const CLOUD_FILL: &str = "#9aa0a6";
const SAMPLE_FILL: &str = "#1f77b4";
const INIT_FILL: &str = "#1f77b4";
const GOAL_FILL: &str = "#d62728";
const PATH_COLORS: [&str; 4] = ["#2ca02c", "#ff7f0e", "#17becf", "#e377c2"];

/// Everything one frame can show. Configurations are projected to their
/// first two coordinates (the base position for manipulators).
#[derive(Debug, Default)]
pub struct VizInput {
    pub paths: Vec<Path>,
    pub samples: Vec<Vec<f64>>,
    pub init: Option<Vec<f64>>,
    pub goal: Option<Vec<f64>>,
}

fn project(p: &[f64]) -> [f64; 2] {
    [p[0], p[1]]
}

struct Mapper {
    lo: [f64; 2],
    scale: f64,
    hi_y: f64,
}

impl Mapper {
    fn new(scene: &Scene) -> Self {
        let ws = scene.workspace();
        let lo = [ws.lo()[0], ws.lo()[1]];
        let span = (ws.hi()[0] - ws.lo()[0]).max(ws.hi()[1] - ws.lo()[1]);
        Self { lo, scale: CANVAS / span, hi_y: ws.hi()[1] }
    }

    fn x(&self, x: f64) -> f64 {
        (x - self.lo[0]) * self.scale
    }

    /// SVG y grows downward; flip so the workspace reads naturally.
    fn y(&self, y: f64) -> f64 {
        (self.hi_y - y) * self.scale
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Render one frame. Identical inputs produce identical bytes.
pub fn render_svg(scene: &Scene, input: &VizInput) -> String {
    render_svg_with_meta(scene, input, &[])
}

/// `render_svg` with key/value metadata embedded as an XML comment, so CLI
/// outputs can carry their config and input hashes.
pub fn render_svg_with_meta(scene: &Scene, input: &VizInput, meta: &[(String, String)]) -> String {
    let m = Mapper::new(scene);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS
    );
    for (k, v) in meta {
        let _ = writeln!(svg, "<!-- {k}: {v} -->");
    }
    let _ = writeln!(svg, r#"<rect width="{c}" height="{c}" fill="white"/>"#, c = CANVAS);

    for ob in scene.obstacles() {
        let c = project(&ob.center);
        let h = project(&ob.half_extents);
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{OBSTACLE_FILL}"/>"#,
            fmt(m.x(c[0] - h[0])),
            fmt(m.y(c[1] + h[1])),
            fmt(2.0 * h[0] * m.scale),
            fmt(2.0 * h[1] * m.scale),
        );
    }

    for p in scene.cloud() {
        let q = project(p);
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="1.5" fill="{CLOUD_FILL}"/>"#,
            fmt(m.x(q[0])),
            fmt(m.y(q[1])),
        );
    }

    for (idx, path) in input.paths.iter().enumerate() {
        let color = PATH_COLORS[idx % PATH_COLORS.len()];
        let pts: Vec<[f64; 2]> = path.waypoints.iter().map(|c| project(&c.0)).collect();
        if pts.len() == 2 {
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
                fmt(m.x(pts[0][0])),
                fmt(m.y(pts[0][1])),
                fmt(m.x(pts[1][0])),
                fmt(m.y(pts[1][1])),
            );
        } else if pts.len() > 2 {
            let coords: Vec<String> =
                pts.iter().map(|p| format!("{},{}", fmt(m.x(p[0])), fmt(m.y(p[1])))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
                coords.join(" "),
            );
        }
    }

    for s in &input.samples {
        let q = project(s);
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="2.5" fill="{SAMPLE_FILL}" fill-opacity="0.55"/>"#,
            fmt(m.x(q[0])),
            fmt(m.y(q[1])),
        );
    }

    for (point, fill) in
        [(input.init.as_ref(), INIT_FILL), (input.goal.as_ref(), GOAL_FILL)]
    {
        if let Some(p) = point {
            let q = project(p);
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="6" fill="{fill}" stroke="black" stroke-width="1"/>"#,
                fmt(m.x(q[0])),
                fmt(m.y(q[1])),
            );
        }
    }

    svg.push_str("</svg>\n");
    svg
}
