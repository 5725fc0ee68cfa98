//! Workspace representation, box obstacles, point-cloud extraction, and
//! exact low-level intersection tests.
//!
//! Obstacles are closed axis-aligned boxes; touching an obstacle boundary or
//! leaving the workspace counts as collision. All operations are pure.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::str::FromStr;

/// Points and configurations are dynamically sized (2D or 3D workspaces).
pub type Point = Vec<f64>;

/// Tolerance for "cloud point lies on an obstacle boundary" validation.
pub const BOUNDARY_TOL: f64 = 1e-9;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("workspace bounds must satisfy lo < hi componentwise")]
    InvalidBounds,
    #[error("workspace dimension must be 2 or 3, got {0}")]
    InvalidDim(usize),
    #[error("obstacle half extents must be strictly positive")]
    InvalidHalfExtents,
    #[error("obstacle does not fit inside the workspace")]
    ObstacleOutOfBounds,
    #[error("obstacle placement failed after {0} attempts (configuration too dense)")]
    PlacementFailed(usize),
    #[error("scene has no obstacles")]
    NoObstacles,
    #[error("cloud size must be >= 1")]
    EmptyCloud,
    #[error("cloud point {0} does not lie on any obstacle boundary")]
    CloudPointOffBoundary(usize),
    #[error("unknown scene class `{0}` (expected simple2d or complex3d)")]
    UnknownClass(String),
    #[error("scene file version {0} unsupported (expected 1)")]
    Version(u64),
    #[error("scene file parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
}

/// Axis-aligned workspace bounds `W ⊂ R^m`, m ∈ {2, 3}.
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Workspace {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if !(lo.len() == 2 || lo.len() == 3) {
            return Err(GeometryError::InvalidDim(lo.len()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(GeometryError::InvalidBounds);
        }
        Ok(Self { lo, hi })
    }

    /// Square/cubic workspace `[lo, hi]^m`.
    pub fn symmetric(dim: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// True iff `p` lies inside the closed workspace box.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// Closed axis-aligned box obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub center: Vec<f64>,
    pub half_extents: Vec<f64>,
}

impl BoxObstacle {
    pub fn new(center: Vec<f64>, half_extents: Vec<f64>) -> Result<Self, GeometryError> {
        if center.len() != half_extents.len() {
            return Err(GeometryError::DimMismatch {
                expected: center.len(),
                got: half_extents.len(),
            });
        }
        if half_extents.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(GeometryError::InvalidHalfExtents);
        }
        Ok(Self { center, half_extents })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Closed-set membership: boundary contact counts as inside.
    pub fn contains(&self, p: &[f64]) -> bool {
        self.center
            .iter()
            .zip(&self.half_extents)
            .zip(p)
            .all(|((c, h), x)| (x - c).abs() <= *h)
    }

    fn fits_in(&self, ws: &Workspace) -> bool {
        self.center
            .iter()
            .zip(&self.half_extents)
            .zip(ws.lo.iter().zip(&ws.hi))
            .all(|((c, h), (lo, hi))| c - h >= *lo && c + h <= *hi)
    }

    /// Signed max-coordinate distance to the boundary; zero exactly on it.
    fn boundary_gap(&self, p: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(&self.half_extents)
            .zip(p)
            .map(|((c, h), x)| (x - c).abs() - h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Perimeter in 2D, surface area in 3D.
    pub fn boundary_measure(&self) -> f64 {
        let h = &self.half_extents;
        match h.len() {
            2 => 4.0 * (h[0] + h[1]),
            3 => 8.0 * (h[0] * h[1] + h[1] * h[2] + h[2] * h[0]),
            _ => unreachable!("obstacle dimension is validated to 2 or 3"),
        }
    }
}

/// A workspace with obstacles and the point cloud sampled from their surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    workspace: Workspace,
    obstacles: Vec<BoxObstacle>,
    cloud: Vec<Point>,
    seed: u64,
}

impl Scene {
    /// Validates dimensions, that obstacles fit in the workspace, and that
    /// every cloud point lies on some obstacle boundary (tolerance 1e-9).
    pub fn new(
        workspace: Workspace,
        obstacles: Vec<BoxObstacle>,
        cloud: Vec<Point>,
        seed: u64,
    ) -> Result<Self, GeometryError> {
        let dim = workspace.dim();
        for ob in &obstacles {
            if ob.dim() != dim {
                return Err(GeometryError::DimMismatch { expected: dim, got: ob.dim() });
            }
            if !ob.fits_in(&workspace) {
                return Err(GeometryError::ObstacleOutOfBounds);
            }
        }
        for (i, p) in cloud.iter().enumerate() {
            if p.len() != dim {
                return Err(GeometryError::DimMismatch { expected: dim, got: p.len() });
            }
            let on_some = obstacles.iter().any(|ob| ob.boundary_gap(p).abs() <= BOUNDARY_TOL);
            if !on_some {
                return Err(GeometryError::CloudPointOffBoundary(i));
            }
        }
        Ok(Self { workspace, obstacles, cloud, seed })
    }

    /// Obstacle-free scene, useful for trivially connectable test problems.
    pub fn empty(workspace: Workspace) -> Self {
        Self { workspace, obstacles: Vec::new(), cloud: Vec::new(), seed: 0 }
    }

    pub fn dim(&self) -> usize {
        self.workspace.dim()
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn obstacles(&self) -> &[BoxObstacle] {
        &self.obstacles
    }

    pub fn cloud(&self) -> &[Point] {
        &self.cloud
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Scene family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneClass {
    Simple2d,
    Complex3d,
}

impl FromStr for SceneClass {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple2d" => Ok(Self::Simple2d),
            "complex3d" => Ok(Self::Complex3d),
            other => Err(GeometryError::UnknownClass(other.to_string())),
        }
    }
}

/// Procedural generator parameters for one scene class. Defaults mirror the
/// obstacle density of the reference scene families; everything is
/// overridable from the run config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneGenConfig {
    pub class: SceneClass,
    pub n_obstacles: usize,
    /// Half side length of each (square/cubic) obstacle.
    pub half_extent: f64,
    pub cloud_points: usize,
    pub lo: f64,
    pub hi: f64,
}

impl SceneGenConfig {
    /// 7 square obstacles of side 5 in `[-20, 20]^2`, 1400 cloud points.
    pub fn simple2d() -> Self {
        Self {
            class: SceneClass::Simple2d,
            n_obstacles: 7,
            half_extent: 2.5,
            cloud_points: 1400,
            lo: -20.0,
            hi: 20.0,
        }
    }

    /// 10 cubes of side 5 in `[-20, 20]^3`, 1000 cloud points.
    pub fn complex3d() -> Self {
        Self {
            class: SceneClass::Complex3d,
            n_obstacles: 10,
            half_extent: 2.5,
            cloud_points: 1000,
            lo: -20.0,
            hi: 20.0,
        }
    }

    pub fn for_class(class: SceneClass) -> Self {
        match class {
            SceneClass::Simple2d => Self::simple2d(),
            SceneClass::Complex3d => Self::complex3d(),
        }
    }

    pub fn dim(&self) -> usize {
        match self.class {
            SceneClass::Simple2d => 2,
            SceneClass::Complex3d => 3,
        }
    }
}

/// Generate a scene deterministically from `(config, seed)`. Obstacles may
/// overlap each other but always fit inside the workspace.
pub fn generate_scene(config: &SceneGenConfig, seed: u64) -> Result<Scene, GeometryError> {
    if config.n_obstacles == 0 {
        return Err(GeometryError::NoObstacles);
    }
    let dim = config.dim();
    let workspace = Workspace::symmetric(dim, config.lo, config.hi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut obstacles = Vec::with_capacity(config.n_obstacles);
    for _ in 0..config.n_obstacles {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let center: Vec<f64> =
                (0..dim).map(|_| rng.gen_range(config.lo..config.hi)).collect();
            let ob = BoxObstacle::new(center, vec![config.half_extent; dim])?;
            if ob.fits_in(&workspace) {
                obstacles.push(ob);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(GeometryError::PlacementFailed(MAX_PLACEMENT_ATTEMPTS));
        }
    }

    let cloud = sample_cloud_with(&obstacles, dim, config.cloud_points, &mut rng)?;
    Scene::new(workspace, obstacles, cloud, seed)
}

/// Sample `n` points on obstacle surfaces: each point picks an obstacle with
/// probability proportional to its boundary measure, then a uniform location
/// on that boundary.
pub fn sample_cloud(
    obstacles: &[BoxObstacle],
    dim: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Point>, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_cloud_with(obstacles, dim, n, &mut rng)
}

fn sample_cloud_with(
    obstacles: &[BoxObstacle],
    dim: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Point>, GeometryError> {
    if obstacles.is_empty() {
        return Err(GeometryError::NoObstacles);
    }
    if n == 0 {
        return Err(GeometryError::EmptyCloud);
    }
    let weights: Vec<f64> = obstacles.iter().map(BoxObstacle::boundary_measure).collect();
    let total: f64 = weights.iter().sum();

    let mut cloud = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.gen_range(0.0..total);
        let mut idx = obstacles.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                idx = i;
                break;
            }
            u -= w;
        }
        let ob = &obstacles[idx];
        let p = match dim {
            2 => sample_on_rect_boundary(ob, rng),
            3 => sample_on_box_surface(ob, rng),
            _ => unreachable!("dimension validated to 2 or 3"),
        };
        cloud.push(p);
    }
    Ok(cloud)
}

fn sample_on_rect_boundary(ob: &BoxObstacle, rng: &mut impl Rng) -> Point {
    let (cx, cy) = (ob.center[0], ob.center[1]);
    let (hx, hy) = (ob.half_extents[0], ob.half_extents[1]);
    // Edge picked proportionally to its length: bottom, top, left, right.
    let perimeter = 4.0 * (hx + hy);
    let u = rng.gen_range(0.0..perimeter);
    let t = rng.gen_range(-1.0..1.0f64);
    if u < 2.0 * hx {
        vec![cx + t * hx, cy - hy]
    } else if u < 4.0 * hx {
        vec![cx + t * hx, cy + hy]
    } else if u < 4.0 * hx + 2.0 * hy {
        vec![cx - hx, cy + t * hy]
    } else {
        vec![cx + hx, cy + t * hy]
    }
}

fn sample_on_box_surface(ob: &BoxObstacle, rng: &mut impl Rng) -> Point {
    let h = &ob.half_extents;
    // Face areas per axis pair; two opposite faces each.
    let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
    let total: f64 = 2.0 * 4.0 * areas.iter().sum::<f64>();
    let mut u = rng.gen_range(0.0..total);
    let t1 = rng.gen_range(-1.0..1.0f64);
    let t2 = rng.gen_range(-1.0..1.0f64);
    for axis in 0..3 {
        for side in [-1.0, 1.0] {
            let face = 4.0 * areas[axis];
            if u < face {
                let mut p = ob.center.clone();
                p[axis] += side * h[axis];
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                p[a] += t1 * h[a];
                p[b] += t2 * h[b];
                return p;
            }
            u -= face;
        }
    }
    // Floating-point edge: u landed exactly on the total; use the last face.
    let mut p = ob.center.clone();
    p[2] += h[2];
    p[0] += t1 * h[0];
    p[1] += t2 * h[1];
    p
}

/// True iff `p` lies inside any closed obstacle or outside the workspace.
pub fn point_in_obstacle(p: &[f64], scene: &Scene) -> bool {
    if !scene.workspace.contains(p) {
        return true;
    }
    scene.obstacles.iter().any(|ob| ob.contains(p))
}

/// Exact slab test: true iff the closed segment `[a, b]` intersects any
/// obstacle volume or exits the workspace. Tangent contact counts.
pub fn segment_hits_obstacle(a: &[f64], b: &[f64], scene: &Scene) -> bool {
    // The workspace is convex, so the segment stays inside iff both endpoints do.
    if !scene.workspace.contains(a) || !scene.workspace.contains(b) {
        return true;
    }
    scene.obstacles.iter().any(|ob| segment_intersects_box(a, b, ob))
}

fn segment_intersects_box(a: &[f64], b: &[f64], ob: &BoxObstacle) -> bool {
    let mut t_min = 0.0f64;
    let mut t_max = 1.0f64;
    for k in 0..a.len() {
        let lo = ob.center[k] - ob.half_extents[k];
        let hi = ob.center[k] + ob.half_extents[k];
        let d = b[k] - a[k];
        if d == 0.0 {
            if a[k] < lo || a[k] > hi {
                return false;
            }
        } else {
            let (t1, t2) = ((lo - a[k]) / d, (hi - a[k]) / d);
            let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            t_min = t_min.max(t1);
            t_max = t_max.min(t2);
            if t_min > t_max {
                return false;
            }
        }
    }
    true
}

/// SAT test for an oriented rectangle against the scene (2D only): true iff
/// the rectangle overlaps any obstacle or exits the workspace.
pub fn rect_hits_obstacle(
    center: &[f64],
    half_extents: &[f64],
    angle: f64,
    scene: &Scene,
) -> bool {
    assert_eq!(scene.dim(), 2, "oriented rectangle test requires a 2D scene");
    let (cos, sin) = (angle.cos(), angle.sin());
    let (hx, hy) = (half_extents[0], half_extents[1]);
    let corners: [[f64; 2]; 4] = [
        [center[0] + cos * hx - sin * hy, center[1] + sin * hx + cos * hy],
        [center[0] - cos * hx - sin * hy, center[1] - sin * hx + cos * hy],
        [center[0] - cos * hx + sin * hy, center[1] - sin * hx - cos * hy],
        [center[0] + cos * hx + sin * hy, center[1] + sin * hx - cos * hy],
    ];
    if corners.iter().any(|c| !scene.workspace.contains(c)) {
        return true;
    }
    scene
        .obstacles
        .iter()
        .any(|ob| rect_intersects_box((cos, sin), &corners, ob))
}

fn rect_intersects_box((cos, sin): (f64, f64), corners: &[[f64; 2]; 4], ob: &BoxObstacle) -> bool {
    // Axes: world x/y (box normals) and the rectangle's local axes.
    let axes = [[1.0, 0.0], [0.0, 1.0], [cos, sin], [-sin, cos]];
    for axis in axes {
        let mut r_min = f64::INFINITY;
        let mut r_max = f64::NEG_INFINITY;
        for c in corners {
            let q = c[0] * axis[0] + c[1] * axis[1];
            r_min = r_min.min(q);
            r_max = r_max.max(q);
        }
        let b_center = ob.center[0] * axis[0] + ob.center[1] * axis[1];
        let b_half = ob.half_extents[0] * axis[0].abs() + ob.half_extents[1] * axis[1].abs();
        if r_max < b_center - b_half || r_min > b_center + b_half {
            return false;
        }
    }
    true
}

// --- Scene file format ------------------------------------------------------
//
// UTF-8 JSON with fixed field order and floats printed with 17 significant
// digits so identical scenes serialize to identical bytes.

fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

fn fmt_vec(v: &[f64]) -> String {
    let mut s = String::from("[");
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&fmt_f64(*x));
    }
    s.push(']');
    s
}

impl Scene {
    /// Serialize with the fixed schema
    /// `{version, dim, lo, hi, seed, obstacles, cloud}`; byte-stable.
    pub fn to_json_string(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{{\"version\":1,\"dim\":{},\"lo\":{},\"hi\":{},\"seed\":{},",
            self.dim(),
            fmt_vec(&self.workspace.lo),
            fmt_vec(&self.workspace.hi),
            self.seed
        );
        s.push_str("\"obstacles\":[");
        for (i, ob) in self.obstacles.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(
                s,
                "\n{{\"center\":{},\"half_extents\":{}}}",
                fmt_vec(&ob.center),
                fmt_vec(&ob.half_extents)
            );
        }
        s.push_str("],\"cloud\":[");
        for (i, p) in self.cloud.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push('\n');
            s.push_str(&fmt_vec(p));
        }
        s.push_str("]}\n");
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, GeometryError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| GeometryError::Parse("not an object".into()))?;

        let version = obj
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| GeometryError::Parse("missing version".into()))?;
        if version != 1 {
            return Err(GeometryError::Version(version));
        }
        let dim = obj
            .get("dim")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| GeometryError::Parse("missing dim".into()))? as usize;
        let lo = parse_f64_array(obj.get("lo"), "lo")?;
        let hi = parse_f64_array(obj.get("hi"), "hi")?;
        let seed = obj
            .get("seed")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| GeometryError::Parse("missing seed".into()))?;
        if lo.len() != dim || hi.len() != dim {
            return Err(GeometryError::Parse("bounds length disagrees with dim".into()));
        }

        let mut obstacles = Vec::new();
        for ob in obj
            .get("obstacles")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| GeometryError::Parse("missing obstacles".into()))?
        {
            let ob = ob.as_object().ok_or_else(|| GeometryError::Parse("bad obstacle".into()))?;
            obstacles.push(BoxObstacle::new(
                parse_f64_array(ob.get("center"), "center")?,
                parse_f64_array(ob.get("half_extents"), "half_extents")?,
            )?);
        }

        let mut cloud = Vec::new();
        for p in obj
            .get("cloud")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| GeometryError::Parse("missing cloud".into()))?
        {
            cloud.push(parse_f64_array(Some(p), "cloud point")?);
        }

        Scene::new(Workspace::new(lo, hi)?, obstacles, cloud, seed)
    }
}

fn parse_f64_array(
    value: Option<&serde_json::Value>,
    what: &str,
) -> Result<Vec<f64>, GeometryError> {
    value
        .and_then(serde_json::Value::as_array)
        .map(|arr| {
            arr.iter()
                .map(|x| x.as_f64().ok_or_else(|| GeometryError::Parse(format!("bad {what}"))))
                .collect()
        })
        .unwrap_or_else(|| Err(GeometryError::Parse(format!("missing {what}"))))
}
