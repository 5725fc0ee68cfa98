//! Robot models: configuration space bounds, the collision function, straight
//! line feasibility between configurations, and normalization to `[-1, 1]^d`.
//!
//! Configuration-space distance is Euclidean on normalized coordinates so a
//! single interpolation resolution is meaningful across positions and angles.

use crate::geometry::{point_in_obstacle, rect_hits_obstacle, segment_hits_obstacle, Scene, Workspace};
use serde::{Deserialize, Serialize};

/// Default interpolation resolution for `steer_to`, in normalized units.
pub const DEFAULT_DELTA_STEER: f64 = 0.01;

/// Joint angle range for link manipulators, `(-0.75π, 0.75π)`.
pub const LINK_ANGLE_LIMIT: f64 = 0.75 * std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum RobotError {
    #[error("configuration has dimension {got}, model expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("robot kind `{0}` requires a {1}D workspace")]
    WorkspaceDim(&'static str, usize),
    #[error("path must contain at least one waypoint")]
    EmptyPath,
}

/// A point in configuration space. Angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration(pub Vec<f64>);

impl Configuration {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Configuration {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Ordered list of configurations `{c_0, ..., c_l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Configuration>,
}

impl Path {
    pub fn new(waypoints: Vec<Configuration>) -> Self {
        Self { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn first(&self) -> &Configuration {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &Configuration {
        self.waypoints.last().expect("paths hold at least one waypoint")
    }
}

/// Robot geometry variants. Positional coordinates live in the workspace;
/// link manipulators use relative joint angles off a free planar base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobotKind {
    Point2d,
    Rigid2d { half_extents: [f64; 2] },
    NLink2d { link_lengths: Vec<f64> },
    Point3d,
}

impl RobotKind {
    pub fn name(&self) -> &'static str {
        match self {
            RobotKind::Point2d => "point2d",
            RobotKind::Rigid2d { .. } => "rigid2d",
            RobotKind::NLink2d { .. } => "nlink2d",
            RobotKind::Point3d => "point3d",
        }
    }
}

/// A robot model: kind plus per-dimension configuration bounds and the
/// interpolation resolution used by `steer_to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    kind: RobotKind,
    lo: Vec<f64>,
    hi: Vec<f64>,
    delta_steer: f64,
}

impl RobotModel {
    pub fn point2d(workspace: &Workspace) -> Result<Self, RobotError> {
        if workspace.dim() != 2 {
            return Err(RobotError::WorkspaceDim("point2d", 2));
        }
        Ok(Self {
            kind: RobotKind::Point2d,
            lo: workspace.lo().to_vec(),
            hi: workspace.hi().to_vec(),
            delta_steer: DEFAULT_DELTA_STEER,
        })
    }

    pub fn point3d(workspace: &Workspace) -> Result<Self, RobotError> {
        if workspace.dim() != 3 {
            return Err(RobotError::WorkspaceDim("point3d", 3));
        }
        Ok(Self {
            kind: RobotKind::Point3d,
            lo: workspace.lo().to_vec(),
            hi: workspace.hi().to_vec(),
            delta_steer: DEFAULT_DELTA_STEER,
        })
    }

    /// Rigid rectangle with pose `(x, y, θ)`, θ bounded to `[-π, π]`.
    pub fn rigid2d(workspace: &Workspace, half_extents: [f64; 2]) -> Result<Self, RobotError> {
        if workspace.dim() != 2 {
            return Err(RobotError::WorkspaceDim("rigid2d", 2));
        }
        let mut lo = workspace.lo().to_vec();
        let mut hi = workspace.hi().to_vec();
        lo.push(-std::f64::consts::PI);
        hi.push(std::f64::consts::PI);
        Ok(Self { kind: RobotKind::Rigid2d { half_extents }, lo, hi, delta_steer: DEFAULT_DELTA_STEER })
    }

    /// Planar chain with a free base `(x, y)` and `k` relative joint angles,
    /// each bounded to `(-0.75π, 0.75π)`.
    pub fn nlink2d(workspace: &Workspace, link_lengths: Vec<f64>) -> Result<Self, RobotError> {
        if workspace.dim() != 2 {
            return Err(RobotError::WorkspaceDim("nlink2d", 2));
        }
        let k = link_lengths.len();
        let mut lo = workspace.lo().to_vec();
        let mut hi = workspace.hi().to_vec();
        lo.extend(std::iter::repeat(-LINK_ANGLE_LIMIT).take(k));
        hi.extend(std::iter::repeat(LINK_ANGLE_LIMIT).take(k));
        Ok(Self { kind: RobotKind::NLink2d { link_lengths }, lo, hi, delta_steer: DEFAULT_DELTA_STEER })
    }

    /// Model with explicit bounds, for tests and custom configuration spaces.
    pub fn with_bounds(kind: RobotKind, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { kind, lo, hi, delta_steer: DEFAULT_DELTA_STEER }
    }

    pub fn set_delta_steer(&mut self, delta: f64) {
        assert!(delta > 0.0, "delta_steer must be positive");
        self.delta_steer = delta;
    }

    pub fn delta_steer(&self) -> f64 {
        self.delta_steer
    }

    pub fn kind(&self) -> &RobotKind {
        &self.kind
    }

    /// Configuration-space dimension d.
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn check_dim(&self, c: &Configuration) -> Result<(), RobotError> {
        if c.dim() != self.dim() {
            return Err(RobotError::DimMismatch { expected: self.dim(), got: c.dim() });
        }
        Ok(())
    }

    pub fn in_bounds(&self, c: &Configuration) -> bool {
        c.0.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (lo, hi))| x.is_finite() && *x >= *lo && *x <= *hi)
    }

    /// Affine map to `[-1, 1]^d`.
    pub fn normalize(&self, c: &Configuration) -> Vec<f64> {
        c.0.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
            .collect()
    }

    /// Inverse of `normalize`; does not clamp.
    pub fn denormalize(&self, v: &[f64]) -> Configuration {
        Configuration(
            v.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(n, (lo, hi))| lo + (n + 1.0) * 0.5 * (hi - lo))
                .collect(),
        )
    }

    pub fn clamp(&self, c: &Configuration) -> Configuration {
        Configuration(
            c.0.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
                .collect(),
        )
    }

    /// Euclidean distance in normalized coordinates. Allocation-free: the
    /// normalized difference per dimension is `2 (a - b) / (hi - lo)`.
    pub fn distance(&self, a: &Configuration, b: &Configuration) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.lo.len() {
            let d = 2.0 * (a.0[k] - b.0[k]) / (self.hi[k] - self.lo[k]);
            sum += d * d;
        }
        sum.sqrt()
    }

    /// Joint positions of a planar chain: base followed by each link tip.
    /// Angles are relative; all-zero angles give a straight horizontal chain.
    pub fn link_joint_positions(&self, c: &Configuration) -> Vec<[f64; 2]> {
        let RobotKind::NLink2d { link_lengths } = &self.kind else {
            panic!("link_joint_positions requires an nlink2d model");
        };
        let mut points = Vec::with_capacity(link_lengths.len() + 1);
        let mut x = c.0[0];
        let mut y = c.0[1];
        points.push([x, y]);
        let mut heading = 0.0;
        for (i, len) in link_lengths.iter().enumerate() {
            heading += c.0[2 + i];
            x += len * heading.cos();
            y += len * heading.sin();
            points.push([x, y]);
        }
        points
    }
}

/// The collision check function Φ: true means collision. Out-of-bounds
/// configurations collide by convention, which keeps C effectively bounded.
pub fn phi(model: &RobotModel, c: &Configuration, scene: &Scene) -> bool {
    debug_assert_eq!(c.dim(), model.dim(), "phi called with mismatched dimension");
    if !model.in_bounds(c) {
        return true;
    }
    match model.kind() {
        RobotKind::Point2d | RobotKind::Point3d => point_in_obstacle(&c.0, scene),
        RobotKind::Rigid2d { half_extents } => {
            rect_hits_obstacle(&c.0[..2], half_extents, c.0[2], scene)
        }
        RobotKind::NLink2d { .. } => {
            let joints = model.link_joint_positions(c);
            joints
                .windows(2)
                .any(|seg| segment_hits_obstacle(&seg[0], &seg[1], scene))
        }
    }
}

/// Straight-line feasibility: checks Φ at every interpolated configuration
/// `c1 + (i/K)(c2 - c1)` with `K = ceil(dist / δ_steer)`. True means the whole
/// segment is collision-free.
pub fn steer_to(model: &RobotModel, c1: &Configuration, c2: &Configuration, scene: &Scene) -> bool {
    let steps = (model.distance(c1, c2) / model.delta_steer()).ceil() as usize;
    let mut probe = c1.clone();
    for i in 0..=steps {
        let t = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
        for (p, (a, b)) in probe.0.iter_mut().zip(c1.0.iter().zip(&c2.0)) {
            *p = a + t * (b - a);
        }
        if phi(model, &probe, scene) {
            return false;
        }
    }
    true
}

/// Path feasibility: every waypoint passes Φ and every adjacent pair passes
/// `steer_to`.
pub fn path_feasible(model: &RobotModel, path: &Path, scene: &Scene) -> bool {
    if path.is_empty() {
        return false;
    }
    if path.waypoints.iter().any(|c| phi(model, c, scene)) {
        return false;
    }
    path.waypoints.windows(2).all(|pair| steer_to(model, &pair[0], &pair[1], scene))
}

/// Total path cost: summed configuration-space distance over adjacent pairs.
pub fn path_length(model: &RobotModel, path: &Path) -> f64 {
    path.waypoints.windows(2).map(|pair| model.distance(&pair[0], &pair[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxObstacle, SceneGenConfig};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ws2() -> Workspace {
        Workspace::symmetric(2, -20.0, 20.0).unwrap()
    }

    fn scene_with(obstacles: Vec<BoxObstacle>) -> Scene {
        Scene::new(ws2(), obstacles, vec![], 0).unwrap()
    }

    fn unit_obstacle_at(x: f64, y: f64, h: f64) -> BoxObstacle {
        BoxObstacle::new(vec![x, y], vec![h, h]).unwrap()
    }

    #[test]
    fn phi_point_examples() {
        let model = RobotModel::point2d(&ws2()).unwrap();
        let free = Scene::empty(ws2());
        assert!(!phi(&model, &Configuration(vec![0.0, 0.0]), &free));

        let scene = scene_with(vec![unit_obstacle_at(3.0, 3.0, 1.0)]);
        assert!(phi(&model, &Configuration(vec![3.0, 3.0]), &scene));
        assert!(phi(&model, &Configuration(vec![30.0, 0.0]), &scene), "out of bounds collides");
    }

    #[test]
    fn phi_two_link_passes_through_box() {
        // Straight chain (0,0)-(6,0) crosses the box x in [3,5], y in [-1,1].
        let model = RobotModel::nlink2d(&ws2(), vec![3.0, 3.0]).unwrap();
        let scene = scene_with(vec![unit_obstacle_at(4.0, 0.0, 1.0)]);
        let c = Configuration(vec![0.0, 0.0, 0.0, 0.0]);
        assert!(phi(&model, &c, &scene));

        let free = Scene::empty(ws2());
        assert!(!phi(&model, &c, &free));
    }

    #[test]
    fn nlink_straight_chain_reach() {
        let lengths = vec![1.5, 2.5, 3.0];
        let model = RobotModel::nlink2d(&ws2(), lengths.clone()).unwrap();
        let c = Configuration(vec![1.0, -2.0, 0.0, 0.0, 0.0]);
        let joints = model.link_joint_positions(&c);
        let total: f64 = lengths.iter().sum();
        assert!((joints.last().unwrap()[0] - (1.0 + total)).abs() < 1e-12);
        assert!((joints.last().unwrap()[1] - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn three_link_model_has_dim_5() {
        let model = RobotModel::nlink2d(&ws2(), vec![2.0, 2.0, 2.0]).unwrap();
        assert_eq!(model.dim(), 5);
        assert_eq!(model.lower()[2], -LINK_ANGLE_LIMIT);
        assert_eq!(model.upper()[4], LINK_ANGLE_LIMIT);
    }

    #[test]
    fn steer_to_examples() {
        let model = RobotModel::point2d(&ws2()).unwrap();
        let free = Scene::empty(ws2());
        let c = Configuration(vec![1.0, 1.0]);
        assert!(steer_to(&model, &c, &c, &free), "zero-length segment is a single check");

        let scene = scene_with(vec![unit_obstacle_at(0.0, 0.0, 1.0)]);
        assert!(!steer_to(
            &model,
            &Configuration(vec![-5.0, 0.0]),
            &Configuration(vec![5.0, 0.0]),
            &scene
        ));
    }

    #[test]
    fn steer_to_is_symmetric() {
        let model = RobotModel::point2d(&ws2()).unwrap();
        let scene = crate::geometry::generate_scene(&SceneGenConfig::simple2d(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let a = Configuration(vec![rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]);
            let b = Configuration(vec![rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]);
            assert_eq!(steer_to(&model, &a, &b, &scene), steer_to(&model, &b, &a, &scene));
        }
    }

    #[test]
    fn steer_to_agrees_with_exact_segment_test_on_fat_obstacles() {
        // With min obstacle size well above 2 * delta_steer (in raw units the
        // default 0.01 normalized step is 0.4 here, and obstacles are 5 wide),
        // the sampled check must match the exact slab test.
        let model = RobotModel::point2d(&ws2()).unwrap();
        let scene = crate::geometry::generate_scene(&SceneGenConfig::simple2d(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut disagreements = 0;
        for _ in 0..1000 {
            let a = Configuration(vec![rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]);
            let b = Configuration(vec![rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]);
            let exact_free = !crate::geometry::segment_hits_obstacle(&a.0, &b.0, &scene);
            let sampled_free = steer_to(&model, &a, &b, &scene);
            // The exact test may catch grazing hits the sampled one misses,
            // but a sampled hit must always be a real hit.
            if sampled_free != exact_free {
                assert!(!exact_free && sampled_free, "sampled check found a phantom hit");
                disagreements += 1;
            }
        }
        assert!(disagreements <= 5, "too many grazing-only cases: {disagreements}");
    }

    #[test]
    fn path_feasibility_and_length() {
        let model = RobotModel::point2d(&ws2()).unwrap();
        let free = Scene::empty(ws2());
        let single = Path::new(vec![Configuration(vec![0.0, 0.0])]);
        assert!(path_feasible(&model, &single, &free));
        assert_eq!(path_length(&model, &single), 0.0);

        let scene = scene_with(vec![unit_obstacle_at(0.0, 0.0, 1.0)]);
        let blocked = Path::new(vec![
            Configuration(vec![-5.0, 0.0]),
            Configuration(vec![5.0, 0.0]),
        ]);
        assert!(!path_feasible(&model, &blocked, &scene));
    }

    #[test]
    fn path_length_is_euclidean_and_reversal_invariant() {
        // Identity normalization bounds make the raw 3-4-5 triangle exact.
        let model = RobotModel::with_bounds(RobotKind::Point2d, vec![-1.0, -1.0], vec![1.0, 1.0]);
        let path = Path::new(vec![
            Configuration(vec![0.0, 0.0]),
            Configuration(vec![3.0, 4.0]),
        ]);
        assert!((path_length(&model, &path) - 5.0).abs() < 1e-12);

        let model20 = RobotModel::point2d(&ws2()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let pts: Vec<Configuration> = (0..6)
                .map(|_| Configuration(vec![rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)]))
                .collect();
            let fwd = Path::new(pts.clone());
            let rev = Path::new(pts.into_iter().rev().collect());
            assert!((path_length(&model20, &fwd) - path_length(&model20, &rev)).abs() < 1e-12);
        }
    }

    #[test]
    fn feasible_prefixes_of_feasible_paths() {
        let model = RobotModel::point2d(&ws2()).unwrap();
        let scene = scene_with(vec![unit_obstacle_at(0.0, 0.0, 2.5)]);
        let path = Path::new(vec![
            Configuration(vec![-10.0, 0.0]),
            Configuration(vec![-10.0, 8.0]),
            Configuration(vec![10.0, 8.0]),
            Configuration(vec![10.0, 0.0]),
        ]);
        assert!(path_feasible(&model, &path, &scene));
        for k in 1..=path.len() {
            let prefix = Path::new(path.waypoints[..k].to_vec());
            assert!(path_feasible(&model, &prefix, &scene));
        }
    }

    #[test]
    fn normalize_round_trip() {
        let model = RobotModel::rigid2d(&ws2(), [1.0, 0.5]).unwrap();
        let lo = Configuration(model.lower().to_vec());
        assert!(model.normalize(&lo).iter().all(|v| (*v + 1.0).abs() < 1e-12));

        let mid = Configuration(
            model.lower().iter().zip(model.upper()).map(|(a, b)| 0.5 * (a + b)).collect(),
        );
        assert!(model.normalize(&mid).iter().all(|v| v.abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let c = Configuration(
                model
                    .lower()
                    .iter()
                    .zip(model.upper())
                    .map(|(a, b)| rng.gen_range(*a..*b))
                    .collect(),
            );
            let back = model.denormalize(&model.normalize(&c));
            let err = c.0.iter().zip(&back.0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn clamped_outputs_never_panic_phi() {
        let model = RobotModel::nlink2d(&ws2(), vec![2.0, 2.0]).unwrap();
        let scene = scene_with(vec![unit_obstacle_at(5.0, 5.0, 2.0)]);
        let wild = Configuration(vec![55.0, -180.0, 9.0, -9.0]);
        let clamped = model.clamp(&wild);
        assert!(model.in_bounds(&clamped));
        let _ = phi(&model, &clamped, &scene);
    }
}
