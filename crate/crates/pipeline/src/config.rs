//! Run configuration: one file describes scenes, the robot, expert data
//! generation, training, and the benchmark protocol. Every stage embeds the
//! full configuration in its output manifest so runs are self-describing.

use mnp_core::classical::PlannerBudget;
use mnp_core::geometry::{GeometryError, SceneClass, SceneGenConfig, Workspace};
use mnp_core::nets::{ArchConfig, TrainConfig};
use mnp_core::neuralnet::AdamParams;
use mnp_core::plan::{BiPlanConfig, MnpPlanConfig};
use mnp_core::robots::{RobotError, RobotModel, DEFAULT_DELTA_STEER};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Robot(#[from] RobotError),
}

/// Robot model selection, embedded in the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum RobotSpec {
    Point2d,
    Rigid2d { half_extents: [f64; 2] },
    Nlink2d { link_lengths: Vec<f64> },
    Point3d,
}

impl RobotSpec {
    pub fn workspace_dim(&self) -> usize {
        match self {
            RobotSpec::Point3d => 3,
            _ => 2,
        }
    }

    pub fn build(&self, workspace: &Workspace, delta_steer: f64) -> Result<RobotModel, RobotError> {
        let mut model = match self {
            RobotSpec::Point2d => RobotModel::point2d(workspace)?,
            RobotSpec::Rigid2d { half_extents } => RobotModel::rigid2d(workspace, *half_extents)?,
            RobotSpec::Nlink2d { link_lengths } => {
                RobotModel::nlink2d(workspace, link_lengths.clone())?
            }
            RobotSpec::Point3d => RobotModel::point3d(workspace)?,
        };
        model.set_delta_steer(delta_steer);
        Ok(model)
    }
}

/// Planner budget with human-friendly seconds, converted to core budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub max_iterations: usize,
    pub max_time_secs: Option<f64>,
    pub goal_bias: f64,
    pub steer_step: f64,
    pub rewire_gamma: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            max_time_secs: Some(60.0),
            goal_bias: 0.05,
            steer_step: 0.1,
            rewire_gamma: 2.0,
        }
    }
}

impl BudgetConfig {
    pub fn to_budget(&self) -> PlannerBudget {
        PlannerBudget {
            max_iterations: self.max_iterations,
            max_time: self.max_time_secs.map(Duration::from_secs_f64),
            goal_bias: self.goal_bias,
            steer_step: self.steer_step,
            rewire_gamma: self.rewire_gamma,
            stop_at_cost: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub class: SceneClass,
    pub seen_count: usize,
    pub unseen_count: usize,
    pub n_obstacles: usize,
    pub half_extent: f64,
    pub cloud_points: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            class: SceneClass::Simple2d,
            seen_count: 60,
            unseen_count: 10,
            n_obstacles: 7,
            half_extent: 2.5,
            cloud_points: 300,
            lo: -20.0,
            hi: 20.0,
        }
    }
}

impl SceneSection {
    pub fn gen_config(&self) -> SceneGenConfig {
        SceneGenConfig {
            class: self.class,
            n_obstacles: self.n_obstacles,
            half_extent: self.half_extent,
            cloud_points: self.cloud_points,
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn workspace(&self) -> Result<Workspace, GeometryError> {
        Workspace::symmetric(self.gen_config().dim(), self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertPlanner {
    RrtStar,
    InformedRrtStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertSection {
    pub planner: ExpertPlanner,
    pub paths_per_scene: usize,
    pub budget: BudgetConfig,
    /// Attempts to find a usable (start, goal, expert path) per slot.
    pub max_attempts_per_path: usize,
}

impl Default for ExpertSection {
    fn default() -> Self {
        Self {
            planner: ExpertPlanner::RrtStar,
            paths_per_scene: 40,
            budget: BudgetConfig {
                max_iterations: 4000,
                max_time_secs: Some(20.0),
                ..BudgetConfig::default()
            },
            max_attempts_per_path: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub arch: ArchConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            arch: ArchConfig::desk(),
            lr: 5e-4,
            batch_size: 256,
            epochs: 100,
            patience: 10,
            val_fraction: 0.1,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            arch: self.arch.clone(),
            adam: AdamParams { lr: self.lr, ..AdamParams::default() },
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            val_fraction: self.val_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub n_iter: usize,
    pub n_col: usize,
    pub replan: BudgetConfig,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            n_iter: 50,
            n_col: 10,
            replan: BudgetConfig {
                max_iterations: 10_000,
                max_time_secs: Some(10.0),
                ..BudgetConfig::default()
            },
        }
    }
}

impl PlannerSection {
    pub fn to_plan_config(&self, strict_paper: bool) -> MnpPlanConfig {
        MnpPlanConfig {
            bi: BiPlanConfig { n_iter: self.n_iter, n_col: self.n_col },
            replan_budget: self.replan.to_budget(),
            rrt_fallback: !strict_paper,
            replan_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub problems_per_env: usize,
    /// Budget for the classical baselines and for solvability verification.
    pub classical_budget: BudgetConfig,
    /// Classical baselines stop once within this factor of the neural
    /// planner's path length for the same problem.
    pub target_length_factor: f64,
    pub max_attempts_per_problem: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            problems_per_env: 10,
            classical_budget: BudgetConfig {
                max_iterations: 20_000,
                max_time_secs: Some(10.0),
                ..BudgetConfig::default()
            },
            target_length_factor: 1.10,
            max_attempts_per_problem: 100,
        }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub scene: SceneSection,
    pub robot: RobotSpec,
    pub delta_steer: f64,
    pub expert: ExpertSection,
    pub train: TrainSection,
    pub planner: PlannerSection,
    pub bench: BenchSection,
}

impl Default for RobotSpec {
    fn default() -> Self {
        RobotSpec::Point2d
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 7,
            scene: SceneSection::default(),
            robot: RobotSpec::default(),
            delta_steer: DEFAULT_DELTA_STEER,
            expert: ExpertSection::default(),
            train: TrainSection::default(),
            planner: PlannerSection::default(),
            bench: BenchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn desk2d() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Full-scale settings: reference environment counts, paths per scene,
    /// cloud sizes, and network widths.
    pub fn apply_paper_scale(&mut self) {
        self.scene.seen_count = 900;
        self.scene.unseen_count = 100;
        self.scene.cloud_points = match self.scene.class {
            SceneClass::Simple2d => 1400,
            SceneClass::Complex3d => 1000,
        };
        self.scene.n_obstacles = match self.scene.class {
            SceneClass::Simple2d => 7,
            SceneClass::Complex3d => 10,
        };
        self.expert.paths_per_scene = 400;
        self.expert.budget =
            BudgetConfig { max_iterations: 20_000, max_time_secs: Some(60.0), ..BudgetConfig::default() };
        self.train.arch = ArchConfig::default();
        self.train.lr = 1e-4;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.delta_steer <= 0.0 {
            return Err(ConfigError::Invalid("delta_steer must be positive".into()));
        }
        if self.scene.seen_count == 0 {
            return Err(ConfigError::Invalid("scene.seen_count must be >= 1".into()));
        }
        if self.scene.n_obstacles == 0 {
            return Err(ConfigError::Invalid("scene.n_obstacles must be >= 1".into()));
        }
        if self.scene.lo >= self.scene.hi {
            return Err(ConfigError::Invalid("scene bounds must satisfy lo < hi".into()));
        }
        if self.robot.workspace_dim() != self.scene.gen_config().dim() {
            return Err(ConfigError::Invalid(format!(
                "robot needs a {}D workspace but scene class provides {}D",
                self.robot.workspace_dim(),
                self.scene.gen_config().dim()
            )));
        }
        if let RobotSpec::Nlink2d { link_lengths } = &self.robot {
            if link_lengths.is_empty() {
                return Err(ConfigError::Invalid("nlink2d needs at least one link".into()));
            }
        }
        if self.expert.paths_per_scene == 0 {
            return Err(ConfigError::Invalid("expert.paths_per_scene must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.train.val_fraction) {
            return Err(ConfigError::Invalid("train.val_fraction must be in [0, 1)".into()));
        }
        if self.train.batch_size == 0 {
            return Err(ConfigError::Invalid("train.batch_size must be >= 1".into()));
        }
        if self.planner.n_iter == 0 || self.planner.n_col == 0 {
            return Err(ConfigError::Invalid("planner.n_iter and n_col must be >= 1".into()));
        }
        if self.bench.target_length_factor < 1.0 {
            return Err(ConfigError::Invalid("bench.target_length_factor must be >= 1".into()));
        }
        Ok(())
    }

    pub fn robot_model(&self) -> Result<RobotModel, ConfigError> {
        let workspace = self.scene.workspace()?;
        Ok(self.robot.build(&workspace, self.delta_steer)?)
    }
}
