//! Online planning: the bi-directional neural planner, segment replanning
//! with RRT, and the complete planner that composes them.
//!
//! The bi-directional planner grows one partial path from each endpoint and
//! alternates roles each iteration. Candidate waypoints come from the
//! planning head; a candidate that fails every collision-checked resample is
//! appended anyway, exactly as published, and left for the replanner to
//! repair.

use crate::classical::{path_simplify, rrt, PlannerBudget, PlannerError};
use crate::geometry::Scene;
use crate::mdn;
use crate::nets::{enet_forward, normalize_cloud, pnet_forward, PlannerNetworks, HeadKind};
use crate::neuralnet::Mode;
use crate::robots::{path_feasible, phi, steer_to, Configuration, Path, RobotModel};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// Iteration limits of the bi-directional planner.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BiPlanConfig {
    /// Outer iterations (one extension per iteration).
    pub n_iter: usize,
    /// Collision-checked resamples per extension.
    pub n_col: usize,
}

impl Default for BiPlanConfig {
    fn default() -> Self {
        Self { n_iter: 50, n_col: 10 }
    }
}

/// Everything the complete planner needs beyond the networks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MnpPlanConfig {
    pub bi: BiPlanConfig,
    pub replan_budget: PlannerBudget,
    /// Fall back to plain RRT when the bi-directional planner returns empty.
    /// Disabled in strict mode, where the empty result is a failure.
    pub rrt_fallback: bool,
    /// Repair infeasible candidate paths with RRT. Disabled for the
    /// no-replanner variant, which reports such paths as failures.
    pub replan_enabled: bool,
}

impl Default for MnpPlanConfig {
    fn default() -> Self {
        Self {
            bi: BiPlanConfig::default(),
            replan_budget: PlannerBudget::replan_default(),
            rrt_fallback: true,
            replan_enabled: true,
        }
    }
}

impl MnpPlanConfig {
    /// The planner with no repair stage: direct success or failure.
    pub fn origin(mut self) -> Self {
        self.rrt_fallback = false;
        self.replan_enabled = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    DirectSuccess,
    ReplannedSuccess,
    Failure,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub encode: Duration,
    /// Bi-directional planning plus simplification.
    pub neural: Duration,
    pub replan: Duration,
    pub total: Duration,
}

/// Result of one complete planning call.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub path: Option<Path>,
    pub status: PlanStatus,
    pub timings: PhaseTimings,
    /// Segments repaired by RRT (the whole path counts as one when the
    /// fallback planner produced it).
    pub replan_segment_count: usize,
    pub config: MnpPlanConfig,
}

impl PlanOutcome {
    pub fn succeeded(&self) -> bool {
        self.status != PlanStatus::Failure
    }
}

/// One bi-directional iteration, for trace logs and the visualizer.
#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub iter: usize,
    /// True when the path being extended starts at `c_init`.
    pub extending_from_init: bool,
    /// Sampled candidates with their steer results, in draw order.
    pub candidates: Vec<(Configuration, bool)>,
    /// The waypoint appended this iteration (possibly a colliding one).
    pub appended: Configuration,
    /// Whether the ends connected after this extension.
    pub connected: bool,
}

impl TraceEvent {
    /// One-line rendering used by the CLI trace flag.
    pub fn to_line(&self) -> String {
        let side = if self.extending_from_init { "init" } else { "goal" };
        let cands: Vec<String> = self
            .candidates
            .iter()
            .map(|(c, ok)| format!("{:?}:{}", c.0, if *ok { "ok" } else { "hit" }))
            .collect();
        format!(
            "iter={} side={} candidates=[{}] appended={:?} connected={}",
            self.iter,
            side,
            cands.join(" "),
            self.appended.0,
            self.connected
        )
    }
}

/// Draw up to `n_col` candidates for extending from `from` toward `toward`.
/// The planning head is evaluated once per call; GMM heads then sample that
/// one distribution repeatedly, the baseline re-runs its stochastic forward.
struct CandidateSampler<'a> {
    nets: &'a PlannerNetworks,
    z: &'a [f64],
    gmm: Option<mdn::GmmParams>,
    from_norm: Vec<f64>,
    toward_norm: Vec<f64>,
}

impl<'a> CandidateSampler<'a> {
    fn new(
        nets: &'a PlannerNetworks,
        z: &'a [f64],
        model: &RobotModel,
        from: &Configuration,
        toward: &Configuration,
        rng: &mut impl Rng,
    ) -> Result<Self, PlannerError> {
        let from_norm = model.normalize(from);
        let toward_norm = model.normalize(toward);
        let gmm = match nets.head {
            HeadKind::Gmm { q_mix } => {
                let tape = pnet_forward(nets, z, &from_norm, &toward_norm, Mode::Eval, rng)
                    .map_err(|_| PlannerError::InvalidEndpoint)?;
                let params = mdn::constrain(tape.output(), q_mix, nets.config_dim)
                    .map_err(|_| PlannerError::InvalidEndpoint)?;
                Some(params)
            }
            HeadKind::PointEstimate => None,
        };
        Ok(Self { nets, z, gmm, from_norm, toward_norm })
    }

    fn draw(&self, model: &RobotModel, rng: &mut impl Rng) -> Configuration {
        let normalized = match &self.gmm {
            Some(params) => mdn::sample(params, rng),
            None => {
                let tape = pnet_forward(
                    self.nets,
                    self.z,
                    &self.from_norm,
                    &self.toward_norm,
                    Mode::Train,
                    rng,
                )
                .expect("dimensions fixed by construction");
                tape.output().to_vec()
            }
        };
        model.clamp(&model.denormalize(&normalized))
    }
}

/// Bi-directional planner. Returns the concatenated path oriented from
/// `c_init` to `c_goal`, or `None` when the iteration budget runs out.
#[allow(clippy::too_many_arguments)]
pub fn bidirectional_plan(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    z: &[f64],
    nets: &PlannerNetworks,
    config: &BiPlanConfig,
    rng: &mut impl Rng,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Option<Path> {
    let mut tau_a = vec![c_init.clone()];
    let mut tau_b = vec![c_goal.clone()];
    let mut a_from_init = true;

    // Immediate connect check: trivially connectable problems return the
    // straight segment without consuming an extension.
    if steer_to(model, c_init, c_goal, scene) {
        return Some(Path::new(vec![c_init.clone(), c_goal.clone()]));
    }

    for iter in 0..config.n_iter {
        debug_assert!(
            (tau_a[0] == *c_init && tau_b[0] == *c_goal)
                || (tau_a[0] == *c_goal && tau_b[0] == *c_init)
        );
        let from = tau_a.last().expect("paths are never empty").clone();
        let toward = tau_b.last().expect("paths are never empty").clone();
        let Ok(sampler) = CandidateSampler::new(nets, z, model, &from, &toward, rng) else {
            return None;
        };

        let mut candidates = Vec::new();
        let mut appended: Option<Configuration> = None;
        let mut last_candidate: Option<Configuration> = None;
        for _ in 0..config.n_col {
            let candidate = sampler.draw(model, rng);
            let ok = steer_to(model, &from, &candidate, scene);
            candidates.push((candidate.clone(), ok));
            last_candidate = Some(candidate.clone());
            if ok {
                appended = Some(candidate);
                break;
            }
        }
        // Every resample failed: append the last candidate anyway and let
        // the replanner repair the gap.
        let appended =
            appended.or(last_candidate).expect("n_col >= 1 draws at least one candidate");
        tau_a.push(appended.clone());

        let connected = steer_to(model, tau_a.last().expect("nonempty"), &toward, scene);
        if let Some(events) = trace.as_deref_mut() {
            events.push(TraceEvent {
                iter,
                extending_from_init: a_from_init,
                candidates,
                appended: appended.clone(),
                connected,
            });
        }
        if connected {
            let (from_init, from_goal) =
                if a_from_init { (tau_a, tau_b) } else { (tau_b, tau_a) };
            let mut waypoints = from_init;
            waypoints.extend(from_goal.into_iter().rev());
            return Some(Path::new(waypoints));
        }
        std::mem::swap(&mut tau_a, &mut tau_b);
        a_from_init = !a_from_init;
    }
    None
}

#[derive(Debug, thiserror::Error)]
pub enum ReplanError {
    #[error("replanner failed on segment {segment}: {source}")]
    Segment { segment: usize, source: PlannerError },
}

/// Repair a path: simplify, then keep feasible adjacent pairs and bridge the
/// infeasible ones with the replanning RRT. Returns the repaired path and
/// the number of segments that needed the RRT.
pub fn replan(
    model: &RobotModel,
    scene: &Scene,
    path: &Path,
    replan_budget: &PlannerBudget,
    rng: &mut impl Rng,
) -> Result<(Path, usize), ReplanError> {
    let simplified = path_simplify(model, path, scene);
    let mut out = vec![simplified.waypoints[0].clone()];
    let mut repaired = 0usize;
    for (segment, pair) in simplified.waypoints.windows(2).enumerate() {
        if steer_to(model, &pair[0], &pair[1], scene) {
            out.push(pair[1].clone());
        } else {
            let connector = rrt(model, scene, &pair[0], &pair[1], replan_budget, rng)
                .map_err(|source| ReplanError::Segment { segment, source })?;
            let connector = path_simplify(model, &connector, scene);
            out.extend(connector.waypoints.into_iter().skip(1));
            repaired += 1;
        }
    }
    Ok((Path::new(out), repaired))
}

/// The complete planner: encode the cloud, run the bi-directional planner,
/// simplify, and repair with RRT when needed. With the fallback enabled an
/// empty bi-directional result degrades to plain RRT, which preserves
/// completeness.
pub fn mnp_plan(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    nets: &PlannerNetworks,
    config: &MnpPlanConfig,
    rng: &mut impl Rng,
) -> Result<PlanOutcome, PlannerError> {
    mnp_plan_traced(model, scene, c_init, c_goal, nets, config, rng, None)
}

/// `mnp_plan` with an optional per-iteration trace of the bi-directional
/// phase, for the CLI trace flag and the visualizer.
#[allow(clippy::too_many_arguments)]
pub fn mnp_plan_traced(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    nets: &PlannerNetworks,
    config: &MnpPlanConfig,
    rng: &mut impl Rng,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<PlanOutcome, PlannerError> {
    if phi(model, c_init, scene) || phi(model, c_goal, scene) {
        return Err(PlannerError::InvalidEndpoint);
    }
    let t_start = Instant::now();
    let cloud = normalize_cloud(scene);
    // Obstacle-free scenes have no cloud to encode; a zero latent is fine
    // because every problem there is trivially connectable.
    let z = if cloud.is_empty() {
        vec![0.0; nets.z_dim]
    } else {
        match enet_forward(nets, &cloud, Mode::Eval, rng) {
            Ok((z, _)) => z,
            Err(_) => return Err(PlannerError::InvalidEndpoint),
        }
    };
    let encode = t_start.elapsed();

    let t_neural = Instant::now();
    let bi = bidirectional_plan(model, scene, c_init, c_goal, &z, nets, &config.bi, rng, trace);
    let (candidate, neural) = match bi {
        Some(path) => {
            let simplified = path_simplify(model, &path, scene);
            (Some(simplified), t_neural.elapsed())
        }
        None => (None, t_neural.elapsed()),
    };

    let mut timings =
        PhaseTimings { encode, neural, replan: Duration::ZERO, total: Duration::ZERO };

    let outcome = match candidate {
        Some(path) if path_feasible(model, &path, scene) => {
            timings.total = t_start.elapsed();
            PlanOutcome {
                path: Some(path),
                status: PlanStatus::DirectSuccess,
                timings,
                replan_segment_count: 0,
                config: config.clone(),
            }
        }
        Some(_) if !config.replan_enabled => {
            timings.total = t_start.elapsed();
            PlanOutcome {
                path: None,
                status: PlanStatus::Failure,
                timings,
                replan_segment_count: 0,
                config: config.clone(),
            }
        }
        Some(path) => {
            let t_replan = Instant::now();
            let result = replan(model, scene, &path, &config.replan_budget, rng);
            timings.replan = t_replan.elapsed();
            timings.total = t_start.elapsed();
            match result {
                Ok((repaired, segments)) => {
                    debug_assert!(path_feasible(model, &repaired, scene));
                    PlanOutcome {
                        path: Some(repaired),
                        status: PlanStatus::ReplannedSuccess,
                        timings,
                        replan_segment_count: segments,
                        config: config.clone(),
                    }
                }
                Err(_) => PlanOutcome {
                    path: None,
                    status: PlanStatus::Failure,
                    timings,
                    replan_segment_count: 0,
                    config: config.clone(),
                },
            }
        }
        None if config.rrt_fallback => {
            let t_replan = Instant::now();
            let result = rrt(model, scene, c_init, c_goal, &config.replan_budget, rng);
            timings.replan = t_replan.elapsed();
            timings.total = t_start.elapsed();
            match result {
                Ok(path) => PlanOutcome {
                    path: Some(path_simplify(model, &path, scene)),
                    status: PlanStatus::ReplannedSuccess,
                    timings,
                    replan_segment_count: 1,
                    config: config.clone(),
                },
                Err(_) => PlanOutcome {
                    path: None,
                    status: PlanStatus::Failure,
                    timings,
                    replan_segment_count: 1,
                    config: config.clone(),
                },
            }
        }
        None => {
            timings.total = t_start.elapsed();
            PlanOutcome {
                path: None,
                status: PlanStatus::Failure,
                timings,
                replan_segment_count: 0,
                config: config.clone(),
            }
        }
    };

    if let (Some(path), true) = (&outcome.path, outcome.succeeded()) {
        debug_assert_eq!(path.first(), c_init);
        debug_assert_eq!(path.last(), c_goal);
    }
    Ok(outcome)
}
