//! From-scratch sampling-based planners: RRT, RRT*, and Informed-RRT*, plus
//! greedy path simplification. These serve three roles: expert data
//! generation, the replanner inside the neural planner, and the optimality
//! baselines in benchmarks.
//!
//! All distances, steering steps, and rewire radii are in normalized
//! configuration coordinates. Nearest-neighbor search is a linear scan; at
//! desk scale (<= 1e4 nodes) this is not the bottleneck and keeps the tree
//! bookkeeping trivially correct.

use crate::robots::{phi, steer_to, Configuration, Path, RobotModel};
use crate::geometry::Scene;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlannerError {
    #[error("endpoint configuration is in collision")]
    InvalidEndpoint,
    #[error("planning budget exhausted without a solution")]
    BudgetExhausted,
}

/// Iteration/time budget and sampling parameters shared by all planners.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerBudget {
    pub max_iterations: usize,
    /// Wall-clock safety cap; determinism holds when iterations bind first.
    pub max_time: Option<Duration>,
    /// Probability of sampling the goal configuration directly.
    pub goal_bias: f64,
    /// Steering step eta, normalized units.
    pub steer_step: f64,
    /// Rewire radius constant gamma for RRT*.
    pub rewire_gamma: f64,
    /// Optional target-cost stopping mode: return as soon as the best path
    /// cost (normalized units) is at or below this value.
    pub stop_at_cost: Option<f64>,
}

impl Default for PlannerBudget {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            max_time: Some(Duration::from_secs(60)),
            goal_bias: 0.05,
            steer_step: 0.1,
            rewire_gamma: 2.0,
            stop_at_cost: None,
        }
    }
}

impl PlannerBudget {
    /// Reduced budget used for per-segment replanning.
    pub fn replan_default() -> Self {
        Self {
            max_iterations: 10_000,
            max_time: Some(Duration::from_secs(10)),
            ..Self::default()
        }
    }
}

/// Search tree with parent links, cost-to-come, and per-edge costs.
/// Invariant: `cost[i] = cost[parent[i]] + edge[i]`, root at index 0.
pub struct Tree {
    nodes: Vec<Configuration>,
    parents: Vec<usize>,
    costs: Vec<f64>,
    edges: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new(root: Configuration) -> Self {
        Self {
            nodes: vec![root],
            parents: vec![0],
            costs: vec![0.0],
            edges: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: usize) -> &Configuration {
        &self.nodes[idx]
    }

    pub fn cost(&self, idx: usize) -> f64 {
        self.costs[idx]
    }

    pub fn insert(&mut self, c: Configuration, parent: usize, edge_cost: f64) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(c);
        self.parents.push(parent);
        self.costs.push(self.costs[parent] + edge_cost);
        self.edges.push(edge_cost);
        self.children.push(Vec::new());
        self.children[parent].push(idx);
        debug_assert!((self.costs[idx] - self.costs[parent] - self.edges[idx]).abs() < 1e-9);
        idx
    }

    /// Reparent `node` under `new_parent` and propagate the cost change to
    /// its whole subtree.
    pub fn rewire(&mut self, node: usize, new_parent: usize, edge_cost: f64) {
        let old_parent = self.parents[node];
        self.children[old_parent].retain(|c| *c != node);
        self.parents[node] = new_parent;
        self.edges[node] = edge_cost;
        self.children[new_parent].push(node);

        let mut stack = vec![node];
        while let Some(u) = stack.pop() {
            self.costs[u] = self.costs[self.parents[u]] + self.edges[u];
            stack.extend_from_slice(&self.children[u]);
        }
        debug_assert!(self.subtree_consistent(node));
    }

    #[allow(dead_code)]
    fn subtree_consistent(&self, root: usize) -> bool {
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            if u != 0 && (self.costs[u] - self.costs[self.parents[u]] - self.edges[u]).abs() > 1e-9 {
                return false;
            }
            stack.extend_from_slice(&self.children[u]);
        }
        true
    }

    /// Full cost-recurrence check: `cost[i] == cost[parent] + dist(parent, i)`.
    pub fn check_cost_recurrence(&self, model: &RobotModel) -> bool {
        if self.parents[0] != 0 || self.costs[0] != 0.0 {
            return false;
        }
        for i in 1..self.nodes.len() {
            let p = self.parents[i];
            let edge = model.distance(&self.nodes[p], &self.nodes[i]);
            if (self.edges[i] - edge).abs() > 1e-9 {
                return false;
            }
            if (self.costs[i] - self.costs[p] - self.edges[i]).abs() > 1e-9 {
                return false;
            }
        }
        true
    }

    pub fn path_to(&self, idx: usize) -> Vec<Configuration> {
        let mut waypoints = Vec::new();
        let mut cur = idx;
        loop {
            waypoints.push(self.nodes[cur].clone());
            if cur == 0 {
                break;
            }
            cur = self.parents[cur];
        }
        waypoints.reverse();
        waypoints
    }
}

fn uniform_sample(model: &RobotModel, rng: &mut impl Rng) -> Configuration {
    Configuration(
        model
            .lower()
            .iter()
            .zip(model.upper())
            .map(|(lo, hi)| rng.gen_range(*lo..*hi))
            .collect(),
    )
}

fn nearest(tree: &Tree, model: &RobotModel, target: &Configuration) -> usize {
    let mut best = 0;
    let mut best_dist = model.distance(tree.node(0), target);
    for i in 1..tree.len() {
        let d = model.distance(tree.node(i), target);
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Move from `from` toward `to` by at most `eta` normalized units.
fn steer(model: &RobotModel, from: &Configuration, to: &Configuration, eta: f64) -> Configuration {
    let dist = model.distance(from, to);
    if dist <= eta {
        return to.clone();
    }
    let t = eta / dist;
    Configuration(from.0.iter().zip(&to.0).map(|(a, b)| a + t * (b - a)).collect())
}

struct Deadline {
    start: Instant,
    limit: Option<Duration>,
}

impl Deadline {
    fn new(limit: Option<Duration>) -> Self {
        Self { start: Instant::now(), limit }
    }

    fn expired(&self, iter: usize) -> bool {
        // Checked sparsely; time caps are a safety valve, not the primary
        // budget, so determinism is preserved on iteration-bounded runs.
        if iter % 64 != 0 {
            return false;
        }
        self.limit.is_some_and(|l| self.start.elapsed() > l)
    }
}

fn check_endpoints(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
) -> Result<(), PlannerError> {
    if phi(model, c_init, scene) || phi(model, c_goal, scene) {
        return Err(PlannerError::InvalidEndpoint);
    }
    Ok(())
}

/// Basic RRT. Returns a feasible path from `c_init` to `c_goal`, or
/// `BudgetExhausted`. Deterministic given the RNG state.
pub fn rrt(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    budget: &PlannerBudget,
    rng: &mut impl Rng,
) -> Result<Path, PlannerError> {
    check_endpoints(model, scene, c_init, c_goal)?;
    let mut tree = Tree::new(c_init.clone());
    let deadline = Deadline::new(budget.max_time);
    for iter in 0..budget.max_iterations {
        if deadline.expired(iter) {
            break;
        }
        let target = if rng.gen::<f64>() < budget.goal_bias {
            c_goal.clone()
        } else {
            uniform_sample(model, rng)
        };
        let near = nearest(&tree, model, &target);
        let new = steer(model, tree.node(near), &target, budget.steer_step);
        if !steer_to(model, tree.node(near), &new, scene) {
            continue;
        }
        let edge = model.distance(tree.node(near), &new);
        let idx = tree.insert(new, near, edge);
        let goal_dist = model.distance(tree.node(idx), c_goal);
        if goal_dist <= budget.steer_step && steer_to(model, tree.node(idx), c_goal, scene) {
            let mut waypoints = tree.path_to(idx);
            if waypoints.last() != Some(c_goal) {
                waypoints.push(c_goal.clone());
            }
            return Ok(Path::new(waypoints));
        }
    }
    Err(PlannerError::BudgetExhausted)
}

/// Optional introspection data captured by the starred planners.
#[derive(Debug, Default)]
pub struct StarDiagnostics {
    /// Best goal-path cost after each iteration (infinity before the first
    /// solution). Non-increasing by construction.
    pub best_cost_trace: Vec<f64>,
    /// For Informed-RRT*: each post-solution sample (normalized coordinates)
    /// with the best cost that defined its informed set.
    pub informed_samples: Vec<(Vec<f64>, f64)>,
}

fn reconstruct(
    tree: &Tree,
    model: &RobotModel,
    c_goal: &Configuration,
    candidates: &[usize],
) -> Option<(Path, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &idx in candidates {
        let total = tree.cost(idx) + model.distance(tree.node(idx), c_goal);
        if best.map_or(true, |(_, c)| total < c) {
            best = Some((idx, total));
        }
    }
    best.map(|(idx, cost)| {
        let mut waypoints = tree.path_to(idx);
        if waypoints.last() != Some(c_goal) {
            waypoints.push(c_goal.clone());
        }
        (Path::new(waypoints), cost)
    })
}

fn star_plan(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    budget: &PlannerBudget,
    informed: bool,
    mut diag: Option<&mut StarDiagnostics>,
    rng: &mut impl Rng,
) -> Result<Path, PlannerError> {
    check_endpoints(model, scene, c_init, c_goal)?;
    let mut tree = Tree::new(c_init.clone());
    let mut goal_candidates: Vec<usize> = Vec::new();
    let mut best_cost = f64::INFINITY;
    let dim = model.dim();
    let deadline = Deadline::new(budget.max_time);

    let init_n = model.normalize(c_init);
    let goal_n = model.normalize(c_goal);
    let c_min = {
        let sq: f64 = init_n.iter().zip(&goal_n).map(|(a, b)| (a - b) * (a - b)).sum();
        sq.sqrt()
    };
    let informed_basis = if informed && c_min > 0.0 {
        Some(orthonormal_basis_with_first(&sub(&goal_n, &init_n), c_min))
    } else {
        None
    };

    for iter in 0..budget.max_iterations {
        if deadline.expired(iter) {
            break;
        }
        let target = if best_cost.is_finite() && informed_basis.is_some() {
            let basis = informed_basis.as_ref().expect("checked");
            let x = sample_informed(&init_n, &goal_n, c_min, best_cost, basis, rng);
            if let Some(d) = diag.as_deref_mut() {
                d.informed_samples.push((x.clone(), best_cost));
            }
            model.denormalize(&x)
        } else if rng.gen::<f64>() < budget.goal_bias {
            c_goal.clone()
        } else {
            uniform_sample(model, rng)
        };

        let near = nearest(&tree, model, &target);
        let new = steer(model, tree.node(near), &target, budget.steer_step);
        if steer_to(model, tree.node(near), &new, scene) {
            // Choose parent within the shrinking rewire radius.
            let n = tree.len() as f64;
            let radius = (budget.rewire_gamma * ((n.ln().max(0.0)) / n).powf(1.0 / dim as f64))
                .min(budget.steer_step);
            let mut neighbors: Vec<usize> = (0..tree.len())
                .filter(|i| model.distance(tree.node(*i), &new) <= radius)
                .collect();
            if !neighbors.contains(&near) {
                neighbors.push(near);
            }

            let mut parent = near;
            let mut parent_cost =
                tree.cost(near) + model.distance(tree.node(near), &new);
            for &nb in &neighbors {
                if nb == near {
                    continue;
                }
                let cost = tree.cost(nb) + model.distance(tree.node(nb), &new);
                if cost < parent_cost && steer_to(model, tree.node(nb), &new, scene) {
                    parent = nb;
                    parent_cost = cost;
                }
            }
            let edge = model.distance(tree.node(parent), &new);
            let idx = tree.insert(new, parent, edge);

            // Rewire neighbors through the new node when that is cheaper.
            for &nb in &neighbors {
                if nb == parent || nb == 0 {
                    continue;
                }
                let through = tree.cost(idx) + model.distance(tree.node(idx), tree.node(nb));
                if through < tree.cost(nb) && steer_to(model, tree.node(idx), tree.node(nb), scene)
                {
                    let edge = model.distance(tree.node(idx), tree.node(nb));
                    tree.rewire(nb, idx, edge);
                }
            }

            let goal_dist = model.distance(tree.node(idx), c_goal);
            if goal_dist <= budget.steer_step && steer_to(model, tree.node(idx), c_goal, scene) {
                goal_candidates.push(idx);
            }
        }

        if !goal_candidates.is_empty() {
            let current = goal_candidates
                .iter()
                .map(|&i| tree.cost(i) + model.distance(tree.node(i), c_goal))
                .fold(f64::INFINITY, f64::min);
            best_cost = best_cost.min(current);
        }
        if let Some(d) = diag.as_deref_mut() {
            d.best_cost_trace.push(best_cost);
        }
        if let Some(stop) = budget.stop_at_cost {
            if best_cost <= stop {
                break;
            }
        }
    }

    reconstruct(&tree, model, c_goal, &goal_candidates)
        .map(|(path, _)| path)
        .ok_or(PlannerError::BudgetExhausted)
}

/// RRT* with choose-parent and rewiring.
pub fn rrt_star(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    budget: &PlannerBudget,
    rng: &mut impl Rng,
) -> Result<Path, PlannerError> {
    star_plan(model, scene, c_init, c_goal, budget, false, None, rng)
}

pub fn rrt_star_diag(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    budget: &PlannerBudget,
    diag: &mut StarDiagnostics,
    rng: &mut impl Rng,
) -> Result<Path, PlannerError> {
    star_plan(model, scene, c_init, c_goal, budget, false, Some(diag), rng)
}

/// Informed-RRT*: identical to RRT* until the first solution, then draws all
/// samples uniformly from the prolate hyperspheroid whose foci are the
/// endpoints and whose major axis is the best cost so far.
pub fn informed_rrt_star(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    budget: &PlannerBudget,
    rng: &mut impl Rng,
) -> Result<Path, PlannerError> {
    star_plan(model, scene, c_init, c_goal, budget, true, None, rng)
}

pub fn informed_rrt_star_diag(
    model: &RobotModel,
    scene: &Scene,
    c_init: &Configuration,
    c_goal: &Configuration,
    budget: &PlannerBudget,
    diag: &mut StarDiagnostics,
    rng: &mut impl Rng,
) -> Result<Path, PlannerError> {
    star_plan(model, scene, c_init, c_goal, budget, true, Some(diag), rng)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Orthonormal basis whose first vector is `dir / norm`, completed by
/// Gram-Schmidt over the standard basis.
fn orthonormal_basis_with_first(dir: &[f64], norm: f64) -> Vec<Vec<f64>> {
    let d = dir.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    basis.push(dir.iter().map(|x| x / norm).collect());
    for axis in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            for x in v.iter_mut() {
                *x /= n;
            }
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), d);
    basis
}

/// Uniform sample from the prolate hyperspheroid with foci `init`/`goal`
/// (normalized coordinates), transverse diameter `c_best`, rejected until it
/// falls inside the normalized bounds `[-1, 1]^d`.
fn sample_informed(
    init_n: &[f64],
    goal_n: &[f64],
    c_min: f64,
    c_best: f64,
    basis: &[Vec<f64>],
    rng: &mut impl Rng,
) -> Vec<f64> {
    let d = init_n.len();
    let c_best = c_best.max(c_min);
    let r1 = c_best / 2.0;
    let rt = ((c_best * c_best - c_min * c_min).max(0.0)).sqrt() / 2.0;
    let center: Vec<f64> = init_n.iter().zip(goal_n).map(|(a, b)| 0.5 * (a + b)).collect();

    for attempt in 0..1_000_000 {
        // Uniform point in the unit d-ball.
        let gauss: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let gn: f64 = gauss.iter().map(|x| x * x).sum::<f64>().sqrt();
        let radius = rng.gen::<f64>().powf(1.0 / d as f64);
        let ball: Vec<f64> = if gn > 0.0 {
            gauss.iter().map(|x| x / gn * radius).collect()
        } else {
            vec![0.0; d]
        };

        // Stretch along the first basis vector, isotropic transversally.
        let mut x = center.clone();
        for (j, b) in basis.iter().enumerate() {
            let r = if j == 0 { r1 } else { rt };
            for (xk, bk) in x.iter_mut().zip(b) {
                *xk += r * ball[j] * bk;
            }
        }
        if x.iter().all(|v| *v >= -1.0 && *v <= 1.0) {
            return x;
        }
        debug_assert!(attempt < 999_999);
    }
    unreachable!("informed set always intersects the bounds: the focal segment is in bounds")
}

/// Greedy shortcut pass: drop colliding waypoints, then repeatedly jump to
/// the farthest waypoint reachable in a straight line. Feasible input stays
/// feasible and never gets longer; infeasible gaps are kept for the
/// replanner.
pub fn path_simplify(model: &RobotModel, path: &Path, scene: &Scene) -> Path {
    let kept: Vec<&Configuration> =
        path.waypoints.iter().filter(|c| !phi(model, c, scene)).collect();
    if kept.is_empty() {
        return path.clone();
    }
    let mut out = vec![kept[0].clone()];
    let mut i = 0;
    while i + 1 < kept.len() {
        let mut next = i + 1;
        for j in (i + 1..kept.len()).rev() {
            if steer_to(model, kept[i], kept[j], scene) {
                next = j;
                break;
            }
        }
        out.push(kept[next].clone());
        i = next;
    }
    Path::new(out)
}
