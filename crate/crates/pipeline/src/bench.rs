//! Benchmark harness: runs every method on the same pre-verified problem
//! set, fans tasks across worker threads with per-task RNG streams, and
//! writes per-record CSV plus seen/unseen summary tables.
//!
//! Classical baselines run in target-cost mode: they stop once their path is
//! within the configured factor of the neural planner's length on that
//! problem, and count as failed if the budget expires first. Times are wall
//! clock; both averaging rules (over successes, over all runs) are reported.

use crate::config::RunConfig;
use crate::hash::content_hash;
use crate::stages::{env_files, load_networks, load_scene, sample_free_config, StageError};
use mnp_core::classical::{informed_rrt_star, rrt, rrt_star, PlannerBudget, PlannerError};
use mnp_core::geometry::Scene;
use mnp_core::nets::{predict_next, enet_forward, normalize_cloud, PlannerNetworks};
use mnp_core::neuralnet::Mode;
use mnp_core::plan::{mnp_plan, MnpPlanConfig};
use mnp_core::robots::{path_length, phi, steer_to, Configuration, RobotModel};
use mnp_core::seeding::derive_seed;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    MnpOrigin,
    MnpRrt,
    MseNr,
    MseHr,
    RrtStar,
    IrrtStar,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::MnpOrigin,
        Method::MnpRrt,
        Method::MseNr,
        Method::MseHr,
        Method::RrtStar,
        Method::IrrtStar,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::MnpOrigin => "mnp_origin",
            Method::MnpRrt => "mnp_rrt",
            Method::MseNr => "mse_nr",
            Method::MseHr => "mse_hr",
            Method::RrtStar => "rrt_star",
            Method::IrrtStar => "irrt_star",
        }
    }
}

/// One (method, environment, problem) measurement.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub method: Method,
    pub env_id: String,
    pub problem_id: usize,
    pub seen: bool,
    pub success: bool,
    pub time_secs: f64,
    /// Path length in normalized units; present iff success.
    pub length: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub method: Method,
    pub seen: bool,
    pub problems: usize,
    pub success_rate: f64,
    pub mean_time_success: Option<f64>,
    pub mean_time_all: f64,
    pub mean_length: Option<f64>,
}

pub struct BenchOutput {
    pub records: Vec<BenchRecord>,
    pub summary: Vec<SummaryRow>,
    pub records_csv: PathBuf,
    pub summary_txt: PathBuf,
    pub summary_csv: PathBuf,
}

struct Problem {
    env_id: String,
    problem_id: usize,
    seen: bool,
    scene: Scene,
    start: Configuration,
    goal: Configuration,
}

/// Sample a non-trivial, pre-verified-solvable problem for one environment.
fn make_problem(
    model: &RobotModel,
    scene: &Scene,
    verify_budget: &PlannerBudget,
    max_attempts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Configuration, Configuration), StageError> {
    for _ in 0..max_attempts {
        let start = sample_free_config(model, scene, rng)?;
        let goal = sample_free_config(model, scene, rng)?;
        if steer_to(model, &start, &goal, scene) {
            continue; // trivially straight-line solvable: discard and replace
        }
        // Solvability check only needs the first solution, not an optimized
        // one, so the plain RRT is the verifier.
        if rrt(model, scene, &start, &goal, verify_budget, rng).is_ok() {
            return Ok((start, goal));
        }
    }
    Err(StageError::SamplingExhausted(max_attempts))
}

fn run_neural(
    model: &RobotModel,
    scene: &Scene,
    start: &Configuration,
    goal: &Configuration,
    nets: &PlannerNetworks,
    plan_config: &MnpPlanConfig,
    seed: u64,
) -> (bool, f64, Option<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mnp_plan(model, scene, start, goal, nets, plan_config, &mut rng) {
        Ok(outcome) => {
            let time = outcome.timings.total.as_secs_f64();
            let length = outcome.path.as_ref().map(|p| path_length(model, p));
            (outcome.succeeded(), time, if outcome.succeeded() { length } else { None })
        }
        Err(_) => (false, 0.0, None),
    }
}

fn run_classical(
    informed: bool,
    model: &RobotModel,
    scene: &Scene,
    start: &Configuration,
    goal: &Configuration,
    budget: &PlannerBudget,
    target_length: Option<f64>,
    seed: u64,
) -> (bool, f64, Option<f64>) {
    let mut budget = budget.clone();
    budget.stop_at_cost = target_length;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = Instant::now();
    let result = if informed {
        informed_rrt_star(model, scene, start, goal, &budget, &mut rng)
    } else {
        rrt_star(model, scene, start, goal, &budget, &mut rng)
    };
    let elapsed = t0.elapsed().as_secs_f64();
    match result {
        Ok(path) => {
            let length = path_length(model, &path);
            // In target-cost mode the run only counts once it actually
            // reached the target quality before the budget expired.
            let success = target_length.map_or(true, |t| length <= t + 1e-9);
            (success, elapsed, if success { Some(length) } else { None })
        }
        Err(PlannerError::BudgetExhausted) => (false, elapsed, None),
        Err(PlannerError::InvalidEndpoint) => (false, elapsed, None),
    }
}

/// Run the full benchmark. Checkpoints must exist (run the train stages
/// first); every problem instance is shared across methods.
pub fn bench(config: &RunConfig, out_dir: &Path, strict_paper: bool) -> Result<BenchOutput, StageError> {
    let model = config.robot_model()?;
    let nets_mnp = load_networks(&out_dir.join("checkpoints/mnp.ckpt"))?;
    let nets_mse = load_networks(&out_dir.join("checkpoints/mse.ckpt"))?;

    let mut envs: Vec<(String, bool, PathBuf)> = Vec::new();
    for p in env_files(out_dir, "seen")? {
        let id = p.file_stem().and_then(|s| s.to_str()).expect("name").to_string();
        envs.push((id, true, p));
    }
    for p in env_files(out_dir, "unseen")? {
        let id = p.file_stem().and_then(|s| s.to_str()).expect("name").to_string();
        envs.push((id, false, p));
    }
    if envs.is_empty() {
        return Err(StageError::MissingInput("no env files (run gen-envs first)".into()));
    }

    let verify_budget = config.bench.classical_budget.to_budget();
    let problems: Vec<Problem> = envs
        .par_iter()
        .enumerate()
        .map(|(env_idx, (env_id, seen, path))| -> Result<Vec<Problem>, StageError> {
            let scene = load_scene(path)?;
            let mut out = Vec::with_capacity(config.bench.problems_per_env);
            for j in 0..config.bench.problems_per_env {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    config.master_seed,
                    "bench-problem",
                    (env_idx * 10_000 + j) as u64,
                ));
                let (start, goal) = make_problem(
                    &model,
                    &scene,
                    &verify_budget,
                    config.bench.max_attempts_per_problem,
                    &mut rng,
                )?;
                out.push(Problem {
                    env_id: env_id.clone(),
                    problem_id: j,
                    seen: *seen,
                    scene: scene.clone(),
                    start,
                    goal,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let plan_full = config.planner.to_plan_config(strict_paper);
    let plan_origin = config.planner.to_plan_config(strict_paper).origin();
    let classical_budget = config.bench.classical_budget.to_budget();

    let mut records: Vec<BenchRecord> = problems
        .par_iter()
        .enumerate()
        .flat_map(|(global_idx, problem)| {
            let mut out = Vec::with_capacity(Method::ALL.len());
            let seed_for = |method: Method| {
                derive_seed(
                    config.master_seed,
                    &format!("bench-{}", method.name()),
                    global_idx as u64,
                )
            };
            let mut push = |method: Method, (success, time, length): (bool, f64, Option<f64>)| {
                out.push(BenchRecord {
                    method,
                    env_id: problem.env_id.clone(),
                    problem_id: problem.problem_id,
                    seen: problem.seen,
                    success,
                    time_secs: time,
                    length,
                });
            };

            let mnp_rrt = run_neural(
                &model,
                &problem.scene,
                &problem.start,
                &problem.goal,
                &nets_mnp,
                &plan_full,
                seed_for(Method::MnpRrt),
            );
            let target = mnp_rrt.2.map(|len| config.bench.target_length_factor * len);
            push(Method::MnpRrt, mnp_rrt);

            push(
                Method::MnpOrigin,
                run_neural(
                    &model,
                    &problem.scene,
                    &problem.start,
                    &problem.goal,
                    &nets_mnp,
                    &plan_origin,
                    seed_for(Method::MnpOrigin),
                ),
            );
            push(
                Method::MseNr,
                run_neural(
                    &model,
                    &problem.scene,
                    &problem.start,
                    &problem.goal,
                    &nets_mse,
                    &plan_origin,
                    seed_for(Method::MseNr),
                ),
            );
            push(
                Method::MseHr,
                run_neural(
                    &model,
                    &problem.scene,
                    &problem.start,
                    &problem.goal,
                    &nets_mse,
                    &plan_full,
                    seed_for(Method::MseHr),
                ),
            );
            push(
                Method::RrtStar,
                run_classical(
                    false,
                    &model,
                    &problem.scene,
                    &problem.start,
                    &problem.goal,
                    &classical_budget,
                    target,
                    seed_for(Method::RrtStar),
                ),
            );
            push(
                Method::IrrtStar,
                run_classical(
                    true,
                    &model,
                    &problem.scene,
                    &problem.start,
                    &problem.goal,
                    &classical_budget,
                    target,
                    seed_for(Method::IrrtStar),
                ),
            );
            out
        })
        .collect();

    records.sort_by(|a, b| {
        (&a.env_id, a.problem_id, a.method).cmp(&(&b.env_id, b.problem_id, b.method))
    });

    let summary = summarize(&records);
    let bench_dir = out_dir.join("bench");
    fs::create_dir_all(&bench_dir)?;

    let records_csv_text = records_to_csv(&records);
    let records_csv = bench_dir.join("records.csv");
    fs::write(&records_csv, &records_csv_text)?;

    let summary_csv_text = summary_to_csv(&summary);
    let summary_csv = bench_dir.join("summary.csv");
    fs::write(&summary_csv, &summary_csv_text)?;

    let summary_txt_text = summary_to_text(&summary);
    let summary_txt = bench_dir.join("summary.txt");
    fs::write(&summary_txt, &summary_txt_text)?;

    let manifest = serde_json::json!({
        "stage": "bench",
        "config": config,
        "strict_paper": strict_paper,
        "outputs": {
            "records.csv": content_hash(records_csv_text.as_bytes()),
            "summary.csv": content_hash(summary_csv_text.as_bytes()),
            "summary.txt": content_hash(summary_txt_text.as_bytes()),
        },
    });
    fs::write(bench_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("serializes"))?;

    Ok(BenchOutput { records, summary, records_csv, summary_txt, summary_csv })
}

pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for method in Method::ALL {
        for seen in [true, false] {
            let group: Vec<&BenchRecord> =
                records.iter().filter(|r| r.method == method && r.seen == seen).collect();
            if group.is_empty() {
                continue;
            }
            let successes: Vec<&&BenchRecord> = group.iter().filter(|r| r.success).collect();
            let mean = |values: Vec<f64>| -> Option<f64> {
                if values.is_empty() {
                    None
                } else {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                }
            };
            rows.push(SummaryRow {
                method,
                seen,
                problems: group.len(),
                success_rate: successes.len() as f64 / group.len() as f64,
                mean_time_success: mean(successes.iter().map(|r| r.time_secs).collect()),
                mean_time_all: group.iter().map(|r| r.time_secs).sum::<f64>()
                    / group.len() as f64,
                mean_length: mean(successes.iter().filter_map(|r| r.length).collect()),
            });
        }
    }
    rows
}

fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("method,env_id,problem_id,seen,success,time_secs,length\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6e},{}",
            r.method.name(),
            r.env_id,
            r.problem_id,
            r.seen,
            r.success,
            r.time_secs,
            r.length.map_or(String::new(), |l| format!("{l:.6e}")),
        );
    }
    out
}

fn summary_to_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from(
        "method,set,problems,success_rate,mean_time_success,mean_time_all,mean_length\n",
    );
    for row in summary {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{},{:.6e},{}",
            row.method.name(),
            if row.seen { "seen" } else { "unseen" },
            row.problems,
            row.success_rate,
            row.mean_time_success.map_or(String::new(), |t| format!("{t:.6e}")),
            row.mean_time_all,
            row.mean_length.map_or(String::new(), |l| format!("{l:.4}")),
        );
    }
    out
}

fn summary_to_text(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:<7} {:>9} {:>9} {:>13} {:>12} {:>9}",
        "method", "set", "problems", "success", "time(succ) s", "time(all) s", "length"
    );
    for row in summary {
        let _ = writeln!(
            out,
            "{:<12} {:<7} {:>9} {:>9.3} {:>13} {:>12.4} {:>9}",
            row.method.name(),
            if row.seen { "seen" } else { "unseen" },
            row.problems,
            row.success_rate,
            row.mean_time_success.map_or_else(|| "-".into(), |t| format!("{t:.4}")),
            row.mean_time_all,
            row.mean_length.map_or_else(|| "-".into(), |l| format!("{l:.3}")),
        );
    }
    out
}

/// Collision rates of sampled next configurations for the multimodal planner
/// versus the dropout baseline, at a fixed evaluation pose.
#[allow(clippy::too_many_arguments)]
pub fn multimodal_eval(
    nets_mnp: &PlannerNetworks,
    nets_mse: &PlannerNetworks,
    model: &RobotModel,
    scene: &Scene,
    c_t: &Configuration,
    c_goal: &Configuration,
    n_draws: usize,
    seed: u64,
) -> Result<(f64, f64), StageError> {
    if n_draws == 0 {
        return Err(StageError::MissingInput("n_draws must be >= 1".into()));
    }
    let cloud = normalize_cloud(scene);
    let rate_for = |nets: &PlannerNetworks, tag: &str| -> Result<f64, StageError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, 0));
        let z = if cloud.is_empty() {
            vec![0.0; nets.z_dim]
        } else {
            enet_forward(nets, &cloud, Mode::Eval, &mut rng)
                .map_err(mnp_core::nets::TrainError::from)?
                .0
        };
        let mut collisions = 0usize;
        for _ in 0..n_draws {
            let next = predict_next(nets, &z, model, c_t, c_goal, &mut rng)?;
            if phi(model, &next, scene) {
                collisions += 1;
            }
        }
        Ok(collisions as f64 / n_draws as f64)
    };
    Ok((rate_for(nets_mnp, "mm-eval-mnp")?, rate_for(nets_mse, "mm-eval-mse")?))
}
