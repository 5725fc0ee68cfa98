//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with its measured numbers. Run with:
//!
//! ```sh
//! cargo test -p mnp-pipeline --test acceptance -- --nocapture
//! ```
//!
//! The heavyweight fixtures (desk-scale 2D bundle, corridor bundle) build
//! once per process and are shared across criteria.

use mnp_core::classical::{
    informed_rrt_star, informed_rrt_star_diag, path_simplify, rrt, rrt_star, rrt_star_diag,
    PlannerBudget, StarDiagnostics, Tree,
};
use mnp_core::geometry::{sample_cloud, BoxObstacle, Scene, Workspace};
use mnp_core::mdn;
use mnp_core::nets::{
    enet_backward, enet_forward, normalize_cloud, pnet_forward, predict_next, train_mnp,
    train_mse_baseline, ArchConfig, Dataset, HeadKind, PlannerNetworks, TrainConfig,
    TrainingSample,
};
use mnp_core::neuralnet::checkpoint::{
    load_checkpoint, load_checkpoint_bytes, save_checkpoint, CheckpointError,
};
use mnp_core::neuralnet::{backward, AdamParams, Mode};
use mnp_core::plan::{mnp_plan, MnpPlanConfig};
use mnp_core::robots::{
    path_feasible, path_length, phi, steer_to, Configuration, Path, RobotModel,
};
use mnp_core::seeding::derive_seed;
use mnp_pipeline::bench::multimodal_eval;
use mnp_pipeline::config::RunConfig;
use mnp_pipeline::stages::{
    env_files, gen_data, gen_envs, load_networks, load_scene, sample_free_config, train_stage,
    TrainRole,
};
use mnp_pipeline::viz::{render_svg, VizInput};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn report(criterion: usize, detail: &str) {
    println!("[criterion {criterion}] PASS: {detail}");
}

// ---------------------------------------------------------------------------
// Shared fixtures

/// Desk-scale 2D point bundle: environments, expert dataset, trained
/// multimodal checkpoint.
struct DeskBundle {
    _dir: tempfile::TempDir,
    out_dir: PathBuf,
    config: RunConfig,
    model: RobotModel,
    nets: PlannerNetworks,
}

fn desk_config() -> RunConfig {
    let mut config = RunConfig::desk2d();
    // Iteration-bounded budgets keep the fixture deterministic.
    config.expert.budget.max_time_secs = None;
    config.planner.replan.max_time_secs = None;
    config.bench.classical_budget.max_time_secs = None;
    config
}

fn desk_bundle() -> &'static DeskBundle {
    static CELL: OnceLock<DeskBundle> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let out_dir = dir.path().to_path_buf();
        let config = desk_config();
        let t0 = Instant::now();
        gen_envs(&config, &out_dir).expect("gen_envs");
        gen_data(&config, &out_dir).expect("gen_data");
        let summary = train_stage(&config, &out_dir, TrainRole::Mnp).expect("train");
        eprintln!("[fixture] desk bundle built in {:.1}s", t0.elapsed().as_secs_f64());
        let model = config.robot_model().expect("model");
        let nets = load_networks(&summary.checkpoint).expect("load");
        DeskBundle { _dir: dir, out_dir, config, model, nets }
    })
}

/// Pre-verified-solvable non-trivial problems on the bundle's seen scenes.
fn solvable_problems(
    bundle: &DeskBundle,
    count: usize,
    tag: &str,
) -> Vec<(Scene, Configuration, Configuration)> {
    let verify = bundle.config.bench.classical_budget.to_budget();
    let seen = env_files(&bundle.out_dir, "seen").expect("envs");
    let mut problems = Vec::with_capacity(count);
    let mut scene_cache: Vec<Scene> = Vec::new();
    for p in &seen {
        scene_cache.push(load_scene(p).expect("scene"));
    }
    let mut k = 0u64;
    while problems.len() < count {
        let scene = &scene_cache[(k as usize) % scene_cache.len()];
        let mut r = rng(derive_seed(bundle.config.master_seed, tag, k));
        k += 1;
        let Ok(start) = sample_free_config(&bundle.model, scene, &mut r) else { continue };
        let Ok(goal) = sample_free_config(&bundle.model, scene, &mut r) else { continue };
        if steer_to(&bundle.model, &start, &goal, scene) {
            continue;
        }
        if rrt(&bundle.model, scene, &start, &goal, &verify, &mut r).is_err() {
            continue;
        }
        problems.push((scene.clone(), start, goal));
    }
    problems
}

/// Corridor bundle: one bimodal scene, expert data from repeated planning of
/// the same decision problem, both heads trained on it.
struct CorridorBundle {
    scene: Scene,
    model: RobotModel,
    c_init: Configuration,
    c_goal: Configuration,
    mnp: PlannerNetworks,
    mse: PlannerNetworks,
}

fn corridor_scene() -> (Scene, RobotModel, Configuration, Configuration) {
    let ws = Workspace::symmetric(2, -20.0, 20.0).unwrap();
    let block = BoxObstacle::new(vec![0.0, 0.0], vec![6.0, 3.0]).unwrap();
    let cloud = sample_cloud(&[block.clone()], 2, 200, 41).unwrap();
    let scene = Scene::new(ws.clone(), vec![block], cloud, 41).unwrap();
    let model = RobotModel::point2d(&ws).unwrap();
    (scene, model, Configuration(vec![0.0, -10.0]), Configuration(vec![0.0, 10.0]))
}

fn corridor_bundle() -> &'static CorridorBundle {
    static CELL: OnceLock<CorridorBundle> = OnceLock::new();
    CELL.get_or_init(|| {
        let (scene, model, c_init, c_goal) = corridor_scene();
        let t0 = Instant::now();

        // Expert data: many independent solutions of the same problem, so
        // both route modes appear in the training set.
        let budget =
            PlannerBudget { max_iterations: 3000, max_time: None, ..PlannerBudget::default() };
        let mut samples = Vec::new();
        let n_paths = 120;
        for k in 0..n_paths {
            let mut r = rng(derive_seed(4100, "corridor-expert", k));
            let path = rrt_star(&model, &scene, &c_init, &c_goal, &budget, &mut r)
                .expect("corridor problems are solvable");
            let simplified = path_simplify(&model, &path, &scene);
            let goal_cfg = simplified.last().clone();
            for pair in simplified.waypoints.windows(2) {
                samples.push(TrainingSample {
                    scene_id: 0,
                    c_t: pair[0].clone(),
                    c_goal: goal_cfg.clone(),
                    c_next: pair[1].clone(),
                });
            }
        }
        let dataset = Dataset { scenes: vec![scene.clone()], samples };

        let train_config = TrainConfig {
            arch: ArchConfig {
                point_mlp: vec![16, 32],
                post_mlp: vec![32],
                pnet_hidden: vec![128, 128, 64],
                q_mix: 5,
                baseline_dropout: 0.5,
            },
            adam: AdamParams { lr: 1e-3, ..AdamParams::default() },
            batch_size: 64,
            epochs: 200,
            patience: usize::MAX,
            val_fraction: 0.0,
        };
        let (mnp, _) = train_mnp(&dataset, &model, &train_config, 17).expect("train mnp");
        let (mse, _) =
            train_mse_baseline(&dataset, &model, &train_config, 17).expect("train mse");
        eprintln!("[fixture] corridor bundle built in {:.1}s", t0.elapsed().as_secs_f64());
        CorridorBundle { scene, model, c_init, c_goal, mnp, mse }
    })
}

// ---------------------------------------------------------------------------
// Criterion 1: composed gradient correctness

#[test]
fn criterion_1_joint_gradients_match_finite_differences() {
    let t0 = Instant::now();
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    for seed in 0..100u64 {
        let mut nets =
            PlannerNetworks::init(&ArchConfig::tiny(2), 2, 2, HeadKind::Gmm { q_mix: 2 }, seed);
        let mut r = rng(derive_seed(1, "fd", seed));
        let cloud: Vec<Vec<f64>> =
            (0..3).map(|_| (0..2).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let c_t: Vec<f64> = (0..2).map(|_| r.gen_range(-0.8..0.8)).collect();
        let c_goal: Vec<f64> = (0..2).map(|_| r.gen_range(-0.8..0.8)).collect();
        let target: Vec<f64> = (0..2).map(|_| r.gen_range(-0.8..0.8)).collect();

        let loss_of = |nets: &PlannerNetworks| -> f64 {
            let (z, _) = enet_forward(nets, &cloud, Mode::Eval, &mut rng(0)).unwrap();
            let tape = pnet_forward(nets, &z, &c_t, &c_goal, Mode::Eval, &mut rng(0)).unwrap();
            mdn::nll_loss_and_grad(tape.output(), 2, 2, &target).unwrap().0
        };

        let (z, enet_tape) = enet_forward(&nets, &cloud, Mode::Eval, &mut rng(0)).unwrap();
        let tape = pnet_forward(&nets, &z, &c_t, &c_goal, Mode::Eval, &mut rng(0)).unwrap();
        let (_, d_raw) = mdn::nll_loss_and_grad(tape.output(), 2, 2, &target).unwrap();
        let (g_pnet, d_input) = backward(&nets.pnet, &tape, &d_raw).unwrap();
        let (g_point, g_post) = enet_backward(&nets, &enet_tape, &d_input[..z.len()]).unwrap();

        let h = 1e-5;
        for _ in 0..4 {
            let which = r.gen_range(0..3usize);
            let (layer, idx, analytic) = {
                let (net, grads) = match which {
                    0 => (&nets.point_mlp, &g_point),
                    1 => (&nets.post_mlp, &g_post),
                    _ => (&nets.pnet, &g_pnet),
                };
                let layer = r.gen_range(0..net.layers.len());
                let idx = r.gen_range(0..net.layers[layer].weights.len());
                (layer, idx, grads.d_weights[layer][idx])
            };
            let bump = |nets: &mut PlannerNetworks, delta: f64| {
                let net = match which {
                    0 => &mut nets.point_mlp,
                    1 => &mut nets.post_mlp,
                    _ => &mut nets.pnet,
                };
                net.layers[layer].weights[idx] += delta;
            };
            bump(&mut nets, h);
            let up = loss_of(&nets);
            bump(&mut nets, -2.0 * h);
            let down = loss_of(&nets);
            bump(&mut nets, h);
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(analytic.abs());
            if scale > 1e-6 {
                let rel = (fd - analytic).abs() / scale;
                max_rel = max_rel.max(rel);
                assert!(rel < 1e-4, "seed {seed}: fd={fd} analytic={analytic} rel={rel}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 300, "too few informative probes: {checked}");
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 1 must finish in under a minute, took {secs:.1}s");
    report(1, &format!("{checked} finite-difference probes over 100 seeds, max rel err {max_rel:.2e}, {secs:.1}s"));
}

// ---------------------------------------------------------------------------
// Criterion 2: GMM soundness

#[test]
fn criterion_2_gmm_density_sampler_soundness() {
    let t0 = Instant::now();

    // Normalization on a 2D quadrature grid.
    let params = mdn::GmmParams {
        alpha: vec![0.45, 0.55],
        mu: vec![vec![-1.2, 0.4], vec![1.8, -0.6]],
        sigma: vec![0.7, 1.2],
    };
    let (lo, hi) = (-1.2 - 8.0 * 1.2, 1.8 + 8.0 * 1.2);
    let n = 500;
    let h = (hi - lo) / n as f64;
    let mut integral = 0.0;
    for i in 0..n {
        let x = lo + (i as f64 + 0.5) * h;
        for j in 0..n {
            let y = lo + (j as f64 + 0.5) * h;
            integral += mdn::log_density(&params, &[x, y]).unwrap().exp();
        }
    }
    integral *= h * h;
    assert!((integral - 1.0).abs() <= 0.02, "integral {integral}");

    // Log-sum-exp agrees with the naive sum wherever it is representable.
    let mut max_gap = 0.0f64;
    let mut r = rng(2);
    for _ in 0..500 {
        let q = r.gen_range(1..5);
        let d = r.gen_range(1..4);
        let raw: Vec<f64> = (0..q * (d + 2)).map(|_| r.gen_range(-1.5..1.5)).collect();
        let p = mdn::constrain(&raw, q, d).unwrap();
        let c: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let naive: f64 = p
            .alpha
            .iter()
            .zip(p.mu.iter().zip(&p.sigma))
            .map(|(a, (mu, s))| {
                let sq: f64 = mu.iter().zip(&c).map(|(m, x)| (x - m) * (x - m)).sum();
                a / ((2.0 * std::f64::consts::PI).powf(d as f64 / 2.0) * s.powf(d as f64))
                    * (-sq / (2.0 * s * s)).exp()
            })
            .sum();
        if naive > f64::MIN_POSITIVE && naive.is_finite() {
            let gap = (mdn::log_density(&p, &c).unwrap() - naive.ln()).abs();
            max_gap = max_gap.max(gap);
            assert!(gap < 1e-12, "log-sum-exp vs naive gap {gap}");
        }
    }

    // Component frequencies within binomial 3-sigma at 1e5 draws.
    let alpha = [0.3, 0.7];
    let draws = 100_000;
    let mut r = rng(3);
    let hits = (0..draws).filter(|_| mdn::sample_component(&alpha, &mut r) == 0).count();
    let freq = hits as f64 / draws as f64;
    let sigma3 = 3.0 * (0.3 * 0.7 / draws as f64).sqrt();
    assert!((freq - 0.3).abs() <= sigma3, "component frequency {freq} outside 3 sigma");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 2 must finish in under a minute, took {secs:.1}s");
    report(
        2,
        &format!(
            "integral {integral:.4}, max lse gap {max_gap:.1e}, component freq {freq:.4} (3s = {sigma3:.4}), {secs:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: multimodality on the corridor benchmark

#[test]
fn criterion_3_corridor_multimodality() {
    let t0 = Instant::now();
    let bundle = corridor_bundle();

    let draws = 500;
    let (rate_mnp, rate_mse) = multimodal_eval(
        &bundle.mnp,
        &bundle.mse,
        &bundle.model,
        &bundle.scene,
        &bundle.c_init,
        &bundle.c_goal,
        draws,
        99,
    )
    .unwrap();
    assert!(rate_mnp <= 0.30, "multimodal head collision rate {rate_mnp} exceeds 0.30");
    assert!(rate_mse >= 0.35, "baseline collision rate {rate_mse} below 0.35");

    // Side mass: the mixture must cover both routes around the obstacle.
    let cloud = normalize_cloud(&bundle.scene);
    let (z, _) = enet_forward(&bundle.mnp, &cloud, Mode::Eval, &mut rng(0)).unwrap();
    let mut r = rng(404);
    let mut left = 0usize;
    let mut right = 0usize;
    for _ in 0..draws {
        let next = predict_next(&bundle.mnp, &z, &bundle.model, &bundle.c_init, &bundle.c_goal, &mut r)
            .unwrap();
        if next.0[0] < 0.0 {
            left += 1;
        } else {
            right += 1;
        }
    }
    let left_frac = left as f64 / draws as f64;
    let right_frac = right as f64 / draws as f64;
    assert!(left_frac >= 0.20, "left-side mass {left_frac} below 0.20");
    assert!(right_frac >= 0.20, "right-side mass {right_frac} below 0.20");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 1200.0, "criterion 3 must finish in under 20 minutes, took {secs:.0}s");
    report(
        3,
        &format!(
            "collision rates mnp {rate_mnp:.3} <= 0.30 < 0.35 <= mse {rate_mse:.3}; side mass {left_frac:.2}/{right_frac:.2}; {secs:.0}s"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: mean collapse on an analytic two-solution dataset

#[test]
fn criterion_4_mean_collapse() {
    let t0 = Instant::now();
    let ws = Workspace::symmetric(2, -20.0, 20.0).unwrap();
    let block = BoxObstacle::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap();
    let cloud = sample_cloud(&[block.clone()], 2, 64, 7).unwrap();
    let scene = Scene::new(ws.clone(), vec![block], cloud, 7).unwrap();
    let model = RobotModel::point2d(&ws).unwrap();

    let c_t = Configuration(vec![0.0, -10.0]);
    let c_goal = Configuration(vec![0.0, 10.0]);
    let left = Configuration(vec![-8.0, 0.0]);
    let right = Configuration(vec![8.0, 0.0]);
    let mut samples = Vec::new();
    for _ in 0..60 {
        for mode in [&left, &right] {
            samples.push(TrainingSample {
                scene_id: 0,
                c_t: c_t.clone(),
                c_goal: c_goal.clone(),
                c_next: mode.clone(),
            });
            samples.push(TrainingSample {
                scene_id: 0,
                c_t: mode.clone(),
                c_goal: c_goal.clone(),
                c_next: c_goal.clone(),
            });
        }
    }
    let dataset = Dataset { scenes: vec![scene.clone()], samples };
    let train_config = TrainConfig {
        arch: ArchConfig::tiny(5),
        adam: AdamParams { lr: 2e-3, ..AdamParams::default() },
        batch_size: 32,
        epochs: 250,
        patience: usize::MAX,
        val_fraction: 0.0,
    };
    let (mnp, _) = train_mnp(&dataset, &model, &train_config, 5).unwrap();
    let (mse, _) = train_mse_baseline(&dataset, &model, &train_config, 5).unwrap();

    // The squared-error head predicts the mode average, which sits inside
    // the obstacle dilated by the steering resolution.
    let cloud_n = normalize_cloud(&scene);
    let (z_mse, _) = enet_forward(&mse, &cloud_n, Mode::Eval, &mut rng(0)).unwrap();
    let tape = pnet_forward(
        &mse,
        &z_mse,
        &model.normalize(&c_t),
        &model.normalize(&c_goal),
        Mode::Eval,
        &mut rng(0),
    )
    .unwrap();
    let prediction = model.denormalize(tape.output());
    let dilation = model.delta_steer() * 20.0; // raw units for this workspace
    assert!(
        prediction.0[0].abs() <= 4.0 + dilation && prediction.0[1].abs() <= 2.0 + dilation,
        "baseline prediction {:?} escaped the dilated obstacle",
        prediction.0
    );

    // The mixture's two strongest components straddle the obstacle.
    let (z_mnp, _) = enet_forward(&mnp, &cloud_n, Mode::Eval, &mut rng(0)).unwrap();
    let gmm = mnp_core::nets::pnet_gmm(&mnp, &z_mnp, &model, &c_t, &c_goal, &mut rng(0)).unwrap();
    let mut order: Vec<usize> = (0..gmm.q_mix()).collect();
    order.sort_by(|a, b| gmm.alpha[*b].partial_cmp(&gmm.alpha[*a]).unwrap());
    let top0 = model.denormalize(&gmm.mu[order[0]]);
    let top1 = model.denormalize(&gmm.mu[order[1]]);
    let (xa, xb) = (top0.0[0], top1.0[0]);
    assert!(
        xa.signum() != xb.signum() && xa.abs() > 4.0 + dilation && xb.abs() > 4.0 + dilation,
        "top components do not straddle the obstacle: x = {xa:.2}, {xb:.2}"
    );

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 300.0, "criterion 4 must finish in under 5 minutes, took {secs:.0}s");
    report(
        4,
        &format!(
            "baseline collapses to {:?} (inside dilation {dilation:.2}); mixture modes at x {xa:.1} / {xb:.1}; {secs:.0}s"
        , prediction.0),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: completeness on pre-verified-solvable problems

#[test]
fn criterion_5_completeness() {
    let t0 = Instant::now();
    let bundle = desk_bundle();
    let problems = solvable_problems(bundle, 100, "accept-solvable");

    let plan_full = bundle.config.planner.to_plan_config(false);
    let plan_origin = bundle.config.planner.to_plan_config(false).origin();

    let mut full_ok = 0usize;
    let mut origin_ok = 0usize;
    for (i, (scene, start, goal)) in problems.iter().enumerate() {
        let mut r_full = rng(derive_seed(5, "accept-full", i as u64));
        let outcome =
            mnp_plan(&bundle.model, scene, start, goal, &bundle.nets, &plan_full, &mut r_full)
                .unwrap();
        if outcome.succeeded() {
            let path = outcome.path.as_ref().unwrap();
            assert!(path_feasible(&bundle.model, path, scene));
            assert_eq!(path.first(), start);
            assert_eq!(path.last(), goal);
            full_ok += 1;
        }
        let mut r_origin = rng(derive_seed(5, "accept-origin", i as u64));
        let outcome =
            mnp_plan(&bundle.model, scene, start, goal, &bundle.nets, &plan_origin, &mut r_origin)
                .unwrap();
        if outcome.succeeded() {
            origin_ok += 1;
        }
    }
    assert_eq!(full_ok, 100, "complete planner must solve all pre-verified problems");
    let origin_rate = origin_ok as f64 / 100.0;
    assert!(origin_rate >= 0.85, "no-replanner success rate {origin_rate} below 0.85");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 1800.0, "criterion 5 must finish in under 30 minutes, took {secs:.0}s");
    report(5, &format!("full 100/100, origin {origin_ok}/100 (>= 0.85 required); {secs:.0}s"));
}

// ---------------------------------------------------------------------------
// Criterion 6: classical planner optimality properties

#[test]
fn criterion_6_classical_optimality() {
    let t0 = Instant::now();
    let ws = Workspace::symmetric(2, -20.0, 20.0).unwrap();
    let model = RobotModel::point2d(&ws).unwrap();
    let empty = Scene::empty(ws.clone());
    let a = Configuration(vec![-15.0, 0.0]);
    let b = Configuration(vec![15.0, 0.0]);
    let straight = model.distance(&a, &b);

    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let budget = PlannerBudget { max_iterations: 5000, max_time: None, ..Default::default() };
        let mut diag = StarDiagnostics::default();
        let path = rrt_star_diag(&model, &empty, &a, &b, &budget, &mut diag, &mut rng(seed))
            .expect("empty scene always solves");
        ratios.push(path_length(&model, &path) / straight);
        assert!(
            diag.best_cost_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "best-cost trace must be non-increasing (seed {seed})"
        );
    }
    ratios.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = ratios[ratios.len() / 2];
    assert!(median <= 1.05, "median path ratio {median} above 1.05");

    // Informed sampling soundness: all post-solution samples in the set.
    let wall = BoxObstacle::new(vec![0.0, 0.0], vec![2.0, 8.0]).unwrap();
    let scene = Scene::new(ws, vec![wall], vec![], 0).unwrap();
    let budget = PlannerBudget { max_iterations: 4000, max_time: None, ..Default::default() };
    let mut diag = StarDiagnostics::default();
    informed_rrt_star_diag(
        &model,
        &scene,
        &Configuration(vec![-10.0, 0.0]),
        &Configuration(vec![10.0, 0.0]),
        &budget,
        &mut diag,
        &mut rng(7),
    )
    .unwrap();
    assert!(diag.informed_samples.len() >= 1000);
    let an = model.normalize(&Configuration(vec![-10.0, 0.0]));
    let bn = model.normalize(&Configuration(vec![10.0, 0.0]));
    let mut inside = 0usize;
    for (x, c_best) in &diag.informed_samples {
        let da: f64 = x.iter().zip(&an).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let db: f64 = x.iter().zip(&bn).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        if da + db <= c_best + 1e-9 {
            inside += 1;
        }
    }
    assert_eq!(inside, diag.informed_samples.len(), "informed samples escaped the spheroid");

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 600.0, "criterion 6 must finish in under 10 minutes, took {secs:.0}s");
    report(
        6,
        &format!(
            "median empty-scene ratio {median:.4} <= 1.05; {}/{} informed samples inside; {secs:.0}s",
            inside,
            diag.informed_samples.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: relative speed ordering

#[test]
fn criterion_7_speed_ordering() {
    let t0 = Instant::now();
    let bundle = desk_bundle();
    let problems = solvable_problems(bundle, 200, "accept-speed");
    let plan_full = bundle.config.planner.to_plan_config(false);

    let mut mnp_times = Vec::with_capacity(problems.len());
    let mut classical_times = Vec::with_capacity(problems.len());
    for (i, (scene, start, goal)) in problems.iter().enumerate() {
        let mut r = rng(derive_seed(7, "accept-mnp-time", i as u64));
        let outcome =
            mnp_plan(&bundle.model, scene, start, goal, &bundle.nets, &plan_full, &mut r).unwrap();
        assert!(outcome.succeeded());
        mnp_times.push(outcome.timings.total.as_secs_f64());
        let target =
            path_length(&bundle.model, outcome.path.as_ref().unwrap()) * 1.10;

        let mut budget = bundle.config.bench.classical_budget.to_budget();
        budget.stop_at_cost = Some(target);
        let mut r = rng(derive_seed(7, "accept-irrt-time", i as u64));
        let t_start = Instant::now();
        let result = informed_rrt_star(&bundle.model, scene, start, goal, &budget, &mut r);
        let elapsed = t_start.elapsed().as_secs_f64();
        // Budget-expired runs still count at their full elapsed time.
        let _ = result;
        classical_times.push(elapsed);
    }
    let median = |values: &mut Vec<f64>| -> f64 {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values[values.len() / 2]
    };
    let mnp_median = median(&mut mnp_times);
    let classical_median = median(&mut classical_times);
    assert!(
        mnp_median < classical_median,
        "median planner time {mnp_median:.4}s not below informed-RRT* {classical_median:.4}s"
    );
    let secs = t0.elapsed().as_secs_f64();
    report(
        7,
        &format!(
            "median times over {} problems: neural {mnp_median:.4}s < informed-RRT*-to-110% {classical_median:.4}s; {secs:.0}s",
            problems.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: determinism and file formats

#[test]
fn criterion_8_determinism_and_formats() {
    let t0 = Instant::now();

    // Scene generation at desk scale: byte-identical re-runs.
    let config = desk_config();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = gen_envs(&config, dir_a.path()).unwrap();
    let b = gen_envs(&config, dir_b.path()).unwrap();
    for (pa, pb) in a.seen.iter().chain(&a.unseen).zip(b.seen.iter().chain(&b.unseen)) {
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    }

    // Dataset and checkpoint determinism on a reduced run (same code paths).
    let mut small = desk_config();
    small.scene.seen_count = 3;
    small.scene.unseen_count = 1;
    small.scene.cloud_points = 50;
    small.expert.paths_per_scene = 4;
    small.expert.budget.max_iterations = 1000;
    small.train.arch = ArchConfig::tiny(3);
    small.train.epochs = 4;
    small.train.val_fraction = 0.0;
    for dir in [&dir_a, &dir_b] {
        gen_envs(&small, dir.path()).unwrap();
        gen_data(&small, dir.path()).unwrap();
        train_stage(&small, dir.path(), TrainRole::Mnp).unwrap();
    }
    let dataset_a = std::fs::read(dir_a.path().join("data/train.txt")).unwrap();
    let dataset_b = std::fs::read(dir_b.path().join("data/train.txt")).unwrap();
    assert_eq!(dataset_a, dataset_b, "datasets must re-run byte-identically");
    let ckpt_a = std::fs::read(dir_a.path().join("checkpoints/mnp.ckpt")).unwrap();
    let ckpt_b = std::fs::read(dir_b.path().join("checkpoints/mnp.ckpt")).unwrap();
    assert_eq!(ckpt_a, ckpt_b, "checkpoints must re-run byte-identically");

    // Checkpoint round trip is bit-exact; corruption is rejected.
    let loaded = load_checkpoint(&dir_a.path().join("checkpoints/mnp.ckpt")).unwrap();
    let resaved = dir_a.path().join("resaved.ckpt");
    save_checkpoint(&loaded, &resaved).unwrap();
    assert_eq!(ckpt_a, std::fs::read(&resaved).unwrap());
    let mut corrupted = ckpt_a.clone();
    let last = corrupted.len() - 1;
    corrupted[last] ^= 0x01;
    assert!(matches!(load_checkpoint_bytes(&corrupted), Err(CheckpointError::Checksum)));

    // Scene JSON round trip and SVG determinism.
    let scene_path = &a.seen[0];
    let text = std::fs::read_to_string(scene_path).unwrap();
    let scene = Scene::from_json_str(&text).unwrap();
    assert_eq!(text, scene.to_json_string());
    let input = VizInput {
        paths: vec![Path::new(vec![
            Configuration(vec![-15.0, -15.0]),
            Configuration(vec![15.0, 15.0]),
        ])],
        samples: vec![vec![0.0, 5.0]],
        init: Some(vec![-15.0, -15.0]),
        goal: Some(vec![15.0, 15.0]),
    };
    assert_eq!(render_svg(&scene, &input), render_svg(&scene, &input));

    let secs = t0.elapsed().as_secs_f64();
    report(8, &format!("scenes, datasets, checkpoints, and SVG all byte-stable; corruption rejected; {secs:.0}s"));
}

// ---------------------------------------------------------------------------
// Criterion 9: consolidated invariant suite

#[test]
fn criterion_9_invariant_suite() {
    let t0 = Instant::now();
    let ws = Workspace::symmetric(2, -20.0, 20.0).unwrap();
    let model = RobotModel::point2d(&ws).unwrap();

    // Enet permutation invariance on random clouds and weights.
    for seed in 0..20u64 {
        let nets =
            PlannerNetworks::init(&ArchConfig::tiny(3), 2, 2, HeadKind::Gmm { q_mix: 3 }, seed);
        let mut r = rng(derive_seed(9, "perm", seed));
        let cloud: Vec<Vec<f64>> = (0..24)
            .map(|_| (0..2).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let (z, _) = enet_forward(&nets, &cloud, Mode::Eval, &mut rng(0)).unwrap();
        let mut permuted = cloud.clone();
        permuted.rotate_left(seed as usize % 24);
        permuted.reverse();
        let (z_perm, _) = enet_forward(&nets, &permuted, Mode::Eval, &mut rng(0)).unwrap();
        assert_eq!(z, z_perm, "latent must be permutation invariant");
    }

    // steer_to symmetry.
    let obstacle = BoxObstacle::new(vec![2.0, -1.0], vec![3.0, 3.0]).unwrap();
    let scene = Scene::new(ws.clone(), vec![obstacle], vec![], 0).unwrap();
    let mut r = rng(99);
    for _ in 0..300 {
        let a = Configuration(vec![r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0)]);
        let b = Configuration(vec![r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0)]);
        assert_eq!(
            steer_to(&model, &a, &b, &scene),
            steer_to(&model, &b, &a, &scene),
            "steer_to symmetry"
        );
    }

    // path_simplify cost monotonicity and feasibility preservation on
    // planner outputs.
    let budget = PlannerBudget { max_iterations: 2000, max_time: None, ..Default::default() };
    let mut simplified_count = 0;
    let mut attempt = 0u64;
    while simplified_count < 30 {
        attempt += 1;
        let mut r = rng(derive_seed(9, "simplify", attempt));
        let Ok(a) = sample_free_config(&model, &scene, &mut r) else { continue };
        let Ok(b) = sample_free_config(&model, &scene, &mut r) else { continue };
        let Ok(path) = rrt(&model, &scene, &a, &b, &budget, &mut r) else { continue };
        let out = path_simplify(&model, &path, &scene);
        assert!(out.len() <= path.len());
        assert!(path_feasible(&model, &out, &scene));
        assert!(path_length(&model, &out) <= path_length(&model, &path) + 1e-12);
        simplified_count += 1;
    }

    // Tree cost recurrence through the public tree API.
    let mut tree = Tree::new(Configuration(vec![0.0, 10.0]));
    let mut r = rng(c9_seed());
    for _ in 0..300 {
        let target = Configuration(vec![r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0)]);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..tree.len() {
            let d = model.distance(tree.node(i), &target);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        let edge = model.distance(tree.node(best), &target);
        let idx = tree.insert(target, best, edge);
        if tree.len() > 2 {
            let nb = r.gen_range(1..tree.len() - 1);
            let through = tree.cost(idx) + model.distance(tree.node(idx), tree.node(nb));
            if through < tree.cost(nb) {
                let edge = model.distance(tree.node(idx), tree.node(nb));
                tree.rewire(nb, idx, edge);
            }
        }
        assert!(tree.check_cost_recurrence(&model), "tree cost recurrence");
    }

    // GmmParams constraint preservation for arbitrary finite raw heads.
    let mut r = rng(909);
    for _ in 0..500 {
        let q = r.gen_range(1..6);
        let d = r.gen_range(1..5);
        let raw: Vec<f64> = (0..q * (d + 2)).map(|_| r.gen_range(-80.0..80.0)).collect();
        mdn::constrain(&raw, q, d).unwrap().validate().unwrap();
    }

    let secs = t0.elapsed().as_secs_f64();
    report(9, &format!("permutation, symmetry, simplification, tree, and mixture invariants hold; {secs:.0}s"));
}

fn c9_seed() -> u64 {
    derive_seed(9, "tree", 0)
}
