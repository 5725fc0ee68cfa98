//! Pipeline stages: environment generation, expert data generation, and
//! training. Each stage writes its outputs plus a manifest embedding the
//! full run configuration and content hashes, so re-runs are verifiably
//! byte-identical.

use crate::config::{ConfigError, ExpertPlanner, RunConfig};
use crate::dataset::{write_records, DatasetError, Record};
use crate::hash::content_hash;
use mnp_core::classical::{informed_rrt_star, path_simplify, rrt_star, PlannerBudget};
use mnp_core::geometry::{generate_scene, GeometryError, Scene};
use mnp_core::nets::{train_mnp, train_mse_baseline, TrainError, TrainReport};
use mnp_core::robots::{path_length, phi, steer_to, Configuration, RobotModel};
use mnp_core::seeding::derive_seed;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] mnp_core::neuralnet::checkpoint::CheckpointError),
    #[error("could not sample a collision-free configuration after {0} attempts")]
    SamplingExhausted(usize),
    #[error("expert failed to produce a path for scene {scene} (slot {slot})")]
    ExpertExhausted { scene: String, slot: usize },
    #[error("missing stage output: {0}")]
    MissingInput(String),
}

/// Write a stage manifest: full config plus named content hashes.
fn write_manifest(
    dir: &Path,
    stage: &str,
    config: &RunConfig,
    inputs: &[(String, String)],
    outputs: &[(String, String)],
) -> Result<(), StageError> {
    let manifest = serde_json::json!({
        "stage": stage,
        "config": config,
        "inputs": inputs.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
        "outputs": outputs.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

pub struct EnvSummary {
    pub seen: Vec<PathBuf>,
    pub unseen: Vec<PathBuf>,
}

/// Generate the seen/unseen scene sets. Deterministic: scene i of each set
/// has its own seed derived from the master seed and the set tag.
pub fn gen_envs(config: &RunConfig, out_dir: &Path) -> Result<EnvSummary, StageError> {
    let envs = out_dir.join("envs");
    fs::create_dir_all(&envs)?;
    let gen_config = config.scene.gen_config();

    let mut outputs = Vec::new();
    let mut seen = Vec::new();
    let mut unseen = Vec::new();
    for (tag, count, paths) in [
        ("seen", config.scene.seen_count, &mut seen),
        ("unseen", config.scene.unseen_count, &mut unseen),
    ] {
        for i in 0..count {
            let seed = derive_seed(config.master_seed, &format!("env-{tag}"), i as u64);
            let scene = generate_scene(&gen_config, seed)?;
            let name = format!("{tag}_{i:03}.json");
            let text = scene.to_json_string();
            fs::write(envs.join(&name), &text)?;
            outputs.push((name.clone(), content_hash(text.as_bytes())));
            paths.push(envs.join(&name));
        }
    }
    write_manifest(&envs, "gen-envs", config, &[], &outputs)?;
    Ok(EnvSummary { seen, unseen })
}

/// List generated env files, sorted by name.
pub fn env_files(out_dir: &Path, set: &str) -> Result<Vec<PathBuf>, StageError> {
    let envs = out_dir.join("envs");
    if !envs.is_dir() {
        return Err(StageError::MissingInput(format!("{} (run gen-envs first)", envs.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&envs)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(set) && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_scene(path: &Path) -> Result<Scene, StageError> {
    let text = fs::read_to_string(path)?;
    Ok(Scene::from_json_str(&text)?)
}

/// Rejection-sample a collision-free configuration.
pub fn sample_free_config(
    model: &RobotModel,
    scene: &Scene,
    rng: &mut impl Rng,
) -> Result<Configuration, StageError> {
    const ATTEMPTS: usize = 10_000;
    for _ in 0..ATTEMPTS {
        let c = Configuration(
            model
                .lower()
                .iter()
                .zip(model.upper())
                .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                .collect(),
        );
        if !phi(model, &c, scene) {
            return Ok(c);
        }
    }
    Err(StageError::SamplingExhausted(ATTEMPTS))
}

fn expert_plan(
    planner: &ExpertPlanner,
    model: &RobotModel,
    scene: &Scene,
    start: &Configuration,
    goal: &Configuration,
    budget: &PlannerBudget,
    rng: &mut impl Rng,
) -> Option<mnp_core::robots::Path> {
    let result = match planner {
        ExpertPlanner::RrtStar => rrt_star(model, scene, start, goal, budget, rng),
        ExpertPlanner::InformedRrtStar => {
            informed_rrt_star(model, scene, start, goal, budget, rng)
        }
    };
    result.ok()
}

pub struct DataSummary {
    pub dataset_file: PathBuf,
    pub sample_count: usize,
    pub path_count: usize,
    pub trivial_skips: usize,
    pub expert_failures: usize,
}

struct SceneHarvest {
    records: Vec<Record>,
    path_meta: Vec<(usize, f64, usize)>, // (path slot, expert cost, waypoints)
    trivial_skips: usize,
    expert_failures: usize,
}

/// Generate expert paths on every seen scene and decompose them into
/// training tuples. Problems whose endpoints connect in a straight line are
/// discarded and resampled; expert failures likewise, with counts logged.
pub fn gen_data(config: &RunConfig, out_dir: &Path) -> Result<DataSummary, StageError> {
    let model = config.robot_model()?;
    let seen = env_files(out_dir, "seen")?;
    if seen.is_empty() {
        return Err(StageError::MissingInput("no seen env files".into()));
    }
    let budget = config.expert.budget.to_budget();

    let harvests: Vec<Result<SceneHarvest, StageError>> = seen
        .par_iter()
        .enumerate()
        .map(|(scene_idx, path)| {
            let scene = load_scene(path)?;
            let rel = format!(
                "envs/{}",
                path.file_name().and_then(|n| n.to_str()).expect("generated name")
            );
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.master_seed,
                "expert",
                scene_idx as u64,
            ));
            let mut harvest = SceneHarvest {
                records: Vec::new(),
                path_meta: Vec::new(),
                trivial_skips: 0,
                expert_failures: 0,
            };
            for slot in 0..config.expert.paths_per_scene {
                let mut produced = false;
                for _ in 0..config.expert.max_attempts_per_path {
                    let start = sample_free_config(&model, &scene, &mut rng)?;
                    let goal = sample_free_config(&model, &scene, &mut rng)?;
                    if steer_to(&model, &start, &goal, &scene) {
                        harvest.trivial_skips += 1;
                        continue;
                    }
                    let Some(path) = expert_plan(
                        &config.expert.planner,
                        &model,
                        &scene,
                        &start,
                        &goal,
                        &budget,
                        &mut rng,
                    ) else {
                        harvest.expert_failures += 1;
                        continue;
                    };
                    let simplified = path_simplify(&model, &path, &scene);
                    // A simplifiable-to-segment path would have been caught
                    // by the trivial filter above.
                    debug_assert!(simplified.len() >= 3);
                    let goal_cfg = simplified.last().clone();
                    for pair in simplified.waypoints.windows(2) {
                        harvest.records.push(Record {
                            scene_file: rel.clone(),
                            c_t: pair[0].0.clone(),
                            c_goal: goal_cfg.0.clone(),
                            c_next: pair[1].0.clone(),
                        });
                    }
                    harvest.path_meta.push((
                        slot,
                        path_length(&model, &simplified),
                        simplified.len(),
                    ));
                    produced = true;
                    break;
                }
                if !produced {
                    return Err(StageError::ExpertExhausted { scene: rel.clone(), slot });
                }
            }
            Ok(harvest)
        })
        .collect();

    let mut records = Vec::new();
    let mut trivial_skips = 0;
    let mut expert_failures = 0;
    let mut path_count = 0;
    let mut costs_csv = String::from("scene_file,path_slot,expert_cost,waypoints\n");
    for (scene_idx, harvest) in harvests.into_iter().enumerate() {
        let harvest = harvest?;
        trivial_skips += harvest.trivial_skips;
        expert_failures += harvest.expert_failures;
        path_count += harvest.path_meta.len();
        let rel = format!(
            "envs/{}",
            seen[scene_idx].file_name().and_then(|n| n.to_str()).expect("generated name")
        );
        for (slot, cost, waypoints) in &harvest.path_meta {
            let _ = writeln!(costs_csv, "{rel},{slot},{cost:.16e},{waypoints}");
        }
        records.extend(harvest.records);
    }

    let data_dir = out_dir.join("data");
    fs::create_dir_all(&data_dir)?;
    let config_json = serde_json::to_string(config).expect("config serializes");
    let header = vec![
        ("robot".to_string(), format!("{:?}", config.robot)),
        ("config_hash".to_string(), content_hash(config_json.as_bytes())),
        ("trivial_skips".to_string(), trivial_skips.to_string()),
        ("expert_failures".to_string(), expert_failures.to_string()),
    ];
    let text = write_records(&records, model.dim(), &header);
    let dataset_file = data_dir.join("train.txt");
    fs::write(&dataset_file, &text)?;
    fs::write(data_dir.join("expert_paths.csv"), &costs_csv)?;

    write_manifest(
        &data_dir,
        "gen-data",
        config,
        &seen
            .iter()
            .map(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).expect("name").to_string();
                let bytes = fs::read(p).unwrap_or_default();
                (name, content_hash(&bytes))
            })
            .collect::<Vec<_>>(),
        &[
            ("train.txt".to_string(), content_hash(text.as_bytes())),
            ("expert_paths.csv".to_string(), content_hash(costs_csv.as_bytes())),
        ],
    )?;

    Ok(DataSummary {
        dataset_file,
        sample_count: records.len(),
        path_count,
        trivial_skips,
        expert_failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainRole {
    Mnp,
    MseBaseline,
}

impl TrainRole {
    pub fn tag(&self) -> &'static str {
        match self {
            TrainRole::Mnp => "mnp",
            TrainRole::MseBaseline => "mse",
        }
    }
}

pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub report: TrainReport,
}

/// Train one network role on the generated dataset and save a checkpoint
/// whose metadata embeds the full config and the dataset hash.
pub fn train_stage(
    config: &RunConfig,
    out_dir: &Path,
    role: TrainRole,
) -> Result<TrainSummary, StageError> {
    let dataset_path = out_dir.join("data").join("train.txt");
    if !dataset_path.is_file() {
        return Err(StageError::MissingInput(format!(
            "{} (run gen-data first)",
            dataset_path.display()
        )));
    }
    let dataset = crate::dataset::load_dataset(&dataset_path, out_dir)?;
    let model = config.robot_model()?;
    let train_config = config.train.to_train_config();
    let seed = derive_seed(config.master_seed, &format!("train-{}", role.tag()), 0);

    let (nets, report) = match role {
        TrainRole::Mnp => train_mnp(&dataset, &model, &train_config, seed)?,
        TrainRole::MseBaseline => train_mse_baseline(&dataset, &model, &train_config, seed)?,
    };

    let ckpt_dir = out_dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let dataset_bytes = fs::read(&dataset_path)?;
    let ckpt = nets.to_checkpoint(serde_json::json!({
        "config": config,
        "dataset_hash": content_hash(&dataset_bytes),
        "train_seed": seed,
        "epochs_run": report.epoch_train_loss.len(),
        "stopped_early": report.stopped_early,
    }));
    let ckpt_path = ckpt_dir.join(format!("{}.ckpt", role.tag()));
    mnp_core::neuralnet::checkpoint::save_checkpoint(&ckpt, &ckpt_path)?;

    let mut loss_csv = String::from("epoch,train_loss,val_loss\n");
    for (i, train_loss) in report.epoch_train_loss.iter().enumerate() {
        let val = report
            .epoch_val_loss
            .get(i)
            .map_or(String::new(), |v| format!("{v:.16e}"));
        let _ = writeln!(loss_csv, "{i},{train_loss:.16e},{val}");
    }
    fs::write(ckpt_dir.join(format!("{}_loss.csv", role.tag())), &loss_csv)?;

    Ok(TrainSummary { checkpoint: ckpt_path, report })
}

/// Load a checkpoint back into planner networks.
pub fn load_networks(path: &Path) -> Result<mnp_core::nets::PlannerNetworks, StageError> {
    let ckpt = mnp_core::neuralnet::checkpoint::load_checkpoint(path)?;
    Ok(mnp_core::nets::PlannerNetworks::from_checkpoint(&ckpt)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn tiny_config() -> RunConfig {
        let mut config = RunConfig::desk2d();
        config.scene.seen_count = 2;
        config.scene.unseen_count = 1;
        config.scene.cloud_points = 40;
        config.expert.paths_per_scene = 3;
        config.expert.budget.max_iterations = 800;
        config.expert.budget.max_time_secs = None;
        config.train.arch = mnp_core::nets::ArchConfig::tiny(3);
        config.train.epochs = 3;
        config.train.batch_size = 16;
        config.train.val_fraction = 0.0;
        config
    }

    #[test]
    fn gen_envs_is_byte_deterministic() {
        let config = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = gen_envs(&config, dir_a.path()).unwrap();
        let b = gen_envs(&config, dir_b.path()).unwrap();
        assert_eq!(a.seen.len(), 2);
        assert_eq!(a.unseen.len(), 1);
        for (pa, pb) in a.seen.iter().chain(&a.unseen).zip(b.seen.iter().chain(&b.unseen)) {
            assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
        }
        // Seed streams are disjoint: no file is shared between sets.
        let seen_bytes = fs::read(&a.seen[0]).unwrap();
        let unseen_bytes = fs::read(&a.unseen[0]).unwrap();
        assert_ne!(seen_bytes, unseen_bytes);
    }

    #[test]
    fn gen_data_produces_structured_samples() {
        let config = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        gen_envs(&config, dir.path()).unwrap();
        let summary = gen_data(&config, dir.path()).unwrap();
        // Every kept path decomposes into at least 2 segments.
        assert!(summary.sample_count >= 2 * summary.path_count);
        assert_eq!(summary.path_count, 2 * 3);

        let dataset =
            crate::dataset::load_dataset(&summary.dataset_file, dir.path()).unwrap();
        assert_eq!(dataset.samples.len(), summary.sample_count);
        let model = config.robot_model().unwrap();
        for s in &dataset.samples {
            let scene = &dataset.scenes[s.scene_id];
            assert!(!phi(&model, &s.c_t, scene));
            assert!(!phi(&model, &s.c_next, scene));
            assert!(steer_to(&model, &s.c_t, &s.c_next, scene));
            assert_ne!(s.c_t, s.c_next);
        }
    }

    #[test]
    fn gen_data_is_deterministic() {
        let config = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        gen_envs(&config, dir_a.path()).unwrap();
        gen_envs(&config, dir_b.path()).unwrap();
        gen_data(&config, dir_a.path()).unwrap();
        gen_data(&config, dir_b.path()).unwrap();
        let a = fs::read(dir_a.path().join("data/train.txt")).unwrap();
        let b = fs::read(dir_b.path().join("data/train.txt")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_stage_writes_checkpoint_and_trace() {
        let config = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        gen_envs(&config, dir.path()).unwrap();
        gen_data(&config, dir.path()).unwrap();
        let summary = train_stage(&config, dir.path(), TrainRole::Mnp).unwrap();
        assert!(summary.checkpoint.is_file());
        assert_eq!(summary.report.epoch_train_loss.len(), 3);
        let nets = load_networks(&summary.checkpoint).unwrap();
        assert_eq!(nets.head.role_tag(), "mnp");

        // Re-training with the same inputs reproduces the checkpoint bytes.
        let summary2 = train_stage(&config, dir.path(), TrainRole::Mnp).unwrap();
        assert_eq!(fs::read(&summary.checkpoint).unwrap(), fs::read(&summary2.checkpoint).unwrap());
    }
}
