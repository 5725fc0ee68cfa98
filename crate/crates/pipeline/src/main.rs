//! Command-line front end for the planning pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 planner failure (plan).

use clap::{Parser, Subcommand};
use mnp_pipeline::bench::{bench, multimodal_eval};
use mnp_pipeline::config::{ConfigError, RunConfig};
use mnp_pipeline::stages::{
    gen_data, gen_envs, load_networks, load_scene, train_stage, StageError, TrainRole,
};
use mnp_pipeline::viz::VizInput;
use mnp_core::nets::{enet_forward, normalize_cloud, predict_next};
use mnp_core::neuralnet::Mode;
use mnp_core::plan::mnp_plan_traced;
use mnp_core::robots::{path_length, Configuration, Path as RobotPath};
use mnp_core::seeding::derive_seed;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mnp", about = "Multimodal neural motion planner toolkit")]
struct Cli {
    /// Run configuration file (JSON). Defaults to the desk-scale 2D preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configuration's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all stages.
    #[arg(long, global = true, default_value = "runs/desk")]
    out_dir: PathBuf,
    /// Use full-scale environment/path counts and network widths.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Disable the plain-RRT fallback for empty bi-directional results.
    #[arg(long, global = true)]
    strict_paper: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the seen/unseen scene sets.
    GenEnvs,
    /// Generate expert paths and the training dataset.
    GenData,
    /// Train the multimodal planner.
    Train,
    /// Train the MSE/dropout baseline.
    TrainBaseline,
    /// Plan one problem with a trained checkpoint.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        /// Start configuration, comma-separated.
        #[arg(long)]
        start: String,
        /// Goal configuration, comma-separated.
        #[arg(long)]
        goal: String,
        /// Checkpoint file; defaults to <out-dir>/checkpoints/mnp.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write a per-iteration trace log here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the full benchmark table.
    Bench,
    /// Render a scene (plus optional path or sampled next configurations).
    Viz {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON file with a list of configurations to draw as a path.
        #[arg(long)]
        path_file: Option<PathBuf>,
        /// Sample next configurations from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 500)]
        draws: usize,
    },
    /// Compare next-configuration collision rates of the two checkpoints.
    MultimodalEval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 500)]
        draws: usize,
        #[arg(long)]
        checkpoint_mnp: Option<PathBuf>,
        #[arg(long)]
        checkpoint_mse: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error("planner failed to find a path")]
    PlanFailed,
    #[error("{0}")]
    Other(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::PlanFailed => 3,
            _ => 1,
        }
    }
}

fn parse_config_vector(text: &str) -> Result<Configuration, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    values
        .map(Configuration)
        .map_err(|e| CliError::Other(format!("bad configuration `{text}`: {e}")))
}

fn load_run_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::desk2d(),
    };
    if cli.paper_scale {
        config.apply_paper_scale();
    }
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_run_config(cli)?;
    match &cli.command {
        Command::GenEnvs => {
            let summary = gen_envs(&config, &cli.out_dir)?;
            println!(
                "wrote {} seen + {} unseen scenes under {}",
                summary.seen.len(),
                summary.unseen.len(),
                cli.out_dir.join("envs").display()
            );
        }
        Command::GenData => {
            let summary = gen_data(&config, &cli.out_dir)?;
            println!(
                "dataset {}: {} samples from {} expert paths ({} trivial skips, {} expert failures)",
                summary.dataset_file.display(),
                summary.sample_count,
                summary.path_count,
                summary.trivial_skips,
                summary.expert_failures
            );
        }
        Command::Train => {
            let summary = train_stage(&config, &cli.out_dir, TrainRole::Mnp)?;
            report_training(&summary);
        }
        Command::TrainBaseline => {
            let summary = train_stage(&config, &cli.out_dir, TrainRole::MseBaseline)?;
            report_training(&summary);
        }
        Command::Plan { scene, start, goal, checkpoint, trace } => {
            let scene = load_scene(scene)?;
            let model = config.robot_model()?;
            let start = parse_config_vector(start)?;
            let goal = parse_config_vector(goal)?;
            let ckpt_path = checkpoint
                .clone()
                .unwrap_or_else(|| cli.out_dir.join("checkpoints").join("mnp.ckpt"));
            let nets = load_networks(&ckpt_path)?;
            let plan_config = config.planner.to_plan_config(cli.strict_paper);
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, "cli-plan", 0));
            let mut events = Vec::new();
            let outcome = mnp_plan_traced(
                &model,
                &scene,
                &start,
                &goal,
                &nets,
                &plan_config,
                &mut rng,
                trace.as_ref().map(|_| &mut events).map(|e| &mut *e),
            )
            .map_err(|e| CliError::Other(e.to_string()))?;
            if let Some(trace_path) = trace {
                let lines: Vec<String> = events.iter().map(|e| e.to_line()).collect();
                std::fs::write(trace_path, lines.join("\n") + "\n")?;
            }
            match &outcome.path {
                Some(path) => {
                    println!(
                        "status: {:?}; length {:.4} (normalized); {} waypoints; total {:.4}s (encode {:.4}s, neural {:.4}s, replan {:.4}s)",
                        outcome.status,
                        path_length(&model, path),
                        path.len(),
                        outcome.timings.total.as_secs_f64(),
                        outcome.timings.encode.as_secs_f64(),
                        outcome.timings.neural.as_secs_f64(),
                        outcome.timings.replan.as_secs_f64(),
                    );
                    for waypoint in &path.waypoints {
                        println!("{:?}", waypoint.0);
                    }
                }
                None => return Err(CliError::PlanFailed),
            }
        }
        Command::Bench => {
            let output = bench(&config, &cli.out_dir, cli.strict_paper)?;
            println!("{}", std::fs::read_to_string(&output.summary_txt)?);
            println!(
                "records: {} ({} problems x {} methods)",
                output.records_csv.display(),
                output.records.len() / 6,
                6
            );
        }
        Command::Viz { scene, out, path_file, checkpoint, from, to, draws } => {
            let scene = load_scene(scene)?;
            let mut input = VizInput::default();
            if let Some(path_file) = path_file {
                let text = std::fs::read_to_string(path_file)?;
                let waypoints: Vec<Vec<f64>> = serde_json::from_str(&text)
                    .map_err(|e| CliError::Other(format!("bad path file: {e}")))?;
                input.paths.push(RobotPath::new(
                    waypoints.into_iter().map(Configuration).collect(),
                ));
            }
            if let (Some(ckpt), Some(from), Some(to)) = (checkpoint, from, to) {
                let model = config.robot_model()?;
                let nets = load_networks(ckpt)?;
                let c_t = parse_config_vector(from)?;
                let c_goal = parse_config_vector(to)?;
                let cloud = normalize_cloud(&scene);
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, "cli-viz", 0));
                let z = if cloud.is_empty() {
                    vec![0.0; nets.z_dim]
                } else {
                    enet_forward(&nets, &cloud, Mode::Eval, &mut rng)
                        .map_err(|e| CliError::Other(e.to_string()))?
                        .0
                };
                for _ in 0..*draws {
                    let next = predict_next(&nets, &z, &model, &c_t, &c_goal, &mut rng)
                        .map_err(|e| CliError::Other(e.to_string()))?;
                    input.samples.push(next.0);
                }
                input.init = Some(c_t.0.clone());
                input.goal = Some(c_goal.0.clone());
            }
            let config_json = serde_json::to_string(&config).expect("config serializes");
            let scene_text = scene.to_json_string();
            let meta = vec![
                ("config_hash".to_string(), mnp_pipeline::hash::content_hash(config_json.as_bytes())),
                ("scene_hash".to_string(), mnp_pipeline::hash::content_hash(scene_text.as_bytes())),
            ];
            let svg = mnp_pipeline::viz::render_svg_with_meta(&scene, &input, &meta);
            std::fs::write(out, svg)?;
            println!("wrote {}", out.display());
        }
        Command::MultimodalEval { scene, from, to, draws, checkpoint_mnp, checkpoint_mse } => {
            let scene = load_scene(scene)?;
            let model = config.robot_model()?;
            let c_t = parse_config_vector(from)?;
            let c_goal = parse_config_vector(to)?;
            let mnp_path = checkpoint_mnp
                .clone()
                .unwrap_or_else(|| cli.out_dir.join("checkpoints").join("mnp.ckpt"));
            let mse_path = checkpoint_mse
                .clone()
                .unwrap_or_else(|| cli.out_dir.join("checkpoints").join("mse.ckpt"));
            let nets_mnp = load_networks(&mnp_path)?;
            let nets_mse = load_networks(&mse_path)?;
            let (rate_mnp, rate_mse) = multimodal_eval(
                &nets_mnp,
                &nets_mse,
                &model,
                &scene,
                &c_t,
                &c_goal,
                *draws,
                config.master_seed,
            )?;
            println!("collision rate over {draws} draws: mnp {rate_mnp:.3}, mse {rate_mse:.3}");
        }
    }
    Ok(())
}

fn report_training(summary: &mnp_pipeline::stages::TrainSummary) {
    let last_train = summary.report.epoch_train_loss.last().copied().unwrap_or(f64::NAN);
    let last_val = summary.report.epoch_val_loss.last();
    println!(
        "checkpoint {}: {} epochs, final train loss {:.4}{}{}",
        summary.checkpoint.display(),
        summary.report.epoch_train_loss.len(),
        last_train,
        last_val.map_or(String::new(), |v| format!(", val loss {v:.4}")),
        if summary.report.stopped_early { " (early stop)" } else { "" },
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
