//! The planning networks: a point-cloud encoder (shared per-point MLP,
//! max-pool over points, post MLP) producing a latent vector Z, and a
//! planning head mapping `[Z, c_t, c_goal]` to either Gaussian-mixture
//! parameters or a direct point estimate (the MSE/dropout baseline).
//!
//! Both heads train jointly with the encoder: gradients flow from the head
//! loss back through Z into the per-point MLP. Inputs are normalized: cloud
//! points by workspace bounds, configurations by the robot model's bounds.

use crate::geometry::Scene;
use crate::mdn::{self, GmmParams, MdnError};
use crate::neuralnet::checkpoint::{Checkpoint, CheckpointError};
use crate::neuralnet::{
    adam_step, backward, forward, maxpool_points, Activation, AdamParams, AdamState, DenseLayer,
    Gradients, Mode, NetError, NetworkParams, Tape,
};
use crate::robots::{Configuration, RobotModel};
use crate::seeding::derive_seed;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample references missing scene {0}")]
    BadSceneRef(usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss { epoch: usize, batch: usize, detail: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Mdn(#[from] MdnError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint metadata: {0}")]
    Metadata(String),
}

/// Output head variant: mixture density (the multimodal planner) or a direct
/// point estimate trained with squared error (the baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "head", rename_all = "snake_case")]
pub enum HeadKind {
    Gmm { q_mix: usize },
    PointEstimate,
}

impl HeadKind {
    pub fn role_tag(&self) -> &'static str {
        match self {
            HeadKind::Gmm { .. } => "mnp",
            HeadKind::PointEstimate => "mse_baseline",
        }
    }
}

/// Network widths. Desk-scale presets halve the full-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Hidden widths of the shared per-point MLP.
    pub point_mlp: Vec<usize>,
    /// Widths after the max-pool; the last entry is the latent size z_dim.
    pub post_mlp: Vec<usize>,
    /// Hidden widths of the planning MLP.
    pub pnet_hidden: Vec<usize>,
    pub q_mix: usize,
    /// Dropout probability on the baseline head's hidden layers.
    pub baseline_dropout: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            point_mlp: vec![64, 128],
            post_mlp: vec![128],
            pnet_hidden: vec![512, 512, 256],
            q_mix: 5,
            baseline_dropout: 0.5,
        }
    }
}

impl ArchConfig {
    /// Halved widths for laptop-scale runs.
    pub fn desk() -> Self {
        Self {
            point_mlp: vec![32, 64],
            post_mlp: vec![64],
            pnet_hidden: vec![256, 256, 128],
            q_mix: 5,
            baseline_dropout: 0.5,
        }
    }

    /// Small widths for gradient checks and unit tests.
    pub fn tiny(q_mix: usize) -> Self {
        Self {
            point_mlp: vec![8],
            post_mlp: vec![8],
            pnet_hidden: vec![8],
            q_mix,
            baseline_dropout: 0.5,
        }
    }
}

/// Encoder plus planning head with everything needed to run them.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerNetworks {
    pub point_mlp: NetworkParams,
    pub post_mlp: NetworkParams,
    pub pnet: NetworkParams,
    pub head: HeadKind,
    pub workspace_dim: usize,
    pub config_dim: usize,
    pub z_dim: usize,
}

impl PlannerNetworks {
    pub fn init(
        arch: &ArchConfig,
        workspace_dim: usize,
        config_dim: usize,
        head: HeadKind,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "net-init", 0));
        let mut point_layers = Vec::new();
        let mut in_dim = workspace_dim;
        for &w in &arch.point_mlp {
            point_layers.push(DenseLayer::init(in_dim, w, Activation::Relu, &mut rng));
            in_dim = w;
        }
        let mut post_layers = Vec::new();
        for &w in &arch.post_mlp {
            post_layers.push(DenseLayer::init(in_dim, w, Activation::Relu, &mut rng));
            in_dim = w;
        }
        let z_dim = in_dim;

        let head_len = match head {
            HeadKind::Gmm { q_mix } => q_mix * (config_dim + 2),
            HeadKind::PointEstimate => config_dim,
        };
        let mut pnet_layers = Vec::new();
        let mut pnet_dropout = Vec::new();
        let mut in_dim = z_dim + 2 * config_dim;
        for &w in &arch.pnet_hidden {
            pnet_layers.push(DenseLayer::init(in_dim, w, Activation::Relu, &mut rng));
            pnet_dropout.push(match head {
                HeadKind::PointEstimate => arch.baseline_dropout,
                HeadKind::Gmm { .. } => 0.0,
            });
            in_dim = w;
        }
        pnet_layers.push(DenseLayer::init(in_dim, head_len, Activation::Identity, &mut rng));
        pnet_dropout.push(0.0);

        Self {
            point_mlp: NetworkParams::new(point_layers),
            post_mlp: NetworkParams::new(post_layers),
            pnet: NetworkParams::with_dropout(pnet_layers, pnet_dropout),
            head,
            workspace_dim,
            config_dim,
            z_dim,
        }
    }

    pub fn q_mix(&self) -> usize {
        match self.head {
            HeadKind::Gmm { q_mix } => q_mix,
            HeadKind::PointEstimate => 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.point_mlp.param_count() + self.post_mlp.param_count() + self.pnet.param_count()
    }

    pub fn to_checkpoint(&self, extra_metadata: serde_json::Value) -> Checkpoint {
        let metadata = serde_json::json!({
            "role": self.head.role_tag(),
            "head": serde_json::to_value(self.head).expect("head serializes"),
            "workspace_dim": self.workspace_dim,
            "config_dim": self.config_dim,
            "z_dim": self.z_dim,
            "extra": extra_metadata,
        });
        Checkpoint {
            networks: vec![
                ("enet_point".into(), self.point_mlp.clone()),
                ("enet_post".into(), self.post_mlp.clone()),
                ("pnet".into(), self.pnet.clone()),
            ],
            metadata,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, TrainError> {
        let meta = &ckpt.metadata;
        let head: HeadKind = serde_json::from_value(
            meta.get("head").cloned().ok_or_else(|| TrainError::Metadata("missing head".into()))?,
        )
        .map_err(|e| TrainError::Metadata(e.to_string()))?;
        let field = |name: &str| -> Result<usize, TrainError> {
            meta.get(name)
                .and_then(serde_json::Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| TrainError::Metadata(format!("missing {name}")))
        };
        let get = |name: &str| -> Result<NetworkParams, TrainError> {
            ckpt.network(name)
                .cloned()
                .ok_or_else(|| TrainError::Metadata(format!("missing network {name}")))
        };
        Ok(Self {
            point_mlp: get("enet_point")?,
            post_mlp: get("enet_post")?,
            pnet: get("pnet")?,
            head,
            workspace_dim: field("workspace_dim")?,
            config_dim: field("config_dim")?,
            z_dim: field("z_dim")?,
        })
    }
}

/// Cloud points normalized to `[-1, 1]^m` by the workspace bounds.
pub fn normalize_cloud(scene: &Scene) -> Vec<Vec<f64>> {
    let ws = scene.workspace();
    scene
        .cloud()
        .iter()
        .map(|p| {
            p.iter()
                .zip(ws.lo().iter().zip(ws.hi()))
                .map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
                .collect()
        })
        .collect()
}

/// Forward intermediates of the encoder, for the joint backward pass.
pub struct EnetTape {
    point_tapes: Vec<Tape>,
    argmax: Vec<usize>,
    post_tape: Tape,
}

/// Encode a normalized cloud into the latent vector Z.
pub fn enet_forward(
    nets: &PlannerNetworks,
    cloud_normalized: &[Vec<f64>],
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, EnetTape), NetError> {
    if cloud_normalized.is_empty() {
        return Err(NetError::EmptyPool);
    }
    let mut point_tapes = Vec::with_capacity(cloud_normalized.len());
    let mut features = Vec::with_capacity(cloud_normalized.len());
    for p in cloud_normalized {
        let tape = forward(&nets.point_mlp, p, mode, rng)?;
        features.push(tape.output().to_vec());
        point_tapes.push(tape);
    }
    let (pooled, argmax) = maxpool_points(&features)?;
    let post_tape = forward(&nets.post_mlp, &pooled, mode, rng)?;
    let z = post_tape.output().to_vec();
    Ok((z, EnetTape { point_tapes, argmax, post_tape }))
}

/// Backward through the encoder: post MLP, then gradient routed to each
/// feature's argmax point, then accumulated through the shared per-point MLP.
pub fn enet_backward(
    nets: &PlannerNetworks,
    tape: &EnetTape,
    d_z: &[f64],
) -> Result<(Gradients, Gradients), NetError> {
    let (post_grads, d_pooled) = backward(&nets.post_mlp, &tape.post_tape, d_z)?;

    let feature_dim = d_pooled.len();
    let mut point_grads = Gradients::zeros_like(&nets.point_mlp);
    // Group routed gradients by source point; only argmax points contribute.
    let mut routed: std::collections::BTreeMap<usize, Vec<f64>> = std::collections::BTreeMap::new();
    for j in 0..feature_dim {
        if d_pooled[j] != 0.0 {
            routed.entry(tape.argmax[j]).or_insert_with(|| vec![0.0; feature_dim])[j] +=
                d_pooled[j];
        }
    }
    for (point_idx, grad_vec) in routed {
        let (g, _) = backward(&nets.point_mlp, &tape.point_tapes[point_idx], &grad_vec)?;
        point_grads.accumulate(&g);
    }
    Ok((point_grads, post_grads))
}

/// Raw planning-head output for `[Z, c_t, c_goal]` (normalized configs).
pub fn pnet_forward(
    nets: &PlannerNetworks,
    z: &[f64],
    c_t_norm: &[f64],
    c_goal_norm: &[f64],
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<Tape, NetError> {
    let mut input = Vec::with_capacity(z.len() + c_t_norm.len() + c_goal_norm.len());
    input.extend_from_slice(z);
    input.extend_from_slice(c_t_norm);
    input.extend_from_slice(c_goal_norm);
    forward(&nets.pnet, &input, mode, rng)
}

/// Mixture parameters at `(c_t, c_goal)` for a GMM-head network.
pub fn pnet_gmm(
    nets: &PlannerNetworks,
    z: &[f64],
    model: &RobotModel,
    c_t: &Configuration,
    c_goal: &Configuration,
    rng: &mut impl Rng,
) -> Result<GmmParams, TrainError> {
    let HeadKind::Gmm { q_mix } = nets.head else {
        return Err(TrainError::Metadata("pnet_gmm requires a GMM head".into()));
    };
    let tape = pnet_forward(
        nets,
        z,
        &model.normalize(c_t),
        &model.normalize(c_goal),
        Mode::Eval,
        rng,
    )?;
    Ok(mdn::constrain(tape.output(), q_mix, nets.config_dim)?)
}

/// Sample the next configuration. GMM heads sample the mixture in
/// normalized coordinates; the point-estimate baseline runs a stochastic
/// forward pass with dropout active. Output is denormalized and clamped
/// into bounds.
pub fn predict_next(
    nets: &PlannerNetworks,
    z: &[f64],
    model: &RobotModel,
    c_t: &Configuration,
    c_goal: &Configuration,
    rng: &mut impl Rng,
) -> Result<Configuration, TrainError> {
    let normalized = match nets.head {
        HeadKind::Gmm { q_mix } => {
            let tape = pnet_forward(
                nets,
                z,
                &model.normalize(c_t),
                &model.normalize(c_goal),
                Mode::Eval,
                rng,
            )?;
            let params = mdn::constrain(tape.output(), q_mix, nets.config_dim)?;
            mdn::sample(&params, rng)
        }
        HeadKind::PointEstimate => {
            let tape = pnet_forward(
                nets,
                z,
                &model.normalize(c_t),
                &model.normalize(c_goal),
                Mode::Train,
                rng,
            )?;
            tape.output().to_vec()
        }
    };
    Ok(model.clamp(&model.denormalize(&normalized)))
}

/// One supervised tuple: predict `c_next` from `(c_t, c_goal, scene)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub scene_id: usize,
    pub c_t: Configuration,
    pub c_goal: Configuration,
    pub c_next: Configuration,
}

/// Scenes plus the samples referencing them by index.
pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub samples: Vec<TrainingSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    pub adam: AdamParams,
    pub batch_size: usize,
    pub epochs: usize,
    /// Early-stop patience on validation NLL (epochs without improvement).
    pub patience: usize,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: ArchConfig::default(),
            adam: AdamParams::default(),
            batch_size: 256,
            epochs: 100,
            patience: 10,
            val_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_train_loss: Vec<f64>,
    pub epoch_val_loss: Vec<f64>,
    pub stopped_early: bool,
}

/// Train the multimodal planner (GMM head, NLL loss).
pub fn train_mnp(
    dataset: &Dataset,
    model: &RobotModel,
    config: &TrainConfig,
    seed: u64,
) -> Result<(PlannerNetworks, TrainReport), TrainError> {
    train(dataset, model, config, HeadKind::Gmm { q_mix: config.arch.q_mix }, seed)
}

/// Train the MSE baseline (point-estimate head, squared-error loss, dropout
/// on the hidden layers).
pub fn train_mse_baseline(
    dataset: &Dataset,
    model: &RobotModel,
    config: &TrainConfig,
    seed: u64,
) -> Result<(PlannerNetworks, TrainReport), TrainError> {
    train(dataset, model, config, HeadKind::PointEstimate, seed)
}

/// Per-sample loss and gradient with respect to the raw head output.
fn head_loss_and_grad(
    head: HeadKind,
    raw: &[f64],
    config_dim: usize,
    target_norm: &[f64],
) -> Result<(f64, Vec<f64>), TrainError> {
    match head {
        HeadKind::Gmm { q_mix } => {
            let (loss, grad) = mdn::nll_loss_and_grad(raw, q_mix, config_dim, target_norm)?;
            // Constraint preservation is asserted on every emitted mixture.
            mdn::constrain(raw, q_mix, config_dim)?.validate()?;
            Ok((loss, grad))
        }
        HeadKind::PointEstimate => {
            let loss: f64 =
                raw.iter().zip(target_norm).map(|(y, t)| (y - t) * (y - t)).sum();
            let grad = raw.iter().zip(target_norm).map(|(y, t)| 2.0 * (y - t)).collect();
            Ok((loss, grad))
        }
    }
}

fn train(
    dataset: &Dataset,
    model: &RobotModel,
    config: &TrainConfig,
    head: HeadKind,
    seed: u64,
) -> Result<(PlannerNetworks, TrainReport), TrainError> {
    if dataset.samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for s in &dataset.samples {
        if s.scene_id >= dataset.scenes.len() {
            return Err(TrainError::BadSceneRef(s.scene_id));
        }
    }
    let workspace_dim = dataset.scenes[0].dim();
    let clouds: Vec<Vec<Vec<f64>>> = dataset.scenes.iter().map(normalize_cloud).collect();
    let targets: Vec<Vec<f64>> =
        dataset.samples.iter().map(|s| model.normalize(&s.c_next)).collect();
    let inputs_t: Vec<Vec<f64>> =
        dataset.samples.iter().map(|s| model.normalize(&s.c_t)).collect();
    let inputs_goal: Vec<Vec<f64>> =
        dataset.samples.iter().map(|s| model.normalize(&s.c_goal)).collect();

    let mut nets = PlannerNetworks::init(&config.arch, workspace_dim, model.dim(), head, seed);
    let mut opt_point = AdamState::new(&nets.point_mlp, config.adam);
    let mut opt_post = AdamState::new(&nets.post_mlp, config.adam);
    let mut opt_pnet = AdamState::new(&nets.pnet, config.adam);

    // Deterministic train/validation split.
    let mut split_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "split", 0));
    let mut order: Vec<usize> = (0..dataset.samples.len()).collect();
    shuffle(&mut order, &mut split_rng);
    let n_val = ((dataset.samples.len() as f64) * config.val_fraction).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    train_idx.sort_unstable();

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "dropout", 0));
    let mut report = TrainReport::default();
    let mut best_val = f64::INFINITY;
    let mut stale_epochs = 0usize;

    for epoch in 0..config.epochs {
        // Scene-blocked batching: one encoder evaluation covers a run of
        // samples from the same scene, which is what makes joint training
        // affordable when scenes are few and samples are many.
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "epoch", epoch as u64));
        let batches = scene_blocked_batches(
            &train_idx,
            |i| dataset.samples[i].scene_id,
            config.batch_size,
            &mut epoch_rng,
        );

        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;
        for (batch_no, batch) in batches.iter().enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let mut g_point = Gradients::zeros_like(&nets.point_mlp);
            let mut g_post = Gradients::zeros_like(&nets.post_mlp);
            let mut g_pnet = Gradients::zeros_like(&nets.pnet);
            let mut batch_loss = 0.0;

            let mut i = 0;
            while i < batch.len() {
                let scene_id = dataset.samples[batch[i]].scene_id;
                let mut j = i;
                while j < batch.len() && dataset.samples[batch[j]].scene_id == scene_id {
                    j += 1;
                }
                let (z, enet_tape) =
                    enet_forward(&nets, &clouds[scene_id], Mode::Train, &mut dropout_rng)?;
                let mut d_z = vec![0.0; z.len()];
                for &sample_idx in &batch[i..j] {
                    let tape = pnet_forward(
                        &nets,
                        &z,
                        &inputs_t[sample_idx],
                        &inputs_goal[sample_idx],
                        Mode::Train,
                        &mut dropout_rng,
                    )?;
                    let (loss, d_raw) = head_loss_and_grad(
                        head,
                        tape.output(),
                        nets.config_dim,
                        &targets[sample_idx],
                    )?;
                    batch_loss += loss;
                    let (grads, d_input) = backward(&nets.pnet, &tape, &d_raw)?;
                    let mut grads = grads;
                    grads.scale(scale);
                    g_pnet.accumulate(&grads);
                    for (acc, g) in d_z.iter_mut().zip(&d_input[..z.len()]) {
                        *acc += g * scale;
                    }
                }
                let (gp, gq) = enet_backward(&nets, &enet_tape, &d_z)?;
                g_point.accumulate(&gp);
                g_post.accumulate(&gq);
                i = j;
            }

            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    detail: format!("batch of {} samples, first index {}", batch.len(), batch[0]),
                });
            }
            epoch_loss += batch_loss;
            epoch_count += batch.len();

            adam_step(&mut nets.point_mlp, &g_point, &mut opt_point)?;
            adam_step(&mut nets.post_mlp, &g_post, &mut opt_post)?;
            adam_step(&mut nets.pnet, &g_pnet, &mut opt_pnet)?;
        }
        report.epoch_train_loss.push(epoch_loss / epoch_count.max(1) as f64);

        if !val_idx.is_empty() {
            let val = evaluate_loss(&nets, model, dataset, &clouds, &val_idx)?;
            report.epoch_val_loss.push(val);
            if val < best_val - 1e-9 {
                best_val = val;
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= config.patience {
                    report.stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok((nets, report))
}

/// Mean loss over the given sample indices, networks in eval mode.
pub fn evaluate_loss(
    nets: &PlannerNetworks,
    model: &RobotModel,
    dataset: &Dataset,
    clouds: &[Vec<Vec<f64>>],
    indices: &[usize],
) -> Result<f64, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut by_scene: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for &i in indices {
        by_scene.entry(dataset.samples[i].scene_id).or_default().push(i);
    }
    let mut total = 0.0;
    for (scene_id, idxs) in by_scene {
        let (z, _) = enet_forward(nets, &clouds[scene_id], Mode::Eval, &mut rng)?;
        for i in idxs {
            let s = &dataset.samples[i];
            let tape = pnet_forward(
                nets,
                &z,
                &model.normalize(&s.c_t),
                &model.normalize(&s.c_goal),
                Mode::Eval,
                &mut rng,
            )?;
            let (loss, _) = head_loss_and_grad(
                nets.head,
                tape.output(),
                nets.config_dim,
                &model.normalize(&s.c_next),
            )?;
            total += loss;
        }
    }
    Ok(total / indices.len().max(1) as f64)
}

fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Shuffle sample indices so each batch covers as few scenes as possible:
/// samples shuffle within their scene, scene blocks shuffle as units.
fn scene_blocked_batches(
    indices: &[usize],
    scene_of: impl Fn(usize) -> usize,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<usize>> {
    let mut by_scene: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for &i in indices {
        by_scene.entry(scene_of(i)).or_default().push(i);
    }
    let mut blocks: Vec<Vec<usize>> = by_scene.into_values().collect();
    for block in blocks.iter_mut() {
        shuffle(block, rng);
    }
    shuffle(&mut blocks, rng);
    let flat: Vec<usize> = blocks.into_iter().flatten().collect();
    flat.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}
