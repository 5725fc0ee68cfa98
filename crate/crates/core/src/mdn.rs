//! Mixture-density output head: constraint mapping from raw network outputs
//! to Gaussian-mixture parameters, log-density and NLL gradients computed in
//! log space, and sampling.
//!
//! Components are isotropic: one scalar sigma per component. The raw head
//! layout is `[alpha_raw (q) | mu_raw (q*d) | sigma_raw (q)]`.

use rand::Rng;
use rand_distr::StandardNormal;

/// Floor added to `elu(raw) + 1` so sigma stays strictly positive even when
/// the raw output saturates far negative.
pub const SIGMA_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, thiserror::Error)]
pub enum MdnError {
    #[error("raw head has length {got}, expected q*(d+2) = {expected}")]
    HeadLength { expected: usize, got: usize },
    #[error("dimension mismatch: configuration has {got}, mixture has {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid mixture parameters: {0}")]
    Invalid(&'static str),
}

/// Gaussian-mixture parameters `(alpha, mu, sigma)` over `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub alpha: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
}

impl GmmParams {
    pub fn q_mix(&self) -> usize {
        self.alpha.len()
    }

    pub fn dim(&self) -> usize {
        self.mu.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), MdnError> {
        let q = self.q_mix();
        if self.mu.len() != q || self.sigma.len() != q || q == 0 {
            return Err(MdnError::Invalid("component counts disagree"));
        }
        let d = self.dim();
        if self.mu.iter().any(|m| m.len() != d) {
            return Err(MdnError::Invalid("ragged means"));
        }
        let all_finite = self.alpha.iter().chain(self.sigma.iter()).all(|v| v.is_finite())
            && self.mu.iter().flatten().all(|v| v.is_finite());
        if !all_finite {
            return Err(MdnError::NonFinite("mixture parameter"));
        }
        if self.alpha.iter().any(|a| *a < 0.0) {
            return Err(MdnError::Invalid("negative mixing coefficient"));
        }
        if (self.alpha.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(MdnError::Invalid("mixing coefficients do not sum to 1"));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(MdnError::Invalid("non-positive sigma"));
        }
        Ok(())
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(raw: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(raw);
    raw.iter().map(|v| (v - lse).exp()).collect()
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Map a raw head vector to valid mixture parameters: softmax for alpha,
/// `elu + 1 + floor` for sigma, means taken directly.
pub fn constrain(raw: &[f64], q_mix: usize, dim: usize) -> Result<GmmParams, MdnError> {
    let expected = q_mix * (dim + 2);
    if raw.len() != expected {
        return Err(MdnError::HeadLength { expected, got: raw.len() });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(MdnError::NonFinite("raw head output"));
    }
    let alpha = softmax(&raw[..q_mix]);
    let mu = (0..q_mix)
        .map(|i| raw[q_mix + i * dim..q_mix + (i + 1) * dim].to_vec())
        .collect();
    let sigma = raw[q_mix + q_mix * dim..]
        .iter()
        .map(|v| elu(*v) + 1.0 + SIGMA_FLOOR)
        .collect();
    Ok(GmmParams { alpha, mu, sigma })
}

fn component_log_terms(params: &GmmParams, c: &[f64]) -> Vec<f64> {
    let d = c.len() as f64;
    params
        .alpha
        .iter()
        .zip(params.mu.iter().zip(&params.sigma))
        .map(|(a, (mu, sigma))| {
            let sq: f64 = mu.iter().zip(c).map(|(m, x)| (x - m) * (x - m)).sum();
            a.ln() - 0.5 * d * LN_2PI - d * sigma.ln() - sq / (2.0 * sigma * sigma)
        })
        .collect()
}

/// Log of the mixture density at `c`, computed with log-sum-exp.
pub fn log_density(params: &GmmParams, c: &[f64]) -> Result<f64, MdnError> {
    if c.len() != params.dim() {
        return Err(MdnError::DimMismatch { expected: params.dim(), got: c.len() });
    }
    Ok(log_sum_exp(&component_log_terms(params, c)))
}

/// NLL of the target under the constrained mixture, with the exact gradient
/// with respect to the raw head vector.
pub fn nll_loss_and_grad(
    raw: &[f64],
    q_mix: usize,
    dim: usize,
    target: &[f64],
) -> Result<(f64, Vec<f64>), MdnError> {
    if target.len() != dim {
        return Err(MdnError::DimMismatch { expected: dim, got: target.len() });
    }
    let params = constrain(raw, q_mix, dim)?;
    let terms = component_log_terms(&params, target);
    let lse = log_sum_exp(&terms);
    let loss = -lse;
    if !loss.is_finite() {
        return Err(MdnError::NonFinite("NLL loss"));
    }

    // Responsibilities: softmax over the component log-terms.
    let resp: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();

    let mut grad = vec![0.0; raw.len()];
    for i in 0..q_mix {
        // d loss / d raw_alpha_i with alpha = softmax(raw_alpha).
        grad[i] = params.alpha[i] - resp[i];

        let sigma = params.sigma[i];
        let sig2 = sigma * sigma;
        let mut sq = 0.0;
        for k in 0..dim {
            let diff = target[k] - params.mu[i][k];
            sq += diff * diff;
            grad[q_mix + i * dim + k] = -resp[i] * diff / sig2;
        }
        // d loss / d sigma, then chain through elu + 1 + floor.
        let d_sigma = resp[i] * (dim as f64 / sigma - sq / (sig2 * sigma));
        let raw_s = raw[q_mix + q_mix * dim + i];
        let d_raw = if raw_s > 0.0 { 1.0 } else { raw_s.exp() };
        grad[q_mix + q_mix * dim + i] = d_sigma * d_raw;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(MdnError::NonFinite("NLL gradient"));
    }
    Ok((loss, grad))
}

/// Draw the mixture component index from Categorical(alpha).
pub fn sample_component(alpha: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen::<f64>() * alpha.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, a) in alpha.iter().enumerate() {
        acc += a;
        if u < acc {
            return i;
        }
    }
    alpha.len() - 1
}

/// Draw one configuration from the mixture: pick a component, then add
/// isotropic Gaussian noise around its mean.
pub fn sample(params: &GmmParams, rng: &mut impl Rng) -> Vec<f64> {
    let k = sample_component(&params.alpha, rng);
    let sigma = params.sigma[k];
    params.mu[k]
        .iter()
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            m + sigma * z
        })
        .collect()
}
