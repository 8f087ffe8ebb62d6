//! Fixed-step Euler integration of the learned field with guidance.

use dyadic_tensor::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loss::gaussian;
use crate::model::FlowNet;
use crate::schedule::cfg_combine;
use crate::{FlowError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub steps: usize,
    pub cfg_w: f64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            cfg_w: 1.5,
            seed: 0,
        }
    }
}

/// Draws one sequence of `frames` rows for `cond`.
pub fn sample_ode<M: FlowNet>(model: &M, cond: &M::Cond, frames: usize, cfg: &SampleConfig) -> Result<Matrix> {
    let mut out = sample_ode_batch(model, std::slice::from_ref(cond), frames, cfg)?;
    Ok(out.remove(0))
}

/// Draws one sequence per condition. The noise for the whole batch comes
/// from a single stream seeded by `cfg.seed`.
pub fn sample_ode_batch<M: FlowNet>(
    model: &M,
    conds: &[M::Cond],
    frames: usize,
    cfg: &SampleConfig,
) -> Result<Vec<Matrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = gaussian(conds.len() * frames, model.motion_dim(), &mut rng);
    let x1 = integrate(model, x0, conds, frames, cfg)?;
    Ok((0..conds.len())
        .map(|i| x1.slice_rows(i * frames, (i + 1) * frames))
        .collect())
}

/// Integrates from the given stacked noise `x0` (`B·frames` rows).
pub fn integrate<M: FlowNet>(
    model: &M,
    x0: Matrix,
    conds: &[M::Cond],
    frames: usize,
    cfg: &SampleConfig,
) -> Result<Matrix> {
    if cfg.steps == 0 {
        return Err(FlowError::Config("steps must be positive".into()));
    }
    if x0.rows() != conds.len() * frames {
        return Err(FlowError::Shape(format!(
            "noise has {} rows for {} sequences of {frames} frames",
            x0.rows(),
            conds.len()
        )));
    }
    let uncond: Vec<M::Cond> = conds.iter().map(|c| model.unconditional(c)).collect();
    let dt = 1.0 / cfg.steps as f64;
    let mut x = x0;
    for k in 0..cfg.steps {
        let t = k as f64 * dt;
        let ts = vec![t; conds.len()];
        let vc = model.velocity(&x, &ts, frames, conds)?;
        let v = if cfg.cfg_w == 1.0 {
            vc
        } else {
            let vu = model.velocity(&x, &ts, frames, &uncond)?;
            cfg_combine(&vc, &vu, cfg.cfg_w)?
        };
        x.axpy(dt, &v);
        if let Some(i) = x.data().iter().position(|v| !v.is_finite()) {
            return Err(FlowError::NonFinite {
                what: "sample",
                index: i / (frames * x.cols()).max(1),
            });
        }
    }
    Ok(x)
}
