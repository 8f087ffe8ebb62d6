//! Conditional flow-matching regression loss.

use dyadic_tensor::{Graph, Matrix, Var};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::FlowNet;
use crate::schedule::{interpolant, target_velocity, Schedule};
use crate::{FlowError, Result};

/// Mean over batch, frames and channels of `‖v_θ(x_t, t, c) − v‖²`, with
/// `t` and `ε` supplied by the caller.
pub fn cfm_loss_with<M: FlowNet>(
    model: &M,
    g: &mut Graph,
    xs: &[Matrix],
    conds: &[M::Cond],
    ts: &[f64],
    eps: &[Matrix],
    schedule: Schedule,
) -> Result<Var> {
    let b = xs.len();
    if b == 0 || conds.len() != b || ts.len() != b || eps.len() != b {
        return Err(FlowError::Shape(format!(
            "batch sizes differ: {} motions, {} conditions, {} times, {} noises",
            b,
            conds.len(),
            ts.len(),
            eps.len()
        )));
    }
    let (frames, dim) = xs[0].shape();
    if dim != model.motion_dim() {
        return Err(FlowError::Shape(format!("motion width {dim}, model expects {}", model.motion_dim())));
    }
    let mut xt = Vec::with_capacity(b);
    let mut vt = Vec::with_capacity(b);
    for (i, (x, e)) in xs.iter().zip(eps).enumerate() {
        if x.shape() != (frames, dim) {
            return Err(FlowError::Shape(format!("sequence {i} is {:?}, batch is {:?}", x.shape(), (frames, dim))));
        }
        if !x.is_finite() {
            return Err(FlowError::NonFinite { what: "motion", index: i });
        }
        xt.push(interpolant(x, e, ts[i], schedule)?);
        vt.push(target_velocity(x, e, schedule)?);
    }
    let xt = Matrix::concat_rows(&xt.iter().collect::<Vec<_>>());
    let vt = Matrix::concat_rows(&vt.iter().collect::<Vec<_>>());
    let x = g.constant(xt);
    let target = g.constant(vt);
    let pred = model.predict(g, x, ts, frames, conds)?;
    let diff = g.sub(pred, target);
    Ok(g.mean_square(diff))
}

/// [`cfm_loss_with`] with `t ~ U[0, 1]` and `ε ~ N(0, I)` drawn from `rng`.
pub fn cfm_loss<M: FlowNet, R: Rng + ?Sized>(
    model: &M,
    g: &mut Graph,
    xs: &[Matrix],
    conds: &[M::Cond],
    schedule: Schedule,
    rng: &mut R,
) -> Result<Var> {
    let ts: Vec<f64> = xs.iter().map(|_| rng.random::<f64>()).collect();
    let eps: Vec<Matrix> = xs.iter().map(|x| gaussian(x.rows(), x.cols(), rng)).collect();
    cfm_loss_with(model, g, xs, conds, &ts, &eps, schedule)
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data)
}
