//! Two-stage face/body generation.

use dyadic_features::layout::{BODY_DIM, FACE_DIM, HEAD_ROTATION_DIM};
use dyadic_flowmatch::{sample_ode_batch, FlowNet, SampleConfig};
use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::bundle::{BlockValue, ConditionBundle};
use crate::data::{head_rotation_cols, Normalizers, Target, BODY_COND, FACE_COND};
use crate::model::{BlockKind, MotionModel};
use crate::{ConditionError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeOrder {
    Face2Body,
    Body2Face,
}

/// What the body stage sees of the generated face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceCond {
    /// All 137 face channels.
    #[serde(alias = "full_imitator")]
    Full,
    /// Only pitch, yaw and roll.
    #[serde(alias = "head_rotation_only")]
    Headrot,
}

impl FaceCond {
    pub fn dim(self) -> usize {
        match self {
            Self::Full => FACE_DIM,
            Self::Headrot => HEAD_ROTATION_DIM,
        }
    }

    /// The columns of a face window passed to the body stage.
    pub fn extract(self, face: &Matrix) -> Result<Matrix> {
        if face.cols() != FACE_DIM {
            return Err(ConditionError::Shape(format!("face has {} columns, expected {FACE_DIM}", face.cols())));
        }
        Ok(match self {
            Self::Full => face.clone(),
            Self::Headrot => head_rotation_cols(face),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub order: CascadeOrder,
    /// Only meaningful for face-to-body.
    pub face_cond: FaceCond,
}

impl CascadeSpec {
    pub fn face2body(face_cond: FaceCond) -> Self {
        Self {
            order: CascadeOrder::Face2Body,
            face_cond,
        }
    }

    pub fn body2face() -> Self {
        Self {
            order: CascadeOrder::Body2Face,
            face_cond: FaceCond::Full,
        }
    }

    /// Name and width of the block stage two reads stage one's output from.
    fn stage2_block(&self) -> (&'static str, usize) {
        match self.order {
            CascadeOrder::Face2Body => (FACE_COND, self.face_cond.dim()),
            CascadeOrder::Body2Face => (BODY_COND, BODY_DIM),
        }
    }

    /// Checks that the two models were built for this cascade.
    pub fn check(&self, stage1: &MotionModel, stage2: &MotionModel, norms: &Normalizers) -> Result<()> {
        let (t1, t2) = self.targets();
        let (d1, d2) = (norms.motion_dim(t1), norms.motion_dim(t2));
        if stage1.motion_dim() != d1 || stage2.motion_dim() != d2 {
            return Err(ConditionError::Config(format!(
                "{:?} needs stage widths {d1} then {d2}, models have {} then {}",
                self.order,
                stage1.motion_dim(),
                stage2.motion_dim()
            )));
        }
        let (name, dim) = self.stage2_block();
        match stage2.config().block(name).map(|b| &b.kind) {
            Some(BlockKind::Continuous { dim: d }) if *d == dim => Ok(()),
            Some(kind) => Err(ConditionError::Config(format!(
                "stage two block {name} is {kind:?}, cascade passes {dim} channels"
            ))),
            None => Err(ConditionError::Config(format!("stage two model has no {name} block"))),
        }
    }

    /// Targets of stage one and stage two.
    pub fn targets(&self) -> (Target, Target) {
        match self.order {
            CascadeOrder::Face2Body => (Target::Face, Target::Body),
            CascadeOrder::Body2Face => (Target::Body, Target::Face),
        }
    }

    /// Stage-two bundles: each stage-one bundle plus the stage-one output,
    /// decoded to standardised features.
    pub fn stage2_bundles(
        &self,
        bundles: &[ConditionBundle],
        stage1_out: &[Matrix],
        norms: &Normalizers,
    ) -> Result<Vec<ConditionBundle>> {
        let (name, _) = self.stage2_block();
        let stage1 = self.targets().0;
        bundles
            .iter()
            .zip(stage1_out)
            .map(|(b, out)| {
                let out = norms.decode(stage1, out)?;
                let cond = match self.order {
                    CascadeOrder::Face2Body => self.face_cond.extract(&out)?,
                    CascadeOrder::Body2Face => out,
                };
                let mut b2 = b.clone();
                b2.push(name, BlockValue::Continuous(cond))?;
                Ok(b2)
            })
            .collect()
    }
}

/// Samples stage one, then stage two conditioned on it. Returns decoded,
/// standardised `(face, body)` per bundle. Stage two uses `seed + 1` so fixing stage
/// one's output and the seed fixes the result.
pub fn run_cascade(
    spec: &CascadeSpec,
    stage1: &MotionModel,
    stage2: &MotionModel,
    bundles: &[ConditionBundle],
    norms: &Normalizers,
    frames: usize,
    sample: &SampleConfig,
) -> Result<Vec<(Matrix, Matrix)>> {
    spec.check(stage1, stage2, norms)?;
    let (t1, t2) = spec.targets();
    let first = sample_ode_batch(stage1, bundles, frames, sample)?;
    let second = run_stage2(spec, stage2, bundles, &first, norms, frames, sample)?;
    first
        .iter()
        .zip(&second)
        .map(|(a, b)| {
            let (a, b) = (norms.decode(t1, a)?, norms.decode(t2, b)?);
            Ok(match spec.order {
                CascadeOrder::Face2Body => (a, b),
                CascadeOrder::Body2Face => (b, a),
            })
        })
        .collect()
}

/// The second stage alone, given stage-one outputs.
pub fn run_stage2(
    spec: &CascadeSpec,
    stage2: &MotionModel,
    bundles: &[ConditionBundle],
    stage1_out: &[Matrix],
    norms: &Normalizers,
    frames: usize,
    sample: &SampleConfig,
) -> Result<Vec<Matrix>> {
    let b2 = spec.stage2_bundles(bundles, stage1_out, norms)?;
    let cfg2 = SampleConfig {
        seed: sample.seed.wrapping_add(1),
        ..*sample
    };
    Ok(sample_ode_batch(stage2, &b2, frames, &cfg2)?)
}
