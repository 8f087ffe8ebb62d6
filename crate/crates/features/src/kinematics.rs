//! Upper-body forward kinematics on a fixed template skeleton.
//!
//! The 15 keypoints are pelvis, the three spine joints, neck, head, a head-top
//! marker, and both collars, shoulders, elbows and wrists. Bone offsets are
//! rough adult proportions in metres; only relative motion matters for the
//! jerk and condition-following metrics.

use dyadic_tensor::Matrix;

use crate::layout::{BODY_DIM, BODY_JOINTS};
use crate::rotation::{self, Rot, IDENTITY};
use crate::{FeatureError, Result};

pub const KEYPOINT_COUNT: usize = 15;

pub const KEYPOINT_NAMES: [&str; KEYPOINT_COUNT] = [
    "pelvis",
    "spine1",
    "spine2",
    "spine3",
    "neck",
    "head",
    "head_top",
    "left_collar",
    "right_collar",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
];

/// (SMPL-H joint whose rotation drives the bone, parent keypoint, offset).
/// `None` means the keypoint is a leaf marker hanging off the parent joint.
struct Bone {
    joint: Option<usize>,
    parent: Option<usize>,
    offset: [f64; 3],
}

const BONES: [Bone; KEYPOINT_COUNT] = [
    Bone { joint: Some(0), parent: None, offset: [0.0, 0.0, 0.0] },
    Bone { joint: Some(3), parent: Some(0), offset: [0.0, 0.11, 0.0] },
    Bone { joint: Some(6), parent: Some(1), offset: [0.0, 0.14, 0.0] },
    Bone { joint: Some(9), parent: Some(2), offset: [0.0, 0.06, 0.0] },
    Bone { joint: Some(12), parent: Some(3), offset: [0.0, 0.21, 0.0] },
    Bone { joint: Some(15), parent: Some(4), offset: [0.0, 0.09, 0.05] },
    Bone { joint: None, parent: Some(5), offset: [0.0, 0.15, 0.0] },
    Bone { joint: Some(13), parent: Some(3), offset: [0.08, 0.12, 0.0] },
    Bone { joint: Some(14), parent: Some(3), offset: [-0.08, 0.12, 0.0] },
    Bone { joint: Some(16), parent: Some(7), offset: [0.12, 0.05, 0.0] },
    Bone { joint: Some(17), parent: Some(8), offset: [-0.12, 0.05, 0.0] },
    Bone { joint: Some(18), parent: Some(9), offset: [0.26, 0.0, 0.0] },
    Bone { joint: Some(19), parent: Some(10), offset: [-0.26, 0.0, 0.0] },
    Bone { joint: Some(20), parent: Some(11), offset: [0.25, 0.0, 0.0] },
    Bone { joint: Some(21), parent: Some(12), offset: [-0.25, 0.0, 0.0] },
];

/// Keypoint positions for one frame given the 43 body-channel rotations.
/// The root is fixed at the origin with identity orientation.
pub fn forward_kinematics(rots: &[Rot]) -> Result<[[f64; 3]; KEYPOINT_COUNT]> {
    if rots.len() != BODY_JOINTS.len() {
        return Err(FeatureError::Shape {
            expected: format!("{} joint rotations", BODY_JOINTS.len()),
            got: format!("{}", rots.len()),
        });
    }
    let local = |smplh: usize| -> Rot {
        BODY_JOINTS
            .iter()
            .position(|&j| j == smplh)
            .map_or(IDENTITY, |k| rots[k])
    };
    let mut pos = [[0.0; 3]; KEYPOINT_COUNT];
    let mut global = [IDENTITY; KEYPOINT_COUNT];
    for (k, bone) in BONES.iter().enumerate() {
        let (ppos, prot) = match bone.parent {
            Some(p) => (pos[p], global[p]),
            None => ([0.0; 3], IDENTITY),
        };
        let d = rotation::apply(&prot, &bone.offset);
        pos[k] = [ppos[0] + d[0], ppos[1] + d[1], ppos[2] + d[2]];
        global[k] = match bone.joint {
            Some(j) if j != 0 => rotation::matmul(&prot, &local(j)),
            _ => prot,
        };
    }
    Ok(pos)
}

/// Keypoints for every frame of a body matrix, as a `T x 45` matrix laid out
/// `(x, y, z)` per keypoint. Degenerate 6D blocks decode to the identity so
/// raw network samples can always be evaluated.
pub fn keypoints(body: &Matrix) -> Result<Matrix> {
    if body.cols() != BODY_DIM {
        return Err(FeatureError::Shape {
            expected: format!("body width {BODY_DIM}"),
            got: format!("{}", body.cols()),
        });
    }
    let mut out = Vec::with_capacity(body.rows() * KEYPOINT_COUNT * 3);
    for t in 0..body.rows() {
        let rots: Vec<Rot> = body
            .row(t)
            .chunks(6)
            .map(rotation::from_6d_or_identity)
            .collect();
        for p in forward_kinematics(&rots)? {
            out.extend_from_slice(&p);
        }
    }
    Ok(Matrix::from_vec(body.rows(), KEYPOINT_COUNT * 3, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_pose_is_symmetric() {
        let p = forward_kinematics(&[IDENTITY; 43]).unwrap();
        assert_eq!(p[0], [0.0; 3]);
        for (l, r) in [(7, 8), (9, 10), (11, 12), (13, 14)] {
            assert!((p[l][0] + p[r][0]).abs() < 1e-12);
            assert!((p[l][1] - p[r][1]).abs() < 1e-12);
        }
        assert!((p[6][1] - (0.11 + 0.14 + 0.06 + 0.21 + 0.09 + 0.15)).abs() < 1e-12);
    }

    #[test]
    fn elbow_rotation_moves_only_the_wrist() {
        let mut rots = [IDENTITY; 43];
        let elbow = BODY_JOINTS.iter().position(|&j| j == 18).unwrap();
        rots[elbow] = rotation::axis_angle_to_matrix([0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        let rest = forward_kinematics(&[IDENTITY; 43]).unwrap();
        let bent = forward_kinematics(&rots).unwrap();
        for k in 0..KEYPOINT_COUNT {
            if k == 13 {
                let d = [bent[k][0] - bent[11][0], bent[k][1] - bent[11][1]];
                assert!(d[0].abs() < 1e-12 && (d[1] - 0.25).abs() < 1e-12);
            } else {
                assert_eq!(bent[k], rest[k]);
            }
        }
    }
}
