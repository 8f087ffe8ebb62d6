//! Rotation encodings. Matrices are row-major `[[f64; 3]; 3]` with
//! `r[i][j]` the entry in row `i`, column `j`.

use crate::{FeatureError, Result};

pub type Rot = [[f64; 3]; 3];

pub const IDENTITY: Rot = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Relative tolerance below which a 6D column is treated as degenerate.
const DEGENERATE_EPS: f64 = 1e-9;

/// First two columns of `r`, stacked column-major.
pub fn to_6d(r: &Rot) -> [f64; 6] {
    [r[0][0], r[1][0], r[2][0], r[0][1], r[1][1], r[2][1]]
}

/// Gram–Schmidt on the two encoded columns, completed by a cross product.
pub fn from_6d(v: &[f64]) -> Result<Rot> {
    if v.len() != 6 {
        return Err(FeatureError::Shape {
            expected: "6 values".into(),
            got: format!("{} values", v.len()),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FeatureError::NonFinite("6D rotation"));
    }
    let a1 = [v[0], v[1], v[2]];
    let a2 = [v[3], v[4], v[5]];
    let n1 = norm(&a1);
    if n1 < DEGENERATE_EPS {
        return Err(FeatureError::Degenerate6d);
    }
    let b1 = scale(&a1, 1.0 / n1);
    let d = dot(&b1, &a2);
    let u2 = [a2[0] - d * b1[0], a2[1] - d * b1[1], a2[2] - d * b1[2]];
    let n2 = norm(&u2);
    if n2 < DEGENERATE_EPS * norm(&a2).max(1.0) {
        return Err(FeatureError::Degenerate6d);
    }
    let b2 = scale(&u2, 1.0 / n2);
    let b3 = cross(&b1, &b2);
    Ok([
        [b1[0], b2[0], b3[0]],
        [b1[1], b2[1], b3[1]],
        [b1[2], b2[2], b3[2]],
    ])
}

/// Like [`from_6d`] but maps degenerate input to the identity. Generated
/// samples are unconstrained network outputs, so evaluation code needs a
/// total decoder.
pub fn from_6d_or_identity(v: &[f64]) -> Rot {
    from_6d(v).unwrap_or(IDENTITY)
}

/// Rodrigues' formula for an axis-angle vector (angle = norm).
pub fn axis_angle_to_matrix(aa: [f64; 3]) -> Rot {
    let theta = norm(&aa);
    if theta < 1e-12 {
        return IDENTITY;
    }
    let [x, y, z] = scale(&aa, 1.0 / theta);
    let (s, c) = theta.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

pub fn matmul(a: &Rot, b: &Rot) -> Rot {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn apply(r: &Rot, v: &[f64; 3]) -> [f64; 3] {
    [dot(&r[0], v), dot(&r[1], v), dot(&r[2], v)]
}

pub fn determinant(r: &Rot) -> f64 {
    dot(&r[0], &cross(&r[1], &r[2]))
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
