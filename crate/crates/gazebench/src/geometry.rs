//! Head-pose compensation for wearable eye trackers.
//!
//! A head-mounted tracker reports gaze directions in the frame of the
//! wearer's head. To drive anything fixed to the cockpit those vectors have
//! to be re-expressed in the world frame, which takes a rotation built from
//! the head orientation.
//!
//! Conventions used throughout the crate:
//!
//! * right-handed world frame: +x points forward out of the nose at the
//!   neutral pose, +y points left, +z points up;
//! * yaw rotates about +z and is positive turning left, pitch rotates about
//!   +y and is positive nose-down, roll rotates about +x and is positive
//!   right-ear-down;
//! * the full head rotation applies yaw, then pitch, then roll intrinsically,
//!   i.e. `T = Rz(yaw) * Ry(pitch) * Rx(roll)`;
//! * angles cross API boundaries in degrees and are converted to radians
//!   internally.

use crate::error::{Error, Result};

/// One of the three body axes a primitive rotation can act about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Head orientation in degrees. Angles are normalised to (-180, 180] on
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadPose {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

/// Wraps an angle in degrees into (-180, 180].
pub fn normalize_deg(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

impl HeadPose {
    pub fn new(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Result<Self> {
        for (name, v) in [("yaw", yaw_deg), ("pitch", pitch_deg), ("roll", roll_deg)] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} angle is not finite")));
            }
        }
        Ok(HeadPose {
            yaw_deg: normalize_deg(yaw_deg),
            pitch_deg: normalize_deg(pitch_deg),
            roll_deg: normalize_deg(roll_deg),
        })
    }

    pub fn identity() -> Self {
        HeadPose { yaw_deg: 0.0, pitch_deg: 0.0, roll_deg: 0.0 }
    }
}

/// Proper rotation, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix {
    m: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    /// Applies the rotation to a column vector.
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn transpose(&self) -> RotationMatrix {
        let m = &self.m;
        RotationMatrix {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest absolute entry of `MᵀM - I`; zero for a perfect rotation.
    pub fn orthonormality_error(&self) -> f64 {
        let t = self.transpose();
        let p = t.matmul(self);
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.m[i][j] - expect).abs());
            }
        }
        worst
    }

    pub fn matmul(&self, rhs: &RotationMatrix) -> RotationMatrix {
        let mut out = [[0.0f64; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        RotationMatrix { m: out }
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        self.matmul(&rhs)
    }
}

/// Builds the primitive rotation of `angle_deg` about `axis`.
pub fn rotation_matrix(axis: Axis, angle_deg: f64) -> Result<RotationMatrix> {
    if !angle_deg.is_finite() {
        return Err(Error::InvalidInput("rotation angle is not finite".into()));
    }
    let a = angle_deg.to_radians();
    let (s, c) = a.sin_cos();
    let m = match axis {
        Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
    };
    Ok(RotationMatrix { m })
}

/// Builds the combined head rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn compose_head_transform(pose: &HeadPose) -> RotationMatrix {
    let rz = rotation_matrix(Axis::Z, pose.yaw_deg).expect("pose angles are finite");
    let ry = rotation_matrix(Axis::Y, pose.pitch_deg).expect("pose angles are finite");
    let rx = rotation_matrix(Axis::X, pose.roll_deg).expect("pose angles are finite");
    rz.matmul(&ry).matmul(&rx)
}

/// Unit gaze direction. Construction checks the norm, so a value of this
/// type always holds a vector of length 1 to within floating point rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeVector {
    v: [f64; 3],
}

impl GazeVector {
    /// Accepts a vector already close to unit length (tolerance 1e-3 on the
    /// norm) and stores it renormalised.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidInput("gaze vector has non-finite component".into()));
        }
        let norm = (x * x + y * y + z * z).sqrt();
        if (norm - 1.0).abs() > 1e-3 {
            return Err(Error::InvalidInput(format!(
                "gaze vector norm {norm:.6} is not within 1e-3 of unit length"
            )));
        }
        Ok(GazeVector { v: [x / norm, y / norm, z / norm] })
    }

    /// Normalises an arbitrary direction. Fails on near-zero vectors.
    pub fn from_direction(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidInput("gaze direction has non-finite component".into()));
        }
        let norm = (x * x + y * y + z * z).sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidInput("gaze direction is degenerate (zero length)".into()));
        }
        Ok(GazeVector { v: [x / norm, y / norm, z / norm] })
    }

    pub fn components(&self) -> [f64; 3] {
        self.v
    }

    pub fn dot(&self, other: &GazeVector) -> f64 {
        self.v[0] * other.v[0] + self.v[1] * other.v[1] + self.v[2] * other.v[2]
    }

    /// Angle between two gaze directions, in degrees.
    pub fn angle_to_deg(&self, other: &GazeVector) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// Left and right eye directions after head compensation, cascaded into the
/// six-component feature the downstream mapping consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompensatedGaze {
    f: [f64; 6],
}

impl CompensatedGaze {
    pub fn as_array(&self) -> [f64; 6] {
        self.f
    }

    pub fn left(&self) -> [f64; 3] {
        [self.f[0], self.f[1], self.f[2]]
    }

    pub fn right(&self) -> [f64; 3] {
        [self.f[3], self.f[4], self.f[5]]
    }
}

/// Rotates both eye vectors out of the head frame:
/// `eyeL' = T · eyeL`, `eyeR' = T · eyeR` with `T = compose_head_transform(pose)`.
///
/// Inputs are validated at [`GazeVector`] construction, so this cannot fail;
/// rotations preserve length, so each half of the result stays unit.
pub fn compensate(pose: &HeadPose, eye_l: &GazeVector, eye_r: &GazeVector) -> CompensatedGaze {
    let t = compose_head_transform(pose);
    let l = t.apply(eye_l.components());
    let r = t.apply(eye_r.components());
    CompensatedGaze { f: [l[0], l[1], l[2], r[0], r[1], r[2]] }
}

/// One timestamped binocular tracker sample, still in the head frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t_ms: f64,
    pub eye_l: GazeVector,
    pub eye_r: GazeVector,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_vec_eq(got: [f64; 3], want: [f64; 3], eps: f64) {
        for i in 0..3 {
            assert_abs_diff_eq!(got[i], want[i], epsilon = eps);
        }
    }

    #[test]
    fn quarter_turn_about_z_sends_x_to_y() {
        let r = rotation_matrix(Axis::Z, 90.0).unwrap();
        assert_vec_eq(r.apply([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], 1e-12);
    }

    #[test]
    fn half_turn_about_y_flips_x() {
        let r = rotation_matrix(Axis::Y, 180.0).unwrap();
        assert_vec_eq(r.apply([1.0, 0.0, 0.0]), [-1.0, 0.0, 0.0], 1e-12);
    }

    #[test]
    fn zero_angle_is_identity() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let r = rotation_matrix(axis, 0.0).unwrap();
            assert_eq!(r.rows(), RotationMatrix::IDENTITY.rows());
        }
    }

    #[test]
    fn rotation_rejects_non_finite_angle() {
        assert!(rotation_matrix(Axis::X, f64::NAN).is_err());
        assert!(rotation_matrix(Axis::Z, f64::INFINITY).is_err());
    }

    #[test]
    fn yaw_30_moves_forward_gaze_leftward() {
        let pose = HeadPose::new(30.0, 0.0, 0.0).unwrap();
        let t = compose_head_transform(&pose);
        let expect = [3.0f64.sqrt() / 2.0, 0.5, 0.0];
        assert_vec_eq(t.apply([1.0, 0.0, 0.0]), expect, 1e-12);
        assert_abs_diff_eq!(expect[0], 0.8660254037844387, epsilon = 1e-15);
    }

    #[test]
    fn composed_transform_matches_manual_product() {
        let pose = HeadPose::new(17.0, -24.0, 42.5).unwrap();
        let rz = rotation_matrix(Axis::Z, pose.yaw_deg).unwrap();
        let ry = rotation_matrix(Axis::Y, pose.pitch_deg).unwrap();
        let rx = rotation_matrix(Axis::X, pose.roll_deg).unwrap();
        let manual = rz.matmul(&ry).matmul(&rx);
        let composed = compose_head_transform(&pose);
        for i in 0..3 {
            assert_vec_eq(composed.rows()[i], manual.rows()[i], 1e-15);
        }
    }

    #[test]
    fn pose_angles_wrap_into_half_open_range() {
        let pose = HeadPose::new(270.0, -180.0, 540.0).unwrap();
        assert_abs_diff_eq!(pose.yaw_deg, -90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pose.pitch_deg, 180.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pose.roll_deg, 180.0, epsilon = 1e-12);
    }

    #[test]
    fn compensate_identity_pose_is_passthrough() {
        let l = GazeVector::new(1.0, 0.0, 0.0).unwrap();
        let r = GazeVector::from_direction(1.0, 0.2, -0.1).unwrap();
        let cg = compensate(&HeadPose::identity(), &l, &r);
        assert_vec_eq(cg.left(), l.components(), 1e-15);
        assert_vec_eq(cg.right(), r.components(), 1e-15);
    }

    #[test]
    fn compensate_rotates_both_eyes_with_yaw() {
        let pose = HeadPose::new(30.0, 0.0, 0.0).unwrap();
        let fwd = GazeVector::new(1.0, 0.0, 0.0).unwrap();
        let cg = compensate(&pose, &fwd, &fwd);
        let expect = [3.0f64.sqrt() / 2.0, 0.5, 0.0];
        assert_vec_eq(cg.left(), expect, 1e-12);
        assert_vec_eq(cg.right(), expect, 1e-12);
    }

    #[test]
    fn compensated_halves_stay_unit() {
        let pose = HeadPose::new(12.0, -9.0, 33.0).unwrap();
        let l = GazeVector::from_direction(0.9, 0.3, -0.2).unwrap();
        let r = GazeVector::from_direction(0.8, -0.4, 0.1).unwrap();
        let cg = compensate(&pose, &l, &r);
        let norm = |h: [f64; 3]| (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        assert_abs_diff_eq!(norm(cg.left()), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(norm(cg.right()), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn non_unit_gaze_vector_is_rejected() {
        let err = GazeVector::new(2.0, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, crate::Error::InvalidInput(_)));
        assert!(GazeVector::new(0.0, 0.0, 0.0).is_err());
        assert!(GazeVector::new(1.0009, 0.0, 0.0).is_ok());
    }

    #[test]
    fn degenerate_direction_is_rejected() {
        assert!(GazeVector::from_direction(0.0, 0.0, 0.0).is_err());
        assert!(GazeVector::from_direction(f64::NAN, 0.0, 1.0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn angle() -> impl Strategy<Value = f64> {
            -720.0f64..720.0
        }

        proptest! {
            #[test]
            fn primitive_rotations_are_orthonormal(a in angle()) {
                for axis in [Axis::X, Axis::Y, Axis::Z] {
                    let r = rotation_matrix(axis, a).unwrap();
                    prop_assert!(r.orthonormality_error() < 1e-12);
                    prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn composed_transform_is_orthonormal(y in angle(), p in angle(), r in angle()) {
                let pose = HeadPose::new(y, p, r).unwrap();
                let t = compose_head_transform(&pose);
                prop_assert!(t.orthonormality_error() < 1e-12);
                prop_assert!((t.determinant() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn rotation_preserves_length(y in angle(), p in angle(), r in angle(),
                                         vx in -1.0f64..1.0, vy in -1.0f64..1.0, vz in -1.0f64..1.0) {
                prop_assume!((vx * vx + vy * vy + vz * vz).sqrt() > 1e-3);
                let pose = HeadPose::new(y, p, r).unwrap();
                let t = compose_head_transform(&pose);
                let out = t.apply([vx, vy, vz]);
                let n_in = (vx * vx + vy * vy + vz * vz).sqrt();
                let n_out = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
                prop_assert!((n_in - n_out).abs() < 1e-12);
            }

            #[test]
            fn normalized_angles_stay_in_range(a in -3600.0f64..3600.0) {
                let n = normalize_deg(a);
                prop_assert!(n > -180.0 && n <= 180.0);
            }
        }
    }
}
