//! Four-fingered hand: a palm pose plus one planar two-link flexion chain per finger.
//!
//! Each finger chain lives in its mount frame. At zero flexion the links hang
//! along the mount's `-z` axis; positive flexion rotates about the mount `+y`
//! axis, swinging the fingertip toward the mount `+x` axis.

use serde::{Deserialize, Serialize};

use crate::math::{Pose, Quat, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerSpec<T> {
    /// Mount frame in the palm frame.
    pub mount: Pose<T>,
    /// Proximal and distal link lengths (m).
    pub links: [T; 2],
    /// `[lo, hi]` per joint (rad).
    pub limits: [[T; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel<T> {
    pub fingers: Vec<FingerSpec<T>>,
    pub fingertip_radius: T,
}

/// Palm pose plus joint vector `(R, p, q)`; joints are two per finger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullPose<T> {
    pub palm: Pose<T>,
    pub joints: Vec<T>,
}

/// Hand state in the simulator. Structurally identical to [`FullPose`].
pub type HandConfig<T> = FullPose<T>;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum HandError {
    #[error("invalid hand model: {0}")]
    InvalidModel(String),
    #[error("expected {expected} joint values, got {got}")]
    JointCount { expected: usize, got: usize },
}

impl<T: Real> HandModel<T> {
    pub fn finger_count(&self) -> usize {
        self.fingers.len()
    }

    pub fn joint_count(&self) -> usize {
        2 * self.fingers.len()
    }

    /// Index of the opposed thumb (the last finger).
    pub fn thumb(&self) -> usize {
        self.fingers.len() - 1
    }

    pub fn validate(&self) -> Result<(), HandError> {
        if self.fingers.len() < 2 {
            return Err(HandError::InvalidModel("need at least two fingers".into()));
        }
        if !(self.fingertip_radius > T::zero()) {
            return Err(HandError::InvalidModel("fingertip radius must be positive".into()));
        }
        for (i, f) in self.fingers.iter().enumerate() {
            if f.links.iter().any(|l| !(*l > T::zero())) {
                return Err(HandError::InvalidModel(format!("finger {i}: non-positive link")));
            }
            if f.limits.iter().any(|l| !(l[0] < l[1])) {
                return Err(HandError::InvalidModel(format!("finger {i}: limits not ordered")));
            }
        }
        Ok(())
    }

    pub fn total_reach(&self, finger: usize) -> T {
        let l = self.fingers[finger].links;
        l[0] + l[1]
    }

    /// Elementwise clamp to joint limits.
    pub fn clamp_to_limits(&self, joints: &[T]) -> Vec<T> {
        joints
            .iter()
            .enumerate()
            .map(|(k, &q)| {
                let lim = self.fingers[k / 2].limits[k % 2];
                q.max(lim[0]).min(lim[1])
            })
            .collect()
    }

    /// Joint vector at a fixed fraction of every joint's range.
    pub fn joints_at_fraction(&self, fraction: T) -> Vec<T> {
        self.fingers
            .iter()
            .flat_map(|f| f.limits.iter().map(move |l| l[0] + (l[1] - l[0]) * fraction))
            .collect()
    }

    /// Clamps joints on construction.
    pub fn config(&self, palm: Pose<T>, joints: &[T]) -> Result<HandConfig<T>, HandError> {
        if joints.len() != self.joint_count() {
            return Err(HandError::JointCount {
                expected: self.joint_count(),
                got: joints.len(),
            });
        }
        Ok(FullPose {
            palm,
            joints: self.clamp_to_limits(joints),
        })
    }

    /// Fingertip position in the finger's mount frame.
    pub fn fingertip_in_mount(&self, finger: usize, q1: T, q2: T) -> Vec3<T> {
        let [l1, l2] = self.fingers[finger].links;
        planar_two_link(l1, l2, q1, q2)
    }

    /// Fingertip position in the palm frame.
    pub fn fingertip_in_palm(&self, finger: usize, q1: T, q2: T) -> Vec3<T> {
        self.fingers[finger]
            .mount
            .transform_point(self.fingertip_in_mount(finger, q1, q2))
    }

    /// Fingertip centers in the world frame, one per finger.
    pub fn fingertip_positions(&self, config: &HandConfig<T>) -> Vec<Vec3<T>> {
        (0..self.fingers.len())
            .map(|i| {
                let local = self.fingertip_in_palm(i, config.joints[2 * i], config.joints[2 * i + 1]);
                config.palm.transform_point(local)
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> HandModel<U> {
        HandModel {
            fingers: self
                .fingers
                .iter()
                .map(|f| FingerSpec {
                    mount: f.mount.cast(),
                    links: [U::lit(f.links[0].as_f64()), U::lit(f.links[1].as_f64())],
                    limits: [
                        [U::lit(f.limits[0][0].as_f64()), U::lit(f.limits[0][1].as_f64())],
                        [U::lit(f.limits[1][0].as_f64()), U::lit(f.limits[1][1].as_f64())],
                    ],
                })
                .collect(),
            fingertip_radius: U::lit(self.fingertip_radius.as_f64()),
        }
    }
}

#[inline]
fn planar_two_link<T: Real>(l1: T, l2: T, q1: T, q2: T) -> Vec3<T> {
    let s = q1 + q2;
    Vec3::new(
        l1 * q1.sin() + l2 * s.sin(),
        T::zero(),
        -(l1 * q1.cos() + l2 * s.cos()),
    )
}

/// Lateral offset of the fingers from the palm center along the opposition axis.
pub const DEFAULT_MOUNT_OFFSET: f64 = 0.06;
/// Spacing of the three parallel fingers along the palm `y` axis.
pub const DEFAULT_FINGER_SPACING: f64 = 0.015;

/// Outward tilt of every default finger mount at zero flexion (rad).
pub const DEFAULT_SPLAY: f64 = 1.0;

/// Three parallel fingers on the palm `+x` edge (at `y = -0.015, 0, 0.015`)
/// flexing toward `-x`, and a thumb on the `-x` edge flexing toward `+x`.
/// Fingers point roughly along the palm `-z` axis, tilted outward by
/// [`DEFAULT_SPLAY`] so that a fully open hand clears wide objects.
pub fn default_hand() -> HandModel<f64> {
    let links = [0.045, 0.030];
    let limits = [[0.0, 1.6], [0.0, 1.6]];
    let splay = Quat::from_axis_angle(Vec3::unit_y(), DEFAULT_SPLAY);
    let flip = Quat::from_axis_angle(Vec3::unit_z(), std::f64::consts::PI) * splay;
    let mut fingers: Vec<FingerSpec<f64>> = [-DEFAULT_FINGER_SPACING, 0.0, DEFAULT_FINGER_SPACING]
        .iter()
        .map(|&y| FingerSpec {
            mount: Pose::new(flip, Vec3::new(DEFAULT_MOUNT_OFFSET, y, 0.0)),
            links,
            limits,
        })
        .collect();
    fingers.push(FingerSpec {
        mount: Pose::new(splay, Vec3::new(-DEFAULT_MOUNT_OFFSET, 0.0, 0.0)),
        links,
        limits,
    });
    HandModel {
        fingers,
        fingertip_radius: 0.008,
    }
}
