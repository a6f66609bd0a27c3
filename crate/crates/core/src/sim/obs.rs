use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::geometry::{ray_intersect, Ray};
use crate::math::{Pose, Quat, Vec3};

use super::{Sim, SimState};

type V3 = Vec3<f64>;

/// Depth reported for rays that hit nothing within range (m).
pub const DEPTH_SENTINEL: f64 = 2.0;

/// Named blocks of [`privileged_obs`] with their widths for `F` fingers, in order.
pub const PRIVILEGED_BLOCKS: [(&str, usize); 7] = [
    ("palm_pose_world", 7),
    ("object_pose_palm", 7),
    ("fingertips_world", 3),
    ("fingertips_palm", 3),
    ("joints", 2),
    ("contact_bits", 1),
    ("force_directions", 3),
];

/// Pinhole depth camera. The camera looks along its local `+z`, with `+x`
/// to the right of the image and `+y` down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub pose: Pose<f64>,
    /// Vertical (and horizontal) field of view (rad).
    pub fov: f64,
    pub resolution: usize,
}

impl CameraSpec {
    pub fn look_at(eye: V3, target: V3, fov: f64) -> Self {
        let forward = (target - eye).normalized();
        let up = if forward.cross(V3::unit_z()).norm() < 1e-6 {
            V3::unit_y()
        } else {
            V3::unit_z()
        };
        let right = forward.cross(up).normalized();
        let down = forward.cross(right);
        Self {
            pose: Pose::new(Quat::from_basis(right, down, forward), eye),
            fov,
            resolution: 32,
        }
    }

    /// Default view of the workspace from above and in front.
    pub fn nominal() -> Self {
        Self::look_at(V3::new(0.35, 0.0, 0.45), V3::new(0.0, 0.0, 0.03), 0.9)
    }

    pub fn is_valid(&self) -> bool {
        self.fov > 0.2 && self.fov < 2.5 && self.resolution > 0
    }

    /// Unnormalized camera-frame direction `(u, v, 1)` through a pixel center.
    pub fn pixel_direction(&self, row: usize, col: usize) -> V3 {
        let n = self.resolution as f64;
        let t = (0.5 * self.fov).tan();
        let u = ((col as f64 + 0.5) / n * 2.0 - 1.0) * t;
        let v = ((row as f64 + 0.5) / n * 2.0 - 1.0) * t;
        V3::new(u, v, 1.0)
    }
}

/// Robot-observable state: depth image, binary contacts, proprioception.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableState {
    /// Row-major `resolution x resolution` z-depths (m).
    pub depth: Vec<f32>,
    pub contact_bits: Vec<bool>,
    /// Palm pose `[px, py, pz, qw, qx, qy, qz]` followed by the joints.
    pub proprio: Vec<f64>,
}

/// Fixed-layout privileged feature vector; see [`PRIVILEGED_BLOCKS`].
pub fn privileged_obs(sim: &Sim, state: &SimState) -> Vec<f64> {
    let palm = state.hand.palm;
    let inv = palm.inverse();
    let tips = sim.hand.fingertip_positions(&state.hand);
    let mut out = Vec::with_capacity(14 + 12 * tips.len());
    out.extend_from_slice(&palm.encode());
    out.extend_from_slice(&inv.compose(&state.object_pose).encode());
    for t in &tips {
        out.extend_from_slice(&t.to_array());
    }
    for t in &tips {
        out.extend_from_slice(&inv.transform_point(*t).to_array());
    }
    out.extend_from_slice(&state.hand.joints);
    let threshold = sim.config.contact_force_threshold;
    for c in &state.contacts {
        out.push(if c.in_contact && c.force.norm() > threshold { 1.0 } else { 0.0 });
    }
    for c in &state.contacts {
        let n = c.force.norm();
        let d = if c.in_contact && n > 0.0 { c.force * (1.0 / n) } else { V3::zero() };
        out.extend_from_slice(&d.to_array());
    }
    out
}

/// Depth image of the object, fingertip spheres and table.
pub fn render_depth(sim: &Sim, state: &SimState, camera: &CameraSpec) -> Vec<f32> {
    let tips = sim.hand.fingertip_positions(&state.hand);
    let r = sim.hand.fingertip_radius;
    let n = camera.resolution;
    let eye = camera.pose.position;
    let mut out = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let local = camera.pixel_direction(row, col);
            let scale = local.norm();
            let ray = Ray::new(eye, camera.pose.transform_vector(local));
            let mut t_best = f64::INFINITY;
            if let Some(t) = ray_intersect(&ray, &state.shape, &state.object_pose) {
                t_best = t;
            }
            for c in &tips {
                if let Some(t) = ray_sphere(&ray, *c, r) {
                    t_best = t_best.min(t);
                }
            }
            if ray.direction.z < 0.0 && eye.z > 0.0 {
                t_best = t_best.min(-eye.z / ray.direction.z);
            }
            // Distance along the unit ray to z-depth.
            let depth = t_best / scale;
            out.push(if depth > 0.0 && depth <= DEPTH_SENTINEL {
                depth as f32
            } else {
                DEPTH_SENTINEL as f32
            });
        }
    }
    out
}

fn ray_sphere(ray: &Ray<f64>, center: V3, r: f64) -> Option<f64> {
    let oc = ray.origin - center;
    let b = oc.dot(ray.direction);
    let c = oc.norm_squared() - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 >= 0.0 {
        return Some(t0);
    }
    let t1 = -b + sq;
    (t1 >= 0.0).then_some(t1)
}

pub fn observable_obs(sim: &Sim, state: &SimState, camera: &CameraSpec) -> ObservableState {
    let threshold = sim.config.contact_force_threshold;
    let mut proprio = state.hand.palm.encode().to_vec();
    proprio.extend_from_slice(&state.hand.joints);
    ObservableState {
        depth: render_depth(sim, state, camera),
        contact_bits: state
            .contacts
            .iter()
            .map(|c| c.in_contact && c.force.norm() > threshold)
            .collect(),
        proprio,
    }
}

/// Binary 16-bit PGM: depth in units of 0.1 mm, big-endian, maxval 20000.
pub fn write_pgm<W: Write>(depth: &[f32], resolution: usize, mut out: W) -> io::Result<()> {
    let maxval = (DEPTH_SENTINEL * 10_000.0) as u16;
    write!(out, "P5\n{resolution} {resolution}\n{maxval}\n")?;
    let mut bytes = Vec::with_capacity(depth.len() * 2);
    for &d in depth {
        let v = (f64::from(d) * 10_000.0).round().clamp(0.0, f64::from(maxval)) as u16;
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    out.write_all(&bytes)
}
