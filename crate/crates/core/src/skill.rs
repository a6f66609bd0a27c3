//! Parameterized grasp skill: contact selection, grasp and pre-grasp pose
//! synthesis, the interpolated reference trajectory and its composition with
//! residual corrections.

use serde::{Deserialize, Serialize};

use crate::geometry::{ray_intersect, Ray, Superquadric};
use crate::hand::{FullPose, HandModel};
use crate::math::{pose_delta, pose_interpolate, Pose, Quat, Vec3};
use crate::sim::SimAction;

type V3 = Vec3<f64>;

/// Object axis along which the thumb opposes the fingers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspAxis {
    X,
    Y,
}

impl GraspAxis {
    pub fn unit(self) -> V3 {
        match self {
            GraspAxis::X => V3::unit_x(),
            GraspAxis::Y => V3::unit_y(),
        }
    }

    /// Half-width of the shape along this axis.
    pub fn half_width(self, shape: &Superquadric<f64>) -> f64 {
        match self {
            GraspAxis::X => shape.a1,
            GraspAxis::Y => shape.a2,
        }
    }
}

/// Skill parameter `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillParam {
    /// Angle of the approach direction above the table plane (rad).
    pub approach_elevation: f64,
    pub approach_azimuth: f64,
    pub grasp_axis: GraspAxis,
    /// Pre-grasp distance along the approach direction (m).
    pub standoff: f64,
}

impl SkillParam {
    pub fn top_down(grasp_axis: GraspAxis, standoff: f64) -> Self {
        Self {
            approach_elevation: std::f64::consts::FRAC_PI_2,
            approach_azimuth: 0.0,
            grasp_axis,
            standoff,
        }
    }

    pub fn validate(&self) -> Result<(), SkillError> {
        let el = self.approach_elevation;
        if !(el > 0.0 && el <= std::f64::consts::FRAC_PI_2 + 1e-12) {
            return Err(SkillError::InvalidParam(format!("elevation {el} outside (0, pi/2]")));
        }
        if !(0.05..=0.25).contains(&self.standoff) {
            return Err(SkillError::InvalidParam(format!(
                "standoff {} outside [0.05, 0.25]",
                self.standoff
            )));
        }
        Ok(())
    }

    /// Unit vector from the object toward the approaching hand.
    pub fn approach_direction(&self) -> V3 {
        let (se, ce) = self.approach_elevation.sin_cos();
        let (sa, ca) = self.approach_azimuth.sin_cos();
        V3::new(-ce * ca, -ce * sa, se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillConfig {
    /// Reference horizon `T` (steps).
    pub horizon: usize,
    /// Steps of the lift phase appended after `T`.
    pub lift_steps: usize,
    /// Palm rise per lift step (m).
    pub lift_step: f64,
    /// Steps holding still after the lift.
    pub hold_steps: usize,
    /// Pre-grasp distance used when sampling skill parameters (m).
    pub standoff: f64,
    /// Depth by which fingertip targets press into the surface (m).
    pub squeeze_depth: f64,
    /// Pre-grasp finger opening as a fraction of each joint range.
    pub pregrasp_fraction: f64,
    pub ik_iterations: usize,
    /// Maximum fingertip placement error of a reachable grasp (m).
    pub ik_tolerance: f64,
    /// Palm offsets along the approach axis scanned during placement (m).
    pub palm_scan_max: f64,
    pub palm_scan_step: f64,
    /// Residual clamps: palm translation (m), palm rotation (rad), joints (rad).
    pub residual_bounds: [f64; 3],
}

impl Default for SkillConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            lift_steps: 15,
            lift_step: 0.01,
            hold_steps: 10,
            standoff: 0.1,
            squeeze_depth: 0.002,
            pregrasp_fraction: 0.2,
            ik_iterations: 200,
            ik_tolerance: 0.003,
            palm_scan_max: 0.2,
            palm_scan_step: 0.002,
            residual_bounds: [0.01, 0.05, 0.1],
        }
    }
}

impl SkillConfig {
    /// Steps after the reference horizon (lift plus hold).
    pub fn suffix_steps(&self) -> usize {
        self.lift_steps + self.hold_steps
    }

    /// Total control steps of one episode.
    pub fn episode_steps(&self) -> usize {
        self.horizon + self.suffix_steps()
    }

    /// Per-dimension residual clamp for a hand with `joint_count` joints.
    pub fn residual_limits(&self, joint_count: usize) -> Vec<f64> {
        let [p, r, j] = self.residual_bounds;
        let mut out = vec![p, p, p, r, r, r];
        out.extend(std::iter::repeat(j).take(joint_count));
        out
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("invalid skill parameter: {0}")]
    InvalidParam(String),
    #[error("opposition width {width:.4} m exceeds hand aperture {aperture:.4} m")]
    TooWide { width: f64, aperture: f64 },
    #[error("grasp unreachable: fingertip residual {residual:.4} m")]
    Unreachable { residual: f64 },
    #[error("contact ray missed the surface")]
    ContactMiss,
    #[error("step {t} outside horizon {horizon}")]
    OutOfRange { t: usize, horizon: usize },
    #[error("horizon must be at least 2, got {0}")]
    ShortHorizon(usize),
}

impl SkillError {
    /// Errors after which a fresh parameter sample may succeed.
    pub fn is_unreachable(&self) -> bool {
        matches!(
            self,
            SkillError::TooWide { .. } | SkillError::Unreachable { .. } | SkillError::ContactMiss
        )
    }
}

/// Result of grasp synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPlan {
    pub pose: FullPose<f64>,
    /// Surface contact points in the object frame, one per finger.
    pub contacts: Vec<V3>,
    /// Fingertip center targets in the object frame, one per finger.
    pub tip_targets: Vec<V3>,
    /// Largest fingertip placement error of the joint solve (m).
    pub residual: f64,
}

/// Largest thumb-to-finger fingertip separation along the palm `x` axis,
/// reached with all joints at their lower limits.
pub fn hand_aperture(hand: &HandModel<f64>) -> f64 {
    let lo = hand.joints_at_fraction(0.0);
    let thumb = hand.thumb();
    let t = hand.fingertip_in_palm(thumb, lo[2 * thumb], lo[2 * thumb + 1]);
    (0..hand.finger_count())
        .filter(|&f| f != thumb)
        .map(|f| (hand.fingertip_in_palm(f, lo[2 * f], lo[2 * f + 1]).x - t.x).abs())
        .fold(0.0, f64::max)
}

fn wrap(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut a = a % tau;
    if a > std::f64::consts::PI {
        a -= tau;
    } else if a <= -std::f64::consts::PI {
        a += tau;
    }
    a
}

/// Coordinate descent on one planar two-link finger toward a palm-frame
/// target. Each sweep sets each joint to its closed-form optimum with the
/// other held fixed. Returns the joints and the remaining 3D error.
pub fn solve_finger(hand: &HandModel<f64>, finger: usize, target: V3, iterations: usize) -> ([f64; 2], f64) {
    let spec = &hand.fingers[finger];
    let t = spec.mount.inverse().transform_point(target);
    let [l1, _] = spec.links;
    let [lim1, lim2] = spec.limits;
    let mut q = [0.5 * (lim1[0] + lim1[1]), 0.5 * (lim2[0] + lim2[1])];
    let angle = |x: f64, z: f64| x.atan2(-z);
    let goal = angle(t.x, t.z);
    for _ in 0..iterations {
        let prev = q;
        let tip = hand.fingertip_in_mount(finger, q[0], q[1]);
        q[0] = (q[0] + wrap(goal - angle(tip.x, tip.z))).clamp(lim1[0], lim1[1]);
        let (s1, c1) = q[0].sin_cos();
        let (ex, ez) = (l1 * s1, -l1 * c1);
        q[1] = wrap(angle(t.x - ex, t.z - ez) - q[0]).clamp(lim2[0], lim2[1]);
        if (q[0] - prev[0]).abs() + (q[1] - prev[1]).abs() < 1e-13 {
            break;
        }
    }
    let err = (hand.fingertip_in_mount(finger, q[0], q[1]) - t).norm();
    (q, err)
}

/// Palm orientation for an approach: palm `z` along the approach direction
/// (made perpendicular to `h`), palm `y` along the horizontal axis `h`
/// perpendicular to the grasp axis, palm `x` completing the frame.
pub fn palm_rotation(grasp_axis_world: V3, approach: V3) -> Quat<f64> {
    let h = V3::unit_z().cross(grasp_axis_world).normalized();
    let z = (approach - h * approach.dot(h)).normalized();
    let x = h.cross(z);
    Quat::from_basis(x, h, z)
}

/// Opposition-heuristic contacts in the object frame: the thumb where the
/// `-axis` ray from the centroid leaves the surface, the other fingers on the
/// `+axis` side at their lateral mount offsets.
fn select_contacts(shape: &Superquadric<f64>, axis: GraspAxis, hand: &HandModel<f64>) -> Result<Vec<V3>, SkillError> {
    let g = axis.unit();
    let h = V3::unit_z().cross(g);
    let far = shape.a1 + shape.a2 + shape.a3;
    let thumb = hand.thumb();
    let mut contacts = Vec::with_capacity(hand.finger_count());
    for f in 0..hand.finger_count() {
        if f == thumb {
            contacts.push(shape.radial_projection(-g));
            continue;
        }
        let mut offset = hand.fingers[f].mount.position.y;
        let mut hit = None;
        for _ in 0..12 {
            let origin = h * offset + g * far;
            let ray = Ray::new(origin, -g);
            if let Some(t) = ray_intersect(&ray, shape, &Pose::identity()) {
                hit = Some(ray.at(t));
                break;
            }
            offset *= 0.7;
        }
        contacts.push(hit.ok_or(SkillError::ContactMiss)?);
    }
    Ok(contacts)
}

/// Grasp pose `x_g` for the shape at `object_pose` under skill parameter `z`.
pub fn grasp_pose(
    shape: &Superquadric<f64>,
    object_pose: &Pose<f64>,
    z: &SkillParam,
    hand: &HandModel<f64>,
    cfg: &SkillConfig,
) -> Result<GraspPlan, SkillError> {
    z.validate()?;
    let r = hand.fingertip_radius;
    let width = 2.0 * (z.grasp_axis.half_width(shape) + r - cfg.squeeze_depth);
    let aperture = hand_aperture(hand);
    if width > aperture {
        return Err(SkillError::TooWide { width, aperture });
    }
    let g = z.grasp_axis.unit();
    let h = V3::unit_z().cross(g);
    let contacts = select_contacts(shape, z.grasp_axis, hand)?;
    let tip_targets: Vec<V3> = contacts
        .iter()
        .map(|&c| {
            let n = shape.surface_normal(c).unwrap_or_else(|_| c.normalized());
            let n = (n - h * n.dot(h)).normalized();
            c + n * (r - cfg.squeeze_depth)
        })
        .collect();

    let rot = palm_rotation(object_pose.transform_vector(g), z.approach_direction());
    let axis = rot.rotate(V3::unit_z());
    let center = object_pose.position;
    let world_targets: Vec<V3> = tip_targets.iter().map(|&t| object_pose.transform_point(t)).collect();

    let solve_at = |lambda: f64| {
        let palm = Pose::new(rot, center + axis * lambda);
        let inv = palm.inverse();
        let mut joints = Vec::with_capacity(hand.joint_count());
        let mut worst = 0.0f64;
        for (f, wt) in world_targets.iter().enumerate() {
            let (q, err) = solve_finger(hand, f, inv.transform_point(*wt), cfg.ik_iterations);
            joints.extend_from_slice(&q);
            worst = worst.max(err);
        }
        (palm, joints, worst)
    };

    let steps = (cfg.palm_scan_max / cfg.palm_scan_step).round() as usize;
    let scan: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let lambda = i as f64 * cfg.palm_scan_step;
            (lambda, solve_at(lambda).2)
        })
        .collect();
    let best = scan.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    // Prefer the middle of the widest band of exact solutions; fall back to
    // the widest band within tolerance.
    let pick = [1e-4, cfg.ik_tolerance]
        .iter()
        .find_map(|&tol| widest_run(&scan, tol))
        .ok_or(SkillError::Unreachable { residual: best })?;
    let (palm, joints, residual) = solve_at(pick);
    if residual > cfg.ik_tolerance {
        return Err(SkillError::Unreachable { residual });
    }
    Ok(GraspPlan {
        pose: FullPose {
            palm,
            joints: hand.clamp_to_limits(&joints),
        },
        contacts,
        tip_targets,
        residual,
    })
}

/// Midpoint of the longest contiguous run of scan entries with error `<= tol`.
fn widest_run(scan: &[(f64, f64)], tol: f64) -> Option<f64> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, s) in scan.iter().enumerate() {
        match (s.1 <= tol, start) {
            (true, None) => start = Some(i),
            (false, Some(b)) => {
                if best.map_or(true, |(x, y)| i - b > y - x) {
                    best = Some((b, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        if best.map_or(true, |(x, y)| scan.len() - b > y - x) {
            best = Some((b, scan.len()));
        }
    }
    best.map(|(b, e)| scan[(b + e - 1) / 2].0)
}

/// Pre-grasp pose `x_0`: the grasp palm backed off along the approach
/// direction, same orientation, fingers opened to a fixed fraction of range.
pub fn pregrasp_pose(xg: &FullPose<f64>, z: &SkillParam, hand: &HandModel<f64>, cfg: &SkillConfig) -> FullPose<f64> {
    FullPose {
        palm: Pose::new(
            xg.palm.rotation,
            xg.palm.position + z.approach_direction() * z.standoff,
        ),
        joints: hand.joints_at_fraction(cfg.pregrasp_fraction),
    }
}

/// Reference trajectory `xi`: interpolation from `x0` to `xg` over `horizon` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub x0: FullPose<f64>,
    pub xg: FullPose<f64>,
    pub horizon: usize,
}

impl ReferenceTrajectory {
    pub fn new(x0: FullPose<f64>, xg: FullPose<f64>, horizon: usize) -> Result<Self, SkillError> {
        if horizon < 2 {
            return Err(SkillError::ShortHorizon(horizon));
        }
        Ok(Self { x0, xg, horizon })
    }

    pub fn reference_at(&self, t: usize) -> Result<FullPose<f64>, SkillError> {
        if t > self.horizon {
            return Err(SkillError::OutOfRange { t, horizon: self.horizon });
        }
        if t == 0 {
            return Ok(self.x0.clone());
        }
        if t == self.horizon {
            return Ok(self.xg.clone());
        }
        let alpha = t as f64 / self.horizon as f64;
        Ok(FullPose {
            palm: pose_interpolate(&self.x0.palm, &self.xg.palm, alpha),
            joints: self
                .x0
                .joints
                .iter()
                .zip(&self.xg.joints)
                .map(|(a, b)| a + (b - a) * alpha)
                .collect(),
        })
    }

    /// Reference over a whole episode: the interpolation up to `T`, then the
    /// grasp pose raised by the lift schedule and held.
    pub fn episode_reference(&self, t: usize, cfg: &SkillConfig) -> FullPose<f64> {
        if t <= self.horizon {
            return self.reference_at(t).expect("t within horizon");
        }
        let k = (t - self.horizon).min(cfg.lift_steps);
        let mut p = self.xg.clone();
        p.palm.position.z += k as f64 * cfg.lift_step;
        p
    }

    /// Left-multiplies both palm poses by `transform`; joints are unchanged.
    pub fn transformed(&self, transform: &Pose<f64>) -> Self {
        let lift = |x: &FullPose<f64>| FullPose {
            palm: transform.compose(&x.palm),
            joints: x.joints.clone(),
        };
        Self {
            x0: lift(&self.x0),
            xg: lift(&self.xg),
            horizon: self.horizon,
        }
    }
}

pub fn transform_reference(traj: &ReferenceTrajectory, transform: &Pose<f64>) -> ReferenceTrajectory {
    traj.transformed(transform)
}

/// Clamps a residual vector to the per-dimension limits.
pub fn clamp_residual(residual: &[f64], limits: &[f64]) -> Vec<f64> {
    residual
        .iter()
        .zip(limits)
        .map(|(r, l)| r.clamp(-l, *l))
        .collect()
}

/// `a_t = xi_t + pi(s_t)`: the reference step plus a clamped residual.
/// The residual layout is `[dp (3), dr (3), joints]`.
pub fn compose_action(
    ref_now: &FullPose<f64>,
    ref_next: &FullPose<f64>,
    residual: &[f64],
    hand: &HandModel<f64>,
    cfg: &SkillConfig,
) -> SimAction {
    let r = clamp_residual(residual, &cfg.residual_limits(hand.joint_count()));
    let base = pose_delta(&ref_now.palm, &ref_next.palm);
    let mut delta_palm = [0.0; 6];
    for k in 0..6 {
        delta_palm[k] = base[k] + r[k];
    }
    let joints: Vec<f64> = ref_next.joints.iter().zip(&r[6..]).map(|(q, d)| q + d).collect();
    SimAction {
        delta_palm,
        target_joints: hand.clamp_to_limits(&joints),
    }
}
