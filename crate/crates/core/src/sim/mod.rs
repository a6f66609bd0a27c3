//! Penalty-contact tabletop environment: one superquadric object, a table
//! half-space at `z = 0`, and a kinematically driven hand whose fingertips are
//! spheres.
//!
//! The object is a rigid body integrated with semi-implicit Euler over
//! `substeps` sub-intervals of each control step. Fingertips press on it with
//! spring-damper normal forces and anchor-spring friction capped by the
//! Coulomb cone. The table acts through up to five support points so that flat
//! bottoms rest stably.

mod obs;

pub use obs::{
    observable_obs, privileged_obs, render_depth, write_pgm, CameraSpec, ObservableState,
    DEPTH_SENTINEL, PRIVILEGED_BLOCKS,
};

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryError, Superquadric};
use crate::hand::{FullPose, HandConfig, HandModel};
use crate::math::{pose_interpolate, Pose, Quat, Vec3};

type V3 = Vec3<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Control step (s).
    pub dt: f64,
    /// Integration sub-steps per control step.
    pub substeps: usize,
    /// Fingertip normal stiffness `k_n` (N/m).
    pub contact_stiffness: f64,
    /// Fingertip normal damping (N s/m).
    pub contact_damping: f64,
    /// Stiffness of the tangential anchor spring (N/m).
    pub tangential_stiffness: f64,
    /// Tangential damping (N s/m).
    pub tangential_damping: f64,
    /// Coulomb coefficient for fingertips and table.
    pub friction: f64,
    /// Object density (kg/m^3).
    pub density: f64,
    pub gravity: f64,
    /// Velocity scale factor applied once per control step.
    pub damping: f64,
    /// Table stiffness per support point (N/m).
    pub table_stiffness: f64,
    /// Table damping, as a fraction of critical damping for the object
    /// resting on all support points together.
    pub table_damping_ratio: f64,
    /// Joint slew limit (rad/s).
    pub max_joint_speed: f64,
    /// Fingertip penetration beyond which a finger yields (m).
    pub max_penetration: f64,
    /// Per-step palm translation clamp (m).
    pub max_palm_step: f64,
    /// Per-step palm rotation clamp (rad).
    pub max_palm_rotation: f64,
    /// Object height required for success (m).
    pub lift_height: f64,
    /// Required rise above the resting height (m).
    pub min_lift: f64,
    /// Maximum accumulated slip for success (m).
    pub slip_tolerance: f64,
    /// Force magnitude above which a contact bit is set (N).
    pub contact_force_threshold: f64,
    /// Object speed treated as numerical divergence (m/s).
    pub max_object_speed: f64,
    /// Palm height of the home pose after reset (m).
    pub home_height: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            substeps: 40,
            contact_stiffness: 800.0,
            contact_damping: 2.0,
            tangential_stiffness: 800.0,
            tangential_damping: 2.0,
            friction: 0.8,
            density: 300.0,
            gravity: 9.81,
            damping: 0.95,
            table_stiffness: 2.0e4,
            table_damping_ratio: 0.5,
            max_joint_speed: 2.0,
            max_penetration: 0.005,
            max_palm_step: 0.02,
            max_palm_rotation: 0.1,
            lift_height: 0.10,
            min_lift: 0.02,
            slip_tolerance: 0.01,
            contact_force_threshold: 0.05,
            max_object_speed: 10.0,
            home_height: 0.5,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("simulation diverged at step {step}: object speed {speed:.3} m/s")]
    Diverged { step: usize, speed: f64 },
    #[error("expected {expected} joint targets, got {got}")]
    ActionShape { expected: usize, got: usize },
}

/// Per-finger contact record. `force` is the force the fingertip applies to
/// the object.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Contact {
    pub in_contact: bool,
    pub point: V3,
    pub normal: V3,
    pub force: V3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub hand: HandConfig<f64>,
    pub object_pose: Pose<f64>,
    /// `[vx, vy, vz, wx, wy, wz]`, world frame.
    pub object_velocity: [f64; 6],
    pub contacts: Vec<Contact>,
    pub time_step_index: usize,
    pub shape: Superquadric<f64>,
    pub success_latched: bool,
    /// Joint targets of the last action.
    pub joint_targets: Vec<f64>,
    /// Friction anchors in the object frame, one slot per finger.
    pub anchors: Vec<Option<V3>>,
    /// Accumulated anchor sliding per finger since its first contact (m).
    pub finger_slip: Vec<f64>,
    /// Object height at rest on the table.
    pub rest_height: f64,
    pub mass: f64,
}

impl SimState {
    /// Slip metric: the largest accumulated tangential slide over fingers.
    pub fn slip(&self) -> f64 {
        self.finger_slip.iter().cloned().fold(0.0, f64::max)
    }

    pub fn full_pose(&self) -> FullPose<f64> {
        self.hand.clone()
    }

    pub fn object_speed(&self) -> f64 {
        let v = self.object_velocity;
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    pub fn kinetic_energy(&self, inertia: V3) -> f64 {
        let v = self.object_velocity;
        let w = self.object_pose.rotation.inverse().rotate(V3::new(v[3], v[4], v[5]));
        0.5 * self.mass * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            + 0.5 * (inertia.x * w.x * w.x + inertia.y * w.y * w.y + inertia.z * w.z * w.z)
    }
}

/// Palm displacement plus absolute joint targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAction {
    /// `[dx, dy, dz, rx, ry, rz]`: world-frame translation and rotation vector.
    pub delta_palm: [f64; 6],
    pub target_joints: Vec<f64>,
}

impl SimAction {
    /// Flat layout: the palm delta followed by the joint targets.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.delta_palm.to_vec();
        v.extend_from_slice(&self.target_joints);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut delta_palm = [0.0; 6];
        delta_palm.copy_from_slice(&v[..6]);
        Self {
            delta_palm,
            target_joints: v[6..].to_vec(),
        }
    }

    /// Holds the palm still and keeps the given joint targets.
    pub fn hold(joints: &[f64]) -> Self {
        Self {
            delta_palm: [0.0; 6],
            target_joints: joints.to_vec(),
        }
    }
}

/// Support directions for table contact, world frame.
fn table_directions() -> [V3; 5] {
    let s = 0.5;
    [
        V3::new(0.0, 0.0, -1.0),
        V3::new(s, 0.0, -1.0).normalized(),
        V3::new(-s, 0.0, -1.0).normalized(),
        V3::new(0.0, s, -1.0).normalized(),
        V3::new(0.0, -s, -1.0).normalized(),
    ]
}

/// Environment definition. Holds no per-episode data; every method maps
/// states to new states.
#[derive(Debug, Clone, PartialEq)]
pub struct Sim {
    pub config: SimConfig,
    pub hand: HandModel<f64>,
}

impl Sim {
    pub fn new(config: SimConfig, hand: HandModel<f64>) -> Self {
        Self { config, hand }
    }

    pub fn mass(&self, shape: &Superquadric<f64>) -> f64 {
        self.config.density * shape.volume()
    }

    /// Diagonal principal inertia of the bounding box with the object's mass.
    pub fn inertia(&self, shape: &Superquadric<f64>) -> V3 {
        let m = self.mass(shape);
        let (a, b, c) = (shape.a1, shape.a2, shape.a3);
        V3::new(
            m * (b * b + c * c) / 3.0,
            m * (a * a + c * c) / 3.0,
            m * (a * a + b * b) / 3.0,
        )
    }

    fn table_point_stiffness(&self) -> f64 {
        self.config.table_stiffness
    }

    /// Places the object upright at the given horizontal position and
    /// orientation, at the height where the table springs carry its weight.
    /// The hand starts at a far home pose with open fingers.
    pub fn reset(&self, shape: Superquadric<f64>, object_pose: Pose<f64>) -> Result<SimState, SimError> {
        shape.validate()?;
        let mass = self.mass(&shape);
        let rot = object_pose.rotation;
        let lows: Vec<f64> = table_directions()
            .iter()
            .map(|d| rot.rotate(shape.support_point(rot.inverse().rotate(*d))).z)
            .collect();
        let lowest = lows.iter().cloned().fold(f64::INFINITY, f64::min);
        let k = self.table_point_stiffness();
        let weight = mass * self.config.gravity;
        let load = |delta: f64| -> f64 {
            lows.iter().map(|l| k * (delta - (l - lowest)).max(0.0)).sum::<f64>() - weight
        };
        let (mut lo, mut hi) = (0.0, weight / k);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if load(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = -lowest - 0.5 * (lo + hi);
        let pose = Pose::new(rot, V3::new(object_pose.position.x, object_pose.position.y, z));
        let n = self.hand.finger_count();
        let joints = self.hand.joints_at_fraction(0.0);
        Ok(SimState {
            hand: FullPose {
                palm: Pose::from_translation(V3::new(0.0, 0.0, self.config.home_height)),
                joints: joints.clone(),
            },
            object_pose: pose,
            object_velocity: [0.0; 6],
            contacts: vec![Contact::default(); n],
            time_step_index: 0,
            shape,
            success_latched: false,
            joint_targets: joints,
            anchors: vec![None; n],
            finger_slip: vec![0.0; n],
            rest_height: z,
            mass,
        })
    }

    /// Teleports the hand (the approach phase is not simulated).
    pub fn place_hand(&self, state: &SimState, pose: &FullPose<f64>) -> SimState {
        let mut s = state.clone();
        s.hand = FullPose {
            palm: pose.palm,
            joints: self.hand.clamp_to_limits(&pose.joints),
        };
        s.joint_targets = s.hand.joints.clone();
        s
    }

    /// Clamps palm deltas to the per-step limits and joints to their ranges.
    pub fn clamp_action(&self, action: &SimAction) -> SimAction {
        let d = action.delta_palm;
        let scale = |v: V3, max: f64| {
            let n = v.norm();
            if n > max {
                v * (max / n)
            } else {
                v
            }
        };
        let dp = scale(V3::new(d[0], d[1], d[2]), self.config.max_palm_step);
        let dr = scale(V3::new(d[3], d[4], d[5]), self.config.max_palm_rotation);
        SimAction {
            delta_palm: [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z],
            target_joints: self.hand.clamp_to_limits(&action.target_joints),
        }
    }

    /// Fingertip penetration into the object or, below the table, into the table.
    fn blocking_depth(&self, state: &SimState, palm: &Pose<f64>, finger: usize, q1: f64, q2: f64) -> f64 {
        let r = self.hand.fingertip_radius;
        let tip = palm.transform_point(self.hand.fingertip_in_palm(finger, q1, q2));
        let local = state.object_pose.inverse().transform_point(tip);
        let obj = if within_reach(&state.shape, local, r) {
            r - state.shape.closest_point(local).signed_distance
        } else {
            0.0
        };
        obj.max(r - tip.z)
    }

    /// Moves finger joints toward `target` by at most `max_step`, yielding
    /// where the fingertip would press deeper than `max_penetration`.
    fn drive_joints(&self, state: &SimState, palm: &Pose<f64>, prev: &[f64], target: &[f64], max_step: f64) -> Vec<f64> {
        let mut q: Vec<f64> = prev
            .iter()
            .zip(target)
            .map(|(&p, &t)| p + (t - p).clamp(-max_step, max_step))
            .collect();
        let dmax = self.config.max_penetration;
        for f in 0..self.hand.finger_count() {
            let (i, j) = (2 * f, 2 * f + 1);
            if self.blocking_depth(state, palm, f, q[i], q[j]) <= dmax {
                continue;
            }
            let lo = self.hand.fingers[f].limits;
            let candidates = [[prev[i], prev[j]], [lo[0][0], lo[1][0]]];
            let Some(safe) = candidates
                .into_iter()
                .find(|c| self.blocking_depth(state, palm, f, c[0], c[1]) <= dmax)
            else {
                continue;
            };
            let (mut a, mut b) = (0.0, 1.0);
            for _ in 0..12 {
                let m = 0.5 * (a + b);
                let (m1, m2) = (safe[0] + m * (q[i] - safe[0]), safe[1] + m * (q[j] - safe[1]));
                if self.blocking_depth(state, palm, f, m1, m2) <= dmax {
                    a = m;
                } else {
                    b = m;
                }
            }
            q[i] = safe[0] + a * (q[i] - safe[0]);
            q[j] = safe[1] + a * (q[j] - safe[1]);
        }
        q
    }

    /// Advances one control step.
    pub fn step(&self, state: &SimState, action: &SimAction) -> Result<SimState, SimError> {
        let nj = self.hand.joint_count();
        if action.target_joints.len() != nj {
            return Err(SimError::ActionShape {
                expected: nj,
                got: action.target_joints.len(),
            });
        }
        let cfg = &self.config;
        let action = self.clamp_action(action);
        let d = action.delta_palm;
        let palm_start = state.hand.palm;
        let palm_end = Pose::new(
            Quat::from_rotation_vector(V3::new(d[3], d[4], d[5])) * palm_start.rotation,
            palm_start.position + V3::new(d[0], d[1], d[2]),
        );

        let n = cfg.substeps.max(1);
        let h = cfg.dt / n as f64;
        let sub_damping = cfg.damping.powf(1.0 / n as f64);
        let inertia = self.inertia(&state.shape);
        let weight = state.mass * cfg.gravity;
        let r = self.hand.fingertip_radius;
        let k_table = self.table_point_stiffness();
        let n_dirs = table_directions().len() as f64;
        let c_table = cfg.table_damping_ratio * 2.0 * (k_table * state.mass / n_dirs).sqrt();
        let c_table_friction = state.mass / (10.0 * h);
        let dirs = table_directions();

        let mut s = state.clone();
        s.joint_targets = action.target_joints.clone();
        let mut tips_prev = self.hand.fingertip_positions(&s.hand);
        let mut contacts = vec![Contact::default(); self.hand.finger_count()];

        for k in 0..n {
            let palm = pose_interpolate(&palm_start, &palm_end, (k + 1) as f64 / n as f64);
            let joints = self.drive_joints(&s, &palm, &s.hand.joints, &action.target_joints, cfg.max_joint_speed * h);
            s.hand = FullPose { palm, joints };
            let tips = self.hand.fingertip_positions(&s.hand);

            let pose = s.object_pose;
            let inv = pose.inverse();
            let com = pose.position;
            let v = V3::new(s.object_velocity[0], s.object_velocity[1], s.object_velocity[2]);
            let w = V3::new(s.object_velocity[3], s.object_velocity[4], s.object_velocity[5]);
            let mut force = V3::new(0.0, 0.0, -weight);
            let mut torque = V3::zero();

            for (f, contact) in contacts.iter_mut().enumerate() {
                *contact = Contact::default();
                let local = inv.transform_point(tips[f]);
                if !within_reach(&s.shape, local, r) {
                    s.anchors[f] = None;
                    continue;
                }
                let proj = s.shape.closest_point(local);
                let pen = r - proj.signed_distance;
                if pen <= 0.0 {
                    s.anchors[f] = None;
                    continue;
                }
                let normal = pose.transform_vector(proj.normal);
                let point = pose.transform_point(proj.foot);
                let arm = point - com;
                let v_tip = (tips[f] - tips_prev[f]) * (1.0 / h);
                let v_rel = v + w.cross(arm) - v_tip;
                let fn_mag = (cfg.contact_stiffness * pen + cfg.contact_damping * v_rel.dot(normal)).max(0.0);

                let anchor_w = pose.transform_point(s.anchors[f].unwrap_or(proj.foot));
                let disp = point - anchor_w;
                let disp_t = disp - normal * disp.dot(normal);
                let v_rel_t = v_rel - normal * v_rel.dot(normal);
                let mut ft = disp_t * cfg.tangential_stiffness - v_rel_t * cfg.tangential_damping;
                let cap = cfg.friction * fn_mag;
                let mut anchor_new = anchor_w;
                if ft.norm() > cap {
                    ft = if ft.norm() > 0.0 { ft * (cap / ft.norm()) } else { ft };
                    let spring = disp_t.norm();
                    let allowed = cap / cfg.tangential_stiffness;
                    if spring > allowed {
                        anchor_new = point - disp_t * (allowed / spring);
                        s.finger_slip[f] += (anchor_new - anchor_w).norm();
                    }
                }
                s.anchors[f] = Some(inv.transform_point(anchor_new));

                let f_obj = ft - normal * fn_mag;
                force += f_obj;
                torque += arm.cross(f_obj);
                *contact = Contact {
                    in_contact: true,
                    point,
                    normal,
                    force: f_obj,
                };
            }

            for d in dirs.iter() {
                let lp = s.shape.support_point(inv.rotation.rotate(*d));
                let point = pose.transform_point(lp);
                let pen = -point.z;
                if pen <= 0.0 {
                    continue;
                }
                let arm = point - com;
                let vp = v + w.cross(arm);
                let fn_mag = (k_table * pen - c_table * vp.z).max(0.0);
                let vt = V3::new(vp.x, vp.y, 0.0);
                let speed = vt.norm();
                let mut f_c = V3::new(0.0, 0.0, fn_mag);
                if speed > 0.0 {
                    let mag = (c_table_friction * speed).min(cfg.friction * fn_mag);
                    f_c -= vt * (mag / speed);
                }
                force += f_c;
                torque += arm.cross(f_c);
            }

            let v_new = (v + force * (h / s.mass)) * sub_damping;
            let tb = inv.rotation.rotate(torque);
            let wb = inv.rotation.rotate(w);
            let wb_new = V3::new(
                wb.x + h * tb.x / inertia.x,
                wb.y + h * tb.y / inertia.y,
                wb.z + h * tb.z / inertia.z,
            );
            let w_new = pose.rotation.rotate(wb_new) * sub_damping;
            let speed = v_new.norm();
            if !(speed <= cfg.max_object_speed) || !w_new.is_finite() {
                return Err(SimError::Diverged {
                    step: state.time_step_index,
                    speed,
                });
            }
            s.object_velocity = [v_new.x, v_new.y, v_new.z, w_new.x, w_new.y, w_new.z];
            s.object_pose = Pose::new(
                Quat::from_rotation_vector(w_new * h) * pose.rotation,
                pose.position + v_new * h,
            );
            tips_prev = tips;
        }

        s.contacts = contacts;
        s.time_step_index += 1;
        if self.check_success(&s) {
            s.success_latched = true;
        }
        Ok(s)
    }

    /// Number of fingers whose contact force exceeds the bit threshold.
    pub fn active_contacts(&self, state: &SimState) -> usize {
        state
            .contacts
            .iter()
            .filter(|c| c.in_contact && c.force.norm() > self.config.contact_force_threshold)
            .count()
    }

    /// Lifted high enough, held by at least two fingers, without slipping.
    pub fn check_success(&self, state: &SimState) -> bool {
        let z = state.object_pose.position.z;
        z >= self.config.lift_height
            && z >= state.rest_height + self.config.min_lift
            && self.active_contacts(state) >= 2
            && state.slip() <= self.config.slip_tolerance
    }
}

/// Cheap bounding-box rejection for fingertip queries in the object frame.
fn within_reach(shape: &Superquadric<f64>, local: V3, r: f64) -> bool {
    local.x.abs() <= shape.a1 + r && local.y.abs() <= shape.a2 + r && local.z.abs() <= shape.a3 + r
}
