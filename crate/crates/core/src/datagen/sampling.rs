use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::episode::EpisodeSetup;
use crate::geometry::{Superquadric, EPS_MAX, EPS_MIN};
use crate::math::{Pose, Quat, Vec3};
use crate::sim::CameraSpec;
use crate::skill::{GraspAxis, SkillParam};

type V3 = Vec3<f64>;

/// Sampling distribution for skill parameters, shapes, placements and cameras.
/// Angles are in degrees in the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    pub elevation_deg: [f64; 2],
    pub azimuth_deg: [f64; 2],
    /// Range of the lateral semi-axes `a1`, `a2` (m).
    pub lateral_axis: [f64; 2],
    /// Range of the vertical semi-axis `a3` (m).
    pub vertical_axis: [f64; 2],
    pub eps: [f64; 2],
    pub yaw_deg: [f64; 2],
    /// Side lengths of the rectangular workspace centered at the origin (m).
    pub workspace: [f64; 2],
    /// Half-width of the uniform camera position noise per axis (m).
    pub camera_position_noise: f64,
    /// Half-width of the uniform camera pan and tilt jitter (deg).
    pub camera_angle_noise_deg: f64,
    /// Pre-grasp standoff (m).
    pub standoff: f64,
    /// When set, every draw uses this shape `[a1, a2, a3, eps1, eps2]`.
    pub fixed_shape: Option<[f64; 5]>,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            elevation_deg: [70.0, 90.0],
            azimuth_deg: [0.0, 360.0],
            lateral_axis: [0.02, 0.05],
            vertical_axis: [0.05, 0.10],
            eps: [EPS_MIN, EPS_MAX],
            yaw_deg: [0.0, 360.0],
            workspace: [0.2, 0.2],
            camera_position_noise: 0.03,
            camera_angle_noise_deg: 3.0,
            standoff: 0.1,
            fixed_shape: None,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("invalid sampling spec: {0}")]
pub struct SpecError(pub String);

impl SamplingSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        let ranges = [
            ("elevation_deg", self.elevation_deg),
            ("azimuth_deg", self.azimuth_deg),
            ("lateral_axis", self.lateral_axis),
            ("vertical_axis", self.vertical_axis),
            ("eps", self.eps),
            ("yaw_deg", self.yaw_deg),
        ];
        for (name, r) in ranges {
            if !(r[0] < r[1]) {
                return Err(SpecError(format!("{name}: bounds not ordered")));
            }
        }
        if self.elevation_deg[0] <= 0.0 || self.elevation_deg[1] > 90.0 {
            return Err(SpecError("elevation_deg must lie in (0, 90]".into()));
        }
        if self.eps[0] < EPS_MIN || self.eps[1] > EPS_MAX {
            return Err(SpecError(format!("eps must lie in [{EPS_MIN}, {EPS_MAX}]")));
        }
        if self.lateral_axis[0] <= 0.0 || self.vertical_axis[0] <= 0.0 {
            return Err(SpecError("semi-axes must be positive".into()));
        }
        if self.workspace.iter().any(|w| !(*w >= 0.0)) || self.camera_position_noise < 0.0 || self.camera_angle_noise_deg < 0.0 {
            return Err(SpecError("noise and workspace sizes must be non-negative".into()));
        }
        if let Some(p) = self.fixed_shape {
            Superquadric::from_array(p).map_err(|e| SpecError(e.to_string()))?;
        }
        Ok(())
    }

    /// Shape draw: independent uniform semi-axes and exponents.
    pub fn sample_shape<R: Rng + ?Sized>(&self, rng: &mut R) -> Superquadric<f64> {
        if let Some(p) = self.fixed_shape {
            return Superquadric::from_array(p).expect("validated fixed shape");
        }
        let u = |rng: &mut R, r: [f64; 2]| rng.gen_range(r[0]..=r[1]);
        Superquadric {
            a1: u(rng, self.lateral_axis),
            a2: u(rng, self.lateral_axis),
            a3: u(rng, self.vertical_axis),
            eps1: u(rng, self.eps),
            eps2: u(rng, self.eps),
        }
    }

    /// Draws `(z, phi, object pose, camera)`. The opposition axis is the
    /// narrower of the two lateral semi-axes.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EpisodeSetup {
        let elevation = rng.gen_range(self.elevation_deg[0]..=self.elevation_deg[1]).to_radians();
        let azimuth = rng.gen_range(self.azimuth_deg[0]..self.azimuth_deg[1]).to_radians();
        let shape = self.sample_shape(rng);
        let yaw = rng.gen_range(self.yaw_deg[0]..self.yaw_deg[1]).to_radians();
        let half = [0.5 * self.workspace[0], 0.5 * self.workspace[1]];
        let x = if half[0] > 0.0 { rng.gen_range(-half[0]..=half[0]) } else { 0.0 };
        let y = if half[1] > 0.0 { rng.gen_range(-half[1]..=half[1]) } else { 0.0 };
        let camera = self.sample_camera(rng);
        EpisodeSetup {
            z: SkillParam {
                approach_elevation: elevation,
                approach_azimuth: azimuth,
                grasp_axis: shorter_axis(&shape),
                standoff: self.standoff,
            },
            shape,
            object_pose: Pose::new(Quat::from_axis_angle(V3::unit_z(), yaw), V3::new(x, y, 0.0)),
            camera,
        }
    }

    /// Nominal camera with position noise and pan/tilt jitter.
    pub fn sample_camera<R: Rng + ?Sized>(&self, rng: &mut R) -> CameraSpec {
        let nominal = CameraSpec::nominal();
        let n = self.camera_position_noise;
        let jitter = |rng: &mut R, h: f64| if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 };
        let offset = V3::new(jitter(rng, n), jitter(rng, n), jitter(rng, n));
        let a = self.camera_angle_noise_deg.to_radians();
        let pan = jitter(rng, a);
        let tilt = jitter(rng, a);
        let local = Quat::from_axis_angle(V3::unit_y(), pan) * Quat::from_axis_angle(V3::unit_x(), tilt);
        CameraSpec {
            pose: Pose::new(nominal.pose.rotation * local, nominal.pose.position + offset),
            ..nominal
        }
    }

    /// True when every sampled field of the setup lies inside the spec bounds.
    pub fn contains(&self, setup: &EpisodeSetup) -> bool {
        let tol = 1e-9;
        let inside = |v: f64, r: [f64; 2]| v >= r[0] - tol && v <= r[1] + tol;
        let s = &setup.shape;
        let shape_ok = match self.fixed_shape {
            Some(p) => s.to_array() == p,
            None => {
                inside(s.a1, self.lateral_axis)
                    && inside(s.a2, self.lateral_axis)
                    && inside(s.a3, self.vertical_axis)
                    && inside(s.eps1, self.eps)
                    && inside(s.eps2, self.eps)
            }
        };
        shape_ok && inside(setup.z.approach_elevation.to_degrees(), self.elevation_deg)
    }
}

pub fn shorter_axis(shape: &Superquadric<f64>) -> GraspAxis {
    if shape.a1 <= shape.a2 {
        GraspAxis::X
    } else {
        GraspAxis::Y
    }
}
