//! Superquadric grasp simulation, residual PPO over a reference grasp skill,
//! success-filtered data generation and behavior cloning.
//!
//! Geometry, kinematics and the networks are generic over [`scalar::Real`];
//! the aliases below fix the scalar at `f64`.

pub mod bc;
pub mod config;
pub mod datagen;
pub mod episode;
pub mod geometry;
pub mod hand;
pub mod math;
pub mod policy;
pub mod scalar;
pub mod sim;
pub mod skill;

pub type Vec3d = math::Vec3<f64>;
pub type Quatd = math::Quat<f64>;
pub type Posed = math::Pose<f64>;
pub type Superquadricd = geometry::Superquadric<f64>;
pub type HandModeld = hand::HandModel<f64>;
pub type Mlpd = policy::Mlp<f64>;
pub type BcPolicyf = bc::BcPolicy<f32>;
