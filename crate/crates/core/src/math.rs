//! Small fixed-size vector, quaternion and rigid-pose types.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction; the zero vector is returned unchanged.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self * (T::one() / n)
        } else {
            self
        }
    }

    pub fn component_mul(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn abs(self) -> Self {
        Self::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Unit quaternion `(w, x, y, z)` representing a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quat<T> {
    pub const fn from_wxyz(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::from_wxyz(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn vector(self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn norm(self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(self) -> Self {
        Self::from_wxyz(self.w, -self.x, -self.y, -self.z)
    }

    /// Rescales to unit norm and flips the sign so that `w >= 0`.
    pub fn canonical(self) -> Self {
        let n = self.norm();
        let q = Self::from_wxyz(self.w / n, self.x / n, self.y / n, self.z / n);
        if q.w < T::zero() {
            Self::from_wxyz(-q.w, -q.x, -q.y, -q.z)
        } else {
            q
        }
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let half = angle * T::lit(0.5);
        let a = axis.normalized() * half.sin();
        Self::from_wxyz(half.cos(), a.x, a.y, a.z)
    }

    /// Exponential map of a rotation vector (axis * angle).
    pub fn from_rotation_vector(v: Vec3<T>) -> Self {
        let angle = v.norm();
        if angle < T::lit(1e-12) {
            let h = v * T::lit(0.5);
            Self::from_wxyz(T::one(), h.x, h.y, h.z).canonical()
        } else {
            Self::from_axis_angle(v, angle)
        }
    }

    /// Logarithm map: rotation vector with angle in `[0, pi]`.
    pub fn to_rotation_vector(self) -> Vec3<T> {
        let q = self.canonical();
        let v = q.vector();
        let s = v.norm();
        if s < T::lit(1e-12) {
            return v * T::lit(2.0);
        }
        let angle = T::lit(2.0) * s.atan2(q.w);
        v * (angle / s)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(self) -> T {
        let q = self.canonical();
        T::lit(2.0) * q.vector().norm().atan2(q.w)
    }

    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = self.vector();
        let t = u.cross(v) * T::lit(2.0);
        v + t * self.w + u.cross(t)
    }

    pub fn inverse(self) -> Self {
        self.conjugate()
    }

    /// Geodesic interpolation between two rotations; the antipodal sign of `b`
    /// is resolved before interpolating so the shortest arc is taken.
    pub fn slerp(self, b: Self, alpha: T) -> Self {
        let mut b = b;
        let mut d = self.dot(b);
        if d < T::zero() {
            b = Self::from_wxyz(-b.w, -b.x, -b.y, -b.z);
            d = -d;
        }
        let (wa, wb) = if d > T::lit(1.0 - 1e-12) {
            (T::one() - alpha, alpha)
        } else {
            let theta = d.min(T::one()).acos();
            let s = theta.sin();
            (
                ((T::one() - alpha) * theta).sin() / s,
                (alpha * theta).sin() / s,
            )
        };
        Self::from_wxyz(
            wa * self.w + wb * b.w,
            wa * self.x + wb * b.x,
            wa * self.y + wb * b.y,
            wa * self.z + wb * b.z,
        )
        .canonical()
    }

    /// Rotation matrix rows.
    pub fn to_matrix(self) -> [[T; 3]; 3] {
        let ex = self.rotate(Vec3::unit_x());
        let ey = self.rotate(Vec3::unit_y());
        let ez = self.rotate(Vec3::unit_z());
        [[ex.x, ey.x, ez.x], [ex.y, ey.y, ez.y], [ex.z, ey.z, ez.z]]
    }

    /// Rotation whose columns are the given orthonormal basis vectors.
    pub fn from_basis(ex: Vec3<T>, ey: Vec3<T>, ez: Vec3<T>) -> Self {
        let (m00, m01, m02) = (ex.x, ey.x, ez.x);
        let (m10, m11, m12) = (ex.y, ey.y, ez.y);
        let (m20, m21, m22) = (ex.z, ey.z, ez.z);
        let one = T::one();
        let quarter = T::lit(0.25);
        let trace = m00 + m11 + m22;
        let q = if trace > T::zero() {
            let s = (trace + one).sqrt() * T::lit(2.0);
            Self::from_wxyz(quarter * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
        } else if m00 > m11 && m00 > m22 {
            let s = (one + m00 - m11 - m22).sqrt() * T::lit(2.0);
            Self::from_wxyz((m21 - m12) / s, quarter * s, (m01 + m10) / s, (m02 + m20) / s)
        } else if m11 > m22 {
            let s = (one + m11 - m00 - m22).sqrt() * T::lit(2.0);
            Self::from_wxyz((m02 - m20) / s, (m01 + m10) / s, quarter * s, (m12 + m21) / s)
        } else {
            let s = (one + m22 - m00 - m11).sqrt() * T::lit(2.0);
            Self::from_wxyz((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, quarter * s)
        };
        q.canonical()
    }

    pub fn cast<U: Real>(self) -> Quat<U> {
        Quat::from_wxyz(
            U::lit(self.w.as_f64()),
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> Mul for Quat<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::from_wxyz(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub rotation: Quat<T>,
    pub position: Vec3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    /// Builds a pose with a canonicalized rotation.
    pub fn new(rotation: Quat<T>, position: Vec3<T>) -> Self {
        Self {
            rotation: rotation.canonical(),
            position,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Quat::identity(),
            position: Vec3::zero(),
        }
    }

    pub fn from_translation(p: Vec3<T>) -> Self {
        Self::new(Quat::identity(), p)
    }

    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.position
    }

    pub fn transform_vector(&self, v: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(v)
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self::new(r, -r.rotate(self.position))
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.transform_point(other.position),
        )
    }

    /// Seven numbers: position then quaternion `(w, x, y, z)`.
    pub fn encode(&self) -> [T; 7] {
        let q = self.rotation;
        let p = self.position;
        [p.x, p.y, p.z, q.w, q.x, q.y, q.z]
    }

    pub fn cast<U: Real>(self) -> Pose<U> {
        Pose::new(self.rotation.cast(), self.position.cast())
    }
}

/// Interpolates position linearly and rotation along the geodesic.
/// `alpha = 0` and `alpha = 1` return the endpoints exactly.
pub fn pose_interpolate<T: Real>(x0: &Pose<T>, x1: &Pose<T>, alpha: T) -> Pose<T> {
    if alpha <= T::zero() {
        return Pose::new(x0.rotation, x0.position);
    }
    if alpha >= T::one() {
        return Pose::new(x1.rotation, x1.position);
    }
    let position = x0.position + (x1.position - x0.position) * alpha;
    Pose::new(x0.rotation.slerp(x1.rotation, alpha), position)
}

/// World-frame pose delta `(dp, rotation vector)` taking `from` to `to`:
/// `to.position = from.position + dp`, `to.rotation = exp(dr) * from.rotation`.
pub fn pose_delta<T: Real>(from: &Pose<T>, to: &Pose<T>) -> [T; 6] {
    let dp = to.position - from.position;
    let dr = (to.rotation * from.rotation.inverse()).to_rotation_vector();
    [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolate_endpoints_are_exact() {
        let a = Pose::new(
            Quat::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), 0.7),
            Vec3::new(0.1, 0.2, 0.3),
        );
        let b = Pose::new(
            Quat::from_axis_angle(Vec3::new(1.0, 0.4, 0.0), -1.3),
            Vec3::new(-0.4, 0.0, 0.9),
        );
        assert_eq!(pose_interpolate(&a, &b, 0.0), a);
        assert_eq!(pose_interpolate(&a, &b, 1.0), b);
    }

    #[test]
    fn pure_translation_midpoint() {
        let a = Pose::<f64>::identity();
        let b = Pose::from_translation(Vec3::new(0.0, 0.0, 0.2));
        let m = pose_interpolate(&a, &b, 0.5);
        assert!((m.position - Vec3::new(0.0, 0.0, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn quarter_turn_halfway_is_eighth_turn() {
        let a = Pose::<f64>::identity();
        let b = Pose::new(
            Quat::from_axis_angle(Vec3::unit_z(), std::f64::consts::FRAC_PI_2),
            Vec3::zero(),
        );
        let m = pose_interpolate(&a, &b, 0.5);
        let rv = m.rotation.to_rotation_vector();
        assert!((rv.z - std::f64::consts::FRAC_PI_4).abs() < 1e-9);
        assert!(rv.x.abs() < 1e-12 && rv.y.abs() < 1e-12);
    }

    #[test]
    fn antipodal_sign_takes_short_arc() {
        let a = Quat::<f64>::from_axis_angle(Vec3::unit_x(), 0.2);
        let b = Quat::from_axis_angle(Vec3::unit_x(), 0.6);
        let neg_b = Quat::from_wxyz(-b.w, -b.x, -b.y, -b.z);
        let m = a.slerp(neg_b, 0.5);
        assert!((m.angle() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn delta_round_trip() {
        let a = Pose::<f64>::new(
            Quat::from_axis_angle(Vec3::new(0.0, 1.0, 1.0), 0.4),
            Vec3::new(0.1, 0.0, 0.0),
        );
        let b = Pose::new(
            Quat::from_axis_angle(Vec3::new(1.0, 0.0, 1.0), 0.5),
            Vec3::new(0.0, 0.3, 0.0),
        );
        let d = pose_delta(&a, &b);
        let r = Quat::from_rotation_vector(Vec3::new(d[3], d[4], d[5])) * a.rotation;
        assert!(r.canonical().dot(b.rotation).abs() > 1.0 - 1e-12);
    }

    #[test]
    fn basis_round_trip() {
        let q = Quat::from_axis_angle(Vec3::new(0.2, 0.5, -0.7), 2.5).canonical();
        let ex = q.rotate(Vec3::unit_x());
        let ey = q.rotate(Vec3::unit_y());
        let ez = q.rotate(Vec3::unit_z());
        let r = Quat::from_basis(ex, ey, ez);
        assert!(r.dot(q) > 1.0 - 1e-12);
    }
}
