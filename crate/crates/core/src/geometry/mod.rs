//! Superquadric geometry.
//!
//! The inside-outside function is
//!
//! ```text
//! F(x, y, z) = (|x/a1|^(2/e2) + |y/a2|^(2/e2))^(e2/e1) + |z/a3|^(2/e1) - 1
//! ```
//!
//! which is negative inside, zero on the surface and positive outside. `F + 1`
//! is homogeneous of degree `2/e1`, which gives an exact radial projection onto
//! the surface, and `(F + 1)^(e1/2)` is a nested lp norm, so `F` is convex along
//! every line for exponents in `(0, 2]`.

mod mesh;

pub use mesh::{export_mesh, write_obj, TriMesh};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Pose, Vec3};
use crate::scalar::{abs_pow, signed_pow, Real};

/// Smallest admissible shape exponent.
pub const EPS_MIN: f64 = 0.1;
/// Largest admissible shape exponent.
pub const EPS_MAX: f64 = 2.0;

/// Coarse marching step used by [`ray_intersect`] (meters).
pub const MARCH_STEP: f64 = 1e-3;
const BISECTION_ITERS: usize = 60;
const ROOT_TOL: f64 = 1e-8;
const DEGENERATE_GRADIENT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid superquadric: {0}")]
    InvalidShape(String),
    #[error("degenerate gradient at ({x}, {y}, {z})")]
    DegenerateGradient { x: f64, y: f64, z: f64 },
}

/// Superquadric `(a1, a2, a3, e1, e2)`: three half-extents and two shape exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superquadric<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub eps1: T,
    pub eps2: T,
}

impl<T: Real> Superquadric<T> {
    pub fn new(a1: T, a2: T, a3: T, eps1: T, eps2: T) -> Result<Self, GeometryError> {
        let s = Self {
            a1,
            a2,
            a3,
            eps1,
            eps2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sphere(r: T) -> Self {
        Self {
            a1: r,
            a2: r,
            a3: r,
            eps1: T::one(),
            eps2: T::one(),
        }
    }

    pub fn from_array(p: [T; 5]) -> Result<Self, GeometryError> {
        Self::new(p[0], p[1], p[2], p[3], p[4])
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.a1, self.a2, self.a3, self.eps1, self.eps2]
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, a) in [("a1", self.a1), ("a2", self.a2), ("a3", self.a3)] {
            if !(a > T::zero()) || !a.is_finite() {
                return Err(GeometryError::InvalidShape(format!(
                    "{name} must be positive, got {a:?}"
                )));
            }
        }
        let (lo, hi) = (T::lit(EPS_MIN), T::lit(EPS_MAX));
        for (name, e) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(e >= lo && e <= hi) {
                return Err(GeometryError::InvalidShape(format!(
                    "{name} must lie in [{EPS_MIN}, {EPS_MAX}], got {e:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn half_extents(&self) -> Vec3<T> {
        Vec3::new(self.a1, self.a2, self.a3)
    }

    /// Inside-outside function `F`.
    pub fn implicit_value(&self, p: Vec3<T>) -> T {
        self.inside_outside(p) - T::one()
    }

    /// `F + 1`, homogeneous of degree `2/e1`.
    fn inside_outside(&self, p: Vec3<T>) -> T {
        let two = T::lit(2.0);
        let p2 = two / self.eps2;
        let p1 = two / self.eps1;
        let u = abs_pow(p.x / self.a1, p2) + abs_pow(p.y / self.a2, p2);
        abs_pow(u, self.eps2 / self.eps1) + abs_pow(p.z / self.a3, p1)
    }

    /// Parametric surface point for latitude `eta` and longitude `omega`.
    pub fn surface_point(&self, eta: T, omega: T) -> Vec3<T> {
        let ce = snap(eta.cos());
        let se = snap(eta.sin());
        let cw = snap(omega.cos());
        let sw = snap(omega.sin());
        let c1 = signed_pow(ce, self.eps1);
        Vec3::new(
            self.a1 * c1 * signed_pow(cw, self.eps2),
            self.a2 * c1 * signed_pow(sw, self.eps2),
            self.a3 * signed_pow(se, self.eps1),
        )
    }

    /// Analytic gradient of `F`.
    pub fn gradient(&self, p: Vec3<T>) -> Vec3<T> {
        let two = T::lit(2.0);
        let p2 = two / self.eps2;
        let p1 = two / self.eps1;
        let (x, y, z) = (p.x / self.a1, p.y / self.a2, p.z / self.a3);
        let u = abs_pow(x, p2) + abs_pow(y, p2);
        let outer = if u > T::zero() {
            (two / self.eps1) * u.powf(self.eps2 / self.eps1 - T::one())
        } else {
            T::zero()
        };
        let gx = if x == T::zero() {
            T::zero()
        } else {
            outer * abs_pow(x, p2 - T::one()) * x.signum() / self.a1
        };
        let gy = if y == T::zero() {
            T::zero()
        } else {
            outer * abs_pow(y, p2 - T::one()) * y.signum() / self.a2
        };
        let gz = if z == T::zero() {
            T::zero()
        } else {
            p1 * abs_pow(z, p1 - T::one()) * z.signum() / self.a3
        };
        Vec3::new(gx, gy, gz)
    }

    /// Outward unit normal (normalized gradient). Singular gradients are
    /// retried at up to three slightly perturbed points.
    pub fn surface_normal(&self, p: Vec3<T>) -> Result<Vec3<T>, GeometryError> {
        let g = self.gradient(p);
        let n = g.norm();
        if n >= T::lit(DEGENERATE_GRADIENT) && n.is_finite() {
            return Ok(g * (T::one() / n));
        }
        let h = T::lit(1e-7);
        for d in PERTURBATIONS.iter().take(3) {
            let q = p + Vec3::new(T::lit(d[0]), T::lit(d[1]), T::lit(d[2])) * h;
            let g = self.gradient(q);
            let n = g.norm();
            if n >= T::lit(DEGENERATE_GRADIENT) && n.is_finite() {
                return Ok(g * (T::one() / n));
            }
        }
        Err(GeometryError::DegenerateGradient {
            x: p.x.as_f64(),
            y: p.y.as_f64(),
            z: p.z.as_f64(),
        })
    }

    /// Surface point on the ray from the centroid through `p`.
    pub fn radial_projection(&self, p: Vec3<T>) -> Vec3<T> {
        let g = self.inside_outside(p);
        if !(g > T::zero()) || !g.is_finite() {
            return Vec3::new(self.a1, T::zero(), T::zero());
        }
        p * g.powf(-self.eps1 / T::lit(2.0))
    }

    /// Approximate Euclidean closest surface point by alternating tangent-plane
    /// and radial projections.
    pub fn closest_point(&self, p: Vec3<T>) -> SurfaceProjection<T> {
        let mut foot = self.radial_projection(p);
        let mut normal = self.surface_normal(foot).unwrap_or_else(|_| foot.normalized());
        for _ in 0..8 {
            let q = p - normal * (p - foot).dot(normal);
            let next = self.radial_projection(q);
            let moved = (next - foot).norm();
            foot = next;
            if let Ok(n) = self.surface_normal(foot) {
                normal = n;
            }
            if moved < T::lit(1e-10) {
                break;
            }
        }
        let dist = (p - foot).norm();
        let signed_distance = if self.implicit_value(p) < T::zero() {
            -dist
        } else {
            dist
        };
        SurfaceProjection {
            foot,
            normal,
            signed_distance,
        }
    }

    /// Surface point maximizing `dir . x` (support mapping), via the gradient
    /// of the dual nested norm.
    pub fn support_point(&self, dir: Vec3<T>) -> Vec3<T> {
        let two = T::lit(2.0);
        let cap = T::lit(EPS_MAX - 1e-3);
        let q1 = two / (two - self.eps1.min(cap));
        let q2 = two / (two - self.eps2.min(cap));
        let v1 = self.a1 * dir.x;
        let v2 = self.a2 * dir.y;
        let v3 = self.a3 * dir.z;
        let r = lp_norm2(v1, v2, q2);
        let n = lp_norm2(r, v3, q1);
        if !(n > T::zero()) {
            return Vec3::zero();
        }
        let dn_dr = ratio_pow(r, n, q1 - T::one());
        let d3 = v3.signum() * ratio_pow(v3.abs(), n, q1 - T::one());
        let (d1, d2) = if r > T::zero() {
            (
                v1.signum() * ratio_pow(v1.abs(), r, q2 - T::one()),
                v2.signum() * ratio_pow(v2.abs(), r, q2 - T::one()),
            )
        } else {
            (T::zero(), T::zero())
        };
        let z = |v: T, d: T| if v == T::zero() { T::zero() } else { d };
        Vec3::new(
            self.a1 * dn_dr * z(v1, d1),
            self.a2 * dn_dr * z(v2, d2),
            self.a3 * z(v3, d3),
        )
    }

    /// Support value `max_x dir . x` over the surface.
    pub fn support_value(&self, dir: Vec3<T>) -> T {
        self.support_point(dir).dot(dir)
    }

    /// Enclosed volume from the closed form with beta functions.
    pub fn volume(&self) -> f64 {
        let (e1, e2) = (self.eps1.as_f64(), self.eps2.as_f64());
        let b1 = statrs::function::beta::beta(e1 / 2.0 + 1.0, e1);
        let b2 = statrs::function::beta::beta(e2 / 2.0, e2 / 2.0);
        2.0 * self.a1.as_f64() * self.a2.as_f64() * self.a3.as_f64() * e1 * e2 * b1 * b2
    }

    pub fn cast<U: Real>(&self) -> Superquadric<U> {
        Superquadric {
            a1: U::lit(self.a1.as_f64()),
            a2: U::lit(self.a2.as_f64()),
            a3: U::lit(self.a3.as_f64()),
            eps1: U::lit(self.eps1.as_f64()),
            eps2: U::lit(self.eps2.as_f64()),
        }
    }
}

/// Result of [`Superquadric::closest_point`].
#[derive(Debug, Clone, Copy)]
pub struct SurfaceProjection<T> {
    pub foot: Vec3<T>,
    pub normal: Vec3<T>,
    /// Positive outside, negative inside.
    pub signed_distance: T,
}

const PERTURBATIONS: [[f64; 3]; 3] = [
    [0.577_350_269, 0.577_350_269, 0.577_350_269],
    [-0.707_106_781, 0.0, 0.707_106_781],
    [0.267_261_242, -0.801_783_726, 0.534_522_484],
];

fn snap<T: Real>(v: T) -> T {
    if v.abs() < T::epsilon() * T::lit(8.0) {
        T::zero()
    } else {
        v
    }
}

/// `(|a|^q + |b|^q)^(1/q)` evaluated without overflow for large `q`.
fn lp_norm2<T: Real>(a: T, b: T, q: T) -> T {
    let m = a.abs().max(b.abs());
    if m == T::zero() {
        return T::zero();
    }
    m * (abs_pow(a / m, q) + abs_pow(b / m, q)).powf(T::one() / q)
}

/// `(num/den)^e` for `0 <= num <= den`.
fn ratio_pow<T: Real>(num: T, den: T, e: T) -> T {
    if num == T::zero() {
        if e == T::zero() {
            T::one()
        } else {
            T::zero()
        }
    } else {
        (num / den).min(T::one()).powf(e)
    }
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub direction: Vec3<T>,
}

impl<T: Real> Ray<T> {
    /// Normalizes `direction`.
    pub fn new(origin: Vec3<T>, direction: Vec3<T>) -> Self {
        Self {
            origin,
            direction: direction.normalized(),
        }
    }

    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction * t
    }
}

/// Parameter interval where a ray overlaps the box `[-h, h]`, clipped to `t >= 0`.
pub fn ray_box_interval<T: Real>(origin: Vec3<T>, dir: Vec3<T>, h: Vec3<T>) -> Option<(T, T)> {
    let mut t0 = T::zero();
    let mut t1 = T::infinity();
    for i in 0..3 {
        let (o, d, e) = (origin[i], dir[i], h[i]);
        if d.abs() < T::min_positive_value() {
            if o < -e || o > e {
                return None;
            }
        } else {
            let inv = T::one() / d;
            let mut ta = (-e - o) * inv;
            let mut tb = (e - o) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((t0, t1))
}

/// Smallest `t >= 0` where the ray meets the posed superquadric.
///
/// Marches the box interval with [`MARCH_STEP`] and refines the first sign
/// change by bisection. Because `F` is convex along the ray, a march that sees
/// `F` start increasing without a sign change has passed the only minimum; that
/// bracket is searched for a negative minimum so grazing hits thinner than one
/// step are not lost.
pub fn ray_intersect<T: Real>(ray: &Ray<T>, shape: &Superquadric<T>, pose: &Pose<T>) -> Option<T> {
    let inv = pose.inverse();
    let o = inv.transform_point(ray.origin);
    let d = inv.transform_vector(ray.direction);
    let (t_enter, t_exit) = ray_box_interval(o, d, shape.half_extents())?;
    let f = |t: T| shape.implicit_value(o + d * t);
    let step = T::lit(MARCH_STEP);

    let mut t_prev = t_enter;
    let mut f_prev = f(t_enter);
    // F >= 0 on the box boundary, so a non-positive value there is a touch point.
    if f_prev == T::zero() || (f_prev < T::zero() && t_enter > T::zero()) {
        return Some(t_enter);
    }
    let mut t_prev2 = t_enter;
    let mut f_prev2 = T::infinity();
    loop {
        let t = (t_prev + step).min(t_exit);
        let ft = f(t);
        if ft == T::zero() {
            return Some(t);
        }
        if (ft < T::zero()) != (f_prev < T::zero()) {
            return Some(bisect(&f, t_prev, f_prev, t));
        }
        if f_prev > T::zero() && ft > f_prev && f_prev <= f_prev2 {
            // Passed the minimum without crossing: probe the bracket.
            let (tm, fm) = golden_min(&f, t_prev2, t);
            if fm < T::zero() {
                return Some(bisect(&f, t_prev2, f(t_prev2), tm));
            }
            return None;
        }
        if t >= t_exit {
            if f_prev > T::zero() {
                let (tm, fm) = golden_min(&f, t_prev, t);
                if fm < T::zero() {
                    return Some(bisect(&f, t_prev, f_prev, tm));
                }
            }
            return None;
        }
        t_prev2 = t_prev;
        f_prev2 = f_prev;
        t_prev = t;
        f_prev = ft;
    }
}

fn bisect<T: Real>(f: &impl Fn(T) -> T, mut lo: T, f_lo: T, mut hi: T) -> T {
    let lo_neg = f_lo < T::zero();
    let mut best = (lo, f_lo.abs());
    for _ in 0..BISECTION_ITERS {
        let mid = (lo + hi) * T::lit(0.5);
        let fm = f(mid);
        if fm.abs() < best.1 {
            best = (mid, fm.abs());
        }
        if fm.abs() <= T::lit(ROOT_TOL) {
            return mid;
        }
        if (fm < T::zero()) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * hi.abs().max(T::one()) {
            break;
        }
    }
    best.0
}

fn golden_min<T: Real>(f: &impl Fn(T) -> T, mut a: T, mut b: T) -> (T, T) {
    let r = T::lit(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * r;
    let mut d = a + (b - a) * r;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if fc < T::zero() {
            return (c, fc);
        }
        if fd < T::zero() {
            return (d, fd);
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * r;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * r;
            fd = f(d);
        }
        if (b - a).abs() < T::lit(1e-12) {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit_sphere() -> Superquadric<f64> {
        Superquadric::sphere(1.0)
    }

    fn random_shape(rng: &mut impl Rng) -> Superquadric<f64> {
        Superquadric::new(
            rng.gen_range(0.02..0.05),
            rng.gen_range(0.02..0.05),
            rng.gen_range(0.05..0.10),
            rng.gen_range(EPS_MIN..=EPS_MAX),
            rng.gen_range(EPS_MIN..=EPS_MAX),
        )
        .unwrap()
    }

    #[test]
    fn implicit_value_examples() {
        let s = unit_sphere();
        assert_eq!(s.implicit_value(Vec3::zero()), -1.0);
        assert_eq!(s.implicit_value(Vec3::new(1.0, 0.0, 0.0)), 0.0);
        let c = Superquadric::<f64>::new(1.0, 1.0, 1.0, 0.2, 0.2).unwrap();
        assert!((c.implicit_value(Vec3::new(1.0, 1.0, 1.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Superquadric::new(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Superquadric::new(1.0, 1.0, 1.0, 0.05, 1.0).is_err());
        assert!(Superquadric::new(1.0, 1.0, 1.0, 1.0, 2.5).is_err());
        assert!(Superquadric::new(1.0, 1.0, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn surface_point_examples() {
        let s = Superquadric::new(0.03, 0.04, 0.08, 0.7, 1.4).unwrap();
        assert_eq!(s.surface_point(0.0, 0.0), Vec3::new(0.03, 0.0, 0.0));
        for w in [-PI, -1.0, 0.0, 2.0] {
            assert_eq!(s.surface_point(FRAC_PI_2, w), Vec3::new(0.0, 0.0, 0.08));
        }
        let p = s.surface_point(0.3, 1.1);
        assert!(s.implicit_value(p).abs() <= 1e-6);
    }

    #[test]
    fn symmetry_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = random_shape(&mut rng);
            let p = Vec3::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
            );
            let f = s.implicit_value(p);
            assert_eq!(f, s.implicit_value(Vec3::new(-p.x, p.y, p.z)));
            assert_eq!(f, s.implicit_value(Vec3::new(p.x, -p.y, p.z)));
            assert_eq!(f, s.implicit_value(Vec3::new(p.x, p.y, -p.z)));
        }
    }

    #[test]
    fn normal_examples() {
        let n = unit_sphere().surface_normal(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((n - Vec3::unit_x()).norm() < 1e-15);
        let s = Superquadric::new(0.03, 0.04, 0.08, 0.7, 1.4).unwrap();
        let n = s.surface_normal(Vec3::new(0.0, 0.0, 0.08)).unwrap();
        assert!((n - Vec3::unit_z()).norm() < 1e-15);
    }

    #[test]
    fn degenerate_normal_at_origin() {
        let err = unit_sphere().surface_normal(Vec3::zero());
        // The perturbed retries leave the origin, so the sphere recovers.
        assert!(err.is_ok());
        let flat = Superquadric::new(1.0, 1.0, 1.0, 0.1, 0.1).unwrap();
        assert!(matches!(
            flat.surface_normal(Vec3::zero()),
            Err(GeometryError::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn ray_examples() {
        let s = unit_sphere();
        let r = Ray::new(Vec3::new(2.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let t = ray_intersect(&r, &s, &Pose::identity()).unwrap();
        assert!((t - 1.0).abs() < 1e-6);
        let miss = Ray::new(Vec3::new(2.0, 3.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        assert!(ray_intersect(&miss, &s, &Pose::identity()).is_none());
    }

    #[test]
    fn ray_from_inside_finds_exit() {
        let s = unit_sphere();
        let r = Ray::new(Vec3::zero(), Vec3::new(0.0, 1.0, 0.0));
        let t = ray_intersect(&r, &s, &Pose::identity()).unwrap();
        assert!((t - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ray_respects_object_pose() {
        let s = Superquadric::new(0.03, 0.04, 0.08, 0.5, 1.5).unwrap();
        let pose = Pose::new(
            Quat::from_axis_angle(Vec3::unit_z(), FRAC_PI_2),
            Vec3::new(0.1, 0.0, 0.08),
        );
        // After a quarter turn the object's a2 axis lies along world x.
        let r = Ray::new(Vec3::new(0.5, 0.0, 0.08), Vec3::new(-1.0, 0.0, 0.0));
        let t = ray_intersect(&r, &s, &pose).unwrap();
        assert!((t - (0.4 - 0.04)).abs() < 1e-6);
    }

    #[test]
    fn closest_point_on_sphere() {
        let s = Superquadric::<f64>::sphere(0.03);
        let p = Vec3::new(0.01, 0.02, 0.025);
        let proj = s.closest_point(p);
        let expected = p.norm() - 0.03;
        assert!((proj.signed_distance - expected).abs() < 1e-12);
        assert!((proj.foot - p.normalized() * 0.03).norm() < 1e-12);
    }

    #[test]
    fn closest_point_on_box_face() {
        let s = Superquadric::<f64>::new(0.03, 0.04, 0.08, 0.1, 0.1).unwrap();
        let p = Vec3::new(0.035, 0.01, 0.02);
        let proj = s.closest_point(p);
        assert!((proj.signed_distance - 0.005).abs() < 2e-4);
        assert!(proj.normal.x > 0.99);
    }

    #[test]
    fn support_point_matches_dense_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = random_shape(&mut rng);
            let dir = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalized();
            let sp = s.support_point(dir);
            let mut best = f64::NEG_INFINITY;
            for i in 0..=200 {
                for j in 0..400 {
                    let eta = -FRAC_PI_2 + PI * i as f64 / 200.0;
                    let w = -PI + 2.0 * PI * j as f64 / 400.0;
                    best = best.max(s.surface_point(eta, w).dot(dir));
                }
            }
            // Dense grid underestimates the true support slightly.
            assert!(sp.dot(dir) >= best - 1e-9, "support {} < grid {}", sp.dot(dir), best);
            assert!(sp.dot(dir) - best < 2e-3 * s.a3);
            if s.eps1 < 1.95 && s.eps2 < 1.95 {
                assert!(s.implicit_value(sp).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn support_below_upright_object_is_bottom_pole() {
        let s = Superquadric::new(0.03, 0.04, 0.08, 0.1, 0.1).unwrap();
        assert_eq!(
            s.support_point(Vec3::new(0.0, 0.0, -1.0)),
            Vec3::new(0.0, 0.0, -0.08)
        );
    }

    #[test]
    fn volume_closed_form() {
        let s = Superquadric::sphere(1.0);
        assert!((s.volume() - 4.0 / 3.0 * PI).abs() < 1e-9);
        let oct = Superquadric::new(1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert!((oct.volume() - 4.0 / 3.0).abs() < 1e-9);
        let boxy = Superquadric::new(1.0, 1.0, 1.0, 0.1, 0.1).unwrap();
        assert!(boxy.volume() > 7.5 && boxy.volume() < 8.0);
    }

    #[test]
    fn volume_matches_grid_count() {
        // midpoint cell count over one octant, inside test written out directly
        let n = 160;
        for (a1, a2, a3, e1, e2) in [(0.03, 0.05, 0.08, 0.4, 1.3), (0.02, 0.04, 0.06, 1.7, 0.2)] {
            let s = Superquadric::new(a1, a2, a3, e1, e2).unwrap();
            let mut inside = 0usize;
            for i in 0..n {
                let x = (i as f64 + 0.5) / n as f64;
                for j in 0..n {
                    let y = (j as f64 + 0.5) / n as f64;
                    let xy = (x.powf(2.0 / e2) + y.powf(2.0 / e2)).powf(e2 / e1);
                    for k in 0..n {
                        let z = (k as f64 + 0.5) / n as f64;
                        if xy + z.powf(2.0 / e1) <= 1.0 {
                            inside += 1;
                        }
                    }
                }
            }
            let grid = 8.0 * a1 * a2 * a3 * inside as f64 / (n * n * n) as f64;
            let rel = (s.volume() - grid).abs() / grid;
            assert!(rel < 5e-3, "{rel}");
        }
    }

    #[test]
    fn single_precision_shape_works() {
        let s = Superquadric::<f32>::new(0.03, 0.04, 0.08, 0.7, 1.4).unwrap();
        let p = s.surface_point(0.3, 1.1);
        assert!(s.implicit_value(p).abs() < 1e-4);
        let r = Ray::new(Vec3::new(0.2f32, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let t = ray_intersect(&r, &s, &Pose::identity()).unwrap();
        assert!((t - 0.17).abs() < 1e-5);
    }
}
