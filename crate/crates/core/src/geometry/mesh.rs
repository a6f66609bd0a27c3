use std::io::{self, Write};

use crate::math::Vec3;
use crate::scalar::Real;

use super::Superquadric;

/// Triangle mesh with per-vertex normals.
///
/// Vertices are laid out on an `(n_eta + 1) x n_omega` latitude/longitude
/// grid, row `i` at `eta = -pi/2 + pi * i / n_eta` and column `j` at
/// `omega = -pi + 2 pi * j / n_omega`. The pole rows hold `n_omega` coincident
/// copies of the pole; triangles that would collapse onto a pole are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub normals: Vec<Vec3<T>>,
    /// Zero-based vertex indices, counter-clockwise seen from outside.
    pub faces: Vec<[usize; 3]>,
    pub n_eta: usize,
    pub n_omega: usize,
}

/// Triangulates the parametric surface. Resolutions below 4 are raised to 4.
pub fn export_mesh<T: Real>(shape: &Superquadric<T>, n_eta: usize, n_omega: usize) -> TriMesh<T> {
    let n_eta = n_eta.max(4);
    let n_omega = n_omega.max(4);
    let pi = T::PI();
    let mut vertices = Vec::with_capacity((n_eta + 1) * n_omega);
    let mut normals = Vec::with_capacity(vertices.capacity());
    for i in 0..=n_eta {
        let eta = if i == n_eta {
            pi * T::lit(0.5)
        } else {
            -pi * T::lit(0.5) + pi * T::lit(i as f64 / n_eta as f64)
        };
        for j in 0..n_omega {
            let omega = -pi + T::lit(2.0) * pi * T::lit(j as f64 / n_omega as f64);
            let p = shape.surface_point(eta, omega);
            let n = if i == 0 {
                -Vec3::unit_z()
            } else if i == n_eta {
                Vec3::unit_z()
            } else {
                shape.surface_normal(p).unwrap_or_else(|_| p.normalized())
            };
            vertices.push(p);
            normals.push(n);
        }
    }
    let idx = |i: usize, j: usize| i * n_omega + (j % n_omega);
    let mut faces = Vec::with_capacity(2 * n_eta * n_omega);
    for i in 0..n_eta {
        for j in 0..n_omega {
            let (v00, v01) = (idx(i, j), idx(i, j + 1));
            let (v10, v11) = (idx(i + 1, j), idx(i + 1, j + 1));
            if i != 0 {
                faces.push([v00, v01, v11]);
            }
            if i + 1 != n_eta {
                faces.push([v00, v11, v10]);
            }
        }
    }
    TriMesh {
        vertices,
        normals,
        faces,
        n_eta,
        n_omega,
    }
}

/// Writes ASCII Wavefront OBJ with `v`, `vn` and 1-indexed `f v//vn` records.
pub fn write_obj<T: Real, W: Write>(mesh: &TriMesh<T>, mut out: W) -> io::Result<()> {
    writeln!(out, "# superquadric mesh {}x{}", mesh.n_eta, mesh.n_omega)?;
    for v in &mesh.vertices {
        writeln!(out, "v {:.9} {:.9} {:.9}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64())?;
    }
    for n in &mesh.normals {
        writeln!(out, "vn {:.9} {:.9} {:.9}", n.x.as_f64(), n.y.as_f64(), n.z.as_f64())?;
    }
    for f in &mesh.faces {
        let (a, b, c) = (f[0] + 1, f[1] + 1, f[2] + 1);
        writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn sphere_vertices_on_unit_sphere() {
        let m = export_mesh(&Superquadric::<f64>::sphere(1.0), 16, 32);
        assert_eq!(m.vertices.len(), 17 * 32);
        for v in &m.vertices {
            assert!((v.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn vertices_lie_on_surface() {
        for eps2 in [0.1, 0.5, 1.0, 1.5, 2.0] {
            let s = Superquadric::<f64>::new(0.03, 0.04, 0.08, 0.3, eps2).unwrap();
            let m = export_mesh(&s, 12, 24);
            assert_eq!(m.vertices.len(), 13 * 24);
            for v in &m.vertices {
                assert!(s.implicit_value(*v).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn mesh_is_watertight_and_outward() {
        let s = Superquadric::<f64>::new(0.03, 0.04, 0.08, 0.6, 1.3).unwrap();
        let m = export_mesh(&s, 10, 20);
        // Weld coincident pole copies, then every edge must border two faces.
        let weld = |v: usize| {
            if v < m.n_omega {
                0
            } else if v >= m.n_eta * m.n_omega {
                m.n_eta * m.n_omega
            } else {
                v
            }
        };
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &m.faces {
            let w = [weld(f[0]), weld(f[1]), weld(f[2])];
            assert!(w[0] != w[1] && w[1] != w[2] && w[0] != w[2]);
            for k in 0..3 {
                let (a, b) = (w[k], w[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
            let (p0, p1, p2) = (m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
            let n = (p1 - p0).cross(p2 - p0);
            let c = (p0 + p1 + p2) * (1.0 / 3.0);
            assert!(n.dot(c) > 0.0, "inward-facing triangle");
        }
        assert!(edges.values().all(|&c| c == 2));
    }

    #[test]
    fn obj_record_counts() {
        let m = export_mesh(&Superquadric::<f64>::sphere(1.0), 4, 8);
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let count = |p: &str| text.lines().filter(|l| l.starts_with(p)).count();
        assert_eq!(count("v "), 40);
        assert_eq!(count("vn "), 40);
        assert_eq!(count("f "), m.faces.len());
        assert!(!text.contains("f 0/"));
    }
}
