//! Procedural triangle meshes without symmetries, used as synthesis input.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{Point3, PointCloud};

/// Names accepted by [`procedural`].
pub const PROCEDURAL_MESHES: [&str; 3] = ["bumpy-sphere", "boulder", "wavy-torus"];

pub fn procedural(name: &str) -> Option<PointCloud> {
    match name {
        "bumpy-sphere" => Some(bumpy_sphere(4)),
        "boulder" => Some(boulder(4)),
        "wavy-torus" => Some(wavy_torus(96, 32)),
        _ => None,
    }
}

/// Regular icosahedron with vertices on the unit sphere.
pub fn icosahedron() -> PointCloud {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let points = raw.iter().map(|p| Point3::from(Vector3::new(p[0], p[1], p[2]).normalize())).collect();
    let faces = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    PointCloud::with_faces("icosahedron", points, faces)
}

/// Icosahedron subdivided `level` times and projected onto the unit sphere.
pub fn icosphere(level: usize) -> PointCloud {
    let base = icosahedron();
    let mut points = base.points;
    let mut faces = base.faces.unwrap_or_default();
    for _ in 0..level {
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, points: &mut Vec<Point3>| {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = (points[a].coords + points[b].coords).normalize();
                points.push(Point3::from(m));
                points.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut points);
            let bc = mid(b, c, &mut points);
            let ca = mid(c, a, &mut points);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    PointCloud::with_faces("icosphere", points, faces)
}

fn bump(d: &Vector3<f64>, center: [f64; 3], amplitude: f64, width: f64) -> f64 {
    let c = Vector3::new(center[0], center[1], center[2]).normalize();
    let angle = d.dot(&c).clamp(-1.0, 1.0).acos();
    amplitude * (-(angle * angle) / (2.0 * width * width)).exp()
}

fn displaced(level: usize, id: &str, radius: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> PointCloud {
    let mut mesh = icosphere(level);
    for p in &mut mesh.points {
        *p = Point3::from(radius(&p.coords));
    }
    mesh.id = id.into();
    mesh
}

/// Sphere with a few lobes of different size and a low-frequency ripple.
pub fn bumpy_sphere(level: usize) -> PointCloud {
    displaced(level, "bumpy-sphere", |d| {
        let r = 1.0
            + 0.08 * (3.0 * d.x + 0.5).sin() * (2.0 * d.y).cos()
            + bump(d, [0.8, 0.2, 0.56], 0.45, 0.3)
            + bump(d, [-0.3, 0.9, 0.3], 0.3, 0.25)
            + bump(d, [0.1, -0.6, 0.8], 0.35, 0.35)
            + bump(d, [-0.7, -0.4, -0.5], 0.25, 0.3);
        d * r
    })
}

/// Flattened ellipsoid with ridges and two knobs.
pub fn boulder(level: usize) -> PointCloud {
    displaced(level, "boulder", |d| {
        let r = 1.0 + 0.12 * (5.0 * d.x).sin() * (4.0 * d.y + 1.0).sin() + bump(d, [0.2, 0.3, 0.9], 0.4, 0.3) + bump(d, [-0.8, 0.1, 0.4], 0.3, 0.25);
        Vector3::new(1.5 * d.x, 1.0 * d.y, 0.75 * d.z) * r
    })
}

/// Torus whose tube thickness varies around the ring and whose centre line
/// rises and falls.
pub fn wavy_torus(ring: usize, tube: usize) -> PointCloud {
    let mut points = Vec::with_capacity(ring * tube);
    for i in 0..ring {
        let u = 2.0 * PI * i as f64 / ring as f64;
        let r = 0.3 + 0.1 * (2.0 * u).sin() + 0.05 * (3.0 * u + 1.0).cos();
        let lift = 0.35 * u.sin() + 0.15 * (2.0 * u).cos();
        for j in 0..tube {
            let v = 2.0 * PI * j as f64 / tube as f64;
            let w = 1.0 + r * v.cos();
            points.push(Point3::new(w * u.cos(), w * u.sin(), lift + 0.8 * r * v.sin()));
        }
    }
    let mut faces = Vec::with_capacity(2 * ring * tube);
    for i in 0..ring {
        for j in 0..tube {
            let a = i * tube + j;
            let b = ((i + 1) % ring) * tube + j;
            let c = ((i + 1) % ring) * tube + (j + 1) % tube;
            let d = i * tube + (j + 1) % tube;
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    PointCloud::with_faces("wavy-torus", points, faces)
}
