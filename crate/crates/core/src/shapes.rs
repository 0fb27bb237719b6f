//! Procedural meshes used by the examples, the tests and the benchmarks.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{Point3, TriMesh};

fn normalize(p: Point3) -> Point3 {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

fn icosahedron() -> (Vec<Point3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let v = vec![
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
    let f = vec![
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
    (v, f)
}

/// One step of 1→4 midpoint subdivision. Existing vertices keep their
/// indices; edge midpoints are appended.
fn midpoint_split(v: &mut Vec<Point3>, f: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut get = |a: usize, b: usize, v: &mut Vec<Point3>| -> usize {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let (p, q) = (v[a], v[b]);
            v.push([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]);
            v.len() - 1
        })
    };
    let mut out = Vec::with_capacity(f.len() * 4);
    for &[a, b, c] in f {
        let ab = get(a, b, v);
        let bc = get(b, c, v);
        let ca = get(c, a, v);
        out.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    out
}

/// Unit icosphere; level 3 has 642 vertices.
pub fn icosphere(level: usize) -> TriMesh {
    let (mut v, mut f) = icosahedron();
    v.iter_mut().for_each(|p| *p = normalize(*p));
    for _ in 0..level {
        f = midpoint_split(&mut v, &f);
        v.iter_mut().for_each(|p| *p = normalize(*p));
    }
    TriMesh::new(v, f).expect("icosphere is valid")
}

/// Subdivided icosahedron whose faces stay flat, so every triangle has the
/// same area.
pub fn flat_icosahedron(level: usize) -> TriMesh {
    let (mut v, mut f) = icosahedron();
    for _ in 0..level {
        f = midpoint_split(&mut v, &f);
    }
    TriMesh::new(v, f).expect("icosahedron is valid")
}

/// `1→4` midpoint subdivision of any mesh. Original vertex indices are
/// preserved, new vertices are appended.
pub fn subdivide(mesh: &TriMesh) -> TriMesh {
    let mut v = mesh.vertices().to_vec();
    let f = midpoint_split(&mut v, mesh.triangles());
    TriMesh::new(v, f).expect("subdivision of a valid mesh is valid")
}

/// Planar `nx × ny` vertex grid spanning `[0, width] × [0, height]`.
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> TriMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut v = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            v.push([
                width * i as f64 / (nx - 1) as f64,
                height * j as f64 / (ny - 1) as f64,
                0.0,
            ]);
        }
    }
    let mut f = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let (b, c, d) = (a + 1, a + nx + 1, a + nx);
            // alternate the diagonal to avoid a preferred direction
            if (i + j) % 2 == 0 {
                f.push([a, b, c]);
                f.push([a, c, d]);
            } else {
                f.push([a, b, d]);
                f.push([b, c, d]);
            }
        }
    }
    TriMesh::new(v, f).expect("grid is valid")
}

/// Torus of revolution with `nu` segments around the main axis and `nv`
/// around the tube.
pub fn torus(nu: usize, nv: usize, major: f64, minor: f64) -> TriMesh {
    let mut v = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let w = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * w.cos();
            v.push([r * u.cos(), r * u.sin(), minor * w.sin()]);
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut f = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            f.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            f.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriMesh::new(v, f).expect("torus is valid")
}

/// Closed, elongated surface of revolution along the x axis with an
/// asymmetric radius profile and azimuthal bumps, so it has no exact
/// symmetries. `n_around` vertices per ring, `n_rings` rings plus two poles.
pub fn capsule(n_around: usize, n_rings: usize, length: f64) -> TriMesh {
    assert!(n_around >= 3 && n_rings >= 2);
    let mut v = Vec::with_capacity(n_around * n_rings + 2);
    v.push([-length / 2.0, 0.0, 0.0]);
    for r in 0..n_rings {
        let t = (r + 1) as f64 / (n_rings + 1) as f64;
        let x = length * (t - 0.5);
        let profile = 0.22 * (PI * t).sin().sqrt() * (1.0 + 0.35 * t + 0.2 * (3.0 * PI * t).sin());
        // stagger alternate rings so triangles stay well shaped
        let shift = if r % 2 == 0 { 0.0 } else { 0.5 };
        for a in 0..n_around {
            let th = 2.0 * PI * (a as f64 + shift) / n_around as f64;
            let bump = 1.0 + 0.12 * th.cos() + 0.06 * (2.0 * th + 3.0 * t).sin();
            let rad = profile * bump;
            v.push([x, rad * th.cos(), rad * th.sin()]);
        }
    }
    v.push([length / 2.0, 0.0, 0.0]);
    let last = v.len() - 1;
    let ring = |r: usize, a: usize| 1 + r * n_around + (a % n_around);
    let mut f = Vec::new();
    for a in 0..n_around {
        f.push([0, ring(0, a + 1), ring(0, a)]);
    }
    for r in 0..n_rings - 1 {
        for a in 0..n_around {
            if r % 2 == 0 {
                f.push([ring(r, a), ring(r, a + 1), ring(r + 1, a)]);
                f.push([ring(r, a + 1), ring(r + 1, a + 1), ring(r + 1, a)]);
            } else {
                f.push([ring(r, a), ring(r, a + 1), ring(r + 1, a + 1)]);
                f.push([ring(r, a), ring(r + 1, a + 1), ring(r + 1, a)]);
            }
        }
    }
    for a in 0..n_around {
        f.push([last, ring(n_rings - 1, a), ring(n_rings - 1, a + 1)]);
    }
    TriMesh::new(v, f).expect("capsule is valid")
}

/// Bends a shape lying along the x axis onto a circular arc of radius
/// `bend_radius` in the xy plane. Lengths along the axis are preserved, so
/// thin shapes deform almost isometrically.
pub fn bend(mesh: &TriMesh, bend_radius: f64) -> TriMesh {
    mesh.map_positions(|p| {
        let phi = p[0] / bend_radius;
        let r = bend_radius - p[1];
        [r * phi.sin(), bend_radius - r * phi.cos(), p[2]]
    })
    .expect("bending keeps the connectivity valid")
}

/// The straight and bent versions of [`capsule`]; vertex `i` of one
/// corresponds to vertex `i` of the other.
pub fn bent_cylinder_pair(n_around: usize, n_rings: usize) -> (TriMesh, TriMesh) {
    let straight = capsule(n_around, n_rings, 2.0);
    let bent = bend(&straight, 1.1);
    (straight, bent)
}

/// Disjoint union; vertices of `b` follow those of `a`, translated by `offset`.
pub fn disjoint_union(a: &TriMesh, b: &TriMesh, offset: Point3) -> TriMesh {
    let n = a.n_vertices();
    let mut v = a.vertices().to_vec();
    v.extend(
        b.vertices()
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]]),
    );
    let mut f = a.triangles().to_vec();
    f.extend(b.triangles().iter().map(|t| t.map(|i| i + n)));
    TriMesh::new(v, f).expect("union of valid meshes is valid")
}
