//! Triangle meshes, file loading and the cotangent Laplacian.

mod io;
mod laplacian;

pub use io::{load_mesh, parse_mesh, write_off, MeshFormat};
pub use laplacian::{assemble_laplacian, LaplacianPair};

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn distance(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

pub(crate) fn triangle_area(a: Point3, b: Point3, c: Point3) -> f64 {
    0.5 * norm(cross(sub(b, a), sub(c, a)))
}

/// Stable mapping between the compact vertex numbering used internally and
/// the numbering of the source file. Unreferenced (isolated) file vertices
/// have no compact index.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexRemap {
    file_vertex_count: usize,
    to_file: Vec<usize>,
    to_compact: Vec<Option<usize>>,
}

impl VertexRemap {
    fn identity(n: usize) -> Self {
        VertexRemap {
            file_vertex_count: n,
            to_file: (0..n).collect(),
            to_compact: (0..n).map(Some).collect(),
        }
    }

    pub fn file_vertex_count(&self) -> usize {
        self.file_vertex_count
    }

    pub fn to_file(&self, compact: usize) -> usize {
        self.to_file[compact]
    }

    pub fn to_compact(&self, file: usize) -> Option<usize> {
        self.to_compact.get(file).copied().flatten()
    }

    /// File indices of vertices that no triangle references.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.file_vertex_count)
            .filter(|&i| self.to_compact[i].is_none())
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.to_file.len() == self.file_vertex_count
    }
}

/// A validated, edge-manifold triangle mesh with its lumped vertex areas.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    per_vertex_area: Vec<f64>,
    total_area: f64,
    remap: VertexRemap,
}

impl TriMesh {
    /// Validates the connectivity and computes barycentric vertex areas.
    ///
    /// Vertices not referenced by any triangle are dropped from the compact
    /// index space; [`TriMesh::remap`] keeps the original numbering.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n_file = vertices.len();
        if triangles.is_empty() {
            return Err(Error::Topology("mesh has no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n_file {
                    return Err(Error::Topology(format!(
                        "triangle {t} references vertex {v} but the mesh has {n_file} vertices"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {t} repeats a vertex: {tri:?}")));
            }
        }
        for (i, p) in vertices.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::Topology(format!("vertex {i} has non-finite coordinates")));
            }
        }

        let mut edge_use: HashMap<(usize, usize), u32> = HashMap::with_capacity(triangles.len() * 2);
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let count = edge_use.entry(key).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(Error::Topology(format!(
                        "non-manifold edge ({}, {}) shared by more than two triangles",
                        key.0, key.1
                    )));
                }
            }
        }

        let mut referenced = vec![false; n_file];
        for tri in &triangles {
            for &v in tri {
                referenced[v] = true;
            }
        }
        let (vertices, triangles, remap) = if referenced.iter().all(|&r| r) {
            (vertices, triangles, VertexRemap::identity(n_file))
        } else {
            let mut to_compact = vec![None; n_file];
            let mut to_file = Vec::new();
            for (i, &r) in referenced.iter().enumerate() {
                if r {
                    to_compact[i] = Some(to_file.len());
                    to_file.push(i);
                }
            }
            log::warn!(
                "{} isolated vertices excluded from the mesh",
                n_file - to_file.len()
            );
            let verts = to_file.iter().map(|&i| vertices[i]).collect();
            let tris = triangles
                .iter()
                .map(|t| t.map(|v| to_compact[v].expect("referenced")))
                .collect();
            (
                verts,
                tris,
                VertexRemap {
                    file_vertex_count: n_file,
                    to_file,
                    to_compact,
                },
            )
        };

        let per_vertex_area = vertex_areas(&vertices, &triangles);
        if let Some(i) = per_vertex_area.iter().position(|&a| !(a > 0.0)) {
            return Err(Error::Topology(format!("vertex {i} has zero incident area")));
        }
        let total_area = pairwise_sum(&per_vertex_area);
        Ok(TriMesh {
            vertices,
            triangles,
            per_vertex_area,
            total_area,
            remap,
        })
    }

    /// Same connectivity, new vertex positions.
    pub fn with_positions(&self, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Dimension(format!(
                "expected {} positions, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        let mut out = TriMesh::new(vertices, self.triangles.clone())?;
        out.remap = self.remap.clone();
        Ok(out)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point3 {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn per_vertex_area(&self) -> &[f64] {
        &self.per_vertex_area
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn remap(&self) -> &VertexRemap {
        &self.remap
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| triangle_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]))
            .collect()
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |k| {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Uniformly rescales the mesh so that its total area is one.
    pub fn normalize_area(&self) -> TriMesh {
        let scale = 1.0 / self.total_area.sqrt();
        self.scaled(scale)
    }

    /// Uniform scaling about the origin; areas scale by `factor²`.
    pub fn scaled(&self, factor: f64) -> TriMesh {
        let vertices: Vec<Point3> = self
            .vertices
            .iter()
            .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
            .collect();
        let per_vertex_area = vertex_areas(&vertices, &self.triangles);
        let total_area = pairwise_sum(&per_vertex_area);
        TriMesh {
            vertices,
            triangles: self.triangles.clone(),
            per_vertex_area,
            total_area,
            remap: self.remap.clone(),
        }
    }

    /// Applies an arbitrary affine-free transform to every vertex.
    pub fn map_positions(&self, f: impl Fn(Point3) -> Point3) -> Result<TriMesh> {
        self.with_positions(self.vertices.iter().map(|&p| f(p)).collect())
    }
}

fn vertex_areas(vertices: &[Point3], triangles: &[[usize; 3]]) -> Vec<f64> {
    let mut area = vec![0.0; vertices.len()];
    for t in triangles {
        let a = triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) / 3.0;
        for &v in t {
            area[v] += a;
        }
    }
    area
}

/// Pairwise (cascade) summation; deterministic and accurate for long vectors.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
