//! Map quality: geodesic accuracy, area coverage and smoothness.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmap::PointwiseMap;
use crate::mesh::{pairwise_sum, LaplacianPair, TriMesh};
use crate::sampling::MeshGraph;

/// Number of thresholds in the cumulative error curve.
pub const CURVE_POINTS: usize = 100;

#[derive(Clone, Debug)]
pub struct Accuracy {
    pub mean: f64,
    /// `(source vertex, geodesic error)` in evaluation order.
    pub per_vertex: Vec<(usize, f64)>,
    /// `(threshold, fraction of errors ≤ threshold)`.
    pub curve: Vec<(f64, f64)>,
}

/// Mean geodesic distance on `M` between predicted and ground-truth images.
///
/// `gt[i]` may be `None` for vertices without ground truth; evaluating such a
/// vertex is an error. `subset` restricts the evaluation to listed sources.
pub fn accuracy(
    map: &PointwiseMap,
    gt: &[Option<usize>],
    graph_m: &MeshGraph,
    subset: Option<&[usize]>,
) -> Result<Accuracy> {
    if gt.len() != map.len() {
        return Err(Error::Dimension(format!(
            "map has {} entries, ground truth {}",
            map.len(),
            gt.len()
        )));
    }
    let all: Vec<usize>;
    let eval = match subset {
        Some(s) => s,
        None => {
            all = (0..map.len()).collect();
            &all
        }
    };
    // group sources by ground-truth image, one Dijkstra per image
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &x in eval {
        if x >= map.len() {
            return Err(Error::IndexRange {
                what: "evaluation subset".into(),
                index: x,
                limit: map.len(),
            });
        }
        let target = gt[x].ok_or(Error::MissingGt { vertex: x })?;
        if target >= graph_m.n_vertices() {
            return Err(Error::IndexRange {
                what: "ground truth".into(),
                index: target,
                limit: graph_m.n_vertices(),
            });
        }
        groups.entry(target).or_default().push(x);
    }
    let groups: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
    let found: Vec<Vec<(usize, f64)>> = groups
        .par_iter()
        .map(|(target, sources)| {
            let d = graph_m.distances_from(*target);
            sources.iter().map(|&x| (x, d[map.get(x)])).collect()
        })
        .collect();
    let mut err = vec![f64::NAN; map.len()];
    for (x, e) in found.into_iter().flatten() {
        err[x] = e;
    }
    let per_vertex: Vec<(usize, f64)> = eval.iter().map(|&x| (x, err[x])).collect();
    let values: Vec<f64> = per_vertex.iter().map(|&(_, e)| e).collect();
    let mean = if values.is_empty() {
        0.0
    } else {
        pairwise_sum(&values) / values.len() as f64
    };
    Ok(Accuracy {
        mean,
        curve: error_curve(&values),
        per_vertex,
    })
}

/// Cumulative fraction of errors below `CURVE_POINTS` evenly spaced
/// thresholds from 0 to the largest error.
pub fn error_curve(errors: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let top = sorted.last().copied().unwrap_or(0.0);
    let n = sorted.len().max(1) as f64;
    (0..CURVE_POINTS)
        .map(|i| {
            let t = top * i as f64 / (CURVE_POINTS - 1) as f64;
            let below = sorted.partition_point(|&e| e <= t);
            (t, below as f64 / n)
        })
        .collect()
}

/// Area of the distinct image vertices over the total area of `M`.
pub fn coverage(map: &PointwiseMap, mesh_m: &TriMesh) -> f64 {
    let mut hit = vec![false; mesh_m.n_vertices()];
    for &t in map.as_slice() {
        hit[t] = true;
    }
    let areas: Vec<f64> = mesh_m
        .per_vertex_area()
        .iter()
        .zip(&hit)
        .map(|(&a, &h)| if h { a } else { 0.0 })
        .collect();
    pairwise_sum(&areas) / mesh_m.total_area()
}

/// Dirichlet energy on `N` of the coordinates of `M` pulled back through
/// the map: `Σ_c (g_c ∘ T)ᵀ W_N (g_c ∘ T)`.
pub fn smoothness(map: &PointwiseMap, lap_n: &LaplacianPair, mesh_m: &TriMesh) -> f64 {
    (0..3)
        .map(|c| {
            let g: Vec<f64> = map.as_slice().iter().map(|&t| mesh_m.vertex(t)[c]).collect();
            lap_n.dirichlet_energy(&g)
        })
        .sum()
}

/// `‖C̄ − Ĉ‖_F`
pub fn estimation_delta(c_bar: &DMatrix<f64>, c_hat: &DMatrix<f64>) -> Result<f64> {
    if c_bar.shape() != c_hat.shape() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?} functional maps",
            c_bar.shape(),
            c_hat.shape()
        )));
    }
    Ok((c_bar - c_hat).norm())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    /// Raw units; multiply by 10³ for the usual reporting convention.
    pub mean_geodesic_error: f64,
    pub evaluated_vertices: usize,
    pub coverage_ratio: f64,
    pub dirichlet_energy: f64,
    pub distinct_image_count: usize,
    pub per_vertex_errors: Vec<f64>,
}

impl EvalReport {
    pub fn compute(
        map: &PointwiseMap,
        gt: &[Option<usize>],
        mesh_n: &TriMesh,
        lap_n: &LaplacianPair,
        mesh_m: &TriMesh,
        graph_m: &MeshGraph,
        subset: Option<&[usize]>,
    ) -> Result<(Self, Vec<(f64, f64)>)> {
        if map.len() != mesh_n.n_vertices() || map.target_len() != mesh_m.n_vertices() {
            return Err(Error::Dimension("map does not match the meshes".into()));
        }
        let acc = accuracy(map, gt, graph_m, subset)?;
        let report = EvalReport {
            mean_geodesic_error: acc.mean,
            evaluated_vertices: acc.per_vertex.len(),
            coverage_ratio: coverage(map, mesh_m),
            dirichlet_energy: smoothness(map, lap_n, mesh_m),
            distinct_image_count: map.distinct_images(),
            per_vertex_errors: acc.per_vertex.iter().map(|&(_, e)| e).collect(),
        };
        Ok((report, acc.curve))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))
    }
}

pub fn curve_to_text(curve: &[(f64, f64)]) -> String {
    curve.iter().map(|(t, f)| format!("{t:e} {f}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::assemble_laplacian;
    use crate::shapes;

    fn some(map: &PointwiseMap) -> Vec<Option<usize>> {
        map.as_slice().iter().copied().map(Some).collect()
    }

    #[test]
    fn perfect_map_scores_zero() {
        let mesh = shapes::icosphere(2);
        let g = MeshGraph::new(&mesh);
        let id = PointwiseMap::identity(mesh.n_vertices());
        let acc = accuracy(&id, &some(&id), &g, None).unwrap();
        assert_eq!(acc.mean, 0.0);
        assert!(acc.curve.iter().all(|&(t, f)| t == 0.0 && f == 1.0));
        assert_eq!(coverage(&id, &mesh), 1.0);
    }

    #[test]
    fn constant_map_error_is_mean_distance() {
        let mesh = shapes::grid(6, 5, 1.0, 0.8);
        let g = MeshGraph::new(&mesh);
        let n = mesh.n_vertices();
        let constant = PointwiseMap::new(vec![7; n], n).unwrap();
        let gt = some(&PointwiseMap::identity(n));
        let acc = accuracy(&constant, &gt, &g, None).unwrap();
        let d = g.distances_from(7);
        let expected = d.iter().sum::<f64>() / n as f64;
        assert!((acc.mean - expected).abs() < 1e-12);
        assert!((coverage(&constant, &mesh) - mesh.per_vertex_area()[7] / mesh.total_area()).abs() < 1e-15);
        let lap = assemble_laplacian(&mesh).unwrap();
        assert!(smoothness(&constant, &lap, &mesh).abs() < 1e-12);
    }

    #[test]
    fn subset_and_missing_ground_truth() {
        let mesh = shapes::icosphere(1);
        let g = MeshGraph::new(&mesh);
        let n = mesh.n_vertices();
        let id = PointwiseMap::identity(n);
        let mut gt = vec![None; n];
        gt[3] = Some(3);
        gt[5] = Some(5);
        let acc = accuracy(&id, &gt, &g, Some(&[3, 5])).unwrap();
        assert_eq!(acc.per_vertex.len(), 2);
        assert_eq!(acc.mean, 0.0);
        assert!(matches!(accuracy(&id, &gt, &g, None), Err(Error::MissingGt { vertex: 0 })));
    }

    #[test]
    fn smoothness_of_identity_and_rotation() {
        let mesh = shapes::capsule(12, 10, 2.0);
        let lap = assemble_laplacian(&mesh).unwrap();
        let id = PointwiseMap::identity(mesh.n_vertices());
        let e = smoothness(&id, &lap, &mesh);
        // Σ_c x_cᵀ W x_c is twice the surface area for a closed mesh
        assert!((e - 2.0 * mesh.total_area()).abs() < 1e-8 * e);
        let rotated = mesh
            .map_positions(|p| {
                let (c, s) = (1.1f64.cos(), 1.1f64.sin());
                [c * p[0] + s * p[2], p[1], -s * p[0] + c * p[2]]
            })
            .unwrap();
        assert!((smoothness(&id, &lap, &rotated) - e).abs() < 1e-8);
    }

    #[test]
    fn delta_checks_shape() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let b = DMatrix::from_element(2, 2, 0.5);
        assert_eq!(estimation_delta(&a, &a).unwrap(), 0.0);
        assert!((estimation_delta(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!(estimation_delta(&a, &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn report_json_roundtrip() {
        let r = EvalReport {
            mean_geodesic_error: 0.0123,
            evaluated_vertices: 3,
            coverage_ratio: 0.5,
            dirichlet_energy: 2.5,
            distinct_image_count: 2,
            per_vertex_errors: vec![0.0, 0.01, 0.0269],
        };
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
