//! Scalable functional-map shape correspondence.

mod binio;
pub mod bounds;
pub mod error;
pub mod fmap;
pub mod knn;
pub mod linalg;
pub mod local_basis;
pub mod mesh;
pub mod pipeline;
pub mod metrics;
pub mod sampling;
pub mod shapes;
pub mod spectral;
pub mod zoomout;
pub mod sparse;

pub use error::{Error, Result};
pub use local_basis::{ChiProfile, LocalBasis};
pub use mesh::{LaplacianPair, TriMesh};
pub use sampling::{GeodesicRecord, MeshGraph, SampleSet};
