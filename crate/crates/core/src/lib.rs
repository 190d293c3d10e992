//! Persistence diagrams of Rips and Cech filtrations on sampled point
//! processes, diagram metrics, weighted linear representations, and a
//! configuration-driven experiment harness with independent test oracles.

pub mod error;
pub mod experiments;
pub mod filtration;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod persistence;
pub mod pointcloud;
pub mod representations;
pub mod rng;

pub use error::{Error, Result};
pub use filtration::{build_cech, build_rips, min_enclosing_ball, FilteredComplex, FiltrationKind};
pub use persistence::{
    compute_persistence, count_negative_simplexes, count_tail, persistent_betti,
    total_persistence, truncated_persistence, DiagramMeasure, DiagramPoint, PersistenceDiagram,
};
pub use pointcloud::{
    hausdorff_distance, rescale, sample_binomial, sample_poisson, sample_torus, DensitySpec,
    PointCloud,
};
