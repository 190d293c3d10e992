//! Shared inputs for the benchmark targets.

use tda_core::pointcloud::DensitySpec;
use tda_core::{sample_binomial, sample_torus, PointCloud};

pub fn cube_cloud(n: usize, seed: u64) -> PointCloud {
    sample_binomial(n, &DensitySpec::uniform(2), 2, seed).expect("valid sampler arguments")
}

pub fn torus_cloud(n: usize, seed: u64) -> PointCloud {
    sample_torus(n, 1.9, 1.0, seed).expect("valid torus radii")
}
