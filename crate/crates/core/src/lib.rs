//! Partitioning of high-dimensional point sets for parallel density-based
//! clustering.
//!
//! Three partitioners are provided over a shared [`Dataset`] type:
//!
//! * [`kd_partition`]: the median-split kd-tree baseline.
//! * [`build_grid`]: an n-cube grid index that refuses configurations whose
//!   cube count cannot be materialized.
//! * [`build_vtree`]: the Voronoi tree, which splits each partition by
//!   nearest-center assignment to seeds chosen by one of several
//!   [`SeedKind`] strategies.
//!
//! Per-point loops run on rayon when the `parallel` feature is enabled
//! (the default); reductions are performed in a fixed order so results do
//! not depend on the [`Execution`] mode.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod generate;
pub mod grid;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod render;
pub mod seeding;
pub mod vtree;

pub use dataset::{euclidean_distance, variance_of_rows, variance_per_dimension, Bounds, Dataset, Point};
pub use error::{Error, Result};
pub use exec::{worker_threads, Execution};
pub use generate::{generate_gaussian_mixture, generate_uniform, rng_from_seed, Rng};
pub use grid::{
    build_grid, flatten, grid_find_median, grid_median_estimate, grid_stats, locate_cube, unflatten, CubeCount,
    GridConfig, GridIndex, GridOccupancy, MedianEstimate, DEFAULT_CUBE_CAP,
};
pub use io::{load_dataset, save_dataset, CsvOptions, DatasetFormat};
pub use kdtree::{kd_partition, select_median, KdPartitionTree};
pub use metrics::{bias_floor, compute_metrics, PartitionAssignment, PartitionMetrics, ScanCounters};
pub use render::{render_2d, render_svg};
pub use seeding::{choose_seeds, SeedKind, SeedSet, SeedStrategy};
pub use vtree::{
    affected_partitions, assign_to_centers, build_vtree, build_vtree_with, merge_order, route_point, MergeOrder,
    VChild, VTree, VTreeConfig,
};
