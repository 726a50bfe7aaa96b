//! n-cube grid index.
//!
//! The bounding box is cut into `Y + 1` equal-width intervals per dimension
//! (`Y = k * y`), giving `M = (Y + 1)^dims` cubes. Points are hashed to cubes
//! in a single pass and only occupied cubes are stored. Construction refuses
//! configurations whose cube count overflows or exceeds a cap, which is what
//! happens for almost any `y` once the dimensionality grows.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Bounds, Dataset};
use crate::error::{Error, Result};
use crate::kdtree::select_median;

/// Largest cube count a grid may have unless the caller raises the cap.
pub const DEFAULT_CUBE_CAP: u64 = 1 << 24;

/// `base^exponent`, with the value when it fits in a `u64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeCount {
    pub base: u64,
    pub exponent: u32,
    pub value: Option<u64>,
}

impl CubeCount {
    pub fn new(base: u64, exponent: u32) -> Self {
        Self {
            base,
            exponent,
            value: base.checked_pow(exponent),
        }
    }
}

impl fmt::Display for CubeCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some(v) if self.exponent <= 1 => write!(f, "{v}"),
            Some(v) => write!(f, "{}^{}={v}", self.base, self.exponent),
            None => write!(f, "{}^{}", self.base, self.exponent),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub splits_y: u64,
    pub multiplier_k: u64,
    pub dims: usize,
}

impl GridConfig {
    pub fn new(splits_y: u64, multiplier_k: u64, dims: usize) -> Result<Self> {
        if splits_y == 0 || multiplier_k == 0 || dims == 0 {
            return Err(Error::invalid("y, k and dims must all be positive"));
        }
        Ok(Self {
            splits_y,
            multiplier_k,
            dims,
        })
    }

    pub fn effective_y(&self) -> u64 {
        self.splits_y * self.multiplier_k
    }

    pub fn cubes_per_dim(&self) -> u64 {
        self.effective_y() + 1
    }

    pub fn cube_count(&self) -> CubeCount {
        let exponent = u32::try_from(self.dims).unwrap_or(u32::MAX);
        CubeCount::new(self.cubes_per_dim(), exponent)
    }

    /// `M` if it is representable and within `cap`, otherwise a refusal
    /// carrying the offending count.
    pub fn total_cubes(&self, cap: u64) -> Result<u64> {
        let count = self.cube_count();
        match count.value {
            Some(m) if m <= cap => Ok(m),
            _ => Err(Error::GridRefused { cubes: count, cap }),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cube {
    /// Dataset rows hashed to this cube, in row order.
    pub members: Vec<usize>,
    pub total_points: usize,
}

#[derive(Clone, Debug)]
pub struct GridIndex<'a> {
    ds: &'a Dataset,
    config: GridConfig,
    bounds: Vec<Bounds>,
    widths: Vec<f64>,
    cubes_per_dim: u64,
    total_cubes: u64,
    occupancy: BTreeMap<u64, Cube>,
    passes: u32,
}

/// Hashes every point of `ds` into its cube in one pass.
pub fn build_grid<'a>(ds: &'a Dataset, config: GridConfig, cap: u64) -> Result<GridIndex<'a>> {
    if ds.is_empty() {
        return Err(Error::Empty);
    }
    if config.dims != ds.dims() {
        return Err(Error::DimensionMismatch {
            expected: ds.dims(),
            found: config.dims,
        });
    }
    let total_cubes = config.total_cubes(cap)?;
    let cubes_per_dim = config.cubes_per_dim();
    let bounds = ds.bounds().to_vec();
    let widths = bounds.iter().map(|b| b.width() / cubes_per_dim as f64).collect();
    let mut grid = GridIndex {
        ds,
        config,
        bounds,
        widths,
        cubes_per_dim,
        total_cubes,
        occupancy: BTreeMap::new(),
        passes: 0,
    };
    grid.passes += 1;
    for (row, coords) in ds.rows().enumerate() {
        let idx = grid.locate(coords)?;
        let cube = grid.occupancy.entry(idx).or_default();
        cube.members.push(row);
        cube.total_points += 1;
    }
    Ok(grid)
}

/// Row-major flattening: `sum_j cells[j] * cubes_per_dim^j`.
pub fn flatten(cells: &[u64], cubes_per_dim: u64) -> u64 {
    cells.iter().rev().fold(0, |acc, &c| acc * cubes_per_dim + c)
}

pub fn unflatten(mut index: u64, cubes_per_dim: u64, dims: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(dims);
    for _ in 0..dims {
        out.push(index % cubes_per_dim);
        index /= cubes_per_dim;
    }
    out
}

/// Flattened index of the cube containing `p`.
pub fn locate_cube(p: &[f64], grid: &GridIndex<'_>) -> Result<u64> {
    if p.len() != grid.config.dims {
        return Err(Error::DimensionMismatch {
            expected: grid.config.dims,
            found: p.len(),
        });
    }
    grid.locate(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub value: f64,
    /// Cell index along the queried dimension where the walk stopped.
    pub slab: u64,
    pub slab_population: usize,
    /// Points in slabs strictly before the stopping slab.
    pub points_before: usize,
    pub max_slab_population: usize,
}

/// Approximate median along `dim`: walks slabs in ascending order until the
/// running count reaches `ceil(P / 2)`, then returns the lower median of the
/// points in the stopping slab.
pub fn grid_find_median(grid: &GridIndex<'_>, dim: usize) -> Result<f64> {
    grid_median_estimate(grid, dim).map(|e| e.value)
}

pub fn grid_median_estimate(grid: &GridIndex<'_>, dim: usize) -> Result<MedianEstimate> {
    if dim >= grid.config.dims {
        return Err(Error::DimensionMismatch {
            expected: grid.config.dims,
            found: dim + 1,
        });
    }
    let total = grid.point_count();
    if total == 0 {
        return Err(Error::Empty);
    }
    let slabs = grid.slab_counts(dim);
    let max_slab_population = slabs.values().copied().max().unwrap_or(0);
    let target = total.div_ceil(2);
    let mut running = 0;
    for (&slab, &count) in &slabs {
        if running + count >= target {
            let values: Vec<f64> = grid
                .occupancy
                .iter()
                .filter(|(&idx, _)| grid.slab_of(idx, dim) == slab)
                .flat_map(|(_, cube)| cube.members.iter().map(|&r| grid.ds.row(r)[dim]))
                .collect();
            return Ok(MedianEstimate {
                value: select_median(&values)?,
                slab,
                slab_population: count,
                points_before: running,
                max_slab_population,
            });
        }
        running += count;
    }
    unreachable!("slab counts sum to the point count")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOccupancy {
    #[serde(rename = "M")]
    pub total_cubes: u64,
    pub occupied: u64,
    pub empty: u64,
    pub occupied_fraction: f64,
    pub max_load: usize,
    pub mean_nonzero_load: f64,
}

pub fn grid_stats(grid: &GridIndex<'_>) -> GridOccupancy {
    let occupied = grid.occupancy.len() as u64;
    let points = grid.point_count();
    GridOccupancy {
        total_cubes: grid.total_cubes,
        occupied,
        empty: grid.total_cubes - occupied,
        occupied_fraction: occupied as f64 / grid.total_cubes as f64,
        max_load: grid.occupancy.values().map(|c| c.total_points).max().unwrap_or(0),
        mean_nonzero_load: if occupied == 0 {
            0.0
        } else {
            points as f64 / occupied as f64
        },
    }
}

impl<'a> GridIndex<'a> {
    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn cubes_per_dim(&self) -> u64 {
        self.cubes_per_dim
    }

    pub fn total_cubes(&self) -> u64 {
        self.total_cubes
    }

    pub fn occupied_cubes(&self) -> usize {
        self.occupancy.len()
    }

    pub fn cube(&self, index: u64) -> Option<&Cube> {
        self.occupancy.get(&index)
    }

    pub fn occupancy(&self) -> impl Iterator<Item = (u64, &Cube)> {
        self.occupancy.iter().map(|(&i, c)| (i, c))
    }

    pub fn point_count(&self) -> usize {
        self.occupancy.values().map(|c| c.total_points).sum()
    }

    /// Full passes over the point data made while building.
    pub fn passes(&self) -> u32 {
        self.passes
    }

    /// Coordinate range covered by one cube.
    pub fn cube_bounds(&self, index: u64) -> Vec<Bounds> {
        unflatten(index, self.cubes_per_dim, self.config.dims)
            .into_iter()
            .zip(self.bounds.iter().zip(&self.widths))
            .map(|(c, (b, &w))| {
                let last = c + 1 == self.cubes_per_dim;
                Bounds {
                    min: b.min + c as f64 * w,
                    max: if last { b.max } else { b.min + (c + 1) as f64 * w },
                }
            })
            .collect()
    }

    /// Cell index along every dimension.
    pub fn cell_of(&self, p: &[f64]) -> Result<Vec<u64>> {
        p.iter()
            .enumerate()
            .map(|(j, &x)| self.cell_along(j, x))
            .collect()
    }

    fn cell_along(&self, dim: usize, x: f64) -> Result<u64> {
        let b = self.bounds[dim];
        if !b.contains(x) {
            return Err(Error::OutOfBounds { dim });
        }
        let w = self.widths[dim];
        if w <= 0.0 {
            return Ok(0);
        }
        let c = ((x - b.min) / w).floor() as u64;
        Ok(c.min(self.cubes_per_dim - 1))
    }

    fn locate(&self, p: &[f64]) -> Result<u64> {
        let mut idx = 0u64;
        let mut stride = 1u64;
        for (j, &x) in p.iter().enumerate() {
            idx += self.cell_along(j, x)? * stride;
            stride = stride.wrapping_mul(self.cubes_per_dim);
        }
        Ok(idx)
    }

    fn slab_of(&self, index: u64, dim: usize) -> u64 {
        (index / self.cubes_per_dim.pow(dim as u32)) % self.cubes_per_dim
    }

    /// Point count per occupied slab along `dim`, ascending.
    pub fn slab_counts(&self, dim: usize) -> BTreeMap<u64, usize> {
        let mut slabs = BTreeMap::new();
        for (&idx, cube) in &self.occupancy {
            *slabs.entry(self.slab_of(idx, dim)).or_insert(0) += cube.total_points;
        }
        slabs
    }
}
