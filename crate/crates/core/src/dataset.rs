use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An owned point: an id plus its coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub id: u64,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(id: u64, coords: Vec<f64>) -> Self {
        Self { id, coords }
    }

    pub fn dims(&self) -> usize {
        self.coords.len()
    }
}

/// Closed coordinate range of one dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

/// An in-memory collection of `dims`-dimensional points, stored row-major.
///
/// Coordinates are validated finite on construction and ids are unique.
/// Per-dimension bounds and the id lookup table are computed on first use.
#[derive(Clone, Debug)]
pub struct Dataset {
    dims: usize,
    ids: Vec<u64>,
    coords: Vec<f64>,
    bounds: OnceLock<Vec<Bounds>>,
    index: OnceLock<HashMap<u64, usize>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.ids == other.ids && self.coords == other.coords
    }
}

impl Dataset {
    /// Builds a dataset whose ids are the row indices.
    pub fn new(dims: usize, coords: Vec<f64>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::invalid("dimensionality must be positive"));
        }
        if !coords.len().is_multiple_of(dims) {
            return Err(Error::invalid(format!(
                "{} coordinates do not form rows of width {dims}",
                coords.len()
            )));
        }
        let ids = (0..(coords.len() / dims) as u64).collect();
        Self::with_ids(dims, ids, coords)
    }

    pub fn with_ids(dims: usize, ids: Vec<u64>, coords: Vec<f64>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::invalid("dimensionality must be positive"));
        }
        if coords.len() != ids.len() * dims {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dims,
                found: coords.len(),
            });
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                point: pos / dims,
                dim: pos % dims,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, &id) in ids.iter().enumerate() {
            if index.insert(id, row).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        let ds = Self {
            dims,
            ids,
            coords,
            bounds: OnceLock::new(),
            index: OnceLock::new(),
        };
        let _ = ds.index.set(index);
        Ok(ds)
    }

    pub fn from_points(dims: usize, points: Vec<Point>) -> Result<Self> {
        let mut ids = Vec::with_capacity(points.len());
        let mut coords = Vec::with_capacity(points.len() * dims);
        for p in points {
            if p.coords.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: p.coords.len(),
                });
            }
            ids.push(p.id);
            coords.extend_from_slice(&p.coords);
        }
        Self::with_ids(dims, ids, coords)
    }

    /// Convenience constructor from nested rows; ids are row indices.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let points = rows
            .iter()
            .enumerate()
            .map(|(i, r)| Point::new(i as u64, r.as_ref().to_vec()))
            .collect();
        Self::from_points(dims, points)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Row-major coordinate buffer.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dims..(i + 1) * self.dims]
    }

    #[inline]
    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(self.ids[i], self.row(i).to_vec())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dims)
    }

    /// Row index of the point with the given id.
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.index
            .get_or_init(|| self.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect())
            .get(&id)
            .copied()
    }

    /// Per-dimension (min, max). Empty datasets report an empty slice.
    pub fn bounds(&self) -> &[Bounds] {
        self.bounds.get_or_init(|| {
            if self.is_empty() {
                return Vec::new();
            }
            let mut b = vec![
                Bounds {
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                };
                self.dims
            ];
            for row in self.rows() {
                for (bj, &v) in b.iter_mut().zip(row) {
                    bj.min = bj.min.min(v);
                    bj.max = bj.max.max(v);
                }
            }
            b
        })
    }

    /// Row indices `0..len`.
    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Euclidean distance between two coordinate slices.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(distance(a, b))
}

/// Unchecked distance used on hot paths where both slices come from the
/// same dataset.
#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    squared_distance(a, b).sqrt()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize the loop;
    // the summation order is fixed, so results are reproducible.
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            let d = ca[k] - cb[k];
            acc[k] += d * d;
        }
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in tail_a.iter().zip(tail_b) {
        let d = x - y;
        sum += d * d;
    }
    sum
}

/// Population variance of every coordinate over the whole dataset.
pub fn variance_per_dimension(ds: &Dataset) -> Result<Vec<f64>> {
    variance_of_rows(ds, &ds.all_rows())
}

/// Population variance of every coordinate over a subset of rows
/// (two passes: mean, then squared deviations).
pub fn variance_of_rows(ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    let dims = ds.dims();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dims];
    for &r in rows {
        for (m, &v) in mean.iter_mut().zip(ds.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dims];
    for &r in rows {
        for ((acc, &v), &m) in var.iter_mut().zip(ds.row(r)).zip(&mean) {
            let d = v - m;
            *acc += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    Ok(var)
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
