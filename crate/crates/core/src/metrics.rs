use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// The output every partitioner produces: one label per dataset row plus the
/// rows flagged as affected (close to a partition boundary).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    partition_count: usize,
    point_ids: Vec<u64>,
    labels: Vec<usize>,
    affected: Vec<bool>,
}

impl PartitionAssignment {
    pub fn new(partition_count: usize, point_ids: Vec<u64>, labels: Vec<usize>, affected: Vec<bool>) -> Result<Self> {
        if partition_count == 0 {
            return Err(Error::invalid("partition count must be positive"));
        }
        if labels.len() != point_ids.len() || affected.len() != point_ids.len() {
            return Err(Error::invalid("ids, labels and affected flags differ in length"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= partition_count) {
            return Err(Error::invalid(format!("label {bad} out of range for {partition_count} partitions")));
        }
        Ok(Self {
            partition_count,
            point_ids,
            labels,
            affected,
        })
    }

    pub fn partition_count(&self) -> usize {
        self.partition_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point_ids(&self) -> &[u64] {
        &self.point_ids
    }

    /// Labels indexed by dataset row.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn affected_flags(&self) -> &[bool] {
        &self.affected
    }

    pub fn affected_ids(&self) -> Vec<u64> {
        self.point_ids
            .iter()
            .zip(&self.affected)
            .filter(|(_, &a)| a)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn affected_count(&self) -> usize {
        self.affected.iter().filter(|&&a| a).count()
    }

    pub fn label_of(&self, id: u64) -> Option<usize> {
        self.point_ids.iter().position(|&p| p == id).map(|i| self.labels[i])
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.partition_count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Row indices grouped by partition.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.partition_count];
        for (row, &l) in self.labels.iter().enumerate() {
            out[l].push(row);
        }
        out
    }

    /// Checks that the assignment covers exactly the dataset's points.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.point_ids != ds.ids() {
            return Err(Error::invalid("assignment ids do not match the dataset"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub sizes: Vec<usize>,
    /// Largest partition relative to the ideal size `N / m`.
    pub bias: f64,
    /// Coefficient of variation of the partition sizes.
    pub size_cv: f64,
    pub affected_count: usize,
    pub wall_time: f64,
}

pub fn compute_metrics(assignment: &PartitionAssignment, elapsed: f64) -> PartitionMetrics {
    metrics_from_sizes(assignment.sizes(), assignment.affected_count(), elapsed)
}

pub fn metrics_from_sizes(sizes: Vec<usize>, affected_count: usize, elapsed: f64) -> PartitionMetrics {
    let m = sizes.len() as f64;
    let total: usize = sizes.iter().sum();
    let (bias, size_cv) = if total == 0 || sizes.len() <= 1 {
        (1.0, 0.0)
    } else {
        let n = total as f64;
        let max = *sizes.iter().max().unwrap() as f64;
        let mean = n / m;
        let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / m;
        (max * m / n, var.sqrt() / mean)
    };
    PartitionMetrics {
        sizes,
        bias,
        size_cv,
        affected_count,
        wall_time: elapsed,
    }
}

/// Smallest attainable bias for `n` points in `m` partitions: `ceil(n/m)·m/n`.
pub fn bias_floor(n: usize, m: usize) -> f64 {
    n.div_ceil(m) as f64 * m as f64 / n as f64
}

/// Work counters recorded while partitioning.
///
/// A *full scan* reads every coordinate of each point in a subset (variance
/// passes, distance passes). A *median pass* reads a single coordinate per
/// point (selection and the split itself).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanCounters {
    pub full_scans: u64,
    pub full_point_touches: u64,
    pub median_passes: u64,
    pub median_point_touches: u64,
}

impl ScanCounters {
    pub(crate) fn full_scan(&mut self, points: usize) {
        self.full_scans += 1;
        self.full_point_touches += points as u64;
    }

    pub(crate) fn median_pass(&mut self, points: usize) {
        self.median_passes += 1;
        self.median_point_touches += points as u64;
    }

    /// All point visits, regardless of pass type.
    pub fn point_touches(&self) -> u64 {
        self.full_point_touches + self.median_point_touches
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bias_of(sizes: &[usize]) -> f64 {
        metrics_from_sizes(sizes.to_vec(), 0, 0.0).bias
    }

    #[test]
    fn bias_examples() {
        assert_eq!(bias_of(&[25, 25, 25, 25]), 1.0);
        assert_eq!(bias_of(&[100, 0]), 2.0);
        assert_eq!(bias_of(&[50, 30, 20]), 1.5);
        assert_eq!(bias_of(&[7]), 1.0);
    }

    #[test]
    fn cv_of_equal_sizes_is_zero() {
        assert_eq!(metrics_from_sizes(vec![5, 5], 0, 0.0).size_cv, 0.0);
        let cv = metrics_from_sizes(vec![100, 0], 0, 0.0).size_cv;
        assert!((cv - 1.0).abs() < 1e-15);
    }

    #[test]
    fn floor_with_remainder() {
        assert_eq!(bias_floor(100, 4), 1.0);
        assert!((bias_floor(10, 3) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn assignment_checks_labels() {
        assert!(PartitionAssignment::new(2, vec![0, 1], vec![0, 2], vec![false; 2]).is_err());
        assert!(PartitionAssignment::new(0, vec![], vec![], vec![]).is_err());
        let a = PartitionAssignment::new(3, vec![5, 6, 7], vec![2, 0, 2], vec![false, true, false]).unwrap();
        assert_eq!(a.sizes(), vec![1, 0, 2]);
        assert_eq!(a.affected_ids(), vec![6]);
        assert_eq!(a.label_of(7), Some(2));
        let m = compute_metrics(&a, 0.5);
        assert_eq!(m.affected_count, 1);
        assert_eq!(m.wall_time, 0.5);
        assert_eq!(m.bias, 2.0);
    }
}
