//! Baseline partitioner: recursive median splits along the dimension of
//! highest variance.
//!
//! Each split recomputes the per-dimension variance of the points at that
//! node (two full scans), selects the lower median of the chosen coordinate
//! and divides the points so the two sides differ by at most one. Points
//! whose coordinate equals the median are sent left in id order until the
//! left side holds `ceil(count / 2)` points.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{argmax, variance_of_rows, Dataset};
use crate::error::{Error, Result};
use crate::generate::rng_from_seed;
use crate::metrics::{PartitionAssignment, ScanCounters};

/// Lower median: the element of rank `(len - 1) / 2` in sorted order.
pub fn select_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let mut work = values.to_vec();
    let k = (work.len() - 1) / 2;
    Ok(select_nth(&mut work, k))
}

/// Randomized quickselect with a three-way partition, so runs of equal
/// values cannot degrade it. The pivot stream is seeded from the input
/// length, making the call deterministic.
pub fn select_nth(values: &mut [f64], k: usize) -> f64 {
    assert!(k < values.len(), "rank {k} out of range for {} values", values.len());
    let mut rng = rng_from_seed(values.len() as u64);
    let (mut lo, mut hi) = (0, values.len());
    loop {
        if hi - lo == 1 {
            return values[lo];
        }
        let pivot = values[rng.gen_range(lo..hi)];
        let (lt, gt) = partition3(&mut values[lo..hi], pivot);
        if k < lo + lt {
            hi = lo + lt;
        } else if k < lo + gt {
            return pivot;
        } else {
            lo += gt;
        }
    }
}

/// Dutch-flag partition around `pivot`; returns the bounds of the equal run.
fn partition3(v: &mut [f64], pivot: f64) -> (usize, usize) {
    let (mut lt, mut i, mut gt) = (0, 0, v.len());
    while i < gt {
        if v[i] < pivot {
            v.swap(lt, i);
            lt += 1;
            i += 1;
        } else if v[i] > pivot {
            gt -= 1;
            v.swap(i, gt);
        } else {
            i += 1;
        }
    }
    (lt, gt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KdNodeKind {
    Leaf {
        partition: usize,
    },
    Split {
        split_dim: usize,
        split_value: f64,
        /// Arena indices of the children.
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdNode {
    pub depth: usize,
    pub point_count: usize,
    pub kind: KdNodeKind,
}

#[derive(Clone, Debug)]
pub struct KdPartitionTree {
    nodes: Vec<KdNode>,
    leaf_count: usize,
    eps: f64,
    assignment: PartitionAssignment,
    counters: ScanCounters,
}

struct PendingLeaf {
    node: usize,
    rows: Vec<usize>,
}

/// Splits `ds` into `m` partitions. The leaf holding the most points is
/// split next (ties: lowest partition id), so `m` need not be a power of two.
/// Points within `eps` of a split hyperplane on their path are affected.
pub fn kd_partition(ds: &Dataset, m: usize, eps: f64) -> Result<KdPartitionTree> {
    if m == 0 {
        return Err(Error::invalid("partition count must be positive"));
    }
    if m > ds.len() {
        return Err(Error::TooManyPartitions {
            requested: m,
            points: ds.len(),
        });
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::invalid(format!("eps must be non-negative, got {eps}")));
    }

    let mut counters = ScanCounters::default();
    let mut affected = vec![false; ds.len()];
    let mut nodes = vec![KdNode {
        depth: 0,
        point_count: ds.len(),
        kind: KdNodeKind::Leaf { partition: 0 },
    }];
    let mut leaves = vec![PendingLeaf {
        node: 0,
        rows: ds.all_rows(),
    }];
    let mut queue = BinaryHeap::from([(ds.len(), Reverse(0usize))]);

    while leaves.len() < m {
        let (_, Reverse(pid)) = queue.pop().expect("a splittable leaf exists while leaves < m <= N");
        let rows = std::mem::take(&mut leaves[pid].rows);
        let parent = leaves[pid].node;
        let depth = nodes[parent].depth;

        let variance = variance_of_rows(ds, &rows)?;
        counters.full_scan(rows.len());
        counters.full_scan(rows.len());
        let dim = argmax(&variance);

        let values: Vec<f64> = rows.iter().map(|&r| ds.row(r)[dim]).collect();
        let split_value = select_median(&values)?;
        counters.median_pass(rows.len());

        let (left_rows, right_rows) = split_at_median(ds, &rows, &values, split_value);
        counters.median_pass(rows.len());
        for (&r, &v) in rows.iter().zip(&values) {
            if (v - split_value).abs() <= eps {
                affected[r] = true;
            }
        }

        let right_pid = leaves.len();
        let left = nodes.len();
        let right = left + 1;
        nodes.push(KdNode {
            depth: depth + 1,
            point_count: left_rows.len(),
            kind: KdNodeKind::Leaf { partition: pid },
        });
        nodes.push(KdNode {
            depth: depth + 1,
            point_count: right_rows.len(),
            kind: KdNodeKind::Leaf { partition: right_pid },
        });
        nodes[parent].kind = KdNodeKind::Split {
            split_dim: dim,
            split_value,
            left,
            right,
        };
        queue.push((left_rows.len(), Reverse(pid)));
        queue.push((right_rows.len(), Reverse(right_pid)));
        leaves[pid] = PendingLeaf {
            node: left,
            rows: left_rows,
        };
        leaves.push(PendingLeaf {
            node: right,
            rows: right_rows,
        });
    }

    let mut labels = vec![0; ds.len()];
    for (pid, leaf) in leaves.iter().enumerate() {
        for &r in &leaf.rows {
            labels[r] = pid;
        }
    }
    let assignment = PartitionAssignment::new(m, ds.ids().to_vec(), labels, affected)?;
    Ok(KdPartitionTree {
        nodes,
        leaf_count: m,
        eps,
        assignment,
        counters,
    })
}

/// Divides `rows` into the points left and right of the median. Values
/// equal to the median fill the left side in id order up to `ceil(n / 2)`.
fn split_at_median(ds: &Dataset, rows: &[usize], values: &[f64], median: f64) -> (Vec<usize>, Vec<usize>) {
    let left_target = rows.len().div_ceil(2);
    let mut left = Vec::with_capacity(left_target);
    let mut right = Vec::with_capacity(rows.len() - left_target);
    let mut equal = Vec::new();
    for (&r, &v) in rows.iter().zip(values) {
        if v < median {
            left.push(r);
        } else if v > median {
            right.push(r);
        } else {
            equal.push(r);
        }
    }
    equal.sort_unstable_by_key(|&r| ds.id(r));
    let take = left_target - left.len();
    left.extend_from_slice(&equal[..take]);
    right.extend_from_slice(&equal[take..]);
    (left, right)
}

/// Nested form of a kd-tree node used for JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdNodeJson {
    pub point_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub partition: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split_value: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub children: Vec<KdNodeJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdTreeJson {
    pub scheme: String,
    pub leaf_count: usize,
    pub eps: f64,
    pub counters: ScanCounters,
    pub root: KdNodeJson,
}

impl KdPartitionTree {
    pub fn root(&self) -> &KdNode {
        &self.nodes[0]
    }

    pub fn node(&self, idx: usize) -> &KdNode {
        &self.nodes[idx]
    }

    /// Arena of nodes; index 0 is the root.
    pub fn nodes(&self) -> &[KdNode] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn assignment(&self) -> &PartitionAssignment {
        &self.assignment
    }

    pub fn into_assignment(self) -> PartitionAssignment {
        self.assignment
    }

    pub fn counters(&self) -> &ScanCounters {
        &self.counters
    }

    /// Partition ids of the leaves under `idx`.
    pub fn partitions_under(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![idx];
        while let Some(i) = stack.pop() {
            match self.nodes[i].kind {
                KdNodeKind::Leaf { partition } => out.push(partition),
                KdNodeKind::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> KdTreeJson {
        fn build(tree: &KdPartitionTree, idx: usize) -> KdNodeJson {
            let node = &tree.nodes[idx];
            match node.kind {
                KdNodeKind::Leaf { partition } => KdNodeJson {
                    point_count: node.point_count,
                    partition: Some(partition),
                    split_dim: None,
                    split_value: None,
                    children: Vec::new(),
                },
                KdNodeKind::Split {
                    split_dim,
                    split_value,
                    left,
                    right,
                } => KdNodeJson {
                    point_count: node.point_count,
                    partition: None,
                    split_dim: Some(split_dim),
                    split_value: Some(split_value),
                    children: vec![build(tree, left), build(tree, right)],
                },
            }
        }
        KdTreeJson {
            scheme: "kdtree".into(),
            leaf_count: self.leaf_count,
            eps: self.eps,
            counters: self.counters,
            root: build(self, 0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Dataset {
        Dataset::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 10.0], [1.0, 10.0]]).unwrap()
    }

    #[test]
    fn median_examples() {
        assert_eq!(select_median(&[1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(select_median(&[5.0]).unwrap(), 5.0);
        assert_eq!(select_median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(select_median(&[]), Err(Error::Empty)));
    }

    #[test]
    fn median_with_many_duplicates() {
        let v: Vec<f64> = (0..1001).map(|i| (i % 3) as f64).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(select_median(&v).unwrap(), sorted[500]);
    }

    #[test]
    fn splits_on_highest_variance_dimension() {
        let ds = square();
        let tree = kd_partition(&ds, 2, 0.0).unwrap();
        match tree.root().kind {
            KdNodeKind::Split { split_dim, split_value, .. } => {
                assert_eq!(split_dim, 1);
                assert_eq!(split_value, 0.0);
            }
            _ => panic!("root should split"),
        }
        let labels = tree.assignment().labels();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn single_partition_is_a_leaf() {
        let ds = square();
        let tree = kd_partition(&ds, 1, 100.0).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert!(tree.assignment().labels().iter().all(|&l| l == 0));
        assert_eq!(tree.assignment().affected_count(), 0);
        assert_eq!(tree.counters().point_touches(), 0);
    }

    #[test]
    fn rejects_bad_partition_counts() {
        let ds = square();
        assert!(kd_partition(&ds, 0, 0.0).is_err());
        assert!(matches!(
            kd_partition(&ds, 5, 0.0),
            Err(Error::TooManyPartitions { requested: 5, points: 4 })
        ));
    }

    #[test]
    fn ties_fill_left_by_id() {
        // Five points sharing the split coordinate: left takes ids 0..3.
        let ds = Dataset::from_rows(&[[0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 2.0]]).unwrap();
        let tree = kd_partition(&ds, 2, 0.0).unwrap();
        assert_eq!(tree.assignment().labels(), &[0, 0, 0, 1, 1]);
    }

    #[test]
    fn odd_partition_count_splits_largest_first() {
        let ds = Dataset::new(1, (0..10).map(f64::from).collect()).unwrap();
        let tree = kd_partition(&ds, 3, 0.0).unwrap();
        let sizes = tree.assignment().sizes();
        // root 10 -> 5 | 5, then partition 0 (lower id) -> 3 | 2
        assert_eq!(sizes, vec![3, 5, 2]);
    }

    #[test]
    fn eps_marks_points_near_the_hyperplane() {
        let ds = Dataset::new(1, vec![0.0, 1.0, 2.0, 2.4, 3.0, 9.0]).unwrap();
        let tree = kd_partition(&ds, 2, 0.5).unwrap();
        // lower median is 2.0; 2.0 and 2.4 lie within 0.5 of it
        assert_eq!(tree.assignment().affected_ids(), vec![2, 3]);
    }

    #[test]
    fn counters_track_scans() {
        let ds = Dataset::new(1, (0..16).map(f64::from).collect()).unwrap();
        let tree = kd_partition(&ds, 4, 0.0).unwrap();
        let c = tree.counters();
        assert_eq!(c.full_scans, 6);
        // two levels, two full scans per level over all 16 points
        assert_eq!(c.full_point_touches, 2 * 2 * 16);
        assert_eq!(c.median_point_touches, 2 * 2 * 16);
    }

    #[test]
    fn json_nests_children() {
        let tree = kd_partition(&square(), 2, 0.0).unwrap();
        let json = serde_json::to_value(tree.to_json()).unwrap();
        assert_eq!(json["root"]["split_dim"], 1);
        assert_eq!(json["root"]["children"].as_array().unwrap().len(), 2);
        assert_eq!(json["root"]["children"][0]["point_count"], 2);
    }
}
