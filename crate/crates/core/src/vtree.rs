//! Tree of Voronoi splits.
//!
//! Every internal node holds `fanout` centers and sends each of its points
//! to the nearest one (ties: lowest center index). The leaf with the most
//! points is split next until the requested number of partitions exists, so
//! the leaves are the partitions and the tree above them is the order in
//! which per-partition results can be merged back together.
//!
//! A node keeps its points only while it is being split. Afterwards it
//! retains per-center counts and a summary (centroid and bounding box).
//!
//! A point assigned to center `i` is *affected* when some other center `j`
//! satisfies `d(p, q_j) - d(p, q_i) <= 2 * eps`. For two centers every point
//! within `eps` of the bisecting hyperplane meets this condition, so the
//! affected set is a superset of the eps-band around the cell boundaries.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::dataset::{distance, Bounds, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::generate::rng_from_seed;
use crate::metrics::{PartitionAssignment, ScanCounters};
use crate::seeding::{choose_seeds, SeedKind, SeedSet, SeedStrategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VTreeConfig {
    pub partitions: usize,
    pub fanout: usize,
    /// Optional fanout per tree level; levels past the end use `fanout`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fanout_schedule: Vec<usize>,
    pub eps: f64,
    pub seeding: SeedStrategy,
}

impl VTreeConfig {
    pub fn new(partitions: usize, seeding: SeedKind, seed: u64) -> Self {
        Self {
            partitions,
            fanout: 2,
            fanout_schedule: Vec::new(),
            eps: 0.0,
            seeding: SeedStrategy { kind: seeding, seed },
        }
    }

    pub fn with_fanout(mut self, fanout: usize) -> Self {
        self.fanout = fanout;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_schedule(mut self, schedule: Vec<usize>) -> Self {
        self.fanout_schedule = schedule;
        self
    }

    fn fanout_at(&self, level: usize) -> usize {
        self.fanout_schedule.get(level).copied().unwrap_or(self.fanout)
    }

    fn validate(&self, points: usize) -> Result<()> {
        if self.partitions == 0 {
            return Err(Error::invalid("partition count must be positive"));
        }
        if self.partitions > points {
            return Err(Error::TooManyPartitions {
                requested: self.partitions,
                points,
            });
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::invalid(format!("eps must be non-negative, got {}", self.eps)));
        }
        for f in std::iter::once(self.fanout).chain(self.fanout_schedule.iter().copied()) {
            if !self.seeding.kind.supports_fanout(f) {
                return Err(Error::invalid(format!(
                    "fanout {f} is not valid for {} seeding",
                    self.seeding.kind
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VChild {
    /// Index into [`VTree::nodes`].
    Node(usize),
    /// Partition id.
    Leaf(usize),
}

/// Summary of a set of points that outlives the points themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub centroid: Vec<f64>,
    /// Per-dimension bounding box; empty when `count` is zero.
    pub bbox: Vec<Bounds>,
}

impl Summary {
    fn empty(dims: usize) -> Self {
        Self {
            count: 0,
            centroid: vec![0.0; dims],
            bbox: Vec::new(),
        }
    }

    fn merge(parts: &[&Summary], dims: usize) -> Self {
        let count: usize = parts.iter().map(|s| s.count).sum();
        let mut out = Summary::empty(dims);
        out.count = count;
        if count == 0 {
            return out;
        }
        for s in parts.iter().filter(|s| s.count > 0) {
            let w = s.count as f64 / count as f64;
            for (c, &x) in out.centroid.iter_mut().zip(&s.centroid) {
                *c += w * x;
            }
            if out.bbox.is_empty() {
                out.bbox = s.bbox.clone();
            } else {
                for (b, sb) in out.bbox.iter_mut().zip(&s.bbox) {
                    b.min = b.min.min(sb.min);
                    b.max = b.max.max(sb.max);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VNode {
    pub level: usize,
    /// Ids of the points the centers were derived from.
    pub center_ids: Vec<u64>,
    pub centers: Vec<Vec<f64>>,
    pub child_counts: Vec<usize>,
    pub overlap_count: usize,
    pub children: Vec<VChild>,
    /// One summary per center.
    pub summary: Vec<Summary>,
    /// Rows held while the node is being split; always empty once built.
    #[serde(skip)]
    members: Vec<usize>,
}

impl VNode {
    pub fn fanout(&self) -> usize {
        self.centers.len()
    }

    pub fn point_count(&self) -> usize {
        self.child_counts.iter().sum()
    }

    /// Rows still stored on this node.
    pub fn retained_points(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug)]
pub struct VTree {
    config: VTreeConfig,
    dims: usize,
    nodes: Vec<VNode>,
    root: VChild,
    root_summary: Summary,
    levels: usize,
    leaf_levels: Vec<usize>,
    leaf_assignment: PartitionAssignment,
    counters: ScanCounters,
    retries: usize,
}

/// Result of distributing points among centers.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterAssignment {
    /// Rows per center, in input order.
    pub lists: Vec<Vec<usize>>,
    /// Rows flagged as affected, in input order.
    pub affected: Vec<usize>,
}

pub fn assign_to_centers(ds: &Dataset, rows: &[usize], centers: &[Vec<f64>], eps: f64) -> Result<CenterAssignment> {
    assign_to_centers_with(ds, rows, centers, eps, Execution::default())
}

/// Sends every row to its nearest center (ties: lowest center index) and
/// flags it affected when another center is within `2 * eps` of the same
/// distance.
pub fn assign_to_centers_with(
    ds: &Dataset,
    rows: &[usize],
    centers: &[Vec<f64>],
    eps: f64,
    exec: Execution,
) -> Result<CenterAssignment> {
    if centers.is_empty() {
        return Err(Error::invalid("no centers to assign to"));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != ds.dims()) {
        return Err(Error::DimensionMismatch {
            expected: ds.dims(),
            found: c.len(),
        });
    }
    let no_cache = vec![None; centers.len()];
    Ok(assign_cached(ds, rows, centers, &no_cache, eps, exec))
}

fn assign_cached(
    ds: &Dataset,
    rows: &[usize],
    centers: &[Vec<f64>],
    cache: &[Option<Vec<f64>>],
    eps: f64,
    exec: Execution,
) -> CenterAssignment {
    let positions: Vec<usize> = (0..rows.len()).collect();
    let decided = exec.map(&positions, |&i| {
        let row = ds.row(rows[i]);
        let dist = |j: usize| match &cache[j] {
            Some(d) => d[i],
            None => distance(row, &centers[j]),
        };
        nearest_with_margin(centers.len(), dist)
    });
    let mut lists = vec![Vec::new(); centers.len()];
    let mut affected = Vec::new();
    for (&r, &(center, margin)) in rows.iter().zip(&decided) {
        lists[center].push(r);
        if margin <= 2.0 * eps {
            affected.push(r);
        }
    }
    CenterAssignment { lists, affected }
}

/// Nearest center index and the gap to the runner-up distance.
#[inline]
fn nearest_with_margin(k: usize, dist: impl Fn(usize) -> f64) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = dist(0);
    let mut second = f64::INFINITY;
    for j in 1..k {
        let d = dist(j);
        if d < best_d {
            second = best_d;
            best_d = d;
            best = j;
        } else if d < second {
            second = d;
        }
    }
    (best, second - best_d)
}

struct PendingLeaf {
    rows: Vec<usize>,
    level: usize,
    /// Where this leaf hangs: (node index, child slot).
    parent: Option<(usize, usize)>,
}

pub fn build_vtree(ds: &Dataset, config: &VTreeConfig) -> Result<VTree> {
    build_vtree_with(ds, config, Execution::default())
}

/// Builds the tree by repeatedly splitting the largest leaf (ties: lowest
/// partition id). The first child of a split keeps the parent's partition
/// id; the others take the next free ids.
pub fn build_vtree_with(ds: &Dataset, config: &VTreeConfig, exec: Execution) -> Result<VTree> {
    config.validate(ds.len())?;
    let m = config.partitions;
    let mut rng = rng_from_seed(config.seeding.seed);
    let mut counters = ScanCounters::default();
    let mut retries = 0;
    let mut affected = vec![false; ds.len()];
    let mut nodes: Vec<VNode> = Vec::new();
    let mut leaves = vec![PendingLeaf {
        rows: ds.all_rows(),
        level: 0,
        parent: None,
    }];
    let mut queue = BinaryHeap::from([(ds.len(), Reverse(0usize))]);
    let mut root = VChild::Leaf(0);

    while leaves.len() < m {
        let (size, Reverse(pid)) = queue.pop().expect("leaves < m");
        let level = leaves[pid].level;
        let fanout = config.fanout_at(level).min(m - leaves.len() + 1).min(size);
        if fanout < 2 {
            return Err(Error::invalid(format!(
                "cannot reach {m} partitions: the largest remaining leaf holds {size} point(s)"
            )));
        }
        let rows = std::mem::take(&mut leaves[pid].rows);

        let (seeds, split) = split_rows(ds, &rows, fanout, config, &mut rng, &mut counters, exec)?;
        let (seeds, split) = if split.lists.iter().any(Vec::is_empty) {
            retries += 1;
            split_rows(ds, &rows, fanout, config, &mut rng, &mut counters, exec)?
        } else {
            (seeds, split)
        };

        for &r in &split.affected {
            affected[r] = true;
        }
        let node_idx = nodes.len();
        let mut children = Vec::with_capacity(fanout);
        for (j, list) in split.lists.iter().enumerate() {
            let child_pid = if j == 0 { pid } else { leaves.len() + j - 1 };
            children.push(VChild::Leaf(child_pid));
            queue.push((list.len(), Reverse(child_pid)));
        }
        nodes.push(VNode {
            level,
            center_ids: seeds.ids,
            centers: seeds.centers,
            child_counts: split.lists.iter().map(Vec::len).collect(),
            overlap_count: split.affected.len(),
            children,
            summary: Vec::new(),
            members: rows,
        });
        match leaves[pid].parent {
            None => root = VChild::Node(node_idx),
            Some((parent, slot)) => nodes[parent].children[slot] = VChild::Node(node_idx),
        }
        let mut lists = split.lists.into_iter();
        leaves[pid] = PendingLeaf {
            rows: lists.next().unwrap(),
            level: level + 1,
            parent: Some((node_idx, 0)),
        };
        for (j, list) in lists.enumerate() {
            leaves.push(PendingLeaf {
                rows: list,
                level: level + 1,
                parent: Some((node_idx, j + 1)),
            });
        }
        // The node's points now live in its children.
        nodes[node_idx].members = Vec::new();
    }

    let mut labels = vec![0; ds.len()];
    for (pid, leaf) in leaves.iter().enumerate() {
        for &r in &leaf.rows {
            labels[r] = pid;
        }
    }
    let leaf_summaries = summarize_leaves(ds, &leaves);
    counters.full_scan(ds.len());
    let root_summary = fill_summaries(&mut nodes, root, &leaf_summaries, ds.dims());
    let leaf_levels: Vec<usize> = leaves.iter().map(|l| l.level).collect();
    let leaf_assignment = PartitionAssignment::new(m, ds.ids().to_vec(), labels, affected)?;

    Ok(VTree {
        config: config.clone(),
        dims: ds.dims(),
        levels: leaf_levels.iter().copied().max().unwrap_or(0),
        leaf_levels,
        nodes,
        root,
        root_summary,
        leaf_assignment,
        counters,
        retries,
    })
}

fn split_rows(
    ds: &Dataset,
    rows: &[usize],
    fanout: usize,
    config: &VTreeConfig,
    rng: &mut crate::generate::Rng,
    counters: &mut ScanCounters,
    exec: Execution,
) -> Result<(SeedSet, CenterAssignment)> {
    let kind = config.seeding.kind;
    let seeds = choose_seeds(kind, ds, rows, fanout, rng, exec)?;
    match kind {
        SeedKind::Random => {}
        SeedKind::Gnat | SeedKind::KMeansPP => {
            for _ in 1..fanout {
                counters.full_scan(rows.len());
            }
        }
        SeedKind::Median => {
            counters.full_scan(rows.len());
            counters.full_scan(rows.len());
            counters.median_pass(rows.len());
            counters.median_pass(rows.len());
        }
    }
    let split = assign_cached(ds, rows, &seeds.centers, &seeds.distances, config.eps, exec);
    counters.full_scan(rows.len());
    Ok((seeds, split))
}

/// One pass over the final leaves; internal summaries are merged from these.
fn summarize_leaves(ds: &Dataset, leaves: &[PendingLeaf]) -> Vec<Summary> {
    leaves
        .iter()
        .map(|leaf| {
            let mut s = Summary::empty(ds.dims());
            if leaf.rows.is_empty() {
                return s;
            }
            s.count = leaf.rows.len();
            s.bbox = ds
                .row(leaf.rows[0])
                .iter()
                .map(|&v| Bounds { min: v, max: v })
                .collect();
            for &r in &leaf.rows {
                for ((c, b), &v) in s.centroid.iter_mut().zip(s.bbox.iter_mut()).zip(ds.row(r)) {
                    *c += v;
                    b.min = b.min.min(v);
                    b.max = b.max.max(v);
                }
            }
            let n = s.count as f64;
            s.centroid.iter_mut().for_each(|c| *c /= n);
            s
        })
        .collect()
}

fn fill_summaries(nodes: &mut [VNode], at: VChild, leaves: &[Summary], dims: usize) -> Summary {
    match at {
        VChild::Leaf(pid) => leaves[pid].clone(),
        VChild::Node(idx) => {
            let children = nodes[idx].children.clone();
            let per_child: Vec<Summary> = children
                .into_iter()
                .map(|c| fill_summaries(nodes, c, leaves, dims))
                .collect();
            let merged = Summary::merge(&per_child.iter().collect::<Vec<_>>(), dims);
            nodes[idx].summary = per_child;
            merged
        }
    }
}

/// Descends from the root taking the nearest center at each node.
pub fn route_point(tree: &VTree, p: &[f64]) -> Result<usize> {
    route_point_counted(tree, p).map(|(leaf, _)| leaf)
}

/// Like [`route_point`], also returning the number of distance evaluations.
pub fn route_point_counted(tree: &VTree, p: &[f64]) -> Result<(usize, usize)> {
    tree.check_dims(p)?;
    let mut at = tree.root;
    let mut evaluations = 0;
    loop {
        match at {
            VChild::Leaf(pid) => return Ok((pid, evaluations)),
            VChild::Node(idx) => {
                let node = &tree.nodes[idx];
                evaluations += node.fanout();
                let (best, _) = nearest_with_margin(node.fanout(), |j| distance(p, &node.centers[j]));
                at = node.children[best];
            }
        }
    }
}

/// Every leaf reachable by following, at each node, all centers whose
/// distance is within `2 * eps` of the nearest one.
pub fn affected_partitions(tree: &VTree, p: &[f64], eps: f64) -> Result<BTreeSet<usize>> {
    tree.check_dims(p)?;
    let mut out = BTreeSet::new();
    let mut stack = vec![tree.root];
    while let Some(at) = stack.pop() {
        match at {
            VChild::Leaf(pid) => {
                out.insert(pid);
            }
            VChild::Node(idx) => {
                let node = &tree.nodes[idx];
                let d: Vec<f64> = node.centers.iter().map(|c| distance(p, c)).collect();
                let nearest = d.iter().copied().fold(f64::INFINITY, f64::min);
                for (j, &dj) in d.iter().enumerate() {
                    if dj - nearest <= 2.0 * eps {
                        stack.push(node.children[j]);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeGroup {
    Partition(usize),
    /// Group formed by merge step `n`.
    Step(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub inputs: Vec<MergeGroup>,
    pub output: MergeGroup,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeOrder {
    pub steps: Vec<MergeStep>,
}

impl MergeOrder {
    /// Replays the steps and returns the partitions of the single remaining
    /// group, sorted. Fails if a group is consumed twice, a partition is
    /// missing, or more than one group is left over.
    pub fn replay(&self, partition_count: usize) -> Result<Vec<usize>> {
        use std::collections::BTreeMap;
        let mut live: BTreeMap<MergeGroup, Vec<usize>> =
            (0..partition_count).map(|p| (MergeGroup::Partition(p), vec![p])).collect();
        for step in &self.steps {
            let mut merged = Vec::new();
            for g in &step.inputs {
                let members = live
                    .remove(g)
                    .ok_or_else(|| Error::invalid(format!("merge input {g:?} is not a live group")))?;
                merged.extend(members);
            }
            if live.insert(step.output, merged).is_some() {
                return Err(Error::invalid(format!("merge output {:?} already exists", step.output)));
            }
        }
        if live.len() != 1 {
            return Err(Error::invalid(format!("{} groups remain after replay", live.len())));
        }
        let mut all = live.into_values().next().unwrap();
        all.sort_unstable();
        Ok(all)
    }
}

/// Bottom-up merge steps, one per internal node, in post-order.
pub fn merge_order(tree: &VTree) -> MergeOrder {
    fn visit(tree: &VTree, at: VChild, steps: &mut Vec<MergeStep>) -> MergeGroup {
        match at {
            VChild::Leaf(pid) => MergeGroup::Partition(pid),
            VChild::Node(idx) => {
                let inputs = tree.nodes[idx]
                    .children
                    .iter()
                    .map(|&c| visit(tree, c, steps))
                    .collect();
                let output = MergeGroup::Step(steps.len());
                steps.push(MergeStep { inputs, output });
                output
            }
        }
    }
    let mut steps = Vec::new();
    visit(tree, tree.root, &mut steps);
    MergeOrder { steps }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VChildJson {
    Leaf { partition: usize, count: usize },
    Node(Box<VNodeJson>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VNodeJson {
    pub level: usize,
    pub center_ids: Vec<u64>,
    pub centers: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub overlap_count: usize,
    pub summary: Vec<Summary>,
    pub children: Vec<VChildJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VTreeJson {
    pub scheme: String,
    pub config: VTreeConfig,
    pub levels: usize,
    pub counters: ScanCounters,
    pub summary: Summary,
    pub root: VChildJson,
}

impl VTree {
    pub fn config(&self) -> &VTreeConfig {
        &self.config
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn root(&self) -> VChild {
        self.root
    }

    pub fn node(&self, idx: usize) -> &VNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[VNode] {
        &self.nodes
    }

    /// Summary of the whole dataset.
    pub fn root_summary(&self) -> &Summary {
        &self.root_summary
    }

    /// Depth of the deepest leaf.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_assignment.partition_count()
    }

    pub fn leaf_level(&self, partition: usize) -> usize {
        self.leaf_levels[partition]
    }

    pub fn leaf_assignment(&self) -> &PartitionAssignment {
        &self.leaf_assignment
    }

    pub fn into_assignment(self) -> PartitionAssignment {
        self.leaf_assignment
    }

    pub fn counters(&self) -> &ScanCounters {
        &self.counters
    }

    /// Splits that were redrawn because a child came out empty.
    pub fn retries(&self) -> usize {
        self.retries
    }

    /// Rows still held by internal nodes (zero after a completed build).
    pub fn internal_point_storage(&self) -> usize {
        self.nodes.iter().map(VNode::retained_points).sum()
    }

    /// Partition ids of the leaves under `at`.
    pub fn partitions_under(&self, at: VChild) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![at];
        while let Some(c) = stack.pop() {
            match c {
                VChild::Leaf(pid) => out.push(pid),
                VChild::Node(idx) => stack.extend(self.nodes[idx].children.iter().rev()),
            }
        }
        out
    }

    fn check_dims(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                found: p.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> VTreeJson {
        fn child(tree: &VTree, at: VChild) -> VChildJson {
            match at {
                VChild::Leaf(pid) => VChildJson::Leaf {
                    partition: pid,
                    count: tree.leaf_assignment.labels().iter().filter(|&&l| l == pid).count(),
                },
                VChild::Node(idx) => {
                    let n = &tree.nodes[idx];
                    VChildJson::Node(Box::new(VNodeJson {
                        level: n.level,
                        center_ids: n.center_ids.clone(),
                        centers: n.centers.clone(),
                        counts: n.child_counts.clone(),
                        overlap_count: n.overlap_count,
                        summary: n.summary.clone(),
                        children: n.children.iter().map(|&c| child(tree, c)).collect(),
                    }))
                }
            }
        }
        VTreeJson {
            scheme: "vtree".into(),
            config: self.config.clone(),
            levels: self.levels,
            counters: self.counters,
            summary: self.root_summary.clone(),
            root: child(self, self.root),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::generate_uniform;

    fn axis_centers() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![10.0, 0.0]]
    }

    fn one_point(x: f64) -> Dataset {
        Dataset::from_rows(&[[x, 0.0]]).unwrap()
    }

    #[test]
    fn assignment_examples() {
        let ds = one_point(3.0);
        let a = assign_to_centers(&ds, &[0], &axis_centers(), 0.0).unwrap();
        assert_eq!(a.lists, vec![vec![0], vec![]]);
        assert!(a.affected.is_empty());

        let ds = one_point(5.0);
        for eps in [0.0, 0.1, 3.0] {
            let a = assign_to_centers(&ds, &[0], &axis_centers(), eps).unwrap();
            assert_eq!(a.lists, vec![vec![0], vec![]]);
            assert_eq!(a.affected, vec![0]);
        }

        let ds = one_point(5.4);
        let a = assign_to_centers(&ds, &[0], &axis_centers(), 0.5).unwrap();
        assert_eq!(a.lists, vec![vec![], vec![0]]);
        assert_eq!(a.affected, vec![0]);
        let a = assign_to_centers(&ds, &[0], &axis_centers(), 0.39).unwrap();
        assert!(a.affected.is_empty());
    }

    #[test]
    fn assignment_requires_centers() {
        let ds = one_point(1.0);
        assert!(assign_to_centers(&ds, &[0], &[], 0.0).is_err());
        assert!(assign_to_centers(&ds, &[0], &[vec![1.0]], 0.0).is_err());
    }

    #[test]
    fn margin_handles_ties_and_order() {
        assert_eq!(nearest_with_margin(3, |j| [2.0, 1.0, 1.0][j]), (1, 0.0));
        assert_eq!(nearest_with_margin(3, |j| [1.0, 4.0, 2.5][j]), (0, 1.5));
        assert_eq!(nearest_with_margin(2, |j| [3.0, 3.0][j]), (0, 0.0));
    }

    #[test]
    fn single_partition_is_a_leaf() {
        let ds = generate_uniform(20, 3, 0.0, 1.0, 1).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(1, SeedKind::KMeansPP, 5).with_eps(1.0)).unwrap();
        assert_eq!(tree.root(), VChild::Leaf(0));
        assert!(tree.nodes().is_empty());
        assert_eq!(tree.leaf_assignment().affected_count(), 0);
        assert_eq!(tree.root_summary().count, 20);
        assert!(merge_order(&tree).steps.is_empty());
    }

    #[test]
    fn median_split_on_the_square() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 10.0], [1.0, 10.0]]).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(2, SeedKind::Median, 0)).unwrap();
        assert_eq!(tree.leaf_assignment().labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn median_rejects_wider_fanout() {
        let ds = generate_uniform(20, 2, 0.0, 1.0, 1).unwrap();
        let cfg = VTreeConfig::new(4, SeedKind::Median, 0).with_fanout(3);
        assert!(build_vtree(&ds, &cfg).is_err());
        let cfg = VTreeConfig::new(4, SeedKind::Median, 0).with_schedule(vec![2, 4]);
        assert!(build_vtree(&ds, &cfg).is_err());
    }

    #[test]
    fn four_partitions_of_uniform_data() {
        let ds = generate_uniform(100, 2, 0.0, 1.0, 3).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(4, SeedKind::KMeansPP, 3)).unwrap();
        assert_eq!(tree.leaf_count(), 4);
        assert_eq!(tree.leaf_assignment().sizes().iter().sum::<usize>(), 100);
        assert_eq!(tree.nodes().len(), 3);
        assert_eq!(tree.internal_point_storage(), 0);
        assert_eq!(merge_order(&tree).steps.len(), 3);
        for row in 0..ds.len() {
            assert_eq!(route_point(&tree, ds.row(row)).unwrap(), tree.leaf_assignment().labels()[row]);
        }
    }

    #[test]
    fn routing_cost_is_bounded_by_depth() {
        let ds = generate_uniform(400, 3, 0.0, 1.0, 8).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(8, SeedKind::Gnat, 2)).unwrap();
        for row in 0..ds.len() {
            let (leaf, evals) = route_point_counted(&tree, ds.row(row)).unwrap();
            assert!(evals <= 2 * tree.leaf_level(leaf));
            assert!(evals <= 2 * tree.levels());
        }
        assert!(route_point(&tree, &[0.0]).is_err());
    }

    #[test]
    fn routing_to_a_center_lands_in_its_cell() {
        let ds = generate_uniform(200, 2, 0.0, 1.0, 4).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(2, SeedKind::KMeansPP, 4)).unwrap();
        let VChild::Node(root) = tree.root() else { panic!() };
        for (j, c) in tree.node(root).centers.iter().enumerate() {
            assert_eq!(route_point(&tree, c).unwrap(), tree.partitions_under(tree.node(root).children[j])[0]);
        }
    }

    #[test]
    fn affected_partitions_examples() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 10.0], [1.0, 10.0]]).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(2, SeedKind::Median, 0)).unwrap();
        let generic = [0.3, 1.0];
        assert_eq!(
            affected_partitions(&tree, &generic, 0.0).unwrap(),
            BTreeSet::from([route_point(&tree, &generic).unwrap()])
        );
        // centers (0,0) and (0,10): y = 5 is equidistant
        assert_eq!(affected_partitions(&tree, &[0.7, 5.0], 0.0).unwrap(), BTreeSet::from([0, 1]));
        assert_eq!(affected_partitions(&tree, &[0.0, 5.9], 1.0).unwrap(), BTreeSet::from([0, 1]));
    }

    #[test]
    fn ternary_tree_merge_steps() {
        let ds = generate_uniform(900, 2, 0.0, 1.0, 6).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(9, SeedKind::KMeansPP, 6).with_fanout(3)).unwrap();
        let order = merge_order(&tree);
        assert_eq!(order.steps.len(), 4);
        assert_eq!(order.replay(9).unwrap(), (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn odd_partition_counts_clamp_fanout() {
        let ds = generate_uniform(300, 2, 0.0, 1.0, 2).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(4, SeedKind::Random, 2).with_fanout(3)).unwrap();
        assert_eq!(tree.leaf_count(), 4);
        let fanouts: Vec<usize> = tree.nodes().iter().map(VNode::fanout).collect();
        assert_eq!(fanouts, vec![3, 2]);
    }

    #[test]
    fn schedule_sets_fanout_per_level() {
        let ds = generate_uniform(500, 2, 0.0, 1.0, 2).unwrap();
        let cfg = VTreeConfig::new(7, SeedKind::Gnat, 2).with_schedule(vec![4, 2]);
        let tree = build_vtree(&ds, &cfg).unwrap();
        assert_eq!(tree.node(0).fanout(), 4);
        assert!(tree.nodes()[1..].iter().all(|n| n.fanout() == 2));
    }

    #[test]
    fn duplicate_points_leave_an_empty_leaf() {
        // Random seeding on two coincident points can only fill one cell.
        let ds = Dataset::from_rows(&[[1.0], [1.0]]).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(2, SeedKind::Random, 0)).unwrap();
        assert_eq!(tree.retries(), 1);
        assert_eq!(tree.leaf_assignment().sizes(), vec![2, 0]);
    }

    #[test]
    fn summaries_cover_children() {
        let ds = generate_uniform(64, 2, -1.0, 1.0, 9).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(4, SeedKind::KMeansPP, 1)).unwrap();
        let root = tree.root_summary();
        assert_eq!(root.count, 64);
        for (j, b) in root.bbox.iter().enumerate() {
            assert_eq!(b.min, ds.bounds()[j].min);
            assert_eq!(b.max, ds.bounds()[j].max);
        }
        for node in tree.nodes() {
            let counts: Vec<usize> = node.summary.iter().map(|s| s.count).collect();
            assert_eq!(counts, node.child_counts);
        }
    }

    #[test]
    fn replay_rejects_bad_orders() {
        let order = MergeOrder {
            steps: vec![MergeStep {
                inputs: vec![MergeGroup::Partition(0), MergeGroup::Partition(0)],
                output: MergeGroup::Step(0),
            }],
        };
        assert!(order.replay(2).is_err());
        assert!(MergeOrder::default().replay(2).is_err());
        assert_eq!(MergeOrder::default().replay(1).unwrap(), vec![0]);
    }

    #[test]
    fn json_shape() {
        let ds = generate_uniform(50, 2, 0.0, 1.0, 1).unwrap();
        let tree = build_vtree(&ds, &VTreeConfig::new(3, SeedKind::KMeansPP, 1).with_eps(0.05)).unwrap();
        let json = serde_json::to_value(tree.to_json()).unwrap();
        assert_eq!(json["root"]["level"], 0);
        assert_eq!(json["root"]["centers"].as_array().unwrap().len(), 2);
        assert!(json["root"]["overlap_count"].is_u64());
        assert_eq!(json["config"]["seeding"]["kind"], "kmeanspp");
    }
}
