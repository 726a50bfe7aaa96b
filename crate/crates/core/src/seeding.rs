//! Initial-center strategies for Voronoi splits.
//!
//! Every strategy is a pure function of the point subset, the fanout and the
//! RNG state. Ties are always broken towards the lowest point id.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{argmax, distance, variance_of_rows, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::generate::Rng;
use crate::kdtree::select_median;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    Random,
    Gnat,
    #[serde(rename = "kmeanspp")]
    KMeansPP,
    Median,
}

impl SeedKind {
    pub const ALL: [SeedKind; 4] = [SeedKind::Random, SeedKind::Gnat, SeedKind::KMeansPP, SeedKind::Median];

    pub fn as_str(self) -> &'static str {
        match self {
            SeedKind::Random => "random",
            SeedKind::Gnat => "gnat",
            SeedKind::KMeansPP => "kmeanspp",
            SeedKind::Median => "median",
        }
    }

    pub fn supports_fanout(self, fanout: usize) -> bool {
        fanout >= 2 && (self != SeedKind::Median || fanout == 2)
    }
}

impl fmt::Display for SeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeedKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown seeding strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStrategy {
    pub kind: SeedKind,
    pub seed: u64,
}

/// Chosen centers for one split.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSet {
    /// Ids of the points the centers were taken from.
    pub ids: Vec<u64>,
    pub centers: Vec<Vec<f64>>,
    /// Distances from every input point (in input order) to center `j`, when
    /// the strategy already computed them.
    pub distances: Vec<Option<Vec<f64>>>,
}

impl SeedSet {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    fn from_rows(ds: &Dataset, chosen: &[usize]) -> Self {
        Self {
            ids: chosen.iter().map(|&r| ds.id(r)).collect(),
            centers: chosen.iter().map(|&r| ds.row(r).to_vec()).collect(),
            distances: vec![None; chosen.len()],
        }
    }
}

fn check_k(rows: &[usize], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid(format!("a split needs at least 2 centers, got {k}")));
    }
    if k > rows.len() {
        return Err(Error::invalid(format!("{k} centers requested from {} points", rows.len())));
    }
    Ok(())
}

/// Runs the strategy named by `kind`.
pub fn choose_seeds(kind: SeedKind, ds: &Dataset, rows: &[usize], k: usize, rng: &mut Rng, exec: Execution) -> Result<SeedSet> {
    match kind {
        SeedKind::Random => seeds_random(ds, rows, k, rng),
        SeedKind::Gnat => seeds_gnat_with(ds, rows, k, rng, exec),
        SeedKind::KMeansPP => seeds_kmeanspp_with(ds, rows, k, rng, exec),
        SeedKind::Median => seeds_median(ds, rows, k),
    }
}

/// `k` distinct points sampled uniformly without replacement.
pub fn seeds_random(ds: &Dataset, rows: &[usize], k: usize, rng: &mut Rng) -> Result<SeedSet> {
    if k == 0 || k > rows.len() {
        return Err(Error::invalid(format!("{k} centers requested from {} points", rows.len())));
    }
    let picked: Vec<usize> = index::sample(rng, rows.len(), k).into_iter().map(|i| rows[i]).collect();
    Ok(SeedSet::from_rows(ds, &picked))
}

pub fn seeds_gnat(ds: &Dataset, rows: &[usize], k: usize, rng: &mut Rng) -> Result<SeedSet> {
    seeds_gnat_with(ds, rows, k, rng, Execution::default())
}

/// Farthest-point seeding: a uniformly random first center, then each next
/// center maximizes the summed distance to the centers chosen so far.
pub fn seeds_gnat_with(ds: &Dataset, rows: &[usize], k: usize, rng: &mut Rng, exec: Execution) -> Result<SeedSet> {
    check_k(rows, k)?;
    let first = rng.gen_range(0..rows.len());
    gnat_from(ds, rows, k, first, exec)
}

/// Farthest-point seeding from a fixed first center (`first` indexes `rows`).
pub fn gnat_from(ds: &Dataset, rows: &[usize], k: usize, first: usize, exec: Execution) -> Result<SeedSet> {
    check_k(rows, k)?;
    let mut chosen = vec![first];
    let mut selected = vec![false; rows.len()];
    selected[first] = true;
    let mut sums = vec![0.0; rows.len()];
    let mut cache = Vec::with_capacity(k);
    while chosen.len() < k {
        let center = ds.row(rows[*chosen.last().unwrap()]);
        let d = exec.map(rows, |&r| distance(ds.row(r), center));
        for (s, &di) in sums.iter_mut().zip(&d) {
            *s += di;
        }
        cache.push(Some(d));
        let mut best: Option<usize> = None;
        for (i, &s) in sums.iter().enumerate() {
            if selected[i] {
                continue;
            }
            best = match best {
                Some(b) if s < sums[b] || (s == sums[b] && ds.id(rows[i]) >= ds.id(rows[b])) => Some(b),
                _ => Some(i),
            };
        }
        let next = best.expect("k <= |rows| leaves an unselected point");
        selected[next] = true;
        chosen.push(next);
    }
    cache.push(None);
    let picked: Vec<usize> = chosen.iter().map(|&i| rows[i]).collect();
    let mut set = SeedSet::from_rows(ds, &picked);
    set.distances = cache;
    Ok(set)
}

pub fn seeds_kmeanspp(ds: &Dataset, rows: &[usize], k: usize, rng: &mut Rng) -> Result<SeedSet> {
    seeds_kmeanspp_with(ds, rows, k, rng, Execution::default())
}

/// k-means++ seeding: a uniformly random first center, then each next
/// center is drawn with probability proportional to `D(p)^2`, the squared
/// distance from `p` to its nearest chosen center.
pub fn seeds_kmeanspp_with(ds: &Dataset, rows: &[usize], k: usize, rng: &mut Rng, exec: Execution) -> Result<SeedSet> {
    check_k(rows, k)?;
    let first = rng.gen_range(0..rows.len());
    let mut chosen = vec![first];
    let mut cache = Vec::with_capacity(k);
    let d = exec.map(rows, |&r| distance(ds.row(r), ds.row(rows[first])));
    let mut nearest = d.clone();
    cache.push(Some(d));
    while chosen.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|&d| d * d).collect();
        let u: f64 = rng.gen();
        let Some(next) = d2_inverse_cdf(&weights, u) else {
            return Err(Error::TooFewDistinct {
                needed: k,
                distinct: distinct_locations(ds, rows),
            });
        };
        chosen.push(next);
        if chosen.len() < k {
            let center = ds.row(rows[next]);
            let d = exec.map(rows, |&r| distance(ds.row(r), center));
            for (n, &di) in nearest.iter_mut().zip(&d) {
                if di < *n {
                    *n = di;
                }
            }
            cache.push(Some(d));
        } else {
            cache.push(None);
        }
    }
    let picked: Vec<usize> = chosen.iter().map(|&i| rows[i]).collect();
    let mut set = SeedSet::from_rows(ds, &picked);
    set.distances = cache;
    Ok(set)
}

/// Inverse-CDF draw from unnormalized `weights` for a variate `u` in
/// `[0, 1)`: the first index whose cumulative weight exceeds `u * total`.
/// Zero-weight entries are never returned; `None` if all weights are zero.
///
/// Prefix sums run sequentially in index order, so the outcome does not
/// depend on how the weights were computed.
pub fn d2_inverse_cdf(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = u * total;
    let mut cumulative = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        cumulative += w;
        last_positive = Some(i);
        if cumulative > target {
            return Some(i);
        }
    }
    last_positive
}

/// Selection probabilities `D(p)^2 / sum D(q)^2` given the current centers.
pub fn d2_probabilities(ds: &Dataset, rows: &[usize], centers: &[&[f64]]) -> Vec<f64> {
    let weights: Vec<f64> = rows
        .iter()
        .map(|&r| {
            let d = centers
                .iter()
                .map(|c| distance(ds.row(r), c))
                .fold(f64::INFINITY, f64::min);
            d * d
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn distinct_locations(ds: &Dataset, rows: &[usize]) -> usize {
    let mut keys: Vec<Vec<u64>> = rows
        .iter()
        .map(|&r| ds.row(r).iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Two centers straddling the median of the highest-variance dimension.
///
/// The lower center is the point at the (lower) median along that
/// dimension; the upper center is the same point moved along the axis to the
/// coordinate of the nearest point above the median. The two centers differ
/// in one coordinate only, so their bisector is the axis-aligned hyperplane
/// halfway between the two straddling values.
pub fn seeds_median(ds: &Dataset, rows: &[usize], k: usize) -> Result<SeedSet> {
    if k != 2 {
        return Err(Error::invalid(format!("median seeding produces exactly 2 centers, {k} requested")));
    }
    if rows.len() < 2 {
        return Err(Error::invalid("median seeding needs at least 2 points"));
    }
    let variance = variance_of_rows(ds, rows)?;
    let dim = argmax(&variance);
    if variance[dim] == 0.0 {
        return Err(Error::TooFewDistinct { needed: 2, distinct: 1 });
    }
    let values: Vec<f64> = rows.iter().map(|&r| ds.row(r)[dim]).collect();
    let median = select_median(&values)?;

    // Largest value satisfying `keep`, or smallest when `lowest` is set; ties by id.
    let pick = |keep: &dyn Fn(f64) -> bool, lowest: bool| -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &v) in values.iter().enumerate() {
            if !keep(v) {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let better = if lowest { v < values[b] } else { v > values[b] };
                    if better || (v == values[b] && ds.id(rows[i]) < ds.id(rows[b])) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    };

    let (lower, upper) = match pick(&|v| v > median, true) {
        Some(up) => (pick(&|v| v <= median, false).unwrap(), up),
        // Median equals the maximum: straddle it from below instead.
        None => (
            pick(&|v| v < median, false).expect("non-zero variance"),
            pick(&|v| v == median, true).unwrap(),
        ),
    };
    let base = ds.row(rows[lower]).to_vec();
    let mut shifted = base.clone();
    shifted[dim] = values[upper];
    Ok(SeedSet {
        ids: vec![ds.id(rows[lower]), ds.id(rows[upper])],
        centers: vec![base, shifted],
        distances: vec![None, None],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::rng_from_seed;

    fn line(values: &[f64]) -> Dataset {
        Dataset::new(1, values.to_vec()).unwrap()
    }

    #[test]
    fn random_takes_everything_when_k_is_n() {
        let ds = line(&[0.0, 1.0, 2.0, 3.0]);
        let rows = ds.all_rows();
        let mut ids = seeds_random(&ds, &rows, 4, &mut rng_from_seed(1)).unwrap().ids;
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        let a = seeds_random(&ds, &rows, 2, &mut rng_from_seed(9)).unwrap();
        let b = seeds_random(&ds, &rows, 2, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        assert!(seeds_random(&ds, &rows, 5, &mut rng_from_seed(9)).is_err());
    }

    #[test]
    fn gnat_picks_the_farthest_point() {
        let ds = line(&[0.0, 1.0, 10.0]);
        let set = gnat_from(&ds, &ds.all_rows(), 2, 0, Execution::Sequential).unwrap();
        assert_eq!(set.ids, vec![0, 2]);
    }

    #[test]
    fn gnat_sum_ties_go_to_lowest_id() {
        let ds = line(&[0.0, 4.0, 5.0, 10.0]);
        let set = gnat_from(&ds, &ds.all_rows(), 3, 0, Execution::Sequential).unwrap();
        // 4 -> 4 + 6 = 10 and 5 -> 5 + 5 = 10; id 1 wins
        assert_eq!(set.ids, vec![0, 3, 1]);
    }

    #[test]
    fn gnat_distance_cache_matches() {
        let ds = line(&[0.0, 4.0, 5.0, 10.0]);
        let set = gnat_from(&ds, &ds.all_rows(), 2, 1, Execution::Sequential).unwrap();
        assert_eq!(set.distances[0].as_deref(), Some(&[4.0, 0.0, 1.0, 6.0][..]));
        assert!(set.distances[1].is_none());
    }

    #[test]
    fn d2_probabilities_on_a_line() {
        let ds = line(&[0.0, 1.0, 2.0]);
        let p = d2_probabilities(&ds, &ds.all_rows(), &[&[0.0]]);
        assert_eq!(p, vec![0.0, 0.2, 0.8]);
    }

    #[test]
    fn inverse_cdf_buckets() {
        let w = [0.0, 1.0, 4.0];
        assert_eq!(d2_inverse_cdf(&w, 0.0), Some(1));
        assert_eq!(d2_inverse_cdf(&w, 0.1999), Some(1));
        assert_eq!(d2_inverse_cdf(&w, 0.2), Some(2));
        assert_eq!(d2_inverse_cdf(&w, 0.9999999), Some(2));
        assert_eq!(d2_inverse_cdf(&[0.0, 0.0], 0.5), None);
    }

    #[test]
    fn kmeanspp_two_distinct_points_are_forced() {
        let ds = line(&[3.0, 7.0]);
        for seed in 0..20 {
            let mut ids = seeds_kmeanspp(&ds, &ds.all_rows(), 2, &mut rng_from_seed(seed)).unwrap().ids;
            ids.sort();
            assert_eq!(ids, vec![0, 1]);
        }
    }

    #[test]
    fn kmeanspp_reports_distinct_locations() {
        let ds = line(&[1.0, 1.0, 2.0, 2.0]);
        match seeds_kmeanspp(&ds, &ds.all_rows(), 3, &mut rng_from_seed(0)) {
            Err(Error::TooFewDistinct { needed: 3, distinct: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn median_seeds_on_a_line() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0]);
        let set = seeds_median(&ds, &ds.all_rows(), 2).unwrap();
        assert_eq!(set.ids, vec![1, 2]);
        assert_eq!(set.centers, vec![vec![2.0], vec![3.0]]);
    }

    #[test]
    fn median_seeds_straddle_the_top_variance_axis() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 10.0], [1.0, 10.0]]).unwrap();
        let set = seeds_median(&ds, &ds.all_rows(), 2).unwrap();
        assert_eq!(set.ids, vec![0, 2]);
        assert_eq!(set.centers, vec![vec![0.0, 0.0], vec![0.0, 10.0]]);
    }

    #[test]
    fn median_seeds_errors() {
        let ds = line(&[1.0, 2.0, 3.0]);
        assert!(seeds_median(&ds, &ds.all_rows(), 3).is_err());
        let flat = line(&[5.0, 5.0, 5.0]);
        assert!(seeds_median(&flat, &flat.all_rows(), 2).is_err());
        let two = line(&[9.0, -1.0]);
        assert_eq!(seeds_median(&two, &two.all_rows(), 2).unwrap().ids, vec![1, 0]);
    }

    #[test]
    fn median_at_the_maximum() {
        let ds = line(&[5.0, 1.0, 5.0, 5.0]);
        let set = seeds_median(&ds, &ds.all_rows(), 2).unwrap();
        assert_eq!(set.ids, vec![1, 0]);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("kmeanspp".parse::<SeedKind>().unwrap(), SeedKind::KMeansPP);
        assert!("nope".parse::<SeedKind>().is_err());
        assert!(!SeedKind::Median.supports_fanout(3));
        assert!(SeedKind::Gnat.supports_fanout(3));
    }
}
