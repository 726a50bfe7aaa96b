//! Benchmark harness: times each partitioner over a grid of datasets and
//! partition counts and collects balance, affected-point and work counters.
//!
//! Timed regions cover partitioning only; data generation and I/O happen
//! before the clock starts. Each cell is repeated and the median time kept.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::{worker_threads, Execution};
use crate::generate::{generate_gaussian_mixture, generate_uniform};
use crate::grid::{build_grid, grid_stats, GridConfig, GridOccupancy, DEFAULT_CUBE_CAP};
use crate::io::{load_dataset, CsvOptions};
use crate::kdtree::kd_partition;
use crate::metrics::{compute_metrics, PartitionMetrics, ScanCounters};
use crate::render::render_2d;
use crate::seeding::SeedKind;
use crate::vtree::{build_vtree_with, VTreeConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Gaussian-mixture cluster count used by generated benchmark datasets.
pub const DEFAULT_CLUSTERS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Uniform { n: usize, d: usize },
    Gaussian { n: usize, d: usize, clusters: usize, spread: f64 },
    File { path: PathBuf },
}

impl DatasetSpec {
    pub fn label(&self) -> String {
        match self {
            DatasetSpec::Uniform { n, d } => format!("uniform {n}x{d}"),
            DatasetSpec::Gaussian { n, d, .. } => format!("{n}x{d}"),
            DatasetSpec::File { path } => path.display().to_string(),
        }
    }

    /// Generated datasets use `seed`; files are loaded with auto-detection.
    pub fn materialize(&self, seed: u64) -> Result<Dataset> {
        match *self {
            DatasetSpec::Uniform { n, d } => generate_uniform(n, d, 0.0, 1.0, seed),
            DatasetSpec::Gaussian { n, d, clusters, spread } => {
                generate_gaussian_mixture(n, d, clusters.min(n), spread, seed)
            }
            DatasetSpec::File { ref path } => load_dataset(path, None, CsvOptions::default()),
        }
    }
}

/// The datasets of the reference performance table; the 40000x1024 set is
/// only included when `large` is set.
pub fn reference_datasets(large: bool) -> Vec<DatasetSpec> {
    let mut sizes = vec![(700, 9), (1500, 1024), (4000, 1024)];
    if large {
        sizes.push((40000, 1024));
    }
    sizes
        .into_iter()
        .map(|(n, d)| DatasetSpec::Gaussian {
            n,
            d,
            clusters: DEFAULT_CLUSTERS,
            spread: 1.0,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum Scheme {
    KdTree,
    VTree { seeding: SeedKind },
    Grid { y: u64, k: u64 },
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::KdTree => f.write_str("kdtree"),
            Scheme::VTree { seeding } => write!(f, "vtree({seeding})"),
            Scheme::Grid { y, k } => write!(f, "grid(y={y},k={k})"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    /// Accepts `kdtree`, `vtree` (k-means++), `vtree:<seeding>` and
    /// `grid:<y>:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["kdtree"] => Ok(Scheme::KdTree),
            ["vtree"] => Ok(Scheme::VTree {
                seeding: SeedKind::KMeansPP,
            }),
            ["vtree", kind] => Ok(Scheme::VTree { seeding: kind.parse()? }),
            ["grid", y, k] => Ok(Scheme::Grid {
                y: y.parse().map_err(|_| Error::invalid(format!("bad grid y {y:?}")))?,
                k: k.parse().map_err(|_| Error::invalid(format!("bad grid k {k:?}")))?,
            }),
            _ => Err(Error::invalid(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSpec>,
    pub schemes: Vec<Scheme>,
    pub partition_counts: Vec<usize>,
    pub fanout: usize,
    pub eps: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub parallel_cells: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            datasets: reference_datasets(false),
            schemes: vec![
                Scheme::KdTree,
                Scheme::VTree {
                    seeding: SeedKind::KMeansPP,
                },
                Scheme::VTree {
                    seeding: SeedKind::Median,
                },
            ],
            partition_counts: vec![8],
            fanout: 2,
            eps: 0.0,
            repetitions: 5,
            seed: 0,
            parallel_cells: false,
            output_dir: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.datasets.is_empty() || self.schemes.is_empty() {
            return Err(Error::invalid("at least one dataset and one scheme are required"));
        }
        if self.partition_counts.is_empty() && self.schemes.iter().any(|s| !matches!(s, Scheme::Grid { .. })) {
            return Err(Error::invalid("at least one partition count is required"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok {
        median_seconds: f64,
        times: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metrics: Option<PartitionMetrics>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        counters: Option<ScanCounters>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        occupancy: Option<GridOccupancy>,
    },
    Failed {
        reason: String,
        marker: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scheme: String,
    pub dataset: String,
    /// `None` for grid cells, which do not partition.
    pub partitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeding: Option<SeedKind>,
    pub outcome: CellOutcome,
}

impl CellReport {
    pub fn median_seconds(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Ok { median_seconds, .. } => Some(median_seconds),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn metrics(&self) -> Option<&PartitionMetrics> {
        match &self.outcome {
            CellOutcome::Ok { metrics, .. } => metrics.as_ref(),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn counters(&self) -> Option<&ScanCounters> {
        match &self.outcome {
            CellOutcome::Ok { counters, .. } => counters.as_ref(),
            CellOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub cores: usize,
    pub worker_threads: usize,
    pub parallel_feature: bool,
    pub debug_assertions: bool,
    pub crate_version: String,
    pub timestamp_unix: u64,
}

impl Environment {
    pub fn capture() -> Self {
        Self {
            cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
            worker_threads: worker_threads(),
            parallel_feature: cfg!(feature = "parallel"),
            debug_assertions: cfg!(debug_assertions),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub environment: Environment,
    /// Command line that produced the report, when run from the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invocation: Option<String>,
    pub config: BenchConfig,
    pub cells: Vec<CellReport>,
}

impl BenchReport {
    pub fn cell(&self, scheme: &str, dataset: &str, partitions: Option<usize>) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.dataset == dataset && c.partitions == partitions)
    }
}

struct CellJob<'a> {
    dataset: &'a Dataset,
    label: String,
    scheme: Scheme,
    partitions: Option<usize>,
}

/// Runs every (dataset, partition count, scheme) cell. Failures are recorded
/// in the cell and do not stop the run.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let datasets: Vec<(String, Result<Dataset>)> = cfg
        .datasets
        .iter()
        .map(|spec| (spec.label(), spec.materialize(cfg.seed)))
        .collect();

    let mut cells = Vec::new();
    let mut jobs = Vec::new();
    for (label, ds) in &datasets {
        for &scheme in &cfg.schemes {
            let counts: Vec<Option<usize>> = match scheme {
                Scheme::Grid { .. } => vec![None],
                _ => cfg.partition_counts.iter().map(|&m| Some(m)).collect(),
            };
            for partitions in counts {
                match ds {
                    Ok(ds) => jobs.push(CellJob {
                        dataset: ds,
                        label: label.clone(),
                        scheme,
                        partitions,
                    }),
                    Err(e) => cells.push(failed_cell(scheme, label, partitions, e)),
                }
            }
        }
    }

    cells.extend(run_jobs(cfg, &jobs));
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        environment: Environment::capture(),
        invocation: None,
        config: cfg.clone(),
        cells,
    })
}

#[cfg(feature = "parallel")]
fn run_jobs(cfg: &BenchConfig, jobs: &[CellJob<'_>]) -> Vec<CellReport> {
    use rayon::prelude::*;
    if !cfg.parallel_cells {
        return jobs.iter().map(|j| run_cell(cfg, j, Execution::default())).collect();
    }
    // One thread per concurrently timed cell, never more cells than cores.
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match rayon::ThreadPoolBuilder::new().num_threads(cores).build() {
        Ok(pool) => pool.install(|| {
            jobs.par_iter()
                .map(|j| run_cell(cfg, j, Execution::Sequential))
                .collect()
        }),
        Err(_) => jobs.iter().map(|j| run_cell(cfg, j, Execution::Sequential)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_jobs(cfg: &BenchConfig, jobs: &[CellJob<'_>]) -> Vec<CellReport> {
    jobs.iter().map(|j| run_cell(cfg, j, Execution::default())).collect()
}

fn failed_cell(scheme: Scheme, dataset: &str, partitions: Option<usize>, err: &Error) -> CellReport {
    let marker = match err {
        Error::GridRefused { cubes, .. } => format!("REFUSED(M={cubes})"),
        Error::TooManyPartitions { .. } => "FAILED(m>N)".to_string(),
        _ => "FAILED".to_string(),
    };
    CellReport {
        scheme: scheme.to_string(),
        dataset: dataset.to_string(),
        partitions,
        seeding: seeding_of(scheme),
        outcome: CellOutcome::Failed {
            reason: err.to_string(),
            marker,
        },
    }
}

fn seeding_of(scheme: Scheme) -> Option<SeedKind> {
    match scheme {
        Scheme::VTree { seeding } => Some(seeding),
        _ => None,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn run_cell(cfg: &BenchConfig, job: &CellJob<'_>, exec: Execution) -> CellReport {
    match time_cell(cfg, job, exec) {
        Ok(outcome) => CellReport {
            scheme: job.scheme.to_string(),
            dataset: job.label.clone(),
            partitions: job.partitions,
            seeding: seeding_of(job.scheme),
            outcome,
        },
        Err(e) => failed_cell(job.scheme, &job.label, job.partitions, &e),
    }
}

fn time_cell(cfg: &BenchConfig, job: &CellJob<'_>, exec: Execution) -> Result<CellOutcome> {
    let ds = job.dataset;
    let mut times = Vec::with_capacity(cfg.repetitions);
    let mut metrics = None;
    let mut counters = None;
    let mut occupancy = None;
    let mut assignment = None;
    for _ in 0..cfg.repetitions {
        match job.scheme {
            Scheme::KdTree => {
                let m = job.partitions.unwrap_or(1);
                let start = Instant::now();
                let tree = kd_partition(ds, m, cfg.eps)?;
                times.push(start.elapsed().as_secs_f64());
                metrics = Some(compute_metrics(tree.assignment(), 0.0));
                counters = Some(*tree.counters());
                assignment = Some(tree.into_assignment());
            }
            Scheme::VTree { seeding } => {
                let m = job.partitions.unwrap_or(1);
                let vcfg = VTreeConfig::new(m, seeding, cfg.seed)
                    .with_fanout(cfg.fanout)
                    .with_eps(cfg.eps);
                let start = Instant::now();
                let tree = build_vtree_with(ds, &vcfg, exec)?;
                times.push(start.elapsed().as_secs_f64());
                metrics = Some(compute_metrics(tree.leaf_assignment(), 0.0));
                counters = Some(*tree.counters());
                assignment = Some(tree.into_assignment());
            }
            Scheme::Grid { y, k } => {
                let gcfg = GridConfig::new(y, k, ds.dims())?;
                let start = Instant::now();
                let grid = build_grid(ds, gcfg, DEFAULT_CUBE_CAP)?;
                times.push(start.elapsed().as_secs_f64());
                occupancy = Some(grid_stats(&grid));
            }
        }
    }
    if let (Some(dir), Some(a)) = (&cfg.output_dir, &assignment) {
        if ds.dims() == 2 {
            std::fs::create_dir_all(dir).map_err(Error::at(dir))?;
            render_2d(ds, a, &dir.join(render_file_name(job)))?;
        }
    }
    let median_seconds = median(&times);
    if let Some(m) = metrics.as_mut() {
        m.wall_time = median_seconds;
    }
    Ok(CellOutcome::Ok {
        median_seconds,
        times,
        metrics,
        counters,
        occupancy,
    })
}

/// `<scheme>_<dataset>_m<m>.svg` with every run of non-alphanumeric
/// characters collapsed to one underscore.
fn render_file_name(job: &CellJob<'_>) -> String {
    let raw = format!("{}_{}_m{}", job.scheme, job.label, job.partitions.unwrap_or(0));
    let mut name = String::with_capacity(raw.len() + 4);
    for c in raw.chars() {
        if c.is_ascii_alphanumeric() {
            name.push(c);
        } else if !name.ends_with('_') {
            name.push('_');
        }
    }
    let mut name = name.trim_end_matches('_').to_string();
    name.push_str(".svg");
    name
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn emit_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(Error::at(path))?);
    match format {
        ReportFormat::Json => serde_json::to_writer_pretty(&mut file, report)?,
        ReportFormat::Csv => file.write_all(report_csv(report).as_bytes())?,
    }
    file.flush()?;
    Ok(())
}

/// One row per scheme, one column per dataset (and partition count when
/// several are benchmarked); cells hold the median seconds or a failure
/// marker.
pub fn report_csv(report: &BenchReport) -> String {
    let multi_m = report.config.partition_counts.len() > 1;
    let column = |c: &CellReport| match (multi_m, c.partitions) {
        (true, Some(m)) => format!("{} m={m}", c.dataset),
        _ => c.dataset.clone(),
    };
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let mut values: BTreeMap<(String, String), String> = BTreeMap::new();
    for c in &report.cells {
        let col = column(c);
        if !columns.contains(&col) {
            columns.push(col.clone());
        }
        if !rows.contains(&c.scheme) {
            rows.push(c.scheme.clone());
        }
        let v = match &c.outcome {
            CellOutcome::Ok { median_seconds, .. } => format!("{median_seconds:.6}"),
            CellOutcome::Failed { marker, .. } => marker.clone(),
        };
        values.insert((c.scheme.clone(), col), v);
    }
    let quote = |s: &str| {
        if s.contains(',') || s.contains('"') {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let mut out = String::from("scheme");
    for col in &columns {
        out.push(',');
        out.push_str(&quote(col));
    }
    out.push('\n');
    for row in &rows {
        out.push_str(&quote(row));
        for col in &columns {
            out.push(',');
            if let Some(v) = values.get(&(row.clone(), col.clone())) {
                out.push_str(&quote(v));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> BenchConfig {
        BenchConfig {
            datasets: vec![
                DatasetSpec::Gaussian {
                    n: 200,
                    d: 4,
                    clusters: 4,
                    spread: 0.5,
                },
                DatasetSpec::Uniform { n: 100, d: 64 },
            ],
            schemes: vec![
                Scheme::KdTree,
                Scheme::VTree {
                    seeding: SeedKind::KMeansPP,
                },
                Scheme::Grid { y: 2, k: 1 },
            ],
            partition_counts: vec![4],
            repetitions: 2,
            seed: 3,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("kdtree".parse::<Scheme>().unwrap(), Scheme::KdTree);
        assert_eq!(
            "vtree:median".parse::<Scheme>().unwrap(),
            Scheme::VTree {
                seeding: SeedKind::Median
            }
        );
        assert_eq!("grid:2:1".parse::<Scheme>().unwrap(), Scheme::Grid { y: 2, k: 1 });
        assert!("grid:2".parse::<Scheme>().is_err());
        assert_eq!(Scheme::VTree { seeding: SeedKind::Gnat }.to_string(), "vtree(gnat)");
    }

    #[test]
    fn every_cell_is_present() {
        let report = run_benchmark(&small_config()).unwrap();
        assert_eq!(report.cells.len(), 6);
        let refused = report.cell("grid(y=2,k=1)", "uniform 100x64", None).unwrap();
        match &refused.outcome {
            CellOutcome::Failed { marker, .. } => assert_eq!(marker, "REFUSED(M=3^64)"),
            other => panic!("expected refusal, got {other:?}"),
        }
        let kd = report.cell("kdtree", "200x4", Some(4)).unwrap();
        assert_eq!(kd.metrics().unwrap().sizes.iter().sum::<usize>(), 200);
        assert!(report.cell("grid(y=2,k=1)", "200x4", None).unwrap().median_seconds().is_some());
    }

    #[test]
    fn outputs_are_reproducible() {
        let strip = |r: BenchReport| -> Vec<(String, Option<PartitionMetrics>)> {
            r.cells
                .into_iter()
                .map(|c| {
                    let m = c.metrics().cloned().map(|mut m| {
                        m.wall_time = 0.0;
                        m
                    });
                    (c.scheme, m)
                })
                .collect()
        };
        let a = strip(run_benchmark(&small_config()).unwrap());
        let b = strip(run_benchmark(&small_config()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn csv_layout_and_json_round_trip() {
        let report = run_benchmark(&small_config()).unwrap();
        let csv = report_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "scheme,200x4,uniform 100x64");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("\"grid(y=2,k=1)\","));
        assert!(lines[3].ends_with(",REFUSED(M=3^64)"));

        let json = serde_json::to_string(&report).unwrap();
        let back: BenchReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = small_config();
        cfg.repetitions = 0;
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = small_config();
        cfg.schemes.clear();
        assert!(run_benchmark(&cfg).is_err());
    }

    #[test]
    fn failing_partitions_are_recorded() {
        let mut cfg = small_config();
        cfg.partition_counts = vec![150];
        let report = run_benchmark(&cfg).unwrap();
        let cell = report.cell("kdtree", "uniform 100x64", Some(150)).unwrap();
        assert!(matches!(cell.outcome, CellOutcome::Failed { .. }));
    }

    #[test]
    fn two_dimensional_cells_are_rendered() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = BenchConfig {
            datasets: vec![DatasetSpec::Uniform { n: 50, d: 2 }, DatasetSpec::Uniform { n: 50, d: 3 }],
            schemes: vec![Scheme::KdTree, Scheme::VTree { seeding: SeedKind::Gnat }],
            partition_counts: vec![4],
            repetitions: 1,
            output_dir: Some(dir.path().to_path_buf()),
            ..BenchConfig::default()
        };
        run_benchmark(&cfg).unwrap();
        let mut names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["kdtree_uniform_50x2_m4.svg", "vtree_gnat_uniform_50x2_m4.svg"]);
    }

    #[test]
    fn median_of_times() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
