//! `ndpart`: generate datasets, partition them, benchmark the partitioners
//! and render 2-D results.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a runtime
//! failure such as unreadable input or a refused grid configuration.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndpart::bench::{emit_report, reference_datasets, report_csv, BenchConfig, DatasetSpec, ReportFormat, Scheme};
use ndpart::grid::{build_grid, grid_stats, GridConfig, DEFAULT_CUBE_CAP};
use ndpart::io::{load_assignment_csv, save_assignment_csv, write_assignment_csv};
use ndpart::{
    build_vtree, compute_metrics, generate_gaussian_mixture, generate_uniform, kd_partition, load_dataset,
    render_2d, save_dataset, CsvOptions, Dataset, DatasetFormat, Error, PartitionAssignment, SeedKind, VTreeConfig,
};

#[derive(Parser, Debug)]
#[command(name = "ndpart", version, about = "Partition high-dimensional point sets for parallel clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Partition one dataset with one scheme.
    Partition(PartitionArgs),
    /// Time the partitioners over a grid of datasets.
    Bench(BenchArgs),
    /// Draw a 2-D dataset coloured by partition as SVG.
    Render(RenderArgs),
    /// Build an n-cube grid and report its occupancy.
    GridStats(GridStatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DataFormat {
    Binary,
    Csv,
}

impl From<DataFormat> for DatasetFormat {
    fn from(f: DataFormat) -> Self {
        match f {
            DataFormat::Binary => DatasetFormat::Binary,
            DataFormat::Csv => DatasetFormat::Csv,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct CsvArgs {
    /// CSV files start with a header line.
    #[arg(long)]
    header: bool,
    /// The first CSV column holds point ids.
    #[arg(long)]
    id_column: bool,
    /// Dataset format; detected from the file's magic bytes when omitted.
    #[arg(long, value_enum)]
    data_format: Option<DataFormat>,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            header: self.header,
            id_column: self.id_column,
        }
    }

    fn load(&self, path: &Path) -> ndpart::Result<Dataset> {
        load_dataset(path, self.data_format.map(Into::into), self.options())
    }

    fn echo(&self, line: &mut String) {
        if self.header {
            line.push_str(" --header");
        }
        if self.id_column {
            line.push_str(" --id-column");
        }
        if let Some(f) = self.data_format {
            let _ = write!(line, " --data-format {}", value_name(f));
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Independent uniform coordinates in [lo, hi).
    #[arg(long, conflicts_with = "gaussian", required_unless_present = "gaussian")]
    uniform: bool,
    /// Gaussian mixture with `k` round-robin clusters.
    #[arg(long)]
    gaussian: bool,
    #[arg(short = 'n', long)]
    points: usize,
    #[arg(short = 'd', long)]
    dims: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    hi: f64,
    /// Cluster count for --gaussian.
    #[arg(short = 'k', long, default_value_t = 8)]
    clusters: usize,
    /// Per-coordinate standard deviation for --gaussian.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long)]
    output: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Kdtree,
    Vtree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SeedingArg {
    Random,
    Gnat,
    Kmeanspp,
    Median,
}

impl From<SeedingArg> for SeedKind {
    fn from(s: SeedingArg) -> Self {
        match s {
            SeedingArg::Random => SeedKind::Random,
            SeedingArg::Gnat => SeedKind::Gnat,
            SeedingArg::Kmeanspp => SeedKind::KMeansPP,
            SeedingArg::Median => SeedKind::Median,
        }
    }
}

#[derive(Args, Debug)]
struct PartitionArgs {
    #[arg(long, value_enum, default_value_t = SchemeArg::Vtree)]
    scheme: SchemeArg,
    /// Seeding strategy for the v_tree.
    #[arg(long, value_enum, default_value_t = SeedingArg::Kmeanspp)]
    seeding: SeedingArg,
    #[arg(short = 'm', long, default_value_t = 8)]
    partitions: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Centers per v_tree split.
    #[arg(long, default_value_t = 2)]
    fanout: usize,
    /// Per-level fanouts overriding --fanout, e.g. `3,2`.
    #[arg(long, value_delimiter = ',')]
    fanout_schedule: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'i', long)]
    input: PathBuf,
    /// Assignment CSV destination; stdout when omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Also write the partition tree as JSON.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Schemes: `kdtree`, `vtree[:seeding]`, `grid:<y>:<k>`.
    #[arg(long, value_delimiter = ',', default_values_t = ["kdtree".to_string(), "vtree:kmeanspp".to_string(), "vtree:median".to_string()])]
    schemes: Vec<String>,
    /// Generated Gaussian-mixture sizes as `NxD`; the reference grid when
    /// neither this nor --input is given.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<String>,
    /// Dataset files to benchmark instead of generated data.
    #[arg(short = 'i', long)]
    input: Vec<PathBuf>,
    /// Include the 40000x1024 dataset in the reference grid.
    #[arg(long)]
    large: bool,
    #[arg(short = 'm', long, value_delimiter = ',', default_values_t = [8usize])]
    partitions: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    fanout: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run independent cells concurrently, one core per cell.
    #[arg(long)]
    parallel_cells: bool,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Report destination; stdout when omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Directory for SVG renderings of 2-D cells.
    #[arg(long)]
    render_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(short = 'i', long)]
    input: PathBuf,
    /// Assignment CSV as written by `partition`.
    #[arg(short = 'a', long)]
    assignment: PathBuf,
    #[arg(short = 'o', long)]
    output: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args, Debug)]
struct GridStatsArgs {
    #[arg(short = 'i', long)]
    input: PathBuf,
    /// Splits per dimension.
    #[arg(short = 'y', long)]
    splits: u64,
    /// Split multiplier.
    #[arg(short = 'k', long, default_value_t = 1)]
    multiplier: u64,
    /// Largest cube count that will be built.
    #[arg(long, default_value_t = DEFAULT_CUBE_CAP)]
    cap: u64,
    /// Occupancy JSON destination; stdout when omitted.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvArgs,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    run(std::env::args_os())
}

fn run(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Partition(a) => partition(a),
        Command::Bench(a) => bench(a),
        Command::Render(a) => render(a),
        Command::GridStats(a) => grid_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn shell_path(p: &Path) -> String {
    let s = p.display().to_string();
    if s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-+=:".contains(c)) {
        s
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// Extension-based output format for generated datasets.
fn output_format(path: &Path, explicit: Option<DataFormat>) -> DatasetFormat {
    match explicit {
        Some(f) => f.into(),
        None if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => DatasetFormat::Csv,
        None => DatasetFormat::Binary,
    }
}

fn gen(a: GenArgs) -> CliResult {
    let mut line = String::from("ndpart gen");
    let ds = if a.gaussian {
        let _ = write!(
            line,
            " --gaussian -n {} -d {} -k {} --spread {} --seed {}",
            a.points, a.dims, a.clusters, a.spread, a.seed
        );
        generate_gaussian_mixture(a.points, a.dims, a.clusters, a.spread, a.seed)
    } else {
        let _ = write!(
            line,
            " --uniform -n {} -d {} --lo {} --hi {} --seed {}",
            a.points, a.dims, a.lo, a.hi, a.seed
        );
        generate_uniform(a.points, a.dims, a.lo, a.hi, a.seed)
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let _ = write!(line, " -o {}", shell_path(&a.output));
    a.csv.echo(&mut line);
    eprintln!("# {line}");
    save_dataset(&ds, &a.output, output_format(&a.output, a.csv.data_format), a.csv.options())?;
    Ok(())
}

fn partition(a: PartitionArgs) -> CliResult {
    if a.scheme == SchemeArg::Vtree {
        let kind = SeedKind::from(a.seeding);
        if let Some(bad) = std::iter::once(a.fanout)
            .chain(a.fanout_schedule.iter().copied())
            .find(|&f| !kind.supports_fanout(f))
        {
            return Err(Failure::Usage(format!("--fanout {bad} is not valid with --seeding {kind}")));
        }
    }
    if a.eps.is_nan() || a.eps < 0.0 {
        return Err(Failure::Usage(format!("--eps must be non-negative, got {}", a.eps)));
    }
    if a.partitions == 0 {
        return Err(Failure::Usage("-m must be at least 1".into()));
    }

    let mut line = format!("ndpart partition --scheme {}", value_name(a.scheme));
    if a.scheme == SchemeArg::Vtree {
        let _ = write!(line, " --seeding {} --fanout {}", value_name(a.seeding), a.fanout);
        if !a.fanout_schedule.is_empty() {
            let s: Vec<String> = a.fanout_schedule.iter().map(usize::to_string).collect();
            let _ = write!(line, " --fanout-schedule {}", s.join(","));
        }
        let _ = write!(line, " --seed {}", a.seed);
    }
    let _ = write!(line, " -m {} --eps {} -i {}", a.partitions, a.eps, shell_path(&a.input));
    if let Some(o) = &a.output {
        let _ = write!(line, " -o {}", shell_path(o));
    }
    if let Some(t) = &a.tree {
        let _ = write!(line, " --tree {}", shell_path(t));
    }
    a.csv.echo(&mut line);
    eprintln!("# {line}");

    let ds = a.csv.load(&a.input)?;
    let start = Instant::now();
    let (assignment, tree_json) = match a.scheme {
        SchemeArg::Kdtree => {
            let tree = kd_partition(&ds, a.partitions, a.eps)?;
            let json = serde_json::to_string_pretty(&tree.to_json()).map_err(Error::from)?;
            (tree.into_assignment(), json)
        }
        SchemeArg::Vtree => {
            let cfg = VTreeConfig::new(a.partitions, a.seeding.into(), a.seed)
                .with_fanout(a.fanout)
                .with_eps(a.eps)
                .with_schedule(a.fanout_schedule.clone());
            let tree = build_vtree(&ds, &cfg)?;
            let json = serde_json::to_string_pretty(&tree.to_json()).map_err(Error::from)?;
            (tree.into_assignment(), json)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();

    match &a.output {
        Some(path) => save_assignment_csv(&assignment, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_assignment_csv(&assignment, &mut lock)?;
            lock.flush()?;
        }
    }
    if let Some(path) = &a.tree {
        std::fs::write(path, tree_json).map_err(Error::at(path))?;
    }
    let metrics = compute_metrics(&assignment, elapsed);
    eprintln!(
        "# partitions={} bias={:.4} size_cv={:.4} affected={} seconds={:.6} sizes={:?}",
        assignment.partition_count(),
        metrics.bias,
        metrics.size_cv,
        metrics.affected_count,
        metrics.wall_time,
        metrics.sizes
    );
    Ok(())
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("dataset size {s:?} is not of the form NxD"));
    let (n, d) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?))
}

fn bench(a: BenchArgs) -> CliResult {
    let schemes = a
        .schemes
        .iter()
        .map(|s| s.parse::<Scheme>())
        .collect::<ndpart::Result<Vec<_>>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut datasets = Vec::new();
    for s in &a.sizes {
        let (n, d) = parse_size(s)?;
        datasets.push(DatasetSpec::Gaussian {
            n,
            d,
            clusters: ndpart::bench::DEFAULT_CLUSTERS,
            spread: 1.0,
        });
    }
    datasets.extend(a.input.iter().map(|p| DatasetSpec::File { path: p.clone() }));
    if datasets.is_empty() {
        datasets = reference_datasets(a.large);
    }
    let cfg = BenchConfig {
        datasets,
        schemes,
        partition_counts: a.partitions.clone(),
        fanout: a.fanout,
        eps: a.eps,
        repetitions: a.repetitions,
        seed: a.seed,
        parallel_cells: a.parallel_cells,
        output_dir: a.render_dir.clone(),
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let join = |v: Vec<String>| v.join(",");
    let mut line = format!(
        "ndpart bench --schemes {} -m {} --fanout {} --eps {} --repetitions {} --seed {} --format {}",
        join(a.schemes.clone()),
        join(a.partitions.iter().map(usize::to_string).collect()),
        a.fanout,
        a.eps,
        a.repetitions,
        a.seed,
        value_name(a.format)
    );
    if !a.sizes.is_empty() {
        let _ = write!(line, " --sizes {}", join(a.sizes.clone()));
    }
    for p in &a.input {
        let _ = write!(line, " -i {}", shell_path(p));
    }
    if a.large {
        line.push_str(" --large");
    }
    if a.parallel_cells {
        line.push_str(" --parallel-cells");
    }
    if let Some(o) = &a.output {
        let _ = write!(line, " -o {}", shell_path(o));
    }
    if let Some(d) = &a.render_dir {
        let _ = write!(line, " --render-dir {}", shell_path(d));
    }
    eprintln!("# {line}");

    let mut report = ndpart::bench::run_benchmark(&cfg)?;
    report.invocation = Some(line);
    let format = match a.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    };
    match &a.output {
        Some(path) => emit_report(&report, format, path)?,
        None => {
            let text = match format {
                ReportFormat::Json => serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n",
                ReportFormat::Csv => report_csv(&report),
            };
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn render(a: RenderArgs) -> CliResult {
    let mut line = format!(
        "ndpart render -i {} -a {} -o {}",
        shell_path(&a.input),
        shell_path(&a.assignment),
        shell_path(&a.output)
    );
    a.csv.echo(&mut line);
    eprintln!("# {line}");
    let ds = a.csv.load(&a.input)?;
    let assignment: PartitionAssignment = load_assignment_csv(&a.assignment, &ds)?;
    render_2d(&ds, &assignment, &a.output)?;
    Ok(())
}

fn grid_cmd(a: GridStatsArgs) -> CliResult {
    let mut line = format!(
        "ndpart grid-stats -i {} -y {} -k {} --cap {}",
        shell_path(&a.input),
        a.splits,
        a.multiplier,
        a.cap
    );
    if let Some(o) = &a.output {
        let _ = write!(line, " -o {}", shell_path(o));
    }
    a.csv.echo(&mut line);
    eprintln!("# {line}");
    let ds = a.csv.load(&a.input)?;
    let cfg = GridConfig::new(a.splits, a.multiplier, ds.dims()).map_err(|e| Failure::Usage(e.to_string()))?;
    let grid = build_grid(&ds, cfg, a.cap)?;
    let json = serde_json::to_string_pretty(&grid_stats(&grid)).map_err(Error::from)? + "\n";
    match &a.output {
        Some(path) => std::fs::write(path, json).map_err(Error::at(path))?,
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}
