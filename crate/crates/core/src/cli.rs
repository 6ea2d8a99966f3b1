//! `nnsky` command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 data or
//! format error, 4 I/O error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nnsky::bench::{self, Phase, SweepSpec, Workload};
use nnsky::oracle;
use nnsky::skyline::{run, Engine, Priority, RunOptions, SkylineResult};
use nnsky::{Error, Point, RTree, StoreConfig};

#[derive(Parser)]
#[command(name = "nnsky", version, about = "Spatial nearest neighbor skyline queries over R*-trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a uniform data set and query sets as points files.
    Gen(GenArgs),
    /// Build an R*-tree index file from a points file.
    Build(BuildArgs),
    /// Run a skyline query over built indexes.
    Query(QueryArgs),
    /// Check both engines against the brute-force oracle on random instances.
    Verify(VerifyArgs),
    /// Run a parameter sweep and write CSV and .dat files.
    Bench(BenchArgs),
}

#[derive(Args)]
struct StoreArgs {
    /// Block size in bytes.
    #[arg(long, default_value_t = 1024)]
    block_size: usize,
    /// Cached blocks per index.
    #[arg(long, env = "NNSKY_CACHE_BLOCKS", default_value_t = 512)]
    cache: usize,
}

impl StoreArgs {
    fn config(&self) -> StoreConfig {
        StoreConfig {
            block_size: self.block_size,
            cache_blocks: self.cache,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    /// Number of data points.
    #[arg(long)]
    n: usize,
    /// Number of query sets.
    #[arg(long)]
    m: usize,
    /// Points per query set.
    #[arg(long)]
    q: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    store: StoreArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Bbs,
    N2s2,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorityArg {
    LowerBound,
    Improved,
}

#[derive(Args)]
struct QueryArgs {
    /// Data index.
    #[arg(long)]
    data: PathBuf,
    /// Query index; repeat once per query set.
    #[arg(long = "query", required = true)]
    queries: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "n2s2")]
    engine: EngineArg,
    #[arg(long, value_enum, default_value = "improved")]
    priority: PriorityArg,
    #[command(flatten)]
    store: StoreArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    q: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[command(flatten)]
    store: StoreArgs,
    /// Flip the N²S² dominance test (negative control).
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Full,
    Desk,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = parse_phase)]
    phase: Phase,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    scale: Scale,
    /// Seeds per grid point (defaults to the scale's own count).
    #[arg(long)]
    seeds: Option<usize>,
    /// First seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    store: StoreArgs,
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Verify(String),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Engine(Error::Io(e))
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Engine(e)) => {
            eprintln!("nnsky: {e}");
            ExitCode::from(match e {
                Error::Usage(_) => 2,
                Error::Data(_) | Error::Format(_) => 3,
                Error::Io(_) => 4,
                Error::Invariant(_) => 1,
            })
        }
    }
}

fn write_points(path: &Path, points: &[Point]) -> Result<(), Failure> {
    let dims = points.first().map_or(2, Point::dims);
    let mut s = String::from("id");
    for k in 1..=dims {
        let _ = write!(s, ",x{k}");
    }
    s.push('\n');
    for p in points {
        let _ = write!(s, "{}", p.id);
        for c in &p.coords {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<Point>, Failure> {
    let text = fs::read_to_string(path)?;
    let bad = |line: usize, msg: &str| Error::Data(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let dims = cols.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=dims).map(|k| format!("x{k}")))
        .collect();
    if dims < 2 || cols != expected {
        return Err(bad(1, "header must be id,x1,...,xd with d >= 2").into());
    }
    let mut seen = std::collections::HashSet::new();
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dims + 1 {
            return Err(bad(i + 1, "wrong number of columns").into());
        }
        let id: u64 = fields[0].parse().map_err(|_| bad(i + 1, "bad id"))?;
        let coords = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| bad(i + 1, "bad coordinate"))?;
        if !seen.insert(id) {
            return Err(bad(i + 1, "duplicate id").into());
        }
        points.push(Point::new(id, coords));
    }
    if points.is_empty() {
        return Err(bad(2, "no points").into());
    }
    Ok(points)
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let ds = bench::generate(&Workload::new(a.seed, a.n, a.m, a.q))?;
    fs::create_dir_all(&a.out_dir)?;
    write_points(&a.out_dir.join("data.csv"), &ds.data)?;
    for (j, q) in ds.queries.iter().enumerate() {
        write_points(&a.out_dir.join(format!("q{}.csv", j + 1)), q)?;
    }
    println!(
        "wrote data.csv ({} points) and {} query sets of {} points to {}",
        a.n,
        a.m,
        a.q,
        a.out_dir.display()
    );
    Ok(())
}

fn cmd_build(a: BuildArgs) -> Result<(), Failure> {
    let points = read_points(&a.points)?;
    let tree = RTree::build_at(&a.index, a.store.config(), &points)?;
    let meta = tree.meta();
    println!("height: {}", meta.height);
    println!("nodes: {}", meta.node_count);
    println!("fanout: {}", meta.max_fanout);
    println!("min fanout: {}", meta.min_fanout);
    println!("points: {}", meta.len);
    Ok(())
}

fn render(r: &SkylineResult, engine: Engine) -> String {
    let mut s = String::new();
    let dims = r.entries.first().map_or(2, |e| e.point.dims());
    let m = r.entries.first().map_or(0, |e| e.attrs.len());
    s.push_str("id");
    for k in 1..=dims {
        let _ = write!(s, ",x{k}");
    }
    for j in 1..=m {
        let _ = write!(s, ",f{j}");
    }
    s.push('\n');
    for e in &r.entries {
        let _ = write!(s, "{}", e.point.id);
        for c in &e.point.coords {
            let _ = write!(s, ",{c}");
        }
        for v in &e.attrs.0 {
            let _ = write!(s, ",{v:.9}");
        }
        s.push('\n');
    }
    let mt = &r.metrics;
    let _ = writeln!(s, "\n# metrics");
    let _ = writeln!(s, "engine: {}", engine.name());
    let _ = writeln!(s, "skyline size: {}", r.entries.len());
    let _ = writeln!(s, "io logical: {}", mt.io_logical);
    let _ = writeln!(s, "io physical: {}", mt.io_physical);
    for (k, c) in mt.io.iter().enumerate() {
        let name = if k == 0 { "data".to_string() } else { format!("q{k}") };
        let _ = writeln!(
            s,
            "io {name}: {} logical, {} physical",
            c.logical_fetches, c.physical_reads
        );
    }
    let _ = writeln!(s, "heap insertions: {}", mt.heap_insertions);
    let _ = writeln!(s, "cpu time s: {:.6}", mt.cpu_time.as_secs_f64());
    let _ = writeln!(s, "wall time s: {:.6}", mt.wall_time.as_secs_f64());
    s
}

fn cmd_query(a: QueryArgs) -> Result<(), Failure> {
    let cfg = a.store.config();
    let mut data = RTree::open_path(&a.data, cfg)?;
    let mut queries = a
        .queries
        .iter()
        .map(|p| RTree::open_path(p, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let engine = match a.engine {
        EngineArg::Bbs => Engine::Bbs,
        EngineArg::N2s2 => Engine::N2s2,
    };
    let opts = RunOptions {
        priority: match a.priority {
            PriorityArg::LowerBound => Priority::LowerBound,
            PriorityArg::Improved => Priority::Improved,
        },
        ..RunOptions::default()
    };
    let r = run(engine, &mut data, &mut queries, &opts)?;
    print!("{}", render(&r, engine));
    Ok(())
}

/// Compares an engine result with the oracle; returns a description of the
/// first difference.
fn diff_against_oracle(r: &SkylineResult, truth: &oracle::OracleResult) -> Option<String> {
    let got: Vec<u64> = r.ids();
    let want: Vec<u64> = truth.skyline_ids.iter().copied().collect();
    if got != want {
        let first = got
            .iter()
            .zip(&want)
            .find(|(a, b)| a != b)
            .map(|(a, b)| (*a).min(*b))
            .or_else(|| got.get(want.len()).or(want.get(got.len())).copied())
            .unwrap_or_default();
        let side = if want.contains(&first) { "missing" } else { "unexpected" };
        return Some(format!(
            "first differing point id {first} ({side}); engine returned {} points, oracle {}",
            got.len(),
            want.len()
        ));
    }
    for e in &r.entries {
        let exact = &truth.attrs[&e.point.id];
        if e.attrs.0.iter().zip(&exact.0).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Some(format!(
                "first differing point id {}: attrs {:?} vs oracle {:?}",
                e.point.id, e.attrs.0, exact.0
            ));
        }
    }
    None
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    if a.trials == 0 {
        return Err(Error::Usage("--trials must be at least 1".into()).into());
    }
    let opts = RunOptions {
        fault_flip_dominance: a.inject_fault,
        ..RunOptions::default()
    };
    for t in 0..a.trials {
        let seed = a.seed + t as u64;
        let ds = bench::generate(&Workload::new(seed, a.n, a.m, a.q))?;
        let truth = oracle::oracle_run(&ds.data, &ds.queries)?;
        let dir = tempfile::tempdir()?;
        let mut trees = bench::build_trees(&ds, dir.path(), a.store.config())?;
        for engine in [Engine::Bbs, Engine::N2s2] {
            let r = run(engine, &mut trees.data, &mut trees.queries, &opts)?;
            if let Some(diff) = diff_against_oracle(&r, &truth) {
                println!("trial {t} seed {seed}: {} FAILED: {diff}", engine.name());
                return Err(Failure::Verify(format!(
                    "{} disagrees with the oracle on seed {seed}: {diff}",
                    engine.name()
                )));
            }
        }
        println!(
            "trial {t} seed {seed}: ok ({} skyline points)",
            truth.skyline_ids.len()
        );
    }
    println!("all {} trials passed", a.trials);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let mut spec = match a.scale {
        Scale::Full => SweepSpec::full(a.phase),
        Scale::Desk => SweepSpec::desk(a.phase),
    };
    let seeds = a.seeds.unwrap_or(spec.seeds.len());
    if seeds == 0 {
        return Err(Error::Usage("--seeds must be at least 1".into()).into());
    }
    spec.seeds = (a.seed..a.seed + seeds as u64).collect();
    spec.store = a.store.config();
    spec.workers = a.workers.max(1);
    let rows = bench::run_sweep(&spec, &[Engine::Bbs, Engine::N2s2])?;
    let files = bench::write_outputs(&spec, &rows, &a.out)?;
    println!("{:<6} {:>8} {:>12} {:>12} {:>10} {:>10}", "engine", "param", "io", "heap", "cpu s", "skyline");
    for p in bench::summarize(&rows) {
        println!(
            "{:<6} {:>8} {:>12.1} {:>12.1} {:>10.4} {:>10.1}",
            p.engine.name(),
            p.param,
            p.io_logical,
            p.heap_insertions,
            p.cpu_time_s,
            p.skyline_size
        );
    }
    println!("wrote {} files to {}", files.len(), a.out.display());
    Ok(())
}
