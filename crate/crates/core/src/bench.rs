//! Synthetic workloads and the parameter sweeps that compare the engines.
//!
//! A sweep fixes two of (data size, query-set size, number of sets) and
//! varies the third. Each (value, seed) pair gets freshly generated points,
//! freshly built trees, and one run per engine starting from cold caches.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{usage, Error, Result};
use crate::geometry::Point;
use crate::rstar::RTree;
use crate::skyline::{run, Engine, RunOptions, SkylineResult};
use crate::storage::StoreConfig;

pub const CSV_HEADER: &str =
    "phase,param,seed,engine,io_logical,io_physical,heap_insertions,cpu_time_s,wall_time_s,skyline_size";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distribution {
    /// Independent uniform coordinates on the unit hypercube.
    #[default]
    Uniform,
    /// Reserved; generation rejects it.
    Clustered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub seed: u64,
    pub n_data: usize,
    pub m: usize,
    pub n_query_per_set: usize,
    pub dims: usize,
    pub distribution: Distribution,
}

impl Workload {
    pub fn new(seed: u64, n_data: usize, m: usize, n_query_per_set: usize) -> Self {
        Self {
            seed,
            n_data,
            m,
            n_query_per_set,
            dims: 2,
            distribution: Distribution::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_data == 0 || self.m == 0 || self.n_query_per_set == 0 {
            return Err(usage!(
                "workload counts must be >= 1 (n={}, m={}, q={})",
                self.n_data,
                self.m,
                self.n_query_per_set
            ));
        }
        if self.dims < 2 {
            return Err(usage!("workload needs at least 2 dimensions"));
        }
        if self.distribution != Distribution::Uniform {
            return Err(usage!("only the uniform distribution is implemented"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: Vec<Point>,
    pub queries: Vec<Vec<Point>>,
}

/// Deterministic points for `w`. Data and each query set draw from separate
/// ChaCha streams of the same seed, so changing one count leaves the other
/// sets' coordinate streams intact.
pub fn generate(w: &Workload) -> Result<Dataset> {
    w.validate()?;
    let draw = |stream: u64, n: usize| -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(w.seed);
        rng.set_stream(stream);
        (0..n as u64)
            .map(|id| Point::new(id, (0..w.dims).map(|_| rng.gen::<f64>())))
            .collect()
    };
    Ok(Dataset {
        data: draw(0, w.n_data),
        queries: (0..w.m).map(|j| draw(j as u64 + 1, w.n_query_per_set)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    QuerySize,
    DataSize,
    SetCount,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::QuerySize, Phase::DataSize, Phase::SetCount];

    pub fn name(self) -> &'static str {
        match self {
            Phase::QuerySize => "query_size",
            Phase::DataSize => "data_size",
            Phase::SetCount => "set_count",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| usage!("unknown phase {s:?} (expected query_size, data_size or set_count)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub phase: Phase,
    /// Fixed values; the one named by `phase` is ignored.
    pub n_data: usize,
    pub m: usize,
    pub n_query_per_set: usize,
    pub values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub store: StoreConfig,
    pub options: RunOptions,
    /// Worker threads; each runs one (value, seed) point at a time.
    pub workers: usize,
}

impl SweepSpec {
    fn with(phase: Phase, n_data: usize, m: usize, q: usize, values: Vec<usize>, seeds: usize) -> Self {
        Self {
            phase,
            n_data,
            m,
            n_query_per_set: q,
            values,
            seeds: (1..=seeds as u64).collect(),
            store: StoreConfig::default(),
            options: RunOptions::default(),
            workers: 1,
        }
    }

    /// 20000 data points, two sets, 10000 to 25000 query points per set.
    pub fn full_query_size() -> Self {
        Self::with(Phase::QuerySize, 20_000, 2, 0, vec![10_000, 15_000, 20_000, 25_000], 1)
    }

    /// Two sets of 10000 query points, 10000 to 100000 data points.
    pub fn full_data_size() -> Self {
        Self::with(Phase::DataSize, 0, 2, 10_000, vec![10_000, 25_000, 50_000, 100_000], 1)
    }

    pub fn full_set_count() -> Self {
        Self::with(Phase::SetCount, 20_000, 0, 10_000, vec![1, 2, 3, 4], 1)
    }

    pub fn desk_query_size() -> Self {
        Self::with(Phase::QuerySize, 5_000, 2, 0, vec![1_000, 2_500, 5_000, 10_000], 5)
    }

    pub fn desk_data_size() -> Self {
        Self::with(Phase::DataSize, 0, 2, 1_000, vec![2_000, 5_000, 10_000, 20_000], 5)
    }

    pub fn desk_set_count() -> Self {
        Self::with(Phase::SetCount, 2_000, 0, 1_000, vec![1, 2, 3], 5)
    }

    pub fn full(phase: Phase) -> Self {
        match phase {
            Phase::QuerySize => Self::full_query_size(),
            Phase::DataSize => Self::full_data_size(),
            Phase::SetCount => Self::full_set_count(),
        }
    }

    pub fn desk(phase: Phase) -> Self {
        match phase {
            Phase::QuerySize => Self::desk_query_size(),
            Phase::DataSize => Self::desk_data_size(),
            Phase::SetCount => Self::desk_set_count(),
        }
    }

    pub fn workload(&self, value: usize, seed: u64) -> Workload {
        let (mut n, mut m, mut q) = (self.n_data, self.m, self.n_query_per_set);
        match self.phase {
            Phase::QuerySize => q = value,
            Phase::DataSize => n = value,
            Phase::SetCount => m = value,
        }
        Workload::new(seed, n, m, q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.seeds.is_empty() {
            return Err(usage!("a sweep needs at least one value and one seed"));
        }
        for &v in &self.values {
            self.workload(v, 0).validate()?;
        }
        self.store.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub phase: Phase,
    pub param: usize,
    pub seed: u64,
    pub engine: Engine,
    pub io_logical: u64,
    pub io_physical: u64,
    pub heap_insertions: u64,
    pub cpu_time_s: f64,
    pub wall_time_s: f64,
    pub skyline_size: usize,
}

impl SweepRow {
    fn from_result(phase: Phase, param: usize, seed: u64, engine: Engine, r: &SkylineResult) -> Self {
        Self {
            phase,
            param,
            seed,
            engine,
            io_logical: r.metrics.io_logical,
            io_physical: r.metrics.io_physical,
            heap_insertions: r.metrics.heap_insertions,
            cpu_time_s: r.metrics.cpu_time.as_secs_f64(),
            wall_time_s: r.metrics.wall_time.as_secs_f64(),
            skyline_size: r.entries.len(),
        }
    }
}

/// Trees for one dataset, built under `dir` with counters reset.
pub struct BuiltTrees {
    pub data: RTree,
    pub queries: Vec<RTree>,
}

pub fn build_trees(ds: &Dataset, dir: &Path, store: StoreConfig) -> Result<BuiltTrees> {
    let data = RTree::build_at(dir.join("data.idx"), store, &ds.data)?;
    let queries = ds
        .queries
        .iter()
        .enumerate()
        .map(|(j, q)| RTree::build_at(dir.join(format!("q{}.idx", j + 1)), store, q))
        .collect::<Result<Vec<_>>>()?;
    Ok(BuiltTrees { data, queries })
}

/// Runs every engine on one generated workload. Fails if the engines
/// disagree on the skyline.
pub fn run_point(
    w: &Workload,
    store: StoreConfig,
    engines: &[Engine],
    options: &RunOptions,
) -> Result<Vec<SkylineResult>> {
    let ds = generate(w)?;
    let dir = tempfile::tempdir()?;
    let mut trees = build_trees(&ds, dir.path(), store)?;
    let mut results: Vec<SkylineResult> = Vec::with_capacity(engines.len());
    for &engine in engines {
        let r = run(engine, &mut trees.data, &mut trees.queries, options)?;
        if let Some(first) = results.first() {
            if first.ids() != r.ids() {
                return Err(Error::Invariant(format!(
                    "engines disagree on seed {} (n={}, m={}, q={}): {} vs {} points",
                    w.seed,
                    w.n_data,
                    w.m,
                    w.n_query_per_set,
                    first.entries.len(),
                    r.entries.len()
                )));
            }
        }
        results.push(r);
    }
    Ok(results)
}

pub fn run_sweep(spec: &SweepSpec, engines: &[Engine]) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    if engines.is_empty() {
        return Err(usage!("no engines selected"));
    }
    let jobs: Vec<(usize, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let one = |&(value, seed): &(usize, u64)| -> Result<Vec<SweepRow>> {
        let w = spec.workload(value, seed);
        let results = run_point(&w, spec.store, engines, &spec.options)?;
        Ok(engines
            .iter()
            .zip(&results)
            .map(|(&e, r)| SweepRow::from_result(spec.phase, value, seed, e, r))
            .collect())
    };
    let per_job: Vec<Result<Vec<SweepRow>>> = if spec.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(one).collect())
    } else {
        jobs.iter().map(one).collect()
    };
    let mut rows = Vec::new();
    for r in per_job {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Renders rows under [`CSV_HEADER`]. With `with_times = false` the two time
/// columns are left empty so that output can be compared byte for byte.
pub fn to_csv(rows: &[SweepRow], with_times: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (cpu, wall) = if with_times {
            (format!("{:.6}", r.cpu_time_s), format!("{:.6}", r.wall_time_s))
        } else {
            (String::new(), String::new())
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.phase,
            r.param,
            r.seed,
            r.engine.name(),
            r.io_logical,
            r.io_physical,
            r.heap_insertions,
            cpu,
            wall,
            r.skyline_size
        );
    }
    out
}

/// Per-(engine, param) means over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub phase: Phase,
    pub engine: Engine,
    pub param: usize,
    pub runs: usize,
    pub io_logical: f64,
    pub io_physical: f64,
    pub heap_insertions: f64,
    pub cpu_time_s: f64,
    pub wall_time_s: f64,
    pub skyline_size: f64,
}

impl PointSummary {
    pub const METRICS: [&'static str; 6] = [
        "io_logical",
        "io_physical",
        "heap_insertions",
        "cpu_time_s",
        "wall_time_s",
        "skyline_size",
    ];

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "io_logical" => self.io_logical,
            "io_physical" => self.io_physical,
            "heap_insertions" => self.heap_insertions,
            "cpu_time_s" => self.cpu_time_s,
            "wall_time_s" => self.wall_time_s,
            "skyline_size" => self.skyline_size,
            _ => return None,
        })
    }
}

/// Ordered by engine name, then param.
pub fn summarize(rows: &[SweepRow]) -> Vec<PointSummary> {
    let mut groups: BTreeMap<(&'static str, usize), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.engine.name(), r.param)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let n = g.len() as f64;
            let mean = |f: fn(&SweepRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            PointSummary {
                phase: g[0].phase,
                engine: g[0].engine,
                param: g[0].param,
                runs: g.len(),
                io_logical: mean(|r| r.io_logical as f64),
                io_physical: mean(|r| r.io_physical as f64),
                heap_insertions: mean(|r| r.heap_insertions as f64),
                cpu_time_s: mean(|r| r.cpu_time_s),
                wall_time_s: mean(|r| r.wall_time_s),
                skyline_size: mean(|r| r.skyline_size as f64),
            }
        })
        .collect()
}

/// Writes `<phase>.csv`, `<phase>_summary.csv` and one
/// `<phase>_<engine>_<metric>.dat` per metric. Returns the paths written.
pub fn write_outputs(spec: &SweepSpec, rows: &[SweepRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let phase = spec.phase.name();
    let mut written = Vec::new();

    let csv = out_dir.join(format!("{phase}.csv"));
    std::fs::write(&csv, to_csv(rows, true))?;
    written.push(csv);

    let summary = summarize(rows);
    let mut s = String::from(
        "phase,engine,param,n_data,m,n_query_per_set,runs,io_logical,io_physical,heap_insertions,cpu_time_s,wall_time_s,skyline_size\n",
    );
    for p in &summary {
        let w = spec.workload(p.param, 0);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.6},{:.6},{:.3}",
            phase,
            p.engine.name(),
            p.param,
            w.n_data,
            w.m,
            w.n_query_per_set,
            p.runs,
            p.io_logical,
            p.io_physical,
            p.heap_insertions,
            p.cpu_time_s,
            p.wall_time_s,
            p.skyline_size
        );
    }
    let path = out_dir.join(format!("{phase}_summary.csv"));
    std::fs::write(&path, s)?;
    written.push(path);

    let mut engines: Vec<Engine> = summary.iter().map(|p| p.engine).collect();
    engines.dedup();
    for engine in engines {
        for metric in PointSummary::METRICS {
            let mut dat = format!("# {phase} {} {metric}\n# param mean\n", engine.name());
            for p in summary.iter().filter(|p| p.engine == engine) {
                let _ = writeln!(dat, "{} {}", p.param, p.metric(metric).unwrap());
            }
            let path = out_dir.join(format!("{phase}_{}_{metric}.dat", engine.name()));
            std::fs::write(&path, dat)?;
            written.push(path);
        }
    }
    Ok(written)
}
