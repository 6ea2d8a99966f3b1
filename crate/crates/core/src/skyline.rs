//! Dominance, nearest-neighbour attributes, and what a skyline run reports.

use std::time::{Duration, Instant};

use crate::error::{usage, Error, Result};
use crate::geometry::Point;
use crate::rstar::RTree;
use crate::storage::{BlockId, IoCounters};

/// Per-point attribute vector: entry `j` is the distance to the nearest
/// point of query set `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrTuple(pub Vec<f64>);

impl AttrTuple {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `a` dominates `b`: no worse anywhere and strictly better somewhere.
pub fn dominates(a: &AttrTuple, b: &AttrTuple) -> Result<bool> {
    if a.len() != b.len() {
        return Err(usage!("attribute tuples of length {} and {}", a.len(), b.len()));
    }
    Ok(dominates_slice(&a.0, &b.0))
}

pub(crate) fn dominates_slice(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Distance from `p` to its nearest point in `tree`, by best-first search
/// from the root.
pub fn nn_distance(p: &Point, tree: &mut RTree) -> Result<f64> {
    if tree.is_empty() {
        return Err(usage!("query tree is empty"));
    }
    Ok(tree.nearest(&p.mbr())?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Priority {
    /// Sum of the per-list minimum MinMindist; a true lower bound.
    LowerBound,
    /// Sum of minimum MinMindist and minimum MaxMaxdist per list.
    #[default]
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Bbs,
    N2s2,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Bbs => "bbs",
            Engine::N2s2 => "n2s2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Priority used by N²S²; BBS always uses its lower bound.
    pub priority: Priority,
    /// Candidate-list pruning in N²S² (skip during fill and reconfiguration).
    pub pruning: bool,
    /// Record every search state the engine creates.
    pub trace: bool,
    #[doc(hidden)]
    pub fault_flip_dominance: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            priority: Priority::Improved,
            pruning: true,
            trace: false,
            fault_flip_dominance: false,
        }
    }
}

/// What a traced state was attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOwner {
    Node(BlockId),
    Point(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub owner: TraceOwner,
    /// Per-set lower bounds used for dominance (minminmindist for N²S²).
    pub lower: Vec<f64>,
    /// Per-set minmaxmaxdist; empty for BBS.
    pub upper: Vec<f64>,
    /// The parent state's lower bounds, if the state had a parent.
    pub parent_lower: Option<Vec<f64>>,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    /// Data tree first, then one entry per query tree.
    pub io: Vec<IoCounters>,
    pub io_logical: u64,
    pub io_physical: u64,
    pub heap_insertions: u64,
    pub cpu_time: Duration,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkylineEntry {
    pub point: Point,
    pub attrs: AttrTuple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkylineResult {
    /// Sorted by point id.
    pub entries: Vec<SkylineEntry>,
    pub metrics: RunMetrics,
    pub trace: Vec<TraceRecord>,
}

impl SkylineResult {
    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.point.id).collect()
    }
}

/// Runs `engine` on a data tree and its query trees.
pub fn run(
    engine: Engine,
    data: &mut RTree,
    queries: &mut [RTree],
    opts: &RunOptions,
) -> Result<SkylineResult> {
    match engine {
        Engine::Bbs => crate::bbs::bbs_run(data, queries, opts),
        Engine::N2s2 => crate::n2s2::n2s2_run(data, queries, opts),
    }
}

pub(crate) fn check_inputs(data: &RTree, queries: &[RTree]) -> Result<()> {
    if queries.is_empty() {
        return Err(usage!("at least one query set is required"));
    }
    if data.is_empty() || queries.iter().any(RTree::is_empty) {
        return Err(usage!("every tree must hold at least one point"));
    }
    if let Some(q) = queries.iter().find(|q| q.dims() != data.dims()) {
        return Err(Error::Data(format!(
            "query tree has {} axes, data tree has {}",
            q.dims(),
            data.dims()
        )));
    }
    Ok(())
}

/// CPU time consumed by the calling thread.
pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Starts a run: clears caches and counters, then starts both clocks.
pub(crate) struct Meter {
    cpu: Duration,
    wall: Instant,
}

impl Meter {
    pub fn start(data: &mut RTree, queries: &mut [RTree]) -> Self {
        data.reset_io();
        for q in queries.iter_mut() {
            q.reset_io();
        }
        Self {
            cpu: thread_cpu_time(),
            wall: Instant::now(),
        }
    }

    pub fn finish(self, data: &RTree, queries: &[RTree], heap_insertions: u64) -> RunMetrics {
        let cpu_time = thread_cpu_time().saturating_sub(self.cpu);
        let wall_time = self.wall.elapsed();
        let io: Vec<IoCounters> = std::iter::once(data.counters())
            .chain(queries.iter().map(RTree::counters))
            .collect();
        RunMetrics {
            io_logical: io.iter().map(|c| c.logical_fetches).sum(),
            io_physical: io.iter().map(|c| c.physical_reads).sum(),
            io,
            heap_insertions,
            cpu_time,
            wall_time,
        }
    }
}
