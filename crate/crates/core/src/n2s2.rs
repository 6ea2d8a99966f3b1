//! Nearest-neighbour skyline search by lockstep descent of the data tree and
//! the query trees.
//!
//! Each data-tree entry under consideration owns a [`DsState`]: one candidate
//! list of query-tree entries per query set, plus the smallest MinMindist and
//! smallest MaxMaxdist between the owner and the listed entries. Children
//! inherit their parent's lists one query level deeper, so nearest-neighbour
//! work is never restarted from a query root. A list entry whose MinMindist
//! exceeds the list's smallest MaxMaxdist cannot hold the nearest neighbour
//! of anything under the owner and is dropped.
//!
//! With the default priority (sum of both bounds) the heap order is not a
//! lower bound, so a popped point also evicts skyline points it dominates.

use crate::error::{usage, Error, Result};
use crate::geometry::{Mbr, Point};
use crate::queue::MinQueue;
use crate::rstar::RTree;
use crate::skyline::{
    check_inputs, dominates_slice, AttrTuple, Meter, Priority, RunOptions, SkylineEntry,
    SkylineResult, TraceOwner, TraceRecord,
};
use crate::storage::BlockId;

/// The data-tree entry a [`DsState`] describes.
#[derive(Debug, Clone, PartialEq)]
pub struct DsOwner {
    pub mbr: Mbr,
    pub kind: OwnerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OwnerKind {
    Node(BlockId),
    Point(u64),
}

impl DsOwner {
    pub fn node(block: BlockId, mbr: Mbr) -> Self {
        Self {
            mbr,
            kind: OwnerKind::Node(block),
        }
    }

    pub fn point(p: &Point) -> Self {
        Self {
            mbr: p.mbr(),
            kind: OwnerKind::Point(p.id),
        }
    }

    fn trace_owner(&self) -> TraceOwner {
        match self.kind {
            OwnerKind::Node(b) => TraceOwner::Node(b),
            OwnerKind::Point(id) => TraceOwner::Point(id),
        }
    }

    fn tie(&self) -> u64 {
        match self.kind {
            OwnerKind::Node(b) => b.0,
            OwnerKind::Point(id) => id,
        }
    }
}

/// A query-tree entry held in a candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRef {
    pub mbr: Mbr,
    pub target: QueryTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryTarget {
    Node(BlockId),
    Point(u64),
}

impl QueryRef {
    pub fn is_point(&self) -> bool {
        matches!(self.target, QueryTarget::Point(_))
    }
}

/// Search state of one data-tree entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DsState {
    pub owner: DsOwner,
    pub lists: Vec<Vec<QueryRef>>,
    pub minminmindist: Vec<f64>,
    pub minmaxmaxdist: Vec<f64>,
}

impl DsState {
    pub fn new(owner: DsOwner, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(usage!("a search state needs at least one list"));
        }
        Ok(Self {
            owner,
            lists: vec![Vec::new(); m],
            minminmindist: vec![f64::INFINITY; m],
            minmaxmaxdist: vec![f64::INFINITY; m],
        })
    }

    pub fn m(&self) -> usize {
        self.lists.len()
    }

    fn check_list(&self, i: usize) -> Result<()> {
        if i >= self.m() {
            return Err(usage!("list {i} out of range for {} lists", self.m()));
        }
        Ok(())
    }

    /// Appends `node` to list `i` and tightens that list's bounds.
    pub fn insert(&mut self, node: QueryRef, i: usize) -> Result<()> {
        self.check_list(i)?;
        self.push(node, i);
        Ok(())
    }

    fn push(&mut self, node: QueryRef, i: usize) {
        let lo = self.owner.mbr.min_min_dist(&node.mbr);
        let hi = self.owner.mbr.max_max_dist(&node.mbr);
        if lo < self.minminmindist[i] {
            self.minminmindist[i] = lo;
        }
        if hi < self.minmaxmaxdist[i] {
            self.minmaxmaxdist[i] = hi;
        }
        self.lists[i].push(node);
    }

    fn clear_list(&mut self, i: usize) {
        self.lists[i].clear();
        self.minminmindist[i] = f64::INFINITY;
        self.minmaxmaxdist[i] = f64::INFINITY;
    }

    /// Sum over all lists of both bounds.
    pub fn priority(&self) -> Result<f64> {
        self.priority_with(Priority::Improved)
    }

    pub fn priority_with(&self, priority: Priority) -> Result<f64> {
        if self
            .minminmindist
            .iter()
            .chain(&self.minmaxmaxdist)
            .any(|v| v.is_infinite())
        {
            return Err(usage!("priority of a state with an unfilled list"));
        }
        Ok(match priority {
            Priority::Improved => self
                .minminmindist
                .iter()
                .zip(&self.minmaxmaxdist)
                .map(|(a, b)| a + b)
                .sum(),
            Priority::LowerBound => self.minminmindist.iter().sum(),
        })
    }

    /// Dominance over the `minminmindist` tuples.
    pub fn dominates(&self, other: &DsState) -> Result<bool> {
        if self.m() != other.m() {
            return Err(usage!("states with {} and {} lists", self.m(), other.m()));
        }
        Ok(dominates_slice(&self.minminmindist, &other.minminmindist))
    }

    /// Drops list entries whose MinMindist to the owner exceeds the list's
    /// `minmaxmaxdist`. The bounds are unchanged.
    pub fn reconfig(&mut self, i: usize) -> Result<()> {
        self.check_list(i)?;
        self.prune(i);
        Ok(())
    }

    fn prune(&mut self, i: usize) {
        let ceiling = self.minmaxmaxdist[i];
        let owner = &self.owner.mbr;
        self.lists[i].retain(|n| owner.min_min_dist(&n.mbr) <= ceiling);
    }

    /// Rebuilds list `i` from `parent`'s list `i`, one query level deeper.
    /// For a point owner, descends until the list holds only query points.
    pub fn fill(&mut self, parent: &DsState, i: usize, tree: &mut RTree, pruning: bool) -> Result<()> {
        self.check_list(i)?;
        if parent.m() != self.m() {
            return Err(usage!("parent has {} lists, child {}", parent.m(), self.m()));
        }
        self.fill_from(&parent.lists[i], i, tree, pruning)
    }

    fn fill_from(&mut self, source: &[QueryRef], i: usize, tree: &mut RTree, pruning: bool) -> Result<()> {
        if source.is_empty() {
            return Err(Error::Invariant(format!("filling list {i} from an empty list")));
        }
        self.expand_into(source, i, tree, pruning)?;
        if matches!(self.owner.kind, OwnerKind::Point(_)) {
            while !self.lists[i].iter().all(QueryRef::is_point) {
                let current = std::mem::take(&mut self.lists[i]);
                self.expand_into(&current, i, tree, pruning)?;
            }
        }
        Ok(())
    }

    fn expand_into(&mut self, source: &[QueryRef], i: usize, tree: &mut RTree, pruning: bool) -> Result<()> {
        self.clear_list(i);
        for entry in source {
            match entry.target {
                // Query points are carried down unchanged.
                QueryTarget::Point(_) => self.push(entry.clone(), i),
                QueryTarget::Node(block) => {
                    let node = tree.fetch_node(block)?;
                    let leaf = node.is_leaf();
                    for e in node.entries {
                        if pruning && self.owner.mbr.min_min_dist(&e.mbr) > self.minmaxmaxdist[i] {
                            continue;
                        }
                        let target = if leaf {
                            QueryTarget::Point(e.id)
                        } else {
                            QueryTarget::Node(e.child())
                        };
                        self.push(QueryRef { mbr: e.mbr, target }, i);
                    }
                }
            }
        }
        if pruning {
            self.prune(i);
        }
        Ok(())
    }
}

pub fn n2s2_run(data: &mut RTree, queries: &mut [RTree], opts: &RunOptions) -> Result<SkylineResult> {
    check_inputs(data, queries)?;
    let m = queries.len();
    let meter = Meter::start(data, queries);
    let mut trace = Vec::new();

    // With the fault hook set the dominance test runs backwards; used only to
    // prove that verification catches a broken engine.
    let is_dominated_by = |s: &DsState, ds: &DsState| {
        if opts.fault_flip_dominance {
            dominates_slice(&ds.minminmindist, &s.minminmindist)
        } else {
            dominates_slice(&s.minminmindist, &ds.minminmindist)
        }
    };

    let mut root = DsState::new(DsOwner::node(data.root(), data.root_mbr().clone()), m)?;
    for (i, q) in queries.iter().enumerate() {
        root.push(
            QueryRef {
                mbr: q.root_mbr().clone(),
                target: QueryTarget::Node(q.root()),
            },
            i,
        );
    }
    let key = root.priority_with(opts.priority)?;
    if opts.trace {
        trace.push(trace_record(&root, None, key));
    }
    let mut heap = MinQueue::new();
    heap.push(key, root.owner.tie(), root);

    let mut skyline: Vec<DsState> = Vec::new();
    while let Some((_, ds)) = heap.pop() {
        if skyline.iter().any(|s| is_dominated_by(s, &ds)) {
            continue;
        }
        match ds.owner.kind {
            OwnerKind::Node(block) => {
                let node = data.fetch_node(block)?;
                let leaf = node.is_leaf();
                for e in node.entries {
                    let owner = if leaf {
                        DsOwner {
                            mbr: e.mbr,
                            kind: OwnerKind::Point(e.id),
                        }
                    } else {
                        DsOwner::node(e.child(), e.mbr)
                    };
                    let mut child = DsState::new(owner, m)?;
                    for (i, q) in queries.iter_mut().enumerate() {
                        child.fill(&ds, i, q, opts.pruning)?;
                    }
                    let key = child.priority_with(opts.priority)?;
                    if opts.trace {
                        trace.push(trace_record(&child, Some(&ds), key));
                    }
                    if skyline.iter().any(|s| is_dominated_by(s, &child)) {
                        continue;
                    }
                    heap.push(key, child.owner.tie(), child);
                }
            }
            OwnerKind::Point(_) => {
                skyline.retain(|s| !is_dominated_by(&ds, s));
                skyline.push(ds);
            }
        }
    }

    let mut entries: Vec<SkylineEntry> = skyline
        .into_iter()
        .map(|ds| {
            let id = match ds.owner.kind {
                OwnerKind::Point(id) => id,
                OwnerKind::Node(_) => unreachable!("only point owners enter the skyline"),
            };
            SkylineEntry {
                point: Point {
                    id,
                    coords: ds.owner.mbr.lo,
                },
                attrs: AttrTuple(ds.minminmindist),
            }
        })
        .collect();
    entries.sort_by_key(|s| s.point.id);
    let metrics = meter.finish(data, queries, heap.insertions());
    Ok(SkylineResult {
        entries,
        metrics,
        trace,
    })
}

fn trace_record(ds: &DsState, parent: Option<&DsState>, priority: f64) -> TraceRecord {
    TraceRecord {
        owner: ds.owner.trace_owner(),
        lower: ds.minminmindist.clone(),
        upper: ds.minmaxmaxdist.clone(),
        parent_lower: parent.map(|p| p.minminmindist.clone()),
        priority,
    }
}
