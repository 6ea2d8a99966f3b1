//! Disk-resident R*-tree over points.
//!
//! Block 0 of the store holds tree metadata; every other block is one node.
//! The tree is built by repeated R* insertion in memory and then written out
//! breadth-first, so the root is always block 1.

mod insert;
mod node;

use std::collections::HashSet;
use std::path::Path;

pub use insert::{BuildStats, RStarBuilder};
pub use node::{node_capacity, NodeEntry, RTreeNode};

use crate::error::{format_err, usage, Error, Result};
use crate::geometry::{Coords, Mbr, Point};
use crate::queue::MinQueue;
use crate::storage::{BlockId, BlockStore, IoCounters, StoreConfig};

const META_MAGIC: &[u8; 8] = b"NNSKYRTR";
const MIN_FANOUT_RATIO: f64 = 0.4;
const REINSERT_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub max_fanout: usize,
    pub min_fanout: usize,
    pub reinsert_fraction: f64,
}

impl TreeConfig {
    /// Fanout fixed by how many entries fit in one block.
    pub fn for_block(block_size: usize, dims: usize) -> Result<Self> {
        Self::with_max_fanout(node_capacity(block_size, dims))
    }

    pub fn with_max_fanout(max_fanout: usize) -> Result<Self> {
        let cfg = Self {
            max_fanout,
            min_fanout: (MIN_FANOUT_RATIO * max_fanout as f64).ceil() as usize,
            reinsert_fraction: REINSERT_FRACTION,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_fanout < 2 || 2 * self.min_fanout > self.max_fanout {
            return Err(usage!(
                "fanout bounds min {} / max {} violate 2 <= min <= max/2",
                self.min_fanout,
                self.max_fanout
            ));
        }
        if self.max_fanout + 1 - self.reinsert_count() < self.min_fanout {
            return Err(usage!("reinsert fraction leaves an underfull node"));
        }
        Ok(())
    }

    /// Entries removed on a forced reinsertion.
    pub fn reinsert_count(&self) -> usize {
        ((self.reinsert_fraction * self.max_fanout as f64).round() as usize).max(1)
    }
}

/// Contents of block 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMeta {
    pub dims: usize,
    /// Number of levels; 1 for a single leaf root.
    pub height: usize,
    pub root: BlockId,
    pub len: u64,
    pub node_count: u64,
    pub max_fanout: usize,
    pub min_fanout: usize,
    pub root_mbr: Mbr,
}

impl TreeMeta {
    fn encode(&self, block_size: usize) -> Result<Vec<u8>> {
        let mut buf = Vec::with_capacity(block_size);
        buf.extend_from_slice(META_MAGIC);
        buf.extend_from_slice(&(self.dims as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        buf.extend_from_slice(&self.root.0.to_le_bytes());
        buf.extend_from_slice(&self.len.to_le_bytes());
        buf.extend_from_slice(&self.node_count.to_le_bytes());
        buf.extend_from_slice(&(self.max_fanout as u32).to_le_bytes());
        buf.extend_from_slice(&(self.min_fanout as u32).to_le_bytes());
        for v in self.root_mbr.lo.iter().chain(&self.root_mbr.hi) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if buf.len() > block_size {
            return Err(usage!("tree metadata does not fit in a {block_size}-byte block"));
        }
        buf.resize(block_size, 0);
        Ok(buf)
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 48 || &bytes[..8] != META_MAGIC {
            return Err(format_err!("block 0 is not r-tree metadata"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let dims = u32_at(8);
        if dims < 2 || 48 + 16 * dims > bytes.len() {
            return Err(format_err!("metadata has unusable dimensionality {dims}"));
        }
        let f64_at = |o: usize| f64::from_bits(u64_at(o));
        let lo: Coords = (0..dims).map(|k| f64_at(48 + 8 * k)).collect();
        let hi: Coords = (0..dims).map(|k| f64_at(48 + 8 * (dims + k))).collect();
        let root_mbr = Mbr { lo, hi };
        if !root_mbr.is_valid() {
            return Err(format_err!("metadata root mbr is invalid"));
        }
        Ok(Self {
            dims,
            height: u32_at(12),
            root: BlockId(u64_at(16)),
            len: u64_at(24),
            node_count: u64_at(32),
            max_fanout: u32_at(40),
            min_fanout: u32_at(44),
            root_mbr,
        })
    }
}

/// Summary returned by [`RTree::check_structure`].
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub height: usize,
    pub nodes: u64,
    pub point_ids: Vec<u64>,
}

/// A built R*-tree and the block store that holds it.
#[derive(Debug)]
pub struct RTree {
    store: BlockStore,
    meta: TreeMeta,
}

impl RTree {
    /// Builds a tree by inserting `points` in order and persists it into
    /// `store`, which must be empty. The tree's fanout follows the store's
    /// block size.
    pub fn bulk_build(points: &[Point], store: BlockStore) -> Result<Self> {
        let dims = points
            .first()
            .ok_or_else(|| usage!("cannot build an index over no points"))?
            .dims();
        let config = TreeConfig::for_block(store.block_size(), dims)?;
        Self::bulk_build_with(points, store, config)
    }

    pub fn bulk_build_with(points: &[Point], store: BlockStore, config: TreeConfig) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| usage!("cannot build an index over no points"))?;
        if config.max_fanout > node_capacity(store.block_size(), first.dims()) {
            return Err(usage!(
                "max fanout {} exceeds block capacity {}",
                config.max_fanout,
                node_capacity(store.block_size(), first.dims())
            ));
        }
        let mut builder = RStarBuilder::new(first.dims(), config)?;
        for p in points {
            builder.insert(p)?;
        }
        Self::persist(builder, store)
    }

    /// Convenience: create (truncate) a store at `path` and build into it.
    pub fn build_at(path: impl AsRef<Path>, config: StoreConfig, points: &[Point]) -> Result<Self> {
        Self::bulk_build(points, BlockStore::create(path, config)?)
    }

    /// Writes the builder's nodes breadth-first after a metadata block.
    pub fn persist(builder: RStarBuilder, mut store: BlockStore) -> Result<Self> {
        if store.block_count() != 0 {
            return Err(usage!("{} already holds data", store.path().display()));
        }
        let root_mbr = builder
            .root_mbr()
            .ok_or_else(|| usage!("cannot persist an empty tree"))?;
        let block_size = store.block_size();
        let dims = builder.dims();

        let mut order = vec![builder.root];
        let mut i = 0;
        while i < order.len() {
            let n = &builder.nodes[order[i]];
            if n.level > 0 {
                order.extend(n.entries.iter().map(|e| e.child as usize));
            }
            i += 1;
        }
        let mut block_of = vec![u64::MAX; builder.nodes.len()];
        for (pos, &arena) in order.iter().enumerate() {
            block_of[arena] = pos as u64 + 1;
        }

        let meta = TreeMeta {
            dims,
            height: builder.height(),
            root: BlockId(1),
            len: builder.len() as u64,
            node_count: order.len() as u64,
            max_fanout: builder.config().max_fanout,
            min_fanout: builder.config().min_fanout,
            root_mbr,
        };
        store.append_block(&meta.encode(block_size)?)?;
        for &arena in &order {
            let n = &builder.nodes[arena];
            let node = RTreeNode {
                level: n.level,
                entries: n
                    .entries
                    .iter()
                    .map(|e| NodeEntry {
                        mbr: e.mbr.clone(),
                        id: if n.level > 0 { block_of[e.child as usize] } else { e.child },
                    })
                    .collect(),
            };
            store.append_block(&node.encode(block_size, dims)?)?;
        }
        store.flush()?;
        debug_assert_eq!(builder.root_level() as usize + 1, meta.height);
        let mut tree = Self { store, meta };
        tree.reset_io();
        Ok(tree)
    }

    /// Opens a previously built tree.
    pub fn open(mut store: BlockStore) -> Result<Self> {
        if store.block_count() < 2 {
            return Err(format_err!("{} holds no r-tree", store.path().display()));
        }
        let meta = TreeMeta::decode(store.read_block(BlockId(0))?)?;
        if meta.root.0 == 0 || meta.root.0 >= store.block_count() || meta.height == 0 {
            return Err(format_err!("metadata points outside the store"));
        }
        let mut tree = Self { store, meta };
        tree.reset_io();
        Ok(tree)
    }

    pub fn open_path(path: impl AsRef<Path>, config: StoreConfig) -> Result<Self> {
        Self::open(BlockStore::open(path, config)?)
    }

    pub fn meta(&self) -> &TreeMeta {
        &self.meta
    }

    pub fn dims(&self) -> usize {
        self.meta.dims
    }

    pub fn height(&self) -> usize {
        self.meta.height
    }

    pub fn len(&self) -> u64 {
        self.meta.len
    }

    pub fn is_empty(&self) -> bool {
        self.meta.len == 0
    }

    pub fn root(&self) -> BlockId {
        self.meta.root
    }

    pub fn root_mbr(&self) -> &Mbr {
        &self.meta.root_mbr
    }

    /// Root level; leaves are level 0.
    pub fn root_level(&self) -> u16 {
        (self.meta.height - 1) as u16
    }

    pub fn store(&self) -> &BlockStore {
        &self.store
    }

    pub fn counters(&self) -> IoCounters {
        self.store.counters()
    }

    /// Zeroes the counters and empties the cache.
    pub fn reset_io(&mut self) {
        self.store.clear_cache();
        self.store.reset_counters();
    }

    /// Reads and decodes one node: exactly one block read.
    pub fn fetch_node(&mut self, id: BlockId) -> Result<RTreeNode> {
        if id.0 == 0 {
            return Err(usage!("block 0 holds metadata, not a node"));
        }
        let dims = self.meta.dims;
        RTreeNode::decode(self.store.read_block(id)?, dims)
    }

    /// Best-first search for the point closest to `target` under
    /// MinMindist. Returns `(point id, distance)`.
    pub fn nearest(&mut self, target: &Mbr) -> Result<(u64, f64)> {
        if target.dims() != self.meta.dims {
            return Err(usage!(
                "query has {} axes, tree has {}",
                target.dims(),
                self.meta.dims
            ));
        }
        enum Item {
            Node(BlockId),
            Point(u64),
        }
        let mut queue = MinQueue::new();
        queue.push(0.0, self.meta.root.0, Item::Node(self.meta.root));
        while let Some((dist, item)) = queue.pop() {
            match item {
                Item::Point(id) => return Ok((id, dist)),
                Item::Node(block) => {
                    let node = self.fetch_node(block)?;
                    for e in node.entries {
                        let d = target.min_min_dist(&e.mbr);
                        let item = if node.level == 0 {
                            Item::Point(e.id)
                        } else {
                            Item::Node(e.child())
                        };
                        queue.push(d, e.id, item);
                    }
                }
            }
        }
        Err(Error::Invariant("nearest-neighbour search found no point".into()))
    }

    /// Ids of all points lying inside `window` (boundary inclusive).
    pub fn range_query(&mut self, window: &Mbr) -> Result<Vec<u64>> {
        if window.dims() != self.meta.dims {
            return Err(usage!("window has {} axes, tree has {}", window.dims(), self.meta.dims));
        }
        let mut out = Vec::new();
        let mut stack = vec![self.meta.root];
        while let Some(block) = stack.pop() {
            let node = self.fetch_node(block)?;
            for e in node.entries {
                if node.level == 0 {
                    if window.contains(&e.mbr) {
                        out.push(e.id);
                    }
                } else if intersects(window, &e.mbr) {
                    stack.push(e.child());
                }
            }
        }
        Ok(out)
    }

    /// All points stored beneath the node at `block`.
    pub fn points_under(&mut self, block: BlockId) -> Result<Vec<Point>> {
        let mut out = Vec::new();
        let mut stack = vec![block];
        while let Some(b) = stack.pop() {
            let node = self.fetch_node(b)?;
            for e in node.entries {
                if node.level == 0 {
                    out.push(Point {
                        id: e.id,
                        coords: e.mbr.lo,
                    });
                } else {
                    stack.push(e.child());
                }
            }
        }
        Ok(out)
    }

    /// Walks the whole tree checking containment, balance, fanout bounds and
    /// id uniqueness. Returns the collected point ids in traversal order.
    pub fn check_structure(&mut self) -> Result<StructureReport> {
        let root_level = self.root_level();
        let mut nodes = 0;
        let mut ids = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![(self.meta.root, root_level, self.meta.root_mbr.clone(), true)];
        let bad = |msg: String| Err(Error::Invariant(msg));
        while let Some((block, level, parent_mbr, is_root)) = stack.pop() {
            nodes += 1;
            let node = self.fetch_node(block)?;
            if node.level != level {
                return bad(format!("block {} at level {} expected {level}", block.0, node.level));
            }
            let n = node.entries.len();
            if is_root {
                if n == 0 || (level > 0 && n < 2) {
                    return bad(format!("root has {n} entries at level {level}"));
                }
            } else if n < self.meta.min_fanout || n > self.meta.max_fanout {
                return bad(format!("block {} has {n} entries", block.0));
            }
            if n > self.meta.max_fanout {
                return bad(format!("block {} overfull with {n} entries", block.0));
            }
            if !parent_mbr.contains(&node.mbr()) {
                return bad(format!("block {} escapes its parent mbr", block.0));
            }
            for e in node.entries {
                if level == 0 {
                    if !e.mbr.is_point() {
                        return bad(format!("leaf entry {} is not a point", e.id));
                    }
                    if !seen.insert(e.id) {
                        return bad(format!("point {} stored twice", e.id));
                    }
                    ids.push(e.id);
                } else {
                    stack.push((e.child(), level - 1, e.mbr, false));
                }
            }
        }
        if nodes != self.meta.node_count || ids.len() as u64 != self.meta.len {
            return bad(format!(
                "walked {nodes} nodes / {} points, metadata says {} / {}",
                ids.len(),
                self.meta.node_count,
                self.meta.len
            ));
        }
        Ok(StructureReport {
            height: self.meta.height,
            nodes,
            point_ids: ids,
        })
    }
}

fn intersects(a: &Mbr, b: &Mbr) -> bool {
    a.lo.iter().zip(&b.hi).all(|(l, h)| l <= h) && b.lo.iter().zip(&a.hi).all(|(l, h)| l <= h)
}
