//! R*-tree construction by repeated insertion.
//!
//! Nodes live in an arena while the tree is being built and are written to a
//! block store once insertion finishes. ChooseSubtree, forced reinsertion and
//! the margin/overlap split follow the original R*-tree rules; every tie is
//! broken by the lower entry index.

use std::collections::HashSet;

use crate::error::{usage, Result};
use crate::geometry::{Mbr, Point};

use super::TreeConfig;

#[derive(Debug, Clone)]
pub(crate) struct ArenaEntry {
    pub mbr: Mbr,
    /// Arena index of the child node, or the point id in leaves.
    pub child: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct ArenaNode {
    pub level: u16,
    pub entries: Vec<ArenaEntry>,
}

impl ArenaNode {
    fn mbr(&self) -> Mbr {
        let mut it = self.entries.iter();
        let mut acc = it.next().expect("empty node").mbr.clone();
        for e in it {
            acc.expand(&e.mbr);
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub splits: u64,
    pub reinsertions: u64,
}

/// In-memory R*-tree under construction.
#[derive(Debug)]
pub struct RStarBuilder {
    dims: usize,
    config: TreeConfig,
    pub(crate) nodes: Vec<ArenaNode>,
    pub(crate) root: usize,
    ids: HashSet<u64>,
    stats: BuildStats,
}

struct InsertCtx {
    /// Levels that already went through forced reinsertion during the current
    /// top-level insertion.
    reinserted: Vec<bool>,
    pending: Vec<(ArenaEntry, u16)>,
}

impl RStarBuilder {
    pub fn new(dims: usize, config: TreeConfig) -> Result<Self> {
        if dims < 2 {
            return Err(usage!("points need at least 2 dimensions, got {dims}"));
        }
        config.validate()?;
        Ok(Self {
            dims,
            config,
            nodes: vec![ArenaNode {
                level: 0,
                entries: Vec::new(),
            }],
            root: 0,
            ids: HashSet::new(),
            stats: BuildStats::default(),
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn height(&self) -> usize {
        self.nodes[self.root].level as usize + 1
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }

    pub(crate) fn root_level(&self) -> u16 {
        self.nodes[self.root].level
    }

    pub(crate) fn root_mbr(&self) -> Option<Mbr> {
        let root = &self.nodes[self.root];
        (!root.entries.is_empty()).then(|| root.mbr())
    }

    pub fn insert(&mut self, point: &Point) -> Result<()> {
        if point.dims() != self.dims {
            return Err(usage!(
                "point {} has {} axes, tree has {}",
                point.id,
                point.dims(),
                self.dims
            ));
        }
        if !point.is_finite() {
            return Err(usage!("point {} has non-finite coordinates", point.id));
        }
        if !self.ids.insert(point.id) {
            return Err(usage!("duplicate point id {}", point.id));
        }
        let mut ctx = InsertCtx {
            reinserted: vec![false; self.height()],
            pending: vec![(
                ArenaEntry {
                    mbr: point.mbr(),
                    child: point.id,
                },
                0,
            )],
        };
        while let Some((entry, level)) = ctx.pending.pop() {
            self.insert_entry(entry, level, &mut ctx);
        }
        Ok(())
    }

    fn insert_entry(&mut self, entry: ArenaEntry, level: u16, ctx: &mut InsertCtx) {
        if let Some(sibling) = self.insert_into(self.root, entry, level, ctx) {
            let old = self.root;
            let new_level = self.nodes[old].level + 1;
            let entries = vec![
                ArenaEntry {
                    mbr: self.nodes[old].mbr(),
                    child: old as u64,
                },
                ArenaEntry {
                    mbr: self.nodes[sibling].mbr(),
                    child: sibling as u64,
                },
            ];
            self.nodes.push(ArenaNode {
                level: new_level,
                entries,
            });
            self.root = self.nodes.len() - 1;
            ctx.reinserted.push(false);
        }
    }

    /// Inserts below `node`; returns the arena index of a new sibling when
    /// `node` had to split.
    fn insert_into(
        &mut self,
        node: usize,
        entry: ArenaEntry,
        level: u16,
        ctx: &mut InsertCtx,
    ) -> Option<usize> {
        if self.nodes[node].level == level {
            self.nodes[node].entries.push(entry);
        } else {
            let slot = self.choose_subtree(node, &entry.mbr);
            let child = self.nodes[node].entries[slot].child as usize;
            let split = self.insert_into(child, entry, level, ctx);
            self.nodes[node].entries[slot].mbr = self.nodes[child].mbr();
            if let Some(sibling) = split {
                let mbr = self.nodes[sibling].mbr();
                self.nodes[node].entries.push(ArenaEntry {
                    mbr,
                    child: sibling as u64,
                });
            }
        }

        if self.nodes[node].entries.len() <= self.config.max_fanout {
            return None;
        }
        let lvl = self.nodes[node].level as usize;
        if node != self.root && !ctx.reinserted[lvl] {
            ctx.reinserted[lvl] = true;
            self.reinsert(node, ctx);
            None
        } else {
            Some(self.split(node))
        }
    }

    fn choose_subtree(&self, node: usize, mbr: &Mbr) -> usize {
        let entries = &self.nodes[node].entries;
        let enlarged: Vec<Mbr> = entries.iter().map(|e| e.mbr.union(mbr)).collect();
        let area_growth =
            |k: usize| enlarged[k].area() - entries[k].mbr.area();

        if self.nodes[node].level == 1 {
            // Children are leaves: minimise overlap enlargement.
            let mut best = 0;
            let mut best_key = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
            for k in 0..entries.len() {
                let mut overlap_growth = 0.0;
                for (j, other) in entries.iter().enumerate() {
                    if j != k {
                        overlap_growth += enlarged[k].overlap_area(&other.mbr)
                            - entries[k].mbr.overlap_area(&other.mbr);
                    }
                }
                let key = (overlap_growth, area_growth(k), entries[k].mbr.area());
                if key < best_key {
                    best_key = key;
                    best = k;
                }
            }
            best
        } else {
            let mut best = 0;
            let mut best_key = (f64::INFINITY, f64::INFINITY);
            for k in 0..entries.len() {
                let key = (area_growth(k), entries[k].mbr.area());
                if key < best_key {
                    best_key = key;
                    best = k;
                }
            }
            best
        }
    }

    /// Removes the entries whose centres lie farthest from the node centre
    /// and queues them for reinsertion, closest first.
    fn reinsert(&mut self, node: usize, ctx: &mut InsertCtx) {
        self.stats.reinsertions += 1;
        let level = self.nodes[node].level;
        let center = self.nodes[node].mbr().center();
        let entries = std::mem::take(&mut self.nodes[node].entries);
        let mut by_dist: Vec<(f64, ArenaEntry)> = entries
            .into_iter()
            .map(|e| {
                let c = e.mbr.center();
                let d: f64 = c.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, e)
            })
            .collect();
        // Stable: equal distances keep entry order.
        by_dist.sort_by(|a, b| b.0.total_cmp(&a.0));
        let p = self.config.reinsert_count();
        let kept = by_dist.split_off(p);
        self.nodes[node].entries = kept.into_iter().map(|(_, e)| e).collect();
        // `by_dist` is farthest-first; the pending stack pops from the back,
        // so pushing in this order reinserts the closest entry first.
        for (_, e) in by_dist {
            ctx.pending.push((e, level));
        }
    }

    fn split(&mut self, node: usize) -> usize {
        self.stats.splits += 1;
        let entries = std::mem::take(&mut self.nodes[node].entries);
        let (left, right) = split_entries(entries, self.config.min_fanout, self.dims);
        let level = self.nodes[node].level;
        self.nodes[node].entries = left;
        self.nodes.push(ArenaNode {
            level,
            entries: right,
        });
        self.nodes.len() - 1
    }
}

fn bbox<'a>(entries: impl Iterator<Item = &'a ArenaEntry>) -> Mbr {
    let mut it = entries;
    let mut acc = it.next().expect("empty group").mbr.clone();
    for e in it {
        acc.expand(&e.mbr);
    }
    acc
}

/// For one ordering of the entries, the bounding boxes of every candidate
/// (first group, second group) pair.
fn distributions(sorted: &[&ArenaEntry], min_fanout: usize) -> Vec<(Mbr, Mbr)> {
    let n = sorted.len();
    let mut prefix = Vec::with_capacity(n);
    let mut acc = sorted[0].mbr.clone();
    for e in sorted {
        acc.expand(&e.mbr);
        prefix.push(acc.clone());
    }
    let mut suffix = vec![sorted[n - 1].mbr.clone(); n];
    let mut acc = sorted[n - 1].mbr.clone();
    for i in (0..n).rev() {
        acc.expand(&sorted[i].mbr);
        suffix[i] = acc.clone();
    }
    (min_fanout..=n - min_fanout)
        .map(|first| (prefix[first - 1].clone(), suffix[first].clone()))
        .collect()
}

fn sorted_by(entries: &[ArenaEntry], axis: usize, by_upper: bool) -> Vec<&ArenaEntry> {
    let mut v: Vec<&ArenaEntry> = entries.iter().collect();
    if by_upper {
        v.sort_by(|a, b| a.mbr.hi[axis].total_cmp(&b.mbr.hi[axis]));
    } else {
        v.sort_by(|a, b| a.mbr.lo[axis].total_cmp(&b.mbr.lo[axis]));
    }
    v
}

/// R* split: pick the axis with the smallest margin sum, then the
/// distribution with the least overlap (area sum on ties).
fn split_entries(
    entries: Vec<ArenaEntry>,
    min_fanout: usize,
    dims: usize,
) -> (Vec<ArenaEntry>, Vec<ArenaEntry>) {
    let mut best_axis = 0;
    let mut best_margin = f64::INFINITY;
    for axis in 0..dims {
        let mut margin = 0.0;
        for by_upper in [false, true] {
            let sorted = sorted_by(&entries, axis, by_upper);
            for (a, b) in distributions(&sorted, min_fanout) {
                margin += a.margin() + b.margin();
            }
        }
        if margin < best_margin {
            best_margin = margin;
            best_axis = axis;
        }
    }

    let mut best: Option<(bool, usize)> = None;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    for by_upper in [false, true] {
        let sorted = sorted_by(&entries, best_axis, by_upper);
        for (k, (a, b)) in distributions(&sorted, min_fanout).into_iter().enumerate() {
            let key = (a.overlap_area(&b), a.area() + b.area());
            if key < best_key {
                best_key = key;
                best = Some((by_upper, min_fanout + k));
            }
        }
    }
    let (by_upper, first) = best.expect("at least one distribution");

    let order: Vec<usize> = {
        let mut idx: Vec<usize> = (0..entries.len()).collect();
        if by_upper {
            idx.sort_by(|&a, &b| entries[a].mbr.hi[best_axis].total_cmp(&entries[b].mbr.hi[best_axis]));
        } else {
            idx.sort_by(|&a, &b| entries[a].mbr.lo[best_axis].total_cmp(&entries[b].mbr.lo[best_axis]));
        }
        idx
    };
    let mut slots: Vec<Option<ArenaEntry>> = entries.into_iter().map(Some).collect();
    let mut left = Vec::with_capacity(first);
    let mut right = Vec::with_capacity(order.len() - first);
    for (pos, i) in order.into_iter().enumerate() {
        let e = slots[i].take().unwrap();
        if pos < first {
            left.push(e);
        } else {
            right.push(e);
        }
    }
    debug_assert!(bbox(left.iter()).is_valid() && bbox(right.iter()).is_valid());
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(n: usize) -> Vec<Point> {
        // Deterministic scatter without an RNG dependency.
        (0..n)
            .map(|i| {
                let x = ((i * 7919) % 1009) as f64 / 1009.0;
                let y = ((i * 104_729) % 997) as f64 / 997.0;
                Point::new(i as u64, [x, y])
            })
            .collect()
    }

    #[test]
    fn non_full_leaf_insert_grows_root() {
        let mut b = RStarBuilder::new(2, TreeConfig::for_block(1024, 2).unwrap()).unwrap();
        b.insert(&Point::new(1, [0.0, 0.0])).unwrap();
        b.insert(&Point::new(2, [1.0, 2.0])).unwrap();
        assert_eq!(b.height(), 1);
        assert_eq!(b.nodes[b.root].entries.len(), 2);
        assert_eq!(b.root_mbr().unwrap(), Mbr::new([0.0, 0.0], [1.0, 2.0]).unwrap());
    }

    #[test]
    fn root_overflow_splits_into_two_leaves() {
        let cfg = TreeConfig::for_block(1024, 2).unwrap();
        let mut b = RStarBuilder::new(2, cfg.clone()).unwrap();
        for p in pts(cfg.max_fanout + 1) {
            b.insert(&p).unwrap();
        }
        assert_eq!(b.height(), 2);
        let root = &b.nodes[b.root];
        assert_eq!(root.level, 1);
        assert_eq!(root.entries.len(), 2);
        let sizes: Vec<usize> = root
            .entries
            .iter()
            .map(|e| b.nodes[e.child as usize].entries.len())
            .collect();
        assert_eq!(sizes.iter().sum::<usize>(), cfg.max_fanout + 1);
        assert!(sizes.iter().all(|&s| s >= cfg.min_fanout));
        assert_eq!(b.stats(), BuildStats { splits: 1, reinsertions: 0 });
    }

    #[test]
    fn first_leaf_overflow_below_root_reinserts_instead_of_splitting() {
        let cfg = TreeConfig::with_max_fanout(8).unwrap();
        let mut b = RStarBuilder::new(2, cfg.clone()).unwrap();
        let points = pts(200);
        let mut iter = points.iter();
        // Grow until the root is an intermediate node.
        for p in iter.by_ref() {
            b.insert(p).unwrap();
            if b.height() == 2 {
                break;
            }
        }
        // Find the next insertion that overflows a leaf.
        for p in iter {
            let leaf_full = b.nodes[b.root]
                .entries
                .iter()
                .any(|e| b.nodes[e.child as usize].entries.len() == cfg.max_fanout);
            let before = b.stats();
            b.insert(p).unwrap();
            let after = b.stats();
            if after != before {
                assert!(leaf_full);
                assert_eq!(after.reinsertions, before.reinsertions + 1);
                return;
            }
        }
        panic!("no overflow observed");
    }

    #[test]
    fn duplicate_id_and_bad_dims_rejected() {
        let mut b = RStarBuilder::new(2, TreeConfig::for_block(1024, 2).unwrap()).unwrap();
        b.insert(&Point::new(1, [0.0, 0.0])).unwrap();
        assert!(matches!(b.insert(&Point::new(1, [5.0, 5.0])), Err(crate::Error::Usage(_))));
        assert!(b.insert(&Point::new(2, [0.0, 0.0, 1.0])).is_err());
        assert!(b.insert(&Point::new(3, [f64::NAN, 0.0])).is_err());
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn split_respects_min_fanout() {
        let entries: Vec<ArenaEntry> = pts(26)
            .iter()
            .map(|p| ArenaEntry {
                mbr: p.mbr(),
                child: p.id,
            })
            .collect();
        let (l, r) = split_entries(entries, 10, 2);
        assert_eq!(l.len() + r.len(), 26);
        assert!(l.len() >= 10 && r.len() >= 10);
    }
}
