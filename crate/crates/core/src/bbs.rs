//! Branch-and-bound skyline adapted to nearest-neighbour attributes.
//!
//! Every entry gets, per query set, the smallest MinMindist between its MBR
//! and any query point, found by a fresh best-first search from that query
//! tree's root. The sum of those bounds orders the heap. A point's bounds are
//! its exact attributes, so a popped point is final.

use crate::error::Result;
use crate::geometry::{Mbr, Point};
use crate::queue::MinQueue;
use crate::rstar::RTree;
use crate::skyline::{
    check_inputs, dominates_slice, AttrTuple, Meter, RunOptions, SkylineEntry, SkylineResult,
    TraceOwner, TraceRecord,
};
use crate::storage::BlockId;

enum Item {
    Node(BlockId),
    Point(Point),
}

/// Lower bound of every attribute for anything inside `mbr`.
fn lower_bounds(mbr: &Mbr, queries: &mut [RTree]) -> Result<Vec<f64>> {
    queries
        .iter_mut()
        .map(|q| q.nearest(mbr).map(|(_, d)| d))
        .collect()
}

fn dominated(skyline: &[SkylineEntry], bounds: &[f64]) -> bool {
    skyline.iter().any(|s| dominates_slice(&s.attrs.0, bounds))
}

pub fn bbs_run(data: &mut RTree, queries: &mut [RTree], opts: &RunOptions) -> Result<SkylineResult> {
    check_inputs(data, queries)?;
    let meter = Meter::start(data, queries);
    let mut trace = Vec::new();
    let mut record = |owner, lower: &[f64], parent: Option<&[f64]>, priority| {
        if opts.trace {
            trace.push(TraceRecord {
                owner,
                lower: lower.to_vec(),
                upper: Vec::new(),
                parent_lower: parent.map(<[f64]>::to_vec),
                priority,
            });
        }
    };

    let mut heap: MinQueue<(Item, Vec<f64>)> = MinQueue::new();
    let root = data.root();
    let root_bounds = lower_bounds(data.root_mbr(), queries)?;
    let key: f64 = root_bounds.iter().sum();
    record(TraceOwner::Node(root), &root_bounds, None, key);
    heap.push(key, root.0, (Item::Node(root), root_bounds));

    let mut skyline: Vec<SkylineEntry> = Vec::new();
    while let Some((_, (item, bounds))) = heap.pop() {
        if dominated(&skyline, &bounds) {
            continue;
        }
        match item {
            Item::Point(point) => {
                // Only reachable on floating-point ties of the bound sum.
                skyline.retain(|s| !dominates_slice(&bounds, &s.attrs.0));
                skyline.push(SkylineEntry {
                    point,
                    attrs: AttrTuple(bounds),
                });
            }
            Item::Node(block) => {
                let node = data.fetch_node(block)?;
                for e in node.entries {
                    let child_bounds = lower_bounds(&e.mbr, queries)?;
                    let key: f64 = child_bounds.iter().sum();
                    let (owner, item) = if node.level == 0 {
                        let p = Point {
                            id: e.id,
                            coords: e.mbr.lo,
                        };
                        (TraceOwner::Point(e.id), Item::Point(p))
                    } else {
                        (TraceOwner::Node(e.child()), Item::Node(e.child()))
                    };
                    record(owner, &child_bounds, Some(&bounds), key);
                    if dominated(&skyline, &child_bounds) {
                        continue;
                    }
                    heap.push(key, e.id, (item, child_bounds));
                }
            }
        }
    }

    skyline.sort_by_key(|s| s.point.id);
    let metrics = meter.finish(data, queries, heap.insertions());
    Ok(SkylineResult {
        entries: skyline,
        metrics,
        trace,
    })
}
