#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use nnsky::bench::{self, Dataset, Workload};
use nnsky::skyline::{TraceOwner, TraceRecord};
use nnsky::{Point, RTree, StoreConfig};
use tempfile::TempDir;

/// Trees for one instance; the directory lives as long as the trees.
pub struct Instance {
    pub dir: TempDir,
    pub data_points: Vec<Point>,
    pub query_points: Vec<Vec<Point>>,
    pub data: RTree,
    pub queries: Vec<RTree>,
}

pub fn build(data_points: Vec<Point>, query_points: Vec<Vec<Point>>) -> Instance {
    build_with(data_points, query_points, StoreConfig::default())
}

pub fn build_with(data_points: Vec<Point>, query_points: Vec<Vec<Point>>, store: StoreConfig) -> Instance {
    let dir = tempfile::tempdir().unwrap();
    let ds = Dataset {
        data: data_points,
        queries: query_points,
    };
    let trees = bench::build_trees(&ds, dir.path(), store).unwrap();
    Instance {
        dir,
        data_points: ds.data,
        query_points: ds.queries,
        data: trees.data,
        queries: trees.queries,
    }
}

pub fn random(seed: u64, n: usize, m: usize, q: usize) -> Instance {
    let ds = bench::generate(&Workload::new(seed, n, m, q)).unwrap();
    build(ds.data, ds.queries)
}

/// Small blocks make tall trees out of small instances.
pub fn random_small_blocks(seed: u64, n: usize, m: usize, q: usize) -> Instance {
    let ds = bench::generate(&Workload::new(seed, n, m, q)).unwrap();
    let store = StoreConfig {
        block_size: 256,
        cache_blocks: 64,
    };
    build_with(ds.data, ds.queries, store)
}

pub fn pt(id: u64, x: f64, y: f64) -> Point {
    Point::new(id, [x, y])
}

/// Data points beneath each traced owner, resolved through the data tree.
pub fn points_of(inst: &mut Instance, rec: &TraceRecord, cache: &mut HashMap<u64, Vec<u64>>) -> Vec<u64> {
    match rec.owner {
        TraceOwner::Point(id) => vec![id],
        TraceOwner::Node(block) => cache
            .entry(block.0)
            .or_insert_with(|| {
                inst.data
                    .points_under(block)
                    .unwrap()
                    .into_iter()
                    .map(|p| p.id)
                    .collect()
            })
            .clone(),
    }
}

/// Reference LRU: front is most recently used.
pub struct LruSim {
    cap: usize,
    order: VecDeque<u64>,
    pub misses: u64,
}

impl LruSim {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            order: VecDeque::new(),
            misses: 0,
        }
    }

    pub fn access(&mut self, id: u64) {
        if let Some(pos) = self.order.iter().position(|&b| b == id) {
            self.order.remove(pos);
        } else {
            self.misses += 1;
            if self.order.len() == self.cap {
                self.order.pop_back();
            }
        }
        self.order.push_front(id);
    }
}
