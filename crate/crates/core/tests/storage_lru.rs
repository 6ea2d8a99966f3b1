mod common;

use common::LruSim;
use nnsky::{BlockId, BlockStore, StoreConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn store_with(blocks: u64, cache: usize) -> (tempfile::TempDir, BlockStore) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = StoreConfig {
        block_size: 256,
        cache_blocks: cache,
    };
    let mut s = BlockStore::create(dir.path().join("s.blk"), cfg).unwrap();
    for i in 0..blocks {
        s.append_block(&vec![i as u8; 256]).unwrap();
    }
    s.clear_cache();
    s.reset_counters();
    (dir, s)
}

#[test]
fn physical_reads_follow_lru_on_random_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let blocks = rng.gen_range(1..80u64);
        let cache = rng.gen_range(1..40usize);
        let (_d, mut s) = store_with(blocks, cache);
        let mut sim = LruSim::new(cache);
        let len = rng.gen_range(1..600);
        for _ in 0..len {
            // Skewed toward low ids so hits and evictions both occur.
            let id = rng.gen_range(0..blocks).min(rng.gen_range(0..blocks));
            let bytes = s.read_block(BlockId(id)).unwrap();
            assert_eq!(bytes[0], id as u8);
            sim.access(id);
        }
        let c = s.counters();
        assert_eq!(c.logical_fetches, len as u64);
        assert_eq!(c.physical_reads, sim.misses);
    }
}

#[test]
fn cyclic_scan_one_larger_than_cache_always_misses() {
    let (_d, mut s) = store_with(9, 8);
    for round in 0..3 {
        for id in 0..9 {
            s.read_block(BlockId(id)).unwrap();
        }
        assert_eq!(s.counters().physical_reads, 9 * (round + 1));
    }
}

#[test]
fn writes_are_visible_to_cached_reads() {
    let (_d, mut s) = store_with(4, 4);
    s.read_block(BlockId(2)).unwrap();
    s.write_block(BlockId(2), &[9u8; 256]).unwrap();
    assert_eq!(s.read_block(BlockId(2)).unwrap()[0], 9);
    assert_eq!(s.counters().physical_writes, 1);
}

#[test]
fn reopened_store_keeps_contents() {
    let (d, mut s) = store_with(3, 2);
    s.flush().unwrap();
    let path = s.path().to_path_buf();
    drop(s);
    let mut s = BlockStore::open(&path, StoreConfig { block_size: 256, cache_blocks: 2 }).unwrap();
    assert_eq!(s.block_count(), 3);
    assert_eq!(s.read_block(BlockId(1)).unwrap()[0], 1);
    drop(d);
}
