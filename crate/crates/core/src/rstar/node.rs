//! On-disk node layout.
//!
//! One node per block, little-endian: `level: u16`, `count: u16`, 12 reserved
//! bytes, then `count` entries of `2·d` `f64` values (all of `lo`, then all of
//! `hi`) followed by a `u64` that is a child block id in intermediate nodes
//! and a point id in leaves.

use crate::error::{format_err, usage, Result};
use crate::geometry::{Coords, Mbr};
use crate::storage::BlockId;

pub const NODE_HEADER_LEN: usize = 16;

/// Number of entries a block of `block_size` bytes can hold for `dims` axes.
pub fn node_capacity(block_size: usize, dims: usize) -> usize {
    block_size.saturating_sub(NODE_HEADER_LEN) / entry_len(dims)
}

fn entry_len(dims: usize) -> usize {
    16 * dims + 8
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeEntry {
    pub mbr: Mbr,
    /// Child block id in intermediate nodes, point id in leaves.
    pub id: u64,
}

impl NodeEntry {
    pub fn child(&self) -> BlockId {
        BlockId(self.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RTreeNode {
    /// Zero for leaves.
    pub level: u16,
    pub entries: Vec<NodeEntry>,
}

impl RTreeNode {
    pub fn is_leaf(&self) -> bool {
        self.level == 0
    }

    /// Bounding box of all entries. Panics on an empty node.
    pub fn mbr(&self) -> Mbr {
        let mut it = self.entries.iter();
        let mut acc = it.next().expect("empty node has no mbr").mbr.clone();
        for e in it {
            acc.expand(&e.mbr);
        }
        acc
    }

    pub fn encode(&self, block_size: usize, dims: usize) -> Result<Vec<u8>> {
        let cap = node_capacity(block_size, dims);
        if self.entries.len() > cap {
            return Err(usage!(
                "node with {} entries exceeds block capacity {cap}",
                self.entries.len()
            ));
        }
        let mut buf = Vec::with_capacity(block_size);
        buf.extend_from_slice(&self.level.to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u16).to_le_bytes());
        buf.resize(NODE_HEADER_LEN, 0);
        for e in &self.entries {
            if e.mbr.dims() != dims {
                return Err(usage!("entry has {} axes, tree has {dims}", e.mbr.dims()));
            }
            for v in e.mbr.lo.iter().chain(&e.mbr.hi) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.extend_from_slice(&e.id.to_le_bytes());
        }
        buf.resize(block_size, 0);
        Ok(buf)
    }

    pub fn decode(bytes: &[u8], dims: usize) -> Result<Self> {
        if bytes.len() < NODE_HEADER_LEN {
            return Err(format_err!("node block too short"));
        }
        let level = u16::from_le_bytes([bytes[0], bytes[1]]);
        let count = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
        let cap = node_capacity(bytes.len(), dims);
        if count > cap {
            return Err(format_err!("node claims {count} entries, capacity {cap}"));
        }
        let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let mut entries = Vec::with_capacity(count);
        let mut off = NODE_HEADER_LEN;
        for _ in 0..count {
            let lo: Coords = (0..dims).map(|k| f64_at(off + 8 * k)).collect();
            let hi: Coords = (0..dims).map(|k| f64_at(off + 8 * (dims + k))).collect();
            let id = u64::from_le_bytes(bytes[off + 16 * dims..off + 16 * dims + 8].try_into().unwrap());
            let mbr = Mbr { lo, hi };
            if !mbr.is_valid() {
                return Err(format_err!("node entry has invalid mbr {:?}", mbr));
            }
            entries.push(NodeEntry { mbr, id });
            off += entry_len(dims);
        }
        Ok(Self { level, entries })
    }
}
