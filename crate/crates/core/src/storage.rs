//! Fixed-size block file with an LRU read cache and I/O counters.
//!
//! File layout (little-endian): a 16-byte header holding the magic
//! `NNSKYBLK`, the block size as `u32` and four reserved bytes, followed by
//! the blocks back to back. Block `i` lives at offset `16 + i * block_size`.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use lru::LruCache;

use crate::error::{format_err, usage, Result};

pub const MAGIC: &[u8; 8] = b"NNSKYBLK";
pub const HEADER_LEN: u64 = 16;
pub const DEFAULT_BLOCK_SIZE: usize = 1024;
pub const DEFAULT_CACHE_BLOCKS: usize = 512;
const MIN_BLOCK_SIZE: usize = 256;

/// Index of a block inside one store file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreConfig {
    pub block_size: usize,
    pub cache_blocks: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            block_size: DEFAULT_BLOCK_SIZE,
            cache_blocks: DEFAULT_CACHE_BLOCKS,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < MIN_BLOCK_SIZE || self.block_size > u32::MAX as usize {
            return Err(usage!(
                "block size {} out of range (min {MIN_BLOCK_SIZE})",
                self.block_size
            ));
        }
        if self.cache_blocks == 0 {
            return Err(usage!("cache must hold at least one block"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoCounters {
    /// Every block request, hit or miss.
    pub logical_fetches: u64,
    /// Requests that missed the cache.
    pub physical_reads: u64,
    pub physical_writes: u64,
}

impl std::ops::AddAssign for IoCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.logical_fetches += rhs.logical_fetches;
        self.physical_reads += rhs.physical_reads;
        self.physical_writes += rhs.physical_writes;
    }
}

pub struct BlockStore {
    file: File,
    path: PathBuf,
    config: StoreConfig,
    blocks: u64,
    cache: LruCache<BlockId, Box<[u8]>>,
    counters: IoCounters,
}

impl std::fmt::Debug for BlockStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockStore")
            .field("path", &self.path)
            .field("config", &self.config)
            .field("blocks", &self.blocks)
            .field("counters", &self.counters)
            .finish()
    }
}

impl BlockStore {
    /// Opens `path`, creating it when missing. An existing file must carry a
    /// header with the same block size.
    pub fn open(path: impl AsRef<Path>, config: StoreConfig) -> Result<Self> {
        config.validate()?;
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;
        let len = file.metadata()?.len();
        let blocks = if len == 0 {
            write_header(&mut file, config.block_size)?;
            0
        } else {
            let mut header = [0u8; HEADER_LEN as usize];
            file.seek(SeekFrom::Start(0))?;
            file.read_exact(&mut header)
                .map_err(|_| format_err!("{}: truncated header", path.display()))?;
            if &header[..8] != MAGIC {
                return Err(format_err!("{}: bad magic", path.display()));
            }
            let stored = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
            if stored != config.block_size {
                return Err(format_err!(
                    "{}: block size {stored} does not match configured {}",
                    path.display(),
                    config.block_size
                ));
            }
            let body = len - HEADER_LEN;
            if body % config.block_size as u64 != 0 {
                return Err(format_err!("{}: partial trailing block", path.display()));
            }
            body / config.block_size as u64
        };
        Ok(Self {
            file,
            path,
            config,
            blocks,
            cache: LruCache::new(NonZeroUsize::new(config.cache_blocks).unwrap()),
            counters: IoCounters::default(),
        })
    }

    /// Opens `path` after discarding any previous content.
    pub fn create(path: impl AsRef<Path>, config: StoreConfig) -> Result<Self> {
        config.validate()?;
        File::create(path.as_ref())?;
        Self::open(path, config)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn config(&self) -> StoreConfig {
        self.config
    }

    pub fn block_size(&self) -> usize {
        self.config.block_size
    }

    pub fn block_count(&self) -> u64 {
        self.blocks
    }

    pub fn counters(&self) -> IoCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = IoCounters::default();
    }

    /// Drops every cached block so the next reads all go to disk.
    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn offset(&self, id: BlockId) -> u64 {
        HEADER_LEN + id.0 * self.config.block_size as u64
    }

    fn check_id(&self, id: BlockId) -> Result<()> {
        if id.0 >= self.blocks {
            return Err(usage!(
                "block {} out of range ({} blocks in {})",
                id.0,
                self.blocks,
                self.path.display()
            ));
        }
        Ok(())
    }

    /// Reads one block through the cache, counting a logical fetch and, on a
    /// miss, a physical read.
    pub fn read_block(&mut self, id: BlockId) -> Result<&[u8]> {
        self.check_id(id)?;
        self.counters.logical_fetches += 1;
        if self.cache.get(&id).is_none() {
            let mut buf = vec![0u8; self.config.block_size].into_boxed_slice();
            self.file.seek(SeekFrom::Start(self.offset(id)))?;
            self.file.read_exact(&mut buf)?;
            self.counters.physical_reads += 1;
            self.cache.put(id, buf);
        }
        Ok(self.cache.peek(&id).expect("block just cached"))
    }

    /// Overwrites an existing block. Writes go straight to disk; a cached
    /// copy is refreshed without changing its recency.
    pub fn write_block(&mut self, id: BlockId, bytes: &[u8]) -> Result<()> {
        self.check_id(id)?;
        self.check_len(bytes)?;
        self.file.seek(SeekFrom::Start(self.offset(id)))?;
        self.file.write_all(bytes)?;
        self.counters.physical_writes += 1;
        if let Some(cached) = self.cache.peek_mut(&id) {
            cached.copy_from_slice(bytes);
        }
        Ok(())
    }

    pub fn append_block(&mut self, bytes: &[u8]) -> Result<BlockId> {
        self.check_len(bytes)?;
        let id = BlockId(self.blocks);
        self.file.seek(SeekFrom::Start(self.offset(id)))?;
        self.file.write_all(bytes)?;
        self.counters.physical_writes += 1;
        self.blocks += 1;
        Ok(id)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.file.flush()?;
        Ok(())
    }

    fn check_len(&self, bytes: &[u8]) -> Result<()> {
        if bytes.len() != self.config.block_size {
            return Err(usage!(
                "block must be {} bytes, got {}",
                self.config.block_size,
                bytes.len()
            ));
        }
        Ok(())
    }
}

fn write_header(file: &mut File, block_size: usize) -> Result<()> {
    let mut header = [0u8; HEADER_LEN as usize];
    header[..8].copy_from_slice(MAGIC);
    header[8..12].copy_from_slice(&(block_size as u32).to_le_bytes());
    file.seek(SeekFrom::Start(0))?;
    file.write_all(&header)?;
    Ok(())
}
