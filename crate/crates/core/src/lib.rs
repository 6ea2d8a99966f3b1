//! Spatial nearest neighbor skyline queries over disk-resident R*-trees.
//!
//! Given a data set `P` and query sets `Q_1..Q_m`, each point of `P` is
//! described by its distances to the nearest point of every `Q_j`; the query
//! returns the points not dominated under those distances. Two engines answer
//! it: [`bbs`], a branch-and-bound skyline that restarts nearest-neighbour
//! searches from the query roots, and [`n2s2`], which descends the data and
//! query trees together. [`oracle`] gives brute-force ground truth and
//! [`bench`] drives the comparison workloads.

pub mod bbs;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod n2s2;
pub mod oracle;
mod queue;
pub mod rstar;
pub mod skyline;
pub mod storage;

pub use error::{Error, Result};
pub use geometry::{Mbr, Point};
pub use rstar::RTree;
pub use skyline::{AttrTuple, Engine, Priority, RunOptions, SkylineResult};
pub use storage::{BlockId, BlockStore, IoCounters, StoreConfig};
