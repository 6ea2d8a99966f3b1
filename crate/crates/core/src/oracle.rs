//! Brute-force reference answers: linear-scan attributes and an all-pairs
//! skyline. Shares nothing with the engines beyond `point_dist` and
//! `dominates`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{usage, Result};
use crate::geometry::{point_dist, Point};
use crate::skyline::{dominates, AttrTuple};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub attrs: BTreeMap<u64, AttrTuple>,
    pub skyline_ids: BTreeSet<u64>,
}

/// Exact nearest-neighbour distances of every point to every query set.
pub fn oracle_attrs(points: &[Point], query_sets: &[Vec<Point>]) -> Result<BTreeMap<u64, AttrTuple>> {
    if query_sets.is_empty() || query_sets.iter().any(Vec::is_empty) {
        return Err(usage!("every query set must be non-empty"));
    }
    let mut out = BTreeMap::new();
    for p in points {
        let mut values = Vec::with_capacity(query_sets.len());
        for set in query_sets {
            let mut best = f64::INFINITY;
            for q in set {
                best = best.min(point_dist(p, q)?);
            }
            values.push(best);
        }
        out.insert(p.id, AttrTuple(values));
    }
    Ok(out)
}

/// Ids not dominated by any other row.
pub fn oracle_skyline(attrs: &BTreeMap<u64, AttrTuple>) -> Result<BTreeSet<u64>> {
    let rows: Vec<(&u64, &AttrTuple)> = attrs.iter().collect();
    let mut out = BTreeSet::new();
    'outer: for (id, a) in &rows {
        for (_, b) in &rows {
            if dominates(b, a)? {
                continue 'outer;
            }
        }
        out.insert(**id);
    }
    Ok(out)
}

pub fn oracle_run(points: &[Point], query_sets: &[Vec<Point>]) -> Result<OracleResult> {
    let attrs = oracle_attrs(points, query_sets)?;
    let skyline_ids = oracle_skyline(&attrs)?;
    Ok(OracleResult { attrs, skyline_ids })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(id: u64, x: f64, y: f64) -> Point {
        Point::new(id, [x, y])
    }

    #[test]
    fn attrs_examples() {
        let pts = [p(0, 1.0, 1.0), p(1, 3.0, 4.0)];
        let sets = vec![vec![p(0, 1.0, 1.0)], vec![p(0, 0.0, 0.0)]];
        let a = oracle_attrs(&pts, &sets).unwrap();
        assert_eq!(a[&0].0[0], 0.0);
        assert_eq!(a[&1].0[1], 5.0);
        assert!(oracle_attrs(&pts, &[]).is_err());
        assert!(oracle_attrs(&pts, &[vec![]]).is_err());
    }

    #[test]
    fn skyline_examples() {
        let one: BTreeMap<u64, AttrTuple> = [(4, AttrTuple(vec![1.0, 2.0]))].into();
        assert_eq!(oracle_skyline(&one).unwrap(), [4].into());

        let tied: BTreeMap<u64, AttrTuple> =
            [(1, AttrTuple(vec![1.0, 2.0])), (2, AttrTuple(vec![1.0, 2.0]))].into();
        assert_eq!(oracle_skyline(&tied).unwrap(), [1, 2].into());

        let single: BTreeMap<u64, AttrTuple> = [
            (1, AttrTuple(vec![3.0])),
            (2, AttrTuple(vec![1.0])),
            (3, AttrTuple(vec![1.0])),
            (4, AttrTuple(vec![2.0])),
        ]
        .into();
        assert_eq!(oracle_skyline(&single).unwrap(), [2, 3].into());
    }

    #[test]
    fn five_point_instance() {
        let pts = [
            p(0, 0.0, 0.0),
            p(1, 1.0, 1.0),
            p(2, 2.0, 2.0),
            p(3, 0.2, 0.9),
            p(4, 0.9, 0.1),
        ];
        let sets = vec![vec![p(0, 0.0, 0.0)], vec![p(0, 2.0, 2.0)]];
        let r = oracle_run(&pts, &sets).unwrap();
        // Every point trades distance to one set against the other, so no
        // point is dominated; e.g. (0.2,0.9) ~ (0.922, 2.110) and
        // (0.9,0.1) ~ (0.906, 2.195) are incomparable.
        assert_eq!(r.skyline_ids, [0, 1, 2, 3, 4].into());
    }

    #[test]
    fn idempotent_and_every_excluded_point_has_a_dominator() {
        let mut s = 77u64;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 1000) as f64 / 100.0
        };
        for _ in 0..20 {
            let attrs: BTreeMap<u64, AttrTuple> =
                (0..60).map(|i| (i, AttrTuple(vec![next(), next(), next()]))).collect();
            let sky = oracle_skyline(&attrs).unwrap();
            let restricted: BTreeMap<u64, AttrTuple> =
                sky.iter().map(|id| (*id, attrs[id].clone())).collect();
            assert_eq!(oracle_skyline(&restricted).unwrap(), sky);
            for (id, a) in &attrs {
                if !sky.contains(id) {
                    assert!(sky.iter().any(|s| dominates(&attrs[s], a).unwrap()));
                }
            }
        }
    }
}
