//! Points, minimum bounding rectangles and the distances between them.
//!
//! The free functions check dimensionality and are the public contract. The
//! `Mbr` methods skip the check and are used on hot paths where every input
//! was validated up front.

use smallvec::SmallVec;

use crate::error::{usage, Result};

/// Coordinate storage; inline for the common low-dimensional case.
pub type Coords = SmallVec<[f64; 3]>;

/// An identified location in d-dimensional Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub id: u64,
    pub coords: Coords,
}

impl Point {
    pub fn new(id: u64, coords: impl IntoIterator<Item = f64>) -> Self {
        Self {
            id,
            coords: coords.into_iter().collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// The degenerate rectangle `lo = hi = coords`.
    pub fn mbr(&self) -> Mbr {
        Mbr {
            lo: self.coords.clone(),
            hi: self.coords.clone(),
        }
    }
}

/// Axis-aligned minimum bounding rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Mbr {
    pub lo: Coords,
    pub hi: Coords,
}

impl Mbr {
    /// Builds a rectangle, rejecting inverted, non-finite or mismatched bounds.
    pub fn new(lo: impl IntoIterator<Item = f64>, hi: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mbr = Self {
            lo: lo.into_iter().collect(),
            hi: hi.into_iter().collect(),
        };
        if mbr.lo.len() != mbr.hi.len() {
            return Err(usage!(
                "mbr bounds have {} and {} axes",
                mbr.lo.len(),
                mbr.hi.len()
            ));
        }
        if !mbr.is_valid() {
            return Err(usage!("invalid mbr {:?}", mbr));
        }
        Ok(mbr)
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn is_valid(&self) -> bool {
        self.lo.len() == self.hi.len()
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .all(|(l, h)| l.is_finite() && h.is_finite() && l <= h)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Smallest rectangle covering both.
    pub fn union(&self, other: &Mbr) -> Mbr {
        Mbr {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn expand(&mut self, other: &Mbr) {
        for (a, b) in self.lo.iter_mut().zip(&other.lo) {
            *a = a.min(*b);
        }
        for (a, b) in self.hi.iter_mut().zip(&other.hi) {
            *a = a.max(*b);
        }
    }

    pub fn contains(&self, other: &Mbr) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }

    pub fn area(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Sum of edge lengths (half the perimeter in 2-D).
    pub fn margin(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).sum()
    }

    pub fn overlap_area(&self, other: &Mbr) -> f64 {
        let mut area = 1.0;
        for k in 0..self.dims() {
            let lo = self.lo[k].max(other.lo[k]);
            let hi = self.hi[k].min(other.hi[k]);
            if hi <= lo {
                return 0.0;
            }
            area *= hi - lo;
        }
        area
    }

    pub fn center(&self) -> Coords {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Minimum distance between any point of `self` and any point of `other`.
    pub fn min_min_dist(&self, other: &Mbr) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        let mut sum = 0.0;
        for k in 0..self.dims() {
            let gap = (self.lo[k] - other.hi[k])
                .max(other.lo[k] - self.hi[k])
                .max(0.0);
            sum += gap * gap;
        }
        sum.sqrt()
    }

    /// Maximum distance between any point of `self` and any point of `other`.
    pub fn max_max_dist(&self, other: &Mbr) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        let mut sum = 0.0;
        for k in 0..self.dims() {
            let spread = (self.lo[k] - other.hi[k])
                .abs()
                .max((self.hi[k] - other.lo[k]).abs());
            sum += spread * spread;
        }
        sum.sqrt()
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(usage!("dimension mismatch: {a} vs {b}"));
    }
    Ok(())
}

/// Euclidean distance between two points.
pub fn point_dist(p: &Point, q: &Point) -> Result<f64> {
    check_dims(p.dims(), q.dims())?;
    Ok(coord_dist(&p.coords, &q.coords))
}

/// Euclidean distance between raw coordinate slices of equal length.
pub(crate) fn coord_dist(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (a, b) in p.iter().zip(q) {
        let d = a - b;
        sum += d * d;
    }
    sum.sqrt()
}

pub fn min_min_dist(a: &Mbr, b: &Mbr) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    Ok(a.min_min_dist(b))
}

pub fn max_max_dist(a: &Mbr, b: &Mbr) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    Ok(a.max_max_dist(b))
}

/// Distance from a point to the nearest point of a rectangle.
pub fn min_dist_point_mbr(p: &Point, b: &Mbr) -> Result<f64> {
    check_dims(p.dims(), b.dims())?;
    Ok(p.mbr().min_min_dist(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(lo: [f64; 2], hi: [f64; 2]) -> Mbr {
        Mbr::new(lo, hi).unwrap()
    }

    /// Samples an n×n grid over the rectangle, corners included.
    fn grid(m: &Mbr, n: usize) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let t = i as f64 / (n - 1) as f64;
                let u = j as f64 / (n - 1) as f64;
                out.push([
                    m.lo[0] + t * (m.hi[0] - m.lo[0]),
                    m.lo[1] + u * (m.hi[1] - m.lo[1]),
                ]);
            }
        }
        out
    }

    fn sampled_extrema(a: &Mbr, b: &Mbr, n: usize) -> (f64, f64) {
        let ga = grid(a, n);
        let gb = grid(b, n);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for p in &ga {
            for q in &gb {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo, hi)
    }

    #[test]
    fn point_dist_examples() {
        let o = Point::new(0, [0.0, 0.0]);
        assert_eq!(point_dist(&o, &Point::new(1, [3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(point_dist(&o, &o).unwrap(), 0.0);

        // Dense sampling of the segment from the origin: the sample at t=1
        // is the far endpoint and the largest sampled norm.
        let far = Point::new(2, [1.0, 1.0]);
        let sampled = (0..=10_000)
            .map(|i| {
                let t = i as f64 / 10_000.0;
                (2.0 * t * t).sqrt()
            })
            .fold(0.0_f64, f64::max);
        assert!((point_dist(&o, &far).unwrap() - sampled).abs() < 1e-12);
        assert!((point_dist(&o, &far).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let a = Point::new(0, [0.0, 0.0]);
        let b = Point::new(1, [0.0, 0.0, 0.0]);
        assert!(matches!(point_dist(&a, &b), Err(crate::Error::Usage(_))));
        assert!(min_min_dist(&a.mbr(), &b.mbr()).is_err());
        assert!(max_max_dist(&a.mbr(), &b.mbr()).is_err());
        assert!(min_dist_point_mbr(&a, &b.mbr()).is_err());
    }

    #[test]
    fn invalid_mbr_rejected() {
        assert!(Mbr::new([1.0, 0.0], [0.0, 1.0]).is_err());
        assert!(Mbr::new([0.0, f64::NAN], [1.0, 1.0]).is_err());
        assert!(Mbr::new([0.0], [1.0, 1.0]).is_err());
    }

    #[test]
    fn min_min_dist_examples() {
        let a = rect([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(min_min_dist(&a, &a).unwrap(), 0.0);
        assert_eq!(
            min_min_dist(&a, &rect([0.5, 0.5], [2.0, 2.0])).unwrap(),
            0.0
        );
        let b = rect([2.0, 0.0], [3.0, 1.0]);
        let closed = min_min_dist(&a, &b).unwrap();
        assert_eq!(closed, 1.0);
        let (sampled, _) = sampled_extrema(&a, &b, 200);
        assert!((closed - sampled).abs() < 1e-2);
    }

    #[test]
    fn max_max_dist_examples() {
        let p = Point::new(0, [0.3, 0.7]).mbr();
        assert_eq!(max_max_dist(&p, &p).unwrap(), 0.0);

        let corners = |m: &Mbr| {
            vec![
                [m.lo[0], m.lo[1]],
                [m.lo[0], m.hi[1]],
                [m.hi[0], m.lo[1]],
                [m.hi[0], m.hi[1]],
            ]
        };
        let corner_max = |a: &Mbr, b: &Mbr| {
            let mut best: f64 = 0.0;
            for p in corners(a) {
                for q in corners(b) {
                    best = best.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
                }
            }
            best
        };

        let a = rect([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(max_max_dist(&a, &a).unwrap(), corner_max(&a, &a));
        assert!((max_max_dist(&a, &a).unwrap() - std::f64::consts::SQRT_2).abs() < 1e-15);

        let b = rect([2.0, 0.0], [3.0, 1.0]);
        assert_eq!(max_max_dist(&a, &b).unwrap(), corner_max(&a, &b));
        assert!((max_max_dist(&a, &b).unwrap() - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn min_dist_point_mbr_examples() {
        let b = rect([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(
            min_dist_point_mbr(&Point::new(0, [0.5, 0.5]), &b).unwrap(),
            0.0
        );
        assert_eq!(
            min_dist_point_mbr(&Point::new(0, [0.0, 0.0]), &rect([3.0, 4.0], [5.0, 6.0])).unwrap(),
            5.0
        );
        let p = Point::new(0, [2.0, 0.5]);
        let closed = min_dist_point_mbr(&p, &b).unwrap();
        let (sampled, _) = sampled_extrema(&p.mbr(), &b, 200);
        assert_eq!(closed, 1.0);
        assert!((closed - sampled).abs() < 1e-2);
    }

    #[test]
    fn point_dist_agrees_with_degenerate_min_min() {
        let p = Point::new(0, [0.125, -3.5]);
        let q = Point::new(1, [7.25, 2.0]);
        assert_eq!(
            point_dist(&p, &q).unwrap(),
            min_min_dist(&p.mbr(), &q.mbr()).unwrap()
        );
        assert_eq!(
            point_dist(&p, &q).unwrap(),
            max_max_dist(&p.mbr(), &q.mbr()).unwrap()
        );
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn mbr_strategy() -> impl Strategy<Value = Mbr> {
            (
                -10.0..10.0f64,
                -10.0..10.0f64,
                0.0..5.0f64,
                0.0..5.0f64,
            )
                .prop_map(|(x, y, w, h)| Mbr::new([x, y], [x + w, y + h]).unwrap())
        }

        proptest! {
            #[test]
            fn symmetric_and_ordered(a in mbr_strategy(), b in mbr_strategy()) {
                prop_assert_eq!(a.min_min_dist(&b), b.min_min_dist(&a));
                prop_assert_eq!(a.max_max_dist(&b), b.max_max_dist(&a));
                prop_assert!(0.0 <= a.min_min_dist(&b));
                prop_assert!(a.min_min_dist(&b) <= a.max_max_dist(&b));
            }

            #[test]
            fn bounds_sampled_distances(
                a in mbr_strategy(),
                b in mbr_strategy(),
                s in proptest::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64), 16),
            ) {
                let lo = a.min_min_dist(&b);
                let hi = a.max_max_dist(&b);
                for (t0, t1, u0, u1) in s {
                    let p = [a.lo[0] + t0 * (a.hi[0] - a.lo[0]), a.lo[1] + t1 * (a.hi[1] - a.lo[1])];
                    let q = [b.lo[0] + u0 * (b.hi[0] - b.lo[0]), b.lo[1] + u1 * (b.hi[1] - b.lo[1])];
                    let d = coord_dist(&p, &q);
                    prop_assert!(lo <= d + 1e-12);
                    prop_assert!(d <= hi + 1e-12);
                }
            }

            #[test]
            fn containment_monotone(
                a in mbr_strategy(),
                b in mbr_strategy(),
                t in (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64),
            ) {
                // Shrink `a` to a sub-rectangle.
                let x = [a.lo[0] + t.0 * (a.hi[0] - a.lo[0]), a.lo[0] + t.1 * (a.hi[0] - a.lo[0])];
                let y = [a.lo[1] + t.2 * (a.hi[1] - a.lo[1]), a.lo[1] + t.3 * (a.hi[1] - a.lo[1])];
                let sub = Mbr::new([x[0].min(x[1]), y[0].min(y[1])], [x[0].max(x[1]), y[0].max(y[1])]).unwrap();
                prop_assert!(a.contains(&sub));
                prop_assert!(sub.min_min_dist(&b) >= a.min_min_dist(&b));
                prop_assert!(sub.max_max_dist(&b) <= a.max_max_dist(&b));
            }
        }
    }
}
