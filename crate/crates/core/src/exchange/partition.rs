//! Static block decomposition of the simulation space over ranks.
//!
//! The space is tiled by partition boxes of side `factor * interaction_length`. Ranks are laid
//! out as an `rx * ry * rz` brick of blocks, each block a contiguous range of partition boxes per
//! axis. Ownership clamps coordinates to the box range, so the outermost blocks also own
//! everything beyond the space bounds.

use crate::{Error, Real3, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionMap {
    lo: Real3,
    hi: Real3,
    box_length: f64,
    boxes: [usize; 3],
    blocks: [usize; 3],
    splits: [Vec<usize>; 3],
}

fn smallest_prime_factor(n: usize) -> usize {
    (2..).take_while(|p| p * p <= n).find(|p| n % p == 0).unwrap_or(n)
}

impl PartitionMap {
    pub fn new(lo: Real3, hi: Real3, ranks: usize, interaction_length: f64, factor: u32) -> Result<Self> {
        if ranks == 0 {
            return Err(Error::InvalidParameter("rank count must be at least 1".into()));
        }
        if factor == 0 {
            return Err(Error::InvalidParameter("partition factor must be at least 1".into()));
        }
        if !(interaction_length > 0.0) || !(0..3).all(|d| hi[d] > lo[d]) {
            return Err(Error::InvalidParameter("partitioning needs a positive box length and a non-empty space".into()));
        }
        let box_length = factor as f64 * interaction_length;
        let boxes = [0, 1, 2].map(|d| (((hi[d] - lo[d]) / box_length).ceil() as usize).max(1));
        let total: usize = boxes.iter().product();
        if ranks > total {
            return Err(Error::TooManyRanks { ranks, boxes: total });
        }
        // hand out prime factors to the axis with the most boxes per block
        let mut blocks = [1usize; 3];
        let mut rest = ranks;
        while rest > 1 {
            let p = smallest_prime_factor(rest);
            let axis = (0..3)
                .filter(|&d| blocks[d] * p <= boxes[d])
                .max_by(|&a, &b| (boxes[a] as f64 / blocks[a] as f64).total_cmp(&(boxes[b] as f64 / blocks[b] as f64)).then(b.cmp(&a)))
                .ok_or(Error::TooManyRanks { ranks, boxes: total })?;
            blocks[axis] *= p;
            rest /= p;
        }
        let splits = [0, 1, 2].map(|d| (0..=blocks[d]).map(|k| k * boxes[d] / blocks[d]).collect());
        Ok(Self { lo, hi, box_length, boxes, blocks, splits })
    }

    pub fn ranks(&self) -> usize {
        self.blocks.iter().product()
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn boxes(&self) -> [usize; 3] {
        self.boxes
    }

    pub fn blocks(&self) -> [usize; 3] {
        self.blocks
    }

    pub fn bounds(&self) -> (Real3, Real3) {
        (self.lo, self.hi)
    }

    pub fn num_boxes(&self) -> usize {
        self.boxes.iter().product()
    }

    pub fn box_coords_of(&self, p: &Real3) -> [usize; 3] {
        [0, 1, 2].map(|d| {
            let t = ((p[d] - self.lo[d]) / self.box_length).floor();
            if t.is_nan() || t < 0.0 {
                0
            } else {
                (t as usize).min(self.boxes[d] - 1)
            }
        })
    }

    pub fn box_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.boxes[0] * (c[1] + self.boxes[1] * c[2])
    }

    pub fn box_coords(&self, b: usize) -> [usize; 3] {
        [b % self.boxes[0], (b / self.boxes[0]) % self.boxes[1], b / (self.boxes[0] * self.boxes[1])]
    }

    fn block_of_box(&self, c: [usize; 3]) -> [usize; 3] {
        [0, 1, 2].map(|d| self.splits[d].partition_point(|&s| s <= c[d]) - 1)
    }

    fn rank_of_block(&self, b: [usize; 3]) -> u32 {
        (b[0] + self.blocks[0] * (b[1] + self.blocks[1] * b[2])) as u32
    }

    fn block_of_rank(&self, r: u32) -> [usize; 3] {
        let r = r as usize;
        [r % self.blocks[0], (r / self.blocks[0]) % self.blocks[1], r / (self.blocks[0] * self.blocks[1])]
    }

    pub fn owner_of_box(&self, b: usize) -> u32 {
        self.rank_of_block(self.block_of_box(self.box_coords(b)))
    }

    pub fn owner_of(&self, p: &Real3) -> u32 {
        self.rank_of_block(self.block_of_box(self.box_coords_of(p)))
    }

    /// Half-open box range per axis owned by `r`.
    pub fn box_range(&self, r: u32) -> [(usize, usize); 3] {
        let b = self.block_of_rank(r);
        [0, 1, 2].map(|d| (self.splits[d][b[d]], self.splits[d][b[d] + 1]))
    }

    /// Owned region; faces on the outside of the space extend to infinity.
    pub fn region(&self, r: u32) -> (Real3, Real3) {
        let range = self.box_range(r);
        let mut lo = Real3::zeros();
        let mut hi = Real3::zeros();
        for d in 0..3 {
            let (a, b) = range[d];
            lo[d] = if a == 0 { f64::NEG_INFINITY } else { self.lo[d] + a as f64 * self.box_length };
            hi[d] = if b == self.boxes[d] { f64::INFINITY } else { self.lo[d] + b as f64 * self.box_length };
        }
        (lo, hi)
    }

    /// Owned region clipped to the space bounds.
    pub fn region_in_space(&self, r: u32) -> (Real3, Real3) {
        let (lo, hi) = self.region(r);
        (lo.zip_map(&self.lo, f64::max), hi.zip_map(&self.hi, f64::min))
    }

    /// Extent of partition box `b` clipped to the space bounds.
    pub fn box_bounds(&self, b: usize) -> (Real3, Real3) {
        let c = self.box_coords(b);
        let lo = Real3::from_fn(|d, _| self.lo[d] + c[d] as f64 * self.box_length);
        let hi = Real3::from_fn(|d, _| (self.lo[d] + (c[d] + 1) as f64 * self.box_length).min(self.hi[d]));
        (lo, hi)
    }

    pub fn distance_to_region(&self, p: &Real3, r: u32) -> f64 {
        let (lo, hi) = self.region(r);
        let mut d2 = 0.0;
        for d in 0..3 {
            let e = if p[d] < lo[d] {
                lo[d] - p[d]
            } else if p[d] > hi[d] {
                p[d] - hi[d]
            } else {
                0.0
            };
            d2 += e * e;
        }
        d2.sqrt()
    }

    /// Ranks whose blocks touch `r`'s block, diagonals included.
    pub fn neighbor_ranks(&self, r: u32) -> Vec<u32> {
        let b = self.block_of_rank(r);
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let n = [b[0] as i64 + dx, b[1] as i64 + dy, b[2] as i64 + dz];
                    if (0..3).all(|d| n[d] >= 0 && n[d] < self.blocks[d] as i64) {
                        let rank = self.rank_of_block(n.map(|x| x as usize));
                        if rank != r {
                            out.push(rank);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// What a rank knows locally: its own boxes and one layer around them.
#[derive(Clone, Debug)]
pub struct LocalPartitionView<'a> {
    map: &'a PartitionMap,
    known: [(usize, usize); 3],
}

impl<'a> LocalPartitionView<'a> {
    pub fn new(map: &'a PartitionMap, rank: u32) -> Self {
        let range = map.box_range(rank);
        let known = [0, 1, 2].map(|d| (range[d].0.saturating_sub(1), (range[d].1 + 1).min(map.boxes[d])));
        Self { map, known }
    }

    /// Owner of the box containing `p`, if that box is locally known.
    pub fn lookup(&self, p: &Real3) -> Option<u32> {
        let c = self.map.box_coords_of(p);
        (0..3).all(|d| c[d] >= self.known[d].0 && c[d] < self.known[d].1).then(|| self.map.owner_of(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(ranks: usize, factor: u32) -> Result<PartitionMap> {
        PartitionMap::new(Real3::zeros(), Real3::repeat(100.0), ranks, 10.0, factor)
    }

    #[test]
    fn one_rank_owns_everything() {
        let m = cube(1, 1).unwrap();
        assert_eq!(m.owner_of(&Real3::new(-5.0, 50.0, 1e9)), 0);
        assert!(m.neighbor_ranks(0).is_empty());
        assert_eq!(m.region(0).0[0], f64::NEG_INFINITY);
    }

    #[test]
    fn two_ranks_split_in_half() {
        let m = cube(2, 1).unwrap();
        assert_eq!(m.blocks(), [2, 1, 1]);
        assert_eq!(m.owner_of(&Real3::new(49.9, 0.0, 0.0)), 0);
        assert_eq!(m.owner_of(&Real3::new(50.0, 0.0, 0.0)), 1);
        assert_eq!(m.region(0).1[0], 50.0);
        assert_eq!(m.neighbor_ranks(0), vec![1]);
    }

    #[test]
    fn four_ranks_form_bricks() {
        let m = cube(4, 1).unwrap();
        assert_eq!(m.blocks(), [2, 2, 1]);
        assert_eq!(m.neighbor_ranks(0), vec![1, 2, 3]);
    }

    #[test]
    fn factor_scales_boxes() {
        let m = cube(1, 3).unwrap();
        assert_eq!(m.box_length(), 30.0);
        assert_eq!(m.boxes(), [4, 4, 4]);
    }

    #[test]
    fn too_many_ranks() {
        assert!(matches!(cube(65, 3), Err(Error::TooManyRanks { ranks: 65, boxes: 64 })));
        assert!(cube(7, 10).is_err());
    }

    #[test]
    fn every_box_has_one_owner() {
        // 5 boxes per axis: 7 and 11 have no block layout
        assert!(cube(7, 2).is_err() && cube(11, 2).is_err());
        for ranks in [1, 2, 3, 4, 5, 6, 8, 9, 10, 12] {
            let m = cube(ranks, 2).unwrap();
            let mut counts = vec![0usize; ranks];
            for b in 0..m.num_boxes() {
                counts[m.owner_of_box(b) as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c > 0), "{ranks}: {counts:?}");
            assert_eq!(counts.iter().sum::<usize>(), m.num_boxes());
        }
    }

    #[test]
    fn distance_and_view() {
        let m = cube(2, 1).unwrap();
        assert_eq!(m.distance_to_region(&Real3::new(40.0, 5.0, 5.0), 1), 10.0);
        assert_eq!(m.distance_to_region(&Real3::new(60.0, 5.0, 5.0), 1), 0.0);
        let v = LocalPartitionView::new(&m, 0);
        assert_eq!(v.lookup(&Real3::new(55.0, 0.0, 0.0)), Some(1));
        assert_eq!(v.lookup(&Real3::new(75.0, 0.0, 0.0)), None);
    }
}
