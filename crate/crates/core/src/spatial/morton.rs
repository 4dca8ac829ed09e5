//! Morton (Z-order) codes and the gap-offset table for grids whose sides are not powers of two.

use crate::{Error, Result};

const BITS_3D: u32 = 21;
const BITS_2D: u32 = 32;

fn check(coord: u64, bits: u32) -> Result<()> {
    if coord >> bits != 0 {
        Err(Error::MortonOverflow { coord, bits })
    } else {
        Ok(())
    }
}

fn spread3(mut x: u64) -> u64 {
    x &= 0x1f_ffff;
    x = (x | x << 32) & 0x001f_0000_0000_ffff;
    x = (x | x << 16) & 0x001f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

fn compact3(mut x: u64) -> u64 {
    x &= 0x1249_2492_4924_9249;
    x = (x ^ (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x ^ (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x ^ (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x ^ (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x ^ (x >> 32)) & 0x1f_ffff;
    x
}

fn spread2(mut x: u64) -> u64 {
    x &= 0xffff_ffff;
    x = (x | x << 16) & 0x0000_ffff_0000_ffff;
    x = (x | x << 8) & 0x00ff_00ff_00ff_00ff;
    x = (x | x << 4) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | x << 2) & 0x3333_3333_3333_3333;
    x = (x | x << 1) & 0x5555_5555_5555_5555;
    x
}

fn compact2(mut x: u64) -> u64 {
    x &= 0x5555_5555_5555_5555;
    x = (x ^ (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x ^ (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x ^ (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x ^ (x >> 8)) & 0x0000_ffff_0000_ffff;
    x = (x ^ (x >> 16)) & 0xffff_ffff;
    x
}

/// Interleaves three coordinates; `x` occupies bit 0.
pub fn encode3(x: u64, y: u64, z: u64) -> Result<u64> {
    check(x, BITS_3D)?;
    check(y, BITS_3D)?;
    check(z, BITS_3D)?;
    Ok(spread3(x) | spread3(y) << 1 | spread3(z) << 2)
}

pub fn decode3(code: u64) -> [u64; 3] {
    [compact3(code), compact3(code >> 1), compact3(code >> 2)]
}

pub fn encode2(x: u64, y: u64) -> Result<u64> {
    check(x, BITS_2D)?;
    check(y, BITS_2D)?;
    Ok(spread2(x) | spread2(y) << 1)
}

pub fn decode2(code: u64) -> [u64; 2] {
    [compact2(code), compact2(code >> 1)]
}

/// Maps ranks of in-space boxes (positions in Morton order) to Morton codes.
///
/// Each entry `(box_counter, offset)` says: from rank `box_counter` on, code = rank + offset,
/// until the next entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MortonOffsets {
    pub entries: Vec<(u64, u64)>,
    pub boxes: u64,
    dimension: usize,
}

impl MortonOffsets {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn code_of_rank(&self, rank: u64) -> u64 {
        let e = self.entries.partition_point(|&(c, _)| c <= rank) - 1;
        rank + self.entries[e].1
    }

    /// All in-space codes in increasing order, O(1) each.
    pub fn codes(&self) -> impl Iterator<Item = u64> + '_ {
        let mut e = 0;
        (0..self.boxes).map(move |r| {
            while e + 1 < self.entries.len() && self.entries[e + 1].0 <= r {
                e += 1;
            }
            r + self.entries[e].1
        })
    }
}

/// Depth-first traversal of the padded quadtree/octree. Complete and empty subtrees are
/// consumed in O(1); only subtrees straddling the grid border are expanded.
pub fn compute_morton_offsets(dims: &[usize]) -> Result<MortonOffsets> {
    let dim = dims.len();
    if !(dim == 2 || dim == 3) || dims.contains(&0) {
        return Err(Error::InvalidParameter(format!("morton offsets need 2 or 3 positive dims, got {dims:?}")));
    }
    let bits = if dim == 3 { BITS_3D } else { BITS_2D };
    let max = *dims.iter().max().unwrap() as u64;
    if max > 1u64 << bits {
        return Err(Error::MortonOverflow { coord: max - 1, bits });
    }
    let mut levels = 0u32;
    while (1u64 << levels) < max {
        levels += 1;
    }

    struct Node {
        origin: [u64; 3],
        level: u32,
    }
    let children = 1usize << dim;
    let mut stack = vec![Node { origin: [0; 3], level: levels }];
    let mut entries = Vec::new();
    let mut box_counter = 0u64;
    let mut offset = 0u64;
    let mut found_gap = true;

    while let Some(node) = stack.pop() {
        let side = 1u64 << node.level;
        let leaves = 1u64 << (node.level as usize * dim);
        let empty = (0..dim).any(|d| node.origin[d] >= dims[d] as u64);
        let complete = (0..dim).all(|d| node.origin[d] + side <= dims[d] as u64);
        if empty {
            offset += leaves;
            found_gap = true;
        } else if complete {
            if found_gap {
                entries.push((box_counter, offset));
                found_gap = false;
            }
            box_counter += leaves;
        } else {
            let half = side / 2;
            for c in (0..children).rev() {
                let mut origin = node.origin;
                for (d, o) in origin.iter_mut().enumerate().take(dim) {
                    *o += ((c >> d) & 1) as u64 * half;
                }
                stack.push(Node { origin, level: node.level - 1 });
            }
        }
    }
    Ok(MortonOffsets { entries, boxes: box_counter, dimension: dim })
}

/// Reference implementation: enumerate, encode, sort.
pub fn enumerate_codes(dims: &[usize]) -> Result<Vec<u64>> {
    let mut codes = Vec::new();
    match dims.len() {
        2 => {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    codes.push(encode2(x as u64, y as u64)?);
                }
            }
        }
        3 => {
            for z in 0..dims[2] {
                for y in 0..dims[1] {
                    for x in 0..dims[0] {
                        codes.push(encode3(x as u64, y as u64, z as u64)?);
                    }
                }
            }
        }
        _ => return Err(Error::InvalidParameter(format!("unsupported dims {dims:?}"))),
    }
    codes.sort_unstable();
    Ok(codes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_d_hand_values() {
        assert_eq!(encode2(0, 0).unwrap(), 0);
        assert_eq!(encode2(1, 1).unwrap(), 3);
        assert_eq!(encode2(1, 0).unwrap(), 1);
        assert_eq!(encode2(0, 1).unwrap(), 2);
        assert_eq!(encode2(2, 2).unwrap(), 12);
    }

    #[test]
    fn three_by_three_offsets() {
        let off = compute_morton_offsets(&[3, 3]).unwrap();
        assert_eq!(off.entries, vec![(0, 0), (5, 1), (6, 2), (8, 4)]);
        assert_eq!(off.codes().collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 6, 8, 9, 12]);
        assert_eq!(enumerate_codes(&[3, 3]).unwrap(), vec![0, 1, 2, 3, 4, 6, 8, 9, 12]);
        assert_eq!(off.code_of_rank(8), 12);
    }

    #[test]
    fn power_of_two_has_single_entry() {
        assert_eq!(compute_morton_offsets(&[4, 4]).unwrap().entries, vec![(0, 0)]);
        assert_eq!(compute_morton_offsets(&[8, 8, 8]).unwrap().entries, vec![(0, 0)]);
        assert_eq!(compute_morton_offsets(&[1, 1, 1]).unwrap().entries, vec![(0, 0)]);
    }

    #[test]
    fn round_trip_encoding() {
        for &(x, y, z) in &[(0, 0, 0), (1, 2, 3), ((1 << 21) - 1, 5, (1 << 21) - 1), (12345, 54321, 99999)] {
            assert_eq!(decode3(encode3(x, y, z).unwrap()), [x, y, z]);
        }
        assert_eq!(decode2(encode2(u32::MAX as u64, 7).unwrap()), [u32::MAX as u64, 7]);
    }

    #[test]
    fn overflow_rejected() {
        assert!(matches!(encode3(1 << 21, 0, 0), Err(Error::MortonOverflow { bits: 21, .. })));
        assert!(matches!(encode2(1 << 32, 0), Err(Error::MortonOverflow { bits: 32, .. })));
    }

    #[test]
    fn small_dims_match_enumeration() {
        for x in 1..=9 {
            for y in 1..=9 {
                for z in 1..=9 {
                    let off = compute_morton_offsets(&[x, y, z]).unwrap();
                    assert_eq!(off.codes().collect::<Vec<_>>(), enumerate_codes(&[x, y, z]).unwrap());
                }
            }
        }
    }
}
