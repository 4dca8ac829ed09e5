use std::io::Write;

use rayon::prelude::*;

use super::morton;
use crate::{Error, Real3, Result};

const NIL: u32 = u32::MAX;

/// Uniform grid with timestamped boxes and an array-based successor list.
///
/// A box whose stamp differs from the grid's current stamp is empty, so a rebuild never has
/// to clear the box arrays.
#[derive(Clone, Debug)]
pub struct UniformGrid {
    box_length: f64,
    dims: [usize; 3],
    origin: Real3,
    box_stamp: Vec<u64>,
    box_head: Vec<u32>,
    box_size: Vec<u32>,
    successor: Vec<u32>,
    agent_box: Vec<u32>,
    positions: Vec<Real3>,
    stamp: u64,
    boxes_touched: usize,
}

impl Default for UniformGrid {
    fn default() -> Self {
        Self {
            box_length: 1.0,
            dims: [1, 1, 1],
            origin: Real3::zeros(),
            box_stamp: Vec::new(),
            box_head: Vec::new(),
            box_size: Vec::new(),
            successor: Vec::new(),
            agent_box: Vec::new(),
            positions: Vec::new(),
            stamp: 0,
            boxes_touched: 0,
        }
    }
}

impl UniformGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a grid over `positions` whose boxes are at least `interaction_length` wide.
    pub fn build(positions: &[Real3], interaction_length: f64) -> Result<Self> {
        let mut g = Self::new();
        g.rebuild(positions, interaction_length)?;
        Ok(g)
    }

    /// Rebuilds over the bounding box of `positions`.
    pub fn rebuild(&mut self, positions: &[Real3], interaction_length: f64) -> Result<()> {
        let (lo, hi) = bounding_box(positions);
        self.rebuild_in(positions, interaction_length, lo, hi)
    }

    /// Rebuilds over an explicit region, which must contain every position.
    pub fn rebuild_in(&mut self, positions: &[Real3], box_length: f64, lo: Real3, hi: Real3) -> Result<()> {
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::InvalidParameter(format!("box length {box_length} must be positive")));
        }
        if let Some(p) = positions.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter(format!("non-finite position {p:?}")));
        }
        self.box_length = box_length;
        self.origin = lo;
        for d in 0..3 {
            let extent = (hi[d] - lo[d]).max(0.0);
            self.dims[d] = (extent / box_length).floor() as usize + 1;
        }
        let nboxes = self.num_boxes();
        if self.box_stamp.len() < nboxes {
            // fresh boxes carry stamp 0, which is never current
            self.box_stamp.resize(nboxes, 0);
            self.box_head.resize(nboxes, NIL);
            self.box_size.resize(nboxes, 0);
        }
        self.stamp += 1;
        self.boxes_touched = 0;

        let boxes: Vec<u32> = positions.par_iter().map(|p| self.box_index_of(p) as u32).collect();
        self.positions.clear();
        self.positions.extend_from_slice(positions);
        self.successor.clear();
        self.successor.resize(positions.len(), NIL);
        self.agent_box.clear();
        self.agent_box.resize(positions.len(), NIL);
        for (i, b) in boxes.into_iter().enumerate() {
            self.link(i, b as usize);
        }
        Ok(())
    }

    fn link(&mut self, i: usize, b: usize) {
        if self.box_stamp[b] != self.stamp {
            self.box_stamp[b] = self.stamp;
            self.box_head[b] = NIL;
            self.box_size[b] = 0;
            self.boxes_touched += 1;
        }
        self.successor[i] = self.box_head[b];
        self.box_head[b] = i as u32;
        self.box_size[b] += 1;
        self.agent_box[i] = b as u32;
    }

    fn unlink(&mut self, i: usize) -> Result<()> {
        let b = self.agent_box.get(i).copied().filter(|&b| b != NIL).ok_or(Error::NotInGrid(i))? as usize;
        let mut prev = NIL;
        let mut cur = self.box_head[b];
        while cur != NIL && cur as usize != i {
            prev = cur;
            cur = self.successor[cur as usize];
        }
        debug_assert_eq!(cur as usize, i);
        let next = self.successor[i];
        if prev == NIL {
            self.box_head[b] = next;
        } else {
            self.successor[prev as usize] = next;
        }
        self.box_size[b] -= 1;
        self.successor[i] = NIL;
        self.agent_box[i] = NIL;
        Ok(())
    }

    /// Adds one agent without rebuilding. Positions outside the grid land in the nearest edge box.
    pub fn insert(&mut self, index: usize, position: Real3) {
        if index >= self.positions.len() {
            self.positions.resize(index + 1, Real3::zeros());
            self.successor.resize(index + 1, NIL);
            self.agent_box.resize(index + 1, NIL);
        }
        if self.agent_box[index] != NIL {
            let _ = self.unlink(index);
        }
        self.positions[index] = position;
        let b = self.box_index_of(&position);
        self.link(index, b);
    }

    pub fn remove(&mut self, index: usize) -> Result<()> {
        self.unlink(index)
    }

    pub fn update_position(&mut self, index: usize, position: Real3) -> Result<()> {
        self.unlink(index)?;
        self.positions[index] = position;
        let b = self.box_index_of(&position);
        self.link(index, b);
        Ok(())
    }

    pub fn contains(&self, index: usize) -> bool {
        self.agent_box.get(index).is_some_and(|&b| b != NIL)
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Real3 {
        self.origin
    }

    pub fn num_boxes(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    /// Boxes initialised during the last build and subsequent inserts.
    pub fn boxes_touched(&self) -> usize {
        self.boxes_touched
    }

    pub fn position(&self, index: usize) -> Real3 {
        self.positions[index]
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn box_coords_of(&self, p: &Real3) -> [usize; 3] {
        let mut c = [0usize; 3];
        for d in 0..3 {
            let t = ((p[d] - self.origin[d]) / self.box_length).floor();
            c[d] = if t <= 0.0 { 0 } else { (t as usize).min(self.dims[d] - 1) };
        }
        c
    }

    pub fn box_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn box_coords(&self, b: usize) -> [usize; 3] {
        [b % self.dims[0], (b / self.dims[0]) % self.dims[1], b / (self.dims[0] * self.dims[1])]
    }

    fn box_index_of(&self, p: &Real3) -> usize {
        self.box_index(self.box_coords_of(p))
    }

    /// Number of agents in box `b` (zero for stale boxes).
    pub fn box_population(&self, b: usize) -> usize {
        if self.box_stamp.get(b) == Some(&self.stamp) {
            self.box_size[b] as usize
        } else {
            0
        }
    }

    /// Agents in box `b`, most recently inserted first.
    pub fn box_agents(&self, b: usize) -> BoxIter<'_> {
        let head = if self.box_population(b) > 0 { self.box_head[b] } else { NIL };
        BoxIter { grid: self, cur: head }
    }

    /// Calls `visit(j, squared_distance)` for every other agent within `radius` of agent `index`.
    pub fn for_each_neighbor(&self, index: usize, radius: f64, mut visit: impl FnMut(usize, f64)) -> Result<()> {
        if !self.contains(index) {
            return Err(Error::NotInGrid(index));
        }
        debug_assert!(radius <= self.box_length * (1.0 + 1e-12));
        let p = self.positions[index];
        self.scan(&p, radius, |j, d2| {
            if j != index {
                visit(j, d2)
            }
        });
        Ok(())
    }

    /// Calls `visit(j, squared_distance)` for every agent within `radius` of `p`.
    pub fn for_each_within(&self, p: &Real3, radius: f64, visit: impl FnMut(usize, f64)) {
        self.scan(p, radius, visit);
    }

    fn scan(&self, p: &Real3, radius: f64, mut visit: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let reach = ((radius / self.box_length).ceil() as usize).max(1);
        let c = self.box_coords_of(p);
        let lo = |d: usize| c[d].saturating_sub(reach);
        let hi = |d: usize| (c[d] + reach).min(self.dims[d] - 1);
        for z in lo(2)..=hi(2) {
            for y in lo(1)..=hi(1) {
                for x in lo(0)..=hi(0) {
                    let b = self.box_index([x, y, z]);
                    for j in self.box_agents(b) {
                        let d2 = (self.positions[j] - p).norm_squared();
                        if d2 <= r2 {
                            visit(j, d2);
                        }
                    }
                }
            }
        }
    }

    /// Occupancy dump: one row per non-empty box with its Morton code.
    pub fn write_occupancy_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["box", "morton", "count"])?;
        for b in 0..self.num_boxes() {
            let n = self.box_population(b);
            if n > 0 {
                let [x, y, z] = self.box_coords(b);
                let code = morton::encode3(x as u64, y as u64, z as u64)?;
                w.write_record([b.to_string(), code.to_string(), n.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub struct BoxIter<'a> {
    grid: &'a UniformGrid,
    cur: u32,
}

impl Iterator for BoxIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.cur == NIL {
            return None;
        }
        let i = self.cur as usize;
        self.cur = self.grid.successor[i];
        Some(i)
    }
}

pub fn bounding_box(positions: &[Real3]) -> (Real3, Real3) {
    if positions.is_empty() {
        return (Real3::zeros(), Real3::zeros());
    }
    let mut lo = Real3::repeat(f64::INFINITY);
    let mut hi = Real3::repeat(f64::NEG_INFINITY);
    for p in positions {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}
