//! Explicit central-difference diffusion with linear decay on a uniform lattice.
//!
//! Points outside the lattice count as zero, so substance leaves through the boundary.

use std::io::Write;

use rayon::prelude::*;

use crate::{Error, Real3, Result};

#[derive(Clone, Debug)]
pub struct DiffusionGrid {
    name: String,
    origin: Real3,
    spacing: Real3,
    dims: [usize; 3],
    nu: f64,
    mu: f64,
    dt: f64,
    u: Vec<f64>,
    scratch: Vec<f64>,
}

/// One secretion event, merged into the lattice in a fixed order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Secretion {
    pub substance: u16,
    pub node: u32,
    pub key: u64,
    pub amount: f64,
}

impl DiffusionGrid {
    pub fn new(name: impl Into<String>, origin: Real3, spacing: Real3, dims: [usize; 3], nu: f64, mu: f64, dt: f64) -> Result<Self> {
        if dims.contains(&0) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParameter(format!("bad lattice dims {dims:?} spacing {spacing:?}")));
        }
        if nu < 0.0 || mu < 0.0 || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("bad coefficients nu={nu} mu={mu} dt={dt}")));
        }
        let factor = nu * dt * spacing.iter().map(|h| 1.0 / (h * h)).sum::<f64>();
        if factor > 0.5 {
            return Err(Error::UnstableDiffusion(factor));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self { name: name.into(), origin, spacing, dims, nu, mu, dt, u: vec![0.0; n], scratch: vec![0.0; n] })
    }

    /// Lattice of `resolution` nodes per axis spanning `[lo, hi]` inclusive.
    pub fn over_domain(name: impl Into<String>, lo: Real3, hi: Real3, resolution: usize, nu: f64, mu: f64, dt: f64) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidParameter(format!("resolution {resolution} < 2")));
        }
        let spacing = (hi - lo) / (resolution - 1) as f64;
        Self::new(name, lo, spacing, [resolution; 3], nu, mu, dt)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Real3 {
        self.spacing
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.u
    }

    pub fn concentrations_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, node: usize) -> [usize; 3] {
        [node % self.dims[0], (node / self.dims[0]) % self.dims[1], node / (self.dims[0] * self.dims[1])]
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.u[self.index(i, j, k)]
    }

    pub fn node_position(&self, node: usize) -> Real3 {
        let c = self.coords(node);
        Real3::from_fn(|d, _| self.origin[d] + c[d] as f64 * self.spacing[d])
    }

    /// Nearest node; exact midpoints go to the lower index. Outside points are clamped.
    pub fn node_of(&self, p: &Real3) -> usize {
        let mut c = [0usize; 3];
        for d in 0..3 {
            let t = (p[d] - self.origin[d]) / self.spacing[d];
            let idx = (t - 0.5).ceil();
            c[d] = if idx <= 0.0 || idx.is_nan() { 0 } else { (idx as usize).min(self.dims[d] - 1) };
        }
        self.index(c[0], c[1], c[2])
    }

    pub fn total(&self) -> f64 {
        self.u.iter().sum()
    }

    pub fn increase_concentration(&mut self, p: &Real3, amount: f64) {
        let n = self.node_of(p);
        self.u[n] += amount;
    }

    pub fn increase_node(&mut self, node: usize, amount: f64) {
        self.u[node] += amount;
    }

    /// Central difference at the nearest node (one-sided at the lattice border), normalized.
    pub fn gradient_at(&self, p: &Real3) -> Real3 {
        let c = self.coords(self.node_of(p));
        let mut g = Real3::zeros();
        for d in 0..3 {
            let n = self.dims[d];
            if n < 2 {
                continue;
            }
            let mut lo = c;
            let mut hi = c;
            lo[d] = c[d].saturating_sub(1);
            hi[d] = (c[d] + 1).min(n - 1);
            let span = (hi[d] - lo[d]) as f64 * self.spacing[d];
            g[d] = (self.value(hi[0], hi[1], hi[2]) - self.value(lo[0], lo[1], lo[2])) / span;
        }
        let norm = g.norm();
        if norm < 1e-12 {
            Real3::zeros()
        } else {
            g / norm
        }
    }

    pub fn step(&mut self) {
        let [nx, ny, nz] = self.dims;
        let decay = 1.0 - self.mu * self.dt;
        let c = Real3::from_fn(|d, _| self.nu * self.dt / (self.spacing[d] * self.spacing[d]));
        let u = &self.u;
        let at = |i: isize, j: isize, k: isize| -> f64 {
            if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
                0.0
            } else {
                u[i as usize + nx * (j as usize + ny * k as usize)]
            }
        };
        self.scratch.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
            let k = k as isize;
            for j in 0..ny as isize {
                for i in 0..nx as isize {
                    let center = at(i, j, k);
                    slab[i as usize + nx * j as usize] = center * decay
                        + c[0] * (at(i + 1, j, k) - 2.0 * center + at(i - 1, j, k))
                        + c[1] * (at(i, j + 1, k) - 2.0 * center + at(i, j - 1, k))
                        + c[2] * (at(i, j, k + 1) - 2.0 * center + at(i, j, k - 1));
                }
            }
        });
        std::mem::swap(&mut self.u, &mut self.scratch);
    }

    /// Adds secretions after sorting them by (substance, node, key), which makes the result
    /// independent of how the events were collected.
    pub fn apply_secretions(grids: &mut [DiffusionGrid], events: &mut [Secretion]) {
        events.sort_by_key(|e| (e.substance, e.node, e.key));
        for e in events.iter() {
            grids[e.substance as usize].u[e.node as usize] += e.amount;
        }
    }

    /// Lattice dump with columns i, j, k, value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "k", "value"])?;
        for (n, v) in self.u.iter().enumerate() {
            let [i, j, k] = self.coords(n);
            w.write_record([i.to_string(), j.to_string(), k.to_string(), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}
