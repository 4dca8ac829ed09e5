use std::fmt;
use std::str::FromStr;

use crate::{Error, Real3, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    Open,
    Closed,
    Toroidal,
}

impl FromStr for BoundaryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(BoundaryMode::Open),
            "closed" => Ok(BoundaryMode::Closed),
            "toroidal" | "torus" => Ok(BoundaryMode::Toroidal),
            _ => Err(Error::InvalidParameter(format!("unknown boundary mode `{s}`"))),
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryMode::Open => "open",
            BoundaryMode::Closed => "closed",
            BoundaryMode::Toroidal => "toroidal",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub mode: BoundaryMode,
    pub min: Real3,
    pub max: Real3,
}

impl BoundaryCondition {
    pub fn new(mode: BoundaryMode, min: Real3, max: Real3) -> Result<Self> {
        if mode != BoundaryMode::Open && (0..3).any(|d| !(min[d] < max[d])) {
            return Err(Error::InvalidParameter(format!("degenerate bounds {min:?}..{max:?}")));
        }
        Ok(Self { mode, min, max })
    }

    pub fn cube(mode: BoundaryMode, lo: f64, hi: f64) -> Result<Self> {
        Self::new(mode, Real3::repeat(lo), Real3::repeat(hi))
    }

    pub fn apply(&self, p: Real3) -> Real3 {
        match self.mode {
            BoundaryMode::Open => p,
            BoundaryMode::Closed => p.sup(&self.min).inf(&self.max),
            BoundaryMode::Toroidal => Real3::from_fn(|d, _| wrap(p[d], self.min[d], self.max[d])),
        }
    }
}

/// Floored modulo into [lo, hi).
fn wrap(x: f64, lo: f64, hi: f64) -> f64 {
    let extent = hi - lo;
    let mut el = (x - lo) % extent;
    if el < 0.0 {
        el += extent;
    }
    // a tiny negative remainder can round up to exactly `extent`
    if el >= extent {
        el = 0.0;
    }
    el + lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toroidal_wraps() {
        let bc = BoundaryCondition::cube(BoundaryMode::Toroidal, 0.0, 100.0).unwrap();
        assert_eq!(bc.apply(Real3::new(105.0, 50.0, -3.0)), Real3::new(5.0, 50.0, 97.0));
        let p = bc.apply(Real3::new(99.0 + 5.78594, 0.0, 0.0));
        assert!((p.x - 4.78594).abs() < 1e-12);
        let p = bc.apply(Real3::new(-1e-17, 0.0, 0.0));
        assert!(p.x >= 0.0 && p.x < 100.0);
    }

    #[test]
    fn closed_clamps() {
        let bc = BoundaryCondition::cube(BoundaryMode::Closed, 0.0, 10.0).unwrap();
        assert_eq!(bc.apply(Real3::new(-1.0, 5.0, 12.0)), Real3::new(0.0, 5.0, 10.0));
    }

    #[test]
    fn open_unchanged() {
        let bc = BoundaryCondition::cube(BoundaryMode::Open, 0.0, 10.0).unwrap();
        let p = Real3::new(-100.0, 1e9, 3.0);
        assert_eq!(bc.apply(p), p);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(BoundaryCondition::cube(BoundaryMode::Closed, 1.0, 1.0).is_err());
        assert!(BoundaryCondition::cube(BoundaryMode::Open, 1.0, 1.0).is_ok());
    }
}
