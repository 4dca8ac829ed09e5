use std::f64::consts::PI;

use crate::{Error, Result};

/// Free-space solution for a unit point mass released at the origin at t = 0.
pub fn heat_kernel(nu: f64, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("heat kernel needs t > 0, got {t}")));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("heat kernel needs nu > 0, got {nu}")));
    }
    let s = 4.0 * nu * t;
    Ok((PI * s).powf(-1.5) * (-r * r / s).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decays_at_origin() {
        let a = heat_kernel(1.0, 10.0, 0.0).unwrap();
        let b = heat_kernel(1.0, 1e6, 0.0).unwrap();
        assert!(b < a && b < 1e-8);
    }

    #[test]
    fn symmetric_in_r() {
        assert_eq!(heat_kernel(0.5, 3.0, 2.0).unwrap(), heat_kernel(0.5, 3.0, -2.0).unwrap());
    }

    #[test]
    fn unit_mass() {
        // radial quadrature of 4 pi r^2 G(r)
        let (nu, t) = (0.7, 2.0);
        let h = 1e-3;
        let mass: f64 = (0..20_000).map(|i| (i as f64 + 0.5) * h).map(|r| 4.0 * PI * r * r * heat_kernel(nu, t, r).unwrap() * h).sum();
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    }

    #[test]
    fn rejects_nonpositive_time() {
        assert!(heat_kernel(1.0, 0.0, 1.0).is_err());
        assert!(heat_kernel(1.0, -1.0, 1.0).is_err());
    }
}
