use crate::engine::rng::{pair_key, AgentRng, STREAM_COLLISION};
use crate::{Error, Real3, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceParams {
    /// Repulsion coefficient.
    pub k: f64,
    /// Adhesion coefficient.
    pub gamma: f64,
    /// Force-to-displacement scale.
    pub dt_mech: f64,
    /// Agents whose net force magnitude does not exceed this do not move.
    pub force_threshold: f64,
    pub max_displacement: f64,
}

impl Default for ForceParams {
    fn default() -> Self {
        Self { k: 2.0, gamma: 1.0, dt_mech: 1.0, force_threshold: 0.0, max_displacement: 3.0 }
    }
}

impl ForceParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k > 0.0
            && self.gamma >= 0.0
            && self.dt_mech > 0.0
            && self.force_threshold >= 0.0
            && self.max_displacement > 0.0
            && [self.k, self.gamma, self.dt_mech, self.force_threshold, self.max_displacement].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid force parameters {self:?}")))
        }
    }
}

/// Force exerted on sphere `a` by sphere `b`.
///
/// Zero without overlap; otherwise `k*delta - gamma*sqrt(rbar*delta)` along the line from b
/// to a. `tie` is the direction used when the centers coincide.
pub fn collision_force(pa: &Real3, ra: f64, pb: &Real3, rb: f64, params: &ForceParams, tie: &Real3) -> Real3 {
    let d = pa - pb;
    let dist = d.norm();
    let delta = ra + rb - dist;
    if delta <= 0.0 {
        return Real3::zeros();
    }
    let rbar = ra * rb / (ra + rb);
    let magnitude = params.k * delta - params.gamma * (rbar * delta).sqrt();
    let dir = if dist > 0.0 { d / dist } else { *tie };
    dir * magnitude
}

/// Direction for coincident centers. Opposite for the two members of a pair.
pub fn tie_direction(seed: u64, key_a: u64, key_b: u64, iteration: u64) -> Real3 {
    let dir = AgentRng::new(seed, pair_key(key_a, key_b), iteration, STREAM_COLLISION).unit_sphere();
    if key_a < key_b {
        dir
    } else {
        -dir
    }
}

/// Overlap at which adhesion cancels repulsion.
pub fn equilibrium_overlap(ra: f64, rb: f64, params: &ForceParams) -> f64 {
    let rbar = ra * rb / (ra + rb);
    params.gamma * params.gamma * rbar / (params.k * params.k)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: ForceParams = ForceParams { k: 2.0, gamma: 1.0, dt_mech: 1.0, force_threshold: 0.0, max_displacement: 3.0 };

    #[test]
    fn no_overlap_no_force() {
        let f = collision_force(&Real3::zeros(), 5.0, &Real3::new(10.0, 0.0, 0.0), 5.0, &P, &Real3::x());
        assert_eq!(f, Real3::zeros());
        let f = collision_force(&Real3::zeros(), 5.0, &Real3::new(11.0, 0.0, 0.0), 5.0, &P, &Real3::x());
        assert_eq!(f, Real3::zeros());
    }

    #[test]
    fn unit_overlap_value() {
        let f = collision_force(&Real3::zeros(), 5.0, &Real3::new(9.0, 0.0, 0.0), 5.0, &P, &Real3::x());
        let expected = 2.0 - 2.5f64.sqrt();
        assert!((f.norm() - expected).abs() < 1e-12);
        assert!((expected - 0.4189).abs() < 1e-4);
        // pushes a away from b
        assert!(f.x < 0.0 && f.y == 0.0 && f.z == 0.0);
    }

    #[test]
    fn balance_point() {
        let delta = equilibrium_overlap(5.0, 5.0, &P);
        assert!((delta - 0.625).abs() < 1e-12);
        let f = collision_force(&Real3::zeros(), 5.0, &Real3::new(10.0 - delta, 0.0, 0.0), 5.0, &P, &Real3::x());
        assert!(f.norm() < 1e-12);
        let f = collision_force(&Real3::zeros(), 5.0, &Real3::new(10.0 - 2.0 * delta, 0.0, 0.0), 5.0, &P, &Real3::x());
        assert!(f.norm() > 0.0 && f.x < 0.0);
    }

    #[test]
    fn coincident_centers_use_tie() {
        let t = tie_direction(1, 3, 4, 0);
        let fa = collision_force(&Real3::zeros(), 1.0, &Real3::zeros(), 1.0, &P, &t);
        let fb = collision_force(&Real3::zeros(), 1.0, &Real3::zeros(), 1.0, &P, &tie_direction(1, 4, 3, 0));
        assert_eq!(fa, -fb);
        assert!(fa.norm() > 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(P.validate().is_ok());
        assert!(ForceParams { k: 0.0, ..P }.validate().is_err());
        assert!(ForceParams { gamma: -1.0, ..P }.validate().is_err());
    }
}
