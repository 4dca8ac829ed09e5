use crate::{Error, Result};

/// Deterministic SIR compartments integrated with classical RK4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SirOde {
    pub beta: f64,
    pub gamma: f64,
    pub n: f64,
}

impl SirOde {
    fn rhs(&self, y: [f64; 3]) -> [f64; 3] {
        let infection = self.beta * y[0] * y[1] / self.n;
        let recovery = self.gamma * y[1];
        [-infection, infection - recovery, recovery]
    }

    fn rk4(&self, y: [f64; 3], h: f64) -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        let k1 = self.rhs(y);
        let k2 = self.rhs(add(y, k1, h / 2.0));
        let k3 = self.rhs(add(y, k2, h / 2.0));
        let k4 = self.rhs(add(y, k3, h));
        [0, 1, 2].map(|c| y[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
    }

    pub fn basic_reproduction_number(&self) -> f64 {
        self.beta / self.gamma
    }
}

/// (S, I, R) at t = 0, 1, ..., `steps` simulation steps, integrated with step `dt`.
/// `1/dt` must be a whole number of substeps.
pub fn sir_ode_oracle(beta: f64, gamma: f64, n: f64, s0: f64, i0: f64, steps: usize, dt: f64) -> Result<Vec<[f64; 3]>> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(Error::InvalidParameter(format!("ode step {dt} must lie in (0, 1]")));
    }
    let sub = (1.0 / dt).round();
    if ((1.0 / dt) - sub).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("1/dt = {} is not an integer", 1.0 / dt)));
    }
    let model = SirOde { beta, gamma, n };
    let mut y = [s0, i0, n - s0 - i0];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y);
    let h = 1.0 / sub;
    for _ in 0..steps {
        for _ in 0..sub as usize {
            y = model.rk4(y, h);
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BETA: f64 = 0.06719;
    const GAMMA: f64 = 0.00521;

    #[test]
    fn disease_free_is_constant() {
        let s = sir_ode_oracle(BETA, GAMMA, 100.0, 100.0, 0.0, 50, 0.1).unwrap();
        assert!(s.iter().all(|y| *y == [100.0, 0.0, 0.0]));
    }

    #[test]
    fn conservation() {
        let s = sir_ode_oracle(BETA, GAMMA, 2020.0, 2000.0, 20.0, 1000, 0.1).unwrap();
        for y in &s {
            assert!(((y[0] + y[1] + y[2]) - 2020.0).abs() / 2020.0 < 1e-9);
        }
    }

    #[test]
    fn epidemic_peaks() {
        let s = sir_ode_oracle(BETA, GAMMA, 2020.0, 2000.0, 20.0, 1000, 0.1).unwrap();
        let (peak, _) = s.iter().enumerate().max_by(|a, b| a.1[1].total_cmp(&b.1[1])).unwrap();
        assert!(peak > 0 && peak < 1000);
        assert!(s[peak][1] > 20.0);
        assert!(s[1000][1] < s[peak][1]);
    }

    #[test]
    fn halving_step_changes_little() {
        let a = sir_ode_oracle(BETA, GAMMA, 2020.0, 2000.0, 20.0, 1000, 0.1).unwrap();
        let b = sir_ode_oracle(BETA, GAMMA, 2020.0, 2000.0, 20.0, 1000, 0.05).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for c in 0..3 {
                let scale = y[c].abs().max(1e-300);
                assert!((x[c] - y[c]).abs() / scale < 1e-6 || (x[c] - y[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn r0_of_measles_parameters() {
        let r0 = SirOde { beta: BETA, gamma: GAMMA, n: 1.0 }.basic_reproduction_number();
        assert!((r0 - 12.9).abs() <= 0.1, "{r0}");
    }

    #[test]
    fn bad_step_rejected() {
        assert!(sir_ode_oracle(BETA, GAMMA, 1.0, 1.0, 0.0, 1, 0.3).is_err());
        assert!(sir_ode_oracle(BETA, GAMMA, 1.0, 1.0, 0.0, 1, 0.0).is_err());
    }
}
