//! Variance-exploding noise schedule and forward perturbation kernel.
//!
//! Single source of truth for `sigma(t)`, `g(t)^2`, and the Gaussian
//! transition density `p_{t|0}(x_t | x_0) = N(x_t; x_0, sigma(t)^2 I)` over
//! the fixed horizon `t in [0, 1]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::{sq_dist, Rng};

use serde::{Deserialize, Serialize};

const TWO_PI: f64 = core::f64::consts::TAU;

/// Geometric noise schedule `sigma(t) = sigma_min * (sigma_max/sigma_min)^t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VeSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl VeSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64) -> Result<Self> {
        if !(sigma_min > 0.0) || !(sigma_max > sigma_min) {
            return Err(Error::InvalidArg(format!(
                "schedule requires 0 < sigma_min < sigma_max, got ({sigma_min}, {sigma_max})"
            )));
        }
        Ok(Self { sigma_min, sigma_max })
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidTime(t));
        }
        Ok(())
    }

    /// `sigma(t)`; strictly increasing from `sigma_min` at 0 to `sigma_max` at 1.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.sigma_min * fmath::powf(self.sigma_max / self.sigma_min, t))
    }

    /// `g(t)^2 = d sigma(t)^2 / dt = 2 sigma(t)^2 ln(sigma_max/sigma_min)`.
    pub fn g_squared(&self, t: f64) -> Result<f64> {
        let s = self.sigma(t)?;
        Ok(2.0 * s * s * fmath::ln(self.sigma_max / self.sigma_min))
    }

    /// One forward-kernel draw: `x_0 + sigma(t) * eps`, `eps ~ N(0, I)`.
    pub fn perturb(&self, x0: &[f64], t: f64, rng: &mut Rng) -> Result<Vec<f64>> {
        let s = self.sigma(t)?;
        Ok(x0.iter().map(|&v| v + s * rng.normal()).collect())
    }

    /// `log N(x_t; x_0, sigma(t)^2 I)`.
    ///
    /// `sigma(0) = sigma_min > 0`, so this stays finite at `t = 0`; it is just
    /// very negative when `x_t` is far from `x_0` relative to `sigma_min`.
    pub fn log_transition(&self, x_t: &[f64], x0: &[f64], t: f64) -> Result<f64> {
        if x_t.len() != x0.len() {
            return Err(Error::DimMismatch {
                expected: x0.len(),
                got: x_t.len(),
                what: "log_transition points",
            });
        }
        let s = self.sigma(t)?;
        let d = x_t.len() as f64;
        let var = s * s;
        Ok(-0.5 * d * fmath::ln(TWO_PI * var) - sq_dist(x_t, x0) / (2.0 * var))
    }
}

impl core::fmt::Display for VeSchedule {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "ve(sigma_min={}, sigma_max={})", self.sigma_min, self.sigma_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::variance;

    #[test]
    fn sigma_endpoints() {
        let sched = VeSchedule::new(1e-5, 1.0).unwrap();
        assert!((sched.sigma(0.0).unwrap() - 1e-5).abs() < 1e-18);
        assert!((sched.sigma(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_geometric_midpoint() {
        let sched = VeSchedule::new(1e-5, 1.0).unwrap();
        let mid = sched.sigma(0.5).unwrap();
        assert!((mid - 1e-5f64.sqrt()).abs() / mid < 1e-12);
    }

    #[test]
    fn sigma_log_linear() {
        let sched = VeSchedule::new(2e-3, 7.0).unwrap();
        let a = sched.sigma(0.25).unwrap().ln();
        let b = sched.sigma(0.75).unwrap().ln();
        let m = sched.sigma(0.5).unwrap().ln();
        assert!((a + b - 2.0 * m).abs() < 1e-12);
    }

    #[test]
    fn sigma_rejects_out_of_range_time() {
        let sched = VeSchedule::new(1e-5, 1.0).unwrap();
        assert!(matches!(sched.sigma(-0.1), Err(Error::InvalidTime(_))));
        assert!(matches!(sched.sigma(1.1), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn degenerate_schedule_rejected() {
        assert!(VeSchedule::new(1.0, 1.0).is_err());
        assert!(VeSchedule::new(0.0, 1.0).is_err());
    }

    #[test]
    fn g_squared_matches_finite_difference_of_sigma_sq() {
        let sched = VeSchedule::new(1e-4, 2.0).unwrap();
        let h = 1e-7;
        for &t in &[0.1, 0.5, 0.9] {
            let sp = sched.sigma(t + h).unwrap();
            let sm = sched.sigma(t - h).unwrap();
            let fd = (sp * sp - sm * sm) / (2.0 * h);
            let g2 = sched.g_squared(t).unwrap();
            assert!((fd - g2).abs() / g2 < 1e-6, "t={t}: fd {fd} vs {g2}");
        }
    }

    #[test]
    fn g_squared_endpoint_ratio() {
        let sched = VeSchedule::new(1e-3, 5.0).unwrap();
        let ratio = sched.g_squared(1.0).unwrap() / sched.g_squared(0.0).unwrap();
        let expected = (5.0 / 1e-3) * (5.0 / 1e-3);
        assert!((ratio - expected).abs() / expected < 1e-9);
    }

    #[test]
    fn perturb_variance_matches_sigma_sq() {
        let sched = VeSchedule::new(1e-2, 3.0).unwrap();
        let t = 0.6;
        let s = sched.sigma(t).unwrap();
        let mut rng = Rng::new(3);
        let x0 = [1.5];
        let draws: Vec<f64> =
            (0..100_000).map(|_| sched.perturb(&x0, t, &mut rng).unwrap()[0] - 1.5).collect();
        let var = variance(&draws);
        assert!((var - s * s).abs() / (s * s) < 0.02, "var {var} vs {}", s * s);
    }

    #[test]
    fn perturb_near_sigma_min_stays_close() {
        let sched = VeSchedule::new(1e-5, 1.0).unwrap();
        let mut rng = Rng::new(1);
        let x0 = [0.25, -0.75];
        for _ in 0..1000 {
            let x = sched.perturb(&x0, 0.0, &mut rng).unwrap();
            assert!((x[0] - x0[0]).abs() < 1e-3 && (x[1] - x0[1]).abs() < 1e-3);
        }
    }

    #[test]
    fn perturb_deterministic_given_substream() {
        let sched = VeSchedule::new(1e-5, 1.0).unwrap();
        let a = sched.perturb(&[0.0, 0.0], 0.5, &mut Rng::new(4).substream("p", 0)).unwrap();
        let b = sched.perturb(&[0.0, 0.0], 0.5, &mut Rng::new(4).substream("p", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_transition_standard_normal_at_center() {
        // d=1, sigma=1: -0.5 ln(2 pi)
        let sched = VeSchedule::new(0.1, 10.0).unwrap();
        let t = 0.5; // sigma = sqrt(0.1 * 10) = 1
        let got = sched.log_transition(&[2.0], &[2.0], t).unwrap();
        let expected = -0.5 * TWO_PI.ln();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn log_transition_symmetry() {
        let sched = VeSchedule::new(1e-3, 2.0).unwrap();
        let a = sched.log_transition(&[0.3, -0.8], &[1.1, 0.4], 0.7).unwrap();
        let b = sched.log_transition(&[1.1, 0.4], &[0.3, -0.8], 0.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_transition_one_sigma_offset() {
        // d=2 with the whole offset |x_t - x0| = sigma on one axis:
        // -ln(2 pi sigma^2) - 1/2
        let sched = VeSchedule::new(0.1, 10.0).unwrap();
        let t = 0.5;
        let s = sched.sigma(t).unwrap();
        let got = sched.log_transition(&[s, 0.0], &[0.0, 0.0], t).unwrap();
        let expected = -(TWO_PI * s * s).ln() - 0.5;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn perturb_then_log_transition_finite() {
        let sched = VeSchedule::new(1e-5, 1.0).unwrap();
        let mut rng = Rng::new(12);
        for i in 0..50 {
            let t = (i as f64 + 1.0) / 50.0;
            let x0 = [rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)];
            let x_t = sched.perturb(&x0, t, &mut rng).unwrap();
            assert!(sched.log_transition(&x_t, &x0, t).unwrap().is_finite());
        }
    }
}
