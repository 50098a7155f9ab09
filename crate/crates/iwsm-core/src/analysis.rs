//! Diagnostic studies: the 1D forward/reverse KL toy problem and empirical
//! bias/variance scaling of the Monte Carlo estimators.
//!
//! The toy problem fits a single Gaussian `q(x; mu, sigma_hat^2)` to an equal
//! two-component mixture. Minimizing forward KL(p||q) has the closed-form
//! optimum `mu* = (mu1+mu2)/2`, `sigma_hat^2* = sigma^2 + (mu1-mu2)^2/4`
//! (mode covering); minimizing reverse KL(q||p) has initialization-dependent
//! local optima collapsed onto single modes (mode seeking). Both directions
//! are optimized numerically here, with trapezoid quadrature for the
//! cross-entropy integrals and plain gradient descent with backtracking.
//!
//! The scaling study measures, on the standard normal target where the noised
//! score is known in closed form, how the score-target bias/std shrink with
//! the inner sample count L and how the mean squared error of the
//! self-normalized loss estimate shrinks with the batch size S.

use alloc::string::String;
use alloc::vec::Vec;

use crate::energy::EnergyFn;
use crate::error::{Error, Result};
use crate::estimators::{
    log_denominator, log_numerator_from, score_target, score_target_from, snis_loss,
    snis_weights, InnerSamples, ScoreTarget,
};
use crate::numerics::fmath;
use crate::numerics::{mean, par_collect, variance, Rng};
use crate::sde::VeSchedule;

use serde::{Deserialize, Serialize};

const TWO_PI: f64 = core::f64::consts::TAU;

/// Toy-problem specification: equal mixture of `N(mu1, sigma^2)` and
/// `N(mu2, sigma^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyKlSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub quad_nodes: usize,
    pub opt_steps: usize,
}

impl ToyKlSpec {
    pub fn new(mu1: f64, mu2: f64, sigma: f64) -> Self {
        Self { mu1, mu2, sigma, quad_nodes: 400, opt_steps: 2000 }
    }

    fn validate(&self) -> Result<()> {
        if self.mu1 == self.mu2 {
            return Err(Error::InvalidArg(String::from("toy mixture needs mu1 != mu2")));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArg(String::from("toy mixture needs sigma > 0")));
        }
        if self.quad_nodes < 16 {
            return Err(Error::InvalidArg(String::from("need at least 16 quadrature nodes")));
        }
        Ok(())
    }

    /// Normalized mixture log-density.
    fn log_p(&self, x: f64) -> f64 {
        let inv_var = 1.0 / (self.sigma * self.sigma);
        let e1 = 0.5 * (x - self.mu1) * (x - self.mu1) * inv_var;
        let e2 = 0.5 * (x - self.mu2) * (x - self.mu2) * inv_var;
        let m = e1.min(e2);
        let log_unnorm = -m + fmath::ln(fmath::exp(m - e1) + fmath::exp(m - e2));
        log_unnorm - fmath::ln(2.0 * fmath::sqrt(TWO_PI * self.sigma * self.sigma))
    }

    /// d/dx log p(x).
    fn dlog_p(&self, x: f64) -> f64 {
        let inv_var = 1.0 / (self.sigma * self.sigma);
        let e1 = 0.5 * (x - self.mu1) * (x - self.mu1) * inv_var;
        let e2 = 0.5 * (x - self.mu2) * (x - self.mu2) * inv_var;
        let m = e1.min(e2);
        let w1 = fmath::exp(m - e1);
        let w2 = fmath::exp(m - e2);
        -(w1 * (x - self.mu1) + w2 * (x - self.mu2)) * inv_var / (w1 + w2)
    }
}

/// One optimization endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptPoint {
    pub mu: f64,
    pub sigma_sq: f64,
    pub kl: f64,
}

/// Reverse-KL run from one initialization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseRun {
    pub init_mu: f64,
    pub endpoint: OptPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyKlReport {
    pub forward: OptPoint,
    pub forward_closed_mu: f64,
    pub forward_closed_sigma_sq: f64,
    pub reverse: Vec<ReverseRun>,
}

/// Trapezoid rule over `[lo, hi]`.
fn trapezoid(lo: f64, hi: f64, nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / nodes as f64;
    let mut acc = 0.5 * (f(lo) + f(hi));
    for i in 1..nodes {
        acc += f(lo + i as f64 * h);
    }
    acc * h
}

/// Gradient descent with Armijo backtracking on a 2D objective.
fn descend(
    mut theta: [f64; 2],
    steps: usize,
    objective: &dyn Fn(&[f64; 2]) -> f64,
    gradient: &dyn Fn(&[f64; 2]) -> [f64; 2],
) -> [f64; 2] {
    for _ in 0..steps {
        let g = gradient(&theta);
        let g_norm_sq = g[0] * g[0] + g[1] * g[1];
        if g_norm_sq < 1e-20 {
            break;
        }
        let f0 = objective(&theta);
        let mut eta = 1.0;
        loop {
            let cand = [theta[0] - eta * g[0], theta[1] - eta * g[1]];
            if objective(&cand) <= f0 - 0.5 * eta * g_norm_sq || eta < 1e-12 {
                theta = cand;
                break;
            }
            eta *= 0.5;
        }
    }
    theta
}

/// Numerically minimize forward KL(p||q) and reverse KL(q||p) for the toy
/// mixture, reporting optima, KL values, and the forward closed form.
pub fn toy_kl_report(spec: &ToyKlSpec) -> Result<ToyKlReport> {
    spec.validate()?;
    let mid = 0.5 * (spec.mu1 + spec.mu2);
    let half_gap = 0.5 * (spec.mu2 - spec.mu1);
    let pooled_sd = fmath::sqrt(spec.sigma * spec.sigma + half_gap * half_gap);
    let lo = mid - 8.0 * pooled_sd;
    let hi = mid + 8.0 * pooled_sd;

    // entropy term of p, constant in the parameters
    let p_entropy =
        trapezoid(lo, hi, spec.quad_nodes, |x| {
            let lp = spec.log_p(x);
            fmath::exp(lp) * lp
        });
    // quadrature sanity: doubling the node count must not move the integral
    let p_entropy_fine = trapezoid(lo, hi, 2 * spec.quad_nodes, |x| {
        let lp = spec.log_p(x);
        fmath::exp(lp) * lp
    });
    if fmath::abs(p_entropy - p_entropy_fine) > 1e-8 * (1.0 + fmath::abs(p_entropy)) {
        return Err(Error::Numeric(alloc::format!(
            "quadrature not converged at {} nodes; increase quad_nodes",
            spec.quad_nodes
        )));
    }

    // parameters are (mu, s) with sigma_hat^2 = exp(s)
    // forward cross-entropy: -E_p[ln q] = E_p[(x-mu)^2]/(2 e^s) + (ln(2 pi) + s)/2
    let forward_obj = |theta: &[f64; 2]| -> f64 {
        let (mu, s) = (theta[0], theta[1]);
        let second = trapezoid(lo, hi, spec.quad_nodes, |x| {
            fmath::exp(spec.log_p(x)) * (x - mu) * (x - mu)
        });
        second / (2.0 * fmath::exp(s)) + 0.5 * (fmath::ln(TWO_PI) + s)
    };
    let forward_grad = |theta: &[f64; 2]| -> [f64; 2] {
        let (mu, s) = (theta[0], theta[1]);
        let inv_var = fmath::exp(-s);
        let first = trapezoid(lo, hi, spec.quad_nodes, |x| {
            fmath::exp(spec.log_p(x)) * (x - mu)
        });
        let second = trapezoid(lo, hi, spec.quad_nodes, |x| {
            fmath::exp(spec.log_p(x)) * (x - mu) * (x - mu)
        });
        [-first * inv_var, 0.5 - 0.5 * second * inv_var]
    };
    let init = [spec.mu1 + 0.75 * (spec.mu2 - spec.mu1), fmath::ln(spec.sigma * spec.sigma)];
    let forward_opt = descend(init, spec.opt_steps, &forward_obj, &forward_grad);
    let forward = OptPoint {
        mu: forward_opt[0],
        sigma_sq: fmath::exp(forward_opt[1]),
        kl: forward_obj(&forward_opt) + p_entropy,
    };

    // reverse KL(q||p) = -1/2 (ln(2 pi) + s) - 1/2 - E_z[ln p(mu + e^{s/2} z)]
    // with z ~ N(0,1); gradients by differentiating under the integral
    let z_quad = |f: &dyn Fn(f64) -> f64| -> f64 {
        trapezoid(-8.0, 8.0, spec.quad_nodes, |z| {
            fmath::exp(-0.5 * z * z) / fmath::sqrt(TWO_PI) * f(z)
        })
    };
    let reverse_obj = |theta: &[f64; 2]| -> f64 {
        let (mu, s) = (theta[0], theta[1]);
        let sd = fmath::exp(0.5 * s);
        -0.5 * (fmath::ln(TWO_PI) + s) - 0.5 - z_quad(&|z| spec.log_p(mu + sd * z))
    };
    let reverse_grad = |theta: &[f64; 2]| -> [f64; 2] {
        let (mu, s) = (theta[0], theta[1]);
        let sd = fmath::exp(0.5 * s);
        let d_mu = -z_quad(&|z| spec.dlog_p(mu + sd * z));
        let d_s = -0.5 - 0.5 * sd * z_quad(&|z| z * spec.dlog_p(mu + sd * z));
        [d_mu, d_s]
    };
    // one start near mu1, one offset from the midpoint toward mu2 (far
    // enough to escape the overdispersed centered stationary point that
    // exists at strong separations)
    let inits = [
        spec.mu1 + 0.125 * (spec.mu2 - spec.mu1),
        mid + 0.2 * (spec.mu2 - spec.mu1),
    ];
    let reverse = inits
        .iter()
        .map(|&init_mu| {
            let theta =
                descend([init_mu, fmath::ln(spec.sigma * spec.sigma)], spec.opt_steps, &reverse_obj, &reverse_grad);
            ReverseRun {
                init_mu,
                endpoint: OptPoint {
                    mu: theta[0],
                    sigma_sq: fmath::exp(theta[1]),
                    kl: reverse_obj(&theta),
                },
            }
        })
        .collect();

    Ok(ToyKlReport {
        forward,
        forward_closed_mu: mid,
        forward_closed_sigma_sq: spec.sigma * spec.sigma + half_gap * half_gap,
        reverse,
    })
}

/// Scaling-study configuration. The target is the standard normal in 1D,
/// probed at `x_t` and a time where `sigma(t) = 1`, so the noised score is
/// `-x_t / 2` exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub l_list: Vec<usize>,
    pub s_list: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// Probe state for the score-target study.
    pub x_t: f64,
    /// Inner sample count used inside the loss study.
    pub loss_inner_l: usize,
    /// Buffer draws per replication for the denominator.
    pub denom_m: usize,
    /// Frozen network under test: `s_theta(x) = slope * x`.
    pub frozen_slope: f64,
    /// Proposal for the loss study: `x0 ~ N(proposal_mu, proposal_sd^2)`.
    pub proposal_mu: f64,
    pub proposal_sd: f64,
}

impl ScalingSpec {
    pub fn new(l_list: Vec<usize>, s_list: Vec<usize>, replications: usize) -> Self {
        Self {
            l_list,
            s_list,
            replications,
            seed: 0,
            x_t: 1.5,
            loss_inner_l: 256,
            denom_m: 256,
            frozen_slope: -0.8,
            proposal_mu: 0.5,
            proposal_sd: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreScalingRow {
    pub l: usize,
    pub bias: f64,
    pub std: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossScalingRow {
    pub s: usize,
    pub bias: f64,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub score_rows: Vec<ScoreScalingRow>,
    /// Least-squares slope of `ln std` against `ln L` (target -1/2).
    pub score_std_slope: f64,
    pub loss_rows: Vec<LossScalingRow>,
    /// Least-squares slope of `ln mse` against `ln S`.
    pub loss_mse_slope: f64,
    /// Quadrature value of the ideal loss the SNIS estimate targets.
    pub l_star: f64,
    pub true_score: f64,
}

fn fit_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|&v| fmath::ln(v)).collect();
    let ly: Vec<f64> = ys.iter().map(|&v| fmath::ln(v)).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// The unit-sigma probe schedule shared by the scaling studies.
fn unit_sigma() -> (VeSchedule, f64) {
    (VeSchedule::new(0.1, 10.0).expect("valid schedule"), 0.5)
}

/// Empirical bias/std of the score target per L and bias/MSE of the
/// self-normalized loss per S, against closed-form/quadrature ground truth.
pub fn estimator_scaling_report(spec: &ScalingSpec) -> Result<ScalingReport> {
    if spec.l_list.is_empty() || spec.s_list.is_empty() || spec.replications < 2 {
        return Err(Error::InvalidArg(String::from(
            "scaling study needs l_list, s_list, and at least 2 replications",
        )));
    }
    let f = EnergyFn::gauss(1);
    let (sched, t) = unit_sigma();
    let sigma = sched.sigma(t)?;
    let noised_var = 1.0 + sigma * sigma;
    let true_score = -spec.x_t / noised_var;
    let reps = spec.replications;

    // score-target study
    let mut score_rows = Vec::with_capacity(spec.l_list.len());
    for (li, &l) in spec.l_list.iter().enumerate() {
        let estimates: Vec<f64> = par_collect(reps, |r| {
            let mut rng = Rng::new(spec.seed).substream("p2", (li * reps + r) as u64);
            score_target(&f, &sched, &[spec.x_t], t, l, &mut rng, None)
                .map(|target| target.value[0])
                .unwrap_or(f64::NAN)
        });
        if estimates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(String::from("score-target replication failed")));
        }
        score_rows.push(ScoreScalingRow {
            l,
            bias: mean(&estimates) - true_score,
            std: fmath::sqrt(variance(&estimates)),
        });
    }
    let score_std_slope = fit_log_slope(
        &spec.l_list.iter().map(|&l| l as f64).collect::<Vec<_>>(),
        &score_rows.iter().map(|r| r.std).collect::<Vec<_>>(),
    );

    // loss study: quadrature ground truth L* = E_{p_t}[(s_theta - score)^2]
    let a = spec.frozen_slope;
    let l_star = {
        let sd = fmath::sqrt(noised_var);
        trapezoid(-10.0 * sd, 10.0 * sd, 4000, |x| {
            let p = fmath::exp(-0.5 * x * x / noised_var) / fmath::sqrt(TWO_PI * noised_var);
            let err = a * x - (-x / noised_var);
            p * err * err
        })
    };

    let mut loss_rows = Vec::with_capacity(spec.s_list.len());
    for (si, &s) in spec.s_list.iter().enumerate() {
        let estimates: Vec<f64> = par_collect(reps, |r| {
            let mut rng = Rng::new(spec.seed).substream("p3", (si * reps + r) as u64);
            snis_loss_replication(spec, &f, &sched, t, s, &mut rng).unwrap_or(f64::NAN)
        });
        if estimates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(String::from("loss replication failed")));
        }
        let bias = mean(&estimates) - l_star;
        let mse = estimates.iter().map(|v| (v - l_star) * (v - l_star)).sum::<f64>()
            / reps as f64;
        loss_rows.push(LossScalingRow { s, bias, mse });
    }
    let loss_mse_slope = fit_log_slope(
        &spec.s_list.iter().map(|&s| s as f64).collect::<Vec<_>>(),
        &loss_rows.iter().map(|r| r.mse).collect::<Vec<_>>(),
    );

    Ok(ScalingReport {
        score_rows,
        score_std_slope,
        loss_rows,
        loss_mse_slope,
        l_star,
        true_score,
    })
}

/// One SNIS loss estimate over a batch of S proposal points.
fn snis_loss_replication(
    spec: &ScalingSpec,
    f: &EnergyFn,
    sched: &VeSchedule,
    t: f64,
    s_count: usize,
    rng: &mut Rng,
) -> Result<f64> {
    // buffer stand-in: M draws from the proposal
    let buffer: Vec<[f64; 1]> = (0..spec.denom_m)
        .map(|_| [spec.proposal_mu + spec.proposal_sd * rng.normal()])
        .collect();
    let buffer_refs: Vec<&[f64]> = buffer.iter().map(|r| r.as_slice()).collect();

    let mut outputs = Vec::with_capacity(s_count);
    let mut targets: Vec<ScoreTarget> = Vec::with_capacity(s_count);
    let mut log_w = Vec::with_capacity(s_count);
    for _ in 0..s_count {
        let x0 = spec.proposal_mu + spec.proposal_sd * rng.normal();
        let x_t = sched.perturb(&[x0], t, rng)?;
        let inner = InnerSamples::draw(f, sched, &x_t, t, spec.loss_inner_l, rng)?;
        let target = score_target_from(&inner, None)?;
        let log_nk = log_numerator_from(&inner)?;
        let log_dm = log_denominator(sched, &x_t, t, &buffer_refs)?;
        outputs.push(alloc::vec![spec.frozen_slope * x_t[0]]);
        targets.push(target);
        log_w.push(log_nk - log_dm);
    }
    let weights = snis_weights(&log_w)?;
    snis_loss(&outputs, &targets, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_optimum_matches_closed_form() {
        let spec = ToyKlSpec::new(-2.0, 2.0, 1.0);
        let report = toy_kl_report(&spec).unwrap();
        assert!((report.forward.mu - 0.0).abs() < 1e-3, "mu {}", report.forward.mu);
        assert!(
            (report.forward.sigma_sq - 5.0).abs() / 5.0 < 1e-2,
            "sigma_sq {}",
            report.forward.sigma_sq
        );
        assert!(report.forward.kl >= 0.0);
    }

    #[test]
    fn forward_optimum_symmetric_in_mode_order() {
        let a = toy_kl_report(&ToyKlSpec::new(-2.0, 2.0, 1.0)).unwrap();
        let b = toy_kl_report(&ToyKlSpec::new(2.0, -2.0, 1.0)).unwrap();
        assert!((a.forward.mu - b.forward.mu).abs() < 2e-3);
        assert!((a.forward.sigma_sq - b.forward.sigma_sq).abs() < 1e-2);
    }

    #[test]
    fn reverse_runs_collapse_to_distinct_modes() {
        // collapse needs well-separated modes (here 8 component-sds apart);
        // at smaller separations the centered Gaussian genuinely wins
        let spec = ToyKlSpec::new(-4.0, 4.0, 1.0);
        let report = toy_kl_report(&spec).unwrap();
        assert_eq!(report.reverse.len(), 2);
        // started at mu1 + 1: collapses onto mu1 with near-component variance
        let first = &report.reverse[0];
        assert!((first.endpoint.mu - (-4.0)).abs() < 0.2, "mu {}", first.endpoint.mu);
        assert!(
            (first.endpoint.sigma_sq - 1.0).abs() < 0.3,
            "sigma_sq {}",
            first.endpoint.sigma_sq
        );
        // started just right of the midpoint: collapses onto the other mode
        let second = &report.reverse[1];
        assert!((second.endpoint.mu - 4.0).abs() < 0.2, "mu {}", second.endpoint.mu);
        assert!(
            (second.endpoint.mu - first.endpoint.mu).abs() > 1.0,
            "endpoints {} vs {}",
            first.endpoint.mu,
            second.endpoint.mu
        );
    }

    #[test]
    fn coarse_quadrature_rejected_with_hint() {
        let mut spec = ToyKlSpec::new(-2.0, 2.0, 1.0);
        spec.quad_nodes = 16;
        match toy_kl_report(&spec) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("quad_nodes")),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }

    #[test]
    fn score_std_shrinks_with_l() {
        let spec = ScalingSpec::new(alloc::vec![64, 256], alloc::vec![8], 200);
        let report = estimator_scaling_report(&spec).unwrap();
        let s64 = report.score_rows[0].std;
        let s256 = report.score_rows[1].std;
        // fourfold L: std ratio near 2
        let ratio = s64 / s256;
        assert!((1.4..=2.8).contains(&ratio), "ratio {ratio}");
        assert!(
            (-0.7..=-0.3).contains(&report.score_std_slope),
            "slope {}",
            report.score_std_slope
        );
    }

    #[test]
    fn loss_mse_shrinks_with_s() {
        let spec = ScalingSpec::new(alloc::vec![64], alloc::vec![8, 32], 200);
        let report = estimator_scaling_report(&spec).unwrap();
        assert!(
            report.loss_rows[0].mse > report.loss_rows[1].mse,
            "mse {} vs {}",
            report.loss_rows[0].mse,
            report.loss_rows[1].mse
        );
        assert!(report.l_star > 0.0);
    }

    #[test]
    fn snis_loss_with_exact_ingredients_matches_quadrature() {
        // closed-form weights w = p_t / p_t^B and exact score targets: the
        // importance-weighted average converges to L*
        let spec = ScalingSpec::new(alloc::vec![64], alloc::vec![8], 2);
        let f = EnergyFn::gauss(1);
        let _ = f;
        let (sched, t) = unit_sigma();
        let sigma = sched.sigma(t).unwrap();
        let noised_var = 1.0 + sigma * sigma;
        let prop_var = spec.proposal_sd * spec.proposal_sd + sigma * sigma;
        let a = spec.frozen_slope;
        let l_star = {
            let sd = noised_var.sqrt();
            trapezoid(-10.0 * sd, 10.0 * sd, 4000, |x| {
                let p = (-0.5 * x * x / noised_var).exp() / (TWO_PI * noised_var).sqrt();
                let err = a * x + x / noised_var;
                p * err * err
            })
        };
        let reps = 200;
        let s_count = 512;
        let estimates: Vec<f64> = par_collect(reps, |r| {
            let mut rng = Rng::new(99).substream("exact", r as u64);
            let mut num = 0.0;
            let mut den = 0.0;
            for _ in 0..s_count {
                let x0 = spec.proposal_mu + spec.proposal_sd * rng.normal();
                let x_t = x0 + sigma * rng.normal();
                // exact densities of the noised target and proposal
                let log_pt = -0.5 * x_t * x_t / noised_var
                    - 0.5 * (TWO_PI * noised_var).ln();
                let dx = x_t - spec.proposal_mu;
                let log_pb = -0.5 * dx * dx / prop_var - 0.5 * (TWO_PI * prop_var).ln();
                let w = (log_pt - log_pb).exp();
                let err = a * x_t + x_t / noised_var;
                num += w * err * err;
                den += w;
            }
            num / den
        });
        let m = mean(&estimates);
        let se = (variance(&estimates) / reps as f64).sqrt();
        assert!(
            (m - l_star).abs() < 4.0 * se,
            "mean {m} vs quadrature {l_star} (se {se})"
        );
    }
}
