//! Monte Carlo estimators for the score target and importance weights.
//!
//! For a state `x_t` at noise level `sigma_t`, inner samples
//! `x^{(i)} = x_t + sigma_t * eps_i` drive three estimators:
//!
//! * the score target `S_L = -sum_i softmax(-E(x^{(i)}))_i * grad E(x^{(i)})`,
//!   i.e. the gradient of `log sum_i exp(-E(x^{(i)}))` with respect to `x_t`
//!   under reparameterization;
//! * the weight numerator `log N_K = lse(-E(x^{(i)})) - ln K`, which reuses
//!   the same inner samples and energy evaluations when `K = L`;
//! * the weight denominator `log D_M`, an average of forward-kernel densities
//!   over a batch of buffer points.
//!
//! All weight arithmetic stays in the log domain; unnormalized weights are
//! only exponentiated inside the final per-batch softmax, which is where the
//! unknown normalizer of the target density cancels.

use alloc::string::String;
use alloc::vec::Vec;

use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::{l2_norm, log_sum_exp, softmax, Rng};
use crate::sde::VeSchedule;

/// Inner Gaussian samples around one `x_t`, with their energies and gradients.
///
/// Samples whose energy or gradient is non-finite (e.g. a Lennard-Jones
/// near-singularity) are dropped and redrawn, with at most three extra rounds;
/// the survivors are what the estimators average over.
#[derive(Clone, Debug)]
pub struct InnerSamples {
    pub dim: usize,
    /// Row-major valid sample points, `len = energies.len() * dim`.
    pub points: Vec<f64>,
    pub energies: Vec<f64>,
    /// Row-major gradients, aligned with `points`.
    pub grads: Vec<f64>,
    /// The requested sample count `L` (the valid count may be lower).
    pub requested: usize,
}

impl InnerSamples {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Draw `l` samples from `N(x_t, sigma(t)^2 I)` and evaluate the energy.
    pub fn draw<E: Energy + ?Sized>(
        f: &E,
        sched: &VeSchedule,
        x_t: &[f64],
        t: f64,
        l: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidArg(String::from("inner sample count must be >= 1")));
        }
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidTime(t));
        }
        let dim = x_t.len();
        if dim != f.dim() {
            return Err(Error::DimMismatch { expected: f.dim(), got: dim, what: "inner samples" });
        }
        let sigma = sched.sigma(t)?;
        let mut points = Vec::with_capacity(l * dim);
        let mut energies = Vec::with_capacity(l);
        let mut grads = Vec::with_capacity(l * dim);
        // stack scratch for the common small dimensions
        let mut point_buf = [0.0; 8];
        let mut grad_buf = [0.0; 8];
        let (mut point_heap, mut grad_heap);
        let (point, gbuf): (&mut [f64], &mut [f64]) = if dim <= 8 {
            (&mut point_buf[..dim], &mut grad_buf[..dim])
        } else {
            point_heap = alloc::vec![0.0; dim];
            grad_heap = alloc::vec![0.0; dim];
            (&mut point_heap, &mut grad_heap)
        };
        let mut missing = l;
        for _round in 0..4 {
            if missing == 0 {
                break;
            }
            let deficit = missing;
            for _ in 0..deficit {
                for (p, &c) in point.iter_mut().zip(x_t) {
                    *p = c + sigma * rng.normal();
                }
                let e = match f.energy_and_grad_into(point, gbuf) {
                    Ok(e) => e,
                    Err(Error::Singular(_)) | Err(Error::NonFinite(_)) => continue,
                    Err(other) => return Err(other),
                };
                if !e.is_finite() || gbuf.iter().any(|g| !g.is_finite()) {
                    continue;
                }
                points.extend_from_slice(point);
                grads.extend_from_slice(gbuf);
                energies.push(e);
                missing -= 1;
            }
        }
        if energies.is_empty() {
            return Err(Error::Numeric(String::from(
                "all inner energies non-finite after resampling",
            )));
        }
        Ok(Self { dim, points, energies, grads, requested: l })
    }
}

/// Monte Carlo estimate of the score of the noised marginal at `x_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTarget {
    /// The estimate, possibly rescaled to `clip_norm`.
    pub value: Vec<f64>,
    /// Number of valid inner samples averaged over.
    pub n_inner: usize,
    pub clipped: bool,
}

/// Score target from freshly drawn inner samples.
pub fn score_target<E: Energy + ?Sized>(
    f: &E,
    sched: &VeSchedule,
    x_t: &[f64],
    t: f64,
    l: usize,
    rng: &mut Rng,
    clip_norm: Option<f64>,
) -> Result<ScoreTarget> {
    let inner = InnerSamples::draw(f, sched, x_t, t, l, rng)?;
    score_target_from(&inner, clip_norm)
}

/// Score target from shared inner samples (the `K = L` reuse path).
pub fn score_target_from(inner: &InnerSamples, clip_norm: Option<f64>) -> Result<ScoreTarget> {
    if inner.is_empty() {
        return Err(Error::EmptyInput("score_target inner samples"));
    }
    let dim = inner.dim;
    let min_e = inner.energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut denom = 0.0;
    let mut value = alloc::vec![0.0; dim];
    for (i, &e) in inner.energies.iter().enumerate() {
        let w = fmath::exp(min_e - e);
        denom += w;
        let g = &inner.grads[i * dim..(i + 1) * dim];
        for (acc, &gi) in value.iter_mut().zip(g) {
            *acc -= w * gi;
        }
    }
    for v in &mut value {
        *v /= denom;
    }
    let mut clipped = false;
    if let Some(max_norm) = clip_norm {
        let norm = l2_norm(&value);
        if norm > max_norm {
            let scale = max_norm / norm;
            for v in &mut value {
                *v *= scale;
            }
            clipped = true;
        }
    }
    Ok(ScoreTarget { value, n_inner: inner.len(), clipped })
}

/// `log N_K`: log of the average of `exp(-E)` over inner samples.
///
/// With `reuse` present no new draws or energy evaluations happen and `k` is
/// ignored in favor of the shared samples.
pub fn log_numerator<E: Energy + ?Sized>(
    f: &E,
    sched: &VeSchedule,
    x_t: &[f64],
    t: f64,
    k: usize,
    rng: &mut Rng,
    reuse: Option<&InnerSamples>,
) -> Result<f64> {
    match reuse {
        Some(inner) => log_numerator_from(inner),
        None => {
            let inner = InnerSamples::draw(f, sched, x_t, t, k, rng)?;
            log_numerator_from(&inner)
        }
    }
}

/// `log N_K` from shared inner samples.
pub fn log_numerator_from(inner: &InnerSamples) -> Result<f64> {
    if inner.is_empty() {
        return Err(Error::EmptyInput("log_numerator inner samples"));
    }
    let neg: Vec<f64> = inner.energies.iter().map(|e| -e).collect();
    Ok(log_sum_exp(&neg)? - fmath::ln(inner.len() as f64))
}

/// `log D_M`: log of the average forward-kernel density of `x_t` under the
/// buffer batch.
pub fn log_denominator(
    sched: &VeSchedule,
    x_t: &[f64],
    t: f64,
    buffer_batch: &[&[f64]],
) -> Result<f64> {
    if buffer_batch.is_empty() {
        return Err(Error::EmptyInput("log_denominator buffer batch"));
    }
    let logs: Vec<f64> = buffer_batch
        .iter()
        .map(|x0| sched.log_transition(x_t, x0, t))
        .collect::<Result<_>>()?;
    Ok(log_sum_exp(&logs)? - fmath::ln(buffer_batch.len() as f64))
}

/// Log-domain unnormalized importance weight `log w~ = log N_K - log D_M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightEstimate {
    pub log_numerator: f64,
    pub log_denominator: f64,
    pub log_w_tilde: f64,
}

impl WeightEstimate {
    pub fn new(log_numerator: f64, log_denominator: f64) -> Self {
        Self { log_numerator, log_denominator, log_w_tilde: log_numerator - log_denominator }
    }
}

/// Self-normalized weights over a batch: `softmax(log w~)`.
///
/// Any constant shared by the entries (in particular the unknown log
/// normalizer) cancels exactly.
pub fn snis_weights(log_w_tilde: &[f64]) -> Result<Vec<f64>> {
    if log_w_tilde.is_empty() {
        return Err(Error::EmptyInput("snis_weights"));
    }
    if log_w_tilde.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("snis_weights input"));
    }
    softmax(log_w_tilde)
}

/// Weighted squared-error loss `sum_s w_s |s_theta^{(s)} - S_L^{(s)}|^2`.
pub fn snis_loss(
    s_theta_out: &[Vec<f64>],
    targets: &[ScoreTarget],
    weights: &[f64],
) -> Result<f64> {
    if s_theta_out.len() != targets.len() || s_theta_out.len() != weights.len() {
        return Err(Error::DimMismatch {
            expected: targets.len(),
            got: s_theta_out.len(),
            what: "snis_loss batch",
        });
    }
    let mut loss = 0.0;
    for ((out, target), &w) in s_theta_out.iter().zip(targets).zip(weights) {
        if out.len() != target.value.len() {
            return Err(Error::DimMismatch {
                expected: target.value.len(),
                got: out.len(),
                what: "snis_loss output",
            });
        }
        let sq: f64 =
            out.iter().zip(&target.value).map(|(a, b)| (a - b) * (a - b)).sum();
        loss += w * sq;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyFn;
    use crate::numerics::{mean, variance};

    /// Constant energy over R^d.
    struct ConstEnergy {
        dim: usize,
        value: f64,
    }

    impl Energy for ConstEnergy {
        fn dim(&self) -> usize {
            self.dim
        }
        fn energy(&self, _x: &[f64]) -> Result<f64> {
            Ok(self.value)
        }
        fn energy_and_grad_into(&self, _x: &[f64], grad: &mut [f64]) -> Result<f64> {
            grad.fill(0.0);
            Ok(self.value)
        }
    }

    /// Gauss energy quantized to a dyadic grid, plus an integer shift; the
    /// shifted energies stay exactly representable, which makes the
    /// shift-invariance assertion exact at the bit level.
    struct QuantizedShiftedGauss {
        shift: f64,
    }

    impl Energy for QuantizedShiftedGauss {
        fn dim(&self) -> usize {
            1
        }
        fn energy(&self, x: &[f64]) -> Result<f64> {
            let e = 0.5 * x[0] * x[0];
            let q = (e * (1u64 << 20) as f64).round() / (1u64 << 20) as f64;
            Ok(q + self.shift)
        }
        fn energy_and_grad_into(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
            grad[0] = x[0];
            self.energy(x)
        }
    }

    /// Fails for x < 0, mimicking a singular region.
    struct HalfLineEnergy;

    impl Energy for HalfLineEnergy {
        fn dim(&self) -> usize {
            1
        }
        fn energy(&self, x: &[f64]) -> Result<f64> {
            if x[0] < 0.0 {
                return Err(Error::Singular(String::from("x < 0")));
            }
            Ok(0.5 * x[0] * x[0])
        }
        fn energy_and_grad_into(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
            let e = self.energy(x)?;
            grad[0] = x[0];
            Ok(e)
        }
    }

    fn unit_sigma_schedule() -> VeSchedule {
        // sigma(0.5) = sqrt(0.1 * 10) = 1
        VeSchedule::new(0.1, 10.0).unwrap()
    }

    #[test]
    fn single_sample_target_is_negative_gradient() {
        let inner = InnerSamples {
            dim: 2,
            points: alloc::vec![0.3, -0.4],
            energies: alloc::vec![1.7],
            grads: alloc::vec![0.25, -1.5],
            requested: 1,
        };
        let target = score_target_from(&inner, None).unwrap();
        assert_eq!(target.value, alloc::vec![-0.25, 1.5]);
        assert_eq!(target.n_inner, 1);
        assert!(!target.clipped);
    }

    #[test]
    fn gauss_target_matches_convolved_score() {
        // true score of N(0, 1 + sigma^2) at x_t = 1 with sigma = 1: -0.5
        let f = EnergyFn::gauss(1);
        let sched = unit_sigma_schedule();
        let mut rng = Rng::new(17);
        let target = score_target(&f, &sched, &[1.0], 0.5, 100_000, &mut rng, None).unwrap();
        assert!((target.value[0] + 0.5).abs() < 0.05, "got {}", target.value[0]);
    }

    #[test]
    fn bimodal_target_matches_quadrature_oracle() {
        // oracle: d/dx log int exp(-E(y)) N(y; x, sigma^2) dy by trapezoid
        let f = EnergyFn::bimodal1d(-2.0, 2.0, 1.0);
        let sched = unit_sigma_schedule();
        let t = 0.6321; // arbitrary fixed time
        let sigma = sched.sigma(t).unwrap();
        let x_t = 0.8;

        let oracle = {
            let lo = -14.0;
            let hi = 14.0;
            let n = 20_000;
            let h = (hi - lo) / n as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..=n {
                let y = lo + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let e = f.energy(&[y]).unwrap();
                let kernel = (-(x_t - y) * (x_t - y) / (2.0 * sigma * sigma)).exp();
                let val = (-e).exp() * kernel;
                num += w * val * (y - x_t) / (sigma * sigma);
                den += w * val;
            }
            num / den
        };

        let reps = 30;
        let estimates: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = Rng::new(100).substream("rep", r);
                score_target(&f, &sched, &[x_t], t, 10_000, &mut rng, None).unwrap().value[0]
            })
            .collect();
        let m = mean(&estimates);
        let se = (variance(&estimates) / reps as f64).sqrt();
        assert!(
            (m - oracle).abs() < 3.0 * se.max(1e-4),
            "mean {m} vs oracle {oracle} (se {se})"
        );
    }

    #[test]
    fn target_clipping_rescales_to_requested_norm() {
        let inner = InnerSamples {
            dim: 2,
            points: alloc::vec![0.0, 0.0],
            energies: alloc::vec![0.0],
            grads: alloc::vec![30.0, 40.0],
            requested: 1,
        };
        let target = score_target_from(&inner, Some(5.0)).unwrap();
        assert!(target.clipped);
        assert!((l2_norm(&target.value) - 5.0).abs() < 1e-12);
        // direction preserved
        assert!((target.value[0] / target.value[1] - 30.0 / 40.0).abs() < 1e-12);
    }

    #[test]
    fn energy_shift_leaves_target_bit_identical() {
        let sched = unit_sigma_schedule();
        let base = QuantizedShiftedGauss { shift: 0.0 };
        let shifted = QuantizedShiftedGauss { shift: 3.0 };
        let a = score_target(&base, &sched, &[0.7], 0.5, 64, &mut Rng::new(9).substream("s", 1), None)
            .unwrap();
        let b =
            score_target(&shifted, &sched, &[0.7], 0.5, 64, &mut Rng::new(9).substream("s", 1), None)
                .unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn constant_energy_numerator_is_minus_energy() {
        let f = ConstEnergy { dim: 2, value: 2.5 };
        let sched = unit_sigma_schedule();
        let mut rng = Rng::new(0);
        let log_nk = log_numerator(&f, &sched, &[0.0, 0.0], 0.5, 50, &mut rng, None).unwrap();
        assert!((log_nk + 2.5).abs() < 1e-14);
    }

    #[test]
    fn single_sample_numerator_is_minus_energy_exact() {
        let inner = InnerSamples {
            dim: 1,
            points: alloc::vec![0.1],
            energies: alloc::vec![1.234],
            grads: alloc::vec![0.0],
            requested: 1,
        };
        assert_eq!(log_numerator_from(&inner).unwrap(), -1.234);
    }

    #[test]
    fn gauss_numerator_converges_to_convolution_integral() {
        // I(x_t, t) = (1 + sigma^2)^{-d/2} exp(-|x_t|^2 / (2 (1 + sigma^2)))
        // frozen at 40 digits for d=2, sigma=0.8, x_t=(0.5, -0.3)
        let log_i_true: f64 = -0.5983547784214729;
        let f = EnergyFn::gauss(2);
        let sched = VeSchedule::new(0.1, 6.4).unwrap(); // sigma(0.5) = 0.8
        let x_t = [0.5, -0.3];
        let reps = 20;
        let vals: Vec<f64> = (0..reps)
            .map(|r| {
                let mut rng = Rng::new(3).substream("nk", r);
                log_numerator(&f, &sched, &x_t, 0.5, 100_000, &mut rng, None).unwrap().exp()
            })
            .collect();
        let m = mean(&vals);
        let se = (variance(&vals) / reps as f64).sqrt();
        assert!(
            (m - log_i_true.exp()).abs() < 3.0 * se,
            "mean {m} vs {} (se {se})",
            log_i_true.exp()
        );
    }

    #[test]
    fn reuse_produces_same_value_without_new_draws() {
        let f = EnergyFn::gauss(2);
        let sched = unit_sigma_schedule();
        let mut rng = Rng::new(5);
        let inner = InnerSamples::draw(&f, &sched, &[0.2, 0.4], 0.5, 128, &mut rng).unwrap();
        let state_probe_before = rng.clone().next_u64();
        let from_reuse =
            log_numerator(&f, &sched, &[0.2, 0.4], 0.5, 999, &mut rng, Some(&inner)).unwrap();
        // rng untouched by the reuse path
        assert_eq!(rng.clone().next_u64(), state_probe_before);
        assert_eq!(from_reuse, log_numerator_from(&inner).unwrap());
    }

    #[test]
    fn denominator_single_point_equals_log_transition() {
        let sched = unit_sigma_schedule();
        let x_t = [0.3, -0.8];
        let x0 = [1.1, 0.4];
        let direct = sched.log_transition(&x_t, &x0, 0.7).unwrap();
        let batch: [&[f64]; 1] = [&x0];
        assert_eq!(log_denominator(&sched, &x_t, 0.7, &batch).unwrap(), direct);
    }

    #[test]
    fn denominator_identical_points_match_single() {
        let sched = unit_sigma_schedule();
        let x_t = [0.3];
        let x0 = [0.9];
        let single: [&[f64]; 1] = [&x0];
        let triple: [&[f64]; 3] = [&x0, &x0, &x0];
        let a = log_denominator(&sched, &x_t, 0.4, &single).unwrap();
        let b = log_denominator(&sched, &x_t, 0.4, &triple).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn denominator_three_point_frozen_oracle() {
        // direct average of kernel densities at 40 digits:
        // sigma=1, x_t=0.3, x0 in {-0.4, 0.1, 0.9}
        let expected = -1.0627421533657348;
        let sched = unit_sigma_schedule();
        let a = [-0.4];
        let b = [0.1];
        let c = [0.9];
        let batch: [&[f64]; 3] = [&a, &b, &c];
        let got = log_denominator(&sched, &[0.3], 0.5, &batch).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn snis_weights_uniform_for_equal_inputs() {
        let w = snis_weights(&[1.3, 1.3, 1.3, 1.3]).unwrap();
        for &x in &w {
            assert_eq!(x, 0.25);
        }
    }

    #[test]
    fn snis_weights_shift_invariant() {
        // adding a constant (the unknown log Z) leaves the weights unchanged
        let base = [0.5, -1.25, 2.0];
        let shifted: Vec<f64> = base.iter().map(|x| x + 8.0).collect();
        assert_eq!(snis_weights(&base).unwrap(), snis_weights(&shifted).unwrap());
    }

    #[test]
    fn snis_weights_hand_ratio() {
        let w = snis_weights(&[0.0, 3.0f64.ln()]).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-12);
        assert!((w[1] - 0.75).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snis_weights_reject_nan() {
        assert!(matches!(snis_weights(&[0.0, f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn loss_zero_when_outputs_match_targets() {
        let targets = alloc::vec![
            ScoreTarget { value: alloc::vec![1.0, -2.0], n_inner: 8, clipped: false },
            ScoreTarget { value: alloc::vec![0.5, 0.0], n_inner: 8, clipped: false },
        ];
        let outs = alloc::vec![alloc::vec![1.0, -2.0], alloc::vec![0.5, 0.0]];
        assert_eq!(snis_loss(&outs, &targets, &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_weights_reduce_to_mean_squared_error() {
        let targets = alloc::vec![
            ScoreTarget { value: alloc::vec![0.0], n_inner: 1, clipped: false },
            ScoreTarget { value: alloc::vec![0.0], n_inner: 1, clipped: false },
        ];
        let outs = alloc::vec![alloc::vec![1.0], alloc::vec![3.0]];
        let loss = snis_loss(&outs, &targets, &[0.5, 0.5]).unwrap();
        assert!((loss - (1.0 + 9.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn loss_hand_case() {
        // w = [0.25, 0.75], squared errors [4, 0] -> 1.0
        let targets = alloc::vec![
            ScoreTarget { value: alloc::vec![0.0], n_inner: 1, clipped: false },
            ScoreTarget { value: alloc::vec![2.0], n_inner: 1, clipped: false },
        ];
        let outs = alloc::vec![alloc::vec![2.0], alloc::vec![2.0]];
        let loss = snis_loss(&outs, &targets, &[0.25, 0.75]).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn draw_drops_invalid_samples_and_errors_when_all_fail() {
        let f = HalfLineEnergy;
        let sched = unit_sigma_schedule();
        // centered at 2 with sigma 1: some draws land below zero and get dropped
        let mut rng = Rng::new(21);
        let inner = InnerSamples::draw(&f, &sched, &[2.0], 0.5, 256, &mut rng).unwrap();
        assert!(!inner.is_empty());
        assert!(inner.len() <= 256);
        assert!(inner.points.iter().all(|&p| p >= 0.0));

        // far in the invalid half-plane, every draw fails
        let sched_tight = VeSchedule::new(1e-3, 1e-2).unwrap();
        let result = InnerSamples::draw(&f, &sched_tight, &[-50.0], 0.5, 16, &mut rng);
        assert!(matches!(result, Err(Error::Numeric(_))));
    }

    #[test]
    fn draw_rejects_bad_time() {
        let f = EnergyFn::gauss(1);
        let sched = unit_sigma_schedule();
        let mut rng = Rng::new(0);
        assert!(InnerSamples::draw(&f, &sched, &[0.0], 0.0, 4, &mut rng).is_err());
        assert!(InnerSamples::draw(&f, &sched, &[0.0], 1.5, 4, &mut rng).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn snis_scale_invariance(
                logs in proptest::collection::vec(-30.0f64..30.0, 1..12),
                log_lambda in -20.0f64..20.0,
            ) {
                // w~ -> lambda w~ shifts every log weight by the same amount
                let scaled: Vec<f64> = logs.iter().map(|x| x + log_lambda).collect();
                let a = snis_weights(&logs).unwrap();
                let b = snis_weights(&scaled).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }

            #[test]
            fn snis_weights_sum_to_one(
                logs in proptest::collection::vec(-200.0f64..200.0, 1..20),
            ) {
                let w = snis_weights(&logs).unwrap();
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
