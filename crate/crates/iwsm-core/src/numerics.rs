//! Deterministic PRNG, log-domain primitives, and histogramming.
//!
//! The generator is xoshiro256++ (Blackman & Vigna 2019) seeded through
//! SplitMix64, with named substreams derived from `(seed, tag, index)` so
//! parallel callers never share state. Gaussian draws use the Marsaglia polar
//! method with `libm` transcendentals; the full draw sequence for a given seed
//! is identical on every platform.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `libm`-backed float functions, usable without `std` and bit-stable everywhere.
pub(crate) mod fmath {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline(always)]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline(always)]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline(always)]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline(always)]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seedable deterministic generator with named substreams.
///
/// Substreams are keyed by `(purpose tag, index)`; two substreams with
/// different keys are statistically independent and may be consumed
/// concurrently without coordination.
#[derive(Clone, Debug)]
pub struct Rng {
    state: [u64; 4],
    seed: u64,
    spare_normal: Option<f64>,
}

impl Rng {
    /// Generator for the given 64-bit seed.
    pub fn new(seed: u64) -> Self {
        Self::from_key(seed)
    }

    fn from_key(key: u64) -> Self {
        let mut sm = key;
        let mut state = [0u64; 4];
        for slot in &mut state {
            *slot = splitmix64(&mut sm);
        }
        if state.iter().all(|&w| w == 0) {
            state[0] = 1;
        }
        Self { state, seed: key, spare_normal: None }
    }

    /// Independent substream keyed by `(tag, index)`, derived from this
    /// generator's seed without consuming any of its state.
    pub fn substream(&self, tag: &str, index: u64) -> Rng {
        let mut key = self.seed ^ fnv1a64(tag.as_bytes()).rotate_left(17);
        key = key.wrapping_add(SPLITMIX_GAMMA.wrapping_mul(index.wrapping_add(1)));
        let mut sm = key;
        Self::from_key(splitmix64(&mut sm))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Standard normal draw (Marsaglia polar method).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = fmath::sqrt(-2.0 * fmath::ln(s) / s);
                self.spare_normal = Some(v * m);
                return u * m;
            }
        }
    }

    /// `n` standard normal draws.
    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

/// `log Σ exp(v_i)`, shifted by the maximum so finite inputs never overflow.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp"));
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max.is_nan() {
        return Err(Error::NonFinite("log_sum_exp input"));
    }
    let sum: f64 = v.iter().map(|&x| fmath::exp(x - max)).sum();
    Ok(max + fmath::ln(sum))
}

/// Softmax of `v`; invariant under adding a constant to every entry.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::EmptyInput("softmax"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|&x| fmath::exp(x - max)).collect();
    let sum: f64 = out.iter().sum();
    for w in &mut out {
        *w /= sum;
    }
    Ok(out)
}

/// Equal-width histogram with normalized per-bin mass.
///
/// Bins are half-open `[edge_i, edge_{i+1})` with the last bin closed;
/// out-of-range values are clamped into the boundary bins so no mass is lost.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.mass.len()
    }
}

/// Histogram `values` into `n_bins` equal-width bins over `[lo, hi]`.
pub fn make_histogram(values: &[f64], n_bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if values.is_empty() {
        return Err(Error::EmptyInput("make_histogram"));
    }
    if n_bins == 0 {
        return Err(Error::InvalidArg(String::from("n_bins must be >= 1")));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArg(String::from("histogram range must satisfy hi > lo")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("make_histogram values"));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = alloc::vec![0u64; n_bins];
    for &v in values {
        let raw = fmath::floor((v - lo) / width);
        let idx = if raw < 0.0 {
            0
        } else if raw >= n_bins as f64 {
            n_bins - 1
        } else {
            raw as usize
        };
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    let mass = counts.iter().map(|&c| c as f64 / total).collect();
    let edges = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    Ok(Histogram { edges, mass })
}

/// Total variation distance `½ Σ |p_i − q_i|` between two histograms on the
/// same edges.
pub fn histogram_tvd(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.edges != b.edges {
        return Err(Error::InvalidArg(String::from("histogram edges differ")));
    }
    Ok(a.mass.iter().zip(&b.mass).map(|(p, q)| fmath::abs(p - q)).sum::<f64>() * 0.5)
}

/// Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    fmath::sqrt(v.iter().map(|x| x * x).sum())
}

/// Squared Euclidean distance between equal-length points.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Map `f` over `0..n` into an index-ordered Vec, in parallel when the
/// `parallel` feature is on. Output is identical either way.
pub fn par_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_eq!(a.normal(), b.normal());
    }

    #[test]
    fn substreams_are_independent_of_parent_state() {
        let mut parent = Rng::new(7);
        let before = parent.substream("noise", 3).next_u64();
        parent.next_u64();
        let after = parent.substream("noise", 3).next_u64();
        assert_eq!(before, after);
        assert_ne!(
            parent.substream("noise", 3).next_u64(),
            parent.substream("noise", 4).next_u64()
        );
        assert_ne!(
            parent.substream("noise", 3).next_u64(),
            parent.substream("time", 3).next_u64()
        );
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = Rng::new(1);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(11);
        let draws = rng.normal_vec(100_000);
        assert!(mean(&draws).abs() < 0.02);
        assert!((variance(&draws) - 1.0).abs() < 0.02);
    }

    #[test]
    fn lse_identical_entries() {
        let v = [0.0, 0.0];
        assert!((log_sum_exp(&v).unwrap() - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn lse_no_overflow() {
        let v = [1000.0, 1000.0];
        let got = log_sum_exp(&v).unwrap();
        assert!((got - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn lse_small_case_matches_direct_sum() {
        // direct summation at 40 digits: ln(e^-1 + e^-2 + e^-3)
        let v = [-1.0, -2.0, -3.0];
        let expected = -0.5923940355556197;
        assert!((log_sum_exp(&v).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn lse_empty_errors() {
        assert!(matches!(log_sum_exp(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn lse_shift_invariance() {
        let v = [0.3, -1.7, 2.2, 0.0];
        let shifted: Vec<f64> = v.iter().map(|x| x + 5.5).collect();
        let a = log_sum_exp(&v).unwrap();
        let b = log_sum_exp(&shifted).unwrap();
        assert!((b - (a + 5.5)).abs() < 1e-12);
    }

    #[test]
    fn softmax_uniform_and_ratio() {
        let w = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for &x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        // e^{ln 3} = 3, so the pair splits 1:3
        let c = 4.2;
        let w = softmax(&[c, c + 3.0f64.ln()]).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-12);
        assert!((w[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        // exact when the shifted entries are exactly representable
        let v = [0.5, -2.0, 3.5];
        let shifted: Vec<f64> = v.iter().map(|x| x + 7.0).collect();
        assert_eq!(softmax(&v).unwrap(), softmax(&shifted).unwrap());
        // and within rounding otherwise
        let v = [0.1, -2.3, 3.7];
        let shifted: Vec<f64> = v.iter().map(|x| x + 7.0).collect();
        let a = softmax(&v).unwrap();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let w = softmax(&[1.0, 2.0, -3.0, 0.5, 10.0]).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_single_point_upper_bin() {
        // 0.5 lands in the upper bin under the half-open convention
        let h = make_histogram(&[0.5, 0.5, 0.5, 0.5], 2, (0.0, 1.0)).unwrap();
        assert_eq!(h.mass, alloc::vec![0.0, 1.0]);
    }

    #[test]
    fn histogram_symmetric_split() {
        let h = make_histogram(&[0.1, 0.9], 2, (0.0, 1.0)).unwrap();
        assert_eq!(h.mass, alloc::vec![0.5, 0.5]);
    }

    #[test]
    fn histogram_uniform_grid() {
        let values: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let h = make_histogram(&values, 10, (0.0, 1.0)).unwrap();
        for &m in &h.mass {
            assert!((m - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_clamps_out_of_range() {
        let h = make_histogram(&[-5.0, 0.2, 7.0], 2, (0.0, 1.0)).unwrap();
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((h.mass[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((h.mass[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_empty_errors() {
        assert!(make_histogram(&[], 2, (0.0, 1.0)).is_err());
    }

    #[test]
    fn par_collect_matches_sequential() {
        let par = par_collect(100, |i| i * i);
        let seq: Vec<usize> = (0..100).map(|i| i * i).collect();
        assert_eq!(par, seq);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lse_shift(v in proptest::collection::vec(-50.0f64..50.0, 1..20), c in -30.0f64..30.0) {
                let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
                let a = log_sum_exp(&v).unwrap();
                let b = log_sum_exp(&shifted).unwrap();
                prop_assert!((b - (a + c)).abs() < 1e-9);
            }

            #[test]
            fn softmax_permutation_equivariant(v in proptest::collection::vec(-20.0f64..20.0, 2..10)) {
                let w = softmax(&v).unwrap();
                let mut rev = v.clone();
                rev.reverse();
                let mut w_rev = softmax(&rev).unwrap();
                w_rev.reverse();
                for (a, b) in w.iter().zip(&w_rev) {
                    prop_assert!((a - b).abs() < 1e-15);
                }
            }

            #[test]
            fn histogram_mass_conserved(
                values in proptest::collection::vec(-10.0f64..10.0, 1..200),
                n_bins in 1usize..30,
            ) {
                let h = make_histogram(&values, n_bins, (-5.0, 5.0)).unwrap();
                prop_assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
