//! Sample-quality metrics: exact Wasserstein distances and TVD variants.
//!
//! `W_p` is computed by solving the exact linear assignment problem on the
//! `n x n` pairwise cost matrix `d(x_i, y_j)^p` (shortest augmenting paths
//! with potentials, O(n^3)); sets of unequal size are equalized by seeded
//! uniform subsampling of the larger one before matching. At the desk scales
//! here (n <= 2000) exact assignment is affordable and has no regularization
//! knob.
//!
//! The TVD family compares normalized histograms with `floor(sqrt(n))` bins:
//! E-TVD bins `ln(E - E_min + 1)` of the sample energies (the shift keeps the
//! log defined when energies are negative), S-TVD bins 2D positions on a grid
//! with about `sqrt(n)` total cells, and D-TVD bins all pairwise
//! interparticle distances.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::energy::Energy;
use crate::error::{Error, Result};
use crate::numerics::fmath;
use crate::numerics::{histogram_tvd, make_histogram, par_collect, sq_dist, Rng};
use crate::sampler::SampleSet;

use serde::{Deserialize, Serialize};

/// Largest matched-set size; O(n^3) assignment beyond this is a footgun.
pub const MAX_ASSIGNMENT_SIZE: usize = 2000;

/// Seed for the subsampling of the larger set; fixed so evaluations are
/// reproducible and symmetric in their arguments.
pub const SUBSAMPLE_SEED: u64 = 1;

/// Exact minimum-cost assignment on a dense `n x n` cost matrix (row-major).
/// Returns per-row assigned columns and the total cost.
///
/// Shortest augmenting path with dual potentials; exact for real costs.
fn solve_assignment(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    // 1-indexed arrays, p[j] = row matched to column j (0 = none)
    let inf = f64::INFINITY;
    let mut u = alloc::vec![0.0; n + 1];
    let mut v = alloc::vec![0.0; n + 1];
    let mut p = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = alloc::vec![inf; n + 1];
        let mut used = alloc::vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = alloc::vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
        total += cost[(p[j] - 1) * n + (j - 1)];
    }
    (assignment, total)
}

fn set_order(a: &SampleSet, b: &SampleSet) -> core::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        for (x, y) in a.data.iter().zip(&b.data) {
            match x.total_cmp(y) {
                core::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        core::cmp::Ordering::Equal
    })
}

/// Uniform subsample of `n` row indices out of `total`, without replacement.
/// Keyed only by `(SUBSAMPLE_SEED, total)`, so the same larger set is reduced
/// identically regardless of argument order.
fn subsample_indices(total: usize, n: usize) -> Vec<usize> {
    let mut rng = Rng::new(SUBSAMPLE_SEED).substream("wass-subsample", total as u64);
    let mut pool: Vec<usize> = (0..total).collect();
    for k in 0..n {
        let pick = k + rng.index(total - k);
        pool.swap(k, pick);
    }
    pool.truncate(n);
    pool
}

/// Exact p-Wasserstein distance between two sample sets (`p` in {1, 2}).
pub fn wasserstein(gen: &SampleSet, reference: &SampleSet, p: u32) -> Result<f64> {
    if gen.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("wasserstein sample sets"));
    }
    if gen.dim != reference.dim {
        return Err(Error::DimMismatch {
            expected: reference.dim,
            got: gen.dim,
            what: "wasserstein sample sets",
        });
    }
    if !(p == 1 || p == 2) {
        return Err(Error::InvalidArg(format!("wasserstein order must be 1 or 2, got {p}")));
    }
    // canonical argument order makes the result bit-symmetric in its inputs
    if set_order(gen, reference) == core::cmp::Ordering::Greater {
        return wasserstein(reference, gen, p);
    }
    let n = gen.len().min(reference.len());
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::InvalidArg(format!(
            "assignment size {n} exceeds {MAX_ASSIGNMENT_SIZE}; subsample the inputs first"
        )));
    }
    let pick = |set: &SampleSet| -> Vec<usize> {
        if set.len() == n {
            (0..n).collect()
        } else {
            subsample_indices(set.len(), n)
        }
    };
    let gi = pick(gen);
    let ri = pick(reference);
    let dim = gen.dim;
    let cost: Vec<f64> = {
        let rows = par_collect(n, |i| {
            let a = gen.row(gi[i]);
            let mut row = alloc::vec![0.0; n];
            for (j, r) in row.iter_mut().enumerate() {
                let d2 = sq_dist(a, reference.row(ri[j]));
                *r = if p == 2 { d2 } else { fmath::sqrt(d2) };
            }
            row
        });
        let mut flat = Vec::with_capacity(n * n);
        for row in rows {
            flat.extend_from_slice(&row);
        }
        flat
    };
    let _ = dim;
    let (_, total) = solve_assignment(&cost, n);
    let mean_cost = total / n as f64;
    Ok(if p == 2 { fmath::sqrt(mean_cost) } else { mean_cost })
}

/// Value of a TVD metric plus how many samples were dropped on each side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvdOutcome {
    pub value: f64,
    pub dropped_gen: usize,
    pub dropped_ref: usize,
}

fn bin_rule(n: usize) -> usize {
    (fmath::sqrt(n as f64) as usize).max(1)
}

fn shared_range(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in a.iter().chain(b) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        // degenerate pooled range: widen so a single shared bin works
        hi = lo + 1e-9;
    }
    (lo, hi)
}

fn one_dim_tvd(gen_vals: &[f64], ref_vals: &[f64], n_bins: usize) -> Result<f64> {
    let range = shared_range(gen_vals, ref_vals);
    let hg = make_histogram(gen_vals, n_bins, range)?;
    let hr = make_histogram(ref_vals, n_bins, range)?;
    Ok(histogram_tvd(&hg, &hr)?.clamp(0.0, 1.0))
}

/// TVD between histograms of `ln(E - E_pool_min + 1)` over both sets.
///
/// Samples with non-finite energy are dropped; more than 1% dropped on either
/// side is an error.
pub fn energy_tvd<E: Energy + ?Sized>(
    gen: &SampleSet,
    reference: &SampleSet,
    f: &E,
) -> Result<TvdOutcome> {
    let eval = |set: &SampleSet| -> (Vec<f64>, usize) {
        let mut vals = Vec::with_capacity(set.len());
        let mut dropped = 0;
        for row in set.rows() {
            match f.energy(row) {
                Ok(e) if e.is_finite() => vals.push(e),
                _ => dropped += 1,
            }
        }
        (vals, dropped)
    };
    let (gen_e, dropped_gen) = eval(gen);
    let (ref_e, dropped_ref) = eval(reference);
    if gen_e.is_empty() || ref_e.is_empty() {
        return Err(Error::Numeric(String::from("all sample energies non-finite")));
    }
    if dropped_gen * 100 > gen.len() || dropped_ref * 100 > reference.len() {
        return Err(Error::Numeric(format!(
            "more than 1% non-finite energies (gen {dropped_gen}/{}, ref {dropped_ref}/{})",
            gen.len(),
            reference.len()
        )));
    }
    let pool_min =
        gen_e.iter().chain(&ref_e).cloned().fold(f64::INFINITY, f64::min);
    let log_shift =
        |vals: &[f64]| -> Vec<f64> { vals.iter().map(|&e| fmath::ln_1p(e - pool_min)).collect() };
    let gen_y = log_shift(&gen_e);
    let ref_y = log_shift(&ref_e);
    let n_bins = bin_rule(gen_y.len().min(ref_y.len()));
    let value = one_dim_tvd(&gen_y, &ref_y, n_bins)?;
    Ok(TvdOutcome { value, dropped_gen, dropped_ref })
}

/// TVD between 2D position histograms on the pooled bounding box.
///
/// The grid has `floor(sqrt(n_bins_1d))` bins per axis where
/// `n_bins_1d = floor(sqrt(min(n)))`, so the total cell count tracks the 1D
/// rule.
pub fn sample_tvd(gen: &SampleSet, reference: &SampleSet) -> Result<f64> {
    if gen.dim != 2 || reference.dim != 2 {
        return Err(Error::Unsupported(format!(
            "sample_tvd requires 2D samples, got dims {} and {}",
            gen.dim, reference.dim
        )));
    }
    if gen.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("sample_tvd sets"));
    }
    let per_axis = (fmath::sqrt(bin_rule(gen.len().min(reference.len())) as f64) as usize).max(1);
    let xs_g: Vec<f64> = gen.rows().map(|r| r[0]).collect();
    let ys_g: Vec<f64> = gen.rows().map(|r| r[1]).collect();
    let xs_r: Vec<f64> = reference.rows().map(|r| r[0]).collect();
    let ys_r: Vec<f64> = reference.rows().map(|r| r[1]).collect();
    let (x_lo, x_hi) = shared_range(&xs_g, &xs_r);
    let (y_lo, y_hi) = shared_range(&ys_g, &ys_r);
    let wx = (x_hi - x_lo) / per_axis as f64;
    let wy = (y_hi - y_lo) / per_axis as f64;
    let cell = |x: f64, y: f64| -> usize {
        let ix = ((x - x_lo) / wx).clamp(0.0, (per_axis - 1) as f64) as usize;
        let iy = ((y - y_lo) / wy).clamp(0.0, (per_axis - 1) as f64) as usize;
        ix * per_axis + iy
    };
    let mut count_g = alloc::vec![0u64; per_axis * per_axis];
    let mut count_r = alloc::vec![0u64; per_axis * per_axis];
    for row in gen.rows() {
        count_g[cell(row[0], row[1])] += 1;
    }
    for row in reference.rows() {
        count_r[cell(row[0], row[1])] += 1;
    }
    let ng = gen.len() as f64;
    let nr = reference.len() as f64;
    let tvd = count_g
        .iter()
        .zip(&count_r)
        .map(|(&a, &b)| fmath::abs(a as f64 / ng - b as f64 / nr))
        .sum::<f64>()
        * 0.5;
    Ok(tvd.clamp(0.0, 1.0))
}

/// TVD between histograms of all pairwise interparticle distances.
///
/// Each configuration of `n_particles` points in `space_dim` dimensions
/// contributes its `n(n-1)/2` distances; the bin rule uses the distance-value
/// counts.
pub fn distance_tvd(
    gen: &SampleSet,
    reference: &SampleSet,
    n_particles: usize,
    space_dim: usize,
) -> Result<f64> {
    let expected = n_particles * space_dim;
    for set in [gen, reference] {
        if set.dim != expected {
            return Err(Error::DimMismatch {
                expected,
                got: set.dim,
                what: "distance_tvd configuration shape",
            });
        }
    }
    if gen.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("distance_tvd sets"));
    }
    let pairwise = |set: &SampleSet| -> Vec<f64> {
        let mut out = Vec::with_capacity(set.len() * n_particles * (n_particles - 1) / 2);
        for row in set.rows() {
            for i in 0..n_particles {
                for j in (i + 1)..n_particles {
                    let a = &row[i * space_dim..(i + 1) * space_dim];
                    let b = &row[j * space_dim..(j + 1) * space_dim];
                    out.push(fmath::sqrt(sq_dist(a, b)));
                }
            }
        }
        out
    };
    let gen_d = pairwise(gen);
    let ref_d = pairwise(reference);
    let n_bins = bin_rule(gen_d.len().min(ref_d.len()));
    one_dim_tvd(&gen_d, &ref_d, n_bins)
}

/// Full evaluation report for a generated set against a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub w1: f64,
    pub w2: f64,
    pub e_tvd: f64,
    pub s_tvd: Option<f64>,
    pub d_tvd: Option<f64>,
    pub n_gen: usize,
    pub n_ref: usize,
    pub benchmark: String,
    pub dropped_gen: usize,
    pub dropped_ref: usize,
    pub subsample_seed: u64,
}

/// Compute every applicable metric: W1/W2 and E-TVD always, S-TVD for 2D
/// benchmarks, D-TVD when a particle shape is given.
pub fn full_report<E: Energy + ?Sized>(
    gen: &SampleSet,
    reference: &SampleSet,
    f: &E,
    benchmark: String,
    particle_shape: Option<(usize, usize)>,
) -> Result<MetricsReport> {
    let w1 = wasserstein(gen, reference, 1)?;
    let w2 = wasserstein(gen, reference, 2)?;
    let e = energy_tvd(gen, reference, f)?;
    let s_tvd = if gen.dim == 2 { Some(sample_tvd(gen, reference)?) } else { None };
    let d_tvd = match particle_shape {
        Some((n_particles, space_dim)) => {
            Some(distance_tvd(gen, reference, n_particles, space_dim)?)
        }
        None => None,
    };
    Ok(MetricsReport {
        w1,
        w2,
        e_tvd: e.value,
        s_tvd,
        d_tvd,
        n_gen: gen.len(),
        n_ref: reference.len(),
        benchmark,
        dropped_gen: e.dropped_gen,
        dropped_ref: e.dropped_ref,
        subsample_seed: SUBSAMPLE_SEED,
    })
}
