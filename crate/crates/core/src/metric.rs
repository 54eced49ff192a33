//! The weighted Kolmogorov distance `sup_t w_q(t) |F(t) - G(t)|`.
//!
//! One-sample distances against a continuous model are computed from a
//! candidate set (both one-sided values at every jump plus equally spaced
//! interior points) and come with a bound on what the candidates can miss.
//! Two-sample distances are exact. The rectangle version in two or three
//! dimensions brackets the supremum between attained corner values and a
//! per-cell upper bound.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::distributions::{DistributionModel, Sampler};
use crate::error::{Error, Result};
use crate::exhaustion::{ExhaustionSpec, WeightConfig};
use crate::fanout::Fanout;
use crate::rng::StreamKey;
use crate::special::norm_cdf;

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
    /// Distinct values with `#{x < v}` and `#{x <= v}`.
    jumps: Vec<(f64, usize, usize)>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        values.sort_by(|a, b| a.total_cmp(b));
        // -0.0 and 0.0 are the same point of the real line
        for v in values.iter_mut() {
            if *v == 0.0 {
                *v = 0.0;
            }
        }
        let mut jumps = Vec::new();
        let mut i = 0;
        while i < values.len() {
            let v = values[i];
            let mut j = i + 1;
            while j < values.len() && values[j] == v {
                j += 1;
            }
            jumps.push((v, i, j));
            i = j;
        }
        Ok(EmpiricalCdf { sorted: values, jumps })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of distinct values.
    pub fn distinct(&self) -> usize {
        self.jumps.len()
    }

    /// `F(t) = #{x <= t} / n`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.len() as f64
    }

    /// Left limit `F(t-) = #{x < t} / n`.
    pub fn eval_left(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x < t) as f64 / self.len() as f64
    }
}

/// Value of a weighted distance and where it was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightedDistanceResult {
    pub value: f64,
    pub argmax_t: f64,
    pub candidates_evaluated: u64,
    /// The true supremum lies in `[value, value + refinement_error_bound]`.
    pub refinement_error_bound: f64,
}

struct Candidates {
    count: u64,
    /// Refined intervals `(a, b, max |level - G|)`; `G` is monotone, so the
    /// maximum sits at an endpoint.
    intervals: Vec<(f64, f64, f64)>,
}

/// Enumerates `(t, |F_hat(t) - G(t)|)` over the candidate set. Left limits at
/// jumps are reported at the jump point itself.
fn visit_candidates<G, V>(ecdf: &EmpiricalCdf, cdf: &G, peak: (f64, f64), refinement: usize, mut visit: V) -> Candidates
where
    G: Fn(f64) -> f64,
    V: FnMut(f64, f64),
{
    let n = ecdf.len() as f64;
    let steps = refinement + 1;
    let mut count = 0u64;
    let mut intervals = Vec::with_capacity(ecdf.jumps.len() + 1);
    let mut refine = |a: f64, b: f64, ga: f64, gb: f64, level: f64, visit: &mut V, count: &mut u64| {
        let width = b - a;
        if width > 0.0 {
            intervals.push((a, b, fabs(level - ga).max(fabs(level - gb))));
            for j in 1..steps {
                let t = a + width * j as f64 / steps as f64;
                visit(t, fabs(level - cdf(t)));
                *count += 1;
            }
        }
    };

    let (first, _, _) = ecdf.jumps[0];
    let mut g_next = cdf(first);
    if peak.0 < first {
        let g0 = cdf(peak.0);
        visit(peak.0, g0);
        count += 1;
        refine(peak.0, first, g0, g_next, 0.0, &mut visit, &mut count);
    }
    for (k, &(v, below, upto)) in ecdf.jumps.iter().enumerate() {
        let g = g_next;
        let hi = upto as f64 / n;
        visit(v, fabs(below as f64 / n - g));
        visit(v, fabs(hi - g));
        count += 2;
        if let Some(&(next, _, _)) = ecdf.jumps.get(k + 1) {
            g_next = cdf(next);
            refine(v, next, g, g_next, hi, &mut visit, &mut count);
        }
    }
    let (last, _, _) = ecdf.jumps[ecdf.jumps.len() - 1];
    if peak.1 > last {
        let g1 = cdf(peak.1);
        refine(last, peak.1, g_next, g1, 1.0, &mut visit, &mut count);
        visit(peak.1, fabs(1.0 - g1));
        count += 1;
    }
    Candidates { count, intervals }
}

/// Upper bound on how far the supremum over the refined intervals can exceed
/// `value`: on each interval the smaller of `max w * max D - value` and the
/// local Lipschitz constant times half the refinement spacing.
fn refinement_bound(cand: &Candidates, model: &DistributionModel, cfg: &WeightConfig, refinement: usize, value: f64) -> f64 {
    let steps = (refinement + 1) as f64;
    cand.intervals.iter().fold(0.0, |acc: f64, &(a, b, dmax)| {
        let wmax = cfg.weight_max_on(a, b);
        let direct = wmax * dmax - value;
        if direct <= acc {
            return acc;
        }
        let lip = cfg.weight_lipschitz_on(a, b) * dmax + wmax * model.density_max_on(a, b);
        acc.max(direct.min(lip * 0.5 * (b - a) / steps))
    })
}

/// `d(F_hat, G)` against a continuous model with `refinement` interior points
/// per inter-jump interval.
///
/// Outside the exhaustion's peak region the weight is monotone, so beyond
/// the extreme order statistics the endpoint candidates dominate and no
/// refinement is needed there.
pub fn weighted_distance_to_model(
    sample: &EmpiricalCdf,
    model: &DistributionModel,
    cfg: &WeightConfig,
    refinement: usize,
) -> Result<WeightedDistanceResult> {
    let mut out = weighted_distance_grid(sample, model, &cfg.exhaustion, &[cfg.q], refinement)?;
    Ok(out.remove(0))
}

/// One-sample distances for several `q` sharing one candidate pass.
pub fn weighted_distance_grid(
    sample: &EmpiricalCdf,
    model: &DistributionModel,
    exhaustion: &ExhaustionSpec,
    qs: &[f64],
    refinement: usize,
) -> Result<Vec<WeightedDistanceResult>> {
    if qs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let cfgs = qs
        .iter()
        .map(|&q| WeightConfig::new(exhaustion.clone(), q))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Vec<(f64, f64)> = vec![(-1.0, 0.0); qs.len()];
    let cdf = |t: f64| model.cdf(t);
    let cand = visit_candidates(sample, &cdf, exhaustion.peak_region(), refinement, |t, diff| {
        let h = exhaustion.h(t);
        for (slot, cfg) in best.iter_mut().zip(&cfgs) {
            let v = cfg.weight_of_h(h) * diff;
            if v > slot.0 {
                *slot = (v, t);
            }
        }
    });
    Ok(best
        .into_iter()
        .zip(&cfgs)
        .map(|((value, argmax_t), cfg)| WeightedDistanceResult {
            value,
            argmax_t,
            candidates_evaluated: cand.count,
            refinement_error_bound: refinement_bound(&cand, model, cfg, refinement, value),
        })
        .collect())
}

/// Exact two-sample distance. Between merged jumps both CDFs are constant,
/// so each interval contributes its difference times the largest weight on
/// it.
pub fn weighted_distance_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf, cfg: &WeightConfig) -> WeightedDistanceResult {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let mut merged: Vec<f64> = a.jumps.iter().chain(b.jumps.iter()).map(|j| j.0).collect();
    merged.sort_by(|x, y| x.total_cmp(y));
    merged.dedup();
    let (pa, pb) = cfg.exhaustion.peak_region();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut ca, mut cb) = (0usize, 0usize);
    let mut value: f64 = 0.0;
    let mut argmax_t = merged[0];
    for (k, &u) in merged.iter().enumerate() {
        while ia < a.jumps.len() && a.jumps[ia].0 <= u {
            ca = a.jumps[ia].2;
            ia += 1;
        }
        while ib < b.jumps.len() && b.jumps[ib].0 <= u {
            cb = b.jumps[ib].2;
            ib += 1;
        }
        let diff = fabs(ca as f64 / na - cb as f64 / nb);
        if diff == 0.0 {
            continue;
        }
        let end = merged.get(k + 1).copied().unwrap_or(f64::INFINITY);
        let w = cfg.weight_max_on(u, end);
        let v = w * diff;
        if v > value {
            value = v;
            // where the weight peaks inside [u, end]
            argmax_t = if pb < u {
                u
            } else if pa > end {
                end
            } else {
                pa.max(u).min(pb)
            };
        }
    }
    WeightedDistanceResult {
        value,
        argmax_t,
        candidates_evaluated: merged.len() as u64,
        refinement_error_bound: 0.0,
    }
}

/// `Z_n = sum (X_i - mu) / (sigma sqrt n)` for `M` independent batches.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSumSample {
    pub values: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    pub sigma: f64,
}

/// Simulates `m` normalized sums of `n` draws; batch `b` uses substream
/// `key.child(b)`.
pub fn simulate_normalized_sums<P: Fanout>(
    model: &DistributionModel,
    n: usize,
    m: usize,
    key: StreamKey,
    fanout: &P,
) -> Result<NormalizedSumSample> {
    let sampler = Sampler::new(*model)?;
    simulate_normalized_sums_with(&sampler, n, m, key, fanout)
}

/// As [`simulate_normalized_sums`] with a prebuilt sampler.
pub fn simulate_normalized_sums_with<P: Fanout>(
    sampler: &Sampler,
    n: usize,
    m: usize,
    key: StreamKey,
    fanout: &P,
) -> Result<NormalizedSumSample> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("n, M", "must be at least 1"));
    }
    let model = sampler.model();
    let mu = model.mean();
    let sigma = model.sd();
    let norm = sigma * sqrt(n as f64);
    let values = fanout.map_indexed(m, |b| {
        let mut s = key.child(b as u64).stream();
        sampler.centered_sum(&mut s, n) / norm
    });
    Ok(NormalizedSumSample { values, n, m, mu, sigma })
}

/// Multivariate distance result; `argmax` is the attaining corner.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultivariateDistanceResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub cells_evaluated: u64,
    /// The true supremum lies in `[value, value + error_bound]`.
    pub error_bound: f64,
}

/// Weight `(1 + |x - center|)^(-q)` on `R^d` with the Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialWeight {
    pub center: Vec<f64>,
    pub q: f64,
}

impl RadialWeight {
    pub fn new(center: Vec<f64>, q: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::invalid("q", "must be finite and nonnegative"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("center", "must be finite"));
        }
        Ok(RadialWeight { center, q })
    }

    fn of_dist2(&self, d2: f64) -> f64 {
        if self.q == 0.0 {
            1.0
        } else {
            libm::exp(-self.q * libm::log1p(sqrt(d2)))
        }
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        let d2 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        self.of_dist2(d2)
    }
}

/// Rectangle distance between the empirical CDF of `points` (each of
/// length `d`) and the standard normal product `prod_j Phi(x_j)`.
///
/// The coordinate values cut space into cells on which the empirical CDF is
/// constant. The reported value is the largest weighted difference at a
/// finite cell corner, using the cell's own empirical value (one-sided
/// limits). The per-cell upper bound is the largest weight on the cell times
/// the larger difference at its lowest and highest corner.
pub fn weighted_distance_multivariate(
    points: &[Vec<f64>],
    weight: &RadialWeight,
    budget: u64,
) -> Result<MultivariateDistanceResult> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = points[0].len();
    if !(2..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if weight.center.len() != d {
        return Err(Error::invalid("center", "dimension does not match the sample"));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(Error::invalid("points", "all points must have the same dimension"));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample { index: i });
        }
    }
    let n = points.len();

    // per-axis distinct coordinates; cell index k covers [u_k, u_{k+1})
    // with u_0 = -inf
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut u: Vec<f64> = points.iter().map(|p| p[j] + 0.0).collect();
        u.sort_by(|a, b| a.total_cmp(b));
        u.dedup();
        let mut with_inf = Vec::with_capacity(u.len() + 2);
        with_inf.push(f64::NEG_INFINITY);
        with_inf.extend(u);
        with_inf.push(f64::INFINITY);
        axes.push(with_inf);
    }
    let dims: Vec<usize> = axes.iter().map(|a| a.len() - 1).collect();
    let cells: u64 = dims.iter().map(|&m| m as u64).product();
    let work = cells.saturating_mul(1u64 << d);
    if work > budget {
        return Err(Error::BudgetExceeded { required: work, limit: budget });
    }
    let total = cells as usize;
    let stride = |j: usize| -> usize { dims[j + 1..].iter().product() };
    let strides: Vec<usize> = (0..d).map(stride).collect();

    // cumulative counts #{x <= lower corner of cell}
    let mut counts = vec![0u32; total];
    for p in points {
        let mut idx = 0;
        for j in 0..d {
            let k = axes[j].partition_point(|&u| u <= p[j]) - 1;
            idx += k * strides[j];
        }
        counts[idx] += 1;
    }
    for j in 0..d {
        for idx in 0..total {
            let k = (idx / strides[j]) % dims[j];
            if k > 0 {
                counts[idx] += counts[idx - strides[j]];
            }
        }
    }

    let phis: Vec<Vec<f64>> = axes.iter().map(|a| a.iter().map(|&u| norm_cdf(u)).collect()).collect();
    let mut value: f64 = -1.0;
    let mut argmax = vec![0.0; d];
    let mut upper: f64 = 0.0;
    let mut kk = vec![0usize; d];
    let mut corner = vec![0.0; d];
    for idx in 0..total {
        for j in 0..d {
            kk[j] = (idx / strides[j]) % dims[j];
        }
        let c = counts[idx] as f64 / n as f64;
        // upper bound on the cell
        let mut d2 = 0.0;
        let mut phi_lo = 1.0;
        let mut phi_hi = 1.0;
        for j in 0..d {
            let lo = axes[j][kk[j]];
            let hi = axes[j][kk[j] + 1];
            let cj = weight.center[j];
            let gap = if cj < lo { lo - cj } else if cj > hi { cj - hi } else { 0.0 };
            d2 += gap * gap;
            phi_lo *= phis[j][kk[j]];
            phi_hi *= phis[j][kk[j] + 1];
        }
        let u = weight.of_dist2(d2) * fabs(c - phi_lo).max(fabs(c - phi_hi));
        upper = upper.max(u);
        if u <= value {
            continue;
        }
        // attained values at finite corners
        for mask in 0..(1usize << d) {
            let mut finite = true;
            let mut phi = 1.0;
            for j in 0..d {
                let pick = kk[j] + ((mask >> j) & 1);
                let x = axes[j][pick];
                if x.is_infinite() {
                    finite = false;
                    break;
                }
                corner[j] = x;
                phi *= phis[j][pick];
            }
            if !finite {
                continue;
            }
            let v = weight.weight(&corner) * fabs(c - phi);
            if v > value {
                value = v;
                argmax.copy_from_slice(&corner);
            }
        }
    }
    let value = value.max(0.0);
    Ok(MultivariateDistanceResult { value, argmax, cells_evaluated: cells, error_bound: (upper - value).max(0.0) })
}

/// Multivariate normalized sums with independent marginals; the covariance
/// is diagonal, so standardization is coordinate-wise.
pub fn simulate_normalized_sums_multivariate<P: Fanout>(
    marginals: &[DistributionModel],
    n: usize,
    m: usize,
    key: StreamKey,
    fanout: &P,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("n, M", "must be at least 1"));
    }
    if !(2..=3).contains(&marginals.len()) {
        return Err(Error::UnsupportedDimension(marginals.len()));
    }
    let samplers = marginals.iter().map(|m| Sampler::new(*m)).collect::<Result<Vec<_>>>()?;
    let root = sqrt(n as f64);
    Ok(fanout.map_indexed(m, |b| {
        let batch = key.child(b as u64);
        samplers
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let mut st = batch.child(j as u64).stream();
                s.centered_sum(&mut st, n) / (s.model().sd() * root)
            })
            .collect()
    }))
}
