//! Truncation analytics for the core/tail error bound and the `(beta, q)`
//! rate selector.
//!
//! The core is `{x : h(x) <= R}`. On it the centered variable
//! `Y = (X - mu) 1{h(X) <= R}` has third absolute moment `M3(R)` and variance
//! `tau_R^2`; off it the tail remainder is `E[|X - mu|^(2+delta) 1{h(X) > R}]`.

use alloc::vec::Vec;

use libm::{exp, log, pow, sqrt};

use crate::distributions::DistributionModel;
use crate::error::{Error, Result};
use crate::exhaustion::{ExhaustionSpec, WeightConfig};

/// Truncated moments at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationAnalysis {
    pub r: f64,
    pub delta: f64,
    pub mu: f64,
    pub sigma2: f64,
    /// `E[|X - mu|^3 1{h(X) <= R}]`.
    pub m3: f64,
    /// `Var[(X - mu) 1{h(X) <= R}]`.
    pub tau_r2: f64,
    /// `E[|X - mu|^(2+delta) 1{h(X) > R}]`.
    pub tail_remainder: f64,
    /// `P(h(X) > R)`.
    pub tail_probability: f64,
}

/// Absolute constants of the bound. None of them is certified; all default
/// to one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BoundConstants {
    pub c_cs: f64,
    pub c1: f64,
    pub c2: f64,
    pub a_delta: f64,
    pub b_delta: f64,
    pub c_delta: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants { c_cs: 1.0, c1: 1.0, c2: 1.0, a_delta: 1.0, b_delta: 1.0, c_delta: 1.0 }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.c_cs, self.c1, self.c2, self.a_delta, self.b_delta, self.c_delta];
        if all.iter().all(|c| *c > 0.0 && c.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid("constants", "all bound constants must be positive and finite"))
        }
    }
}

/// The three terms of the trade-off bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundTerms {
    pub core: f64,
    pub tail: f64,
    pub weight: f64,
    pub total: f64,
}

fn complement(core: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(core.len() + 1);
    let mut left = f64::NEG_INFINITY;
    for &(a, b) in core {
        if a > left {
            out.push((left, a));
        }
        left = b;
    }
    if left < f64::INFINITY {
        out.push((left, f64::INFINITY));
    }
    out
}

fn check_delta(model: &DistributionModel, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1]"));
    }
    let ti = model.tail_index();
    if 2.0 + delta >= ti {
        return Err(Error::MomentNotFinite { order: 2.0 + delta, tail_index: ti });
    }
    Ok(())
}

/// Truncated moments by quadrature over the sublevel set `{h <= R}` and its
/// complement. The tail remainder is integrated directly, never obtained by
/// subtraction.
pub fn truncation_analysis(
    model: &DistributionModel,
    exhaustion: &ExhaustionSpec,
    r: f64,
    delta: f64,
) -> Result<TruncationAnalysis> {
    check_delta(model, delta)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("R", "must be positive and finite"));
    }
    let mu = model.mean();
    let core = exhaustion.sublevel_intervals(r);
    let mut m3 = 0.0;
    let mut ey = 0.0;
    let mut ey2 = 0.0;
    for &(a, b) in &core {
        m3 += model.partial_moment(mu, 3.0, false, a, b)?;
        ey += model.partial_moment(mu, 1.0, true, a, b)?;
        ey2 += model.partial_moment(mu, 2.0, false, a, b)?;
    }
    let mut tail = 0.0;
    let mut tail_p = 0.0;
    for (a, b) in complement(&core) {
        tail += model.partial_moment(mu, 2.0 + delta, false, a, b)?;
        tail_p += model.partial_moment(mu, 0.0, false, a, b)?;
    }
    Ok(TruncationAnalysis {
        r,
        delta,
        mu,
        sigma2: model.variance(),
        m3,
        tau_r2: (ey2 - ey * ey).max(0.0),
        tail_remainder: tail,
        tail_probability: tail_p,
    })
}

/// `C_CS M3 / (tau^3 sqrt n)`, `C1 tail / sigma^(2+delta)` and
/// `C2 (1 + R)^(-q)`.
pub fn evaluate_tradeoff_bound(ta: &TruncationAnalysis, n: u64, q: f64, consts: &BoundConstants) -> Result<BoundTerms> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(q >= 0.0) {
        return Err(Error::invalid("q", "must be nonnegative"));
    }
    consts.validate()?;
    if !(ta.tau_r2 > 0.0) {
        return Err(Error::DegenerateTruncation);
    }
    let tau3 = pow(ta.tau_r2, 1.5);
    let core = consts.c_cs * ta.m3 / (tau3 * sqrt(n as f64));
    let tail = consts.c1 * ta.tail_remainder / pow(ta.sigma2, 0.5 * (2.0 + ta.delta));
    let weight = consts.c2 * pow(1.0 + ta.r, -q);
    Ok(BoundTerms { core, tail, weight, total: core + tail + weight })
}

/// Uniform error bound on the window `[-R, R]`: each term of the weighted
/// bound divided by `c_R`, with `A_delta (1+R)^(1-delta)` in the core term.
pub fn central_window_bound(
    ta: &TruncationAnalysis,
    n: u64,
    cfg: &WeightConfig,
    consts: &BoundConstants,
) -> Result<BoundTerms> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    consts.validate()?;
    let c_r = cfg.min_weight_on_window(ta.r)?;
    let core = consts.a_delta * pow(1.0 + ta.r, 1.0 - ta.delta) / (c_r * sqrt(n as f64));
    let tail = consts.b_delta * ta.tail_remainder / (c_r * pow(ta.sigma2, 0.5 * (2.0 + ta.delta)));
    let weight = consts.c2 * pow(1.0 + ta.r, -cfg.q) / c_r;
    Ok(BoundTerms { core, tail, weight, total: core + tail + weight })
}

/// Bound totals along an `R` grid and the grid minimizer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundScan {
    pub r_opt: f64,
    pub total_min: f64,
    pub totals: Vec<(f64, BoundTerms)>,
}

impl BoundScan {
    /// Whether the totals decrease and then increase along the grid.
    pub fn is_unimodal(&self) -> bool {
        let t: Vec<f64> = self.totals.iter().map(|(_, b)| b.total).collect();
        let k = t.iter().enumerate().fold(0, |best, (i, v)| if *v < t[best] { i } else { best });
        t[..=k].windows(2).all(|w| w[1] <= w[0]) && t[k..].windows(2).all(|w| w[1] >= w[0])
    }
}

fn check_grid(grid: &[f64], name: &'static str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid(name, "values must be positive and finite"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(name, "values must be strictly increasing"));
    }
    Ok(())
}

/// Grid minimization of the trade-off bound over `R`.
pub fn minimize_bound_over_r(
    model: &DistributionModel,
    exhaustion: &ExhaustionSpec,
    n: u64,
    q: f64,
    delta: f64,
    consts: &BoundConstants,
    r_grid: &[f64],
) -> Result<BoundScan> {
    check_grid(r_grid, "R_grid")?;
    let mut totals = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let ta = truncation_analysis(model, exhaustion, r, delta)?;
        totals.push((r, evaluate_tradeoff_bound(&ta, n, q, consts)?));
    }
    let (r_opt, best) = totals
        .iter()
        .fold((r_grid[0], f64::INFINITY), |acc, (r, b)| if b.total < acc.1 { (*r, b.total) } else { acc });
    Ok(BoundScan { r_opt, total_min: best, totals })
}

/// Ordinary least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("x, y", "lengths differ"));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("x", "needs at least two distinct values"));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LinearFit { slope, intercept: my - slope * mx, r2 })
}

/// Log-log fit of the tail remainder against `R`; `-slope` estimates `eta`
/// and `exp(intercept)` estimates `K`.
pub fn fit_tail_exponent(
    model: &DistributionModel,
    exhaustion: &ExhaustionSpec,
    delta: f64,
    r_grid: &[f64],
) -> Result<LinearFit> {
    check_grid(r_grid, "R_grid")?;
    let mut xs = Vec::with_capacity(r_grid.len());
    let mut ys = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let ta = truncation_analysis(model, exhaustion, r, delta)?;
        if ta.tail_remainder > 0.0 {
            xs.push(log(r));
            ys.push(log(ta.tail_remainder));
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: xs.len() });
    }
    linear_fit(&xs, &ys)
}

/// `M3(R) / ((1 + R)^(1-delta) E|X - mu|^(2+delta))`.
pub fn m3_ratio(model: &DistributionModel, exhaustion: &ExhaustionSpec, r: f64, delta: f64) -> Result<f64> {
    let ta = truncation_analysis(model, exhaustion, r, delta)?;
    let full = model.abs_central_moment(2.0 + delta)?;
    Ok(ta.m3 / (pow(1.0 + r, 1.0 - delta) * full))
}

/// Smallest `C_delta` with `M3(R) <= C_delta (1+R)^(1-delta) E|X-mu|^(2+delta)`
/// on `[r_min, r_max]`: a log-spaced scan followed by golden-section
/// refinement around the largest ratio.
pub fn fit_m3_constant(
    model: &DistributionModel,
    exhaustion: &ExhaustionSpec,
    delta: f64,
    r_min: f64,
    r_max: f64,
) -> Result<f64> {
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::invalid("R range", "need 0 < r_min < r_max"));
    }
    let points = 200;
    let (la, lb) = (log(r_min), log(r_max));
    let step = (lb - la) / (points - 1) as f64;
    let mut best = (la, f64::NEG_INFINITY);
    for i in 0..points {
        let s = la + step * i as f64;
        let v = m3_ratio(model, exhaustion, exp(s), delta)?;
        if v > best.1 {
            best = (s, v);
        }
    }
    let f = |s: f64| m3_ratio(model, exhaustion, exp(s), delta);
    let (mut a, mut b) = ((best.0 - step).max(la), (best.0 + step).min(lb));
    let g = 0.5 * (sqrt(5.0) - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(best.1.max(fc).max(fd))
}

/// Threshold schedule `R_n = n^beta` and weight exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatePlan {
    /// Schedule exponent actually recommended (the balanced one when
    /// feasible, otherwise the exponent maximizing the guaranteed rate).
    pub beta: f64,
    pub q: f64,
    pub eta: f64,
    pub delta: f64,
    /// `max(1/(2 eta), 1/(2 q))`.
    pub beta_balanced: f64,
    /// The three sufficient conditions at `beta_balanced`.
    pub core_ok: bool,
    pub tail_ok: bool,
    pub weight_ok: bool,
    pub feasible: bool,
    /// `min(beta eta, beta q, 1/2 - (beta (1 - delta) - 1/2)^+)` at `beta`.
    pub achieved_exponent: f64,
}

impl RatePlan {
    /// `R_n = n^beta`.
    pub fn threshold(&self, n: u64) -> f64 {
        pow(n as f64, self.beta)
    }
}

fn guaranteed_exponent(beta: f64, eta: f64, q: f64, delta: f64) -> f64 {
    let penalty = (beta * (1.0 - delta) - 0.5).max(0.0);
    (beta * eta).min(beta * q).min(0.5 - penalty)
}

/// Balanced choice `beta = max(1/(2 eta), 1/(2 q))` with `q = max(eta, q_user)`,
/// plus the feasibility of the three sufficient conditions. When infeasible,
/// `beta` is the maximizer of the guaranteed exponent.
pub fn select_rate_parameters(eta: f64, delta: f64, q_user: Option<f64>) -> Result<RatePlan> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::NoRateGuarantee(eta));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1]"));
    }
    if let Some(q) = q_user {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("q", "must be positive and finite"));
        }
    }
    let q = q_user.map_or(eta, |u| u.max(eta));
    let beta_balanced = (0.5 / eta).max(0.5 / q);
    let core_ok = beta_balanced * (1.0 - delta) <= 0.5;
    let tail_ok = beta_balanced * eta >= 0.5;
    let weight_ok = beta_balanced * q >= 0.5;
    let feasible = core_ok && tail_ok && weight_ok;
    let beta = if feasible {
        beta_balanced
    } else {
        // min(beta a, 1 - beta (1 - delta)) peaks where the two meet
        let a = eta.min(q);
        1.0 / (a + 1.0 - delta)
    };
    Ok(RatePlan {
        beta,
        q,
        eta,
        delta,
        beta_balanced,
        core_ok,
        tail_ok,
        weight_ok,
        feasible,
        achieved_exponent: guaranteed_exponent(beta, eta, q, delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{StreamKey, TailUniform};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| exp(log(a) + (log(b) - log(a)) * i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn gaussian_large_r_limits() {
        let m = DistributionModel::gaussian(0.0, 1.0).unwrap();
        let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, 40.0, 1.0).unwrap();
        assert_relative_eq!(ta.m3, 2.0 * (2.0 / core::f64::consts::PI).sqrt(), max_relative = 1e-9);
        assert!(ta.tail_remainder < 1e-300);
        assert_relative_eq!(ta.tau_r2, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_core() {
        let m = DistributionModel::pareto(2.8, 1.0).unwrap();
        let ex = ExhaustionSpec::centered(m.mean()).unwrap();
        let ta = truncation_analysis(&m, &ex, 1e-9, 0.5).unwrap();
        let full = m.abs_central_moment(2.5).unwrap();
        assert!(ta.m3 < 1e-20);
        assert_relative_eq!(ta.tail_remainder, full, max_relative = 1e-8);
        assert_eq!(evaluate_tradeoff_bound(&ta, 10, 1.0, &BoundConstants::default()).map(|_| ()).is_err(), ta.tau_r2 == 0.0);

        // absolute exhaustion below xm: the core misses the support
        let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, 0.5, 0.5).unwrap();
        assert_eq!(ta.m3, 0.0);
        assert_eq!(ta.tau_r2, 0.0);
        assert_relative_eq!(ta.tail_remainder, full, max_relative = 1e-8);
        assert_eq!(
            evaluate_tradeoff_bound(&ta, 10, 1.0, &BoundConstants::default()),
            Err(Error::DegenerateTruncation)
        );
    }

    #[test]
    fn delta_at_boundary_is_rejected() {
        let t = DistributionModel::student_t(2.5, 0.0, 1.0).unwrap();
        assert!(matches!(
            truncation_analysis(&t, &ExhaustionSpec::Absolute, 10.0, 0.5),
            Err(Error::MomentNotFinite { .. })
        ));
    }

    #[test]
    fn pareto_tail_slope() {
        let m = DistributionModel::pareto(2.8, 1.0).unwrap();
        let fit = fit_tail_exponent(&m, &ExhaustionSpec::Absolute, 0.5, &logspace(10.0, 1e6, 30)).unwrap();
        assert!((fit.slope + 0.3).abs() < 0.05, "slope {}", fit.slope);
        let info = m.tail_index_info(0.5).unwrap();
        assert_relative_eq!(exp(fit.intercept), info.k, max_relative = 0.1);
    }

    #[test]
    fn gaussian_tail_is_superpolynomial() {
        let m = DistributionModel::gaussian(0.0, 1.0).unwrap();
        let rs = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
        let rem: Vec<f64> = rs.iter().map(|&r| truncation_analysis(&m, &ExhaustionSpec::Absolute, r, 1.0).unwrap().tail_remainder).collect();
        let slopes: Vec<f64> = (1..rs.len()).map(|i| (log(rem[i]) - log(rem[i - 1])) / (log(rs[i]) - log(rs[i - 1]))).collect();
        assert!(slopes.windows(2).all(|w| w[1] < w[0]), "{slopes:?}");
    }

    #[test]
    fn tradeoff_snapshot() {
        let m = DistributionModel::student_t(2.5, 0.0, 1.0).unwrap();
        let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, 10.0, 0.45).unwrap();
        let b = evaluate_tradeoff_bound(&ta, 1000, 1.2, &BoundConstants::default()).unwrap();
        assert!(b.core > 0.0 && b.tail > 0.0 && b.weight > 0.0);
        assert!(b.total >= b.core && b.total >= b.tail && b.total >= b.weight);
        assert_relative_eq!(b.weight, pow(11.0, -1.2), max_relative = 1e-14);
        // independent recomputation of the core and tail terms
        let sig = 5.0f64;
        let tail = m.partial_moment(0.0, 2.45, false, 10.0, f64::INFINITY).unwrap() * 2.0;
        assert_relative_eq!(b.tail, tail / sig.powf(1.225), max_relative = 1e-9);
        let m3 = 2.0 * m.partial_moment(0.0, 3.0, false, 0.0, 10.0).unwrap();
        let tau2 = 2.0 * m.partial_moment(0.0, 2.0, false, 0.0, 10.0).unwrap();
        assert_relative_eq!(b.core, m3 / (tau2.powf(1.5) * 1000f64.sqrt()), max_relative = 1e-9);
        // limits
        let far = evaluate_tradeoff_bound(&ta, 1_000_000_000_000, 1.2, &BoundConstants::default()).unwrap();
        assert!(far.core < 1e-5 * b.core.max(1.0) && far.tail == b.tail && far.weight == b.weight);
        let steep = evaluate_tradeoff_bound(&ta, 1000, 200.0, &BoundConstants::default()).unwrap();
        assert!(steep.weight < 1e-200);
    }

    #[test]
    fn minimizer_examples() {
        let g = DistributionModel::gaussian(0.0, 1.0).unwrap();
        let grid = logspace(0.5, 50.0, 30);
        let scan = minimize_bound_over_r(&g, &ExhaustionSpec::Absolute, 100, 1.0, 1.0, &BoundConstants::default(), &grid).unwrap();
        // scan oracle
        let mut best = (0.0, f64::INFINITY);
        for &r in &grid {
            let ta = truncation_analysis(&g, &ExhaustionSpec::Absolute, r, 1.0).unwrap();
            let t = evaluate_tradeoff_bound(&ta, 100, 1.0, &BoundConstants::default()).unwrap().total;
            if t < best.1 {
                best = (r, t);
            }
        }
        assert_eq!(scan.r_opt, best.0);
        assert!(scan.totals.iter().all(|(_, b)| scan.total_min <= b.total));

        let single = minimize_bound_over_r(&g, &ExhaustionSpec::Absolute, 100, 1.0, 1.0, &BoundConstants::default(), &[3.0]).unwrap();
        assert_eq!(single.r_opt, 3.0);
        assert!(minimize_bound_over_r(&g, &ExhaustionSpec::Absolute, 100, 1.0, 1.0, &BoundConstants::default(), &[]).is_err());
        assert!(minimize_bound_over_r(&g, &ExhaustionSpec::Absolute, 100, 1.0, 1.0, &BoundConstants::default(), &[2.0, 1.0]).is_err());
    }

    #[test]
    fn pareto_bound_unimodal_smoke() {
        let m = DistributionModel::pareto(2.8, 1.0).unwrap();
        let scan = minimize_bound_over_r(&m, &ExhaustionSpec::Absolute, 1000, 0.3, 0.5, &BoundConstants::default(), &logspace(1.5, 1e4, 50))
            .unwrap();
        if !scan.is_unimodal() {
            std::eprintln!("warning: pareto(2.8) bound is not unimodal on the test grid");
        }
    }

    #[test]
    fn rate_plan_examples() {
        let p = select_rate_parameters(1.0, 0.5, None).unwrap();
        assert_eq!((p.beta, p.q), (0.5, 1.0));
        assert!(p.feasible && p.core_ok && p.tail_ok && p.weight_ok);
        assert_eq!(p.achieved_exponent, 0.5);

        let p = select_rate_parameters(0.3, 0.5, None).unwrap();
        assert_abs_diff_eq!(p.beta_balanced, 1.0 / 0.6, epsilon = 1e-12);
        assert_eq!(p.q, 0.3);
        assert!(!p.feasible && !p.core_ok && p.tail_ok && p.weight_ok);
        assert_abs_diff_eq!(p.beta, 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p.achieved_exponent, 0.375, epsilon = 1e-12);
        assert!(p.achieved_exponent < 0.5);

        let p = select_rate_parameters(1.0, 0.5, Some(2.0)).unwrap();
        assert_eq!((p.beta, p.q), (0.5, 2.0));
        assert!(p.feasible);

        assert_eq!(select_rate_parameters(0.0, 0.5, None), Err(Error::NoRateGuarantee(0.0)));
        assert!(select_rate_parameters(-1.0, 0.5, None).is_err());
    }

    #[test]
    fn fallback_beta_maximizes_guarantee() {
        for &(eta, delta) in &[(0.3, 0.5), (0.1, 0.2), (0.45, 0.45), (0.05, 0.9)] {
            let p = select_rate_parameters(eta, delta, None).unwrap();
            let scan = (1..20_000).map(|i| i as f64 * 1e-3).map(|b| guaranteed_exponent(b, eta, p.q, delta)).fold(f64::MIN, f64::max);
            assert!(p.achieved_exponent >= scan - 1e-9, "eta {eta} delta {delta}");
        }
    }

    #[test]
    fn feasible_plan_gives_root_n() {
        let m = DistributionModel::student_t(4.0, 0.0, 1.0).unwrap();
        let delta = 0.9;
        let info = m.tail_index_info(delta).unwrap();
        let plan = select_rate_parameters(info.eta, delta, None).unwrap();
        assert!(plan.feasible);
        let mut scaled = Vec::new();
        for k in 2..=6 {
            let n = 10u64.pow(k);
            let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, plan.threshold(n), delta).unwrap();
            let b = evaluate_tradeoff_bound(&ta, n, plan.q, &BoundConstants::default()).unwrap();
            scaled.push(b.total * sqrt(n as f64));
        }
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 1.5, "{scaled:?}");
    }

    #[test]
    fn window_bound_dominates_weighted_bound() {
        let m = DistributionModel::student_t(3.0, 0.0, 1.0).unwrap();
        let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, 5.0, 0.8).unwrap();
        let cfg = WeightConfig::absolute(1.0).unwrap();
        let w = central_window_bound(&ta, 500, &cfg, &BoundConstants::default()).unwrap();
        assert_relative_eq!(w.weight, 1.0, max_relative = 1e-14);
        assert_relative_eq!(w.core, pow(6.0, 0.2) * 6.0 / sqrt(500.0), max_relative = 1e-12);
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo() {
        let n = 1_000_000;
        for (m, delta, r) in [
            (DistributionModel::student_t(2.5, 0.0, 1.0).unwrap(), 0.45, 4.0),
            (DistributionModel::pareto(2.8, 1.0).unwrap(), 0.5, 6.0),
            (DistributionModel::gaussian(0.5, 2.0).unwrap(), 1.0, 3.0),
        ] {
            let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, r, delta).unwrap();
            let xs = crate::distributions::sample(&m, 31, n).unwrap();
            let mu = m.mean();
            let core: Vec<f64> = xs.iter().map(|&x| if x.abs() <= r { x - mu } else { 0.0 }).collect();
            let stat = |v: Vec<f64>| {
                let mean = v.iter().sum::<f64>() / n as f64;
                let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64;
                (mean, (var / n as f64).sqrt())
            };
            let (m3, se3) = stat(core.iter().map(|y| y.abs().powi(3)).collect());
            assert!((m3 - ta.m3).abs() < 3.0 * se3, "{m:?} M3 {m3} vs {}", ta.m3);
            let (ey, _) = stat(core.clone());
            let (ey2, se2) = stat(core.iter().map(|y| y * y).collect());
            assert!((ey2 - ey * ey - ta.tau_r2).abs() < 3.0 * se2 + 1e-3 * ta.tau_r2, "{m:?} tau");
            let (tp, sep) = stat(xs.iter().map(|&x| if x.abs() > r { 1.0 } else { 0.0 }).collect());
            assert!((tp - ta.tail_probability).abs() < 3.0 * sep, "{m:?} tail probability");
        }
    }

    #[test]
    fn pareto_tail_remainder_importance_sampled() {
        // |X - mu|^2.5 has tail index 2.8 / 2.5 < 2, so plain Monte Carlo has
        // no finite variance. Draw from a Pareto(0.3) proposal on (R, inf)
        // instead; the weighted estimator then has finite variance.
        let m = DistributionModel::pareto(2.8, 1.0).unwrap();
        let (alpha, beta, r, p) = (2.8f64, 0.3f64, 5.0f64, 2.5f64);
        let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, r, 0.5).unwrap();
        let mu = m.mean();
        let mut s = StreamKey::new(12).stream();
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let u = match s.tail_uniform() {
                TailUniform::Lower(a) => 1.0 - a,
                TailUniform::Upper(b) => b,
            };
            let x = r * pow(u, -1.0 / beta);
            // f(x) / g(x) with f the Pareto(2.8, 1) density, g the proposal
            let ratio = (alpha / beta) * pow(r, -beta) * pow(x, beta - alpha);
            let v = pow(x - mu, p) * ratio;
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - ta.tail_remainder).abs() < 3.0 * se, "{mean} vs {} (se {se})", ta.tail_remainder);
    }

    #[test]
    fn m3_constant_bounds_the_grid() {
        for (m, delta) in [
            (DistributionModel::student_t(2.5, 0.0, 1.0).unwrap(), 0.45),
            (DistributionModel::pareto(2.8, 1.0).unwrap(), 0.5),
        ] {
            let c = fit_m3_constant(&m, &ExhaustionSpec::Absolute, delta, 0.05, 2e4).unwrap();
            for r in logspace(0.1, 1e4, 40) {
                assert!(m3_ratio(&m, &ExhaustionSpec::Absolute, r, delta).unwrap() <= c * (1.0 + 1e-9));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn truncation_monotone_in_r(r in 0.2f64..50.0, dr in 0.01f64..50.0, nu in 2.6f64..8.0) {
            let m = DistributionModel::student_t(nu, 0.0, 1.0).unwrap();
            let a = truncation_analysis(&m, &ExhaustionSpec::Absolute, r, 0.5).unwrap();
            let b = truncation_analysis(&m, &ExhaustionSpec::Absolute, r + dr, 0.5).unwrap();
            prop_assert!(b.tail_remainder <= a.tail_remainder * (1.0 + 1e-9));
            prop_assert!(b.tau_r2 >= a.tau_r2 * (1.0 - 1e-9));
            prop_assert!(b.tau_r2 <= m.variance() * (1.0 + 1e-9));
            prop_assert!(a.m3 >= 0.0);
        }

        #[test]
        fn plan_feasibility_matches_conditions(eta in 0.01f64..5.0, delta in 0.01f64..1.0, q in proptest::option::of(0.01f64..5.0)) {
            let p = select_rate_parameters(eta, delta, q).unwrap();
            let b = p.beta_balanced;
            prop_assert_eq!(p.feasible, b * (1.0 - delta) <= 0.5 && b * eta >= 0.5 && b * p.q >= 0.5);
            prop_assert!(p.achieved_exponent <= 0.5 + 1e-15);
            if p.feasible {
                prop_assert!((p.achieved_exponent - 0.5).abs() < 1e-12);
            }
        }
    }
}
