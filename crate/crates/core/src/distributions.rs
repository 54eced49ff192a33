//! Analytic return models: Gaussian, location-scale Student-t and Pareto.
//!
//! Sampling is by inverse transform on a [`TailUniform`], so the tails are
//! as accurate as the quantile function. The Student-t quantile has no
//! closed form; the sampler uses a cubic Hermite table in `ln p` built from
//! the exact quantile, with relative error near `1e-11`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use libm::{exp, expm1, fabs, log, log1p, pow};

use crate::error::{Error, Result};
use crate::quad::{integrate_log, QuadOptions};
use crate::rng::{Stream, StreamKey, TailUniform};
use crate::special::{
    norm_cdf, norm_quantile, norm_quantile_lower, norm_sf, student_t_cdf, student_t_ln_norm, student_t_tail,
    FRAC_1_SQRT_2PI,
};

/// A return distribution with finite variance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case", deny_unknown_fields))]
pub enum DistributionModel {
    Gaussian {
        mu: f64,
        sigma: f64,
    },
    StudentT {
        nu: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        loc: f64,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        scale: f64,
    },
    Pareto {
        alpha: f64,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        xm: f64,
    },
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

/// Centered moments of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentSummary {
    pub mu: f64,
    pub sigma2: f64,
    pub delta: f64,
    /// `E|X - mu|^(2 + delta)`, `+inf` when it does not exist.
    pub abs_moment_2_delta: f64,
    pub finite_2_delta: bool,
    pub finite_third: bool,
}

/// Tail index and the constants of the power-law remainder
/// `E[|X - mu|^(2+delta) 1{|X| > R}] ~ K R^(-eta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailIndexInfo {
    pub alpha: f64,
    pub eta: f64,
    pub k: f64,
}

const QUAD: QuadOptions = QuadOptions { rel_tol: 1e-11, abs_tol: 1e-300, max_intervals: 4000 };

impl DistributionModel {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        let m = DistributionModel::Gaussian { mu, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn student_t(nu: f64, loc: f64, scale: f64) -> Result<Self> {
        let m = DistributionModel::StudentT { nu, loc, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn pareto(alpha: f64, xm: f64) -> Result<Self> {
        let m = DistributionModel::Pareto { alpha, xm };
        m.validate()?;
        Ok(m)
    }

    /// Checks parameter ranges; infinite-variance parameterizations are
    /// rejected.
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionModel::Gaussian { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu", "must be finite"));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid("sigma", "must be positive and finite"));
                }
            }
            DistributionModel::StudentT { nu, loc, scale } => {
                if nu.is_nan() || nu <= 0.0 {
                    return Err(Error::invalid("nu", "must be positive"));
                }
                if nu <= 2.0 {
                    return Err(Error::InfiniteVariance);
                }
                if !nu.is_finite() {
                    return Err(Error::invalid("nu", "must be finite"));
                }
                if !loc.is_finite() {
                    return Err(Error::invalid("loc", "must be finite"));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid("scale", "must be positive and finite"));
                }
            }
            DistributionModel::Pareto { alpha, xm } => {
                if alpha.is_nan() || alpha <= 0.0 {
                    return Err(Error::invalid("alpha", "must be positive"));
                }
                if alpha <= 2.0 {
                    return Err(Error::InfiniteVariance);
                }
                if !alpha.is_finite() {
                    return Err(Error::invalid("alpha", "must be finite"));
                }
                if !(xm > 0.0 && xm.is_finite()) {
                    return Err(Error::invalid("xm", "must be positive and finite"));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> &'static str {
        match self {
            DistributionModel::Gaussian { .. } => "gaussian",
            DistributionModel::StudentT { .. } => "student_t",
            DistributionModel::Pareto { .. } => "pareto",
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistributionModel::Gaussian { mu, sigma } => norm_cdf((x - mu) / sigma),
            DistributionModel::StudentT { nu, loc, scale } => student_t_cdf((x - loc) / scale, nu),
            DistributionModel::Pareto { alpha, xm } => {
                if x <= xm {
                    0.0
                } else {
                    -expm1(-alpha * log(x / xm))
                }
            }
        }
    }

    /// Survival function `1 - F(x)`, accurate in the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            DistributionModel::Gaussian { mu, sigma } => norm_sf((x - mu) / sigma),
            DistributionModel::StudentT { nu, loc, scale } => student_t_cdf(-(x - loc) / scale, nu),
            DistributionModel::Pareto { alpha, xm } => {
                if x <= xm {
                    1.0
                } else {
                    exp(-alpha * log(x / xm))
                }
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            DistributionModel::Gaussian { mu, sigma } => {
                let z = (x - mu) / sigma;
                log(FRAC_1_SQRT_2PI / sigma) - 0.5 * z * z
            }
            DistributionModel::StudentT { nu, loc, scale } => {
                let z = (x - loc) / scale;
                student_t_ln_norm(nu) - log(scale) - 0.5 * (nu + 1.0) * ln1p_sq_over(z, nu)
            }
            DistributionModel::Pareto { alpha, xm } => {
                if x < xm {
                    f64::NEG_INFINITY
                } else {
                    log(alpha / xm) - (alpha + 1.0) * log(x / xm)
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        exp(self.ln_pdf(x))
    }

    /// `sup_x f(x)`, the Lipschitz constant of the CDF.
    pub fn density_sup(&self) -> f64 {
        match *self {
            DistributionModel::Gaussian { sigma, .. } => FRAC_1_SQRT_2PI / sigma,
            DistributionModel::StudentT { nu, scale, .. } => exp(student_t_ln_norm(nu)) / scale,
            DistributionModel::Pareto { alpha, xm } => alpha / xm,
        }
    }

    /// `sup_{a <= x <= b} f(x)`; every family is unimodal with its mode at
    /// the location parameter.
    pub fn density_max_on(&self, a: f64, b: f64) -> f64 {
        let m = self.location();
        self.pdf(if m < a { a } else if m > b { b } else { m })
    }

    /// Quantile function on the open interval (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Ok(match *self {
            DistributionModel::Gaussian { mu, sigma } => mu + sigma * norm_quantile(p),
            DistributionModel::StudentT { nu, loc, scale } => {
                if p <= 0.5 {
                    loc + scale * t_quantile_lower(p, nu)
                } else {
                    loc - scale * t_quantile_lower(1.0 - p, nu)
                }
            }
            DistributionModel::Pareto { alpha, xm } => xm * exp(-log1p(-p) / alpha),
        })
    }

    /// Quantile at a tail-stored uniform, exact in both tails.
    pub fn quantile_tail(&self, u: TailUniform) -> f64 {
        match (*self, u) {
            (DistributionModel::Gaussian { mu, sigma }, TailUniform::Lower(p)) => mu + sigma * norm_quantile_lower(p),
            (DistributionModel::Gaussian { mu, sigma }, TailUniform::Upper(s)) => mu - sigma * norm_quantile_lower(s),
            (DistributionModel::StudentT { nu, loc, scale }, TailUniform::Lower(p)) => {
                loc + scale * t_quantile_lower(p, nu)
            }
            (DistributionModel::StudentT { nu, loc, scale }, TailUniform::Upper(s)) => {
                loc - scale * t_quantile_lower(s, nu)
            }
            (DistributionModel::Pareto { alpha, xm }, TailUniform::Lower(p)) => xm * exp(-log1p(-p) / alpha),
            (DistributionModel::Pareto { alpha, xm }, TailUniform::Upper(s)) => xm * exp(-log(s) / alpha),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistributionModel::Gaussian { mu, .. } => mu,
            DistributionModel::StudentT { loc, .. } => loc,
            DistributionModel::Pareto { alpha, xm } => alpha * xm / (alpha - 1.0),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistributionModel::Gaussian { sigma, .. } => sigma * sigma,
            DistributionModel::StudentT { nu, scale, .. } => scale * scale * nu / (nu - 2.0),
            DistributionModel::Pareto { alpha, xm } => xm * xm * alpha / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0)),
        }
    }

    pub fn sd(&self) -> f64 {
        libm::sqrt(self.variance())
    }

    pub fn median(&self) -> f64 {
        match *self {
            DistributionModel::Gaussian { mu, .. } => mu,
            DistributionModel::StudentT { loc, .. } => loc,
            DistributionModel::Pareto { alpha, xm } => xm * pow(2.0, 1.0 / alpha),
        }
    }

    /// Tail index: moments of order `p` exist iff `p < tail_index`.
    pub fn tail_index(&self) -> f64 {
        match *self {
            DistributionModel::Gaussian { .. } => f64::INFINITY,
            DistributionModel::StudentT { nu, .. } => nu,
            DistributionModel::Pareto { alpha, .. } => alpha,
        }
    }

    /// Default moment excess: nine tenths of the admissible range, capped
    /// at one (0.45 for a Student-t with 2.5 degrees of freedom).
    pub fn default_delta(&self) -> f64 {
        let room = self.tail_index() - 2.0;
        if room.is_infinite() {
            1.0
        } else {
            (0.9 * room).min(1.0)
        }
    }

    /// Natural length scale used for quadrature and grids.
    pub fn scale(&self) -> f64 {
        match *self {
            DistributionModel::Gaussian { sigma, .. } => sigma,
            DistributionModel::StudentT { scale, .. } => scale,
            DistributionModel::Pareto { xm, .. } => xm,
        }
    }

    /// Lower end of the support.
    pub fn support_min(&self) -> f64 {
        match *self {
            DistributionModel::Pareto { xm, .. } => xm,
            _ => f64::NEG_INFINITY,
        }
    }

    fn location(&self) -> f64 {
        match *self {
            DistributionModel::Gaussian { mu, .. } => mu,
            DistributionModel::StudentT { loc, .. } => loc,
            DistributionModel::Pareto { xm, .. } => xm,
        }
    }

    /// `int_a^b s(x) |x - c|^p f(x) dx` with `s(x) = sign(x - c)` when
    /// `signed`, else 1. Ends may be infinite.
    pub fn partial_moment(&self, c: f64, p: f64, signed: bool, a: f64, b: f64) -> Result<f64> {
        let a = a.max(self.support_min());
        if !(b > a) {
            return Ok(0.0);
        }
        let lnf = |x: f64| -> (f64, f64) {
            let d = x - c;
            let sign = if signed && d < 0.0 { -1.0 } else { 1.0 };
            let lp = self.ln_pdf(x);
            if p == 0.0 {
                (sign, lp)
            } else {
                (sign, lp + p * log(fabs(d)))
            }
        };
        let loc = self.location();
        let s = self.scale();
        let body = match self {
            DistributionModel::Pareto { .. } => (loc, loc + 20.0 * s),
            _ => (loc - 20.0 * s, loc + 20.0 * s),
        };
        let breaks = [c, loc, loc - s, loc + s, loc - 5.0 * s, loc + 5.0 * s];
        let r = integrate_log(&lnf, a, b, body, &breaks, s, QUAD)?;
        Ok(r.value)
    }

    /// `E|X - mu|^p`.
    pub fn abs_central_moment(&self, p: f64) -> Result<f64> {
        let ti = self.tail_index();
        if p >= ti {
            return Err(Error::MomentNotFinite { order: p, tail_index: ti });
        }
        let mu = self.mean();
        self.partial_moment(mu, p, false, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Mean, variance and `E|X - mu|^(2 + delta)`, the latter flagged
    /// infinite when `2 + delta` reaches the tail index.
    pub fn analytic_moments(&self, delta: f64) -> Result<MomentSummary> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1]"));
        }
        let ti = self.tail_index();
        let finite = 2.0 + delta < ti;
        let abs_moment_2_delta = if finite { self.abs_central_moment(2.0 + delta)? } else { f64::INFINITY };
        Ok(MomentSummary {
            mu: self.mean(),
            sigma2: self.variance(),
            delta,
            abs_moment_2_delta,
            finite_2_delta: finite,
            finite_third: 3.0 < ti,
        })
    }

    /// Tail index, `eta = alpha - (2 + delta)` and the asymptotic constant `K`
    /// of the remainder for `h(t) = |t|`.
    pub fn tail_index_info(&self, delta: f64) -> Result<TailIndexInfo> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1]"));
        }
        let alpha = self.tail_index();
        let eta = alpha - 2.0 - delta;
        let k = match *self {
            DistributionModel::Gaussian { .. } => 0.0,
            _ if eta <= 0.0 => f64::INFINITY,
            DistributionModel::StudentT { nu, scale, .. } => {
                // f(x) ~ A nu^((nu+1)/2) scale^nu |x|^(-nu-1) on both sides
                2.0 * exp(student_t_ln_norm(nu) + 0.5 * (nu + 1.0) * log(nu) + nu * log(scale)) / eta
            }
            DistributionModel::Pareto { alpha, xm } => alpha * pow(xm, alpha) / eta,
        };
        Ok(TailIndexInfo { alpha, eta, k })
    }
}

/// `ln(1 + z^2 / nu)` without overflow for huge `z`.
#[inline]
fn ln1p_sq_over(z: f64, nu: f64) -> f64 {
    let a = fabs(z);
    if a > 1e100 {
        2.0 * log(a) - log(nu)
    } else {
        log1p(a * a / nu)
    }
}

/// Lower-tail standard Student-t quantile for `p` in (0, 1/2]: safeguarded
/// Newton iteration on `ln F(z) = ln p`.
///
/// The root is bracketed by the normal quantile (the t law is more spread)
/// and the tail asymptote `-(A nu^((nu-1)/2) / p)^(1/nu)` (which overstates
/// the tail mass).
pub fn t_quantile_lower(p: f64, nu: f64) -> f64 {
    if p >= 0.5 {
        return 0.0;
    }
    let ln_p = log(p);
    let ln_a = student_t_ln_norm(nu);
    let asym = -exp((ln_a + 0.5 * (nu - 1.0) * log(nu) - ln_p) / nu);
    let gauss = norm_quantile_lower(p);
    let mut lo = asym.min(gauss);
    let mut hi = gauss.max(asym).min(0.0);
    let mut z = if p < 0.05 { lo } else { hi };
    for _ in 0..200 {
        let f = student_t_tail(z, nu);
        let g = log(f) - ln_p;
        if g < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        if fabs(g) < 1e-15 {
            break;
        }
        let ln_pdf = ln_a - 0.5 * (nu + 1.0) * ln1p_sq_over(z, nu);
        let step = g * f / exp(ln_pdf);
        let mut next = z - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if fabs(next - z) <= 4.0 * f64::EPSILON * fabs(z) {
            z = next;
            break;
        }
        z = next;
    }
    z
}

const TABLE_P_MIN_LN: f64 = -54.0 * core::f64::consts::LN_2;
const TABLE_P_MAX_LN: f64 = -core::f64::consts::LN_2;
const TABLE_STEP: f64 = 0.004;

/// Cubic Hermite table of the standard Student-t lower quantile in `s = ln p`
/// on `[ln 2^-54, ln 1/2]`, which covers every value produced by
/// [`Stream::tail_uniform`].
#[derive(Debug, Clone)]
pub struct QuantileTable {
    h: f64,
    z: Vec<f64>,
    dz: Vec<f64>,
}

impl QuantileTable {
    pub fn student_t(nu: f64) -> Self {
        let n = libm::ceil((TABLE_P_MAX_LN - TABLE_P_MIN_LN) / TABLE_STEP) as usize;
        let h = (TABLE_P_MAX_LN - TABLE_P_MIN_LN) / n as f64;
        let ln_a = student_t_ln_norm(nu);
        let mut z = Vec::with_capacity(n + 1);
        let mut dz = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s = if i == n { TABLE_P_MAX_LN } else { TABLE_P_MIN_LN + h * i as f64 };
            let p = exp(s);
            let zi = if i == n { 0.0 } else { t_quantile_lower(p, nu) };
            let ln_pdf = ln_a - 0.5 * (nu + 1.0) * ln1p_sq_over(zi, nu);
            z.push(zi);
            // dz/ds = p / f(z)
            dz.push(exp(s - ln_pdf));
        }
        QuantileTable { h, z, dz }
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        let x = (log(p) - TABLE_P_MIN_LN) / self.h;
        let last = self.z.len() - 2;
        let i = if x <= 0.0 { 0 } else { (x as usize).min(last) };
        let t = x - i as f64;
        let u = 1.0 - t;
        let h00 = (1.0 + 2.0 * t) * u * u;
        let h10 = t * u * u;
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = -t * t * u;
        h00 * self.z[i] + h01 * self.z[i + 1] + self.h * (h10 * self.dz[i] + h11 * self.dz[i + 1])
    }
}

/// Inverse-transform sampler bound to a model.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: DistributionModel,
    table: Option<Arc<QuantileTable>>,
}

impl Sampler {
    pub fn new(model: DistributionModel) -> Result<Self> {
        model.validate()?;
        let table = match model {
            DistributionModel::StudentT { nu, .. } => Some(Arc::new(QuantileTable::student_t(nu))),
            _ => None,
        };
        Ok(Sampler { model, table })
    }

    pub fn model(&self) -> &DistributionModel {
        &self.model
    }

    /// Quantile used by the sampler at a tail-stored uniform.
    #[inline]
    pub fn quantile_at(&self, u: TailUniform) -> f64 {
        match (&self.model, &self.table) {
            (DistributionModel::StudentT { loc, scale, .. }, Some(t)) => match u {
                TailUniform::Lower(p) => loc + scale * t.eval(p),
                TailUniform::Upper(s) => loc - scale * t.eval(s),
            },
            _ => self.model.quantile_tail(u),
        }
    }

    #[inline]
    pub fn draw(&self, stream: &mut Stream) -> f64 {
        self.quantile_at(stream.tail_uniform())
    }

    pub fn draw_n(&self, stream: &mut Stream, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(stream)).collect()
    }

    /// Sum of `n` centered draws, `sum (X_i - mu)`.
    pub fn centered_sum(&self, stream: &mut Stream, n: usize) -> f64 {
        let mu = self.model.mean();
        let mut acc = 0.0;
        for _ in 0..n {
            acc += self.draw(stream) - mu;
        }
        acc
    }
}

/// Draws `n` values from the stream identified by `key`.
pub fn sample_stream(model: &DistributionModel, key: StreamKey, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let sampler = Sampler::new(*model)?;
    Ok(sampler.draw_n(&mut key.stream(), n))
}

/// Draws `n` values; deterministic in `(seed, n, model)`.
pub fn sample(model: &DistributionModel, seed: u64, n: usize) -> Result<Vec<f64>> {
    sample_stream(model, StreamKey::new(seed), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use crate::special::ln_gamma;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::vec;

    fn t25() -> DistributionModel {
        DistributionModel::student_t(2.5, 0.0, 1.0).unwrap()
    }

    fn p28() -> DistributionModel {
        DistributionModel::pareto(2.8, 1.0).unwrap()
    }

    fn models() -> Vec<DistributionModel> {
        vec![
            DistributionModel::gaussian(0.0, 1.0).unwrap(),
            DistributionModel::gaussian(-1.5, 0.3).unwrap(),
            t25(),
            DistributionModel::student_t(4.0, 0.2, 2.0).unwrap(),
            DistributionModel::student_t(30.0, -1.0, 0.5).unwrap(),
            p28(),
            DistributionModel::pareto(3.5, 0.2).unwrap(),
        ]
    }

    #[test]
    fn construction_rejects_infinite_variance() {
        assert_eq!(DistributionModel::student_t(2.0, 0.0, 1.0), Err(Error::InfiniteVariance));
        assert_eq!(DistributionModel::pareto(1.9, 1.0), Err(Error::InfiniteVariance));
        assert!(DistributionModel::gaussian(0.0, 0.0).is_err());
        assert!(DistributionModel::student_t(3.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(DistributionModel::gaussian(0.0, 1.0).unwrap().cdf(0.0), 0.5);
        assert_eq!(t25().cdf(0.0), 0.5);
        let closed = 1.0 - libm::pow(2.0, -2.8);
        assert_abs_diff_eq!(p28().cdf(2.0), closed, epsilon = 1e-15);
        assert_abs_diff_eq!(closed, 0.856_413, epsilon = 1e-6);
        // oracle: integrate the density
        let m = p28();
        let r = integrate(|x| m.pdf(x), 1.0, 2.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(r.value, closed, epsilon = 1e-12);
    }

    #[test]
    fn cdf_matches_integrated_density() {
        for m in models() {
            let lo = m.quantile(0.01).unwrap();
            for &x in &[m.quantile(0.3).unwrap(), m.median(), m.quantile(0.97).unwrap()] {
                let r = integrate(|t| m.pdf(t), lo, x, QuadOptions::default()).unwrap();
                assert_abs_diff_eq!(m.cdf(x) - m.cdf(lo), r.value, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(DistributionModel::gaussian(0.0, 1.0).unwrap().quantile(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(p28().quantile(0.5).unwrap(), libm::pow(2.0, 1.0 / 2.8), epsilon = 1e-14);
        assert_abs_diff_eq!(p28().quantile(0.5).unwrap(), 1.2809, epsilon = 1e-4);
        // independent bisection oracle for the t quantile
        let m = t25();
        let (mut a, mut b) = (0.0, 50.0);
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if m.cdf(c) < 0.975 {
                a = c;
            } else {
                b = c;
            }
        }
        let v = m.quantile(0.975).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (a + b), epsilon = 1e-10);
        assert_abs_diff_eq!(m.cdf(v), 0.975, epsilon = 1e-10);
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(m.quantile(p).is_err());
        }
    }

    #[test]
    fn cdf_quantile_round_trip_on_grid() {
        for m in models() {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..=1000 {
                let p = (i as f64 - 0.5) / 1000.0;
                let x = m.quantile(p).unwrap();
                assert!((m.cdf(x) - p).abs() <= 1e-10, "{m:?} p={p}");
                assert!(x >= prev);
                prev = x;
            }
        }
    }

    #[test]
    fn t_quantile_deep_tail() {
        for &nu in &[2.1, 2.5, 4.0, 30.0] {
            for k in 1..=16 {
                let p = libm::pow(10.0, -(k as f64));
                let z = t_quantile_lower(p, nu);
                assert_relative_eq!(student_t_tail(z, nu), p, max_relative = 1e-12);
            }
            let p = libm::pow(2.0, -54.0);
            assert_relative_eq!(student_t_tail(t_quantile_lower(p, nu), nu), p, max_relative = 1e-12);
        }
    }

    #[test]
    fn quantile_table_tracks_exact_quantile() {
        for &nu in &[2.5, 4.0] {
            let table = QuantileTable::student_t(nu);
            let mut s = StreamKey::new(3).stream();
            for i in 0..4000 {
                // half uniform on (0, 1/2), half log-uniform into the far tail
                let p = if i % 2 == 0 {
                    0.5 * s.open01()
                } else {
                    exp(TABLE_P_MIN_LN + (TABLE_P_MAX_LN - TABLE_P_MIN_LN) * s.open01())
                };
                let exact = t_quantile_lower(p, nu);
                let approx = table.eval(p);
                assert!((approx - exact).abs() <= 5e-11 * exact.abs().max(1.0), "nu={nu} p={p}");
            }
            assert_eq!(table.eval(0.5), 0.0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        assert!(sample(&t25(), 1, 0).is_err());
        let a = sample(&t25(), 77, 1).unwrap();
        let b = sample(&t25(), 77, 1).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_ne!(sample(&t25(), 78, 1).unwrap()[0], a[0]);
    }

    #[test]
    fn pareto_sample_mean() {
        let m = p28();
        let n = 1_000_000;
        let xs = sample(&m, 2024, n).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = (m.variance() / n as f64).sqrt();
        assert_abs_diff_eq!(m.mean(), 2.8 / 1.8, epsilon = 1e-15);
        assert!((mean - 1.5556).abs() < 3.0 * se + 1e-4, "mean {mean}, se {se}");
    }

    #[test]
    fn student_t_sample_variance() {
        // The fourth moment is infinite, so the raw sample variance has a
        // skewed, slowly shrinking spread. Check the second moment truncated
        // at the 1e-4 quantiles to 3 standard errors, and the raw variance
        // with a band that covers its heavy-tailed spread.
        let m = t25();
        let n = 1_000_000;
        let xs = sample(&m, 99, n).unwrap();
        let c = m.quantile(1.0 - 1e-4).unwrap();
        let exact = m.partial_moment(0.0, 2.0, false, -c, c).unwrap();
        let exact4 = m.partial_moment(0.0, 4.0, false, -c, c).unwrap();
        let est = xs.iter().map(|&x| if x.abs() <= c { x * x } else { 0.0 }).sum::<f64>() / n as f64;
        let se = ((exact4 - exact * exact) / n as f64).sqrt();
        assert!((est - exact).abs() < 3.0 * se, "truncated {est} vs {exact}, se {se}");

        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((var / 5.0 - 1.0).abs() < 0.15, "variance {var}");
    }

    #[test]
    fn samplers_pass_dkw_band() {
        let n = 100_000;
        let band = (libm::log(2.0 / 0.01) / (2.0 * n as f64)).sqrt();
        for (i, m) in models().into_iter().enumerate() {
            let mut xs = sample(&m, 500 + i as u64, n).unwrap();
            xs.sort_by(|a, b| a.total_cmp(b));
            let ks = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let g = m.cdf(x);
                    ((k + 1) as f64 / n as f64 - g).max(g - k as f64 / n as f64)
                })
                .fold(0.0, f64::max);
            assert!(ks < band, "{m:?}: ks {ks} band {band}");
        }
    }

    fn gaussian_abs_moment(sigma: f64, p: f64) -> f64 {
        libm::pow(sigma, p) * libm::pow(2.0, p / 2.0) * exp(ln_gamma((p + 1.0) / 2.0)) / core::f64::consts::PI.sqrt()
    }

    fn t_abs_moment(nu: f64, scale: f64, p: f64) -> f64 {
        libm::pow(nu, p / 2.0) * libm::pow(scale, p) * exp(ln_gamma((p + 1.0) / 2.0) + ln_gamma((nu - p) / 2.0) - ln_gamma(nu / 2.0))
            / core::f64::consts::PI.sqrt()
    }

    #[test]
    fn moments_examples() {
        let g = DistributionModel::gaussian(0.0, 1.0).unwrap().analytic_moments(1.0).unwrap();
        assert_relative_eq!(g.abs_moment_2_delta, 2.0 * (2.0 / core::f64::consts::PI).sqrt(), max_relative = 1e-10);
        assert_abs_diff_eq!(g.abs_moment_2_delta, 1.59577, epsilon = 1e-5);
        assert!(g.finite_2_delta && g.finite_third);

        let t = t25().analytic_moments(0.6).unwrap();
        assert!(!t.finite_2_delta && t.abs_moment_2_delta.is_infinite());
        assert_relative_eq!(t.sigma2, 5.0, max_relative = 1e-15);
        assert!(DistributionModel::pareto(2.5, 1.0).unwrap().analytic_moments(0.5).unwrap().abs_moment_2_delta.is_infinite());
    }

    #[test]
    fn moments_match_closed_forms() {
        for &(mu, sigma, p) in &[(0.0, 1.0, 2.5), (1.0, 0.4, 3.0), (-2.0, 3.0, 2.1)] {
            let m = DistributionModel::gaussian(mu, sigma).unwrap();
            assert_relative_eq!(m.abs_central_moment(p).unwrap(), gaussian_abs_moment(sigma, p), max_relative = 1e-9);
        }
        for &(nu, scale, p) in &[(2.5, 1.0, 2.45), (4.0, 2.0, 3.0), (3.0, 0.5, 2.9), (30.0, 1.0, 2.5)] {
            let m = DistributionModel::student_t(nu, 0.3, scale).unwrap();
            assert_relative_eq!(m.abs_central_moment(p).unwrap(), t_abs_moment(nu, scale, p), max_relative = 1e-8);
        }
    }

    #[test]
    fn pareto_centered_moment_oracle() {
        // Split at mu: above it the substitution x = mu / u gives a beta
        // integral; below it Simpson's rule on the bounded piece.
        for &(alpha, xm, delta) in &[(2.8, 1.0, 0.5), (3.5, 0.2, 1.0), (2.8, 2.0, 0.3)] {
            let m = DistributionModel::pareto(alpha, xm).unwrap();
            let p: f64 = 2.0 + delta;
            let mu = m.mean();
            let upper = alpha * libm::pow(xm, alpha) * libm::pow(mu, p - alpha)
                * exp(ln_gamma(alpha - p) + ln_gamma(p + 1.0) - ln_gamma(alpha + 1.0));
            let n = 20_000;
            let (a, b) = (xm, mu);
            let hh = (b - a) / n as f64;
            let f = |x: f64| libm::pow(b - x, p) * alpha * libm::pow(xm, alpha) * libm::pow(x, -alpha - 1.0);
            let mut simpson = f(a) + f(b);
            for i in 1..n {
                simpson += f(a + hh * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let lower = simpson * hh / 3.0;
            let got = m.analytic_moments(delta).unwrap().abs_moment_2_delta;
            assert_relative_eq!(got, upper + lower, max_relative = 1e-8);
        }
    }

    #[test]
    fn uncentered_pareto_moment() {
        // E X^p = alpha xm^p / (alpha - p)
        let m = p28();
        let v = m.partial_moment(0.0, 2.5, false, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert_relative_eq!(v, 2.8 / 0.3, max_relative = 1e-9);
    }

    #[test]
    fn moment_boundary_is_strict() {
        let m = t25();
        assert!(m.abs_central_moment(2.5).is_err());
        assert!(m.abs_central_moment(2.499).is_ok());
        assert!(m.analytic_moments(0.5).unwrap().finite_2_delta == false);
        assert!(m.analytic_moments(0.45).unwrap().finite_2_delta);
        assert_abs_diff_eq!(m.default_delta(), 0.45, epsilon = 1e-15);
    }

    #[test]
    fn tail_constant_matches_remainder() {
        for (m, delta) in [(p28(), 0.5), (t25(), 0.2)] {
            let info = m.tail_index_info(delta).unwrap();
            let mu = m.mean();
            let r: f64 = 1e8;
            let rem = m.partial_moment(mu, 2.0 + delta, false, r, f64::INFINITY).unwrap()
                + m.partial_moment(mu, 2.0 + delta, false, f64::NEG_INFINITY, -r).unwrap();
            assert_relative_eq!(rem, info.k * libm::pow(r, -info.eta), max_relative = 1e-3);
        }
    }

    proptest! {
        #[test]
        fn cdf_is_monotone(x in -50.0f64..50.0, dx in 0.0f64..10.0) {
            for m in models() {
                prop_assert!(m.cdf(x) <= m.cdf(x + dx));
                let c = m.cdf(x);
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!((m.cdf(x) + m.sf(x) - 1.0).abs() < 1e-14);
            }
        }

        #[test]
        fn quantile_is_monotone(p in 1e-12f64..0.999_999, dp in 0.0f64..1e-3) {
            let q = (p + dp).min(1.0 - 1e-12);
            for m in models() {
                prop_assert!(m.quantile(p).unwrap() <= m.quantile(q).unwrap());
            }
        }
    }
}
