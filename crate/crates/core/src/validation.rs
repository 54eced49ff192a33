//! Model acceptance: parametric bootstrap, Kupiec tail test, grid-robust
//! statistic and the hybrid verdict.

use alloc::vec::Vec;

use libm::{ceil, log};

use crate::distributions::{sample_stream, DistributionModel};
use crate::error::{Error, Result};
use crate::exhaustion::{ExhaustionSpec, WeightConfig};
use crate::fanout::Fanout;
use crate::metric::{weighted_distance_grid, weighted_distance_to_model, EmpiricalCdf};
use crate::rng::StreamKey;
use crate::special::chi2_1_sf;

/// Smallest bootstrap size accepted.
pub const MIN_BOOTSTRAP: usize = 100;

fn check_bootstrap(b: usize) -> Result<()> {
    if b < MIN_BOOTSTRAP {
        return Err(Error::InsufficientPoints { needed: MIN_BOOTSTRAP, got: b });
    }
    Ok(())
}

fn bootstrap_with<P, S>(model: &DistributionModel, n: usize, b: usize, key: StreamKey, fanout: &P, stat: S) -> Result<Vec<f64>>
where
    P: Fanout,
    S: Fn(&EmpiricalCdf) -> Result<f64> + Sync + Send,
{
    model.validate()?;
    check_bootstrap(b)?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    fanout
        .map_indexed(b, |i| {
            let xs = sample_stream(model, key.child(i as u64), n)?;
            stat(&EmpiricalCdf::new(xs)?)
        })
        .into_iter()
        .collect()
}

/// `B` null replicates of `d(F_hat*, F)` for samples of size `n` drawn from
/// the model; replicate `b` uses the substream `key.child(b)`.
pub fn bootstrap_null<P: Fanout>(
    model: &DistributionModel,
    n: usize,
    cfg: &WeightConfig,
    b: usize,
    key: StreamKey,
    refinement: usize,
    fanout: &P,
) -> Result<Vec<f64>> {
    bootstrap_with(model, n, b, key, fanout, |e| Ok(weighted_distance_to_model(e, model, cfg, refinement)?.value))
}

/// Null replicates of the grid-robust statistic.
pub fn bootstrap_null_robust<P: Fanout>(
    model: &DistributionModel,
    n: usize,
    exhaustion: &ExhaustionSpec,
    qs: &[f64],
    b: usize,
    key: StreamKey,
    refinement: usize,
    fanout: &P,
) -> Result<Vec<f64>> {
    check_q_grid(qs)?;
    bootstrap_with(model, n, b, key, fanout, |e| Ok(grid_robust_distance(e, model, exhaustion, qs, refinement)?.d_rob))
}

/// `(1/B) #{b : d*_b >= observed}`.
pub fn p_value(observed: f64, null: &[f64]) -> Result<f64> {
    if null.is_empty() {
        return Err(Error::EmptySample);
    }
    let hits = null.iter().filter(|&&d| d >= observed).count();
    Ok(hits as f64 / null.len() as f64)
}

/// Empirical `(1 - alpha)` quantile: the `ceil((1 - alpha) B)`-th order
/// statistic, so `alpha = 0` gives the maximum.
pub fn critical_value(null: &[f64], alpha: f64) -> Result<f64> {
    if null.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", "must lie in [0, 1)"));
    }
    let mut sorted = null.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let b = sorted.len();
    let rank = ceil((1.0 - alpha) * b as f64 - 1e-9) as usize;
    Ok(sorted[rank.clamp(1, b) - 1])
}

/// Summary of a bootstrap gate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapOutcome {
    pub observed: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub b: usize,
    pub seed: u64,
}

impl BootstrapOutcome {
    pub fn from_null(observed: f64, null: &[f64], alpha: f64, seed: u64) -> Result<Self> {
        Ok(BootstrapOutcome {
            observed,
            critical_value: critical_value(null, alpha)?,
            p_value: p_value(observed, null)?,
            alpha,
            b: null.len(),
            seed,
        })
    }

    pub fn passes(&self) -> bool {
        self.observed <= self.critical_value
    }
}

/// Kupiec proportion-of-failures test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KupiecResult {
    pub exceptions: u64,
    pub n: u64,
    pub p: f64,
    pub lr: f64,
    pub p_value: f64,
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * log(y)
    }
}

/// Likelihood ratio of the observed exception rate `x/n` against the nominal
/// `p`, with `0 ln 0 = 0`, and its chi-square(1) p-value.
pub fn kupiec_pof(x: u64, n: u64, p: f64) -> Result<KupiecResult> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if x > n {
        return Err(Error::invalid("exceptions", "cannot exceed n"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let (xf, nf) = (x as f64, n as f64);
    let phat = xf / nf;
    let null = xlny(nf - xf, 1.0 - p) + xlny(xf, p);
    let alt = xlny(nf - xf, 1.0 - phat) + xlny(xf, phat);
    let lr = (2.0 * (alt - null)).max(0.0);
    Ok(KupiecResult { exceptions: x, n, p, lr, p_value: chi2_1_sf(lr) })
}

fn check_q_grid(qs: &[f64]) -> Result<()> {
    if qs.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if qs.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
        return Err(Error::invalid("Q", "values must be nonnegative and finite"));
    }
    if qs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("Q", "values must be strictly increasing"));
    }
    Ok(())
}

/// Worst case of the weighted distance over a grid of `q`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridRobustResult {
    pub d_rob: f64,
    pub per_q: Vec<(f64, f64)>,
    pub argmax_q: f64,
}

/// `max_{q in Q} d_q`. Weights shrink with `q`, so the maximum sits at the
/// smallest `q`; ties resolve to it as well.
pub fn grid_robust_distance(
    sample: &EmpiricalCdf,
    model: &DistributionModel,
    exhaustion: &ExhaustionSpec,
    qs: &[f64],
    refinement: usize,
) -> Result<GridRobustResult> {
    check_q_grid(qs)?;
    let values = weighted_distance_grid(sample, model, exhaustion, qs, refinement)?;
    let per_q: Vec<(f64, f64)> = qs.iter().zip(&values).map(|(&q, r)| (q, r.value)).collect();
    let (argmax_q, d_rob) = per_q.iter().fold((qs[0], f64::NEG_INFINITY), |acc, &(q, v)| if v > acc.1 { (q, v) } else { acc });
    debug_assert_eq!(argmax_q, qs[0]);
    Ok(GridRobustResult { d_rob, per_q, argmax_q })
}

/// How the core statistic is gated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum CoreGate {
    /// Pass when `d_rob <= eps`.
    Fixed { eps: f64 },
    /// Pass when `d_rob` does not exceed the bootstrap `(1 - alpha)` critical
    /// value of `d_rob` under the model.
    Bootstrap { alpha: f64 },
}

/// VaR exception backtest settings: exceptions are returns below the
/// model's `var_level` quantile; the test passes when the Kupiec p-value is
/// at least `test_level`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TailPolicy {
    pub var_level: f64,
    pub test_level: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationPolicy {
    pub core: CoreGate,
    pub tail: TailPolicy,
    pub q_grid: Vec<f64>,
    pub exhaustion: ExhaustionSpec,
    pub bootstrap: usize,
    pub refinement: usize,
    pub seed: u64,
}

impl ValidationPolicy {
    pub fn validate(&self) -> Result<()> {
        check_q_grid(&self.q_grid)?;
        if self.q_grid[0] <= 0.0 {
            return Err(Error::invalid("Q", "values must be positive"));
        }
        match self.core {
            CoreGate::Fixed { eps } if !(eps > 0.0 && eps.is_finite()) => {
                return Err(Error::invalid("eps_core", "must be positive and finite"));
            }
            CoreGate::Bootstrap { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                return Err(Error::invalid("alpha_core", "must lie in (0, 1)"));
            }
            _ => {}
        }
        if !(self.tail.var_level > 0.0 && self.tail.var_level < 1.0) {
            return Err(Error::invalid("var_level", "must lie in (0, 1)"));
        }
        if !(self.tail.test_level > 0.0 && self.tail.test_level < 1.0) {
            return Err(Error::invalid("test_level", "must lie in (0, 1)"));
        }
        check_bootstrap(self.bootstrap)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationVerdict {
    pub core_pass: bool,
    pub tail_pass: bool,
    pub accept: bool,
    pub grid: GridRobustResult,
    pub core_threshold: f64,
    pub bootstrap: Option<BootstrapOutcome>,
    pub var: f64,
    pub kupiec: KupiecResult,
}

impl ValidationVerdict {
    /// Assembles a verdict; `accept` is the conjunction of the two gates.
    pub fn new(
        core_pass: bool,
        tail_pass: bool,
        grid: GridRobustResult,
        core_threshold: f64,
        bootstrap: Option<BootstrapOutcome>,
        var: f64,
        kupiec: KupiecResult,
    ) -> Self {
        ValidationVerdict { core_pass, tail_pass, accept: core_pass && tail_pass, grid, core_threshold, bootstrap, var, kupiec }
    }
}

/// Null distribution of `d_rob` for the policy's bootstrap gate, drawn from
/// the substreams `seed -> "bootstrap" -> b`.
pub fn policy_null<P: Fanout>(model: &DistributionModel, n: usize, policy: &ValidationPolicy, fanout: &P) -> Result<Vec<f64>> {
    policy.validate()?;
    let key = StreamKey::new(policy.seed).child_label("bootstrap");
    bootstrap_null_robust(model, n, &policy.exhaustion, &policy.q_grid, policy.bootstrap, key, policy.refinement, fanout)
}

/// Core gate on `d_rob`, then the VaR backtest; both are always evaluated.
pub fn hybrid_validate<P: Fanout>(
    returns: &[f64],
    model: &DistributionModel,
    policy: &ValidationPolicy,
    fanout: &P,
) -> Result<ValidationVerdict> {
    if returns.is_empty() {
        return Err(Error::EmptySample);
    }
    let null = match policy.core {
        CoreGate::Bootstrap { .. } => Some(policy_null(model, returns.len(), policy, fanout)?),
        CoreGate::Fixed { .. } => None,
    };
    hybrid_validate_with_null(returns, model, policy, null.as_deref())
}

/// As [`hybrid_validate`] with a precomputed null distribution of `d_rob`
/// (for example from a cache). It is required for the bootstrap gate and
/// ignored otherwise.
pub fn hybrid_validate_with_null(
    returns: &[f64],
    model: &DistributionModel,
    policy: &ValidationPolicy,
    null: Option<&[f64]>,
) -> Result<ValidationVerdict> {
    policy.validate()?;
    model.validate()?;
    let ecdf = EmpiricalCdf::from_slice(returns)?;
    let grid = grid_robust_distance(&ecdf, model, &policy.exhaustion, &policy.q_grid, policy.refinement)?;

    let (core_pass, core_threshold, bootstrap) = match policy.core {
        CoreGate::Fixed { eps } => (grid.d_rob <= eps, eps, None),
        CoreGate::Bootstrap { alpha } => {
            let null = null.ok_or(Error::invalid("null", "the bootstrap gate needs a null distribution"))?;
            check_bootstrap(null.len())?;
            let outcome = BootstrapOutcome::from_null(grid.d_rob, null, alpha, policy.seed)?;
            (outcome.passes(), outcome.critical_value, Some(outcome))
        }
    };

    let var = model.quantile(policy.tail.var_level)?;
    let exceptions = returns.iter().filter(|&&r| r < var).count() as u64;
    let kupiec = kupiec_pof(exceptions, returns.len() as u64, policy.tail.var_level)?;
    let tail_pass = kupiec.p_value >= policy.tail.test_level;

    Ok(ValidationVerdict::new(core_pass, tail_pass, grid, core_threshold, bootstrap, var, kupiec))
}
