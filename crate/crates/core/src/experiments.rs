//! Monte Carlo convergence scenarios and truncation scans.
//!
//! The law of `Z_n` is represented by the empirical CDF of `M` independent
//! normalized sums, and its distance to the standard normal is averaged over
//! repetitions. Both metrics are evaluated on the same draws. The same
//! estimator applied to exact normal draws gives the Monte Carlo floor.

use alloc::string::String;
use alloc::vec::Vec;

use libm::{log, sqrt};

use crate::distributions::{sample_stream, DistributionModel, Sampler};
use crate::error::{Error, Result};
use crate::exhaustion::{ExhaustionSpec, WeightConfig};
use crate::fanout::Fanout;
use crate::metric::{simulate_normalized_sums_with, weighted_distance_to_model, EmpiricalCdf};
use crate::rng::StreamKey;
use crate::theory::{evaluate_tradeoff_bound, linear_fit, truncation_analysis, BoundConstants, BoundTerms, LinearFit};

/// Column order of convergence tables.
pub const CONVERGENCE_HEADER: [&str; 8] = ["scenario", "metric", "n", "mean", "stderr", "M", "seed", "floor"];

pub const DEFAULT_N_GRID: [usize; 8] = [250, 500, 1000, 2000, 4000, 8000, 16000, 32000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MetricKind {
    Weighted,
    Ks,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Weighted => "weighted",
            MetricKind::Ks => "ks",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub id: String,
    pub model: DistributionModel,
    pub exhaustion: ExhaustionSpec,
    pub q: f64,
    /// Interior points per inter-jump interval for the weighted metric.
    pub refinement: usize,
    pub n_grid: Vec<usize>,
    /// Normalized sums per empirical law.
    pub m: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Also emit floor rows computed from exact normal draws.
    pub floor: bool,
    /// Upper limit on `n * M` summand draws for one empirical law.
    pub max_draws: u64,
}

impl ScenarioConfig {
    pub fn new(id: impl Into<String>, model: DistributionModel, q: f64, seed: u64) -> Self {
        ScenarioConfig {
            id: id.into(),
            model,
            exhaustion: ExhaustionSpec::Absolute,
            q,
            refinement: 8,
            n_grid: DEFAULT_N_GRID.to_vec(),
            m: 160,
            repetitions: 8,
            seed,
            floor: true,
            max_draws: 1_000_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.id.is_empty() || self.id.contains([',', '"', '\n', '\r']) {
            return Err(Error::invalid("id", "must be nonempty and free of CSV delimiters"));
        }
        WeightConfig::new(self.exhaustion.clone(), self.q)?;
        if self.n_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("n_grid", "must be positive and strictly increasing"));
        }
        if self.m < 2 {
            return Err(Error::invalid("M", "must be at least 2"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be at least 1"));
        }
        for &n in &self.n_grid {
            let required = (n as u64).saturating_mul(self.m as u64);
            if required > self.max_draws {
                return Err(Error::BudgetExceeded { required, limit: self.max_draws });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceRow {
    pub scenario: String,
    pub metric: MetricKind,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub m: usize,
    pub seed: u64,
    pub floor: bool,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, sqrt(var / k))
}

struct Pair {
    weighted: f64,
    ks: f64,
}

fn distances(values: Vec<f64>, weighted: &WeightConfig, ks: &WeightConfig, refinement: usize) -> Result<Pair> {
    let target = DistributionModel::gaussian(0.0, 1.0)?;
    let e = EmpiricalCdf::new(values)?;
    Ok(Pair {
        weighted: weighted_distance_to_model(&e, &target, weighted, refinement)?.value,
        ks: weighted_distance_to_model(&e, &target, ks, 0)?.value,
    })
}

/// Rows ordered by `n`, then weighted before KS, then the scenario row
/// before its floor row.
pub fn run_convergence<P: Fanout>(cfg: &ScenarioConfig, fanout: &P) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let weighted = WeightConfig::new(cfg.exhaustion.clone(), cfg.q)?;
    let ks = WeightConfig::new(cfg.exhaustion.clone(), 0.0)?;
    let sampler = Sampler::new(cfg.model)?;
    let normal = DistributionModel::gaussian(0.0, 1.0)?;
    let root = StreamKey::new(cfg.seed).child_label(&cfg.id);
    let floor_root = root.child_label("floor");

    let mut rows = Vec::with_capacity(cfg.n_grid.len() * 4);
    for &n in &cfg.n_grid {
        let mut scen = Vec::with_capacity(cfg.repetitions);
        let mut flo = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions {
            let key = root.child(n as u64).child(rep as u64);
            let z = simulate_normalized_sums_with(&sampler, n, cfg.m, key, fanout)?;
            scen.push(distances(z.values, &weighted, &ks, cfg.refinement)?);
            if cfg.floor {
                let exact = sample_stream(&normal, floor_root.child(n as u64).child(rep as u64), cfg.m)?;
                flo.push(distances(exact, &weighted, &ks, cfg.refinement)?);
            }
        }
        for metric in [MetricKind::Weighted, MetricKind::Ks] {
            let pick = |p: &Pair| match metric {
                MetricKind::Weighted => p.weighted,
                MetricKind::Ks => p.ks,
            };
            let mut push = |set: &[Pair], floor: bool| {
                let v: Vec<f64> = set.iter().map(pick).collect();
                let (mean, stderr) = mean_stderr(&v);
                rows.push(ConvergenceRow { scenario: cfg.id.clone(), metric, n, mean, stderr, m: cfg.m, seed: cfg.seed, floor });
            };
            push(&scen, false);
            if cfg.floor {
                push(&flo, true);
            }
        }
    }
    Ok(rows)
}

/// OLS of `ln mean` on `ln n` over the rows with `n` in `n_range`
/// (inclusive).
pub fn loglog_slope(rows: &[ConvergenceRow], n_range: Option<(usize, usize)>) -> Result<LinearFit> {
    let (lo, hi) = n_range.unwrap_or((0, usize::MAX));
    let picked: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.n >= lo && r.n <= hi).collect();
    if picked.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: picked.len() });
    }
    if let Some(r) = picked.iter().find(|r| !(r.mean > 0.0 && r.mean.is_finite())) {
        return Err(Error::invalid("mean", if r.mean.is_finite() { "must be positive" } else { "must be finite" }));
    }
    let x: Vec<f64> = picked.iter().map(|r| log(r.n as f64)).collect();
    let y: Vec<f64> = picked.iter().map(|r| log(r.mean)).collect();
    linear_fit(&x, &y)
}

/// Slope of one metric over the `n` whose mean exceeds `floor_factor` times
/// the floor row at the same `n`. Rows without a floor row are kept.
pub fn scenario_slope(rows: &[ConvergenceRow], metric: MetricKind, floor_factor: f64) -> Result<(LinearFit, Vec<usize>)> {
    let kept: Vec<ConvergenceRow> = rows
        .iter()
        .filter(|r| r.metric == metric && !r.floor)
        .filter(|r| {
            rows.iter()
                .find(|f| f.floor && f.metric == metric && f.n == r.n && f.scenario == r.scenario)
                .is_none_or(|f| r.mean > floor_factor * f.mean)
        })
        .cloned()
        .collect();
    let ns = kept.iter().map(|r| r.n).collect();
    Ok((loglog_slope(&kept, None)?, ns))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailscanRow {
    pub r: f64,
    pub tail_remainder: f64,
    pub tail_probability: f64,
    pub m3: f64,
    pub tau_r2: f64,
    /// Absent when the core variance vanishes.
    pub bound: Option<BoundTerms>,
}

pub const TAILSCAN_HEADER: [&str; 10] =
    ["R", "tail_remainder", "tail_probability", "M3", "tau_R2", "core", "tail", "weight", "total", "n_ref"];

/// Truncation analysis along `r_grid`, with bound terms at `n_ref`.
pub fn run_tailscan(
    model: &DistributionModel,
    exhaustion: &ExhaustionSpec,
    delta: f64,
    r_grid: &[f64],
    n_ref: u64,
    q: f64,
    consts: &BoundConstants,
) -> Result<Vec<TailscanRow>> {
    if r_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("R_grid", "must be strictly increasing"));
    }
    r_grid
        .iter()
        .map(|&r| {
            let ta = truncation_analysis(model, exhaustion, r, delta)?;
            let bound = match evaluate_tradeoff_bound(&ta, n_ref, q, consts) {
                Ok(b) => Some(b),
                Err(Error::DegenerateTruncation) => None,
                Err(e) => return Err(e),
            };
            Ok(TailscanRow {
                r,
                tail_remainder: ta.tail_remainder,
                tail_probability: ta.tail_probability,
                m3: ta.m3,
                tau_r2: ta.tau_r2,
                bound,
            })
        })
        .collect()
}
