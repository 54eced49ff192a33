//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use wkm_core::distributions::sample;
use wkm_core::experiments::{run_convergence, run_tailscan, scenario_slope, MetricKind};
use wkm_core::metric::{weighted_distance_to_model, weighted_distance_two_sample};
use wkm_core::rng::StreamKey;
use wkm_core::theory::{linear_fit, select_rate_parameters, LinearFit};
use wkm_core::validation::{bootstrap_null, critical_value, grid_robust_distance, hybrid_validate_with_null, p_value, policy_null};
use wkm_core::{CoreGate, DistributionModel, EmpiricalCdf, Error as CoreError, MomentSummary, RatePlan, TailIndexInfo};

use crate::cache::{cache_key, BootstrapCache};
use crate::config::{load, load_model, ExhaustionDto, PolicyDto, ScenarioDto, TailscanDto};
use crate::io::{emit_json, read_column, write_column, write_convergence, write_tailscan};
use crate::parallel::RayonFanout;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "wkm", version, about = "Weighted Kolmogorov distances and model validation for heavy-tailed returns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV file of observations
    #[arg(long)]
    pub data: PathBuf,
    /// Column name (requires a header row); defaults to the first column
    #[arg(long)]
    pub column: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw an i.i.d. sample from a model
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted distance between data and a model
    Metric {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        /// Exhaustion JSON with `q`
        #[arg(long)]
        weight: PathBuf,
        #[arg(long, default_value_t = 8)]
        refinement: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact weighted distance between two samples
    TwoSample {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        column: Option<String>,
        #[arg(long)]
        weight: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Moments, tail constants and the (beta, q) rate plan
    Params {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        /// Requested weight exponent
        #[arg(long)]
        q: Option<f64>,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
    /// Truncated moments and bound terms along an R grid
    Tailscan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parametric bootstrap of the weighted distance under the model
    Bootstrap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        weight: PathBuf,
        #[arg(long = "replicates", short = 'B', default_value_t = 500)]
        replicates: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Observed distance for a p-value
        #[arg(long)]
        observed: Option<f64>,
        #[arg(long, default_value_t = 8)]
        refinement: usize,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// CSV of the null replicates (`b,value`)
        #[arg(long)]
        out: PathBuf,
    },
    /// Hybrid core/tail validation; exit 0 accept, 1 reject
    Validate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Grid-robust distance against one or more models
    Grid {
        #[command(flatten)]
        data: DataArgs,
        /// Model JSON; repeat for several models
        #[arg(long, required = true)]
        model: Vec<PathBuf>,
        /// Exhaustion JSON without `q`; defaults to h(t) = |t|
        #[arg(long)]
        exhaustion: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5")]
        q_grid: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        refinement: usize,
        /// Threshold reported as pass/fail per model
        #[arg(long)]
        eps: Option<f64>,
        /// CSV of per-q values
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo convergence of normalized sums
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// JSON of fitted log-log slopes
        #[arg(long)]
        slopes: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

/// Quadrature and degenerate-truncation failures are numerical; everything
/// else is a usage or input problem.
pub fn exit_code_for(e: &anyhow::Error) -> i32 {
    match e.chain().find_map(|c| c.downcast_ref::<CoreError>()) {
        Some(CoreError::QuadratureFailed { .. } | CoreError::DegenerateTruncation) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

#[derive(Serialize)]
struct DistanceRecord {
    value: f64,
    argmax_t: f64,
    error_bound: f64,
    q: f64,
    exhaustion: ExhaustionDto,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
}

fn weight_dto(path: &Path) -> Result<ExhaustionDto> {
    load(path)
}

fn ecdf(values: Vec<f64>) -> Result<EmpiricalCdf> {
    Ok(EmpiricalCdf::new(values)?)
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Sample { model, n, seed, out } => {
            let m = load_model(&model)?;
            write_column(&out, "value", &sample(&m, seed, n)?)?;
        }
        Command::Metric { data, model, weight, refinement, out } => {
            let m = load_model(&model)?;
            let dto = weight_dto(&weight)?;
            let cfg = dto.weight(&m)?;
            let e = ecdf(read_column(&data.data, data.column.as_deref())?)?;
            let r = weighted_distance_to_model(&e, &m, &cfg, refinement)?;
            let exhaustion = ExhaustionDto { q: None, ..dto };
            let rec = DistanceRecord {
                value: r.value,
                argmax_t: r.argmax_t,
                error_bound: r.refinement_error_bound,
                q: cfg.q,
                exhaustion,
                n: e.len(),
                m: None,
            };
            emit_json(&rec, out.as_deref())?;
        }
        Command::TwoSample { a, b, column, weight, out } => {
            let dto = weight_dto(&weight)?;
            let cfg = wkm_core::WeightConfig::new(dto.exhaustion_for(None)?, dto.q_or(None)?)?;
            let ea = ecdf(read_column(&a, column.as_deref())?)?;
            let eb = ecdf(read_column(&b, column.as_deref())?)?;
            let r = weighted_distance_two_sample(&ea, &eb, &cfg);
            let rec = DistanceRecord {
                value: r.value,
                argmax_t: r.argmax_t,
                error_bound: r.refinement_error_bound,
                q: cfg.q,
                exhaustion: ExhaustionDto { q: None, ..dto },
                n: ea.len(),
                m: Some(eb.len()),
            };
            emit_json(&rec, out.as_deref())?;
        }
        Command::Params { model, delta, q, json } => params(&load_model(&model)?, delta, q, json)?,
        Command::Tailscan { config, out } => {
            let dto: TailscanDto = load(&config)?;
            dto.model.validate()?;
            let exhaustion = dto.exhaustion.exhaustion(&dto.model)?;
            let delta = dto.delta.unwrap_or_else(|| dto.model.default_delta());
            let q = dto.exhaustion.q_or(Some(1.0))?;
            let grid = dto.r_grid.values()?;
            let rows = run_tailscan(&dto.model, &exhaustion, delta, &grid, dto.n_ref, q, &dto.constants)?;
            write_tailscan(&out, &rows, dto.n_ref)?;
            let (x, y): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.tail_remainder > 0.0).map(|r| (r.r.ln(), r.tail_remainder.ln())).unzip();
            let fit = if x.len() >= 3 { Some(linear_fit(&x, &y)?) } else { None };
            emit_json(&TailscanSummary { delta, q, rows: rows.len(), remainder_fit: fit }, None)?;
        }
        Command::Bootstrap { model, n, weight, replicates, seed, alpha, observed, refinement, threads, cache_dir, out } => {
            let m = load_model(&model)?;
            let dto = weight_dto(&weight)?;
            let cfg = dto.weight(&m)?;
            let fanout = RayonFanout::new(threads)?;
            let compute = || -> Result<Vec<f64>> {
                let key = StreamKey::new(seed).child_label("bootstrap");
                Ok(bootstrap_null(&m, n, &cfg, replicates, key, refinement, &fanout)?)
            };
            let null = match cache_dir {
                Some(dir) => {
                    let material = ("d", &m, n, &dto, replicates, seed, refinement);
                    BootstrapCache::new(dir)?.get_or_compute(&cache_key(&material)?, compute)?
                }
                None => compute()?,
            };
            write_column_indexed(&out, &null)?;
            let summary = BootstrapSummary {
                b: null.len(),
                seed,
                alpha,
                critical_value: critical_value(&null, alpha)?,
                observed,
                p_value: observed.map(|o| p_value(o, &null)).transpose()?,
            };
            emit_json(&summary, None)?;
        }
        Command::Validate { data, model, policy, seed, threads, cache_dir } => {
            let m = load_model(&model)?;
            let dto: PolicyDto = load(&policy)?;
            let pol = dto.policy(&m, seed)?;
            let returns = read_column(&data.data, data.column.as_deref())?;
            let null = match pol.core {
                CoreGate::Bootstrap { .. } => {
                    let fanout = RayonFanout::new(threads)?;
                    let compute = || -> Result<Vec<f64>> { Ok(policy_null(&m, returns.len(), &pol, &fanout)?) };
                    Some(match cache_dir {
                        Some(dir) => {
                            let material =
                                ("d_rob", &m, returns.len(), &dto.exhaustion, &pol.q_grid, pol.bootstrap, seed, pol.refinement);
                            BootstrapCache::new(dir)?.get_or_compute(&cache_key(&material)?, compute)?
                        }
                        None => compute()?,
                    })
                }
                CoreGate::Fixed { .. } => None,
            };
            let verdict = hybrid_validate_with_null(&returns, &m, &pol, null.as_deref())?;
            emit_json(&verdict, None)?;
            return Ok(if verdict.accept { EXIT_OK } else { EXIT_REJECT });
        }
        Command::Grid { data, model, exhaustion, q_grid, refinement, eps, out } => {
            let e = ecdf(read_column(&data.data, data.column.as_deref())?)?;
            let dto: ExhaustionDto = match &exhaustion {
                Some(p) => load(p)?,
                None => ExhaustionDto::default(),
            };
            if dto.q.is_some() {
                anyhow::bail!("grid exhaustion takes no `q`; use --q-grid");
            }
            let mut entries = Vec::with_capacity(model.len());
            for path in &model {
                let m = load_model(path)?;
                let g = grid_robust_distance(&e, &m, &dto.exhaustion(&m)?, &q_grid, refinement)?;
                let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                entries.push(GridEntry { model: label, family: m.family(), pass: eps.map(|x| g.d_rob <= x), grid: g });
            }
            if let Some(out) = out {
                write_grid(&out, &entries)?;
            }
            emit_json(&GridSummary { n: e.len(), eps, models: entries }, None)?;
        }
        Command::Convergence { config, out, seed, threads, slopes } => {
            let dto: ScenarioDto = load(&config)?;
            let cfg = dto.scenario(seed)?;
            let fanout = RayonFanout::new(threads)?;
            let rows = run_convergence(&cfg, &fanout)?;
            write_convergence(&out, &rows)?;
            if let Some(path) = slopes {
                let fit = |metric| match scenario_slope(&rows, metric, 2.0) {
                    Ok((fit, n_used)) => SlopeEntry { fit: Some(fit), n_used, reason: None },
                    Err(e) => SlopeEntry { fit: None, n_used: vec![], reason: Some(e.to_string()) },
                };
                let s = SlopeSummary {
                    scenario: cfg.id.clone(),
                    floor_factor: 2.0,
                    weighted: fit(MetricKind::Weighted),
                    ks: fit(MetricKind::Ks),
                };
                emit_json(&s, Some(&path))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn write_column_indexed(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["b", "value"])?;
    for (b, v) in values.iter().enumerate() {
        w.write_record([b.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_grid(path: &Path, entries: &[GridEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["model", "family", "q", "value", "d_rob", "argmax_q"])?;
    for e in entries {
        for (q, v) in &e.grid.per_q {
            w.write_record([
                e.model.clone(),
                e.family.to_string(),
                q.to_string(),
                v.to_string(),
                e.grid.d_rob.to_string(),
                e.grid.argmax_q.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TailscanSummary {
    delta: f64,
    q: f64,
    rows: usize,
    remainder_fit: Option<LinearFit>,
}

#[derive(Serialize)]
struct BootstrapSummary {
    b: usize,
    seed: u64,
    alpha: f64,
    critical_value: f64,
    observed: Option<f64>,
    p_value: Option<f64>,
}

#[derive(Serialize)]
struct GridEntry {
    model: String,
    family: &'static str,
    pass: Option<bool>,
    #[serde(flatten)]
    grid: wkm_core::GridRobustResult,
}

#[derive(Serialize)]
struct GridSummary {
    n: usize,
    eps: Option<f64>,
    models: Vec<GridEntry>,
}

#[derive(Serialize)]
struct SlopeEntry {
    fit: Option<LinearFit>,
    n_used: Vec<usize>,
    reason: Option<String>,
}

#[derive(Serialize)]
struct SlopeSummary {
    scenario: String,
    floor_factor: f64,
    weighted: SlopeEntry,
    ks: SlopeEntry,
}

#[derive(Serialize)]
struct ParamsReport {
    family: &'static str,
    delta: f64,
    moments: MomentSummary,
    tail: Option<TailIndexInfo>,
    plan: Option<RatePlan>,
    note: Option<String>,
}

fn params(model: &DistributionModel, delta: Option<f64>, q: Option<f64>, json: bool) -> Result<()> {
    let delta = delta.unwrap_or_else(|| model.default_delta());
    let moments = model.analytic_moments(delta)?;
    let tail = model.tail_index_info(delta)?;
    let (tail, plan, note) = if tail.eta.is_finite() {
        match select_rate_parameters(tail.eta, delta, q) {
            Ok(p) => (Some(tail), Some(p), None),
            Err(e @ CoreError::NoRateGuarantee(_)) => (Some(tail), None, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        }
    } else {
        (None, None, Some("tails decay faster than any power; no truncation schedule is needed".to_string()))
    };
    let report = ParamsReport { family: model.family(), delta, moments, tail, plan, note };
    if json {
        return emit_json(&report, None);
    }
    println!("family              {}", report.family);
    println!("delta               {}", delta);
    println!("mean                {}", moments.mu);
    println!("variance            {}", moments.sigma2);
    println!("E|X-mu|^(2+delta)   {}", moments.abs_moment_2_delta);
    if let Some(t) = tail {
        println!("tail index          {}", t.alpha);
        println!("eta                 {}", t.eta);
        println!("K                   {}", t.k);
    }
    if let Some(p) = plan {
        println!();
        println!("beta (balanced)     {}", p.beta_balanced);
        println!("beta (recommended)  {}", p.beta);
        println!("q                   {}", p.q);
        println!("feasible            {}", p.feasible);
        println!("achieved exponent   {}", p.achieved_exponent);
        println!();
        let b = p.beta_balanced;
        println!("{:<16} {:>12} {:>10} {:>4}", "condition", "value", "required", "ok");
        let rows = [
            ("beta*(1-delta)", b * (1.0 - delta), "<= 0.5", p.core_ok),
            ("beta*eta", b * p.eta, ">= 0.5", p.tail_ok),
            ("beta*q", b * p.q, ">= 0.5", p.weight_ok),
        ];
        for (name, v, req, ok) in rows {
            println!("{:<16} {:>12.6} {:>10} {:>4}", name, v, req, if ok { "yes" } else { "no" });
        }
    }
    if let Some(n) = report.note {
        println!("note                {n}");
    }
    Ok(())
}
