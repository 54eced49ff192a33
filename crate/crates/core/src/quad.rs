//! Adaptive Gauss-Kronrod (G10/K21) quadrature with global error control.
//!
//! Semi-infinite ranges are handled by the substitution
//! `x = a + L (e^s - 1)`, which turns a power-law tail `x^(-1-eta)` into the
//! exponential `e^(-eta s)`. The transformed integral is taken over
//! `s in [0, S_MAX]` and the remainder beyond `S_MAX` is closed analytically
//! from the local exponential decay rate. Integrands are supplied in log
//! form `(sign, ln|f|)` so that huge `x` never overflows.

use alloc::vec::Vec;
use libm::{exp, fabs, log};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_373_253_809,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: 1e-10, abs_tol: 1e-300, max_intervals: 4000 }
    }
}

/// Result of an integration: estimate and an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// Estimate of the integral of `|f|`.
    pub magnitude: f64,
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[10];
    let mut resabs = fabs(fc) * WGK[10];
    let mut gauss = 0.0;
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(10).enumerate() {
        let dx = half * x;
        let (f1, f2) = (f(centre - dx), f(centre + dx));
        let pair = f1 + f2;
        kronrod += wk * pair;
        resabs += wk * (fabs(f1) + fabs(f2));
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = fabs((kronrod - gauss) * half);
    (value, error, resabs * fabs(half))
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    magnitude: f64,
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_pieces(&f, &[a, b], opts)
}

/// Integrates over consecutive intervals given by sorted breakpoints, with a
/// single global error budget.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult> {
    let mut pieces: Vec<Piece> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (value, error, magnitude) = gk21(f, w[0], w[1]);
            Piece { a: w[0], b: w[1], value, error, magnitude }
        })
        .collect();
    if pieces.is_empty() {
        return Ok(QuadResult { value: 0.0, error: 0.0, magnitude: 0.0 });
    }
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        let magnitude: f64 = pieces.iter().map(|p| p.magnitude).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::QuadratureFailed { estimate: total, error: err });
        }
        // cancellation limits attainable accuracy to a few ulps of int |f|
        let tol = opts.abs_tol.max(opts.rel_tol * fabs(total)).max(ROUNDOFF * magnitude);
        if err <= tol {
            return Ok(QuadResult { value: total, error: err, magnitude });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailed { estimate: total, error: err });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let Piece { a, b, .. } = pieces.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) {
            // interval collapsed to adjacent floats; accept what we have
            let total: f64 = pieces.iter().map(|p| p.value).sum::<f64>();
            return Err(Error::QuadratureFailed { estimate: total, error: err });
        }
        let (v1, e1, m1) = gk21(f, a, mid);
        let (v2, e2, m2) = gk21(f, mid, b);
        pieces.push(Piece { a, b: mid, value: v1, error: e1, magnitude: m1 });
        pieces.push(Piece { a: mid, b, value: v2, error: e2, magnitude: m2 });
    }
}

/// Integrand in log form: returns `(sign, ln|f(x)|)`; a zero value is
/// signalled by `ln|f| = -inf`.
pub trait LogIntegrand: Fn(f64) -> (f64, f64) {}
impl<T: Fn(f64) -> (f64, f64)> LogIntegrand for T {}

const S_MAX: f64 = 650.0;
const ROUNDOFF: f64 = 50.0 * f64::EPSILON;
const S_BREAKS: [f64; 6] = [1.0, 4.0, 16.0, 64.0, 200.0, S_MAX];

/// Integrates a log-form integrand over `x = x0 + dir * scale * (e^s - 1)`
/// for `s` in `[0, s_end]`, or `[0, inf)` when `s_end` is `None`.
fn exp_map<F: LogIntegrand>(f: &F, x0: f64, dir: f64, scale: f64, s_end: Option<f64>, opts: QuadOptions) -> Result<QuadResult> {
    let ln_scale = log(scale);
    let ln_g = |s: f64| -> (f64, f64) {
        let x = x0 + dir * scale * libm::expm1(s);
        let (sign, lv) = f(x);
        (sign, lv + ln_scale + s)
    };
    let g = |s: f64| {
        let (sign, lv) = ln_g(s);
        if lv == f64::NEG_INFINITY {
            0.0
        } else {
            sign * exp(lv)
        }
    };
    let top = s_end.unwrap_or(S_MAX).min(S_MAX);
    let mut breaks: Vec<f64> = alloc::vec![0.0];
    breaks.extend(S_BREAKS.iter().copied().filter(|&s| s < top));
    breaks.push(top);
    let body = integrate_pieces(&g, &breaks, opts)?;
    if s_end.is_some_and(|e| e <= S_MAX) {
        return Ok(body);
    }

    // Beyond S_MAX the integrand decays like e^(-rate s); close it exactly.
    let (sign_hi, l_hi) = ln_g(S_MAX);
    let (_, l_lo) = ln_g(S_MAX - 1.0);
    if l_hi == f64::NEG_INFINITY {
        return Ok(body);
    }
    let rate = l_lo - l_hi;
    if !(rate > 0.0) {
        return Err(Error::QuadratureFailed { estimate: f64::INFINITY, error: f64::INFINITY });
    }
    let tail = sign_hi * exp(l_hi) / rate;
    Ok(QuadResult { value: body.value + tail, error: body.error + fabs(tail) * 1e-3, magnitude: body.magnitude + fabs(tail) })
}

/// `int_a^inf f(x) dx` for a log-form integrand, using the exponential
/// substitution with length scale `scale`.
pub fn integrate_upper_tail<F: LogIntegrand>(f: F, a: f64, scale: f64, opts: QuadOptions) -> Result<QuadResult> {
    exp_map(&f, a, 1.0, scale, None, opts)
}

/// `int_{-inf}^b f(x) dx`.
pub fn integrate_lower_tail<F: LogIntegrand>(f: F, b: f64, scale: f64, opts: QuadOptions) -> Result<QuadResult> {
    exp_map(&f, b, -1.0, scale, None, opts)
}

/// `int_a^b f(x) dx` for a log-form integrand, where `a` and `b` may be
/// infinite. Inside `body` plain adaptive quadrature is used, split at the
/// given breakpoints; outside it the exponential substitution with length
/// `scale` takes over.
pub fn integrate_log<F: LogIntegrand>(
    f: &F,
    a: f64,
    b: f64,
    body: (f64, f64),
    breaks: &[f64],
    scale: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    if !(b > a) {
        return Ok(QuadResult { value: 0.0, error: 0.0, magnitude: 0.0 });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("scale", "must be positive and finite"));
    }
    let span = |x0: f64, end: f64| -> Option<f64> {
        if end.is_infinite() {
            None
        } else {
            Some(libm::log1p(fabs(end - x0) / scale))
        }
    };
    if a >= body.1 {
        return exp_map(f, a, 1.0, scale, span(a, b), opts);
    }
    if b <= body.0 {
        return exp_map(f, b, -1.0, scale, span(b, a), opts);
    }
    let u = body.0.max(a);
    let v = body.1.min(b);
    let plain = |x: f64| {
        let (sign, lv) = f(x);
        if lv == f64::NEG_INFINITY {
            0.0
        } else {
            sign * exp(lv)
        }
    };
    let mut pts: Vec<f64> = alloc::vec![u];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > u && x < v).collect();
    inner.sort_by(|p, q| p.total_cmp(q));
    inner.dedup();
    pts.extend(inner);
    pts.push(v);
    let mut total = integrate_pieces(&plain, &pts, opts)?;
    // tails only need accuracy relative to the whole integral
    let tail_opts = QuadOptions { abs_tol: opts.abs_tol.max(0.1 * opts.rel_tol * total.magnitude), ..opts };
    let mut add = |r: QuadResult| {
        total.value += r.value;
        total.error += r.error;
        total.magnitude += r.magnitude;
    };
    if a < u {
        add(exp_map(f, u, -1.0, scale, span(u, a), tail_opts)?);
    }
    if b > v {
        add(exp_map(f, v, 1.0, scale, span(v, b), tail_opts)?);
    }
    Ok(total)
}
