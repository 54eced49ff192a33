//! Exhaustion functions `h` and the weight `w_q(t) = (1 + h(t))^(-q)`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use libm::{exp, fabs, log1p, pow};

use crate::error::{Error, Result};

/// Number of log-spaced points used to check the comparability bounds of a
/// custom exhaustion on each side of the origin.
pub const VERIFY_POINTS: usize = 10_001;
/// Outer end of the comparability check.
pub const VERIFY_LIMIT: f64 = 1e6;
const CORE_POINTS: usize = 2_001;

/// Shape of a user-supplied exhaustion.
#[derive(Clone)]
pub enum CustomShape {
    /// Piecewise-linear through `(t, h)` knots with strictly increasing `t`,
    /// extended linearly beyond the first and last knot.
    Tabulated(Vec<(f64, f64)>),
    /// Closed-form callable.
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for CustomShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CustomShape::Tabulated(k) => f.debug_tuple("Tabulated").field(k).finish(),
            CustomShape::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// A verified custom exhaustion with its declared comparability constants.
#[derive(Debug, Clone)]
pub struct CustomExhaustion {
    shape: CustomShape,
    c1: f64,
    c2: f64,
    t0: f64,
    lipschitz: f64,
    core_max: f64,
}

impl CustomExhaustion {
    /// Builds a tabulated exhaustion. The Lipschitz constant is the largest
    /// knot slope.
    pub fn tabulated(knots: Vec<(f64, f64)>, c1: f64, c2: f64, t0: f64) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("knots", "at least two knots are required"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("knots", "abscissae must be strictly increasing"));
            }
        }
        if knots.iter().any(|&(t, h)| !t.is_finite() || !h.is_finite()) {
            return Err(Error::invalid("knots", "knots must be finite"));
        }
        let lipschitz = knots
            .windows(2)
            .map(|w| fabs((w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
            .fold(0.0, f64::max);
        Self::build(CustomShape::Tabulated(knots), c1, c2, t0, lipschitz)
    }

    /// Builds an exhaustion from a callable with a declared Lipschitz
    /// constant.
    pub fn function<F>(f: F, c1: f64, c2: f64, t0: f64, lipschitz: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::invalid("lipschitz", "must be finite and nonnegative"));
        }
        Self::build(CustomShape::Function(Arc::new(f)), c1, c2, t0, lipschitz)
    }

    fn build(shape: CustomShape, c1: f64, c2: f64, t0: f64, lipschitz: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::invalid("c1", "must be positive"));
        }
        if !(c2 >= c1 && c2.is_finite()) {
            return Err(Error::invalid("c2", "must be finite and at least c1"));
        }
        if !(t0 >= 0.0 && t0 < VERIFY_LIMIT) {
            return Err(Error::invalid("t0", "must lie in [0, 1e6)"));
        }
        let mut ex = CustomExhaustion { shape, c1, c2, t0, lipschitz, core_max: 0.0 };
        ex.core_max = ex.verify()?;
        Ok(ex)
    }

    /// Checks the comparability bounds and monotonicity in `|t|` beyond `t0`
    /// on a log grid, and finiteness and nonnegativity on `[-t0, t0]`.
    /// Returns the largest value seen on the core.
    fn verify(&self) -> Result<f64> {
        let start = self.t0.max(1e-3);
        let ratio = log1p(VERIFY_LIMIT / start - 1.0) / (VERIFY_POINTS - 1) as f64;
        for sign in [1.0, -1.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..VERIFY_POINTS {
                let r = start * exp(ratio * i as f64);
                let t = sign * r;
                let h = self.eval(t);
                let slack = 1e-12 * r;
                if !h.is_finite() || h < self.c1 * r - slack || h > self.c2 * r + slack || h < prev - slack {
                    return Err(Error::ExhaustionViolation { t, h });
                }
                prev = h;
            }
        }
        let mut core_max: f64 = 0.0;
        for i in 0..CORE_POINTS {
            let t = -self.t0 + 2.0 * self.t0 * i as f64 / (CORE_POINTS - 1) as f64;
            let h = self.eval(t);
            if !h.is_finite() || h < 0.0 {
                return Err(Error::ExhaustionViolation { t, h });
            }
            core_max = core_max.max(h);
        }
        Ok(core_max + 0.5 * self.lipschitz * 2.0 * self.t0 / (CORE_POINTS - 1) as f64)
    }

    fn eval(&self, t: f64) -> f64 {
        match &self.shape {
            CustomShape::Function(f) => f(t),
            CustomShape::Tabulated(k) => {
                let last = k.len() - 1;
                let seg = match k.iter().position(|&(x, _)| x > t) {
                    Some(0) => 0,
                    Some(j) => j - 1,
                    None => last - 1,
                };
                let (x0, h0) = k[seg];
                let (x1, h1) = k[seg + 1];
                h0 + (h1 - h0) * (t - x0) / (x1 - x0)
            }
        }
    }

    pub fn constants(&self) -> (f64, f64, f64) {
        (self.c1, self.c2, self.t0)
    }

    pub fn shape(&self) -> &CustomShape {
        &self.shape
    }
}

/// The exhaustion function `h`.
#[derive(Debug, Clone)]
pub enum ExhaustionSpec {
    /// `h(t) = |t|`.
    Absolute,
    /// `h(t) = |t - center|`.
    Centered { center: f64 },
    /// `h(t) = |t - v_alpha|` with `v_alpha` the model quantile at `alpha`,
    /// frozen at construction.
    VarCentered { alpha: f64, v_alpha: f64 },
    Custom(CustomExhaustion),
}

impl ExhaustionSpec {
    pub fn centered(center: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("center", "must be finite"));
        }
        Ok(ExhaustionSpec::Centered { center })
    }

    /// VaR-centered exhaustion; `v_alpha` must come from the calibrated
    /// model's quantile function.
    pub fn var_centered(alpha: f64, v_alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", "must lie in (0, 1)"));
        }
        if !v_alpha.is_finite() {
            return Err(Error::invalid("v_alpha", "must be finite"));
        }
        Ok(ExhaustionSpec::VarCentered { alpha, v_alpha })
    }

    fn center(&self) -> Option<f64> {
        match self {
            ExhaustionSpec::Absolute => Some(0.0),
            ExhaustionSpec::Centered { center } => Some(*center),
            ExhaustionSpec::VarCentered { v_alpha, .. } => Some(*v_alpha),
            ExhaustionSpec::Custom(_) => None,
        }
    }

    /// Evaluates `h(t)`.
    #[inline]
    pub fn h(&self, t: f64) -> f64 {
        match self {
            ExhaustionSpec::Custom(c) => c.eval(t),
            _ => fabs(t - self.center().unwrap_or(0.0)),
        }
    }

    /// Declared or derived `(c1, c2, t0)` with `c1 |t| <= h(t) <= c2 |t|`
    /// for `|t| >= t0`.
    pub fn comparability(&self) -> (f64, f64, f64) {
        match self {
            ExhaustionSpec::Custom(c) => c.constants(),
            _ => {
                let c = fabs(self.center().unwrap_or(0.0));
                if c == 0.0 {
                    (1.0, 1.0, 0.0)
                } else {
                    (0.5, 2.0, 2.0 * c)
                }
            }
        }
    }

    /// Lipschitz constant of `h`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            ExhaustionSpec::Custom(c) => c.lipschitz,
            _ => 1.0,
        }
    }

    /// An interval outside of which `h` is nondecreasing in the distance to
    /// it, so the weight is largest somewhere inside.
    pub fn peak_region(&self) -> (f64, f64) {
        match self {
            ExhaustionSpec::Custom(c) => (-c.t0, c.t0),
            _ => {
                let c = self.center().unwrap_or(0.0);
                (c, c)
            }
        }
    }

    /// Upper bound on `h` over `[lo, hi]`.
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            ExhaustionSpec::Custom(c) => {
                let mut m = self.h(lo).max(self.h(hi));
                if lo < c.t0 && hi > -c.t0 {
                    m = m.max(c.core_max);
                }
                m
            }
            _ => {
                let c = self.center().unwrap_or(0.0);
                fabs(lo - c).max(fabs(hi - c))
            }
        }
    }

    /// Lower bound on `h` over `[lo, hi]`.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            ExhaustionSpec::Custom(c) => {
                let mut m = self.h(lo).min(self.h(hi));
                let a = lo.max(-c.t0);
                let b = hi.min(c.t0);
                if a < b {
                    let steps = 64;
                    let dx = (b - a) / steps as f64;
                    for i in 0..=steps {
                        m = m.min(self.h(a + dx * i as f64));
                    }
                    m = (m - 0.5 * c.lipschitz * dx).max(0.0);
                }
                m
            }
            _ => {
                let c = self.center().unwrap_or(0.0);
                if lo <= c && c <= hi {
                    0.0
                } else {
                    fabs(lo - c).min(fabs(hi - c))
                }
            }
        }
    }

    /// The set `{t : h(t) <= r}` as disjoint sorted closed intervals.
    pub fn sublevel_intervals(&self, r: f64) -> Vec<(f64, f64)> {
        if r < 0.0 {
            return Vec::new();
        }
        match self {
            ExhaustionSpec::Custom(c) => c.sublevel(r),
            _ => {
                let c = self.center().unwrap_or(0.0);
                alloc::vec![(c - r, c + r)]
            }
        }
    }

    /// `max(h)` on `[-t0, t0]`, used by the window constant.
    fn core_max(&self) -> f64 {
        let (_, _, t0) = self.comparability();
        self.max_on(-t0, t0)
    }
}

impl CustomExhaustion {
    fn sublevel(&self, r: f64) -> Vec<(f64, f64)> {
        // Beyond t0, h is monotone in |t|: find the outer crossing on each
        // side by bisection. Inside, scan and bisect sign changes.
        let outer = |sign: f64| -> Option<f64> {
            let g = |u: f64| self.eval(sign * u) - r;
            if g(self.t0) > 0.0 {
                return None;
            }
            let mut lo = self.t0;
            let mut hi = (r / self.c1).max(self.t0) + 1.0;
            while g(hi) <= 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(sign * lo)
        };
        let right = outer(1.0);
        let left = outer(-1.0);

        let g = |t: f64| self.eval(t) - r;
        let bisect = |mut a: f64, mut b: f64| {
            let ga = g(a) <= 0.0;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (g(m) <= 0.0) == ga {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };

        let mut out = Vec::new();
        let mut open: Option<f64> = left;
        let n = CORE_POINTS;
        let step = 2.0 * self.t0 / (n - 1) as f64;
        let mut prev_t = -self.t0;
        let mut prev_in = g(prev_t) <= 0.0;
        if prev_in && open.is_none() {
            open = Some(prev_t);
        }
        if self.t0 > 0.0 {
            for i in 1..n {
                let t = -self.t0 + step * i as f64;
                let inside = g(t) <= 0.0;
                if inside != prev_in {
                    let x = bisect(prev_t, t);
                    if inside {
                        open = Some(x);
                    } else if let Some(a) = open.take() {
                        out.push((a, x));
                    }
                }
                prev_t = t;
                prev_in = inside;
            }
        }
        if let Some(a) = open {
            out.push((a, right.unwrap_or(self.t0)));
        }
        out
    }
}

/// An exhaustion paired with the weight exponent `q`.
#[derive(Debug, Clone)]
pub struct WeightConfig {
    pub exhaustion: ExhaustionSpec,
    pub q: f64,
}

impl WeightConfig {
    /// `q = 0` is allowed and gives the unweighted Kolmogorov distance.
    pub fn new(exhaustion: ExhaustionSpec, q: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::invalid("q", "must be finite and nonnegative"));
        }
        Ok(WeightConfig { exhaustion, q })
    }

    pub fn absolute(q: f64) -> Result<Self> {
        Self::new(ExhaustionSpec::Absolute, q)
    }

    /// Weight for a given value of `h`.
    #[inline]
    pub fn weight_of_h(&self, h: f64) -> f64 {
        if self.q == 0.0 {
            1.0
        } else {
            exp(-self.q * log1p(h))
        }
    }

    /// `w_q(t) = (1 + h(t))^(-q)`.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        self.weight_of_h(self.exhaustion.h(t))
    }

    /// Upper bound on the weight over `[lo, hi]`.
    pub fn weight_max_on(&self, lo: f64, hi: f64) -> f64 {
        self.weight_of_h(self.exhaustion.min_on(lo, hi))
    }

    /// Lipschitz constant of the weight, `q * Lip(h)`.
    pub fn weight_lipschitz(&self) -> f64 {
        self.q * self.exhaustion.lipschitz()
    }

    /// Lipschitz constant of the weight on `[lo, hi]`,
    /// `q Lip(h) (1 + min h)^(-q-1)`.
    pub fn weight_lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        if self.q == 0.0 {
            return 0.0;
        }
        let hmin = self.exhaustion.min_on(lo, hi);
        self.q * self.exhaustion.lipschitz() * exp(-(self.q + 1.0) * log1p(hmin))
    }

    /// `c_R = min_{|t| <= R} w_q(t) = (1 + max_{|t| <= R} h(t))^(-q)`.
    pub fn min_weight_on_window(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::invalid("R", "must be nonnegative"));
        }
        Ok(self.weight_of_h(self.exhaustion.max_on(-r, r)))
    }

    /// Constant `C` with `c_R >= C (1 + R)^(-q)` for every `R`, computed from
    /// `c2` and the maximum of `h` on `[-t0, t0]`.
    pub fn window_constant(&self) -> f64 {
        let (_, c2, _) = self.exhaustion.comparability();
        let h0 = self.exhaustion.core_max();
        pow((1.0 + h0) * c2.max(1.0), -self.q)
    }
}

/// Empirical min and max of `w_a(t) / w_b(t)` over `grid`.
pub fn weight_ratio_bounds(a: &ExhaustionSpec, b: &ExhaustionSpec, q: f64, grid: &[f64]) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::invalid("q", "must be finite and nonnegative"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in grid {
        // ratio in log form keeps far-out points accurate
        let r = exp(q * (log1p(b.h(t)) - log1p(a.h(t))));
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}
