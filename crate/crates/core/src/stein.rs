//! Stein operator `𝒜f(w) = λm·f(w+m) − w·f(w)` for `mA_λ` on the lattice
//! `mℤ₊`, the solution `f_h` for `h = 1{w >= my}`, and the difference
//! functions `g_l` together with numerical checks of their bounds.
//!
//! With `a = w/m`, the solution is
//!
//! ```text
//! f_h(w) = −(1/m) Σ_j λ^j / (a(a+1)…(a+j)) · [h(w+mj) − P],   P = P(A_λ >= y).
//! ```
//!
//! For `a >= λ` the terms decrease from the start and the series is summed
//! directly. For `a < λ` the partial products first grow like `e^λ` and
//! the alternating-sign sum cancels badly, so the same quantity is taken
//! from its incomplete-gamma closed form
//!
//! ```text
//! f_h(w) = −Γ(a) e^λ λ^{-a} [P·Q(a, λ) − (P(y, λ) − P(s, λ))] / m,
//! ```
//!
//! where `P(·,λ)`, `Q(·,λ)` are the regularized incomplete gamma functions
//! and `s = a + ⌈y − a⌉` is the first shifted point at or above `y`.
//! `f_h(0)` is not determined by the equation and is fixed to 0.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::One;

use crate::error::{Error, Result};
use crate::rational::{int, to_f64, Rational};
use crate::special::{incomplete_gamma, poisson_cdf, poisson_tail};
use crate::weighted_sum::SumMoments;

const MAX_TERMS: usize = 1_000_000;

/// `λ` and the lattice step `m`; all that the operator itself needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeOperator {
    pub lambda: f64,
    pub m: u64,
}

impl LatticeOperator {
    pub fn new(lambda: f64, m: u64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        if m == 0 {
            return Err(Error::validation("lattice step must be positive"));
        }
        Ok(Self { lambda, m })
    }

    pub fn lambda_m(&self) -> f64 {
        self.lambda * self.m as f64
    }
}

/// `λm·f(w+m) − w·f(w)`.
pub fn stein_apply(op: &LatticeOperator, f: impl Fn(u64) -> f64, w: u64) -> f64 {
    op.lambda_m() * f(w + op.m) - w as f64 * f(w)
}

/// Smallest `J` with `P(A_λ > J) < 1e-16`.
pub fn default_truncation(lambda: f64) -> Result<u64> {
    crate::lattice::poisson_truncation(lambda, 1e-16).map(|(n, _)| n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroMeanCheck {
    /// `Σ_{j <= trunc} 𝒜f(mj) P(A_λ = j)`.
    pub expectation: f64,
    /// `max_j |𝒜f(mj)|` over the same range.
    pub max_abs: f64,
}

/// Truncated `E[𝒜f(mA_λ)]`, which vanishes for every `f`.
pub fn operator_zero_mean(op: &LatticeOperator, f: impl Fn(u64) -> f64, trunc: u64) -> Result<ZeroMeanCheck> {
    let pmf = crate::lattice::poisson_table(op.lambda, trunc)?;
    let mut terms = Vec::with_capacity(pmf.len());
    let mut max_abs = 0.0_f64;
    for (j, p) in pmf.iter().enumerate() {
        let a = stein_apply(op, &f, op.m * j as u64);
        max_abs = max_abs.max(a.abs());
        terms.push(a * p);
    }
    // Largest contributions sit near the mode; summing by magnitude keeps
    // the cancellation visible.
    terms.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    Ok(ZeroMeanCheck { expectation: terms.iter().sum(), max_abs })
}

/// Parameters of one Stein equation: operator, scale `n` and level `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinContext {
    lambda: Rational,
    m: u64,
    n: u64,
    y: u64,
    series_tol: f64,
}

impl SteinContext {
    pub fn new(lambda: Rational, m: u64, n: u64, y: u64, series_tol: f64) -> Result<Self> {
        if lambda <= int(0) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        if m == 0 || n == 0 {
            return Err(Error::validation("m and n must be positive"));
        }
        if m.gcd(&n) != 1 {
            return Err(Error::validation(format!("n = {n} and m = {m} share a factor")));
        }
        if y == 0 {
            return Err(Error::validation("threshold y must be at least 1"));
        }
        if !(series_tol > 0.0 && series_tol <= 1e-6) {
            return Err(Error::validation(format!("series tolerance must lie in (0, 1e-6], got {series_tol}")));
        }
        Ok(Self { lambda, m, n, y, series_tol })
    }

    pub fn from_moments(moments: &SumMoments, y: u64, series_tol: f64) -> Result<Self> {
        Self::new(moments.lambda.clone(), moments.k_den, moments.k_num, y, series_tol)
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    pub fn lambda_f64(&self) -> f64 {
        to_f64(&self.lambda)
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn y(&self) -> u64 {
        self.y
    }

    pub fn series_tol(&self) -> f64 {
        self.series_tol
    }

    /// `my`, where the indicator switches on.
    pub fn my(&self) -> u64 {
        self.m * self.y
    }

    pub fn operator(&self) -> LatticeOperator {
        LatticeOperator { lambda: self.lambda_f64(), m: self.m }
    }

    /// `h(w) = 1{w >= my}`.
    pub fn h(&self, w: u64) -> f64 {
        if w >= self.my() {
            1.0
        } else {
            0.0
        }
    }

    /// `P(mA_λ >= my) = P(A_λ >= y)`.
    pub fn tail_prob(&self) -> Result<f64> {
        poisson_tail(self.lambda_f64(), self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalRoute {
    /// `w = 0`, fixed by convention.
    Origin,
    Series,
    IncompleteGamma,
}

/// How one table value was obtained. For the series route `tail_bound`
/// bounds the discarded part of `f_h(w)`; the incomplete-gamma route is
/// converged to machine precision and records 0 terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointInfo {
    pub route: EvalRoute,
    pub terms: usize,
    pub tail_bound: f64,
}

struct Evaluator {
    lambda: f64,
    m: u64,
    y: u64,
    p: f64,
    series_tol: f64,
}

impl Evaluator {
    fn eval(&self, w: u64) -> Result<(f64, PointInfo)> {
        if w == 0 {
            return Ok((0.0, PointInfo { route: EvalRoute::Origin, terms: 0, tail_bound: 0.0 }));
        }
        let a = w as f64 / self.m as f64;
        if a < self.lambda {
            self.gamma_route(w, a)
        } else {
            self.series_route(w, a)
        }
    }

    fn series_route(&self, w: u64, a: f64) -> Result<(f64, PointInfo)> {
        let my = self.m * self.y;
        // First index j with w + mj >= my.
        let jstar = if w >= my { 0 } else { (my - w).div_ceil(self.m) as usize };
        let coeff = |j: usize| if j >= jstar { 1.0 - self.p } else { -self.p };
        let max_coeff = self.p.max(1.0 - self.p);
        let m = self.m as f64;
        let tol = self.series_tol / (self.lambda * m + w as f64 + 1.0);
        let mut t = 1.0 / a;
        let mut sum = 0.0;
        for j in 0..MAX_TERMS {
            sum += t * coeff(j);
            let q = self.lambda / (a + j as f64 + 1.0);
            if q < 1.0 {
                let bound = t * q / (1.0 - q) * max_coeff / m;
                let target = tol.min((f64::EPSILON * sum.abs() / m).max(1e-300));
                if bound <= target {
                    let info = PointInfo { route: EvalRoute::Series, terms: j + 1, tail_bound: bound };
                    return Ok((-sum / m, info));
                }
            }
            t *= q;
        }
        Err(Error::range(format!("solution series at w={w} did not converge")))
    }

    fn gamma_route(&self, w: u64, a: f64) -> Result<(f64, PointInfo)> {
        let g = incomplete_gamma(a, self.lambda)?;
        let unscale = (-g.ln_prefactor).exp();
        if !unscale.is_finite() {
            return Err(Error::range(format!("Γ(a)e^λλ^(-a) overflows at w={w}")));
        }
        let m = self.m as f64;
        let my = self.m * self.y;
        let value = if w >= my {
            -(1.0 - self.p) * g.scaled_lower / m
        } else {
            let shifted = w + (my - w).div_ceil(self.m) * self.m;
            let d = if shifted == my {
                0.0
            } else {
                let s = shifted as f64 / m;
                let ys = self.y as f64;
                if ys >= self.lambda {
                    self.p - incomplete_gamma(s, self.lambda)?.lower
                } else {
                    incomplete_gamma(s, self.lambda)?.upper - poisson_cdf(self.lambda, self.y - 1)?
                }
            };
            -(self.p * g.scaled_upper - d * unscale) / m
        };
        Ok((value, PointInfo { route: EvalRoute::IncompleteGamma, terms: 0, tail_bound: 0.0 }))
    }
}

/// `f_h` on `0, s, 2s, …` with `s = 1` (every integer) or `s = m`
/// (lattice only), plus construction diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinSolutionTable {
    ctx: SteinContext,
    stride: u64,
    w_max: u64,
    tail_prob: f64,
    values: Vec<f64>,
    info: Vec<PointInfo>,
    residual_max: f64,
    off_lattice_residual: f64,
}

impl SteinSolutionTable {
    pub fn context(&self) -> &SteinContext {
        &self.ctx
    }

    /// Largest requested point; values are stored through `w_max + m`.
    pub fn w_max(&self) -> u64 {
        self.w_max
    }

    pub fn covers(&self, w: u64) -> bool {
        w.is_multiple_of(self.stride) && ((w / self.stride) as usize) < self.values.len()
    }

    pub fn includes_off_lattice(&self) -> bool {
        self.stride == 1
    }

    /// `P(A_λ >= y)`.
    pub fn tail_prob(&self) -> f64 {
        self.tail_prob
    }

    pub fn value(&self, w: u64) -> Result<f64> {
        if !self.covers(w) {
            return Err(Error::validation(format!("f_h({w}) is outside the table")));
        }
        Ok(self.values[(w / self.stride) as usize])
    }

    pub fn point_info(&self, w: u64) -> Result<PointInfo> {
        if !self.covers(w) {
            return Err(Error::validation(format!("f_h({w}) is outside the table")));
        }
        Ok(self.info[(w / self.stride) as usize])
    }

    /// Stored `(w, f_h(w))` pairs in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| (i as u64 * self.stride, *v))
    }

    /// `max |𝒜f_h(w) − (h(w) − P)|` over lattice points `w <= w_max`.
    pub fn residual_max(&self) -> f64 {
        self.residual_max
    }

    /// Same residual off the lattice, relative to `|λm f(w+m)| + |w f(w)| + 1`.
    /// Zero for lattice-only tables.
    pub fn off_lattice_residual(&self) -> f64 {
        self.off_lattice_residual
    }

    fn residual_at(&self, w: u64) -> Result<(f64, f64)> {
        let op = self.ctx.operator();
        let lhs = op.lambda_m() * self.value(w + op.m)?;
        let rhs = w as f64 * self.value(w)?;
        let r = (lhs - rhs - (self.ctx.h(w) - self.tail_prob)).abs();
        Ok((r, lhs.abs() + rhs.abs() + 1.0))
    }
}

/// Tabulates `f_h` on `[0, w_max + m]`, every integer when
/// `include_off_lattice`, lattice points otherwise.
pub fn solve_stein(ctx: &SteinContext, w_max: u64, include_off_lattice: bool) -> Result<SteinSolutionTable> {
    let need = ctx.m * (ctx.y + 10);
    if w_max < need {
        return Err(Error::validation(format!("w_max = {w_max} is below m(y+10) = {need}")));
    }
    let p = ctx.tail_prob()?;
    let eval = Evaluator { lambda: ctx.lambda_f64(), m: ctx.m, y: ctx.y, p, series_tol: ctx.series_tol };
    let stride = if include_off_lattice { 1 } else { ctx.m };
    let last = w_max + ctx.m;
    let count = (last / stride + 1) as usize;
    let mut values = Vec::with_capacity(count);
    let mut info = Vec::with_capacity(count);
    for i in 0..count {
        let (v, pi) = eval.eval(i as u64 * stride)?;
        values.push(v);
        info.push(pi);
    }
    let mut table = SteinSolutionTable {
        ctx: ctx.clone(),
        stride,
        w_max,
        tail_prob: p,
        values,
        info,
        residual_max: 0.0,
        off_lattice_residual: 0.0,
    };
    let mut w = 0;
    while w <= w_max {
        let (r, scale) = table.residual_at(w)?;
        if w % ctx.m == 0 {
            table.residual_max = table.residual_max.max(r);
        } else {
            table.off_lattice_residual = table.off_lattice_residual.max(r / scale);
        }
        w += stride;
    }
    Ok(table)
}

/// `g_l(w) = (f_h(w) − f_h(w+l)) / P`, taken as 0 for `w < m`.
pub fn g_l(table: &SteinSolutionTable, w: u64, l: u64) -> Result<f64> {
    let ctx = table.context();
    if l == 0 || l > ctx.m {
        return Err(Error::domain(format!("l must lie in 1..={}, got {l}", ctx.m)));
    }
    if w >= ctx.my() {
        return Err(Error::domain(format!("g_l is defined below my = {}, got w = {w}", ctx.my())));
    }
    if w < ctx.m {
        return Ok(0.0);
    }
    Ok((table.value(w)? - table.value(w + l)?) / table.tail_prob())
}

/// `g_m(w)` from the Stein equation: `1/(λm) − f_h(w)(w/(λm) − 1)/P`.
pub fn g_m_recurrence(table: &SteinSolutionTable, w: u64) -> Result<f64> {
    let ctx = table.context();
    if w >= ctx.my() {
        return Err(Error::domain(format!("g_m is defined below my = {}, got w = {w}", ctx.my())));
    }
    let lm = ctx.operator().lambda_m();
    Ok(1.0 / lm - table.value(w)? * (w as f64 / lm - 1.0) / table.tail_prob())
}

/// `e^λ (⌊w/m⌋ − 1)! / (m λ^⌊w/m⌋)` for `w >= m`.
pub fn factorial_bound(lambda: f64, m: u64, w: u64) -> Result<f64> {
    let a = w / m;
    if a == 0 {
        return Err(Error::domain(format!("factorial bound needs w >= m, got w = {w}")));
    }
    let ln = lambda + libm::lgamma(a as f64) - (m as f64).ln() - a as f64 * lambda.ln();
    Ok(ln.exp())
}

/// Exact `(m^{j+1}Π(ℓ+⌊w/m⌋), Π(w+mℓ), m^{j+1}Π(ℓ+⌊w/m⌋+1))` over `ℓ = 0..=j`;
/// the middle value lies between the outer two.
pub fn factorial_sandwich(w: u64, m: u64, j: u64) -> (BigInt, BigInt, BigInt) {
    let a = w / m;
    let mut lo = BigInt::one();
    let mut mid = BigInt::one();
    let mut hi = BigInt::one();
    let mb = BigInt::from(m);
    for l in 0..=j {
        lo *= &mb * BigInt::from(l + a);
        mid *= BigInt::from(w + m * l);
        hi *= &mb * BigInt::from(l + a + 1);
    }
    (lo, mid, hi)
}

/// Outcome of one property on a grid. `worst_margin` is the smallest slack
/// (bound minus value, or value minus threshold); negative means violated.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    pub worst_margin: f64,
}

impl PropertyCheck {
    fn new(name: &'static str) -> Self {
        Self { name, passed: true, checked: 0, failures: 0, worst_margin: f64::INFINITY }
    }

    fn record(&mut self, margin: f64, ok: bool) {
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if !ok {
            self.failures += 1;
            self.passed = false;
        }
    }
}

/// Results of [`verify_f_properties`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    /// `f_h(w+1) > f_h(w)` for `w >= my`.
    pub monotone: PropertyCheck,
    /// `f_h(w+l) − f_h(w) > 0` for `w >= my`, `l = 1..=m`.
    pub positive_increment: PropertyCheck,
    /// Observed `max w·(f_h(w+l) − f_h(w))` on the same range.
    pub c_hat: f64,
    /// `g_m(w) <= 1/(λm) + B(w)|w − λm|/(λm)` for `m <= w < my`.
    pub g_m_bound: PropertyCheck,
    /// `|g_l(w)| <= B(w)` for `m <= w < my`, `l = 1..m−1`.
    pub g_l_bound: PropertyCheck,
    /// `g_l(mj) − g_l(mj−m) >= −1e−10` with both points in `[m, my)`.
    pub g_l_increment: PropertyCheck,
    /// The same increment at `j = 1` (left point below `m`, where `g_l` is 0
    /// by convention) and `j = y` (right point at `my`). Not part of the
    /// pass/fail verdict.
    pub g_l_increment_boundary: PropertyCheck,
    /// `max |g_m(w) − g_m recurrence|` on the lattice below `my`.
    pub g_m_recurrence_gap: f64,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    /// The five verdict-bearing checks.
    pub fn checks(&self) -> [&PropertyCheck; 5] {
        [&self.monotone, &self.positive_increment, &self.g_m_bound, &self.g_l_bound, &self.g_l_increment]
    }
}

pub const INCREMENT_TOL: f64 = 1e-10;
/// Relative slack for the closed-form `g` bounds.
pub const BOUND_RTOL: f64 = 1e-12;

/// Checks the monotonicity, increment and `g_l` bounds over `[m, grid_max]`.
/// Needs a table with off-lattice values covering `grid_max + m`.
pub fn verify_f_properties(table: &SteinSolutionTable, grid_max: u64) -> Result<PropertyReport> {
    let ctx = table.context().clone();
    if !table.includes_off_lattice() {
        return Err(Error::validation("property checks need off-lattice values"));
    }
    if grid_max + ctx.m > table.w_max() + ctx.m || grid_max < ctx.my() {
        return Err(Error::validation(format!(
            "grid end {grid_max} must lie in [my, w_max] = [{}, {}]",
            ctx.my(),
            table.w_max()
        )));
    }
    let m = ctx.m;
    let my = ctx.my();
    let lambda = ctx.lambda_f64();
    let lm = ctx.operator().lambda_m();
    let f = |w: u64| table.value(w);

    let mut monotone = PropertyCheck::new("monotone above my");
    let mut positive = PropertyCheck::new("positive increment above my");
    let mut c_hat = 0.0_f64;
    for w in my..grid_max {
        let d = f(w + 1)? - f(w)?;
        monotone.record(d, d > 0.0);
        for l in 1..=m {
            let d = f(w + l)? - f(w)?;
            positive.record(d, d > 0.0);
            c_hat = c_hat.max(w as f64 * d);
        }
    }

    let mut g_m_bound = PropertyCheck::new("g_m bound below my");
    let mut g_l_bound = PropertyCheck::new("g_l bound below my");
    let mut gap = 0.0_f64;
    for w in m..my {
        let b = factorial_bound(lambda, m, w)?;
        let g = g_l(table, w, m)?;
        let bound = 1.0 / lm + b * (w as f64 - lm).abs() / lm;
        // The bound is attained up to rounding near w = m.
        g_m_bound.record((bound - g) / bound, g <= bound * (1.0 + BOUND_RTOL));
        if w % m == 0 {
            gap = gap.max((g - g_m_recurrence(table, w)?).abs());
        }
        for l in 1..m {
            let g = g_l(table, w, l)?;
            g_l_bound.record((b - g.abs()) / b, g.abs() <= b * (1.0 + BOUND_RTOL));
        }
    }

    let mut inc = PropertyCheck::new("g_l increment");
    let mut boundary = PropertyCheck::new("g_l increment at boundary");
    let raw = |w: u64, l: u64| -> Result<f64> {
        if w < m {
            Ok(0.0)
        } else {
            Ok((f(w)? - f(w + l)?) / table.tail_prob())
        }
    };
    for j in 1..=ctx.y {
        for l in 1..=m {
            let d = raw(m * j, l)? - raw(m * j - m, l)?;
            let check = if j == 1 || j == ctx.y { &mut boundary } else { &mut inc };
            check.record(d, d >= -INCREMENT_TOL);
        }
    }

    Ok(PropertyReport {
        monotone,
        positive_increment: positive,
        c_hat,
        g_m_bound,
        g_l_bound,
        g_l_increment: inc,
        g_l_increment_boundary: boundary,
        g_m_recurrence_gap: gap,
    })
}

/// `⌊w/m⌋ + j'` where `j'` is the last index with `w + mj' < my`. Always
/// equal to `y − 1` for `w < my`.
pub fn last_index_below(ctx: &SteinContext, w: u64) -> Result<u64> {
    if w >= ctx.my() {
        return Err(Error::domain("no index below my"));
    }
    let j_prime = (ctx.my() - w).div_ceil(ctx.m) - 1;
    Ok(w / ctx.m + j_prime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;
    use crate::special::poisson_pmf;

    fn small_ctx(y: u64) -> SteinContext {
        SteinContext::new(frac(9, 5), 5, 3, y, 1e-10).unwrap()
    }

    fn reference_ctx(y: u64) -> SteinContext {
        SteinContext::new(frac(1600, 31), 31, 4, y, 1e-10).unwrap()
    }

    #[test]
    fn apply_examples() {
        let op = LatticeOperator::new(1600.0 / 31.0, 31).unwrap();
        assert!((stein_apply(&op, |_| 1.0, 100) - 1500.0).abs() < 1e-9);
        let op = LatticeOperator::new(2.0, 3).unwrap();
        assert_eq!(stein_apply(&op, |w| w as f64, 4), 6.0 * 7.0 - 16.0);
        assert_eq!(stein_apply(&op, |_| 2.5, 4), 2.5 * (6.0 - 4.0));
    }

    #[test]
    fn zero_mean_examples() {
        let op = LatticeOperator::new(2.0, 3).unwrap();
        let z = operator_zero_mean(&op, |_| 1.0, default_truncation(2.0).unwrap()).unwrap();
        assert!(z.expectation.abs() <= 1e-10 * (1.0 + z.max_abs));
        let op = LatticeOperator::new(1.8, 5).unwrap();
        let t = default_truncation(1.8).unwrap();
        let z = operator_zero_mean(&op, |w| w as f64, t).unwrap();
        assert!(z.expectation.abs() <= 1e-10 * (1.0 + z.max_abs));
        let z = operator_zero_mean(&op, |w| if w >= 10 { 1.0 } else { 0.0 }, t).unwrap();
        assert!(z.expectation.abs() <= 1e-10 * (1.0 + z.max_abs));
    }

    #[test]
    fn context_validation() {
        assert!(SteinContext::new(frac(9, 5), 6, 3, 3, 1e-10).is_err());
        assert!(SteinContext::new(frac(9, 5), 5, 3, 0, 1e-10).is_err());
        assert!(SteinContext::new(frac(9, 5), 5, 3, 3, 1e-3).is_err());
        assert!(solve_stein(&small_ctx(3), 20, false).is_err());
    }

    #[test]
    fn residual_small_context() {
        for y in [3, 10] {
            let ctx = small_ctx(y);
            let table = solve_stein(&ctx, 5 * (y + 50), true).unwrap();
            assert!(table.residual_max() <= 1e-9, "y={y}: {}", table.residual_max());
            assert!(table.off_lattice_residual() < 1e-12, "{}", table.off_lattice_residual());
        }
    }

    #[test]
    fn lattice_closed_form() {
        // f(ma) = −P·P(A < a) / (mλ·pmf(a−1)) for 1 <= a <= y.
        let ctx = reference_ctx(60);
        let table = solve_stein(&ctx, 31 * 70, false).unwrap();
        let lambda: f64 = 1600.0 / 31.0;
        let p = table.tail_prob();
        for a in 1..=60u64 {
            let below = poisson_cdf(lambda, a - 1).unwrap();
            let expected = -p * below / (31.0 * lambda * poisson_pmf(lambda, a - 1).unwrap());
            let got = table.value(31 * a).unwrap();
            assert!(((got - expected) / expected).abs() < 1e-12, "a={a}: {got} vs {expected}");
        }
        assert!((table.value(31).unwrap() + p / 1600.0).abs() < 1e-15);
    }

    #[test]
    fn negative_above_threshold() {
        let ctx = small_ctx(3);
        let table = solve_stein(&ctx, 200, true).unwrap();
        for (w, v) in table.iter() {
            if w >= ctx.my() {
                assert!(v < 0.0, "f({w}) = {v}");
            }
        }
    }

    #[test]
    fn series_certificate() {
        let ctx = reference_ctx(60);
        let table = solve_stein(&ctx, 31 * 70, true).unwrap();
        let mut series_points = 0;
        for (w, _) in table.iter() {
            let info = table.point_info(w).unwrap();
            if info.route == EvalRoute::Series {
                series_points += 1;
                assert!(info.tail_bound <= ctx.series_tol());
            }
        }
        assert!(series_points > 0);
    }

    #[test]
    fn g_m_two_ways() {
        let ctx = small_ctx(3);
        let table = solve_stein(&ctx, 200, true).unwrap();
        for w in [5, 10] {
            let direct = g_l(&table, w, 5).unwrap();
            let rec = g_m_recurrence(&table, w).unwrap();
            assert!((direct - rec).abs() < 1e-8);
        }
        let lm: f64 = 9.0;
        let bound = 1.0 / lm + factorial_bound(1.8, 5, 5).unwrap() * (5.0 - lm).abs() / lm;
        assert!(g_l(&table, 5, 5).unwrap() <= bound);
        assert!(g_l(&table, 15, 2).is_err());
        assert_eq!(g_l(&table, 3, 2).unwrap(), 0.0);
    }

    #[test]
    fn properties_small_context() {
        let ctx = small_ctx(3);
        let table = solve_stein(&ctx, 205, true).unwrap();
        let report = verify_f_properties(&table, 200).unwrap();
        assert!(report.all_passed(), "{report:#?}");
        assert!(report.c_hat > 0.0);
    }

    #[test]
    fn properties_unit_lattice() {
        let ctx = SteinContext::new(frac(7, 2), 1, 1, 6, 1e-10).unwrap();
        let table = solve_stein(&ctx, 100, true).unwrap();
        assert!(table.residual_max() < 1e-12);
        let report = verify_f_properties(&table, 90).unwrap();
        assert!(report.all_passed(), "{report:#?}");
    }

    #[test]
    fn increment_fails_far_above_lambda() {
        // With y = 90 the increment turns negative once mj passes about λm.
        // Reference value from 60-digit evaluation of the series.
        let ctx = reference_ctx(90);
        let table = solve_stein(&ctx, 31 * 140, true).unwrap();
        let p = table.tail_prob();
        let g = |w: u64| (table.value(w).unwrap() - table.value(w + 1).unwrap()) / p;
        let d = g(31 * 60) - g(31 * 59);
        assert!((d - -2.607_104_4e-5).abs() < 1e-11, "{d}");
        let report = verify_f_properties(&table, 31 * 100).unwrap();
        assert!(!report.g_l_increment.passed);
        assert!(report.monotone.passed && report.g_m_bound.passed && report.g_l_bound.passed);
    }

    #[test]
    fn last_index_identity() {
        let ctx = reference_ctx(60);
        for w in 0..ctx.my() {
            assert_eq!(last_index_below(&ctx, w).unwrap(), 59);
        }
    }

    #[test]
    fn sandwich_small() {
        let (lo, mid, hi) = factorial_sandwich(17, 5, 3);
        assert!(lo <= mid && mid <= hi);
        assert_eq!(mid, BigInt::from(17 * 22 * 27 * 32));
    }
}
