//! Scalar primitives shared by every other module: Poisson pmf, cdf and
//! tails evaluated in log space, the regularized incomplete gamma function
//! and the normal tail.
//!
//! Tail sums always run over the side that is small. The leading term is
//! computed once through the log-gamma routine and the remaining terms are
//! accumulated relative to it, smallest first, so results well below
//! `1e-100` keep full relative precision.

use libm::{erfc, lgamma};

use crate::error::{Error, Result};

const SERIES_EPS: f64 = 1e-17;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 1_000_000;

/// Natural logarithm of a probability.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProbability(f64);

impl LogProbability {
    pub const ZERO_PROB: LogProbability = LogProbability(f64::NEG_INFINITY);
    pub const CERTAIN: LogProbability = LogProbability(0.0);

    pub fn new(ln_p: f64) -> Result<Self> {
        if ln_p.is_nan() || ln_p > 0.0 {
            return Err(Error::domain(format!("log-probability {ln_p} is not in (-inf, 0]")));
        }
        Ok(LogProbability(ln_p))
    }

    pub fn from_prob(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} is not in [0, 1]")));
        }
        Ok(LogProbability(p.ln()))
    }

    // Clamps tiny positive rounding excursions to zero.
    pub(crate) fn clamped(ln_p: f64) -> Self {
        LogProbability(ln_p.min(0.0))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("Poisson rate must be positive and finite, got {rate}")))
    }
}

/// `ln P(A_rate = count)`.
pub fn poisson_log_pmf(rate: f64, count: u64) -> Result<LogProbability> {
    check_rate(rate)?;
    if count == 0 {
        return Ok(LogProbability(-rate));
    }
    let ln_p = count as f64 * rate.ln() - rate - lgamma(count as f64 + 1.0);
    Ok(LogProbability::clamped(ln_p))
}

pub fn poisson_pmf(rate: f64, count: u64) -> Result<f64> {
    poisson_log_pmf(rate, count).map(LogProbability::prob)
}

// Sum of terms already sorted so that the smallest come last; adds them
// back to front.
fn sum_smallest_first(terms: &[f64]) -> f64 {
    terms.iter().rev().sum()
}

/// `ln P(A >= threshold)` for `threshold > rate`, summed upward from the
/// threshold.
fn log_upper_sum(rate: f64, threshold: u64) -> f64 {
    let lead = poisson_log_pmf(rate, threshold).expect("rate checked").ln();
    let mut terms = Vec::with_capacity(64);
    let mut term = 1.0_f64;
    let mut total = 0.0_f64;
    let mut j = threshold;
    while term > SERIES_EPS * total && terms.len() < MAX_ITER {
        terms.push(term);
        total += term;
        j += 1;
        term *= rate / j as f64;
    }
    lead + sum_smallest_first(&terms).ln()
}

/// `ln P(A <= count)` for `count < rate`, summed downward from `count`.
fn log_lower_sum(rate: f64, count: u64) -> f64 {
    let lead = poisson_log_pmf(rate, count).expect("rate checked").ln();
    let mut terms = Vec::with_capacity(64);
    let mut term = 1.0_f64;
    let mut total = 0.0_f64;
    let mut j = count;
    loop {
        terms.push(term);
        total += term;
        if j == 0 {
            break;
        }
        term *= j as f64 / rate;
        j -= 1;
        if term <= SERIES_EPS * total {
            break;
        }
    }
    lead + sum_smallest_first(&terms).ln()
}

/// `ln P(A_rate >= threshold)`.
pub fn poisson_log_tail(rate: f64, threshold: u64) -> Result<LogProbability> {
    check_rate(rate)?;
    if threshold == 0 {
        return Ok(LogProbability::CERTAIN);
    }
    if threshold as f64 > rate {
        Ok(LogProbability::clamped(log_upper_sum(rate, threshold)))
    } else {
        let lower = log_lower_sum(rate, threshold - 1).exp();
        Ok(LogProbability::clamped((-lower).ln_1p()))
    }
}

/// `P(A_rate >= threshold)`.
pub fn poisson_tail(rate: f64, threshold: u64) -> Result<f64> {
    poisson_log_tail(rate, threshold).map(LogProbability::prob)
}

/// `ln P(A_rate <= count)`.
pub fn poisson_log_cdf(rate: f64, count: u64) -> Result<LogProbability> {
    check_rate(rate)?;
    if (count as f64) < rate {
        Ok(LogProbability::clamped(log_lower_sum(rate, count)))
    } else {
        let upper = log_upper_sum(rate, count + 1).exp();
        Ok(LogProbability::clamped((-upper).ln_1p()))
    }
}

/// `P(A_rate <= count)`.
pub fn poisson_cdf(rate: f64, count: u64) -> Result<f64> {
    poisson_log_cdf(rate, count).map(LogProbability::prob)
}

/// Both regularized incomplete gamma functions at one point, together with
/// their "scaled" forms `Γ(a) e^x x^{-a} P(a, x)` and `Γ(a) e^x x^{-a} Q(a, x)`.
///
/// The scaled forms are the raw series / continued-fraction values and stay
/// representable when `P` or `Q` themselves would lose all precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncompleteGamma {
    pub lower: f64,
    pub upper: f64,
    pub scaled_lower: f64,
    pub scaled_upper: f64,
    /// `a ln x - x - ln Γ(a)`.
    pub ln_prefactor: f64,
}

fn lower_series(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * SERIES_EPS {
            return Ok(sum);
        }
    }
    Err(Error::range(format!("incomplete gamma series did not converge at a={a}, x={x}")))
}

fn upper_continued_fraction(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            return Ok(h);
        }
    }
    Err(Error::range(format!("incomplete gamma continued fraction did not converge at a={a}, x={x}")))
}

/// Evaluates `P(a, x)` and `Q(a, x)`. The series is used below `x = a + 1`
/// and the continued fraction above it; the other function is the
/// complement.
pub fn incomplete_gamma(a: f64, x: f64) -> Result<IncompleteGamma> {
    if !(a.is_finite() && a > 0.0 && x.is_finite() && x > 0.0) {
        return Err(Error::domain(format!("incomplete gamma needs a > 0, x > 0 (got a={a}, x={x})")));
    }
    let ln_prefactor = a * x.ln() - x - lgamma(a);
    let prefactor = ln_prefactor.exp();
    if x < a + 1.0 {
        let scaled_lower = lower_series(a, x)?;
        let lower = (scaled_lower * prefactor).min(1.0);
        let upper = 1.0 - lower;
        Ok(IncompleteGamma { lower, upper, scaled_lower, scaled_upper: upper * (-ln_prefactor).exp(), ln_prefactor })
    } else {
        let scaled_upper = upper_continued_fraction(a, x)?;
        let upper = (scaled_upper * prefactor).min(1.0);
        let lower = 1.0 - upper;
        Ok(IncompleteGamma { lower, upper, scaled_lower: lower * (-ln_prefactor).exp(), scaled_upper, ln_prefactor })
    }
}

/// `Q(shape, x) = Γ(shape, x) / Γ(shape)`. For integer `n`,
/// `Q(n, λ) = P(A_λ <= n - 1)`.
pub fn regularized_gamma_q(shape: f64, rate_point: f64) -> Result<f64> {
    incomplete_gamma(shape, rate_point).map(|g| g.upper)
}

/// `P(shape, x) = 1 - Q(shape, x)`.
pub fn regularized_gamma_p(shape: f64, rate_point: f64) -> Result<f64> {
    incomplete_gamma(shape, rate_point).map(|g| g.lower)
}

/// `P(Z > point)` for `Z ~ N(mean, variance)`.
pub fn normal_tail(mean: f64, variance: f64, point: f64) -> Result<f64> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::domain(format!("variance must be positive, got {variance}")));
    }
    let z = (point - mean) / variance.sqrt();
    Ok(0.5 * erfc(z / std::f64::consts::SQRT_2))
}
