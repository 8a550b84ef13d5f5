//! Locally dependent Bernoulli array approximating `S`.
//!
//! Class `r` has `M*` independent trials with success probability
//! `p_r = ν_r/M*`, and each trial is copied `b_r` times. Flat indices run
//! row-major with class 1 first: class `r` owns the `b_r·M*` consecutive
//! indices following those of classes `1..r`. Because copies are identical,
//! `W = Σ b_r·Binomial(M*, p_r)`.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lattice::{convolve_strided, exact_distribution, LatticeDistribution};
use crate::rational::{ceil_u64, int, to_f64, Rational};
use crate::weighted_sum::{Tail, WeightedPoissonSum};

/// Largest `R·M*` accepted by the exact rational pmf.
pub const MAX_EXACT_TRIALS: u64 = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliScheme {
    model: WeightedPoissonSum,
    trials: u64,
    probs: Vec<Rational>,
}

/// Builds the array with `trials` underlying trials per class.
pub fn build_scheme(model: &WeightedPoissonSum, trials: u64) -> Result<BernoulliScheme> {
    let m = int(trials);
    let mut probs = Vec::with_capacity(model.class_count());
    for (r, nu) in model.rates().iter().enumerate() {
        if nu > &m {
            return Err(Error::validation(format!(
                "class {} has rate {nu} > M* = {trials}; need M* >= {}",
                r + 1,
                ceil_u64(nu)?
            )));
        }
        probs.push(nu / &m);
    }
    Ok(BernoulliScheme { model: model.clone(), trials, probs })
}

/// Default trial count `100·ceil(max ν_r)`, which keeps every `p_r <= 0.01`.
pub fn default_trials(model: &WeightedPoissonSum) -> Result<u64> {
    Ok(100 * ceil_u64(model.max_rate())?)
}

impl BernoulliScheme {
    /// `per_unit·ceil(max ν_r)` trials per class, so `per_unit` sets how finely
    /// a unit of rate is split.
    pub fn with_resolution(model: &WeightedPoissonSum, per_unit: u64) -> Result<Self> {
        if per_unit == 0 {
            return Err(Error::validation("resolution must be at least 1"));
        }
        build_scheme(model, per_unit * ceil_u64(model.max_rate())?)
    }

    pub fn model(&self) -> &WeightedPoissonSum {
        &self.model
    }

    pub fn trials_per_class(&self) -> u64 {
        self.trials
    }

    pub fn class_probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn class_probs_f64(&self) -> Vec<f64> {
        self.probs.iter().map(to_f64).collect()
    }

    pub fn replication(&self) -> &[u64] {
        self.model.weights()
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }

    /// `N* = Σ b_r M*`.
    pub fn total_vars(&self) -> u64 {
        self.replication().iter().map(|b| b * self.trials).sum()
    }

    /// `R·M*`, the number of independent trials.
    pub fn underlying_trials(&self) -> u64 {
        self.class_count() as u64 * self.trials
    }

    /// Class of flat index `i` (0-based).
    pub fn class_of(&self, i: u64) -> Option<usize> {
        let mut start = 0;
        for (r, b) in self.replication().iter().enumerate() {
            start += b * self.trials;
            if i < start {
                return Some(r);
            }
        }
        None
    }

    /// `(p_i, b_i)` for every flat index in order.
    pub fn per_index(&self) -> impl Iterator<Item = (&Rational, u64)> + '_ {
        self.probs
            .iter()
            .zip(self.replication())
            .flat_map(move |(p, &b)| std::iter::repeat_n((p, b), (b * self.trials) as usize))
    }
}

/// `(Σ p_i, Σ b_i p_i)` over all flat indices; equal to `(μ, σ²)`.
pub fn scheme_moments(scheme: &BernoulliScheme) -> (Rational, Rational) {
    let mut sum_p = Rational::zero();
    let mut sum_bp = Rational::zero();
    for (p, &b) in scheme.probs.iter().zip(scheme.replication()) {
        let count = int(b * scheme.trials);
        sum_p += &count * p;
        sum_bp += &count * int(b) * p;
    }
    (sum_p, sum_bp)
}

/// `Σ b_i p_i²`, which equals `Σ b_r² ν_r² / M*`.
pub fn sum_bp_squared(scheme: &BernoulliScheme) -> Rational {
    let mut total = Rational::zero();
    for (p, &b) in scheme.probs.iter().zip(scheme.replication()) {
        total += int(b * scheme.trials) * int(b) * p * p;
    }
    total
}

/// Binomial pmf built by recurrence outward from the mode and normalized.
/// Entries below the double-precision floor relative to the mode are dropped
/// from the top; the returned vector starts at 0.
pub fn binomial_table(trials: u64, p: f64) -> Vec<f64> {
    let n = trials as usize;
    if p >= 1.0 {
        let mut t = vec![0.0; n + 1];
        t[n] = 1.0;
        return t;
    }
    if p <= 0.0 || n == 0 {
        return vec![1.0];
    }
    let q = 1.0 - p;
    let odds = p / q;
    let mode = (((trials + 1) as f64 * p).floor() as usize).min(n);
    let mut t = vec![0.0; n + 1];
    t[mode] = 1.0;
    let floor = f64::MIN_POSITIVE;
    let mut hi = mode;
    for j in mode..n {
        let next = t[j] * (n - j) as f64 / (j + 1) as f64 * odds;
        if next < floor {
            break;
        }
        t[j + 1] = next;
        hi = j + 1;
    }
    for j in (1..=mode).rev() {
        let prev = t[j] * j as f64 / (n - j + 1) as f64 / odds;
        if prev < floor {
            break;
        }
        t[j - 1] = prev;
    }
    t.truncate(hi + 1);
    let total: f64 = t.iter().sum();
    t.iter_mut().for_each(|v| *v /= total);
    t
}

// Drops top entries whose combined mass stays below `budget`.
fn cap_upper(table: &mut Vec<f64>, budget: f64) -> f64 {
    let mut dropped = 0.0;
    while table.len() > 1 {
        let last = *table.last().expect("nonempty");
        if dropped + last >= budget {
            break;
        }
        dropped += last;
        table.pop();
    }
    dropped
}

fn convolve_classes(
    scheme: &BernoulliScheme,
    trials_of: impl Fn(usize) -> u64,
    cap: Option<f64>,
) -> Result<LatticeDistribution> {
    if let Some(eps) = cap {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::validation(format!("cap must lie in (0, 1), got {eps}")));
        }
    }
    let budget = cap.map(|eps| eps / scheme.class_count() as f64);
    let mut acc = vec![1.0];
    let mut deficit = 0.0;
    let mut exact_through = u64::MAX;
    for (r, (p, &b)) in scheme.class_probs_f64().iter().zip(scheme.replication()).enumerate() {
        let mut table = binomial_table(trials_of(r), *p);
        if let Some(budget) = budget {
            let dropped = cap_upper(&mut table, budget);
            if dropped > 0.0 {
                deficit += dropped;
                exact_through = exact_through.min(b * table.len() as u64 - 1);
            }
        }
        acc = convolve_strided(&acc, &table, b as usize);
    }
    let dist = LatticeDistribution::new(acc, deficit)?;
    Ok(if deficit > 0.0 { dist.with_exact_through(exact_through) } else { dist })
}

/// Law of `W`. With `cap = Some(ε)` each class table loses at most `ε/R` of
/// upper-tail mass, reported as the deficit.
pub fn w_distribution(scheme: &BernoulliScheme, cap: Option<f64>) -> Result<LatticeDistribution> {
    convolve_classes(scheme, |_| scheme.trials, cap)
}

/// Law of `W` with one class-`r` trial (all of its `b_r` copies) removed.
pub fn w_distribution_without_trial(scheme: &BernoulliScheme, class: usize) -> Result<LatticeDistribution> {
    if class >= scheme.class_count() {
        return Err(Error::validation(format!("no class {}", class + 1)));
    }
    convolve_classes(scheme, |r| if r == class { scheme.trials - 1 } else { scheme.trials }, None)
}

fn binomial_coefficients(n: u64) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for k in 0..n {
        let next = row[k as usize].clone() * BigInt::from(n - k) / BigInt::from(k + 1);
        row.push(next);
    }
    row
}

/// Exact rational law of `W`; index `w` holds `P(W = w)`.
pub fn w_distribution_exact(scheme: &BernoulliScheme) -> Result<Vec<Rational>> {
    if scheme.underlying_trials() > MAX_EXACT_TRIALS {
        return Err(Error::TooLarge(format!(
            "exact rational law limited to R·M* <= {MAX_EXACT_TRIALS}, got {}",
            scheme.underlying_trials()
        )));
    }
    let n = scheme.trials;
    let coeffs = binomial_coefficients(n);
    let mut acc = vec![Rational::one()];
    for (p, &b) in scheme.probs.iter().zip(scheme.replication()) {
        let q = Rational::one() - p;
        let table: Vec<Rational> = (0..=n)
            .map(|j| {
                Rational::from_integer(coeffs[j as usize].clone())
                    * num_traits::pow(p.clone(), j as usize)
                    * num_traits::pow(q.clone(), (n - j) as usize)
            })
            .collect();
        let stride = b as usize;
        let mut out = vec![Rational::zero(); acc.len() + stride * n as usize];
        for (j, t) in table.iter().enumerate() {
            if t.is_zero() {
                continue;
            }
            for (i, a) in acc.iter().enumerate() {
                out[i + stride * j] += a * t;
            }
        }
        acc = out;
    }
    Ok(acc)
}

/// `P(W > y) / P(S > y)` from the two exact oracles.
pub fn tail_ratio(scheme: &BernoulliScheme, model: &WeightedPoissonSum, y: u64, epsilon: f64) -> Result<f64> {
    let s_tail = exact_distribution(model, epsilon)?.tail(y, Tail::Strict);
    if s_tail.lower < 1e-250 {
        return Err(Error::range(format!("P(S > {y}) = {:e} is below 1e-250", s_tail.lower)));
    }
    let w_tail = w_distribution(scheme, None)?.tail(y, Tail::Strict);
    Ok(w_tail.midpoint() / s_tail.midpoint())
}

/// Closed form of `P(W > 0)/P(S > 0)`: `(1 − Π(1−p_r)^{M*}) / (1 − e^{−Σν})`.
pub fn tail_ratio_at_zero(scheme: &BernoulliScheme) -> f64 {
    let ln_all_zero: f64 = scheme.class_probs_f64().iter().map(|p| scheme.trials as f64 * (-p).ln_1p()).sum();
    let total_rate: f64 = scheme.model.rates_f64().iter().sum();
    -ln_all_zero.exp_m1() / -(-total_rate).exp_m1()
}

#[cfg(test)]
fn rational_to_f64_vec(v: &[Rational]) -> Vec<f64> {
    v.iter().map(crate::rational::to_f64).collect()
}
