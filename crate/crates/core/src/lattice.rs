//! Truncated probability tables on the nonnegative integers and the exact
//! convolution oracle for `S`.

use crate::error::{Error, Result};
use crate::special::{poisson_pmf, poisson_tail};
use crate::weighted_sum::{Tail, WeightedPoissonSum};

/// Bracket `[lower, upper]` around a probability whose table value misses at
/// most `upper − lower` of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailInterval {
    pub lower: f64,
    pub upper: f64,
}

impl TailInterval {
    pub fn exact(p: f64) -> Self {
        Self { lower: p, upper: p }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// A pmf on `0..=support_max` that may be missing up to `mass_deficit` of
/// mass beyond the table. Entries at points `<= exact_through` are complete:
/// the missing mass lives strictly above that point.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    pmf: Vec<f64>,
    mass_deficit: f64,
    exact_through: u64,
}

impl LatticeDistribution {
    pub fn new(pmf: Vec<f64>, mass_deficit: f64) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::validation("a distribution needs at least one support point"));
        }
        if let Some(i) = pmf.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::validation(format!("pmf entry {i} is {}", pmf[i])));
        }
        if !(mass_deficit.is_finite() && mass_deficit >= 0.0) {
            return Err(Error::validation(format!("mass deficit must be nonnegative, got {mass_deficit}")));
        }
        let exact_through = if mass_deficit == 0.0 { pmf.len() as u64 - 1 } else { 0 };
        Ok(Self { pmf, mass_deficit, exact_through })
    }

    /// Declares that every entry up to `point` is complete.
    pub fn with_exact_through(mut self, point: u64) -> Self {
        self.exact_through = point.min(self.support_max());
        self
    }

    pub fn exact_through(&self) -> u64 {
        self.exact_through
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, w: u64) -> f64 {
        self.pmf.get(w as usize).copied().unwrap_or(0.0)
    }

    pub fn support_max(&self) -> u64 {
        self.pmf.len() as u64 - 1
    }

    pub fn mass_deficit(&self) -> f64 {
        self.mass_deficit
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(w, p)| w as f64 * p).sum()
    }

    /// Table mass at points `>= y`, summed from the top so small terms go first.
    pub fn tail_at_least(&self, y: u64) -> f64 {
        let start = (y as usize).min(self.pmf.len());
        self.pmf[start..].iter().rev().sum()
    }

    /// Table mass at points `<= y`. Exact when `y <= exact_through`.
    pub fn cdf(&self, y: u64) -> f64 {
        let end = (y as usize + 1).min(self.pmf.len());
        self.pmf[..end].iter().sum()
    }

    /// `P(X > y)` or `P(X >= y)`, bracketed by the missing mass.
    pub fn tail(&self, y: u64, tail: Tail) -> TailInterval {
        let lower = match tail {
            Tail::Strict => self.tail_at_least(y + 1),
            Tail::NonStrict => self.tail_at_least(y),
        };
        if lower == 0.0 && self.mass_deficit == 0.0 {
            return TailInterval::exact(0.0);
        }
        if tail == Tail::NonStrict && y == 0 {
            return TailInterval::exact(1.0);
        }
        TailInterval { lower, upper: (lower + self.mass_deficit).min(1.0) }
    }
}

/// `acc ⊛ table` where `table[j]` is the mass of the value `stride·j`.
pub fn convolve_strided(acc: &[f64], table: &[f64], stride: usize) -> Vec<f64> {
    let len = acc.len() + stride * (table.len() - 1);
    let mut out = vec![0.0; len];
    for (j, &q) in table.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let shift = stride * j;
        for (o, &a) in out[shift..shift + acc.len()].iter_mut().zip(acc) {
            *o += a * q;
        }
    }
    out
}

/// Smallest `N` with `P(A_rate > N) < budget`, together with that tail.
pub fn poisson_truncation(rate: f64, budget: f64) -> Result<(u64, f64)> {
    let mut n = rate.floor() as u64;
    loop {
        let t = poisson_tail(rate, n + 1)?;
        if t < budget {
            return Ok((n, t));
        }
        n += 1;
    }
}

/// `P(A_rate = j)` for `j = 0..=max`.
pub fn poisson_table(rate: f64, max: u64) -> Result<Vec<f64>> {
    let len = max as usize + 1;
    let mut table = vec![0.0; len];
    if rate < 600.0 {
        let mut p = (-rate).exp();
        for (j, slot) in table.iter_mut().enumerate() {
            if j > 0 {
                p *= rate / j as f64;
            }
            *slot = p;
        }
    } else {
        // e^{-rate} underflows; recur outward from the mode.
        let mode = (rate.floor() as usize).min(max as usize);
        table[mode] = poisson_pmf(rate, mode as u64)?;
        for j in (0..mode).rev() {
            table[j] = table[j + 1] * (j + 1) as f64 / rate;
        }
        for j in mode + 1..len {
            table[j] = table[j - 1] * rate / j as f64;
        }
    }
    Ok(table)
}

/// Law of `S` by convolving truncated Poisson tables with stride `b_r`.
/// Each class is cut where its tail drops below `epsilon / R`.
pub fn exact_distribution(model: &WeightedPoissonSum, epsilon: f64) -> Result<LatticeDistribution> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::validation(format!("epsilon must lie in (0, 1e-3], got {epsilon}")));
    }
    let budget = epsilon / model.class_count() as f64;
    let mut acc = vec![1.0];
    let mut deficit = 0.0;
    let mut exact_through = u64::MAX;
    for (&b, rate) in model.weights().iter().zip(model.rates_f64()) {
        let (n, cut) = poisson_truncation(rate, budget)?;
        deficit += cut;
        // A point below b·(n+1) can only be reached with this class at most n.
        exact_through = exact_through.min(b * (n + 1) - 1);
        acc = convolve_strided(&acc, &poisson_table(rate, n)?, b as usize);
    }
    Ok(LatticeDistribution::new(acc, deficit)?.with_exact_through(exact_through))
}

/// Bracket for `P(S > y)` (strict) or `P(S >= y)`.
pub fn exact_tail(model: &WeightedPoissonSum, y: u64, tail: Tail, epsilon: f64) -> Result<TailInterval> {
    Ok(exact_distribution(model, epsilon)?.tail(y, tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WeightedPoissonSum {
        WeightedPoissonSum::from_integers(&[1, 2], &[1, 1]).unwrap()
    }

    #[test]
    fn small_model_examples() {
        let d = exact_distribution(&small(), 1e-12).unwrap();
        let e2 = (-2.0f64).exp();
        assert!((d.prob(0) - e2).abs() < 1e-16);
        let t = d.tail(2, Tail::NonStrict);
        assert!(t.contains(1.0 - 2.0 * e2) || (t.lower - (1.0 - 2.0 * e2)).abs() < 1e-15);
        let strict = exact_tail(&small(), 1, Tail::Strict, 1e-12).unwrap();
        assert!((strict.lower - (1.0 - 2.0 * e2)).abs() < 1e-12);
        assert!(strict.width() <= 1e-12);
    }

    #[test]
    fn zero_nonstrict_is_certain() {
        let t = exact_tail(&small(), 0, Tail::NonStrict, 1e-9).unwrap();
        assert_eq!(t, TailInterval::exact(1.0));
    }

    #[test]
    fn reference_model_mass_at_zero() {
        let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30]).unwrap();
        let d = exact_distribution(&model, 1e-12).unwrap();
        let ln0 = d.prob(0).ln();
        assert!((ln0 + 130.0).abs() < 1e-12, "{ln0}");
        assert!(d.mass_deficit() <= 1e-12);
        let total = d.total_mass();
        assert!((1.0 - 1e-12 - 1e-14..=1.0 + 1e-14).contains(&total));
        assert!((d.mean() - 400.0).abs() < 1e-8);
    }

    #[test]
    fn lower_cdf_is_exact_below_truncation() {
        let d = exact_distribution(&small(), 1e-12).unwrap();
        let e2 = (-2.0f64).exp();
        assert!(d.exact_through() >= 10);
        assert!((d.cdf(1) - 2.0 * e2).abs() < 1e-16);
    }

    #[test]
    fn epsilon_range() {
        assert!(exact_distribution(&small(), 0.0).is_err());
        assert!(exact_distribution(&small(), 0.01).is_err());
    }

    #[test]
    fn large_rate_table_is_normalized() {
        let t = poisson_table(1000.0, 1400).unwrap();
        let s: f64 = t.iter().sum();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
        assert!((t[1000] - poisson_pmf(1000.0, 1000).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn strided_convolution() {
        let out = convolve_strided(&[0.5, 0.5], &[0.25, 0.75], 3);
        assert_eq!(out, vec![0.125, 0.125, 0.0, 0.375, 0.375]);
    }
}
