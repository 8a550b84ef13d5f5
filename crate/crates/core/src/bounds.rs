//! Parameters and value of the moderate-deviation bound, the tail-ratio
//! supremum `η`, and an empirical estimate of the bound's constant.

use crate::bernoulli::{w_distribution, BernoulliScheme};
use crate::coupling::class_deltas;
use crate::error::{Error, Result};
use crate::lattice::LatticeDistribution;
use crate::rational::{ceil_u64, int, to_f64, Rational};
use crate::special::poisson_tail;
use crate::weighted_sum::{SumMoments, WeightedPoissonSum};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    /// `δ_r = b_r ν_r / μ`.
    pub deltas: Vec<Rational>,
    /// `K_r = ⌈k b_r⌉`.
    pub k: Vec<u64>,
    /// Largest 1-based `r` with `n b_r <= m`, or 0 if there is none.
    pub r_star: usize,
    pub lambda: Rational,
}

pub fn bound_params(model: &WeightedPoissonSum, moments: &SumMoments) -> BoundParams {
    let (n, m) = (moments.k_num, moments.k_den);
    let k = model.weights().iter().map(|&b| (n * b).div_ceil(m)).collect();
    let r_star = model.weights().iter().take_while(|&&b| n * b <= m).count();
    BoundParams { deltas: class_deltas(model, moments), k, r_star, lambda: moments.lambda.clone() }
}

impl BoundParams {
    /// `1 + Σ_{r > r*} (K_r − 2) δ_r`.
    pub fn multiplier(&self) -> f64 {
        let extra: Rational = self.k[self.r_star..]
            .iter()
            .zip(&self.deltas[self.r_star..])
            .map(|(&k, d)| (Rational::from_integer((k as i64 - 2).into())) * d)
            .sum();
        to_f64(&(int(1) + extra))
    }

    /// `(1 + (y − λ)²/(2λ))·multiplier + λ(1 + ln y)` at a real level.
    pub fn bracket_at(&self, y: f64) -> f64 {
        let lambda = to_f64(&self.lambda);
        let d = y - lambda;
        (1.0 + d * d / (2.0 * lambda)) * self.multiplier() + lambda * (1.0 + y.ln())
    }
}

/// The bracket at an integer level `y >= λ`.
pub fn moderate_deviation_bound(params: &BoundParams, y: u64) -> Result<f64> {
    if y == 0 || int(y) < params.lambda {
        return Err(Error::domain(format!("the bound needs an integer y >= λ = {}, got {y}", params.lambda)));
    }
    Ok(params.bracket_at(y as f64))
}

/// `P(nW >= mr) = P(W >= ⌈mr/n⌉)`.
pub fn lattice_tail(w_dist: &LatticeDistribution, moments: &SumMoments, r: u64) -> f64 {
    w_dist.tail_at_least((moments.k_den * r).div_ceil(moments.k_num))
}

/// Supremum of `P(nW >= mr) / P(mA_λ >= mr)` and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eta {
    pub value: f64,
    pub argmax: u64,
}

fn eta_over(w_dist: &LatticeDistribution, moments: &SumMoments, from: u64, y: u64) -> Result<Eta> {
    let lambda = moments.lambda_f64();
    let mut best = Eta { value: f64::NEG_INFINITY, argmax: from };
    for r in from..=y {
        let denom = poisson_tail(lambda, r)?;
        if denom <= 0.0 {
            return Err(Error::range(format!("P(A_λ >= {r}) underflows")));
        }
        let ratio = lattice_tail(w_dist, moments, r) / denom;
        if ratio > best.value {
            best = Eta { value: ratio, argmax: r };
        }
    }
    Ok(best)
}

/// `η_{my}`: the supremum over integers `r ∈ [⌈λ⌉, y]`.
pub fn eta(w_dist: &LatticeDistribution, moments: &SumMoments, y: u64) -> Result<Eta> {
    let from = ceil_u64(&moments.lambda)?;
    if y < from {
        return Err(Error::domain(format!("η needs y >= ⌈λ⌉ = {from}, got {y}")));
    }
    eta_over(w_dist, moments, from, y)
}

/// The same supremum over `r ∈ [0, y]`.
pub fn eta_full_range(w_dist: &LatticeDistribution, moments: &SumMoments, y: u64) -> Result<Eta> {
    eta_over(w_dist, moments, 0, y)
}

/// One grid point of [`empirical_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRow {
    pub y: u64,
    /// `|P(nW >= my)/P(mA_λ >= my) − 1|`.
    pub deviation: f64,
    pub bracket: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalConstant {
    /// `max_y deviation / bracket`.
    pub c_hat: f64,
    pub argmax: u64,
    /// The bracket values themselves: where a side condition `bracket < c`
    /// would bind depends on the unknown `c`.
    pub rows: Vec<ConstantRow>,
}

/// Observed constant of the bound over integer levels `y_from..=y_to`.
pub fn empirical_constant(
    model: &WeightedPoissonSum,
    moments: &SumMoments,
    scheme: &BernoulliScheme,
    y_from: u64,
    y_to: u64,
) -> Result<EmpiricalConstant> {
    if y_from > y_to {
        return Err(Error::validation(format!("empty range {y_from}..={y_to}")));
    }
    let params = bound_params(model, moments);
    let w_dist = w_distribution(scheme, None)?;
    let lambda = moments.lambda_f64();
    let mut rows = Vec::new();
    let mut c_hat = 0.0_f64;
    let mut argmax = y_from;
    for y in y_from..=y_to {
        let bracket = moderate_deviation_bound(&params, y)?;
        let ratio = lattice_tail(&w_dist, moments, y) / poisson_tail(lambda, y)?;
        let deviation = (ratio - 1.0).abs();
        if deviation / bracket > c_hat {
            c_hat = deviation / bracket;
            argmax = y;
        }
        rows.push(ConstantRow { y, deviation, bracket });
    }
    Ok(EmpiricalConstant { c_hat, argmax, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;
    use crate::weighted_sum::moments;

    fn reference_model() -> WeightedPoissonSum {
        WeightedPoissonSum::from_integers(&[1, 10], &[100, 30]).unwrap()
    }

    #[test]
    fn reference_parameters() {
        let model = reference_model();
        let p = bound_params(&model, &moments(&model));
        assert_eq!(p.deltas, vec![frac(1, 4), frac(3, 4)]);
        assert_eq!(p.k, vec![1, 2]);
        assert_eq!(p.r_star, 1);
        assert_eq!(p.multiplier(), 1.0);
    }

    #[test]
    fn small_and_single_parameters() {
        let model = WeightedPoissonSum::from_integers(&[1, 2], &[1, 1]).unwrap();
        let p = bound_params(&model, &moments(&model));
        assert_eq!(p.k, vec![1, 2]);
        assert_eq!(p.r_star, 1);
        let single = WeightedPoissonSum::from_integers(&[1], &[4]).unwrap();
        let p = bound_params(&single, &moments(&single));
        assert_eq!((p.deltas.clone(), p.k.clone(), p.r_star), (vec![int(1)], vec![1], 1));
        assert_eq!(p.multiplier(), 1.0);
        // y = λ: only the multiplier and the log term remain.
        let b = moderate_deviation_bound(&p, 4).unwrap();
        assert!((b - (1.0 + 4.0 * (1.0 + 4f64.ln()))).abs() < 1e-12);
    }

    #[test]
    fn bracket_at_sixty() {
        let model = reference_model();
        let p = bound_params(&model, &moments(&model));
        let b = moderate_deviation_bound(&p, 60).unwrap();
        // 50-digit reference.
        assert!((b - 264.615_364_501_785_84).abs() < 1e-9, "{b}");
        assert!(moderate_deviation_bound(&p, 51).is_err());
    }

    #[test]
    fn multiplier_counts_multi_cell_classes() {
        // μ = 140, σ² = 1700, k = 7/85: the second class spans K_2 = 4 cells.
        let model = WeightedPoissonSum::from_integers(&[1, 40], &[100, 1]).unwrap();
        let mom = moments(&model);
        assert_eq!((mom.k_num, mom.k_den), (7, 85));
        let p = bound_params(&model, &mom);
        assert_eq!((p.k.clone(), p.r_star), (vec![1, 4], 1));
        assert_eq!(p.deltas[1], frac(2, 7));
        assert!((p.multiplier() - (1.0 + 2.0 * 2.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn eta_single_point() {
        let model = WeightedPoissonSum::from_integers(&[1, 2], &[1, 1]).unwrap();
        let mom = moments(&model);
        let scheme = crate::bernoulli::build_scheme(&model, 100).unwrap();
        let w = w_distribution(&scheme, None).unwrap();
        let e = eta(&w, &mom, 2).unwrap();
        assert_eq!(e.argmax, 2);
        let direct = lattice_tail(&w, &mom, 2) / poisson_tail(1.8, 2).unwrap();
        assert_eq!(e.value, direct);
        let e6 = eta(&w, &mom, 6).unwrap();
        assert!(e6.value.is_finite() && e6.value >= e.value);
        assert!(eta(&w, &mom, 1).is_err());
        assert!(eta_full_range(&w, &mom, 6).unwrap().value >= e6.value);
    }
}
