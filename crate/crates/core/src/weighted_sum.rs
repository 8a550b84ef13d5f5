//! The model `S = Σ b_r A(ν_r)`, its matched moments and the scaled Poisson
//! and normal approximations to its tail.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::{bigint_to_u64, ceil_u64, denominator_lcm, floor_u64, int, to_f64, Rational};
use crate::special::{normal_tail, poisson_tail, regularized_gamma_q};

/// Which inequality a tail query uses: `P(X > y)` or `P(X >= y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Strict,
    NonStrict,
}

/// `S = Σ b_r A(ν_r)` with integer weights `b_1 < … < b_R` and positive
/// rational rates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoissonSum {
    weights: Vec<u64>,
    rates: Vec<Rational>,
    scale_b: u64,
}

impl WeightedPoissonSum {
    /// Builds a model, sorting the classes by weight and merging classes that
    /// share a weight (their rates add).
    pub fn new(weights: Vec<u64>, rates: Vec<Rational>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("a model needs at least one class"));
        }
        if weights.len() != rates.len() {
            return Err(Error::validation(format!("{} weights but {} rates", weights.len(), rates.len())));
        }
        let mut merged: BTreeMap<u64, Rational> = BTreeMap::new();
        for (i, (b, nu)) in weights.into_iter().zip(rates).enumerate() {
            if b == 0 {
                return Err(Error::validation(format!("weight of class {} is zero", i + 1)));
            }
            if !nu.is_positive() {
                return Err(Error::validation(format!("rate of class {} must be positive, got {nu}", i + 1)));
            }
            *merged.entry(b).or_insert_with(Rational::zero) += nu;
        }
        let (weights, rates) = merged.into_iter().unzip();
        Ok(Self { weights, rates, scale_b: 1 })
    }

    /// Convenience constructor for integer rates.
    pub fn from_integers(weights: &[u64], rates: &[u64]) -> Result<Self> {
        Self::new(weights.to_vec(), rates.iter().map(|&r| int(r)).collect())
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn rates(&self) -> &[Rational] {
        &self.rates
    }

    pub fn rates_f64(&self) -> Vec<f64> {
        self.rates.iter().map(to_f64).collect()
    }

    pub fn class_count(&self) -> usize {
        self.weights.len()
    }

    /// Factor `B` such that this model describes `B·S` for the original
    /// (possibly fractional-weight) sum. 1 unless built by [`normalize_weights`].
    pub fn scale_b(&self) -> u64 {
        self.scale_b
    }

    pub fn max_rate(&self) -> &Rational {
        self.rates.iter().max().expect("nonempty")
    }

    /// The same weights with every rate multiplied by `factor`.
    pub fn scale_rates(&self, factor: &Rational) -> Result<Self> {
        if !factor.is_positive() {
            return Err(Error::validation(format!("rate factor must be positive, got {factor}")));
        }
        Ok(Self {
            weights: self.weights.clone(),
            rates: self.rates.iter().map(|r| r * factor).collect(),
            scale_b: self.scale_b,
        })
    }
}

/// Turns rational weights into integers by multiplying through by the least
/// common multiple `B` of their denominators. The result models `B·S`.
pub fn normalize_weights(raw_weights: &[Rational], rates: &[Rational]) -> Result<(WeightedPoissonSum, u64)> {
    if raw_weights.is_empty() || rates.is_empty() {
        return Err(Error::validation("weights and rates must be nonempty"));
    }
    if let Some((i, w)) = raw_weights.iter().enumerate().find(|(_, w)| !w.is_positive()) {
        return Err(Error::validation(format!("weight of class {} must be positive, got {w}", i + 1)));
    }
    let b = denominator_lcm(raw_weights);
    let scale = bigint_to_u64(&b, "weight scale B")?;
    let weights = raw_weights
        .iter()
        .map(|w| bigint_to_u64(&(w * Rational::from_integer(b.clone())).to_integer(), "weight"))
        .collect::<Result<Vec<_>>>()?;
    let mut model = WeightedPoissonSum::new(weights, rates.to_vec())?;
    model.scale_b = scale;
    Ok((model, scale))
}

/// Matched moments and lattice parameters of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct SumMoments {
    pub mu: Rational,
    pub sigma_sq: Rational,
    /// `n` in `k = n/m`.
    pub k_num: u64,
    /// `m` in `k = n/m`; the lattice step of the Stein machinery.
    pub k_den: u64,
    pub lambda: Rational,
    pub scale_b: u64,
}

impl SumMoments {
    pub fn k(&self) -> Rational {
        Rational::new(BigInt::from(self.k_num), BigInt::from(self.k_den))
    }

    pub fn mu_f64(&self) -> f64 {
        to_f64(&self.mu)
    }

    pub fn sigma_sq_f64(&self) -> f64 {
        to_f64(&self.sigma_sq)
    }

    pub fn lambda_f64(&self) -> f64 {
        to_f64(&self.lambda)
    }

    /// Mean of `(1/k) A_λ`, which is `λ/k`.
    pub fn approx_mean(&self) -> Rational {
        &self.lambda / self.k()
    }

    /// Variance of `(1/k) A_λ`, which is `λ/k²`.
    pub fn approx_variance(&self) -> Rational {
        let k = self.k();
        &self.lambda / (&k * &k)
    }
}

pub fn moments(model: &WeightedPoissonSum) -> SumMoments {
    let mut mu = Rational::zero();
    let mut sigma_sq = Rational::zero();
    for (&b, nu) in model.weights.iter().zip(&model.rates) {
        let b = int(b);
        mu += &b * nu;
        sigma_sq += &b * &b * nu;
    }
    let k = &mu / &sigma_sq;
    let lambda = &k * &mu;
    // k is already reduced; its parts fit in u64 whenever the model's integers do.
    let k_num = k.numer().to_u64().expect("k numerator fits in 64 bits");
    let k_den = k.denom().to_u64().expect("k denominator fits in 64 bits");
    debug_assert!(k.numer().gcd(k.denom()).is_one());
    SumMoments { mu, sigma_sq, k_num, k_den, lambda, scale_b: model.scale_b }
}

/// How the scaled Poisson tail is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    /// `P(A_λ > ky)` or `P(A_λ >= ky)` on the integers.
    Discrete,
    /// `1 − Q(ky, λ)`, the incomplete-gamma relaxation.
    Continuous,
}

/// Approximates `P(S > y)` (strict) or `P(S >= y)` by the matching tail of
/// `(1/k) A_λ`. Continuous mode ignores `tail` since the relaxation has no
/// atoms.
pub fn scaled_poisson_tail(moments: &SumMoments, y: &Rational, mode: TailMode, tail: Tail) -> Result<f64> {
    if y.is_negative() {
        return Err(Error::domain(format!("tail level must be nonnegative, got {y}")));
    }
    let lambda = moments.lambda_f64();
    let ky = moments.k() * y;
    match mode {
        TailMode::Discrete => {
            let threshold = match tail {
                Tail::Strict => floor_u64(&ky)? + 1,
                Tail::NonStrict => ceil_u64(&ky)?,
            };
            poisson_tail(lambda, threshold)
        }
        TailMode::Continuous => {
            if ky.is_zero() {
                return Err(Error::domain("continuous mode needs ky > 0"));
            }
            Ok(1.0 - regularized_gamma_q(to_f64(&ky), lambda)?)
        }
    }
}

/// `P(Z > y)` for `Z ~ N(μ, σ²)`. With `continuity_correction` the point is
/// shifted to `y + 1/2`.
pub fn normal_approx_tail(moments: &SumMoments, y: f64, continuity_correction: bool) -> Result<f64> {
    let point = if continuity_correction { y + 0.5 } else { y };
    normal_tail(moments.mu_f64(), moments.sigma_sq_f64(), point)
}
