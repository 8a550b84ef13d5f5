//! Size-bias coupling for `W` and the exact decomposition of the tail
//! difference `P(nW >= my) − P(mA_λ >= my)`.
//!
//! An index `I` is drawn with `P(I = i) = p_i/μ`; the trial behind it and
//! all its copies are forced to 1, giving `W^s` with
//! `λm E[f(nW^s)] = E[nW f(nW)]`. The increment `Δ = nW + m − nW^s` is `m`
//! when the chosen trial was already 1 and `m − nb_r` when a class-`r`
//! trial was 0.

use num_traits::{One, Zero};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;

use crate::bernoulli::{w_distribution, w_distribution_without_trial, BernoulliScheme};
use crate::error::{Error, Result};
use crate::lattice::LatticeDistribution;
use crate::rational::{int, to_f64, Rational};
use crate::stein::{solve_stein, SteinContext, SteinSolutionTable};
use crate::weighted_sum::{moments, SumMoments, WeightedPoissonSum};

/// Largest `R·M*` accepted by exhaustive enumeration.
pub const MAX_ENUMERATED_TRIALS: u64 = 20;

/// Samples per Monte Carlo work unit; fixed so results do not depend on the
/// thread count.
const CHUNK: u64 = 1 << 16;

/// `δ_r = b_r ν_r / μ`.
pub fn class_deltas(model: &WeightedPoissonSum, moments: &SumMoments) -> Vec<Rational> {
    model.weights().iter().zip(model.rates()).map(|(&b, nu)| int(b) * nu / &moments.mu).collect()
}

fn check_consistent(scheme: &BernoulliScheme, moments: &SumMoments) -> Result<()> {
    if &self::moments(scheme.model()) != moments {
        return Err(Error::validation("moments do not belong to the scheme's model"));
    }
    Ok(())
}

/// Law of `Δ`. `support[0] = m` and `support[r+1] = m − n b_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaDistribution {
    pub support: Vec<i64>,
    pub probs: Vec<Rational>,
    pub delta_bounds: Vec<Rational>,
}

impl DeltaDistribution {
    pub fn total(&self) -> Rational {
        self.probs.iter().cloned().sum()
    }
}

pub fn delta_distribution(scheme: &BernoulliScheme, moments: &SumMoments) -> Result<DeltaDistribution> {
    check_consistent(scheme, moments)?;
    let m = moments.k_den as i64;
    let n = moments.k_num as i64;
    let mut support = vec![m];
    let mut probs = vec![Rational::zero()];
    for (p, &b) in scheme.class_probs().iter().zip(scheme.replication()) {
        // b_r M* indices, each chosen with p/μ.
        let chosen = int(b * scheme.trials_per_class()) * p / &moments.mu;
        probs[0] += &chosen * p;
        support.push(m - n * b as i64);
        probs.push(&chosen * (Rational::one() - p));
    }
    Ok(DeltaDistribution { support, probs, delta_bounds: class_deltas(scheme.model(), moments) })
}

/// Both sides `(λm E[f(nW^s)], E[nW f(nW)])` by enumerating all `2^{R·M*}`
/// trial outcomes.
pub fn size_bias_check_exact(
    scheme: &BernoulliScheme,
    moments: &SumMoments,
    f: impl Fn(u64) -> f64,
) -> Result<(f64, f64)> {
    check_consistent(scheme, moments)?;
    let trials = scheme.underlying_trials();
    if trials > MAX_ENUMERATED_TRIALS {
        return Err(Error::TooLarge(format!(
            "enumeration needs R·M* <= {MAX_ENUMERATED_TRIALS}, got {trials}; use size_bias_sample"
        )));
    }
    let per_class = scheme.trials_per_class() as usize;
    let probs = scheme.class_probs_f64();
    let weights = scheme.replication();
    let class_of = |t: usize| t / per_class;
    let n = moments.k_num;
    let mu = moments.mu_f64();
    let lm = moments.lambda_f64() * moments.k_den as f64;
    // Most outcomes carry tiny mass; summing them smallest first keeps them
    // from being rounded away against the running total.
    let mut lhs_terms = Vec::with_capacity(1 << trials);
    let mut rhs_terms = Vec::with_capacity(1 << trials);
    for outcome in 0u64..(1 << trials) {
        let mut prob = 1.0;
        let mut w = 0;
        for t in 0..trials as usize {
            let r = class_of(t);
            if outcome >> t & 1 == 1 {
                prob *= probs[r];
                w += weights[r];
            } else {
                prob *= 1.0 - probs[r];
            }
        }
        if prob == 0.0 {
            continue;
        }
        rhs_terms.push(prob * (n * w) as f64 * f(n * w));
        let mut lhs = 0.0;
        for t in 0..trials as usize {
            let r = class_of(t);
            let x = outcome >> t & 1;
            let ws = w - weights[r] * x + weights[r];
            // The trial's b_r copies are each chosen with probability p_r/μ.
            lhs += prob * weights[r] as f64 * probs[r] / mu * f(n * ws);
        }
        lhs_terms.push(lhs);
    }
    Ok((lm * sum_by_magnitude(lhs_terms), sum_by_magnitude(rhs_terms)))
}

/// Monte Carlo estimates of both coupling sides with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
}

impl SampleEstimate {
    /// `|lhs − rhs|` in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let se = self.lhs_stderr.hypot(self.rhs_stderr);
        if se == 0.0 {
            if self.lhs == self.rhs {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.lhs - self.rhs).abs() / se
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Moments2 {
    sum: f64,
    sum_sq: f64,
}

impl Moments2 {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(self, other: Self) -> Self {
        Self { sum: self.sum + other.sum, sum_sq: self.sum_sq + other.sum_sq }
    }

    fn mean_stderr(self, count: u64) -> (f64, f64) {
        let n = count as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Draws `W^s` by picking a class with probability `δ_r`, forcing one of its
/// trials to 1 and sampling the rest, and independently draws `W`.
/// Deterministic for a given `(samples, seed)`: work is split into fixed
/// chunks, chunk `c` uses stream `c` of a ChaCha8 generator seeded by
/// `seed`, and chunk results are merged in order.
pub fn size_bias_sample(
    scheme: &BernoulliScheme,
    moments: &SumMoments,
    f: impl Fn(u64) -> f64 + Sync,
    samples: u64,
    seed: u64,
) -> Result<SampleEstimate> {
    check_consistent(scheme, moments)?;
    if samples < 2 {
        return Err(Error::validation("need at least two samples"));
    }
    let m_star = scheme.trials_per_class();
    let probs = scheme.class_probs_f64();
    let weights = scheme.replication().to_vec();
    let deltas: Vec<f64> = class_deltas(scheme.model(), moments).iter().map(to_f64).collect();
    let pick = WeightedIndex::new(&deltas).map_err(|e| Error::validation(e.to_string()))?;
    let full = probs
        .iter()
        .map(|&p| Binomial::new(m_star, p))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::validation(e.to_string()))?;
    let reduced = probs
        .iter()
        .map(|&p| Binomial::new(m_star - 1, p))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::validation(e.to_string()))?;
    let n = moments.k_num;
    let lm = moments.lambda_f64() * moments.k_den as f64;
    let chunks = samples.div_ceil(CHUNK);

    let parts: Vec<(Moments2, Moments2)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = CHUNK.min(samples - c * CHUNK);
            let mut lhs = Moments2::default();
            let mut rhs = Moments2::default();
            for _ in 0..count {
                let r = pick.sample(&mut rng);
                let mut ws = weights[r];
                for (s, &b) in weights.iter().enumerate() {
                    let draw = if s == r { reduced[s].sample(&mut rng) } else { full[s].sample(&mut rng) };
                    ws += b * draw;
                }
                lhs.push(lm * f(n * ws));
                let w: u64 = weights.iter().zip(&full).map(|(&b, d)| b * d.sample(&mut rng)).sum();
                rhs.push((n * w) as f64 * f(n * w));
            }
            (lhs, rhs)
        })
        .collect();

    let (lhs, rhs) =
        parts.into_iter().fold((Moments2::default(), Moments2::default()), |(a, b), (c, d)| (a.merge(c), b.merge(d)));
    let (lhs, lhs_stderr) = lhs.mean_stderr(samples);
    let (rhs, rhs_stderr) = rhs.mean_stderr(samples);
    Ok(SampleEstimate { lhs, rhs, lhs_stderr, rhs_stderr })
}

/// Joint law of `(W, Δ)` through leave-one-trial-out laws: removing one
/// class-`r` trial gives `W_{−r}`, and
/// `P(W = w, Δ = m − nb_r) = (b_r M* p_r/μ)(1 − p_r) P(W_{−r} = w)`,
/// `P(W = w, Δ = m) = Σ_r (b_r M* p_r/μ) p_r P(W_{−r} = w − b_r)`.
#[derive(Debug, Clone)]
pub struct JointDelta {
    pub w: LatticeDistribution,
    pub without: Vec<LatticeDistribution>,
    /// `b_r M* p_r / μ`, the chance the chosen index lies in class `r`.
    pub class_weight: Vec<f64>,
    pub probs: Vec<f64>,
    pub weights: Vec<u64>,
}

impl JointDelta {
    pub fn new(scheme: &BernoulliScheme, moments: &SumMoments) -> Result<Self> {
        check_consistent(scheme, moments)?;
        let without =
            (0..scheme.class_count()).map(|r| w_distribution_without_trial(scheme, r)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            w: w_distribution(scheme, None)?,
            without,
            class_weight: class_deltas(scheme.model(), moments).iter().map(to_f64).collect(),
            probs: scheme.class_probs_f64(),
            weights: scheme.replication().to_vec(),
        })
    }

    /// `P(W = w, Δ = m − nb_r)`.
    pub fn down(&self, r: usize, w: u64) -> f64 {
        self.class_weight[r] * (1.0 - self.probs[r]) * self.without[r].prob(w)
    }

    /// Class-`r` part of `P(W = w, Δ = m)`.
    pub fn up(&self, r: usize, w: u64) -> f64 {
        if w < self.weights[r] {
            return 0.0;
        }
        self.class_weight[r] * self.probs[r] * self.without[r].prob(w - self.weights[r])
    }
}

/// `P(Δ = m − nb_r | W = w)` next to its bound `δ_r`, for every class.
pub fn conditional_delta_bound(scheme: &BernoulliScheme, moments: &SumMoments, w: u64) -> Result<Vec<(f64, Rational)>> {
    let joint = JointDelta::new(scheme, moments)?;
    let pw = joint.w.prob(w);
    if pw <= 0.0 {
        return Err(Error::domain(format!("P(W = {w}) is zero")));
    }
    Ok(class_deltas(scheme.model(), moments).into_iter().enumerate().map(|(r, d)| (joint.down(r, w) / pw, d)).collect())
}

/// `H_0, …, H_R` and the tail difference they add up to.
#[derive(Debug, Clone, PartialEq)]
pub struct HDecomposition {
    pub h: Vec<f64>,
    /// `P(nW >= my) − P(A_λ >= y)`.
    pub tail_diff: f64,
    pub closure_error: f64,
}

impl HDecomposition {
    pub fn sum(&self) -> f64 {
        self.h.iter().sum()
    }
}

/// Smallest table end that [`h_decomposition`] accepts for this scheme.
pub fn required_table_end(scheme: &BernoulliScheme, moments: &SumMoments) -> Result<u64> {
    let w_max = w_distribution(scheme, None)?.support_max();
    Ok(moments.k_num * w_max + moments.k_den)
}

/// `f_h` table large enough for [`h_decomposition`] at level `y`.
pub fn coupling_table(
    scheme: &BernoulliScheme,
    moments: &SumMoments,
    y: u64,
    series_tol: f64,
) -> Result<SteinSolutionTable> {
    let ctx = SteinContext::from_moments(moments, y, series_tol)?;
    let end = required_table_end(scheme, moments)?.max(ctx.m() * (ctx.y() + 10));
    solve_stein(&ctx, end, true)
}

/// `H_0 = λm Σ_w [f(nw+m) − f(nw)] P(W=w, Δ=m)` and
/// `H_r = λm Σ_w [f(nw+m) − f(nw+nb_r)] P(W=w, Δ=m−nb_r)`.
pub fn h_decomposition(
    scheme: &BernoulliScheme,
    moments: &SumMoments,
    table: &SteinSolutionTable,
) -> Result<HDecomposition> {
    let ctx = table.context();
    if ctx.lambda() != &moments.lambda || ctx.m() != moments.k_den || ctx.n() != moments.k_num {
        return Err(Error::validation("Stein table was built for different moments"));
    }
    let joint = JointDelta::new(scheme, moments)?;
    let n = moments.k_num;
    let m = moments.k_den;
    let end = n * joint.w.support_max() + m;
    if !table.includes_off_lattice() || !table.covers(end) {
        return Err(Error::validation(format!("Stein table must hold every integer up to {end}; see coupling_table")));
    }
    let lm = ctx.operator().lambda_m();
    let f = |w: u64| table.value(w).expect("coverage checked");
    let classes = scheme.class_count();
    let mut h0 = Vec::new();
    let mut hr: Vec<Vec<f64>> = vec![Vec::new(); classes];
    for w in 0..=joint.w.support_max() {
        let nw = n * w;
        let up: f64 = (0..classes).map(|r| joint.up(r, w)).sum();
        if up > 0.0 {
            h0.push(lm * (f(nw + m) - f(nw)) * up);
        }
        for (r, terms) in hr.iter_mut().enumerate() {
            let down = joint.down(r, w);
            if down > 0.0 {
                terms.push(lm * (f(nw + m) - f(nw + n * joint.weights[r])) * down);
            }
        }
    }
    let mut h = vec![sum_by_magnitude(h0)];
    h.extend(hr.into_iter().map(sum_by_magnitude));
    let threshold = (ctx.my()).div_ceil(n);
    let tail_diff = joint.w.tail_at_least(threshold) - table.tail_prob();
    let closure_error = (h.iter().sum::<f64>() - tail_diff).abs();
    Ok(HDecomposition { h, tail_diff, closure_error })
}

/// Smallest-first Neumaier summation.
fn sum_by_magnitude(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut sum = 0.0_f64;
    let mut carry = 0.0;
    for t in terms {
        let next = sum + t;
        carry += if sum.abs() >= t.abs() { (sum - next) + t } else { (t - next) + sum };
        sum = next;
    }
    sum + carry
}

/// Right side of the two-class bound `|H_2| <= δ_2(K_2 − 2)|H_0| + (δ_2/δ_1)|H_1|`.
pub fn two_class_h2_bound(h: &HDecomposition, deltas: &[Rational], k2: u64) -> Result<f64> {
    if h.h.len() != 3 || deltas.len() != 2 {
        return Err(Error::validation("the H_2 bound is stated for two classes"));
    }
    let d1 = to_f64(&deltas[0]);
    let d2 = to_f64(&deltas[1]);
    Ok(d2 * (k2 as f64 - 2.0) * h.h[0].abs() + d2 / d1 * h.h[1].abs())
}

/// `E[g_l(min(X, my))]` for `X = nW` and for `X = mA_λ`, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlExpectation {
    pub l: u64,
    pub coupled: f64,
    pub poisson: f64,
    pub ratio: f64,
}

/// Compares `E[g_l(nW ∧ my)]` with `E[g_l(mA_λ ∧ my)]`, using `g_l := 0`
/// below `m` and the raw difference `(f(my) − f(my+l))/P` at `my`.
pub fn g_l_expectation_ratio(
    w_dist: &LatticeDistribution,
    table: &SteinSolutionTable,
    l: u64,
) -> Result<GlExpectation> {
    let ctx = table.context();
    let (m, n, my) = (ctx.m(), ctx.n(), ctx.my());
    if l == 0 || l > m {
        return Err(Error::domain(format!("l must lie in 1..={m}, got {l}")));
    }
    if !table.includes_off_lattice() || !table.covers(my + l) {
        return Err(Error::validation("Stein table must hold every integer up to my + l"));
    }
    let p = table.tail_prob();
    let g = |v: u64| -> f64 {
        let v = v.min(my);
        if v < m {
            0.0
        } else {
            (table.value(v).expect("covered") - table.value(v + l).expect("covered")) / p
        }
    };
    let coupled: f64 = w_dist.pmf().iter().enumerate().map(|(w, q)| q * g(n * w as u64)).sum();
    let lambda = ctx.lambda_f64();
    let trunc = crate::stein::default_truncation(lambda)?.max(ctx.y());
    let pois = crate::lattice::poisson_table(lambda, trunc)?;
    let poisson: f64 = pois.iter().enumerate().map(|(j, q)| q * g(m * j as u64)).sum();
    Ok(GlExpectation { l, coupled, poisson, ratio: coupled / poisson })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli::build_scheme;
    use crate::rational::frac;

    fn small() -> WeightedPoissonSum {
        WeightedPoissonSum::from_integers(&[1, 2], &[1, 1]).unwrap()
    }

    #[test]
    fn delta_law_small_model() {
        let model = small();
        let mom = moments(&model);
        let d = delta_distribution(&build_scheme(&model, 100).unwrap(), &mom).unwrap();
        assert_eq!(d.support, vec![5, 2, -1]);
        assert_eq!(d.probs, vec![frac(1, 100), frac(33, 100), frac(66, 100)]);
        assert_eq!(d.total(), Rational::one());
        assert_eq!(d.delta_bounds.iter().cloned().sum::<Rational>(), Rational::one());
    }

    #[test]
    fn delta_law_single_class() {
        let model = WeightedPoissonSum::from_integers(&[1], &[3]).unwrap();
        let mom = moments(&model);
        let d = delta_distribution(&build_scheme(&model, 8).unwrap(), &mom).unwrap();
        assert_eq!(d.support, vec![1, 0]);
        assert_eq!(d.probs, vec![frac(3, 8), frac(5, 8)]);
    }

    #[test]
    fn exact_coupling_identity() {
        let model = small();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 2).unwrap();
        let (l, r) = size_bias_check_exact(&scheme, &mom, |x| x as f64).unwrap();
        assert!((l - r).abs() < 1e-12, "{l} {r}");
        let (l, r) = size_bias_check_exact(&scheme, &mom, |x| if x >= 5 { 1.0 } else { 0.0 }).unwrap();
        assert!((l - r).abs() < 1e-12, "{l} {r}");
    }

    #[test]
    fn exact_coupling_single_trial() {
        let model = WeightedPoissonSum::new(vec![1], vec![frac(3, 10)]).unwrap();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 1).unwrap();
        let f = |x: u64| (x as f64 + 1.0).ln();
        let (l, r) = size_bias_check_exact(&scheme, &mom, f).unwrap();
        assert!((l - 0.3 * f(1)).abs() < 1e-15);
        assert!((r - 0.3 * f(1)).abs() < 1e-15);
    }

    #[test]
    fn enumeration_refuses_large_instances() {
        let model = small();
        let scheme = build_scheme(&model, 11).unwrap();
        assert!(matches!(size_bias_check_exact(&scheme, &moments(&model), |x| x as f64), Err(Error::TooLarge(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_degenerate_case_exact() {
        let model = WeightedPoissonSum::from_integers(&[1, 3], &[2, 2]).unwrap();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 2).unwrap();
        let est = size_bias_sample(&scheme, &mom, |x| x as f64, 10_000, 3).unwrap();
        assert_eq!(est.lhs, est.rhs);
        assert_eq!(est.lhs_stderr, 0.0);
        let small_model = small();
        let sm = moments(&small_model);
        let s = build_scheme(&small_model, 20).unwrap();
        let a = size_bias_sample(&s, &sm, |x| x.min(10) as f64, 20_000, 9).unwrap();
        let b = size_bias_sample(&s, &sm, |x| x.min(10) as f64, 20_000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.z_score() < 5.0);
    }

    #[test]
    fn conditional_bound_at_zero_is_tight() {
        let model = small();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 4).unwrap();
        for (c, d) in conditional_delta_bound(&scheme, &mom, 0).unwrap() {
            assert!((c - to_f64(&d)).abs() < 1e-15);
        }
        for (c, d) in conditional_delta_bound(&scheme, &mom, 3).unwrap() {
            assert!(c <= to_f64(&d) + 1e-15);
        }
        assert!(conditional_delta_bound(&scheme, &mom, 100).is_err());
    }

    #[test]
    fn h_closure_small_model() {
        let model = small();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 50).unwrap();
        let table = coupling_table(&scheme, &mom, 5, 1e-10).unwrap();
        let h = h_decomposition(&scheme, &mom, &table).unwrap();
        // 60-digit reference values.
        let reference = [-0.001_718_726_629_315_416, -0.017_680_319_835_422_675, 0.000_829_526_221_150_427_4];
        for (got, want) in h.h.iter().zip(reference) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((h.tail_diff - -0.018_569_520_243_587_69).abs() < 1e-12);
        assert!(h.closure_error < 1e-12);
        let bound = two_class_h2_bound(&h, &class_deltas(&model, &mom), 2).unwrap();
        assert!(h.h[2].abs() <= bound);
    }

    #[test]
    fn h_closure_single_class() {
        let model = WeightedPoissonSum::from_integers(&[1], &[3]).unwrap();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 50).unwrap();
        let table = coupling_table(&scheme, &mom, 5, 1e-10).unwrap();
        let h = h_decomposition(&scheme, &mom, &table).unwrap();
        assert!((h.h[0] - -0.005_332_802_335_877_09).abs() < 1e-12);
        assert!(h.h[1].abs() < 1e-15);
        assert!(h.closure_error < 1e-10);
    }

    #[test]
    fn h_decomposition_rejects_short_table() {
        let model = small();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 50).unwrap();
        let ctx = SteinContext::from_moments(&mom, 5, 1e-10).unwrap();
        let table = solve_stein(&ctx, 75, true).unwrap();
        assert!(matches!(h_decomposition(&scheme, &mom, &table), Err(Error::Validation(_))));
    }

    #[test]
    fn g_l_ratio_is_finite() {
        let model = small();
        let mom = moments(&model);
        let scheme = build_scheme(&model, 50).unwrap();
        let table = coupling_table(&scheme, &mom, 5, 1e-10).unwrap();
        let w = w_distribution(&scheme, None).unwrap();
        for l in 1..=5 {
            let e = g_l_expectation_ratio(&w, &table, l).unwrap();
            assert!(e.ratio.is_finite() && e.poisson != 0.0, "{e:?}");
        }
    }
}
