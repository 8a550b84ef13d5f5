use proptest::prelude::*;

use scaled_poisson::bounds::bound_params;
use scaled_poisson::experiments::{plateau_runs, read_rows, write_rows, ExperimentRow};
use scaled_poisson::rational::{frac, int, parse_rational, Rational};
use scaled_poisson::special::{poisson_cdf, poisson_tail};
use scaled_poisson::stein::{factorial_sandwich, stein_apply, LatticeOperator};
use scaled_poisson::{exact_distribution, moments, Tail, WeightedPoissonSum};

fn model_strategy() -> impl Strategy<Value = WeightedPoissonSum> {
    prop::collection::vec((1u64..=20, 1i64..=50, 1i64..=4), 1..=4).prop_map(|classes| {
        let (weights, rates): (Vec<u64>, Vec<Rational>) =
            classes.into_iter().map(|(b, num, den)| (b, frac(num, den))).unzip();
        WeightedPoissonSum::new(weights, rates).unwrap()
    })
}

fn float_field() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        1 => Just(f64::NAN),
        1 => 1e-300f64..1e-200,
    ]
}

fn row_strategy() -> impl Strategy<Value = ExperimentRow> {
    ((any::<u64>(), 1u64..100, any::<u64>(), any::<bool>()), prop::collection::vec(float_field(), 7)).prop_map(
        |((y, scale, plateau_id, underflow), f)| ExperimentRow {
            y,
            scale,
            exact_tail: f[0],
            scaled_tail: f[1],
            normal_tail: f[2],
            rel_error: f[3],
            abs_error_poisson: f[4],
            abs_error_normal: f[5],
            bound_bracket: f[6],
            plateau_id,
            underflow,
        },
    )
}

fn same_bits(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn approximation_matches_both_moments(model in model_strategy()) {
        let m = moments(&model);
        prop_assert_eq!(m.approx_mean(), m.mu.clone());
        prop_assert_eq!(m.approx_variance(), m.sigma_sq.clone());
    }

    #[test]
    fn bound_parameters_survive_rate_scaling(model in model_strategy(), n in 1u64..50) {
        let scaled = model.scale_rates(&int(n)).unwrap();
        let (a, b) = (moments(&model), moments(&scaled));
        prop_assert_eq!((a.k_num, a.k_den), (b.k_num, b.k_den));
        let (pa, pb) = (bound_params(&model, &a), bound_params(&scaled, &b));
        prop_assert_eq!(&pa.deltas, &pb.deltas);
        prop_assert_eq!(&pa.k, &pb.k);
        prop_assert_eq!(pa.r_star, pb.r_star);
        prop_assert_eq!(pb.lambda, pa.lambda * int(n));
        prop_assert_eq!(pa.deltas.iter().cloned().sum::<Rational>(), int(1));
    }

    #[test]
    fn bracket_increases_above_lambda(model in model_strategy(), steps in prop::collection::vec(0.01f64..5.0, 1..20)) {
        let m = moments(&model);
        let p = bound_params(&model, &m);
        let mut y = m.lambda_f64().max(1.0);
        let mut prev = p.bracket_at(y);
        for s in steps {
            y += s;
            let next = p.bracket_at(y);
            prop_assert!(next > prev);
            prev = next;
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact(rows in prop::collection::vec(row_strategy(), 0..20), with_scale in any::<bool>()) {
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows, with_scale).unwrap();
        let back = read_rows(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!((a.y, a.plateau_id, a.underflow), (b.y, b.plateau_id, b.underflow));
            prop_assert_eq!(b.scale, if with_scale { a.scale } else { 1 });
            for (x, z) in [
                (a.exact_tail, b.exact_tail),
                (a.scaled_tail, b.scaled_tail),
                (a.normal_tail, b.normal_tail),
                (a.rel_error, b.rel_error),
                (a.abs_error_poisson, b.abs_error_poisson),
                (a.abs_error_normal, b.abs_error_normal),
                (a.bound_bracket, b.bound_bracket),
            ] {
                prop_assert!(same_bits(x, z), "{} vs {}", x, z);
            }
        }
    }

    #[test]
    fn factorial_products_are_sandwiched(w in 1u64..5000, m in 1u64..64, j in 0u64..40) {
        let (lo, mid, hi) = factorial_sandwich(w, m, j);
        prop_assert!(lo <= mid && mid <= hi);
    }

    #[test]
    fn plateau_lengths_follow_k(n in 1u64..10, extra in 1u64..40, start in 0u64..1000) {
        let m = n + extra;
        let g = num_integer::gcd(n, m);
        let (n, m) = (n / g, m / g);
        let rows: Vec<ExperimentRow> = (start..start + 10 * m)
            .map(|y| ExperimentRow {
                y,
                scale: 1,
                exact_tail: 0.0,
                scaled_tail: 0.0,
                normal_tail: 0.0,
                rel_error: 0.0,
                abs_error_poisson: 0.0,
                abs_error_normal: 0.0,
                bound_bracket: 0.0,
                plateau_id: n * y / m,
                underflow: false,
            })
            .collect();
        for run in plateau_runs(&rows).iter().filter(|r| r.interior) {
            prop_assert!(run.len == m / n || run.len == m.div_ceil(n), "{:?} with k = {}/{}", run, n, m);
        }
    }

    #[test]
    fn tails_and_cdf_are_complementary(rate in 0.01f64..200.0, count in 0u64..400) {
        let s = poisson_cdf(rate, count).unwrap() + poisson_tail(rate, count + 1).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn exact_tail_interval_is_consistent(model in model_strategy(), y in 0u64..300) {
        let dist = exact_distribution(&model, 1e-12).unwrap();
        let strict = dist.tail(y, Tail::Strict);
        let non_strict = dist.tail(y, Tail::NonStrict);
        prop_assert!(strict.lower <= strict.upper && strict.upper - strict.lower <= 1e-12);
        prop_assert!(strict.upper <= non_strict.upper + 1e-15);
        if y > 0 {
            // At 0 the non-strict tail is exactly 1 rather than a table sum.
            prop_assert!((non_strict.lower - strict.lower - dist.prob(y)).abs() <= 1e-14);
        }
        if y <= dist.exact_through() {
            prop_assert!((dist.cdf(y) + strict.lower + dist.mass_deficit() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_is_linear(lambda in 0.1f64..80.0, m in 1u64..40, w in 0u64..5000, c in -5.0f64..5.0) {
        let op = LatticeOperator::new(lambda, m).unwrap();
        let f = |x: u64| (x as f64).sqrt();
        let g = |x: u64| if x.is_multiple_of(3) { 1.0 } else { -0.5 };
        let combined = stein_apply(&op, |x| f(x) + c * g(x), w);
        let split = stein_apply(&op, f, w) + c * stein_apply(&op, g, w);
        prop_assert!((combined - split).abs() <= 1e-9 * (1.0 + combined.abs()));
    }

    #[test]
    fn rationals_parse_like_their_decimal(num in -10_000i64..10_000, den in 1i64..10_000) {
        prop_assert_eq!(parse_rational(&format!("{num}/{den}")).unwrap(), frac(num, den));
        let dec = num as f64 / 4.0;
        prop_assert_eq!(parse_rational(&format!("{dec}")).unwrap(), frac(num, 4));
    }
}
