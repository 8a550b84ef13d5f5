//! Size-bias coupling: the exact identity on a small scheme, a sampled check
//! on a larger one, and the decomposition of the lattice tail error.

use scaled_poisson::bernoulli::{build_scheme, BernoulliScheme};
use scaled_poisson::coupling::{
    class_deltas, coupling_table, h_decomposition, size_bias_check_exact, size_bias_sample, two_class_h2_bound,
};
use scaled_poisson::{moments, WeightedPoissonSum};

fn main() -> scaled_poisson::Result<()> {
    let small = WeightedPoissonSum::from_integers(&[1, 2], &[1, 1])?;
    let sm = moments(&small);
    let scheme = build_scheme(&small, 8)?;
    let (lhs, rhs) = size_bias_check_exact(&scheme, &sm, |x| (x as f64).sqrt())?;
    println!("exact: {lhs:.15} vs {rhs:.15}");

    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let m = moments(&model);
    let scheme = BernoulliScheme::with_resolution(&model, 50)?;
    let level = m.k_num * 420;
    let est = size_bias_sample(&scheme, &m, move |x| if x >= level { 1.0 } else { 0.0 }, 200_000, 7)?;
    println!("sampled: {:.4} vs {:.4}, z = {:.2}", est.lhs, est.rhs, est.z_score());

    let table = coupling_table(&scheme, &m, 60, 1e-12)?;
    let h = h_decomposition(&scheme, &m, &table)?;
    println!("H = {:?}", h.h);
    println!("sum {:.15e}, tail difference {:.15e}", h.sum(), h.tail_diff);
    let deltas = class_deltas(&model, &m);
    println!("|H_2| = {:.4e} <= {:.4e}", h.h[2].abs(), two_class_h2_bound(&h, &deltas, 2)?);
    Ok(())
}
