//! Matched moments of a weighted Poisson sum and the approximations they
//! induce at a single level.

use scaled_poisson::rational::{frac, int, to_f64};
use scaled_poisson::{
    moments, normal_approx_tail, normalize_weights, scaled_poisson_tail, Tail, TailMode, WeightedPoissonSum,
};

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let m = moments(&model);
    println!("mu = {}, sigma^2 = {}, k = {}, lambda = {}", m.mu, m.sigma_sq, m.k(), m.lambda);
    println!("(1/k) A_lambda has mean {} and variance {}", m.approx_mean(), m.approx_variance());

    let y = int(500);
    for (mode, tail) in [
        (TailMode::Discrete, Tail::Strict),
        (TailMode::Discrete, Tail::NonStrict),
        (TailMode::Continuous, Tail::Strict),
    ] {
        println!("{mode:?}/{tail:?}: {:.6e}", scaled_poisson_tail(&m, &y, mode, tail)?);
    }
    println!("normal: {:.6e}", normal_approx_tail(&m, to_f64(&y), false)?);

    // Fractional weights are scaled to integers first.
    let (scaled, b) = normalize_weights(&[frac(1, 2), frac(5, 3)], &[int(4), int(2)])?;
    println!("weights 1/2, 5/3 become {:?} with B = {b}", scaled.weights());
    Ok(())
}
