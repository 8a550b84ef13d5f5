//! The moderate-deviation bound: its parameters, the tail-ratio supremum and
//! the constant the bound needs on an actual model.

use scaled_poisson::bernoulli::{w_distribution, BernoulliScheme};
use scaled_poisson::bounds::{bound_params, empirical_constant, eta, moderate_deviation_bound};
use scaled_poisson::{moments, WeightedPoissonSum};

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let m = moments(&model);
    let params = bound_params(&model, &m);
    let deltas: Vec<String> = params.deltas.iter().map(|d| d.to_string()).collect();
    println!("delta = ({}), K = {:?}, r* = {}", deltas.join(", "), params.k, params.r_star);
    for y in [52, 60, 70, 80] {
        println!("bracket({y}) = {:.4}", moderate_deviation_bound(&params, y)?);
    }
    for per_unit in [100, 200] {
        let scheme = BernoulliScheme::with_resolution(&model, per_unit)?;
        let e = eta(&w_distribution(&scheme, None)?, &m, 70)?;
        let c = empirical_constant(&model, &m, &scheme, 52, 80)?;
        println!(
            "M* = {}: eta = {:.6} at r = {}, C = {:.4e} at y = {}",
            scheme.trials_per_class(),
            e.value,
            e.argmax,
            c.c_hat,
            c.argmax
        );
    }
    Ok(())
}
