//! Bernoulli discretisation W of the sum and how fast its tail converges to
//! the Poisson one as the number of trials grows.

use scaled_poisson::bernoulli::{tail_ratio, w_distribution, BernoulliScheme};
use scaled_poisson::bounds::lattice_tail;
use scaled_poisson::{moments, WeightedPoissonSum};

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let m = moments(&model);
    for per_unit in [25, 50, 100, 200] {
        let scheme = BernoulliScheme::with_resolution(&model, per_unit)?;
        let ratio = tail_ratio(&scheme, &model, 450, 1e-15)?;
        let w = w_distribution(&scheme, None)?;
        println!(
            "M* = {:>5}: P(W > 450)/P(S > 450) - 1 = {:+.5e}, P(nW >= 31*60) = {:.6e}",
            scheme.trials_per_class(),
            ratio - 1.0,
            lattice_tail(&w, &m, 60)
        );
    }
    Ok(())
}
