//! Exact distribution of S by truncated convolution, with certified error
//! intervals on its tails.

use scaled_poisson::rational::int;
use scaled_poisson::{exact_distribution, moments, scaled_poisson_tail, Tail, TailMode, WeightedPoissonSum};

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let dist = exact_distribution(&model, 1e-14)?;
    println!(
        "support up to {}, exact through {}, missing mass {:.1e}, mean {:.6}",
        dist.support_max(),
        dist.exact_through(),
        dist.mass_deficit(),
        dist.mean()
    );
    let m = moments(&model);
    for y in [450, 500, 600, 700] {
        let t = dist.tail(y, Tail::Strict);
        let approx = scaled_poisson_tail(&m, &int(y), TailMode::Discrete, Tail::Strict)?;
        println!("P(S > {y}) in [{:.12e}, {:.12e}], scaled Poisson {approx:.12e}", t.lower, t.upper);
    }
    Ok(())
}
