//! Relative error at a fixed level as every rate is multiplied by N.

use scaled_poisson::experiments::scaling_sweep;
use scaled_poisson::WeightedPoissonSum;

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let sweep = scaling_sweep(&model, 400, &[1, 2, 3, 4, 5, 6, 7, 8])?;
    for row in &sweep.rows {
        println!("N = {}: P(S > 400) = {:.10}, relative error {:.3e}", row.scale, row.exact_tail, row.rel_error);
    }
    for (_, note) in &sweep.excluded {
        println!("skipped {note}");
    }
    Ok(())
}
