//! Absolute errors of the scaled Poisson and normal approximations side by
//! side, including where the normal one is closer.

use scaled_poisson::experiments::compare_normal;
use scaled_poisson::WeightedPoissonSum;

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let cmp = compare_normal(&model, 420, 650)?;
    println!("Poisson closer on {} of {} levels", cmp.poisson_wins, cmp.compared);
    for row in cmp.rows.iter().step_by(23) {
        println!("y = {}: poisson {:.3e}, normal {:.3e}", row.y, row.abs_error_poisson, row.abs_error_normal);
    }
    let losing: Vec<u64> = cmp.losing_rows().map(|r| r.y).collect();
    if let (Some(a), Some(b)) = (losing.first(), losing.last()) {
        println!("normal at least as close on {} levels between {a} and {b}", losing.len());
    }
    Ok(())
}
