//! Relative error of the scaled Poisson approximation over a range of levels,
//! summarised by window means, plateau lengths and a fitted growth exponent.

use scaled_poisson::experiments::{fitted_exponent, plateau_runs, relative_error_sweep, windowed_means, write_rows};
use scaled_poisson::{moments, WeightedPoissonSum};

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let rows = relative_error_sweep(&model, 401, 700)?;
    let errors: Vec<f64> = rows.iter().map(|r| r.rel_error).collect();
    let means: Vec<String> = windowed_means(&errors, 31).iter().map(|v| format!("{v:.4}")).collect();
    println!("window means: {}", means.join(" "));

    let mut lengths: Vec<u64> = plateau_runs(&rows).iter().filter(|r| r.interior).map(|r| r.len).collect();
    lengths.sort_unstable();
    lengths.dedup();
    println!("interior plateau lengths: {lengths:?}");
    if let Some(e) = fitted_exponent(&rows, &moments(&model)) {
        println!("relative error grows like (ky - lambda)^{e:.3}");
    }
    write_rows(std::io::stdout().lock(), &rows[..5], false)
}
