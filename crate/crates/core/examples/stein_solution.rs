//! Solves the lattice Stein equation for a tail indicator and checks the
//! qualitative properties of the solution.

use scaled_poisson::stein::{g_l, solve_stein, verify_f_properties, SteinContext};
use scaled_poisson::{moments, WeightedPoissonSum};

fn main() -> scaled_poisson::Result<()> {
    let model = WeightedPoissonSum::from_integers(&[1, 10], &[100, 30])?;
    let ctx = SteinContext::from_moments(&moments(&model), 60, 1e-12)?;
    let table = solve_stein(&ctx, ctx.m() * 110, true)?;
    println!("tail P(A >= y) = {:.6e}, lattice residual {:.1e}", table.tail_prob(), table.residual_max());
    for w in [31, 310, 1550, 1860, 1861, 2000] {
        let info = table.point_info(w)?;
        println!("f({w:>4}) = {:+.6e} via {:?}", table.value(w)?, info.route);
    }
    println!("g_1(31*30) = {:+.6e}", g_l(&table, 31 * 30, 1)?);

    let report = verify_f_properties(&table, ctx.m() * 90)?;
    for check in report.checks() {
        println!(
            "{:<32} {} ({} points, worst margin {:.2e})",
            check.name, check.passed, check.checked, check.worst_margin
        );
    }
    println!("observed constant {:.4}", report.c_hat);
    Ok(())
}
