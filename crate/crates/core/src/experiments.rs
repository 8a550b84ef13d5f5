//! Sweeps comparing the exact tail `P(S > y)` with the scaled Poisson and
//! normal approximations, plus the summaries used to read them: windowed
//! means, plateau runs and a fitted growth exponent. Rows serialize to CSV.
//!
//! Relative errors are computed from whichever side of the distribution is
//! small: above the median `|exact − approx|` is taken from the two lower
//! cdfs, which are exact below the truncation point.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::bounds::{bound_params, BoundParams};
use crate::error::{Error, Result};
use crate::lattice::{exact_distribution, LatticeDistribution};
use crate::rational::{floor_u64, int, to_f64};
use crate::special::{poisson_cdf, poisson_tail};
use crate::weighted_sum::{moments, normal_approx_tail, SumMoments, Tail, WeightedPoissonSum};

/// Truncation used by all sweeps. The missing mass is known analytically, so
/// a tiny budget costs a few extra table entries and keeps the tail interval
/// far narrower than the tails themselves.
pub const SWEEP_EPSILON: f64 = 1e-40;

/// Rows whose exact tail falls below this are flagged rather than used.
pub const UNDERFLOW_FLOOR: f64 = 1e-250;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRow {
    pub y: u64,
    /// Rate multiplier `N` (1 outside scaling sweeps).
    pub scale: u64,
    /// `P(S > y)` from the convolution oracle.
    pub exact_tail: f64,
    /// `P(A_λ > ky)`.
    pub scaled_tail: f64,
    /// `P(Z > y)`, `Z ~ N(μ, σ²)`.
    pub normal_tail: f64,
    /// `|1 − scaled/exact|`.
    pub rel_error: f64,
    pub abs_error_poisson: f64,
    pub abs_error_normal: f64,
    /// Bound bracket at the Poisson-scale level `ky`; NaN below `λ`.
    pub bound_bracket: f64,
    /// `⌊ky⌋`; the scaled tail is constant exactly while this is.
    pub plateau_id: u64,
    /// Exact tail below [`UNDERFLOW_FLOOR`]; errors are NaN.
    pub underflow: bool,
}

struct SweepContext {
    moments: SumMoments,
    params: BoundParams,
    dist: LatticeDistribution,
}

impl SweepContext {
    fn new(model: &WeightedPoissonSum) -> Result<Self> {
        let moments = moments(model);
        Ok(Self { params: bound_params(model, &moments), dist: exact_distribution(model, SWEEP_EPSILON)?, moments })
    }

    fn row(&self, y: u64, scale: u64) -> Result<ExperimentRow> {
        let lambda = self.moments.lambda_f64();
        let ky = self.moments.k() * int(y);
        let threshold = floor_u64(&ky)?;
        let exact = self.dist.tail(y, Tail::Strict).midpoint();
        let scaled = poisson_tail(lambda, threshold + 1)?;
        let normal = normal_approx_tail(&self.moments, y as f64, false)?;
        let underflow = exact < UNDERFLOW_FLOOR;
        let abs_error_poisson = if exact > 0.5 && y <= self.dist.exact_through() {
            (poisson_cdf(lambda, threshold)? - self.dist.cdf(y)).abs()
        } else {
            (scaled - exact).abs()
        };
        let level = to_f64(&ky);
        let bound_bracket = if level >= lambda { self.params.bracket_at(level) } else { f64::NAN };
        Ok(ExperimentRow {
            y,
            scale,
            exact_tail: exact,
            scaled_tail: scaled,
            normal_tail: normal,
            rel_error: if underflow { f64::NAN } else { abs_error_poisson / exact },
            abs_error_poisson: if underflow { f64::NAN } else { abs_error_poisson },
            abs_error_normal: if underflow { f64::NAN } else { (normal - exact).abs() },
            bound_bracket,
            plateau_id: threshold,
            underflow,
        })
    }
}

fn check_range(y_from: u64, y_to: u64) -> Result<()> {
    if y_from > y_to {
        return Err(Error::validation(format!("empty range {y_from}..={y_to}")));
    }
    Ok(())
}

/// One row per `y ∈ [y_from, y_to]`, in order.
pub fn relative_error_sweep(model: &WeightedPoissonSum, y_from: u64, y_to: u64) -> Result<Vec<ExperimentRow>> {
    check_range(y_from, y_to)?;
    let ctx = SweepContext::new(model)?;
    (y_from..=y_to).into_par_iter().map(|y| ctx.row(y, 1)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSweep {
    pub rows: Vec<ExperimentRow>,
    /// Multipliers left out because `Nλ > y`.
    pub excluded: Vec<(u64, String)>,
}

/// Rows at fixed `y` with every rate multiplied by `N`. This keeps `k`, and
/// with it `δ`, `K` and `r*`, unchanged while `λ' = Nλ` grows.
pub fn scaling_sweep(model: &WeightedPoissonSum, y: u64, n_values: &[u64]) -> Result<ScalingSweep> {
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let lambda = moments(model).lambda;
    for &n in n_values {
        if n == 0 {
            return Err(Error::validation("scaling factors must be positive"));
        }
        let scaled_lambda = &lambda * int(n);
        if scaled_lambda > int(y) {
            excluded.push((n, format!("N = {n}: λ' = {:.3} exceeds y = {y}", to_f64(&scaled_lambda))));
            continue;
        }
        let scaled = model.scale_rates(&int(n))?;
        rows.push(SweepContext::new(&scaled)?.row(y, n)?);
    }
    Ok(ScalingSweep { rows, excluded })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalComparison {
    pub rows: Vec<ExperimentRow>,
    /// Rows with `abs_error_poisson < abs_error_normal`.
    pub poisson_wins: usize,
    /// Rows that were compared (underflow rows excluded).
    pub compared: usize,
}

impl NormalComparison {
    /// The rows where the normal approximation is at least as close.
    pub fn losing_rows(&self) -> impl Iterator<Item = &ExperimentRow> {
        self.rows.iter().filter(|r| !r.underflow && r.abs_error_poisson >= r.abs_error_normal)
    }
}

pub fn compare_normal(model: &WeightedPoissonSum, y_from: u64, y_to: u64) -> Result<NormalComparison> {
    let rows = relative_error_sweep(model, y_from, y_to)?;
    let valid = rows.iter().filter(|r| !r.underflow);
    let compared = valid.clone().count();
    let poisson_wins = valid.filter(|r| r.abs_error_poisson < r.abs_error_normal).count();
    Ok(NormalComparison { rows, poisson_wins, compared })
}

/// Means over consecutive disjoint windows; a short final window is dropped.
pub fn windowed_means(values: &[f64], width: usize) -> Vec<f64> {
    if width == 0 {
        return Vec::new();
    }
    values.chunks_exact(width).map(|w| w.iter().sum::<f64>() / width as f64).collect()
}

/// A maximal run of consecutive rows sharing a plateau id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlateauRun {
    pub plateau_id: u64,
    pub start: u64,
    pub len: u64,
    /// False when the run touches either end of the sweep and may be cut.
    pub interior: bool,
}

pub fn plateau_runs(rows: &[ExperimentRow]) -> Vec<PlateauRun> {
    let mut runs: Vec<PlateauRun> = Vec::new();
    for row in rows {
        match runs.last_mut() {
            Some(run) if run.plateau_id == row.plateau_id => run.len += 1,
            _ => runs.push(PlateauRun { plateau_id: row.plateau_id, start: row.y, len: 1, interior: true }),
        }
    }
    if let Some(first) = runs.first_mut() {
        first.interior = false;
    }
    if let Some(last) = runs.last_mut() {
        last.interior = false;
    }
    runs
}

/// Least-squares slope of `ln rel_error` against `ln(ky − λ)` over rows
/// above `λ` with a positive error; the growth exponent of the relative
/// error in the distance from the mean.
pub fn fitted_exponent(rows: &[ExperimentRow], moments: &SumMoments) -> Option<f64> {
    let k = to_f64(&moments.k());
    let lambda = moments.lambda_f64();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.underflow && r.rel_error > 0.0 && k * r.y as f64 > lambda)
        .map(|r| ((k * r.y as f64 - lambda).ln(), r.rel_error.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

const COLUMNS: [&str; 9] =
    ["y", "exact", "scaled", "normal", "rel_error", "abs_err_pois", "abs_err_norm", "bracket", "plateau_id"];

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes rows as CSV. With `with_scale` a leading `scale` column is added.
pub fn write_rows<W: Write>(out: W, rows: &[ExperimentRow], with_scale: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::validation(format!("csv output failed: {e}"));
    let mut header: Vec<&str> = Vec::new();
    if with_scale {
        header.push("scale");
    }
    header.extend(COLUMNS);
    header.push("underflow");
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = Vec::with_capacity(header.len());
        if with_scale {
            rec.push(r.scale.to_string());
        }
        rec.push(r.y.to_string());
        for v in [
            r.exact_tail,
            r.scaled_tail,
            r.normal_tail,
            r.rel_error,
            r.abs_error_poisson,
            r.abs_error_normal,
            r.bound_bracket,
        ] {
            rec.push(fmt_f64(v));
        }
        rec.push(r.plateau_id.to_string());
        rec.push(r.underflow.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::validation(format!("csv output failed: {e}")))
}

/// Parses CSV produced by [`write_rows`].
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ExperimentRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let bad = |what: &str| Error::validation(format!("malformed experiment csv: {what}"));
    let headers = rdr.headers().map_err(|e| bad(&e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let idx: Vec<usize> = COLUMNS.iter().map(|c| col(c).ok_or_else(|| bad(c))).collect::<Result<_>>()?;
    let scale_idx = col("scale");
    let underflow_idx = col("underflow");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        let get = |i: usize| rec.get(i).ok_or_else(|| bad("short record"));
        let float = |i: usize| -> Result<f64> { get(i)?.parse().map_err(|_| bad(get(i).unwrap_or(""))) };
        let int = |i: usize| -> Result<u64> { get(i)?.parse().map_err(|_| bad(get(i).unwrap_or(""))) };
        rows.push(ExperimentRow {
            y: int(idx[0])?,
            scale: scale_idx.map(int).transpose()?.unwrap_or(1),
            exact_tail: float(idx[1])?,
            scaled_tail: float(idx[2])?,
            normal_tail: float(idx[3])?,
            rel_error: float(idx[4])?,
            abs_error_poisson: float(idx[5])?,
            abs_error_normal: float(idx[6])?,
            bound_bracket: float(idx[7])?,
            plateau_id: int(idx[8])?,
            underflow: match underflow_idx {
                Some(i) => get(i)?.parse().map_err(|_| bad("underflow flag"))?,
                None => false,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_model() -> WeightedPoissonSum {
        WeightedPoissonSum::from_integers(&[1, 10], &[100, 30]).unwrap()
    }

    #[test]
    fn unit_model_is_exact() {
        let model = WeightedPoissonSum::from_integers(&[1], &[20]).unwrap();
        for row in relative_error_sweep(&model, 0, 60).unwrap() {
            assert!(row.abs_error_poisson < 1e-14, "{row:?}");
        }
    }

    #[test]
    fn plateaus_have_seven_or_eight_rows() {
        let rows = relative_error_sweep(&reference_model(), 401, 500).unwrap();
        let runs = plateau_runs(&rows);
        assert!(runs.iter().filter(|r| r.interior).all(|r| r.len == 7 || r.len == 8), "{runs:?}");
        for pair in rows.windows(2) {
            if pair[0].plateau_id == pair[1].plateau_id {
                assert_eq!(pair[0].scaled_tail, pair[1].scaled_tail);
            }
        }
    }

    #[test]
    fn scaling_first_row_matches_sweep() {
        let model = reference_model();
        let s = scaling_sweep(&model, 400, &[1, 2, 8]).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.excluded.len(), 1);
        assert_eq!(s.excluded[0].0, 8);
        let sweep = relative_error_sweep(&model, 400, 400).unwrap();
        let mut first = s.rows[0];
        first.scale = 1;
        assert_eq!(first, sweep[0]);
    }

    #[test]
    fn windows_drop_partial_tail() {
        assert_eq!(windowed_means(&[1.0, 2.0, 3.0, 4.0, 5.0], 2), vec![1.5, 3.5]);
        assert!(windowed_means(&[1.0], 0).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let rows = relative_error_sweep(&reference_model(), 395, 410).unwrap();
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows, false).unwrap();
        let back = read_rows(buf.as_slice()).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.exact_tail.to_bits(), b.exact_tail.to_bits());
            assert_eq!(a.rel_error.to_bits(), b.rel_error.to_bits());
            assert_eq!(a.y, b.y);
            assert!(a.bound_bracket.is_nan() == b.bound_bracket.is_nan());
        }
    }

    #[test]
    fn exponent_of_power_law() {
        let m = moments(&reference_model());
        let k = to_f64(&m.k());
        let rows: Vec<ExperimentRow> = (420..500)
            .map(|y| {
                let d = k * y as f64 - m.lambda_f64();
                ExperimentRow {
                    y,
                    scale: 1,
                    exact_tail: 0.1,
                    scaled_tail: 0.1,
                    normal_tail: 0.1,
                    rel_error: 0.01 * d * d,
                    abs_error_poisson: 0.0,
                    abs_error_normal: 0.0,
                    bound_bracket: f64::NAN,
                    plateau_id: 0,
                    underflow: false,
                }
            })
            .collect();
        assert!((fitted_exponent(&rows, &m).unwrap() - 2.0).abs() < 1e-9);
    }
}
