//! Command-line front end. Every subcommand writes CSV with a header row to
//! stdout or `--out`. Exit status: 0 on success, 2 for invalid input, 3 when
//! a quantity leaves floating-point range, 1 for I/O failures.
//!
//! Fractional weights are scaled to integers by the lcm `B` of their
//! denominators, and every level `y` then refers to `B·S`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bernoulli::{build_scheme, default_trials, w_distribution, BernoulliScheme};
use crate::bounds::{bound_params, eta, moderate_deviation_bound};
use crate::coupling::{
    class_deltas, coupling_table, h_decomposition, size_bias_check_exact, size_bias_sample, two_class_h2_bound,
};
use crate::error::Error;
use crate::experiments::{compare_normal, fmt_f64, relative_error_sweep, scaling_sweep, write_rows};
use crate::lattice::exact_tail;
use crate::rational::{int, parse_rational, parse_rational_list, to_f64};
use crate::stein::{solve_stein, verify_f_properties, SteinContext};
use crate::weighted_sum::{
    moments, normal_approx_tail, normalize_weights, scaled_poisson_tail, SumMoments, Tail, TailMode, WeightedPoissonSum,
};

#[derive(Debug, Parser)]
#[command(name = "scaled-poisson", version, about = "Scaled Poisson approximation of weighted Poisson sums")]
pub struct Cli {
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Comma-separated positive weights; fractions like 3/2 are allowed.
    #[arg(long, default_value = "1,10")]
    weights: String,
    /// Comma-separated positive rates.
    #[arg(long, default_value = "100,30")]
    rates: String,
}

impl ModelArgs {
    fn model(&self) -> crate::Result<WeightedPoissonSum> {
        let (model, _) = normalize_weights(&parse_rational_list(&self.weights)?, &parse_rational_list(&self.rates)?)?;
        Ok(model)
    }
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct TrialArgs {
    /// Bernoulli trials per class.
    #[arg(long)]
    mstar: Option<u64>,
    /// Trials per class per unit of the largest rate.
    #[arg(long)]
    mstar_per_unit: Option<u64>,
}

impl TrialArgs {
    fn scheme(&self, model: &WeightedPoissonSum) -> crate::Result<BernoulliScheme> {
        match (self.mstar, self.mstar_per_unit) {
            (Some(t), _) => build_scheme(model, t),
            (_, Some(u)) => BernoulliScheme::with_resolution(model, u),
            _ => build_scheme(model, default_trials(model)?),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Discrete,
    Continuous,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean, variance, k = n/m and λ.
    Moments(ModelArgs),
    /// Tail of S from the truncated convolution, with its error interval.
    ExactTail {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        y: u64,
        /// P(S > y) instead of P(S >= y).
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
    },
    /// Scaled Poisson and normal tails.
    ApproxTail {
        #[command(flatten)]
        model: ModelArgs,
        /// Level; may be fractional.
        #[arg(long)]
        y: String,
        #[arg(long, value_enum, default_value_t = Mode::Discrete)]
        mode: Mode,
        #[arg(long)]
        strict: bool,
    },
    /// Exact against approximate strict tails over a range of levels.
    SweepRelerr {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 401)]
        y_from: u64,
        #[arg(long, default_value_t = 700)]
        y_to: u64,
    },
    /// Relative error at a fixed level as all rates are multiplied by N.
    SweepScaling {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 400)]
        y: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7")]
        n_values: Vec<u64>,
    },
    /// Absolute errors of the Poisson and normal approximations.
    CompareNormal {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 420)]
        y_from: u64,
        #[arg(long, default_value_t = 650)]
        y_to: u64,
    },
    /// Solves the Stein equation and checks the solution's properties.
    SteinCheck {
        #[arg(long, default_value_t = 1600)]
        lambda_num: u64,
        #[arg(long, default_value_t = 31)]
        lambda_den: u64,
        #[arg(long, default_value_t = 31)]
        m: u64,
        #[arg(long, default_value_t = 4)]
        n: u64,
        #[arg(long, default_value_t = 60)]
        y: u64,
        /// Last point of the property grid.
        #[arg(long, default_value_t = 2790)]
        wmax: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Coupling decomposition of the lattice tail difference, and optionally
    /// the size-bias identity for f = 1{x >= my}.
    CouplingCheck {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        trials: TrialArgs,
        #[arg(long, default_value_t = 60)]
        y: u64,
        /// Check the size-bias identity by enumerating every outcome.
        #[arg(long, conflicts_with = "samples")]
        exhaustive: bool,
        /// Check the size-bias identity by Monte Carlo.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Bound bracket, its parameters and η at level y.
    Bound {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        trials: TrialArgs,
        #[arg(long, default_value_t = 60)]
        y: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Sink = csv::Writer<Box<dyn Write>>;

/// Long-format output: `quantity,index,value`.
struct Long(Sink);

impl Long {
    fn new(mut sink: Sink) -> Result<Self, Failure> {
        sink.write_record(["quantity", "index", "value"])?;
        Ok(Self(sink))
    }

    fn put(&mut self, quantity: &str, index: Option<usize>, value: String) -> Result<(), Failure> {
        let index = index.map(|i| i.to_string()).unwrap_or_default();
        self.0.write_record([quantity, index.as_str(), value.as_str()])?;
        Ok(())
    }

    fn num(&mut self, quantity: &str, value: f64) -> Result<(), Failure> {
        self.put(quantity, None, fmt_f64(value))
    }

    fn finish(mut self) -> Result<(), Failure> {
        self.0.flush()?;
        Ok(())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::NumericalRange(_) => 3,
                _ => 2,
            }
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

/// Entry point for the binary.
pub fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(run(std::env::args_os()) as u8)
}

fn raw(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn open(out: &Option<PathBuf>) -> Result<Sink, Failure> {
    Ok(csv::Writer::from_writer(raw(out)?))
}

fn tail_of(strict: bool) -> Tail {
    if strict {
        Tail::Strict
    } else {
        Tail::NonStrict
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    // Validate and compute before touching the output file.
    match cli.command {
        Command::Moments(model) => {
            let mom = moments(&model.model()?);
            let mut out = open(&cli.out)?;
            out.write_record(["mu", "sigma_sq", "k_num", "k_den", "lambda"])?;
            out.write_record([
                fmt_f64(mom.mu_f64()),
                fmt_f64(mom.sigma_sq_f64()),
                mom.k_num.to_string(),
                mom.k_den.to_string(),
                fmt_f64(mom.lambda_f64()),
            ])?;
            out.flush()?;
        }
        Command::ExactTail { model, y, strict, eps } => {
            let t = exact_tail(&model.model()?, y, tail_of(strict), eps)?;
            let mut out = open(&cli.out)?;
            out.write_record(["y", "strict", "lower", "upper", "estimate"])?;
            out.write_record([
                y.to_string(),
                strict.to_string(),
                fmt_f64(t.lower),
                fmt_f64(t.upper),
                fmt_f64(t.midpoint()),
            ])?;
            out.flush()?;
        }
        Command::ApproxTail { model, y, mode, strict } => {
            let mom = moments(&model.model()?);
            let level = parse_rational(&y)?;
            let mode = match mode {
                Mode::Discrete => TailMode::Discrete,
                Mode::Continuous => TailMode::Continuous,
            };
            let scaled = scaled_poisson_tail(&mom, &level, mode, tail_of(strict))?;
            let normal = normal_approx_tail(&mom, to_f64(&level), false)?;
            let mut out = open(&cli.out)?;
            out.write_record(["y", "mode", "strict", "scaled", "normal"])?;
            out.write_record([
                fmt_f64(to_f64(&level)),
                format!("{mode:?}").to_lowercase(),
                strict.to_string(),
                fmt_f64(scaled),
                fmt_f64(normal),
            ])?;
            out.flush()?;
        }
        Command::SweepRelerr { model, y_from, y_to } => {
            let rows = relative_error_sweep(&model.model()?, y_from, y_to)?;
            write_rows(raw(&cli.out)?, &rows, false)?;
        }
        Command::SweepScaling { model, y, n_values } => {
            let sweep = scaling_sweep(&model.model()?, y, &n_values)?;
            for (_, note) in &sweep.excluded {
                eprintln!("excluded: {note}");
            }
            write_rows(raw(&cli.out)?, &sweep.rows, true)?;
        }
        Command::CompareNormal { model, y_from, y_to } => {
            let cmp = compare_normal(&model.model()?, y_from, y_to)?;
            eprintln!("poisson closer on {} of {} rows", cmp.poisson_wins, cmp.compared);
            write_rows(raw(&cli.out)?, &cmp.rows, false)?;
        }
        Command::SteinCheck { lambda_num, lambda_den, m, n, y, wmax, tol } => {
            if lambda_den == 0 {
                return Err(Error::validation("lambda denominator must be positive").into());
            }
            let lambda = int(lambda_num) / int(lambda_den);
            let ctx = SteinContext::new(lambda, m, n, y, tol)?;
            let table = solve_stein(&ctx, wmax.max(m * (y + 10)), true)?;
            let report = verify_f_properties(&table, wmax)?;
            let mut out = Long::new(open(&cli.out)?)?;
            for check in report.checks().into_iter().chain([&report.g_l_increment_boundary]) {
                out.put(&format!("{}.passed", check.name), None, check.passed.to_string())?;
                out.put(&format!("{}.checked", check.name), None, check.checked.to_string())?;
                out.put(&format!("{}.failures", check.name), None, check.failures.to_string())?;
                out.num(&format!("{}.worst_margin", check.name), check.worst_margin)?;
            }
            out.put("all_passed", None, report.all_passed().to_string())?;
            out.num("c_hat", report.c_hat)?;
            out.num("g_m_recurrence_gap", report.g_m_recurrence_gap)?;
            out.num("residual_max", table.residual_max())?;
            out.num("off_lattice_residual", table.off_lattice_residual())?;
            out.num("tail_prob", table.tail_prob())?;
            out.finish()?;
        }
        Command::CouplingCheck { model, trials, y, exhaustive, samples, seed, tol } => {
            let model = model.model()?;
            let mom = moments(&model);
            let scheme = trials.scheme(&model)?;
            let table = coupling_table(&scheme, &mom, y, tol)?;
            let h = h_decomposition(&scheme, &mom, &table)?;
            let deltas = class_deltas(&model, &mom);
            let my = mom.k_den * y;
            let indicator = move |x: u64| if x >= my { 1.0 } else { 0.0 };
            let exact = if exhaustive { Some(size_bias_check_exact(&scheme, &mom, indicator)?) } else { None };
            let sampled = match samples {
                Some(s) => Some(size_bias_sample(&scheme, &mom, indicator, s, seed)?),
                None => None,
            };
            let mut out = Long::new(open(&cli.out)?)?;
            out.put("trials_per_class", None, scheme.trials_per_class().to_string())?;
            for (r, v) in h.h.iter().enumerate() {
                out.put("h", Some(r), fmt_f64(*v))?;
            }
            out.num("h_sum", h.sum())?;
            out.num("tail_diff", h.tail_diff)?;
            out.num("closure_error", h.closure_error)?;
            if h.h.len() == 3 {
                let k2 = (mom.k_num * model.weights()[1]).div_ceil(mom.k_den);
                out.num("h2_bound", two_class_h2_bound(&h, &deltas, k2)?)?;
            }
            if let Some((lhs, rhs)) = exact {
                out.num("size_bias_lhs", lhs)?;
                out.num("size_bias_rhs", rhs)?;
                out.num("size_bias_abs_diff", (lhs - rhs).abs())?;
            }
            if let Some(est) = sampled {
                out.num("size_bias_lhs", est.lhs)?;
                out.num("size_bias_rhs", est.rhs)?;
                out.num("size_bias_lhs_stderr", est.lhs_stderr)?;
                out.num("size_bias_rhs_stderr", est.rhs_stderr)?;
                out.num("size_bias_z", est.z_score())?;
            }
            out.finish()?;
        }
        Command::Bound { model, trials, y } => {
            let model = model.model()?;
            let mom = moments(&model);
            let params = bound_params(&model, &mom);
            let bracket = moderate_deviation_bound(&params, y)?;
            let eta_value = eta_at(&model, &mom, &trials, y)?;
            let mut out = Long::new(open(&cli.out)?)?;
            out.num("lambda", to_f64(&params.lambda))?;
            out.put("k_num", None, mom.k_num.to_string())?;
            out.put("k_den", None, mom.k_den.to_string())?;
            for (r, d) in params.deltas.iter().enumerate() {
                out.put("delta", Some(r + 1), fmt_f64(to_f64(d)))?;
            }
            for (r, k) in params.k.iter().enumerate() {
                out.put("K", Some(r + 1), k.to_string())?;
            }
            out.put("r_star", None, params.r_star.to_string())?;
            out.num("multiplier", params.multiplier())?;
            out.num("bracket", bracket)?;
            out.num("eta", eta_value.value)?;
            out.put("eta_argmax", None, eta_value.argmax.to_string())?;
            out.finish()?;
        }
    }
    Ok(())
}

fn eta_at(
    model: &WeightedPoissonSum,
    mom: &SumMoments,
    trials: &TrialArgs,
    y: u64,
) -> crate::Result<crate::bounds::Eta> {
    let scheme = trials.scheme(model)?;
    eta(&w_distribution(&scheme, None)?, mom, y)
}
