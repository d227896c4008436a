//! Command-line surface. Every option that takes a value can also come from
//! the `--config` file under its long name; flags win over the file, the
//! file wins over built-in defaults.

use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use diffunif::infer::{
    fit_map, hmc_sample, log_likelihood, summarize_posterior, AscentConfig, HmcConfig, ObservationSeries,
    PosteriorSample, PriorBox,
};
use diffunif::predprey::{propagate_pp, PredPreyParams};
use diffunif::sir::{full_system, least_squares_fit, SirParams};
use diffunif::ssa::{gillespie_pp, gillespie_sir, Trajectory};
use diffunif::unif::{uniformize_with, SolveOptions, StateDistribution, DEFAULT_EPS};

use crate::config::Config;
use crate::ingest::{ingest, CaseSeries};
use crate::output::{emit, json_num, num};
use crate::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "diffunif", version, about = "Stochastic SIR and predator-prey models: simulation, exact transient \
    distributions, likelihood-based fitting and HMC")]
pub struct Cli {
    /// Worker threads for parallel solves and chains (default: all cores).
    #[arg(long, global = true, env = "CTMC_THREADS")]
    pub threads: Option<usize>,

    /// File of key=value lines supplying any long option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Log progress and diagnostics to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample trajectories with the Gillespie algorithm.
    Simulate {
        #[command(subcommand)]
        model: SimulateModel,
    },
    /// Transient distributions p(t) at the requested times.
    Solve {
        #[command(subcommand)]
        model: SolveModel,
    },
    /// Log-likelihood and its gradient in (log alpha, log beta).
    Loglik(LoglikArgs),
    /// Maximum-likelihood rates by gradient ascent.
    Fit(FitArgs),
    /// Least-squares fit of the deterministic SIR model.
    FitOde(DataArgs),
    /// Posterior samples by Hamiltonian Monte Carlo, as JSON lines.
    Hmc(HmcArgs),
}

#[derive(Subcommand, Debug)]
pub enum SimulateModel {
    Sir(SimulateSirArgs),
    Pp(SimulatePpArgs),
}

#[derive(Subcommand, Debug)]
pub enum SolveModel {
    Sir(SolveSirArgs),
    Pp(SolvePpArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct SirModelArgs {
    /// Population size N.
    #[arg(long)]
    pub population: Option<u64>,
    /// Recovery rate per unit time.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Infection rate per unit time.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Initial infected (default 1).
    #[arg(long)]
    pub i0: Option<u64>,
    /// Initial susceptibles (default N - I0).
    #[arg(long)]
    pub s0: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PpModelArgs {
    /// Prey birth rate.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Predator-prey contact rate.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Predator death rate.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Prey carrying capacity.
    #[arg(long)]
    pub x_max: Option<u64>,
    /// Predator cap of the solver grid.
    #[arg(long)]
    pub y_max: Option<u64>,
    #[arg(long)]
    pub x0: Option<u64>,
    #[arg(long)]
    pub y0: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateFormat {
    /// Every event as `time, S, I` rows.
    Tsv,
    /// Daily snapshots as a `date,infected,recovered` case file.
    Cases,
}

impl std::str::FromStr for SimulateFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Simulation horizon.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Number of trajectories (default 1).
    #[arg(long)]
    pub runs: Option<usize>,
    /// RNG seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateSirArgs {
    #[command(flatten)]
    pub model: SirModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Output layout (default tsv).
    #[arg(long, value_enum)]
    pub format: Option<SimulateFormat>,
    /// Date of time zero for the cases format (default 2020-03-01).
    #[arg(long)]
    pub start_date: Option<NaiveDate>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulatePpArgs {
    #[command(flatten)]
    pub model: PpModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolveArgs {
    /// Comma-separated output times.
    #[arg(long)]
    pub times: Option<String>,
    /// Truncation tolerance of the Poisson series (default 1e-10).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Only print states with probability above this (default 0).
    #[arg(long)]
    pub min_prob: Option<f64>,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolveSirArgs {
    #[command(flatten)]
    pub model: SirModelArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SolvePpArgs {
    #[command(flatten)]
    pub model: PpModelArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Population size N.
    #[arg(long)]
    pub population: Option<u64>,
    /// Case file with header `date,infected,recovered`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct LoglikArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Recovery rate per day.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Infection rate per day.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Starting recovery rate (default 0.1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Starting infection rate (default 0.2).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Iteration limit (default 1000).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Gradient-norm tolerance (default 1e-4).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct HmcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Independent chains (default 10).
    #[arg(long)]
    pub chains: Option<usize>,
    /// Transitions per chain including burn-in (default 100).
    #[arg(long)]
    pub len: Option<usize>,
    /// Leading transitions discarded per chain (default 10).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Leapfrog step size in log-rate space (default 0.05).
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Leapfrog steps per proposal (default 10).
    #[arg(long)]
    pub leapfrog: Option<usize>,
    /// RNG seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lower bound of both rates under the uniform prior (default 0.001).
    #[arg(long)]
    pub rate_min: Option<f64>,
    /// Upper bound of both rates under the uniform prior (default 10).
    #[arg(long)]
    pub rate_max: Option<f64>,
    /// Sample each calendar month separately.
    #[arg(long)]
    pub segment_by_month: bool,
}

/// Parses arguments already split from the process and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(n) = config.value(cli.threads, "threads")? {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    match cli.command {
        Command::Simulate { model: SimulateModel::Sir(a) } => simulate_sir(&config, a),
        Command::Simulate { model: SimulateModel::Pp(a) } => simulate_pp(&config, a),
        Command::Solve { model: SolveModel::Sir(a) } => solve_sir(&config, a),
        Command::Solve { model: SolveModel::Pp(a) } => solve_pp(&config, a),
        Command::Loglik(a) => loglik(&config, a),
        Command::Fit(a) => fit(&config, a),
        Command::FitOde(a) => fit_ode(&config, a),
        Command::Hmc(a) => hmc(&config, a),
    }
}

struct SirSetup {
    params: SirParams,
    s0: u64,
    i0: u64,
}

fn sir_setup(config: &Config, m: SirModelArgs) -> Result<SirSetup> {
    let n: u64 = config.required(m.population, "population")?;
    let alpha: f64 = config.required(m.alpha, "alpha")?;
    let beta: f64 = config.required(m.beta, "beta")?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(CliError::Validation(format!("rates must be positive, got alpha={alpha} beta={beta}")));
    }
    let i0 = config.or(m.i0, "i0", 1)?;
    let s0 = config.or(m.s0, "s0", n.saturating_sub(i0))?;
    if s0 + i0 > n {
        return Err(CliError::Validation(format!("S0 + I0 = {} exceeds population {n}", s0 + i0)));
    }
    Ok(SirSetup { params: SirParams::from_rates(alpha, beta, n)?, s0, i0 })
}

fn pp_setup(config: &Config, m: PpModelArgs) -> Result<(PredPreyParams, u64, u64)> {
    let params = PredPreyParams::new(
        config.required(m.alpha, "alpha")?,
        config.required(m.beta, "beta")?,
        config.required(m.delta, "delta")?,
        config.required(m.x_max, "x-max")?,
        config.required(m.y_max, "y-max")?,
    )?;
    let (x0, y0) = (config.required(m.x0, "x0")?, config.required(m.y0, "y0")?);
    if x0 > params.x_max || y0 > params.y_max {
        return Err(CliError::Validation(format!(
            "initial state ({x0}, {y0}) outside the grid {} x {}",
            params.x_max, params.y_max
        )));
    }
    Ok((params, x0, y0))
}

struct RunSetup {
    t_end: f64,
    runs: usize,
    rng: ChaCha8Rng,
    out: Option<PathBuf>,
}

fn run_setup(config: &Config, r: RunArgs) -> Result<RunSetup> {
    let t_end: f64 = config.required(r.t_end, "t-end")?;
    if !(t_end >= 0.0) {
        return Err(CliError::Validation(format!("--t-end must be nonnegative, got {t_end}")));
    }
    let runs = config.or(r.runs, "runs", 1)?;
    let seed = config.or(r.seed, "seed", 0)?;
    Ok(RunSetup { t_end, runs, rng: ChaCha8Rng::seed_from_u64(seed), out: config.value(r.out, "out")? })
}

/// One trajectory in `time a b` rows, or several with a leading run column.
fn trajectories_tsv(trajs: &[Trajectory], labels: [&str; 2]) -> String {
    let mut s = String::new();
    let run_col = trajs.len() > 1;
    if run_col {
        s.push_str("run\t");
    }
    let _ = writeln!(s, "time\t{}\t{}", labels[0], labels[1]);
    for (r, traj) in trajs.iter().enumerate() {
        for (t, (a, b)) in traj.times.iter().zip(&traj.states) {
            if run_col {
                let _ = write!(s, "{r}\t");
            }
            let _ = writeln!(s, "{}\t{a}\t{b}", num(*t));
        }
    }
    s
}

fn simulate_sir(config: &Config, a: SimulateSirArgs) -> Result<()> {
    let setup = sir_setup(config, a.model)?;
    let mut run = run_setup(config, a.run)?;
    let format = config.or(a.format, "format", SimulateFormat::Tsv)?;
    let trajs = (0..run.runs)
        .map(|_| gillespie_sir(&setup.params, setup.s0, setup.i0, run.t_end, &mut run.rng))
        .collect::<diffunif::Result<Vec<_>>>()?;
    let text = match format {
        SimulateFormat::Tsv => trajectories_tsv(&trajs, ["S", "I"]),
        SimulateFormat::Cases => {
            if trajs.len() != 1 {
                return Err(CliError::Validation("the cases format holds a single run".into()));
            }
            let start = config.or(a.start_date, "start-date", NaiveDate::from_ymd_opt(2020, 3, 1).unwrap())?;
            let n = setup.params.population;
            let mut s = String::from("date,infected,recovered\n");
            for day in 0..=run.t_end.floor() as i64 {
                let (sus, inf) = trajs[0].state_at(day as f64);
                let date = start + chrono::Duration::days(day);
                let _ = writeln!(s, "{date},{inf},{}", n - sus - inf);
            }
            s
        }
    };
    emit(run.out.as_deref(), text.as_bytes())
}

fn simulate_pp(config: &Config, a: SimulatePpArgs) -> Result<()> {
    let (params, x0, y0) = pp_setup(config, a.model)?;
    let mut run = run_setup(config, a.run)?;
    let trajs = (0..run.runs)
        .map(|_| gillespie_pp(&params, x0, y0, run.t_end, &mut run.rng))
        .collect::<diffunif::Result<Vec<_>>>()?;
    let overflows = trajs.iter().filter(|t| t.overflow).count();
    if overflows > 0 {
        log::warn!("{overflows} run(s) exceeded the predator cap Y_max = {}", params.y_max);
    }
    emit(run.out.as_deref(), trajectories_tsv(&trajs, ["X", "Y"]).as_bytes())
}

struct SolveSetup {
    times: Vec<f64>,
    opts: SolveOptions,
    min_prob: f64,
    out: Option<PathBuf>,
}

fn solve_setup(config: &Config, s: SolveArgs) -> Result<SolveSetup> {
    let raw: String = config.required(s.times, "times")?;
    let times = raw
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Validation(format!("bad time {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Validation("--times must be nonnegative and nondecreasing".into()));
    }
    let eps = config.or(s.eps, "eps", DEFAULT_EPS)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CliError::Validation(format!("--eps must lie in (0, 1), got {eps}")));
    }
    Ok(SolveSetup {
        times,
        opts: SolveOptions::with_eps(eps),
        min_prob: config.or(s.min_prob, "min-prob", 0.0)?,
        out: config.value(s.out, "out")?,
    })
}

/// Walks through the requested times, advancing the distribution by the
/// gaps. `step` returns the new distribution and the truncation defect of
/// the step. Reports go to the log, the table is returned.
fn solve_table(
    setup: &SolveSetup,
    p0: StateDistribution,
    labels: [&str; 2],
    keep: impl Fn(usize, usize) -> bool,
    mut step: impl FnMut(&StateDistribution, f64) -> Result<(StateDistribution, f64, usize)>,
) -> Result<String> {
    let mut text = format!("time\t{}\t{}\tprobability\n", labels[0], labels[1]);
    let mut p = p0;
    let mut now = 0.0;
    let mut kept = 1.0;
    for &t in &setup.times {
        if t > now {
            let (next, defect, iterations) = step(&p, t - now)?;
            p = next;
            kept *= 1.0 - defect;
            log::info!("t={} iterations={iterations} truncation_defect={}", num(t), num(1.0 - kept));
            now = t;
        }
        eprintln!("t={}\ttruncation_defect={}\tmissing_mass={}", num(t), num(1.0 - kept), num(1.0 - p.total()));
        let width = p.grid_shape()[1];
        for (k, &v) in p.values().iter().enumerate() {
            let (a, b) = (k / width, k % width);
            if v > setup.min_prob && keep(a, b) {
                let _ = writeln!(text, "{}\t{a}\t{b}\t{}", num(t), num(v));
            }
        }
    }
    Ok(text)
}

fn solve_sir(config: &Config, a: SolveSirArgs) -> Result<()> {
    let setup = sir_setup(config, a.model)?;
    let solve = solve_setup(config, a.solve)?;
    let n = setup.params.population;
    let side = n as usize + 1;
    let p0 = StateDistribution::point_mass(vec![side, side], &[setup.s0 as usize, setup.i0 as usize])?;
    let text = solve_table(
        &solve,
        p0,
        ["S", "I"],
        |s, i| s + i <= n as usize,
        |p, dt| {
            let sys = full_system(&setup.params, dt)?;
            let (next, report) = uniformize_with(p, &sys, &solve.opts)?;
            Ok((next, report.mass_defect, report.iterations))
        },
    )?;
    emit(solve.out.as_deref(), text.as_bytes())
}

fn solve_pp(config: &Config, a: SolvePpArgs) -> Result<()> {
    let (params, x0, y0) = pp_setup(config, a.model)?;
    let solve = solve_setup(config, a.solve)?;
    let p0 = StateDistribution::point_mass(params.grid_shape(), &[x0 as usize, y0 as usize])?;
    let text = solve_table(
        &solve,
        p0,
        ["X", "Y"],
        |_, _| true,
        |p, dt| {
            let sol = propagate_pp(&params, p, dt, &solve.opts)?;
            Ok((sol.p, sol.report.mass_defect, sol.report.iterations))
        },
    )?;
    emit(solve.out.as_deref(), text.as_bytes())
}

struct DataSetup {
    cases: CaseSeries,
    out: Option<PathBuf>,
}

fn data_setup(config: &Config, d: DataArgs) -> Result<DataSetup> {
    let n: u64 = config.required(d.population, "population")?;
    let path: PathBuf = config.required(d.data, "data")?;
    Ok(DataSetup { cases: ingest(&path, n)?, out: config.value(d.out, "out")? })
}

fn rates(config: &Config, alpha: Option<f64>, beta: Option<f64>, defaults: Option<(f64, f64)>, n: u64) -> Result<SirParams> {
    let (alpha, beta) = match defaults {
        Some((a, b)) => (config.or(alpha, "alpha", a)?, config.or(beta, "beta", b)?),
        None => (config.required(alpha, "alpha")?, config.required(beta, "beta")?),
    };
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(CliError::Validation(format!("rates must be positive, got alpha={alpha} beta={beta}")));
    }
    Ok(SirParams::from_rates(alpha, beta, n)?)
}

fn loglik(config: &Config, a: LoglikArgs) -> Result<()> {
    let data = data_setup(config, a.data)?;
    let params = rates(config, a.alpha, a.beta, None, data.cases.series.population())?;
    let ll = log_likelihood(&params, &data.cases.series)?;
    let text = format!(
        "log_likelihood\t{}\nd_log_alpha\t{}\nd_log_beta\t{}\nzero_probability\t{}\n",
        num(ll.value),
        num(ll.grad[0]),
        num(ll.grad[1]),
        ll.zero_probability
    );
    emit(data.out.as_deref(), text.as_bytes())
}

fn fit(config: &Config, a: FitArgs) -> Result<()> {
    let data = data_setup(config, a.data)?;
    let init = rates(config, a.alpha, a.beta, Some((0.1, 0.2)), data.cases.series.population())?;
    let defaults = AscentConfig::default();
    let cfg = AscentConfig {
        max_iter: config.or(a.max_iter, "max-iter", defaults.max_iter)?,
        grad_tol: config.or(a.tol, "tol", defaults.grad_tol)?,
        ..defaults
    };
    let result = fit_map(&data.cases.series, init, &cfg)?;
    if !result.converged {
        log::warn!("gradient tolerance not reached after {} iterations", result.iterations);
    }
    let text = format!(
        "alpha\t{}\nbeta\t{}\nlog_likelihood\t{}\niterations\t{}\nconverged\t{}\n",
        num(result.params.alpha()),
        num(result.params.beta()),
        num(result.log_lik.value),
        result.iterations,
        result.converged
    );
    emit(data.out.as_deref(), text.as_bytes())
}

fn fit_ode(config: &Config, a: DataArgs) -> Result<()> {
    let data = data_setup(config, a)?;
    let result = least_squares_fit(&data.cases.series)?;
    let text = format!(
        "alpha\t{}\nbeta\t{}\nresidual\t{}\n",
        num(result.alpha),
        num(result.beta),
        num(result.residual)
    );
    emit(data.out.as_deref(), text.as_bytes())
}

fn sample_line(segment: Option<&str>, s: &PosteriorSample) -> String {
    let seg = segment.map(|m| format!("\"segment\":\"{m}\",")).unwrap_or_default();
    format!(
        "{{{seg}\"chain\":{},\"iter\":{},\"log_alpha\":{},\"log_beta\":{},\"log_post\":{},\"accepted\":{}}}\n",
        s.chain_id,
        s.iter,
        json_num(s.log_alpha),
        json_num(s.log_beta),
        json_num(s.log_post),
        s.accepted
    )
}

fn hmc(config: &Config, a: HmcArgs) -> Result<()> {
    let data = data_setup(config, a.data)?;
    let defaults = HmcConfig::default();
    let rate_min: f64 = config.or(a.rate_min, "rate-min", 0.001)?;
    let rate_max: f64 = config.or(a.rate_max, "rate-max", 10.0)?;
    if !(rate_min > 0.0 && rate_min < rate_max) {
        return Err(CliError::Validation(format!("need 0 < rate-min < rate-max, got {rate_min}, {rate_max}")));
    }
    let (lo, hi) = (rate_min.ln(), rate_max.ln());
    let cfg = HmcConfig {
        n_chains: config.or(a.chains, "chains", defaults.n_chains)?,
        chain_len: config.or(a.len, "len", defaults.chain_len)?,
        burn_in: config.or(a.burn_in, "burn-in", defaults.burn_in)?,
        step_size: config.or(a.step_size, "step-size", defaults.step_size)?,
        n_leapfrog: config.or(a.leapfrog, "leapfrog", defaults.n_leapfrog)?,
        prior_box: PriorBox { lower: [lo, lo], upper: [hi, hi] },
        seed: config.or(a.seed, "seed", defaults.seed)?,
        init: None,
    };
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;

    let segments: Vec<(Option<String>, ObservationSeries)> = if config.switch(a.segment_by_month, "segment-by-month")? {
        data.cases.months().into_iter().map(|(m, s)| (Some(m), s)).collect()
    } else {
        vec![(None, data.cases.series.clone())]
    };

    let mut text = String::new();
    for (k, (name, series)) in segments.iter().enumerate() {
        let label = name.as_deref().unwrap_or("all data");
        if series.len() < 2 {
            log::warn!("skipping {label}: fewer than two observations");
            continue;
        }
        let seg_cfg = HmcConfig { seed: cfg.seed.wrapping_add(k as u64), ..cfg };
        let samples = hmc_sample(series, &seg_cfg)?;
        report_summary(label, &samples);
        for s in &samples {
            text.push_str(&sample_line(name.as_deref(), s));
        }
    }
    emit(data.out.as_deref(), text.as_bytes())
}

fn report_summary(label: &str, samples: &[PosteriorSample]) {
    match summarize_posterior(samples) {
        Ok(s) => {
            let mean_acc = s.acceptance.iter().map(|(_, r)| r).sum::<f64>() / s.acceptance.len() as f64;
            log::info!(
                "{label}: {} samples, log alpha {:.4} [{:.4}, {:.4}] rhat {:.3}, log beta {:.4} [{:.4}, {:.4}] rhat {:.3}, acceptance {:.2}",
                s.n_samples,
                s.log_alpha.mean,
                s.log_alpha.q05,
                s.log_alpha.q95,
                s.log_alpha.rhat,
                s.log_beta.mean,
                s.log_beta.q05,
                s.log_beta.q95,
                s.log_beta.rhat,
                mean_acc
            );
            if s.acceptance.iter().any(|&(_, r)| r == 0.0) {
                log::warn!("{label}: some chains accepted nothing; try a smaller --step-size");
            }
        }
        Err(e) => log::info!("{label}: no summary ({e})"),
    }
}
