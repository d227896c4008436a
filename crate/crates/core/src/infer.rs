//! Parameter inference for the stochastic SIR model from snapshot data.
//!
//! The likelihood of a series of observed states `x_1, ..., x_K` at times
//! `t_1 < ... < t_K` is the product of transition probabilities
//! `[exp((t_k - t_{k-1}) Q) delta(x_{k-1})]_{x_k}`. Each factor and its
//! gradient in `(log alpha, log beta)` comes from one differentiated
//! uniformization solve on the window of states between `x_{k-1}` and
//! `x_k`; the solves are independent and run in parallel.
//!
//! On top of the likelihood sit a gradient-ascent MAP estimator and a
//! Hamiltonian Monte Carlo sampler with a uniform prior on a box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::sir::{restricted_system, SirParams, SirState};
use crate::ssa::Trajectory;
use crate::unif::{diff_uniformize_with, SolveOptions, StateDistribution};
use crate::{Error, Result};

/// One snapshot `(t, S, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub s: u64,
    pub i: u64,
}

impl Observation {
    pub fn new(t: f64, s: u64, i: u64) -> Self {
        Self { t, s, i }
    }

    pub fn state(&self) -> SirState {
        SirState::new(self.s, self.i)
    }
}

/// Time-ordered observations of one population. Construction enforces
/// strictly increasing times, `S + I <= N`, nonincreasing `S` and
/// nondecreasing `R = N - S - I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    population: u64,
    records: Vec<Observation>,
}

impl ObservationSeries {
    pub fn new(population: u64, records: Vec<Observation>) -> Result<Self> {
        if population == 0 {
            return Err(Error::InvalidArgument("population must be positive".into()));
        }
        let invalid = |index, reason: String| Err(Error::InvalidData { index, reason });
        for (k, r) in records.iter().enumerate() {
            if !r.t.is_finite() {
                return invalid(k, format!("time {} is not finite", r.t));
            }
            if r.s + r.i > population {
                return invalid(k, format!("S + I = {} exceeds population {population}", r.s + r.i));
            }
            if k == 0 {
                continue;
            }
            let prev = &records[k - 1];
            if r.t <= prev.t {
                return invalid(k, format!("time {} does not increase past {}", r.t, prev.t));
            }
            if r.s > prev.s {
                return invalid(k, format!("susceptibles increase from {} to {}", prev.s, r.s));
            }
            if r.s + r.i > prev.s + prev.i {
                return invalid(k, "recovered count decreases".to_string());
            }
        }
        Ok(Self { population, records })
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Snapshots of a simulated path at the given increasing times.
    pub fn from_trajectory(traj: &Trajectory, population: u64, times: &[f64]) -> Result<Self> {
        let records = times
            .iter()
            .zip(traj.resample(times))
            .map(|(&t, (s, i))| Observation::new(t, s, i))
            .collect();
        Self::new(population, records)
    }

    /// A contiguous sub-series; validity is inherited.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self { population: self.population, records: self.records[range].to_vec() }
    }
}

/// Log-likelihood and its gradient in `(log alpha, log beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub grad: [f64; 2],
    /// Some observed transition has probability zero; `value` is `-inf`
    /// and `grad` is zero.
    pub zero_probability: bool,
}

/// Probability of moving `from -> to` in time `dt`, with its gradient.
pub fn transition_probability(
    params: &SirParams,
    from: SirState,
    to: SirState,
    dt: f64,
    opts: &SolveOptions,
) -> Result<(f64, [f64; 2])> {
    let (sys, window) = restricted_system(params, from, to, dt)?;
    let start = window.coords(from).expect("window contains its start");
    let end = window.coords(to).expect("window contains its end");
    let p0 = StateDistribution::point_mass(window.shape().to_vec(), &start)?;
    let (p, dp, _) = diff_uniformize_with(&p0, &sys, opts)?;
    Ok((p.get(&end), [dp[0].get(&end), dp[1].get(&end)]))
}

pub fn log_likelihood(params: &SirParams, obs: &ObservationSeries) -> Result<LogLikelihood> {
    log_likelihood_with(params, obs, &SolveOptions::default())
}

pub fn log_likelihood_with(
    params: &SirParams,
    obs: &ObservationSeries,
    opts: &SolveOptions,
) -> Result<LogLikelihood> {
    if params.population != obs.population() {
        return Err(Error::InvalidArgument(format!(
            "parameters are for population {} but data for {}",
            params.population,
            obs.population()
        )));
    }
    let factors: Vec<Result<(f64, [f64; 2])>> = obs
        .records()
        .par_windows(2)
        .enumerate()
        .map(|(k, pair)| {
            transition_probability(params, pair[0].state(), pair[1].state(), pair[1].t - pair[0].t, opts)
                .map_err(|e| match e {
                    Error::InvalidTransition { reason, .. } => {
                        Error::InvalidData { index: k + 1, reason: reason.to_string() }
                    }
                    other => other,
                })
        })
        .collect();

    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for factor in factors {
        let (p, dp) = factor?;
        if !(p > 0.0) {
            return Ok(LogLikelihood { value: f64::NEG_INFINITY, grad: [0.0; 2], zero_probability: true });
        }
        value += p.ln();
        grad[0] += dp[0] / p;
        grad[1] += dp[1] / p;
    }
    Ok(LogLikelihood { value, grad, zero_probability: false })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    pub initial_step: f64,
    /// Backtracking halvings allowed before a step is declared impossible.
    pub max_halvings: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self { max_iter: 1000, grad_tol: 1e-4, initial_step: 0.01, max_halvings: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapFit {
    pub params: SirParams,
    pub log_lik: LogLikelihood,
    pub iterations: usize,
    /// The gradient tolerance was met (as opposed to running out of
    /// iterations or of line-search progress).
    pub converged: bool,
    /// Log-likelihood after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Maximum-likelihood estimate by gradient ascent with backtracking.
pub fn fit_map(obs: &ObservationSeries, init: SirParams, cfg: &AscentConfig) -> Result<MapFit> {
    let mut current = init;
    let mut ll = log_likelihood(&current, obs)?;
    if !ll.value.is_finite() {
        return Err(Error::ZeroLikelihood);
    }
    let mut trace = vec![ll.value];
    let mut step = cfg.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let g = ll.grad;
        let gnorm2 = g[0] * g[0] + g[1] * g[1];
        if gnorm2.sqrt() < cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let theta = [current.log_alpha + step * g[0], current.log_beta + step * g[1]];
            let candidate = current.with_theta(theta)?;
            let cand_ll = log_likelihood(&candidate, obs)?;
            // Armijo sufficient increase
            if cand_ll.value >= ll.value + 1e-4 * step * gnorm2 {
                accepted = Some((candidate, cand_ll));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((p, l)) => {
                current = p;
                ll = l;
                trace.push(ll.value);
                step *= 2.0;
            }
            None => break,
        }
    }
    Ok(MapFit { params: current, log_lik: ll, iterations, converged, trace })
}

/// An unnormalized log density on the plane with its gradient.
pub trait LogDensity: Sync {
    fn log_density_and_grad(&self, theta: [f64; 2]) -> (f64, [f64; 2]);
}

/// Axis-aligned support of the uniform prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorBox {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl PriorBox {
    pub fn contains(&self, theta: [f64; 2]) -> bool {
        (0..2).all(|j| theta[j] >= self.lower[j] && theta[j] <= self.upper[j])
    }

    pub fn is_empty(&self) -> bool {
        (0..2).any(|j| !(self.lower[j] < self.upper[j]))
    }
}

impl Default for PriorBox {
    /// `log alpha, log beta` in `[log 0.001, log 10]`.
    fn default() -> Self {
        let (lo, hi) = (0.001f64.ln(), 10f64.ln());
        Self { lower: [lo, lo], upper: [hi, hi] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    pub n_chains: usize,
    /// Transitions per chain, burn-in included.
    pub chain_len: usize,
    pub burn_in: usize,
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub prior_box: PriorBox,
    pub seed: u64,
    /// Chains start near this point (small jitter) instead of uniformly in
    /// the prior box.
    pub init: Option<[f64; 2]>,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 10,
            chain_len: 100,
            burn_in: 10,
            step_size: 0.05,
            n_leapfrog: 10,
            prior_box: PriorBox::default(),
            seed: 0,
            init: None,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.chain_len {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be shorter than the chain length {}",
                self.burn_in, self.chain_len
            )));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.prior_box.is_empty() {
            return Err(Error::InvalidArgument("prior box is empty".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidArgument("need at least one chain".into()));
        }
        Ok(())
    }
}

/// One retained HMC draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSample {
    pub chain_id: usize,
    pub iter: usize,
    pub log_alpha: f64,
    pub log_beta: f64,
    pub log_post: f64,
    /// Whether the proposal leading to this draw was accepted.
    pub accepted: bool,
}

impl PosteriorSample {
    pub fn theta(&self) -> [f64; 2] {
        [self.log_alpha, self.log_beta]
    }
}

/// SIR posterior under a uniform prior on `prior_box`.
pub struct SirPosterior<'a> {
    pub obs: &'a ObservationSeries,
    pub prior_box: PriorBox,
    pub opts: SolveOptions,
}

impl LogDensity for SirPosterior<'_> {
    fn log_density_and_grad(&self, theta: [f64; 2]) -> (f64, [f64; 2]) {
        if !self.prior_box.contains(theta) {
            return (f64::NEG_INFINITY, [0.0; 2]);
        }
        let evaluated = SirParams::new(theta[0], theta[1], self.obs.population())
            .and_then(|p| log_likelihood_with(&p, self.obs, &self.opts));
        match evaluated {
            Ok(ll) => (ll.value, ll.grad),
            Err(e) => {
                log::warn!("likelihood failed at {theta:?}: {e}");
                (f64::NEG_INFINITY, [0.0; 2])
            }
        }
    }
}

/// State of a leapfrog trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub theta: [f64; 2],
    pub momentum: [f64; 2],
    pub log_density: f64,
    pub grad: [f64; 2],
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &T, theta: [f64; 2], momentum: [f64; 2]) -> Self {
        let (log_density, grad) = target.log_density_and_grad(theta);
        Self { theta, momentum, log_density, grad }
    }

    /// `-log density + |momentum|^2 / 2` with unit mass matrix.
    pub fn hamiltonian(&self) -> f64 {
        -self.log_density + 0.5 * (self.momentum[0].powi(2) + self.momentum[1].powi(2))
    }
}

/// `n_steps` leapfrog steps of size `step`. Returns the end point and
/// whether the log density stayed finite along the whole path.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    start: PhasePoint,
    step: f64,
    n_steps: usize,
) -> (PhasePoint, bool) {
    let mut z = start;
    let mut finite = z.log_density.is_finite();
    for _ in 0..n_steps {
        for j in 0..2 {
            z.momentum[j] += 0.5 * step * z.grad[j];
            z.theta[j] += step * z.momentum[j];
        }
        let (ld, grad) = target.log_density_and_grad(z.theta);
        z.log_density = ld;
        z.grad = grad;
        finite &= ld.is_finite();
        for j in 0..2 {
            z.momentum[j] += 0.5 * step * z.grad[j];
        }
    }
    (z, finite)
}

fn initial_point<T: LogDensity + ?Sized>(target: &T, cfg: &HmcConfig, rng: &mut ChaCha8Rng) -> Option<PhasePoint> {
    let b = &cfg.prior_box;
    for _ in 0..100 {
        let theta = match cfg.init {
            Some(center) => {
                let jitter: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                [
                    (center[0] + 0.05 * jitter[0]).clamp(b.lower[0], b.upper[0]),
                    (center[1] + 0.05 * jitter[1]).clamp(b.lower[1], b.upper[1]),
                ]
            }
            None => [
                rng.random_range(b.lower[0]..b.upper[0]),
                rng.random_range(b.lower[1]..b.upper[1]),
            ],
        };
        let z = PhasePoint::new(target, theta, [0.0; 2]);
        if z.log_density.is_finite() {
            return Some(z);
        }
    }
    None
}

fn run_chain<T: LogDensity + ?Sized>(target: &T, cfg: &HmcConfig, chain_id: usize) -> Result<Vec<PosteriorSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain_id as u64);
    let mut current = initial_point(target, cfg, &mut rng).ok_or(Error::ZeroLikelihood)?;
    let mut out = Vec::with_capacity(cfg.chain_len - cfg.burn_in);
    for iter in 0..cfg.chain_len {
        current.momentum = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let h0 = current.hamiltonian();
        let (proposal, finite) = leapfrog(target, current, cfg.step_size, cfg.n_leapfrog);
        let inside = cfg.prior_box.contains(proposal.theta);
        let log_u = rng.random::<f64>().ln();
        let accepted = finite && inside && log_u < h0 - proposal.hamiltonian();
        if accepted {
            current = proposal;
        }
        if iter >= cfg.burn_in {
            out.push(PosteriorSample {
                chain_id,
                iter,
                log_alpha: current.theta[0],
                log_beta: current.theta[1],
                log_post: current.log_density,
                accepted,
            });
        }
    }
    Ok(out)
}

/// Runs `cfg.n_chains` independent HMC chains on `target` and returns the
/// retained draws ordered by chain, then iteration.
pub fn hmc_sample_target<T: LogDensity + ?Sized>(target: &T, cfg: &HmcConfig) -> Result<Vec<PosteriorSample>> {
    cfg.validate()?;
    let chains: Vec<Result<Vec<PosteriorSample>>> =
        (0..cfg.n_chains).into_par_iter().map(|c| run_chain(target, cfg, c)).collect();
    let mut out = Vec::with_capacity(cfg.n_chains * (cfg.chain_len - cfg.burn_in));
    for chain in chains {
        out.extend(chain?);
    }
    Ok(out)
}

/// HMC on the SIR posterior with a uniform prior on `cfg.prior_box`.
pub fn hmc_sample(obs: &ObservationSeries, cfg: &HmcConfig) -> Result<Vec<PosteriorSample>> {
    let target = SirPosterior { obs, prior_box: cfg.prior_box, opts: SolveOptions::default() };
    hmc_sample_target(&target, cfg)
}

/// Marginal summary of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginal {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q95: f64,
    /// Split-chain potential scale reduction factor.
    pub rhat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub log_alpha: Marginal,
    pub log_beta: Marginal,
    pub covariance: [[f64; 2]; 2],
    /// `(chain_id, acceptance rate)` over the retained draws.
    pub acceptance: Vec<(usize, f64)>,
    pub n_samples: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Split-R̂: every chain is halved, then between- and within-chain
/// variances are compared. Chains of identical values give 1.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let pieces: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[c.len() - half..]])
        .collect();
    let n = half as f64;
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let within = pieces.iter().map(|p| variance(p)).sum::<f64>() / pieces.len() as f64;
    let between_over_n = variance(&means);
    if within == 0.0 {
        return if between_over_n == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * within + between_over_n;
    (var_plus / within).sqrt()
}

fn marginal(chains: &[Vec<f64>]) -> Marginal {
    let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
    let m = mean(&all);
    let sd = variance(&all).max(0.0).sqrt();
    all.sort_by(f64::total_cmp);
    Marginal { mean: m, sd, q05: quantile(&all, 0.05), q95: quantile(&all, 0.95), rhat: split_rhat(chains) }
}

/// Means, spread, 90% intervals, split-R̂ and acceptance rates. Needs at
/// least two chains with ten draws each.
pub fn summarize_posterior(samples: &[PosteriorSample]) -> Result<PosteriorSummary> {
    let mut ids: Vec<usize> = samples.iter().map(|s| s.chain_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::TooFewSamples(format!("{} chain(s), need at least 2", ids.len())));
    }
    let by_chain: Vec<Vec<&PosteriorSample>> = ids
        .iter()
        .map(|&id| samples.iter().filter(|s| s.chain_id == id).collect())
        .collect();
    if let Some(short) = by_chain.iter().find(|c| c.len() < 10) {
        return Err(Error::TooFewSamples(format!(
            "chain {} has {} draws, need at least 10",
            short[0].chain_id,
            short.len()
        )));
    }
    let coordinate = |j: usize| -> Vec<Vec<f64>> {
        by_chain.iter().map(|c| c.iter().map(|s| s.theta()[j]).collect()).collect()
    };
    let (a, b) = (coordinate(0), coordinate(1));
    let flat_a: Vec<f64> = a.iter().flatten().copied().collect();
    let flat_b: Vec<f64> = b.iter().flatten().copied().collect();
    let (ma, mb) = (mean(&flat_a), mean(&flat_b));
    let n = flat_a.len() as f64;
    let cov_ab = flat_a.iter().zip(&flat_b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let acceptance = by_chain
        .iter()
        .map(|c| (c[0].chain_id, c.iter().filter(|s| s.accepted).count() as f64 / c.len() as f64))
        .collect();
    Ok(PosteriorSummary {
        log_alpha: marginal(&a),
        log_beta: marginal(&b),
        covariance: [[variance(&flat_a), cov_ab], [cov_ab, variance(&flat_b)]],
        acceptance,
        n_samples: samples.len(),
    })
}
