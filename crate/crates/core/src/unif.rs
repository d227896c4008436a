//! Uniformization and differentiated uniformization.
//!
//! For a generator `Q` and any `gamma >= max |Q_xx|`, `P = Q / gamma + Id` is
//! nonnegative and
//!
//! ```text
//! exp(tQ) p0 = sum_n  e^{-gamma t} (gamma t)^n / n!  P^n p0
//! ```
//!
//! Every term of the series is nonnegative, so it can be summed without
//! cancellation. Differentiating the series term by term with respect to a
//! parameter `theta` gives
//!
//! ```text
//! dp/dtheta = sum_n  w_n ( (P^n)' p0 + gamma' (n / gamma - t) P^n p0 )
//! ```
//!
//! where `(P^n)' p0` obeys the recursion `q'_n = P' q_{n-1} + P q'_{n-1}`.
//! Both series are truncated once the Poisson mass still missing from the
//! weights drops below `eps`.
//!
//! When `gamma * t` is large, `e^{-gamma t}` underflows. The solver then
//! splits `t` into equal substeps with `gamma * dt <= max_rate_per_step`
//! and chains the solves, carrying the derivative forward by the product
//! rule.

use crate::kronop::TensorOperator;
use crate::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-10;

/// Largest `gamma * dt` handled in a single substep by default.
pub const DEFAULT_MAX_RATE_PER_STEP: f64 = 200.0;

/// Rounding noise tolerated below zero before entries are clamped.
const NEGATIVE_CLAMP: f64 = 1e-14;

/// Above this Poisson mean `e^{-lambda}` is computed in the log domain.
const DIRECT_WEIGHT_LIMIT: f64 = 700.0;

/// A real vector over a rectangular grid of states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    values: Vec<f64>,
    grid_shape: Vec<usize>,
}

impl StateDistribution {
    pub fn new(values: Vec<f64>, grid_shape: Vec<usize>) -> Result<Self> {
        let dim: usize = grid_shape.iter().product();
        if grid_shape.is_empty() || dim != values.len() {
            return Err(Error::DimensionMismatch { expected: dim, got: values.len() });
        }
        Ok(Self { values, grid_shape })
    }

    pub fn zeros(grid_shape: Vec<usize>) -> Self {
        let dim = grid_shape.iter().product();
        Self { values: vec![0.0; dim], grid_shape }
    }

    /// All mass on one grid point.
    pub fn point_mass(grid_shape: Vec<usize>, coords: &[usize]) -> Result<Self> {
        if coords.len() != grid_shape.len() || coords.iter().zip(&grid_shape).any(|(c, d)| c >= d) {
            return Err(Error::InvalidArgument(format!(
                "point {coords:?} is outside the grid {grid_shape:?}"
            )));
        }
        let mut out = Self::zeros(grid_shape);
        let idx = crate::kronop::linear_index(&out.grid_shape, coords);
        out.values[idx] = 1.0;
        Ok(out)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid_shape(&self) -> &[usize] {
        &self.grid_shape
    }

    pub fn get(&self, coords: &[usize]) -> f64 {
        self.values[crate::kronop::linear_index(&self.grid_shape, coords)]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// A generator together with its parameter derivatives.
#[derive(Debug, Clone)]
pub struct Generator {
    pub q: TensorOperator,
    pub dq: Vec<TensorOperator>,
}

/// `P = Q / gamma + Id` and `P' = -(gamma' / gamma^2) Q + Q' / gamma`, with
/// the time horizon of the solve.
#[derive(Debug, Clone)]
pub struct UniformizedSystem {
    p: TensorOperator,
    dp: Vec<TensorOperator>,
    gamma: f64,
    dgamma: Vec<f64>,
    t: f64,
}

impl UniformizedSystem {
    /// `gamma` must bound every `|Q_xx|`. A zero `gamma` is accepted only for
    /// the zero generator, in which case `P` is the identity.
    pub fn new(generator: &Generator, gamma: f64, dgamma: &[f64], t: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
        }
        if dgamma.len() != generator.dq.len() {
            return Err(Error::InvalidArgument(format!(
                "{} generator derivatives but {} gamma derivatives",
                generator.dq.len(),
                dgamma.len()
            )));
        }
        let q = &generator.q;
        let shape = q.grid_shape().to_vec();
        let (p, dp) = if gamma == 0.0 {
            let p = TensorOperator::identity(shape.clone())?;
            let dp = generator
                .dq
                .iter()
                .map(|_| TensorOperator::zero(shape.clone()))
                .collect::<Result<Vec<_>>>()?;
            (p, dp)
        } else {
            let p = q.scale_shift(1.0 / gamma, 1.0);
            let dp = generator
                .dq
                .iter()
                .zip(dgamma)
                .map(|(dq, &dg)| q.scaled(-dg / (gamma * gamma)).sum(&dq.scaled(1.0 / gamma)))
                .collect::<Result<Vec<_>>>()?;
            (p, dp)
        };
        Ok(Self { p, dp, gamma, dgamma: dgamma.to_vec(), t })
    }

    /// A system without parameter derivatives, for forward solves only.
    pub fn forward(q: &TensorOperator, gamma: f64, t: f64) -> Result<Self> {
        let generator = Generator { q: q.clone(), dq: Vec::new() };
        Self::new(&generator, gamma, &[], t)
    }

    /// Same operators over a different horizon.
    pub fn at_time(mut self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
        }
        self.t = t;
        Ok(self)
    }

    pub fn p(&self) -> &TensorOperator {
        &self.p
    }

    pub fn dp(&self) -> &[TensorOperator] {
        &self.dp
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dgamma(&self) -> &[f64] {
        &self.dgamma
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_params(&self) -> usize {
        self.dp.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Total number of `P`-products over all substeps.
    pub iterations: usize,
    /// Poisson mass left out of the truncated series.
    pub mass_defect: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub eps: f64,
    /// Substep whenever `gamma * t` exceeds this. `f64::INFINITY` forces a
    /// single pass with log-domain Poisson weights.
    pub max_rate_per_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { eps: DEFAULT_EPS, max_rate_per_step: DEFAULT_MAX_RATE_PER_STEP }
    }
}

impl SolveOptions {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }

    pub fn single_pass(eps: f64) -> Self {
        Self { eps, max_rate_per_step: f64::INFINITY }
    }
}

/// Poisson(lambda) probabilities `w_0, w_1, ...` by the ratio recursion.
struct PoissonWeights {
    lambda: f64,
    n: usize,
    direct: f64,
    log: f64,
    log_domain: bool,
}

impl PoissonWeights {
    fn new(lambda: f64) -> Self {
        let log_domain = lambda > DIRECT_WEIGHT_LIMIT;
        Self { lambda, n: 0, direct: (-lambda).exp(), log: -lambda, log_domain }
    }
}

impl Iterator for PoissonWeights {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.n > 0 {
            let ratio = self.lambda / self.n as f64;
            if self.log_domain {
                self.log += ratio.ln();
            } else {
                self.direct *= ratio;
            }
        }
        self.n += 1;
        Some(if self.log_domain { self.log.exp() } else { self.direct })
    }
}

/// Kahan-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Truncation point and resulting defect for Poisson mean `lambda`.
///
/// With `slope > 0` the derivative series is also taken into account:
/// truncating after `w_m` perturbs the derivative of the retained mass by
/// `slope * w_m` (`slope = max_j |dgamma_j| t`), and that must drop below
/// `eps` as well.
fn truncation(lambda: f64, eps: f64, slope: f64) -> (usize, f64) {
    let mut cum = CompensatedSum::default();
    // past the mode the weights only shrink; once they stop moving the
    // cumulative sum they can never close the gap to eps
    let give_up = lambda + 40.0 * lambda.sqrt() + 100.0;
    for (n, w) in PoissonWeights::new(lambda).enumerate() {
        cum.add(w);
        let defect = 1.0 - cum.sum;
        let settled = defect < eps && slope * w < eps;
        if settled || (n as f64 > give_up) {
            return (n, defect.max(0.0));
        }
    }
    unreachable!("PoissonWeights is infinite")
}

/// Smallest `m` with `1 - sum_{n<=m} Poisson(n; gamma t) < eps`.
pub fn poisson_steps(gamma: f64, t: f64, eps: f64) -> usize {
    truncation(gamma * t, eps, 0.0).0
}

fn check_inputs(p0: &StateDistribution, sys: &UniformizedSystem, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    if p0.grid_shape() != sys.p.grid_shape() {
        return Err(Error::ShapeMismatch {
            expected: sys.p.grid_shape().to_vec(),
            got: p0.grid_shape().to_vec(),
        });
    }
    if p0.values.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("initial distribution has negative or NaN entries".into()));
    }
    if p0.total() > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "initial distribution sums to {} > 1",
            p0.total()
        )));
    }
    Ok(())
}

/// `exp(tQ) p0` by uniformization with default substepping.
pub fn uniformize(
    p0: &StateDistribution,
    sys: &UniformizedSystem,
    eps: f64,
) -> Result<(StateDistribution, SolveReport)> {
    uniformize_with(p0, sys, &SolveOptions::with_eps(eps))
}

pub fn uniformize_with(
    p0: &StateDistribution,
    sys: &UniformizedSystem,
    opts: &SolveOptions,
) -> Result<(StateDistribution, SolveReport)> {
    check_inputs(p0, sys, opts.eps)?;
    let (p, _, report) = solve(p0, sys, opts, false)?;
    Ok((p, report))
}

/// `exp(tQ) p0` together with `d/dtheta_j exp(tQ) p0` for every parameter.
pub fn diff_uniformize(
    p0: &StateDistribution,
    sys: &UniformizedSystem,
    eps: f64,
) -> Result<(StateDistribution, Vec<StateDistribution>, SolveReport)> {
    diff_uniformize_with(p0, sys, &SolveOptions::with_eps(eps))
}

pub fn diff_uniformize_with(
    p0: &StateDistribution,
    sys: &UniformizedSystem,
    opts: &SolveOptions,
) -> Result<(StateDistribution, Vec<StateDistribution>, SolveReport)> {
    check_inputs(p0, sys, opts.eps)?;
    solve(p0, sys, opts, true)
}

fn solve(
    p0: &StateDistribution,
    sys: &UniformizedSystem,
    opts: &SolveOptions,
    with_derivatives: bool,
) -> Result<(StateDistribution, Vec<StateDistribution>, SolveReport)> {
    let lambda = sys.gamma * sys.t;
    let substeps = if lambda > opts.max_rate_per_step {
        (lambda / opts.max_rate_per_step).ceil() as usize
    } else {
        1
    };
    let dt = sys.t / substeps as f64;
    let step_eps = opts.eps / substeps as f64;
    let n_params = if with_derivatives { sys.n_params() } else { 0 };

    let mut state = Workspace::new(p0.values.clone(), n_params);
    let mut iterations = 0;
    let mut kept = 1.0;
    for _ in 0..substeps {
        let (m, defect) = state.step(sys, dt, step_eps, iterations)?;
        iterations += m;
        kept *= 1.0 - defect;
    }

    let shape = p0.grid_shape.clone();
    let mut p = state.p;
    for x in &mut p {
        if *x < 0.0 && *x >= -NEGATIVE_CLAMP {
            *x = 0.0;
        }
    }
    let dp = state
        .dp
        .into_iter()
        .map(|values| StateDistribution { values, grid_shape: shape.clone() })
        .collect();
    let report = SolveReport { iterations, mass_defect: 1.0 - kept, substeps };
    Ok((StateDistribution { values: p, grid_shape: shape }, dp, report))
}

/// Buffers for the series recursion. `p` and `dp` hold the input of the
/// next substep on entry and its output on exit.
struct Workspace {
    p: Vec<f64>,
    dp: Vec<Vec<f64>>,
    q: Vec<f64>,
    q_next: Vec<f64>,
    dq: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(p0: Vec<f64>, n_params: usize) -> Self {
        let dim = p0.len();
        Self {
            dp: vec![vec![0.0; dim]; n_params],
            q: vec![0.0; dim],
            q_next: vec![0.0; dim],
            dq: vec![vec![0.0; dim]; n_params],
            scratch: vec![0.0; dim],
            p: p0,
        }
    }

    /// One substep of length `dt`. Returns the truncation index and defect.
    fn step(
        &mut self,
        sys: &UniformizedSystem,
        dt: f64,
        eps: f64,
        offset: usize,
    ) -> Result<(usize, f64)> {
        let lambda = sys.gamma * dt;
        let slope = if self.dp.is_empty() {
            0.0
        } else {
            sys.dgamma.iter().fold(0.0f64, |acc, g| acc.max(g.abs())) * dt
        };
        let (m, defect) = truncation(lambda, eps, slope);

        std::mem::swap(&mut self.q, &mut self.p);
        self.p.fill(0.0);
        for (dq, dp) in self.dq.iter_mut().zip(&mut self.dp) {
            std::mem::swap(dq, dp);
            dp.fill(0.0);
        }

        for (n, w) in PoissonWeights::new(lambda).enumerate().take(m + 1) {
            if w != 0.0 {
                axpy(w, &self.q, &mut self.p);
                for (j, (dq, dp)) in self.dq.iter().zip(&mut self.dp).enumerate() {
                    axpy(w, dq, dp);
                    if sys.gamma > 0.0 {
                        let c = w * sys.dgamma[j] * (n as f64 / sys.gamma - dt);
                        axpy(c, &self.q, dp);
                    }
                }
            }
            if n == m {
                break;
            }
            for (j, dq) in self.dq.iter_mut().enumerate() {
                sys.dp[j].apply(&self.q, &mut self.scratch);
                sys.p.apply_add(dq, &mut self.scratch);
                std::mem::swap(dq, &mut self.scratch);
                if !dq.iter().sum::<f64>().is_finite() {
                    return Err(Error::NumericalFailure { iteration: offset + n + 1 });
                }
            }
            sys.p.apply(&self.q, &mut self.q_next);
            std::mem::swap(&mut self.q, &mut self.q_next);
            if !self.q.iter().sum::<f64>().is_finite() {
                return Err(Error::NumericalFailure { iteration: offset + n + 1 });
            }
        }
        Ok((m, defect))
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
