//! Stochastic SIR model: generator in Kronecker form, uniformization rates,
//! state-space restriction between observations, and the deterministic
//! reference model.
//!
//! States are pairs `(S, I)` on the grid `{0..N} x {0..N}` linearized as
//! `S * (N + 1) + I`. States with `S + I > N` are never reached but are kept
//! so that the grid stays rectangular.
//!
//! With band matrices of size `N + 1`
//!
//! ```text
//! S+inf = superdiag(1..N)   I+inf = subdiag(0..N-1)
//! S-inf = diag(0..N)        I-inf = diag(0..N-1, 0)
//! S+rec = S-rec = Id        I+rec = superdiag(1..N), I-rec = diag(0..N)
//! ```
//!
//! the generator is
//! `Q = b/N (S+inf ⊗ I+inf) + a (S+rec ⊗ I+rec) - b/N (S-inf ⊗ I-inf) - a (S-rec ⊗ I-rec)`.
//! Parameters are `theta = (log a, log b)`, so `dQ/dtheta` simply keeps the
//! recovery or the infection half of the sum.

use crate::infer::ObservationSeries;
use crate::kronop::{BandMatrix, TensorOperator};
use crate::unif::{Generator, UniformizedSystem};
use crate::{Error, Result};

/// Index of `log alpha` in derivative vectors.
pub const LOG_ALPHA: usize = 0;
/// Index of `log beta` in derivative vectors.
pub const LOG_BETA: usize = 1;

/// A parameter point `(log alpha, log beta)` for a population of size `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirParams {
    pub log_alpha: f64,
    pub log_beta: f64,
    pub population: u64,
}

impl SirParams {
    pub fn new(log_alpha: f64, log_beta: f64, population: u64) -> Result<Self> {
        if !(log_alpha.is_finite() && log_beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "log-rates must be finite, got ({log_alpha}, {log_beta})"
            )));
        }
        if population == 0 {
            return Err(Error::InvalidArgument("population must be positive".into()));
        }
        Ok(Self { log_alpha, log_beta, population })
    }

    /// From the recovery rate `alpha` and infection rate `beta` directly.
    pub fn from_rates(alpha: f64, beta: f64, population: u64) -> Result<Self> {
        Self::new(alpha.ln(), beta.ln(), population)
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    pub fn theta(&self) -> [f64; 2] {
        [self.log_alpha, self.log_beta]
    }

    pub fn with_theta(&self, theta: [f64; 2]) -> Result<Self> {
        Self::new(theta[0], theta[1], self.population)
    }

    pub fn deterministic(&self) -> DeterministicSir {
        DeterministicSir {
            alpha: self.alpha(),
            beta: self.beta(),
            population: self.population as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SirState {
    pub s: u64,
    pub i: u64,
}

impl SirState {
    pub fn new(s: u64, i: u64) -> Self {
        Self { s, i }
    }

    /// Grid coordinates on the full state space.
    pub fn coords(&self) -> [usize; 2] {
        [self.s as usize, self.i as usize]
    }
}

/// The rectangle `{S_min..S_max} x {I_min..I_max}` that every path between
/// two observations stays in. `I_min` may be negative; such rows can never
/// hold mass and carry zero rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestrictedWindow {
    pub s_min: i64,
    pub s_max: i64,
    pub i_min: i64,
    pub i_max: i64,
}

impl RestrictedWindow {
    /// Window for a transition `from -> to`. Requires `to.s <= from.s` and
    /// `to.s + to.i <= from.s + from.i` (susceptibles never increase, recovered
    /// never decrease).
    pub fn between(from: SirState, to: SirState) -> Result<Self> {
        let reject = |reason| Err(Error::InvalidTransition {
            from: (from.s, from.i),
            to: (to.s, to.i),
            reason,
        });
        let ds = to.s as i64 - from.s as i64;
        let di = to.i as i64 - from.i as i64;
        let dr = -ds - di;
        if ds > 0 {
            return reject("susceptibles increased");
        }
        if dr < 0 {
            return reject("recovered decreased");
        }
        let (s, i) = (from.s as i64, from.i as i64);
        Ok(Self { s_min: s + ds, s_max: s, i_min: i - dr, i_max: i - ds })
    }

    /// `(|dS| + 1, |dS| + dR + 1)`.
    pub fn shape(&self) -> [usize; 2] {
        [(self.s_max - self.s_min + 1) as usize, (self.i_max - self.i_min + 1) as usize]
    }

    pub fn len(&self) -> usize {
        let [a, b] = self.shape();
        a * b
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, state: SirState) -> bool {
        let (s, i) = (state.s as i64, state.i as i64);
        (self.s_min..=self.s_max).contains(&s) && (self.i_min..=self.i_max).contains(&i)
    }

    /// Window coordinates `(S - S_min, I - I_min)`.
    pub fn coords(&self, state: SirState) -> Option<[usize; 2]> {
        self.contains(state).then(|| {
            [(state.s as i64 - self.s_min) as usize, (state.i as i64 - self.i_min) as usize]
        })
    }

    /// Linear window index `(S - S_min) * (I_max - I_min + 1) + (I - I_min)`.
    pub fn index_of(&self, state: SirState) -> Option<usize> {
        self.coords(state).map(|[a, b]| a * self.shape()[1] + b)
    }

    /// Full-space state at a window index.
    pub fn state_at(&self, index: usize) -> (i64, i64) {
        let width = self.shape()[1];
        (self.s_min + (index / width) as i64, self.i_min + (index % width) as i64)
    }
}

fn counts(range: impl Iterator<Item = i64>) -> Vec<f64> {
    range.map(|x| x.max(0) as f64).collect()
}

/// Assembles `Q`, `dQ/dlog alpha`, `dQ/dlog beta` from the eight band factors.
fn assemble(
    params: &SirParams,
    s_inf_plus: BandMatrix,
    s_inf_minus: BandMatrix,
    i_inf_plus: BandMatrix,
    i_inf_minus: BandMatrix,
    i_rec_plus: BandMatrix,
    i_rec_minus: BandMatrix,
) -> Result<Generator> {
    let shape = vec![s_inf_plus.dim(), i_inf_plus.dim()];
    let id = BandMatrix::identity(shape[0]);
    let infection = params.beta() / params.population as f64;
    let recovery = params.alpha();

    let d_alpha = TensorOperator::zero(shape.clone())?
        .with_term(recovery, vec![id.clone(), i_rec_plus])?
        .with_term(-recovery, vec![id, i_rec_minus])?;
    let d_beta = TensorOperator::zero(shape)?
        .with_term(infection, vec![s_inf_plus, i_inf_plus])?
        .with_term(-infection, vec![s_inf_minus, i_inf_minus])?;
    let q = d_beta.sum(&d_alpha)?;
    // ordered by LOG_ALPHA, LOG_BETA
    Ok(Generator { q, dq: vec![d_alpha, d_beta] })
}

/// Generator on the full `(N+1) x (N+1)` grid with its log-parameter
/// derivatives.
pub fn build_full_generator(params: &SirParams) -> Result<Generator> {
    let n = params.population as i64;
    let mut i_inf_minus = counts(0..n);
    i_inf_minus.push(0.0);
    assemble(
        params,
        BandMatrix::superdiag(counts(1..=n))?,
        BandMatrix::diag(counts(0..=n))?,
        BandMatrix::subdiag(counts(0..n))?,
        BandMatrix::diag(i_inf_minus)?,
        BandMatrix::superdiag(counts(1..=n))?,
        BandMatrix::diag(counts(0..=n))?,
    )
}

/// `gamma = max_x |Q_xx| = (N-1) alpha + max((N-1) beta, alpha)` and its
/// log-parameter derivatives. At the tie `alpha = (N-1) beta` the derivative
/// of the `alpha` branch is returned.
pub fn gamma_full(params: &SirParams) -> (f64, [f64; 2]) {
    let (alpha, beta) = (params.alpha(), params.beta());
    let m = params.population as f64 - 1.0;
    if alpha >= m * beta {
        (m * alpha + alpha, [(m + 1.0) * alpha, 0.0])
    } else {
        (m * alpha + m * beta, [m * alpha, m * beta])
    }
}

/// Generator on the restricted window between two observed states. Its
/// columns sum to at most zero: mass leaving the window is dropped.
pub fn build_restricted_generator(
    params: &SirParams,
    from: SirState,
    to: SirState,
) -> Result<(Generator, RestrictedWindow)> {
    let w = RestrictedWindow::between(from, to)?;
    let generator = assemble(
        params,
        BandMatrix::superdiag(counts(w.s_min + 1..=w.s_max))?,
        BandMatrix::diag(counts(w.s_min..=w.s_max))?,
        BandMatrix::subdiag(counts(w.i_min..w.i_max))?,
        BandMatrix::diag(counts(w.i_min..=w.i_max))?,
        BandMatrix::superdiag(counts(w.i_min + 1..=w.i_max))?,
        BandMatrix::diag(counts(w.i_min..=w.i_max))?,
    )?;
    Ok((generator, w))
}

/// `gamma = (beta/N) S_max I_max + alpha I_max` on a restricted window.
pub fn gamma_restricted(params: &SirParams, window: &RestrictedWindow) -> (f64, [f64; 2]) {
    let infection = params.beta() / params.population as f64
        * window.s_max.max(0) as f64
        * window.i_max.max(0) as f64;
    let recovery = params.alpha() * window.i_max.max(0) as f64;
    (infection + recovery, [recovery, infection])
}

/// Uniformized full-space system over horizon `t`.
pub fn full_system(params: &SirParams, t: f64) -> Result<UniformizedSystem> {
    let generator = build_full_generator(params)?;
    let (gamma, dgamma) = gamma_full(params);
    UniformizedSystem::new(&generator, gamma, &dgamma, t)
}

/// Uniformized restricted system for the transition `from -> to` over `t`.
pub fn restricted_system(
    params: &SirParams,
    from: SirState,
    to: SirState,
    t: f64,
) -> Result<(UniformizedSystem, RestrictedWindow)> {
    let (generator, window) = build_restricted_generator(params, from, to)?;
    let (gamma, dgamma) = gamma_restricted(params, &window);
    Ok((UniformizedSystem::new(&generator, gamma, &dgamma, t)?, window))
}

/// Deterministic SIR rates. Unlike [`SirParams`] the rates may be zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicSir {
    pub alpha: f64,
    pub beta: f64,
    pub population: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerPoint {
    pub t: f64,
    pub s: f64,
    pub i: f64,
}

impl DeterministicSir {
    fn step(&self, s: f64, i: f64, h: f64) -> (f64, f64) {
        let infections = self.beta * s * i / self.population * h;
        (s - infections, i + infections - self.alpha * i * h)
    }

    /// Explicit Euler from `(s0, i0)` at time 0 to `t_end`, using
    /// `ceil(t_end / dt)` equal steps of size at most `dt`. Returns every
    /// iterate including the initial point.
    pub fn euler_solve(&self, s0: f64, i0: f64, dt: f64, t_end: f64) -> Result<Vec<EulerPoint>> {
        if !(dt > 0.0) || !(t_end >= 0.0) {
            return Err(Error::InvalidArgument(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
        }
        let steps = step_count(t_end, dt);
        let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
        let mut out = Vec::with_capacity(steps + 1);
        let (mut s, mut i) = (s0, i0);
        out.push(EulerPoint { t: 0.0, s, i });
        for k in 1..=steps {
            (s, i) = self.step(s, i, h);
            out.push(EulerPoint { t: k as f64 * h, s, i });
        }
        Ok(out)
    }

    /// Euler values at each time in `times` (nondecreasing, starting from
    /// `times[0]` where the state is `(s0, i0)`), with step size at most `dt`.
    pub fn euler_at(&self, s0: f64, i0: f64, times: &[f64], dt: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(times.len());
        let (mut s, mut i) = (s0, i0);
        let mut last = times.first().copied().unwrap_or(0.0);
        for &t in times {
            let span = t - last;
            let steps = step_count(span, dt);
            let h = if steps == 0 { 0.0 } else { span / steps as f64 };
            for _ in 0..steps {
                (s, i) = self.step(s, i, h);
            }
            out.push((s, i));
            last = t;
        }
        out
    }
}

fn step_count(span: f64, dt: f64) -> usize {
    (span / dt - 1e-9).ceil().max(0.0) as usize
}

/// Result of [`least_squares_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeastSquaresFit {
    pub alpha: f64,
    pub beta: f64,
    /// Sum of squared deviations in `S` and `I` at the optimum.
    pub residual: f64,
    /// Set when the data carry no dynamics and zero rates fit exactly.
    pub degenerate: bool,
}

struct EulerResidual<'a> {
    times: Vec<f64>,
    targets: Vec<(f64, f64)>,
    population: f64,
    dt: f64,
    obs: &'a ObservationSeries,
}

impl EulerResidual<'_> {
    fn residual(&self, theta: [f64; 2]) -> f64 {
        let model = DeterministicSir {
            alpha: theta[0].exp(),
            beta: theta[1].exp(),
            population: self.population,
        };
        let first = &self.obs.records()[0];
        let path = model.euler_at(first.s as f64, first.i as f64, &self.times, self.dt);
        let r: f64 = path
            .iter()
            .zip(&self.targets)
            .map(|((s, i), (ts, ti))| (s - ts).powi(2) + (i - ti).powi(2))
            .sum();
        if r.is_finite() {
            r
        } else {
            f64::MAX
        }
    }
}

struct Simplex {
    best: [f64; 2],
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder–Mead with the standard coefficients (1, 2, 1/2, 1/2). Stops when
/// both the spread of function values and the simplex diameter are tiny.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, start: [f64; 2], size: f64, max_iter: usize) -> Simplex {
    let mut pts = [start, [start[0] + size, start[1]], [start[0], start[1] + size]];
    let mut vals = pts.map(&f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for iter in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.map(|k| pts[k]);
        vals = order.map(|k| vals[k]);

        let spread = vals[2] - vals[0];
        let diameter = (1..3)
            .map(|k| (pts[k][0] - pts[0][0]).abs().max((pts[k][1] - pts[0][1]).abs()))
            .fold(0.0, f64::max);
        if spread <= 1e-14 * (1.0 + vals[0].abs()) && diameter < 1e-9 {
            return Simplex { best: pts[0], value: vals[0], iterations: iter, converged: true };
        }

        let centroid = lerp(pts[0], pts[1], 0.5);
        let reflected = lerp(centroid, pts[2], -1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = lerp(centroid, pts[2], -2.0);
            let fe = f(expanded);
            (pts[2], vals[2]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < vals[1] {
            (pts[2], vals[2]) = (reflected, fr);
        } else {
            let contracted = if fr < vals[2] {
                lerp(centroid, reflected, 0.5)
            } else {
                lerp(centroid, pts[2], 0.5)
            };
            let fc = f(contracted);
            if fc < vals[2].min(fr) {
                (pts[2], vals[2]) = (contracted, fc);
            } else {
                for k in 1..3 {
                    pts[k] = lerp(pts[0], pts[k], 0.5);
                    vals[k] = f(pts[k]);
                }
            }
        }
    }
    let k = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex { best: pts[k], value: vals[k], iterations: max_iter, converged: false }
}

const FIT_STARTS: [(f64, f64); 5] = [(0.1, 0.2), (1.0, 2.5), (0.03, 0.1), (0.3, 0.3), (2.0, 1.0)];
const FIT_MAX_ITERS: usize = 5000;

/// Least-squares fit of the deterministic SIR model to observed `(S, I)`,
/// started at the first observation. Nelder–Mead on `(log alpha, log beta)`
/// from five fixed starting points; Euler steps of `span / 10000`.
pub fn least_squares_fit(obs: &ObservationSeries) -> Result<LeastSquaresFit> {
    let records = obs.records();
    if records.len() < 2 {
        return Err(Error::InvalidArgument("least-squares fit needs at least two observations".into()));
    }
    if records.iter().all(|r| r.s == records[0].s && r.i == records[0].i) {
        return Ok(LeastSquaresFit { alpha: 0.0, beta: 0.0, residual: 0.0, degenerate: true });
    }
    let span = records.last().unwrap().t - records[0].t;
    let problem = EulerResidual {
        times: records.iter().map(|r| r.t).collect(),
        targets: records.iter().map(|r| (r.s as f64, r.i as f64)).collect(),
        population: obs.population() as f64,
        dt: span / 10_000.0,
        obs,
    };

    let best = FIT_STARTS
        .iter()
        .map(|&(a, b)| nelder_mead(|theta| problem.residual(theta), [a.ln(), b.ln()], 0.5, FIT_MAX_ITERS))
        .min_by(|x, y| x.value.total_cmp(&y.value))
        .expect("at least one starting point");
    if !best.converged {
        return Err(Error::NoConvergence { residual: best.value, iterations: best.iterations });
    }
    Ok(LeastSquaresFit {
        alpha: best.best[0].exp(),
        beta: best.best[1].exp(),
        residual: best.value,
        degenerate: false,
    })
}
