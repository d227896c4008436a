//! Stochastic predator–prey model with logistic prey growth.
//!
//! States `(X, Y)` live on `{0..X_max} x {0..Y_max}`, linearized as
//! `X * (Y_max + 1) + Y`. Three reactions:
//!
//! ```text
//! consumption  (X, Y) -> (X-1, Y+1)   rate beta X Y
//! prey birth   (X, Y) -> (X+1, Y)     rate alpha X - alpha X^2 / X_max
//! death        (X, Y) -> (X, Y-1)     rate delta Y
//! ```
//!
//! `Y_max` is a computational cutoff: consumption at `Y = Y_max` leaves the
//! grid and its mass is lost, so columns of `Q` sum to at most zero.

use crate::kronop::{BandMatrix, TensorOperator};
use crate::unif::{uniformize_with, SolveOptions, SolveReport, StateDistribution, UniformizedSystem};
use crate::{Error, Result};

/// Mass lost through the `Y_max` boundary beyond this triggers a warning.
pub const LEAKAGE_WARN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredPreyParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub x_max: u64,
    pub y_max: u64,
}

impl PredPreyParams {
    /// Rates must be finite and nonnegative, caps at least 1.
    pub fn new(alpha: f64, beta: f64, delta: f64, x_max: u64, y_max: u64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("delta", delta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if x_max == 0 || y_max == 0 {
            return Err(Error::InvalidArgument("population caps must be at least 1".into()));
        }
        Ok(Self { alpha, beta, delta, x_max, y_max })
    }

    pub fn grid_shape(&self) -> Vec<usize> {
        vec![self.x_max as usize + 1, self.y_max as usize + 1]
    }

    /// Logistic prey birth rate at `x`.
    pub fn birth_rate(&self, x: u64) -> f64 {
        let x = x as f64;
        self.alpha * x - self.alpha * x * x / self.x_max as f64
    }
}

fn seq(range: impl Iterator<Item = u64>) -> Vec<f64> {
    range.map(|v| v as f64).collect()
}

/// The eight-term Kronecker sum for `Q`.
pub fn build_pp_generator(params: &PredPreyParams) -> Result<TensorOperator> {
    let (xm, ym) = (params.x_max, params.y_max);
    let id_x = BandMatrix::identity(xm as usize + 1);
    let id_y = BandMatrix::identity(ym as usize + 1);
    let with_zero = |mut v: Vec<f64>| {
        v.push(0.0);
        v
    };
    let squares = || (0..xm).map(|x| (x * x) as f64).collect::<Vec<_>>();
    let cap = params.alpha / xm as f64;

    TensorOperator::zero(params.grid_shape())?
        .with_term(params.beta, vec![BandMatrix::superdiag(seq(1..=xm))?, BandMatrix::subdiag(seq(0..ym))?])?
        .with_term(params.alpha, vec![BandMatrix::subdiag(seq(0..xm))?, id_y.clone()])?
        .with_term(-cap, vec![BandMatrix::subdiag(squares())?, id_y.clone()])?
        .with_term(params.delta, vec![id_x.clone(), BandMatrix::superdiag(seq(1..=ym))?])?
        .with_term(-params.beta, vec![BandMatrix::diag(seq(0..=xm))?, BandMatrix::diag(seq(0..=ym))?])?
        .with_term(-params.alpha, vec![BandMatrix::diag(with_zero(seq(0..xm)))?, id_y.clone()])?
        .with_term(cap, vec![BandMatrix::diag(with_zero(squares()))?, id_y])?
        .with_term(-params.delta, vec![id_x, BandMatrix::diag(seq(0..=ym))?])
}

/// Upper bound on `max |Q_xx|`:
/// `beta X_max Y_max + delta Y_max + alpha X_max / 4 + alpha X_max`.
pub fn pp_gamma(params: &PredPreyParams) -> f64 {
    let (xm, ym) = (params.x_max as f64, params.y_max as f64);
    params.beta * xm * ym + params.delta * ym + params.alpha * xm / 4.0 + params.alpha * xm
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpSolution {
    pub p: StateDistribution,
    pub report: SolveReport,
    /// `1 - |p(t)|_1` minus the truncation defect: mass that left through
    /// the predator cap.
    pub leakage: f64,
}

/// Forward solve from the point mass at `(x0, y0)`.
pub fn solve_pp(params: &PredPreyParams, x0: u64, y0: u64, t: f64, opts: &SolveOptions) -> Result<PpSolution> {
    if x0 > params.x_max || y0 > params.y_max {
        return Err(Error::InvalidArgument(format!(
            "initial state ({x0}, {y0}) outside the grid {} x {}",
            params.x_max, params.y_max
        )));
    }
    let p0 = StateDistribution::point_mass(params.grid_shape(), &[x0 as usize, y0 as usize])?;
    propagate_pp(params, &p0, t, opts)
}

/// Forward solve from an arbitrary distribution on the grid. Warns when
/// more than [`LEAKAGE_WARN`] of the mass leaves through the predator cap.
pub fn propagate_pp(
    params: &PredPreyParams,
    p0: &StateDistribution,
    t: f64,
    opts: &SolveOptions,
) -> Result<PpSolution> {
    let q = build_pp_generator(params)?;
    let sys = UniformizedSystem::forward(&q, pp_gamma(params), t)?;
    let (p, report) = uniformize_with(p0, &sys, opts)?;
    let start = p0.total();
    let leakage = start - p.total() - report.mass_defect * start;
    if leakage > LEAKAGE_WARN {
        log::warn!(
            "{leakage:.3e} of the probability mass left through the predator cap Y_max = {}; consider a larger cap",
            params.y_max
        );
    }
    Ok(PpSolution { p, report, leakage })
}
