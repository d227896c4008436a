//! Dense reference implementations used only by tests.
//!
//! Everything here is built entrywise from the model definitions and uses
//! plain dense linear algebra, independent of the Kronecker operators and of
//! the uniformization engine.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Dense SIR generator on the full `(N+1) x (N+1)` grid, built entrywise.
/// State `(s, i)` has index `s * (N + 1) + i`.
pub fn sir_dense(n: usize, alpha: f64, beta: f64) -> DMatrix<f64> {
    let side = n + 1;
    let dim = side * side;
    let nf = n as f64;
    let mut q = DMatrix::zeros(dim, dim);
    for s in 0..=n {
        for i in 0..=n {
            let col = s * side + i;
            let (sf, fi) = (s as f64, i as f64);
            if s >= 1 && i < n {
                q[((s - 1) * side + i + 1, col)] = beta * sf * fi / nf;
            }
            if i >= 1 {
                q[(s * side + i - 1, col)] = alpha * fi;
            }
            q[(col, col)] = if s != 0 && i != n {
                -beta * sf * fi / nf - alpha * fi
            } else {
                -alpha * fi
            };
        }
    }
    q
}

/// Dense predator-prey generator on `(x_max+1) x (y_max+1)`, built entrywise.
pub fn pp_dense(x_max: usize, y_max: usize, alpha: f64, beta: f64, delta: f64) -> DMatrix<f64> {
    let side = y_max + 1;
    let dim = (x_max + 1) * side;
    let xm = x_max as f64;
    let mut q = DMatrix::zeros(dim, dim);
    for x in 0..=x_max {
        for y in 0..=y_max {
            let col = x * side + y;
            let (xf, yf) = (x as f64, y as f64);
            let birth = alpha * xf - alpha * xf * xf / xm;
            if x >= 1 && y < y_max {
                q[((x - 1) * side + y + 1, col)] = beta * xf * yf;
            }
            if y >= 1 {
                q[(x * side + y - 1, col)] = delta * yf;
            }
            if x < x_max {
                q[((x + 1) * side + y, col)] = birth;
            }
            q[(col, col)] = -beta * xf * yf - delta * yf - birth;
        }
    }
    q
}

/// `exp(a)` by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.5 {
        squarings += 1;
    }
    let scaled = a / 2f64.powi(squarings);
    let n = a.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn expm_apply(q: &DMatrix<f64>, t: f64, p0: &[f64]) -> Vec<f64> {
    let e = expm(&(q * t));
    (e * DVector::from_column_slice(p0)).iter().copied().collect()
}

pub fn from_row_major(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, data)
}

pub fn delta(dim: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[index] = 1.0;
    v
}

/// `1 - sum_{n<=m} Poisson(n; lambda)` computed as the explicit tail sum
/// `sum_{n>m}`, so no cancellation is involved.
pub fn poisson_tail(lambda: f64, m: usize) -> f64 {
    let mut log_term = -lambda;
    for k in 1..=m + 1 {
        log_term += (lambda / k as f64).ln();
    }
    let mut tail = 0.0;
    let mut n = m + 1;
    loop {
        let term = log_term.exp();
        tail += term;
        if n as f64 > lambda && term < tail * 1e-20 {
            break;
        }
        n += 1;
        log_term += (lambda / n as f64).ln();
    }
    tail
}

/// Smallest `m` whose Poisson tail beyond `m` is below `eps`.
pub fn poisson_steps_oracle(lambda: f64, eps: f64) -> usize {
    let mut m = 0;
    while poisson_tail(lambda, m) >= eps {
        m += 1;
    }
    m
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`, elementwise over vectors.
pub fn central_difference<F: Fn(f64) -> Vec<f64>>(f: F, x: f64, h: f64) -> Vec<f64> {
    let plus = f(x + h);
    let minus = f(x - h);
    plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// Log of the full-space transition probability `(s0,i0) -> (s1,i1)` after `dt`,
/// from the dense exponential.
pub fn sir_dense_transition(
    n: usize,
    alpha: f64,
    beta: f64,
    from: (usize, usize),
    to: (usize, usize),
    dt: f64,
) -> f64 {
    let side = n + 1;
    let q = sir_dense(n, alpha, beta);
    let p = expm_apply(&q, dt, &delta(side * side, from.0 * side + from.1));
    p[to.0 * side + to.1]
}

/// Dense log-likelihood of an observation sequence of `(t, s, i)` records.
pub fn sir_dense_loglik(n: usize, alpha: f64, beta: f64, records: &[(f64, usize, usize)]) -> f64 {
    records
        .windows(2)
        .map(|w| {
            sir_dense_transition(n, alpha, beta, (w[0].1, w[0].2), (w[1].1, w[1].2), w[1].0 - w[0].0)
                .ln()
        })
        .sum()
}
