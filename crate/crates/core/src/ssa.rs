//! Exact stochastic simulation (Gillespie's direct method).
//!
//! Randomness comes from `ChaCha8Rng`, which is portable and
//! bit-reproducible across platforms; the `*_seeded` entry points seed it
//! with `seed_from_u64`. Waiting times use the inverse CDF
//! `-ln(1 - u) / rate`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::predprey::PredPreyParams;
use crate::sir::SirParams;
use crate::{Error, Result};

/// Event-based path: `states[k]` holds from `times[k]` until `times[k + 1]`.
/// The first entry is `(0, initial state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<(u64, u64)>,
    /// A predator count exceeded the grid cap `Y_max` at some point.
    pub overflow: bool,
}

impl Trajectory {
    fn start(state: (u64, u64)) -> Self {
        Self { times: vec![0.0], states: vec![state], overflow: false }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> (u64, u64) {
        *self.states.last().expect("trajectory has an initial state")
    }

    /// State at time `t` (the last event at or before `t`).
    pub fn state_at(&self, t: f64) -> (u64, u64) {
        let k = self.times.partition_point(|&s| s <= t);
        self.states[k.saturating_sub(1)]
    }

    /// States on a fixed time grid.
    pub fn resample(&self, times: &[f64]) -> Vec<(u64, u64)> {
        times.iter().map(|&t| self.state_at(t)).collect()
    }

    /// One event per row under a `time<TAB>a<TAB>b` header.
    pub fn write_tsv<W: Write>(&self, mut out: W, labels: [&str; 2]) -> std::io::Result<()> {
        writeln!(out, "time\t{}\t{}", labels[0], labels[1])?;
        for (t, (a, b)) in self.times.iter().zip(&self.states) {
            writeln!(out, "{t}\t{a}\t{b}")?;
        }
        Ok(())
    }
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// SIR path from `(s0, i0)` until `t_end` or extinction of the infection.
pub fn gillespie_sir<R: Rng + ?Sized>(
    params: &SirParams,
    s0: u64,
    i0: u64,
    t_end: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let n = params.population;
    if s0 + i0 > n {
        return Err(Error::InvalidArgument(format!("S0 + I0 = {} exceeds population {n}", s0 + i0)));
    }
    let (alpha, contact) = (params.alpha(), params.beta() / n as f64);
    let mut traj = Trajectory::start((s0, i0));
    let (mut s, mut i, mut t) = (s0, i0, 0.0);
    while i > 0 {
        let infection = contact * s as f64 * i as f64;
        let total = infection + alpha * i as f64;
        t += exponential(rng, total);
        if t > t_end {
            break;
        }
        if rng.random::<f64>() * total < infection {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
        }
        traj.times.push(t);
        traj.states.push((s, i));
    }
    Ok(traj)
}

pub fn gillespie_sir_seeded(params: &SirParams, s0: u64, i0: u64, t_end: f64, seed: u64) -> Result<Trajectory> {
    gillespie_sir(params, s0, i0, t_end, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Predator–prey path from `(x0, y0)` until `t_end` or until no reaction
/// can fire. Predators may exceed `Y_max`, which sets `overflow`.
pub fn gillespie_pp<R: Rng + ?Sized>(
    params: &PredPreyParams,
    x0: u64,
    y0: u64,
    t_end: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if x0 > params.x_max || y0 > params.y_max {
        return Err(Error::InvalidArgument(format!(
            "initial state ({x0}, {y0}) outside {} x {}",
            params.x_max, params.y_max
        )));
    }
    let mut traj = Trajectory::start((x0, y0));
    let (mut x, mut y, mut t) = (x0, y0, 0.0);
    loop {
        let consumption = params.beta * x as f64 * y as f64;
        let birth = params.birth_rate(x).max(0.0);
        let death = params.delta * y as f64;
        let total = consumption + birth + death;
        if total <= 0.0 {
            break;
        }
        t += exponential(rng, total);
        if t > t_end {
            break;
        }
        let u = rng.random::<f64>() * total;
        if u < consumption {
            x -= 1;
            y += 1;
            traj.overflow |= y > params.y_max;
        } else if u < consumption + birth {
            x += 1;
        } else {
            y -= 1;
        }
        traj.times.push(t);
        traj.states.push((x, y));
    }
    Ok(traj)
}

pub fn gillespie_pp_seeded(params: &PredPreyParams, x0: u64, y0: u64, t_end: f64, seed: u64) -> Result<Trajectory> {
    gillespie_pp(params, x0, y0, t_end, &mut ChaCha8Rng::seed_from_u64(seed))
}
