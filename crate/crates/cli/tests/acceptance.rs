//! Acceptance suite: one line per criterion, nonzero exit if any
//! non-informational criterion fails. Pass criterion numbers as arguments
//! to run a subset, e.g. `cargo test --test acceptance -- 1 5`.

mod common;

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use diffunif::infer::{
    fit_map, hmc_sample, hmc_sample_target, leapfrog, summarize_posterior, transition_probability, AscentConfig,
    HmcConfig, LogDensity, ObservationSeries, PhasePoint, PriorBox, SirPosterior,
};
use diffunif::predprey::{propagate_pp, PredPreyParams};
use diffunif::sir::{full_system, restricted_system, RestrictedWindow, SirParams, SirState};
use diffunif::ssa::{gillespie_sir, gillespie_sir_seeded};
use diffunif::unif::{diff_uniformize, uniformize, uniformize_with, SolveOptions, StateDistribution, DEFAULT_EPS};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random distribution over the states accepted by `valid`.
fn random_distribution(rng: &mut ChaCha8Rng, shape: [usize; 2], valid: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..shape[0] * shape[1])
        .map(|k| if valid(k / shape[1], k % shape[1]) { rng.random::<f64>() } else { 0.0 })
        .collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

struct SirInstance {
    n: usize,
    alpha: f64,
    beta: f64,
    t: f64,
    p0: Vec<f64>,
}

fn sir_instances() -> Vec<SirInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for n in 2..=8 {
        for t in [0.1, 1.0] {
            for _ in 0..2 {
                let alpha = rng.random_range(0.2..3.0);
                let beta = rng.random_range(0.2..5.0);
                let p0 = random_distribution(&mut rng, [n + 1, n + 1], |s, i| s + i <= n);
                out.push(SirInstance { n, alpha, beta, t, p0 });
            }
        }
    }
    out
}

fn sir_solve(inst: &SirInstance) -> (StateDistribution, Vec<StateDistribution>) {
    let params = SirParams::from_rates(inst.alpha, inst.beta, inst.n as u64).unwrap();
    let sys = full_system(&params, inst.t).unwrap();
    let side = inst.n + 1;
    let p0 = StateDistribution::new(inst.p0.clone(), vec![side, side]).unwrap();
    let (p, dp, _) = diff_uniformize(&p0, &sys, DEFAULT_EPS).unwrap();
    (p, dp)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for inst in sir_instances() {
        let (p, _) = sir_solve(&inst);
        let dense = oracle::expm_apply(&oracle::sir_dense(inst.n, inst.alpha, inst.beta), inst.t, &inst.p0);
        worst = worst.max(max_abs_diff(p.values(), &dense));
        count += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (xm, ym) in [(1, 1), (2, 3), (3, 2), (4, 4), (6, 2), (2, 6), (5, 5), (6, 6)] {
        for t in [0.1, 1.0] {
            let params = PredPreyParams::new(
                rng.random_range(0.2..2.0),
                rng.random_range(0.01..0.5),
                rng.random_range(0.2..2.0),
                xm,
                ym,
            )
            .unwrap();
            let shape = [xm as usize + 1, ym as usize + 1];
            let v = random_distribution(&mut rng, shape, |_, _| true);
            let p0 = StateDistribution::new(v.clone(), shape.to_vec()).unwrap();
            let sol = propagate_pp(&params, &p0, t, &SolveOptions::default()).unwrap();
            let dense = oracle::expm_apply(
                &oracle::pp_dense(xm as usize, ym as usize, params.alpha, params.beta, params.delta),
                t,
                &v,
            );
            worst = worst.max(max_abs_diff(sol.p.values(), &dense));
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-8 && elapsed < Duration::from_secs(10),
        format!("{count} SIR and predator-prey instances, max |p - p_dense| = {worst:.2e} (limit 1e-8), {:.2} s (limit 10 s)", secs(elapsed)),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for inst in sir_instances() {
        let (_, dp) = sir_solve(&inst);
        for j in 0..2 {
            let perturbed = |x: f64| {
                let (a, b) = if j == 0 { (x.exp(), inst.beta) } else { (inst.alpha, x.exp()) };
                oracle::expm_apply(&oracle::sir_dense(inst.n, a, b), inst.t, &inst.p0)
            };
            let at = if j == 0 { inst.alpha.ln() } else { inst.beta.ln() };
            let fd = oracle::central_difference(perturbed, at, h);
            for (d, f) in dp[j].values().iter().zip(&fd) {
                if f.abs() > 1e-8 {
                    worst = worst.max((d - f).abs() / f.abs());
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!(
            "{checked} derivative entries above 1e-8, max relative deviation from central differences {worst:.2e} (limit 1e-4), {:.2} s (limit 30 s)",
            secs(elapsed)
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut lo, mut hi, mut dsum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for n in [2usize, 3, 4, 5, 6, 7, 8, 20, 50] {
        for t in [0.1, 1.0, 5.0] {
            let inst = SirInstance {
                n,
                alpha: rng.random_range(0.2..3.0),
                beta: rng.random_range(0.2..5.0),
                t,
                p0: random_distribution(&mut rng, [n + 1, n + 1], |s, i| s + i <= n),
            };
            let (p, dp) = sir_solve(&inst);
            let defect = 1.0 - p.total();
            lo = lo.min(defect);
            hi = hi.max(defect);
            for d in &dp {
                dsum = dsum.max(d.total().abs());
            }
        }
    }
    outcome(
        lo >= 0.0 && hi <= 1e-10 && dsum <= 1e-9,
        format!("1 - |p|_1 in [{lo:.2e}, {hi:.2e}] (need [0, 1e-10]), max |sum dp| = {dsum:.2e} (limit 1e-9)"),
    )
}

fn criterion_4() -> Outcome {
    let (alpha, beta, dt) = (1.0, 2.5, 0.7);
    let mut worst: f64 = 0.0;
    let mut pairs = 0usize;
    let mut bad_shapes = 0usize;
    for n in 2..=10u64 {
        let params = SirParams::from_rates(alpha, beta, n).unwrap();
        let side = n as usize + 1;
        let e = oracle::expm(&(oracle::sir_dense(n as usize, alpha, beta) * dt));
        let states: Vec<SirState> = (0..=n).flat_map(|s| (0..=n - s).map(move |i| SirState::new(s, i))).collect();
        for &from in &states {
            for &to in &states {
                if to.s > from.s || to.s + to.i > from.s + from.i {
                    continue;
                }
                let ds = from.s - to.s;
                let dr = (from.s + from.i) - (to.s + to.i);
                let window = RestrictedWindow::between(from, to).unwrap();
                if window.shape() != [ds as usize + 1, (ds + dr) as usize + 1] {
                    bad_shapes += 1;
                }
                let (p, _) = transition_probability(&params, from, to, dt, &SolveOptions::default()).unwrap();
                let full = e[(to.s as usize * side + to.i as usize, from.s as usize * side + from.i as usize)];
                worst = worst.max((p - full).abs());
                pairs += 1;
            }
        }
    }
    outcome(
        worst < 1e-8 && bad_shapes == 0,
        format!("{pairs} transitions for N = 2..10, max |restricted - full| = {worst:.2e} (limit 1e-8), {bad_shapes} window shape mismatches"),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let params = SirParams::from_rates(1.0, 2.5, 500).unwrap();
    let sys = full_system(&params, 2.0).unwrap();
    let p0 = StateDistribution::point_mass(vec![501, 501], &[497, 3]).unwrap();
    let (reference, single) = uniformize_with(&p0, &sys, &SolveOptions::single_pass(DEFAULT_EPS)).unwrap();
    let (stepped, report) = uniformize(&p0, &sys, DEFAULT_EPS).unwrap();
    let diff = max_abs_diff(reference.values(), stepped.values());
    let elapsed = start.elapsed();
    outcome(
        diff < 1e-8 && elapsed < Duration::from_secs(300),
        format!(
            "N = 500, gamma t = {:.0}: single pass ({} terms) vs {} substeps, max difference {diff:.2e} (limit 1e-8), {:.1} s (limit 300 s)",
            sys.gamma() * sys.t(),
            single.iterations,
            report.substeps,
            secs(elapsed)
        ),
    )
}

fn criterion_6() -> Outcome {
    // endpoint histogram
    let n = 20u64;
    let params = SirParams::from_rates(1.0, 2.5, n).unwrap();
    let side = n as usize + 1;
    let p0 = StateDistribution::point_mass(vec![side, side], &[17, 3]).unwrap();
    let (exact, _) = uniformize(&p0, &full_system(&params, 1.0).unwrap(), 1e-12).unwrap();
    let runs = 200_000;
    let mut counts = vec![0usize; side * side];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..runs {
        let (s, i) = gillespie_sir(&params, 17, 3, 1.0, &mut rng).unwrap().final_state();
        counts[s as usize * side + i as usize] += 1;
    }
    let tv = 0.5 * counts.iter().zip(exact.values()).map(|(&c, &q)| (c as f64 / runs as f64 - q).abs()).sum::<f64>();
    // Sampling noise alone gives E[TV] = sum_x sqrt(p_x (1 - p_x) / (2 pi n)) for
    // a perfect sampler; a chi-squared test (cells with expected count < 5
    // pooled) checks the SSA for bias independently of that floor.
    let noise_floor: f64 = exact
        .values()
        .iter()
        .map(|&q| (q.max(0.0) * (1.0 - q) / (2.0 * std::f64::consts::PI * runs as f64)).sqrt())
        .sum();
    let (mut chi2, mut cells, mut pooled_obs, mut pooled_exp) = (0.0, 0usize, 0.0, 0.0);
    for (&c, &q) in counts.iter().zip(exact.values()) {
        let e = q.max(0.0) * runs as f64;
        if e >= 5.0 {
            chi2 += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            pooled_obs += c as f64;
            pooled_exp += e;
        }
    }
    chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
    let fit_p = 1.0 - ChiSquared::new(cells as f64).unwrap().cdf(chi2);

    // early extinction: the infection dies out before 10% of N were ever infected
    let n = 500u64;
    let params = SirParams::from_rates(1.0, 2.5, n).unwrap();
    let (from, floor) = (SirState::new(497, 3), 451u64);
    let horizon = 50.0;
    let (sys, window) = restricted_system(&params, from, SirState::new(floor, 0), horizon).unwrap();
    let start = StateDistribution::point_mass(window.shape().to_vec(), &window.coords(from).unwrap()).unwrap();
    let (p, _) = uniformize(&start, &sys, 1e-12).unwrap();
    let mut analytic = 0.0;
    let mut still_active = 0.0;
    for (k, &v) in p.values().iter().enumerate() {
        let (_, i) = window.state_at(k);
        if i == 0 {
            analytic += v;
        } else if i > 0 {
            still_active += v;
        }
    }
    let runs = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let died_out = (0..runs)
        .filter(|_| {
            let (s, i) = gillespie_sir(&params, 497, 3, f64::INFINITY, &mut rng).unwrap().final_state();
            i == 0 && s >= floor
        })
        .count();
    let empirical = died_out as f64 / runs as f64;
    let se = (analytic * (1.0 - analytic) / runs as f64).sqrt();
    let z = (empirical - analytic) / se;
    outcome(
        tv < 0.01 && z.abs() < 3.0,
        format!(
            "TV(SSA, p(1)) = {tv:.4} (limit 0.01; expected from sampling noise alone {noise_floor:.4}, chi-squared p = {fit_p:.3}); extinction analytic {analytic:.5} vs SSA {empirical:.5}, {z:+.2} SE (limit 3), mass still active at t = {horizon}: {still_active:.1e}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let time_solve = |n: u64| {
        let params = SirParams::from_rates(1.0, 2.5, n).unwrap();
        let sys = full_system(&params, 1.0).unwrap();
        let side = n as usize + 1;
        let p0 = StateDistribution::point_mass(vec![side, side], &[n as usize - 3, 3]).unwrap();
        (0..3)
            .map(|_| {
                let start = Instant::now();
                uniformize(&p0, &sys, DEFAULT_EPS).unwrap();
                start.elapsed()
            })
            .min()
            .unwrap()
    };
    let (small, large) = (time_solve(100), time_solve(200));
    let ratio = secs(large) / secs(small);
    outcome(
        (5.0..=12.0).contains(&ratio),
        format!(
            "full-space solve N = 100: {:.3} s, N = 200: {:.3} s, ratio {ratio:.2} (expected about 8, band [5, 12]; informational)",
            secs(small),
            secs(large)
        ),
    )
}

fn weekly_outbreak() -> ObservationSeries {
    let truth = SirParams::from_rates(1.0, 2.5, 100).unwrap();
    let traj = gillespie_sir_seeded(&truth, 95, 5, 5.0, 1).unwrap();
    ObservationSeries::from_trajectory(&traj, 100, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let obs = weekly_outbreak();
    let init = SirParams::from_rates(0.5, 1.0, 100).unwrap();
    let fit = fit_map(&obs, init, &AscentConfig::default()).unwrap();
    let (a, b) = (fit.params.alpha(), fit.params.beta());
    let map_ok = (a - 1.0).abs() <= 0.3 && (b - 2.5).abs() <= 0.3 * 2.5;

    let cfg = HmcConfig {
        n_chains: 4,
        chain_len: 200,
        burn_in: 20,
        seed: 8,
        init: Some(fit.params.theta()),
        ..HmcConfig::default()
    };
    let samples = hmc_sample(&obs, &cfg).unwrap();
    let summary = summarize_posterior(&samples).unwrap();
    let (la, lb) = (summary.log_alpha, summary.log_beta);
    let covers = la.q05 <= 0.0 && 0.0 <= la.q95 && lb.q05 <= 2.5f64.ln() && 2.5f64.ln() <= lb.q95;
    let mixed = la.rhat < 1.1 && lb.rhat < 1.1;
    let elapsed = start.elapsed();
    outcome(
        map_ok && covers && mixed && elapsed < Duration::from_secs(1200),
        format!(
            "MAP alpha = {a:.3}, beta = {b:.3} (truth 1, 2.5, within 30%: {map_ok}); 90% box alpha [{:.3}, {:.3}] beta [{:.3}, {:.3}] contains truth: {covers}; rhat {:.3}, {:.3}; {:.1} s",
            la.q05.exp(),
            la.q95.exp(),
            lb.q05.exp(),
            lb.q95.exp(),
            la.rhat,
            lb.rhat,
            secs(elapsed)
        ),
    )
}

struct Flat;

impl LogDensity for Flat {
    fn log_density_and_grad(&self, _: [f64; 2]) -> (f64, [f64; 2]) {
        (0.0, [0.0; 2])
    }
}

fn criterion_9() -> Outcome {
    // reversibility on the SIR posterior itself
    let obs = weekly_outbreak();
    let target = SirPosterior { obs: &obs, prior_box: PriorBox::default(), opts: SolveOptions::default() };
    let start = PhasePoint::new(&target, [0.1, 0.8], [0.3, -0.2]);
    let (end, _) = leapfrog(&target, start, 0.01, 20);
    let flipped = PhasePoint { momentum: [-end.momentum[0], -end.momentum[1]], ..end };
    let (back, _) = leapfrog(&target, flipped, 0.01, 20);
    let reversal = (0..2)
        .map(|j| (back.theta[j] - start.theta[j]).abs().max((back.momentum[j] + start.momentum[j]).abs()))
        .fold(0.0, f64::max);

    // uniform sampling of a flat target, thinned to near-independent draws
    let cfg = HmcConfig {
        n_chains: 40,
        chain_len: 1010,
        burn_in: 10,
        step_size: 0.5,
        n_leapfrog: 10,
        seed: 42,
        init: Some([0.0, 0.0]),
        ..HmcConfig::default()
    };
    let flat = hmc_sample_target(&Flat, &cfg).unwrap();
    let b = cfg.prior_box;
    let mut counts = [0usize; 16];
    let mut used = 0;
    for s in flat.iter().filter(|s| s.iter % 10 == 0) {
        let cell = |j: usize| (((s.theta()[j] - b.lower[j]) / (b.upper[j] - b.lower[j]) * 4.0) as usize).min(3);
        counts[cell(0) * 4 + cell(1)] += 1;
        used += 1;
    }
    let expected = used as f64 / 16.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);

    // the paper's configuration
    let fixture = diffunif_cli::ingest::ingest(std::path::Path::new(&common::fixture("sir_n10.csv")), 10).unwrap();
    let retained = hmc_sample(&fixture.series, &HmcConfig::default()).unwrap().len();

    outcome(
        reversal < 1e-10 && p_value > 0.01 && retained == 900,
        format!(
            "leapfrog round trip error {reversal:.1e} (limit 1e-10); flat target chi-squared p = {p_value:.3} on {used} draws (need > 0.01); 10 x 100 with burn-in 10 keeps {retained} (need 900)"
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut problems = Vec::new();
    let cases = common::golden_cases();
    for (name, args) in &cases {
        for _ in 0..2 {
            if let Err(e) = common::check_golden(name, args) {
                problems.push(e);
            }
        }
    }
    let detail = if problems.is_empty() {
        format!("{} golden outputs reproduced byte for byte on two runs each", cases.len())
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, bool); 10] = [
        (1, "dense-oracle equivalence", criterion_1, false),
        (2, "derivative correctness", criterion_2, false),
        (3, "mass defect", criterion_3, false),
        (4, "restriction equivalence", criterion_4, false),
        (5, "substepping consistency", criterion_5, false),
        (6, "SSA vs analytic", criterion_6, false),
        (7, "cubic scaling", criterion_7, true),
        (8, "inference round trip", criterion_8, false),
        (9, "HMC mechanics", criterion_9, false),
        (10, "CLI regression", criterion_10, false),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check, informational) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let result = check();
        let tag = match (result.pass, informational) {
            (true, _) => "PASS",
            (false, true) => "FAIL (informational)",
            (false, false) => "FAIL",
        };
        println!("[{tag}] criterion {id} {name}: {}", result.detail);
        if !result.pass && !informational {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
