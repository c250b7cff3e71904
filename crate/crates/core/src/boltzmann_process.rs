//! Monte Carlo for the generalized Boltzmann velocity process.
//!
//! Two samplers are provided:
//!
//! * [`sample_velocity_path`]: forward, time-resolved process. Scatterings
//!   arrive at rate `2μ`; between them the velocity turns at rate `2π/T`;
//!   every full period `T` spent without scattering replays the last
//!   deflection (a self-recollision with the same impact parameter).
//! * the Markov jump process generated by `L^G`, used by
//!   [`green_kubo_mc`]: at rate `2μ` the angle jumps by `jϑ(b)` with
//!   `b ~ U[−1, 1]` and `P(j) = (1 − q)q^{j−1}`, `q = e^{−2μT}`. This is the
//!   process whose Green–Kubo integral equals `−1/λ_1(L^G)`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{deflection_from_impact, normalize_angle};
use crate::operators::memory_ratio;
use crate::seeding::{derive_seed, rng_from_seed};
use crate::stats::{binomial, trapezoid, MeanSe};

/// Paths per deterministic work block.
const BLOCK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GBState {
    pub velocity_angle: f64,
    /// Deflection of the last scattering; meaningful once `scattered_yet`.
    pub last_deflection: f64,
    pub time_since_scatter: f64,
    pub scattered_yet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum JumpKind {
    Scatter { b_norm: f64, deflection: f64 },
    Replay { deflection: f64 },
}

impl JumpKind {
    pub fn deflection(&self) -> f64 {
        match *self {
            JumpKind::Scatter { deflection, .. } | JumpKind::Replay { deflection } => deflection,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GBPath {
    pub initial_angle: f64,
    /// Magnetic turning rate `2π/T` (0 for infinite period).
    pub rotation_rate: f64,
    pub jump_times: Vec<f64>,
    pub jumps: Vec<JumpKind>,
    /// No scattering during the first period: the path circles forever.
    pub circling: bool,
    pub t_max: f64,
}

impl GBPath {
    /// Velocity angle at time `t` (jumps at exactly `t` included).
    pub fn angle_at(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        let turned: f64 = self.jumps[..k].iter().map(|j| j.deflection()).sum();
        normalize_angle(self.initial_angle + self.rotation_rate * t + turned)
    }

    /// State at time `t`.
    pub fn state_at(&self, t: f64) -> GBState {
        let k = self.jump_times.partition_point(|&s| s <= t);
        let last_scatter = self.jumps[..k]
            .iter()
            .zip(&self.jump_times[..k])
            .rev()
            .find_map(|(j, &s)| match j {
                JumpKind::Scatter { deflection, .. } => Some((*deflection, s)),
                JumpKind::Replay { .. } => None,
            });
        let last_jump = if k > 0 { self.jump_times[k - 1] } else { 0.0 };
        GBState {
            velocity_angle: self.angle_at(t),
            last_deflection: last_scatter.map_or(0.0, |(d, _)| d),
            time_since_scatter: t - last_jump,
            scattered_yet: last_scatter.is_some(),
        }
    }

    /// Number of replays following each scattering.
    pub fn replay_runs(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        for j in &self.jumps {
            match j {
                JumpKind::Scatter { .. } => runs.push(0),
                JumpKind::Replay { .. } => {
                    if let Some(last) = runs.last_mut() {
                        *last += 1;
                    }
                }
            }
        }
        runs
    }
}

fn check_rates(mu: f64, period: f64) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be finite and non-negative, got {mu}")));
    }
    if !(period > 0.0) {
        return Err(invalid("T", format!("must be positive, got {period}")));
    }
    Ok(())
}

fn exp_wait(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate > 0.0 {
        Exp::new(rate).map(|d| d.sample(rng)).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    }
}

fn scatter(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let b: f64 = rng.random_range(-1.0..=1.0);
    // |b| ≤ 1 by construction
    (b, deflection_from_impact(b).unwrap_or(0.0))
}

/// Samples the time-resolved process on `[0, t_max]`; see the module docs.
pub fn sample_velocity_path(
    mu: f64,
    period: f64,
    v0_angle: f64,
    t_max: f64,
    seed: u64,
) -> Result<GBPath> {
    check_rates(mu, period)?;
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", format!("must be finite and non-negative, got {t_max}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok(sample_path_with(&mut rng, mu, period, v0_angle, t_max))
}

fn sample_path_with(rng: &mut ChaCha8Rng, mu: f64, period: f64, v0: f64, t_max: f64) -> GBPath {
    let rotation_rate = if period.is_finite() { TAU / period } else { 0.0 };
    let mut path = GBPath {
        initial_angle: normalize_angle(v0),
        rotation_rate,
        jump_times: Vec::new(),
        jumps: Vec::new(),
        circling: false,
        t_max,
    };
    let first = exp_wait(rng, 2.0 * mu);
    if first > period {
        path.circling = true;
        return path;
    }
    let mut s = first;
    while s <= t_max {
        let (b_norm, deflection) = scatter(rng);
        path.jump_times.push(s);
        path.jumps.push(JumpKind::Scatter { b_norm, deflection });
        let w = exp_wait(rng, 2.0 * mu);
        if period.is_finite() {
            let replays = (w / period).floor() as u64;
            for k in 1..=replays {
                let r = s + k as f64 * period;
                if r > t_max {
                    break;
                }
                path.jump_times.push(r);
                path.jumps.push(JumpKind::Replay { deflection });
            }
        }
        s += w;
    }
    path
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenKuboEstimate {
    pub d_mc: f64,
    pub d_mc_se: f64,
    /// Fraction of paths without scattering during the first period.
    pub circling_frac: f64,
    pub grid_step: f64,
    /// `(t, E[cos(θ(t) − θ(0))], standard error)`.
    pub vacf: Vec<(f64, f64, f64)>,
    pub n_paths: usize,
}

#[derive(Clone)]
struct Accumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    integral_sum: f64,
    integral_sq: f64,
    circling: usize,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            sum_sq: vec![0.0; n],
            integral_sum: 0.0,
            integral_sq: 0.0,
            circling: 0,
        }
    }

    fn add_path(&mut self, values: &[f64], dt: f64) {
        for (k, &c) in values.iter().enumerate() {
            self.sum[k] += c;
            self.sum_sq[k] += c * c;
        }
        let integral = trapezoid(values, dt);
        self.integral_sum += integral;
        self.integral_sq += integral * integral;
    }

    fn merge(&mut self, other: &Accumulator) {
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
        }
        self.integral_sum += other.integral_sum;
        self.integral_sq += other.integral_sq;
        self.circling += other.circling;
    }
}

fn mean_se(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / nf).sqrt())
}

fn validate_gk(mu: f64, period: f64, n_paths: usize, t_cut: f64, dt: f64) -> Result<usize> {
    check_rates(mu, period)?;
    if !(t_cut > 0.0 && t_cut.is_finite()) {
        return Err(invalid("t_cut", format!("must be positive, got {t_cut}")));
    }
    if !(dt > 0.0 && dt <= t_cut) {
        return Err(invalid("dt_quad", format!("must lie in (0, t_cut], got {dt}")));
    }
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be at least 1"));
    }
    Ok((t_cut / dt).round() as usize + 1)
}

/// Runs `per_path` over `n_paths` paths in deterministic blocks.
fn run_blocks<F>(n_paths: usize, n_grid: usize, dt: f64, seed: u64, per_path: F) -> Accumulator
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> bool + Sync,
{
    let n_blocks = n_paths.div_ceil(BLOCK);
    let blocks: Vec<Accumulator> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            let mut acc = Accumulator::new(n_grid);
            let mut values = vec![0.0; n_grid];
            let count = BLOCK.min(n_paths - b * BLOCK);
            for _ in 0..count {
                if per_path(&mut rng, &mut values) {
                    acc.circling += 1;
                }
                acc.add_path(&values, dt);
            }
            acc
        })
        .collect();
    let mut total = Accumulator::new(n_grid);
    for acc in &blocks {
        total.merge(acc);
    }
    total
}

fn finish(total: Accumulator, n_paths: usize, dt: f64) -> GreenKuboEstimate {
    let (d_mc, d_mc_se) = mean_se(total.integral_sum, total.integral_sq, n_paths);
    let vacf = (0..total.sum.len())
        .map(|k| {
            let (m, se) = mean_se(total.sum[k], total.sum_sq[k], n_paths);
            (k as f64 * dt, m, se)
        })
        .collect();
    GreenKuboEstimate {
        d_mc,
        d_mc_se,
        circling_frac: total.circling as f64 / n_paths as f64,
        grid_step: dt,
        vacf,
        n_paths,
    }
}

/// Green–Kubo estimate `∫_0^{t_cut} E[cos(θ(t) − θ(0))] dt` for the jump
/// process generated by `L^G` (trapezoid on a grid of step `dt_quad`).
///
/// The integrand depends only on angle increments, so the uniform initial
/// angle drops out.
pub fn green_kubo_mc(
    mu: f64,
    period: f64,
    n_paths: usize,
    t_cut: f64,
    dt_quad: f64,
    seed: u64,
) -> Result<GreenKuboEstimate> {
    let n_grid = validate_gk(mu, period, n_paths, t_cut, dt_quad)?;
    let q = memory_ratio(mu, period);
    let total = run_blocks(n_paths, n_grid, dt_quad, seed, |rng, values| {
        let mut t = exp_wait(rng, 2.0 * mu);
        let circling = t > period;
        let mut turned = 0.0;
        for (k, v) in values.iter_mut().enumerate() {
            let tk = k as f64 * dt_quad;
            while t <= tk {
                let (_, deflection) = scatter(rng);
                turned += geometric_multiplicity(rng, q) as f64 * deflection;
                t += exp_wait(rng, 2.0 * mu);
            }
            *v = turned.cos();
        }
        circling
    });
    Ok(finish(total, n_paths, dt_quad))
}

/// Same estimator applied to the time-resolved process of
/// [`sample_velocity_path`] (magnetic turning and delayed replays).
pub fn green_kubo_delayed_mc(
    mu: f64,
    period: f64,
    n_paths: usize,
    t_cut: f64,
    dt_quad: f64,
    seed: u64,
) -> Result<GreenKuboEstimate> {
    let n_grid = validate_gk(mu, period, n_paths, t_cut, dt_quad)?;
    let t_end = (n_grid - 1) as f64 * dt_quad;
    let total = run_blocks(n_paths, n_grid, dt_quad, seed, |rng, values| {
        let path = sample_path_with(rng, mu, period, 0.0, t_end);
        let mut j = 0;
        let mut turned = 0.0;
        for (k, v) in values.iter_mut().enumerate() {
            let tk = k as f64 * dt_quad;
            while j < path.jump_times.len() && path.jump_times[j] <= tk {
                turned += path.jumps[j].deflection();
                j += 1;
            }
            *v = (turned + path.rotation_rate * tk).cos();
        }
        path.circling
    });
    Ok(finish(total, n_paths, dt_quad))
}

/// `j ≥ 1` with `P(j) = (1 − q) q^{j−1}`.
fn geometric_multiplicity(rng: &mut ChaCha8Rng, q: f64) -> u64 {
    if q <= 0.0 {
        return 1;
    }
    let u: f64 = rng.random();
    // inversion: j − 1 = floor(ln(1 − u)/ln q)
    1 + ((1.0 - u).ln() / q.ln()).floor() as u64
}

/// Fraction of paths with no scattering in the first period, compared with
/// `e^{−2μT}` by the caller.
pub fn circling_fraction_mc(mu: f64, period: f64, n_paths: usize, seed: u64) -> Result<MeanSe> {
    check_rates(mu, period)?;
    if n_paths == 0 {
        return Err(invalid("n_paths", "must be at least 1"));
    }
    let n_blocks = n_paths.div_ceil(BLOCK);
    let counts: Vec<usize> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            let count = BLOCK.min(n_paths - b * BLOCK);
            (0..count).filter(|_| exp_wait(&mut rng, 2.0 * mu) > period).count()
        })
        .collect();
    Ok(binomial(counts.iter().sum(), n_paths))
}
