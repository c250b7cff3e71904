//! Spectral solver for the generalized Boltzmann equation with memory
//! delays, in kinetic time `s`:
//!
//! ```text
//! ∂_s f + v·∇_x f + B ∂_θ f = η [ L f(s) + Σ_{k=1}^{⌊s/T⌋∧K} M_k f(s − kT) ]
//! ```
//!
//! on a torus of side `L_box`. The macroscopic solution is
//! `h(t) = f(ηt)`. Space is represented by Fourier modes `ξ ∈ [−N, N]²`,
//! velocity by a uniform angle grid.
//!
//! Time stepping: integrating factor for transport plus rotation (exact,
//! via the closed-form Larmor displacement), second-order Adams–Bashforth
//! for the collision and memory terms. History snapshots are kept at every
//! step and interpolated linearly at the delayed times.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{angle_grid, mode_of, AngularTransform};
use crate::operators::{
    build_l, build_lg, diffusion_coefficient, memory_ratio, period_from_field, AngularOperator,
    DEFAULT_QUADRATURE_ORDER,
};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Spatial Fourier modes `ξ ∈ [−n_x, n_x]²` times `n_v` velocity angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub n_x: usize,
    pub n_v: usize,
    pub l_box: f64,
}

impl SpectralGrid {
    pub fn new(n_x: usize, n_v: usize, l_box: f64) -> Result<Self> {
        if n_v < 8 || n_v % 2 != 0 {
            return Err(invalid("n_v", format!("must be even and at least 8, got {n_v}")));
        }
        if !(l_box > 0.0 && l_box.is_finite()) {
            return Err(invalid("l_box", format!("must be positive, got {l_box}")));
        }
        Ok(Self { n_x, n_v, l_box })
    }

    pub fn side(&self) -> usize {
        2 * self.n_x + 1
    }

    pub fn n_modes(&self) -> usize {
        self.side() * self.side()
    }

    pub fn len(&self) -> usize {
        self.n_modes() * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self, s: usize) -> (i64, i64) {
        let side = self.side();
        let n = self.n_x as i64;
        ((s % side) as i64 - n, (s / side) as i64 - n)
    }

    pub fn index(&self, xi: (i64, i64)) -> Option<usize> {
        let n = self.n_x as i64;
        if xi.0.abs() > n || xi.1.abs() > n {
            return None;
        }
        Some(((xi.1 + n) as usize) * self.side() + (xi.0 + n) as usize)
    }

    /// Index of `−ξ`.
    pub fn conjugate_index(&self, s: usize) -> usize {
        self.n_modes() - 1 - s
    }

    pub fn wavevector(&self, s: usize) -> (f64, f64) {
        let (a, b) = self.mode(s);
        let scale = TAU / self.l_box;
        (scale * a as f64, scale * b as f64)
    }

    pub fn angles(&self) -> Vec<f64> {
        angle_grid(self.n_v)
    }

    /// Measure of one grid cell in `(x, θ)` space, per spatial mode.
    fn weight(&self) -> f64 {
        self.l_box * self.l_box * TAU / self.n_v as f64
    }
}

/// Spatial Fourier coefficients `f̂(ξ, θ_j)` of a phase-space density.
#[derive(Clone, Debug)]
pub struct KineticField {
    pub grid: SpectralGrid,
    /// Row `s` (spatial mode) of length `n_v`.
    pub values: Vec<Complex64>,
    /// Kinetic time.
    pub time: f64,
}

impl KineticField {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.len()],
            time: 0.0,
        }
    }

    /// Field with `f̂(ξ, θ) = f(ξ, θ)`.
    pub fn from_spectral_fn<F: Fn((i64, i64), f64) -> Complex64>(grid: SpectralGrid, f: F) -> Self {
        let angles = grid.angles();
        let mut field = Self::zeros(grid);
        for s in 0..grid.n_modes() {
            let xi = grid.mode(s);
            for (j, &th) in angles.iter().enumerate() {
                field.values[s * grid.n_v + j] = f(xi, th);
            }
        }
        field
    }

    pub fn slice(&self, s: usize) -> &[Complex64] {
        let n = self.grid.n_v;
        &self.values[s * n..(s + 1) * n]
    }

    fn zero_mode(&self) -> usize {
        self.grid.index((0, 0)).unwrap_or(0)
    }

    /// `∫∫ f dx dθ`.
    pub fn mass(&self) -> f64 {
        let s = self.zero_mode();
        let sum: f64 = self.slice(s).iter().map(|z| z.re).sum();
        self.grid.l_box * self.grid.l_box * TAU / self.grid.n_v as f64 * sum
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.weight() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `⟨f⟩(ξ) = (1/2π)∫ f̂(ξ, θ) dθ` per spatial mode.
    pub fn angular_average(&self) -> Vec<Complex64> {
        let n = self.grid.n_v as f64;
        (0..self.grid.n_modes())
            .map(|s| self.slice(s).iter().sum::<Complex64>() / n)
            .collect()
    }

    /// `‖f − g‖_{L²(x,θ)}` with `g` independent of the angle.
    pub fn distance_to_density(&self, rho: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for (s, &r) in rho.iter().enumerate() {
            acc += self.slice(s).iter().map(|z| (z - r).norm_sqr()).sum::<f64>();
        }
        (self.grid.weight() * acc).sqrt()
    }

    /// `‖f − ⟨f⟩‖_{L²}`.
    pub fn distance_to_average(&self) -> f64 {
        self.distance_to_density(&self.angular_average())
    }

    pub fn distance_to(&self, other: &KineticField) -> f64 {
        let acc: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (self.grid.weight() * acc).sqrt()
    }

    /// `max |f̂(−ξ, θ) − conj f̂(ξ, θ)|`.
    pub fn conjugate_defect(&self) -> f64 {
        let g = self.grid;
        let mut worst: f64 = 0.0;
        for s in 0..g.n_modes() {
            let c = g.conjugate_index(s);
            for (a, b) in self.slice(s).iter().zip(self.slice(c)) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    /// Smallest value of the physical density on the `(2N+1)²` collocation
    /// points times the angle grid.
    pub fn min_physical_value(&self) -> f64 {
        let g = self.grid;
        let side = g.side();
        let mut min = f64::INFINITY;
        for py in 0..side {
            for px in 0..side {
                let x = g.l_box * px as f64 / side as f64;
                let y = g.l_box * py as f64 / side as f64;
                for j in 0..g.n_v {
                    let mut v = 0.0;
                    for s in 0..g.n_modes() {
                        let (kx, ky) = g.wavevector(s);
                        let phase = Complex64::from_polar(1.0, kx * x + ky * y);
                        v += (self.values[s * g.n_v + j] * phase).re;
                    }
                    min = min.min(v);
                }
            }
        }
        min
    }

    fn check_layout(&self, grid: &SpectralGrid) -> Result<()> {
        if self.grid != *grid || self.values.len() != grid.len() {
            return Err(invalid("field", "layout does not match the grid"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    pub mu: f64,
    pub b_field: f64,
    pub eta: f64,
    /// Memory delay in kinetic time; `2π/|B|` by default, infinite at `B = 0`.
    pub period: f64,
    pub include_memory: bool,
    pub quadrature_order: usize,
    /// `dt ≤ dt_safety / (η·2μ·(1 + ‖M‖/(2μ)))` in kinetic time.
    pub dt_safety: f64,
}

impl KineticParams {
    pub fn new(mu: f64, b_field: f64, eta: f64) -> Result<Self> {
        let p = Self {
            mu,
            b_field,
            eta,
            period: period_from_field(b_field),
            include_memory: true,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            dt_safety: 0.05,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", format!("must be non-negative, got {}", self.mu)));
        }
        if !(self.b_field >= 0.0 && self.b_field.is_finite()) {
            return Err(invalid("B", format!("must be finite and non-negative, got {}", self.b_field)));
        }
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return Err(invalid("eta", format!("must be at least 1, got {}", self.eta)));
        }
        if !(self.period > 0.0) {
            return Err(invalid("T", format!("must be positive, got {}", self.period)));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 0.5) {
            return Err(invalid("dt_safety", format!("must lie in (0, 0.5], got {}", self.dt_safety)));
        }
        Ok(())
    }

    /// Generalized operator for these parameters (memory included only if
    /// enabled).
    pub fn operator(&self, modes: usize) -> Result<AngularOperator> {
        let period = if self.include_memory { self.period } else { f64::INFINITY };
        build_lg(self.mu, period, modes, None, self.quadrature_order)
    }

    /// Heat-equation coefficient `D = −1/(2λ_1)`, half the trace-form `D_B`.
    pub fn heat_diffusivity(&self) -> Result<f64> {
        Ok(0.5 * diffusion_coefficient(&self.operator(2)?)?)
    }
}

/// Time stepper holding the state, history and precomputed factors.
pub struct KineticSolver {
    params: KineticParams,
    grid: SpectralGrid,
    transform: AngularTransform,
    /// `ηℓ_m` in FFT order.
    collision: Vec<f64>,
    /// `η c_{k,m}` in FFT order, `k = 1..`.
    memory: Vec<Vec<f64>>,
    dt: f64,
    rotation: Vec<Complex64>,
    phase: Vec<Complex64>,
    field: KineticField,
    history: VecDeque<Vec<Complex64>>,
    history_first_step: usize,
    history_keep: usize,
    step_index: usize,
    previous_rhs: Option<Vec<Complex64>>,
    initial_norm: f64,
}

impl KineticSolver {
    /// Largest stable kinetic-time step for `params`; at `μ = 0` the
    /// transport is exact and any step is stable.
    pub fn dt_bound(params: &KineticParams, op: &AngularOperator) -> f64 {
        let two_mu = 2.0 * params.mu;
        if two_mu == 0.0 {
            return f64::INFINITY;
        }
        let memory_norm: f64 = op
            .memory_terms
            .iter()
            .map(|row| row.iter().fold(0.0f64, |a, &c| a.max(c.abs())))
            .sum();
        params.dt_safety / (params.eta * two_mu * (1.0 + memory_norm / two_mu))
    }

    /// `dt` is in kinetic time; `None` uses the stability bound.
    pub fn new(params: KineticParams, f0: KineticField, dt: Option<f64>) -> Result<Self> {
        params.validate()?;
        let grid = f0.grid;
        f0.check_layout(&grid)?;
        let n_v = grid.n_v;
        let op = if params.mu > 0.0 {
            params.operator(n_v / 2)?
        } else {
            crate::operators::build_k(n_v / 2, params.quadrature_order)?
        };
        let bound = Self::dt_bound(&params, &op);
        let dt = match dt {
            Some(d) if !(d > 0.0) => return Err(invalid("dt", format!("must be positive, got {d}"))),
            Some(d) if d > bound * (1.0 + 1e-12) => {
                return Err(invalid("dt", format!("{d} exceeds the stability bound {bound}")))
            }
            Some(d) => d,
            None if bound.is_finite() => bound,
            None => return Err(invalid("dt", "required when the collision term vanishes")),
        };
        let eta = params.eta;
        let ell = if params.mu > 0.0 {
            build_l(params.mu, n_v / 2, params.quadrature_order)?.multipliers
        } else {
            vec![0.0; n_v / 2 + 1]
        };
        let collision: Vec<f64> = (0..n_v)
            .map(|j| eta * ell[mode_of(j, n_v).unsigned_abs() as usize])
            .collect();
        let delayed: &[Vec<f64>] = if params.include_memory && params.period.is_finite() && params.mu > 0.0 {
            &op.memory_terms
        } else {
            &[]
        };
        let memory: Vec<Vec<f64>> = delayed
            .iter()
            .map(|row| (0..n_v).map(|j| eta * row[mode_of(j, n_v).unsigned_abs() as usize]).collect())
            .collect();
        let history_keep = if memory.is_empty() {
            0
        } else {
            (memory.len() as f64 * params.period / dt).ceil() as usize + 2
        };
        let initial_norm = f0.l2_norm();
        let mut solver = Self {
            params,
            grid,
            transform: AngularTransform::new(n_v),
            collision,
            memory,
            dt,
            rotation: Vec::new(),
            phase: Vec::new(),
            field: f0,
            history: VecDeque::new(),
            history_first_step: 0,
            history_keep,
            step_index: 0,
            previous_rhs: None,
            initial_norm,
        };
        solver.field.time = 0.0;
        solver.set_propagator();
        Ok(solver)
    }

    fn set_propagator(&mut self) {
        let (n_v, dt, b) = (self.grid.n_v, self.dt, self.params.b_field);
        self.rotation = (0..n_v)
            .map(|j| {
                let m = mode_of(j, n_v);
                if 2 * m.unsigned_abs() as usize == n_v {
                    ZERO
                } else {
                    Complex64::from_polar(1.0, -(m as f64) * b * dt)
                }
            })
            .collect();
        // displacement over dt ending at angle θ: dt·sinc(B dt/2)·v(θ − B dt/2)
        let half = 0.5 * b * dt;
        let length = if half == 0.0 { dt } else { dt * half.sin() / half };
        let angles = self.grid.angles();
        let mut phase = Vec::with_capacity(self.grid.len());
        for s in 0..self.grid.n_modes() {
            let (kx, ky) = self.grid.wavevector(s);
            for &th in &angles {
                let a = th - half;
                phase.push(Complex64::from_polar(1.0, -length * (kx * a.cos() + ky * a.sin())));
            }
        }
        self.phase = phase;
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &KineticParams {
        &self.params
    }

    pub fn field(&self) -> &KineticField {
        &self.field
    }

    pub fn kinetic_time(&self) -> f64 {
        self.field.time
    }

    pub fn macro_time(&self) -> f64 {
        self.field.time / self.params.eta
    }

    pub fn steps_taken(&self) -> usize {
        self.step_index
    }

    /// Exact transport plus rotation over one step, in place.
    fn propagate(&self, data: &mut [Complex64]) {
        let n_v = self.grid.n_v;
        for (s, row) in data.chunks_mut(n_v).enumerate() {
            self.transform.analyze(row);
            for (z, r) in row.iter_mut().zip(&self.rotation) {
                *z *= r;
            }
            self.transform.synthesize(row);
            for (z, p) in row.iter_mut().zip(&self.phase[s * n_v..(s + 1) * n_v]) {
                *z *= p;
            }
        }
    }

    fn spectra(&self, data: &[Complex64]) -> Vec<Complex64> {
        let mut spec = data.to_vec();
        for row in spec.chunks_mut(self.grid.n_v) {
            self.transform.analyze(row);
        }
        spec
    }

    /// Collision plus memory right-hand side, on the angle grid.
    fn rhs(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let n_v = self.grid.n_v;
        let mut out: Vec<Complex64> = spectrum
            .chunks(n_v)
            .flat_map(|row| row.iter().zip(&self.collision).map(|(z, c)| z * c))
            .collect();
        let t = self.step_index as f64 * self.dt;
        for (k, coef) in self.memory.iter().enumerate() {
            let tau = t - (k + 1) as f64 * self.params.period;
            if tau < -1e-12 * self.params.period {
                break;
            }
            let p = (tau / self.dt).max(0.0);
            let i0 = (p.floor() as usize).max(self.history_first_step);
            let frac = p - i0 as f64;
            let a = &self.history[i0 - self.history_first_step];
            let b = if frac > 1e-12 {
                Some(&self.history[i0 + 1 - self.history_first_step])
            } else {
                None
            };
            for (idx, z) in out.iter_mut().enumerate() {
                let c = coef[idx % n_v];
                if c == 0.0 {
                    continue;
                }
                let v = match b {
                    Some(b) => a[idx] * (1.0 - frac) + b[idx] * frac,
                    None => a[idx],
                };
                *z += c * v;
            }
        }
        for row in out.chunks_mut(n_v) {
            self.transform.synthesize(row);
        }
        out
    }

    /// One integrating-factor Adams–Bashforth step.
    pub fn step(&mut self) -> Result<()> {
        let spectrum = self.spectra(&self.field.values);
        if self.history_keep > 0 {
            self.history.push_back(spectrum.clone());
            while self.history.len() > self.history_keep {
                self.history.pop_front();
                self.history_first_step += 1;
            }
        }
        let rhs = self.rhs(&spectrum);
        let dt = self.dt;
        let mut next: Vec<Complex64> = match self.previous_rhs.take() {
            None => self
                .field
                .values
                .iter()
                .zip(&rhs)
                .map(|(f, n)| f + dt * n)
                .collect(),
            Some(mut prev) => {
                self.propagate(&mut prev);
                self.field
                    .values
                    .iter()
                    .zip(&rhs)
                    .zip(&prev)
                    .map(|((f, n), p)| f + dt * (1.5 * n - 0.5 * p))
                    .collect()
            }
        };
        self.propagate(&mut next);
        self.field.values = next;
        self.previous_rhs = Some(rhs);
        self.step_index += 1;
        self.field.time = self.step_index as f64 * dt;
        let norm = self.field.l2_norm();
        let growth = norm / self.initial_norm.max(f64::MIN_POSITIVE);
        if !norm.is_finite() || (self.initial_norm > 0.0 && growth > 10.0) {
            return Err(Error::Unstable {
                time: self.macro_time(),
                growth,
            });
        }
        Ok(())
    }
}

/// Heat-equation solution `ρ̂(ξ, t) = ρ̂_0(ξ) e^{−D (2π|ξ|/L)² t}`.
pub fn heat_reference(diffusivity: f64, rho0: &[Complex64], grid: &SpectralGrid, t: f64) -> Result<Vec<Complex64>> {
    if !(diffusivity > 0.0) {
        return Err(invalid("D", format!("must be positive, got {diffusivity}")));
    }
    if rho0.len() != grid.n_modes() {
        return Err(invalid("rho0", "length does not match the grid"));
    }
    Ok(rho0
        .iter()
        .enumerate()
        .map(|(s, &r)| {
            let (kx, ky) = grid.wavevector(s);
            r * (-diffusivity * (kx * kx + ky * ky) * t).exp()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Macroscopic time.
    pub t: f64,
    pub mass: f64,
    pub dist_to_avg: f64,
    pub dist_to_heat: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub diagnostics: Vec<Diagnostic>,
    pub final_field: KineticField,
    /// `(macro time, field)` at each diagnostic time.
    pub snapshots: Vec<(f64, KineticField)>,
    /// Heat coefficient used for the reference solution.
    pub heat_diffusivity: f64,
    /// Fraction of mass circling forever, `e^{−2μT}`.
    pub circling_fraction: f64,
    pub dt_kinetic: f64,
    pub steps: usize,
}

/// Solves up to macroscopic time `t_end` with `n_diagnostics` equally
/// spaced records (plus the initial one). `dt` is the kinetic-time step.
pub fn solve(
    params: &KineticParams,
    f0: &KineticField,
    t_end: f64,
    dt: Option<f64>,
    n_diagnostics: usize,
    keep_snapshots: bool,
) -> Result<SolveOutput> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", format!("must be positive, got {t_end}")));
    }
    if !(params.mu > 0.0) {
        return Err(invalid("mu", "must be positive for the heat comparison"));
    }
    let mass0 = f0.mass();
    if !(mass0 > 0.0) {
        return Err(invalid("f0", format!("must have positive mass, got {mass0}")));
    }
    if (mass0 - 1.0).abs() > 1e-9 {
        return Err(invalid("f0", format!("must be normalized to unit mass, got {mass0}")));
    }
    if f0.min_physical_value() < -1e-12 {
        return Err(invalid("f0", "must be non-negative"));
    }
    let probe = KineticSolver::new(*params, f0.clone(), dt)?;
    let t_kin = t_end * params.eta;
    let steps = (t_kin / probe.dt()).ceil().max(1.0) as usize;
    let mut solver = KineticSolver::new(*params, f0.clone(), Some(t_kin / steps as f64))?;
    let grid = f0.grid;
    let diffusivity = params.heat_diffusivity()?;
    let rho0 = f0.angular_average();
    let n_diag = n_diagnostics.max(1);
    let record = |solver: &KineticSolver| -> Result<Diagnostic> {
        let t = solver.macro_time();
        let rho = heat_reference(diffusivity, &rho0, &grid, t)?;
        let field = solver.field();
        Ok(Diagnostic {
            t,
            mass: field.mass(),
            dist_to_avg: field.distance_to_average(),
            dist_to_heat: field.distance_to_density(&rho),
        })
    };
    let mut diagnostics = vec![record(&solver)?];
    let mut snapshots = Vec::new();
    if keep_snapshots {
        snapshots.push((0.0, solver.field().clone()));
    }
    let mut next_record = 1;
    for n in 1..=steps {
        solver.step()?;
        if n * n_diag >= next_record * steps {
            diagnostics.push(record(&solver)?);
            if keep_snapshots {
                snapshots.push((solver.macro_time(), solver.field().clone()));
            }
            next_record += 1;
        }
    }
    let mut final_field = solver.field().clone();
    final_field.time = solver.kinetic_time();
    Ok(SolveOutput {
        diagnostics,
        final_field,
        snapshots,
        heat_diffusivity: diffusivity,
        circling_fraction: memory_ratio(params.mu, params.period),
        dt_kinetic: solver.dt(),
        steps,
    })
}

/// First and second Hilbert correctors of an angle-independent `g0`.
#[derive(Clone, Debug)]
pub struct HilbertCorrectors {
    pub g0: Vec<Complex64>,
    pub g1: KineticField,
    pub g2: KineticField,
}

/// `g1 = (L^G)^{-1}[v·∇g0]` and
/// `g2 = (L^G)^{-1}[∂_t g0 + v·∇g1 + B∂_θ g1]` with `∂_t g0 = DΔg0`.
///
/// The angular mean of the `g2` source vanishes exactly when
/// `D = −1/(2λ_1)`; it is projected out, which is the solvability condition.
pub fn hilbert_correctors(
    g0: &[Complex64],
    grid: &SpectralGrid,
    op: &AngularOperator,
    b_field: f64,
    diffusivity: f64,
) -> Result<HilbertCorrectors> {
    if g0.len() != grid.n_modes() {
        return Err(invalid("g0", "length does not match the grid"));
    }
    if op.modes() < 2 {
        return Err(invalid("op", "needs at least two angular modes"));
    }
    let (l1, l2) = (op.multiplier(1), op.multiplier(2));
    for (m, l) in [(1, l1), (2, l2)] {
        if l.abs() < crate::operators::SINGULAR_TOLERANCE {
            return Err(Error::NearSingular { mode: m, value: l });
        }
    }
    let _ = diffusivity;
    let n_v = grid.n_v;
    let tr = AngularTransform::new(n_v);
    let i = Complex64::new(0.0, 1.0);
    let mut g1 = KineticField::zeros(*grid);
    let mut g2 = KineticField::zeros(*grid);
    let at = |m: i64| if m >= 0 { m as usize } else { (n_v as i64 + m) as usize };
    for s in 0..grid.n_modes() {
        let (kx, ky) = grid.wavevector(s);
        let g = g0[s];
        // i k·v = i(a e^{iθ} + b e^{−iθ})
        let a = Complex64::new(kx, -ky) * 0.5;
        let b = Complex64::new(kx, ky) * 0.5;
        let up = i * g * a / l1;
        let down = i * g * b / l1;
        let mut spec1 = vec![ZERO; n_v];
        spec1[at(1)] = up;
        spec1[at(-1)] = down;
        let mut spec2 = vec![ZERO; n_v];
        // v·∇g1 on modes ±2, B∂_θ g1 on modes ±1; mode 0 is projected out
        spec2[at(2)] = i * a * up / l2;
        spec2[at(-2)] = i * b * down / l2;
        spec2[at(1)] = i * b_field * up / l1;
        spec2[at(-1)] = -i * b_field * down / l1;
        tr.synthesize(&mut spec1);
        tr.synthesize(&mut spec2);
        g1.values[s * n_v..(s + 1) * n_v].copy_from_slice(&spec1);
        g2.values[s * n_v..(s + 1) * n_v].copy_from_slice(&spec2);
    }
    Ok(HilbertCorrectors {
        g0: g0.to_vec(),
        g1,
        g2,
    })
}

/// Mode-0 residual of the `g2` source, `−D|k|²ĝ0 − |k|²ĝ0/(2λ_1)`, per
/// spatial mode; zero when `D` is the heat coefficient of the operator.
pub fn solvability_residual(g0: &[Complex64], grid: &SpectralGrid, op: &AngularOperator, diffusivity: f64) -> Vec<Complex64> {
    let l1 = op.multiplier(1);
    g0.iter()
        .enumerate()
        .map(|(s, &g)| {
            let (kx, ky) = grid.wavevector(s);
            let k2 = kx * kx + ky * ky;
            -g * k2 * (diffusivity + 0.5 / l1)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HilbertRow {
    pub eta: f64,
    /// `‖h − ρ‖`.
    pub dist_heat: f64,
    /// `‖h − ρ − g1/η‖`.
    pub dist_hilbert1: f64,
}

/// Kinetic solves at each `η` compared at `t_probe` with the heat solution
/// and with its first-order Hilbert correction.
pub fn hilbert_residual_study(
    eta_list: &[f64],
    base: &KineticParams,
    f0: &KineticField,
    t_probe: f64,
) -> Result<Vec<HilbertRow>> {
    if eta_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("eta_list", "must be strictly increasing"));
    }
    eta_list
        .par_iter()
        .map(|&eta| {
            let params = KineticParams { eta, ..*base };
            let out = solve(&params, f0, t_probe, None, 1, false)?;
            let grid = f0.grid;
            let diffusivity = out.heat_diffusivity;
            let rho = heat_reference(diffusivity, &f0.angular_average(), &grid, t_probe)?;
            let op = params.operator(grid.n_v / 2)?;
            let corr = hilbert_correctors(&rho, &grid, &op, params.b_field, diffusivity)?;
            let mut first = KineticField::zeros(grid);
            for s in 0..grid.n_modes() {
                for j in 0..grid.n_v {
                    let idx = s * grid.n_v + j;
                    first.values[idx] = rho[s] + corr.g1.values[idx] / eta;
                }
            }
            Ok(HilbertRow {
                eta,
                dist_heat: out.final_field.distance_to_density(&rho),
                dist_hilbert1: out.final_field.distance_to(&first),
            })
        })
        .collect()
}

/// Unit-mass density `(1 + a cos(2πx/L)) / (2π L²)`, isotropic in velocity.
pub fn cosine_density(grid: SpectralGrid, amplitude: f64) -> KineticField {
    let base = 1.0 / (TAU * grid.l_box * grid.l_box);
    KineticField::from_spectral_fn(grid, |xi, _| match xi {
        (0, 0) => Complex64::new(base, 0.0),
        (1, 0) | (-1, 0) => Complex64::new(0.5 * amplitude * base, 0.0),
        _ => ZERO,
    })
}

/// Spatially homogeneous unit-mass density `(1 + a cos(mθ)) / (2π L²)`.
pub fn homogeneous_harmonic(grid: SpectralGrid, m: u32, amplitude: f64) -> KineticField {
    let base = 1.0 / (TAU * grid.l_box * grid.l_box);
    KineticField::from_spectral_fn(grid, |xi, th| {
        if xi == (0, 0) {
            Complex64::new(base * (1.0 + amplitude * (m as f64 * th).cos()), 0.0)
        } else {
            ZERO
        }
    })
}

/// Amplitude of angular harmonic `m` of spatial mode `ξ`.
pub fn harmonic_amplitude(field: &KineticField, xi: (i64, i64), m: i64) -> Option<Complex64> {
    let s = field.grid.index(xi)?;
    let n_v = field.grid.n_v;
    let tr = AngularTransform::new(n_v);
    let mut row = field.slice(s).to_vec();
    tr.analyze(&mut row);
    let j = if m >= 0 { m as usize } else { (n_v as i64 + m) as usize };
    row.get(j).copied()
}
