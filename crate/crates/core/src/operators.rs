//! Fourier-multiplier representation of the collision operators on the
//! velocity circle.
//!
//! All operators here commute with rotations, so they act diagonally on
//! angular harmonics `e^{imθ}`:
//!
//! * `K f(v) = ½∫ f(R_{ϑ(b)} v) db` with multipliers `κ_m`,
//! * `L = 2μ(K − Id)` (linear Boltzmann),
//! * `M` (self-recollision memory), weights `e^{−2μkT}`,
//! * `L^G = L + M`.
//!
//! With `b = sin u`, `κ_m = ∫_0^{π/2} cos(m(π − 2u)) cos u du`; the
//! integrand is smooth, so composite Gauss–Legendre in `u` converges
//! exponentially.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{mode_of, AngularTransform};
use crate::quadrature::GaussLegendre;

/// `β = (π − 2)/2`, the bound on `|κ_m|` used by the series criteria.
pub const BETA: f64 = (PI - 2.0) / 2.0;
pub const DEFAULT_MODES: usize = 64;
pub const DEFAULT_QUADRATURE_ORDER: usize = 256;
pub const MIN_QUADRATURE_ORDER: usize = 32;
/// Neglected memory weight `e^{−2μ K_cut T}` must be below this.
pub const MEMORY_TOLERANCE: f64 = 1e-14;
pub const SINGULAR_TOLERANCE: f64 = 1e-13;
/// Upper limit on the memory series length.
pub const MAX_K_CUT: usize = 20_000;
const MAX_SERIES_TERMS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// `K`
    Gain,
    /// `L = 2μ(K − Id)`
    Boltzmann,
    /// `M`
    Memory,
    /// `L^G = L + M`
    Generalized,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngularOperator {
    pub kind: OperatorKind,
    /// `λ_m` for `m = 0..=modes`; negative modes follow from `λ_{−m} = λ_m`.
    pub multipliers: Vec<f64>,
    pub mu: f64,
    /// Larmor period in kinetic time; infinite at zero field.
    pub period: f64,
    pub k_cut: usize,
    pub quadrature_order: usize,
    /// Per-delay memory multipliers `c_{k,m}`, `k = 1..=k_cut`, so that
    /// `m_m = Σ_k c_{k,m}`. Empty for `K` and `L`.
    #[serde(skip)]
    pub memory_terms: Vec<Vec<f64>>,
}

impl AngularOperator {
    pub fn modes(&self) -> usize {
        self.multipliers.len() - 1
    }

    /// Multiplier of harmonic `m`.
    ///
    /// # Panics
    /// If `|m|` exceeds the stored number of modes.
    pub fn multiplier(&self, m: i64) -> f64 {
        self.multipliers[m.unsigned_abs() as usize]
    }

    /// Multipliers for `m = −modes..=modes`.
    pub fn symmetric_multipliers(&self) -> Vec<f64> {
        let n = self.modes() as i64;
        (-n..=n).map(|m| self.multiplier(m)).collect()
    }

    /// Largest `|λ_m|`, the operator norm on `L²(S¹)`.
    pub fn norm(&self) -> f64 {
        self.multipliers.iter().fold(0.0, |a, &l| a.max(l.abs()))
    }

    /// `min_{m≠0} |λ_m|`, used as the operational spectral gap.
    pub fn spectral_gap(&self) -> f64 {
        self.multipliers[1..]
            .iter()
            .fold(f64::INFINITY, |a, &l| a.min(l.abs()))
    }

    fn check_spectrum_len(&self, n: usize) -> Result<()> {
        if n / 2 > self.modes() {
            return Err(invalid(
                "spectrum",
                format!("{n}-point grid needs {} modes, operator has {}", n / 2, self.modes()),
            ));
        }
        Ok(())
    }

    /// Applies the operator to an FFT-ordered spectrum in place.
    pub fn apply_spectrum(&self, spectrum: &mut [Complex64]) -> Result<()> {
        let n = spectrum.len();
        self.check_spectrum_len(n)?;
        for (j, z) in spectrum.iter_mut().enumerate() {
            *z *= self.multiplier(mode_of(j, n));
        }
        Ok(())
    }

    /// Applies the operator to real samples on the uniform angle grid.
    pub fn apply_on_grid(&self, values: &[f64]) -> Result<Vec<f64>> {
        let tr = AngularTransform::new(values.len());
        let mut spec = tr.spectrum_of(values);
        self.apply_spectrum(&mut spec)?;
        Ok(tr.real_values_of(&spec))
    }
}

/// `κ_n` by composite Gauss–Legendre, with a cache over `n`.
pub(crate) struct KappaTable {
    rule: GaussLegendre,
    order: usize,
    cache: HashMap<u64, f64>,
}

impl KappaTable {
    pub(crate) fn new(order: usize) -> Result<Self> {
        if order < MIN_QUADRATURE_ORDER {
            return Err(invalid(
                "quadrature_order",
                format!("must be at least {MIN_QUADRATURE_ORDER}, got {order}"),
            ));
        }
        Ok(Self {
            rule: GaussLegendre::new(order),
            order,
            cache: HashMap::new(),
        })
    }

    pub(crate) fn kappa(&mut self, n: u64) -> f64 {
        if let Some(&v) = self.cache.get(&n) {
            return v;
        }
        // n/2 oscillations over [0, π/2]; keep each panel to ~order/8 of them
        let per_panel = (self.order / 4).max(1) as u64;
        let panels = (n / per_panel + 1) as usize;
        let nf = n as f64;
        let v = self
            .rule
            .integrate(|u| (nf * (PI - 2.0 * u)).cos() * u.cos(), 0.0, PI / 2.0, panels);
        self.cache.insert(n, v);
        v
    }
}

/// `κ_n = ½∫_{−1}^{1} cos(n ϑ(b)) db` at the given quadrature order.
pub fn gain_multiplier(n: u64, quadrature_order: usize) -> Result<f64> {
    Ok(KappaTable::new(quadrature_order)?.kappa(n))
}

pub fn build_k(modes: usize, quadrature_order: usize) -> Result<AngularOperator> {
    let mut table = KappaTable::new(quadrature_order)?;
    let mut multipliers: Vec<f64> = (0..=modes as u64).map(|m| table.kappa(m)).collect();
    multipliers[0] = 1.0;
    Ok(AngularOperator {
        kind: OperatorKind::Gain,
        multipliers,
        mu: f64::NAN,
        period: f64::INFINITY,
        k_cut: 0,
        quadrature_order,
        memory_terms: Vec::new(),
    })
}

pub fn build_l(mu: f64, modes: usize, quadrature_order: usize) -> Result<AngularOperator> {
    check_mu(mu)?;
    let k = build_k(modes, quadrature_order)?;
    let mut multipliers: Vec<f64> = k.multipliers.iter().map(|&c| 2.0 * mu * (c - 1.0)).collect();
    multipliers[0] = 0.0;
    Ok(AngularOperator {
        kind: OperatorKind::Boltzmann,
        multipliers,
        mu,
        period: f64::INFINITY,
        k_cut: 0,
        quadrature_order,
        memory_terms: Vec::new(),
    })
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be positive and finite, got {mu}")));
    }
    Ok(())
}

fn check_period(period: f64) -> Result<()> {
    if !(period > 0.0) {
        return Err(invalid("T", format!("must be positive, got {period}")));
    }
    Ok(())
}

/// Survival weight `e^{−2μT}` of one free Larmor period.
pub fn memory_ratio(mu: f64, period: f64) -> f64 {
    if period.is_infinite() {
        0.0
    } else {
        (-2.0 * mu * period).exp()
    }
}

/// Smallest `K` with `e^{−2μKT} < MEMORY_TOLERANCE`.
pub fn required_k_cut(mu: f64, period: f64) -> Result<usize> {
    check_mu(mu)?;
    check_period(period)?;
    let q = memory_ratio(mu, period);
    if q == 0.0 {
        return Ok(0);
    }
    let mut k = (MEMORY_TOLERANCE.ln() / q.ln()).floor().max(0.0) as usize;
    while k <= MAX_K_CUT && q.powi(k as i32) >= MEMORY_TOLERANCE {
        k += 1;
    }
    while k > 0 && q.powi(k as i32 - 1) < MEMORY_TOLERANCE {
        k -= 1;
    }
    if k > MAX_K_CUT {
        return Err(Error::MemoryTruncation {
            k_cut: MAX_K_CUT,
            residual: q.powi(MAX_K_CUT as i32),
        });
    }
    Ok(k)
}

/// Memory operator `M`. `k_cut = None` picks the smallest sufficient cut.
pub fn build_m(
    mu: f64,
    period: f64,
    modes: usize,
    k_cut: Option<usize>,
    quadrature_order: usize,
) -> Result<AngularOperator> {
    check_mu(mu)?;
    check_period(period)?;
    let q = memory_ratio(mu, period);
    let needed = required_k_cut(mu, period)?;
    let k_cut = match k_cut {
        Some(k) if k < needed => {
            return Err(Error::MemoryTruncation {
                k_cut: k,
                residual: q.powi(k as i32),
            })
        }
        Some(k) => k,
        None => needed,
    };
    let mut table = KappaTable::new(quadrature_order)?;
    let mut memory_terms = Vec::with_capacity(k_cut);
    let mut weight = 1.0;
    for k in 1..=k_cut as u64 {
        weight *= q;
        let row: Vec<f64> = (0..=modes as u64)
            .map(|m| {
                if m == 0 {
                    0.0
                } else {
                    2.0 * mu * weight * (table.kappa(m * (k + 1)) - table.kappa(m * k))
                }
            })
            .collect();
        memory_terms.push(row);
    }
    let multipliers = (0..=modes)
        .map(|m| memory_terms.iter().map(|row| row[m]).sum())
        .collect();
    Ok(AngularOperator {
        kind: OperatorKind::Memory,
        multipliers,
        mu,
        period,
        k_cut,
        quadrature_order,
        memory_terms,
    })
}

/// Generalized operator `L^G = L + M`.
pub fn build_lg(
    mu: f64,
    period: f64,
    modes: usize,
    k_cut: Option<usize>,
    quadrature_order: usize,
) -> Result<AngularOperator> {
    let l = build_l(mu, modes, quadrature_order)?;
    let m = build_m(mu, period, modes, k_cut, quadrature_order)?;
    let multipliers = l
        .multipliers
        .iter()
        .zip(&m.multipliers)
        .map(|(a, b)| a + b)
        .collect();
    Ok(AngularOperator {
        kind: OperatorKind::Generalized,
        multipliers,
        mu,
        period,
        k_cut: m.k_cut,
        quadrature_order,
        memory_terms: m.memory_terms,
    })
}

/// Kinetic-time Larmor period `2π/|B|`, infinite at zero field.
pub fn period_from_field(b_field: f64) -> f64 {
    if b_field == 0.0 {
        f64::INFINITY
    } else {
        TAU / b_field.abs()
    }
}

fn check_zero_mean(spectrum: &[Complex64]) -> Result<()> {
    let scale = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if spectrum[0].norm() > 1e-12 * scale.max(1.0) {
        return Err(Error::Domain(format!(
            "right-hand side must have zero angular mean, got {}",
            spectrum[0]
        )));
    }
    Ok(())
}

/// Modewise inverse: `ĥ_m = ĝ_m/λ_m` for `m ≠ 0`, `ĥ_0 = 0`.
pub fn invert_lg_direct(op: &AngularOperator, g_hat: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = g_hat.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    op.check_spectrum_len(n)?;
    check_zero_mean(g_hat)?;
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for j in 1..n {
        let m = mode_of(j, n);
        let lambda = op.multiplier(m);
        if lambda.abs() < SINGULAR_TOLERANCE {
            return Err(Error::NearSingular { mode: m, value: lambda });
        }
        h[j] = g_hat[j] / lambda;
    }
    Ok(h)
}

/// Direct inverse of real grid samples.
pub fn invert_lg_direct_on_grid(op: &AngularOperator, g: &[f64]) -> Result<Vec<f64>> {
    let tr = AngularTransform::new(g.len());
    let spec = tr.spectrum_of(g);
    let h = invert_lg_direct(op, &spec)?;
    Ok(tr.real_values_of(&h))
}

/// Operator-norm bound `β + q/(1−q)(β+1)` of `K + M/(2μ)` on zero-mean
/// functions, `q = e^{−2μT}`.
pub fn contraction_factor(mu: f64, period: f64) -> f64 {
    let q = memory_ratio(mu, period);
    BETA + q / (1.0 - q) * (BETA + 1.0)
}

/// Result of a series inversion.
#[derive(Clone, Debug)]
pub struct SeriesInverse {
    pub values: Vec<f64>,
    pub terms: usize,
    pub last_term_norm: f64,
}

fn rms(values: &[Complex64]) -> f64 {
    // Parseval: rms of the grid function
    values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn series_setup(mu: f64, period: f64, g: &[f64]) -> Result<(AngularTransform, Vec<Complex64>)> {
    check_mu(mu)?;
    check_period(period)?;
    if g.is_empty() {
        return Err(invalid("g", "empty grid"));
    }
    let tr = AngularTransform::new(g.len());
    let spec = tr.spectrum_of(g);
    check_zero_mean(&spec)?;
    Ok((tr, spec))
}

/// Neumann-series inverse `h = −(1/2μ) Σ_n (K + M/(2μ))^n g`.
///
/// Refuses with [`Error::DivergenceRisk`] when the contraction bound is not
/// below one.
pub fn invert_lg_neumann(mu: f64, period: f64, g: &[f64], tol: f64) -> Result<SeriesInverse> {
    let (tr, spec) = series_setup(mu, period, g)?;
    let bound = contraction_factor(mu, period);
    if !(bound < 1.0) {
        return Err(Error::DivergenceRisk { bound });
    }
    let n = g.len();
    let lg = build_lg(mu, period, n / 2, None, DEFAULT_QUADRATURE_ORDER)?;
    let a: Vec<f64> = (0..n)
        .map(|j| 1.0 + lg.multiplier(mode_of(j, n)) / (2.0 * mu))
        .collect();
    let mut term = spec;
    term[0] = Complex64::new(0.0, 0.0);
    let mut sum = term.clone();
    let mut terms = 1;
    let mut last = rms(&term);
    while last >= tol && terms < MAX_SERIES_TERMS {
        for (z, &aj) in term.iter_mut().zip(&a) {
            *z *= aj;
        }
        for (s, z) in sum.iter_mut().zip(&term) {
            *s += z;
        }
        terms += 1;
        last = rms(&term);
    }
    for s in sum.iter_mut() {
        *s *= -1.0 / (2.0 * mu);
    }
    Ok(SeriesInverse {
        values: tr.real_values_of(&sum),
        terms,
        last_term_norm: last / (2.0 * mu),
    })
}

/// Split-series inverse `h = Σ_k L^{-1}[M(−L)^{-1}]^k g`.
///
/// Refuses when `‖M‖·‖L^{-1}‖ < 1` cannot be guaranteed from the bounds
/// `‖L^{-1}‖ ≤ 1/(2μ(1−β))`, `‖M‖ ≤ 2μ q/(1−q)(1+β)`.
pub fn invert_split_series(mu: f64, period: f64, g: &[f64], tol: f64) -> Result<SeriesInverse> {
    let (tr, spec) = series_setup(mu, period, g)?;
    let q = memory_ratio(mu, period);
    let bound = q / (1.0 - q) * (1.0 + BETA) / (1.0 - BETA);
    if !(bound < 1.0) {
        return Err(Error::DivergenceRisk { bound });
    }
    let n = g.len();
    let l = build_l(mu, n / 2, DEFAULT_QUADRATURE_ORDER)?;
    let m = build_m(mu, period, n / 2, None, DEFAULT_QUADRATURE_ORDER)?;
    let mut term = spec;
    term[0] = Complex64::new(0.0, 0.0);
    let apply_l_inv = |v: &mut [Complex64]| {
        for (j, z) in v.iter_mut().enumerate().skip(1) {
            *z /= l.multiplier(mode_of(j, n));
        }
        v[0] = Complex64::new(0.0, 0.0);
    };
    // term_k = [M(−L)^{-1}]^k g; the sum accumulates L^{-1} term_k
    let mut sum = vec![Complex64::new(0.0, 0.0); n];
    let mut terms = 0;
    let mut last;
    loop {
        let mut contribution = term.clone();
        apply_l_inv(&mut contribution);
        last = rms(&contribution);
        for (s, z) in sum.iter_mut().zip(&contribution) {
            *s += z;
        }
        terms += 1;
        if last < tol || terms >= MAX_SERIES_TERMS {
            break;
        }
        // next: M(−L)^{-1} term = −M L^{-1} term = −M contribution
        for (j, z) in contribution.iter_mut().enumerate() {
            *z *= -m.multiplier(mode_of(j, n));
        }
        term = contribution;
    }
    Ok(SeriesInverse {
        values: tr.real_values_of(&sum),
        terms,
        last_term_norm: last,
    })
}

/// Trace-form diffusion coefficient `D_B = −1/λ_1`.
///
/// The componentwise tensor `(1/2π)∫ v_i(−L^G)^{-1}v_j dv` equals
/// `(D_B/2) δ_ij`; see [`diffusion_tensor`].
pub fn diffusion_coefficient(op: &AngularOperator) -> Result<f64> {
    let lambda = op.multiplier(1);
    if lambda.abs() < SINGULAR_TOLERANCE {
        return Err(Error::NearSingular { mode: 1, value: lambda });
    }
    Ok(-1.0 / lambda)
}

/// `D^{ij} = (1/2π)∫ v_i (−L^G)^{-1} v_j dθ` by grid quadrature.
pub fn diffusion_tensor(op: &AngularOperator) -> Result<[[f64; 2]; 2]> {
    let n = 2 * op.modes().min(32).max(2);
    let grid = crate::fourier::angle_grid(n);
    let vx: Vec<f64> = grid.iter().map(|t| t.cos()).collect();
    let vy: Vec<f64> = grid.iter().map(|t| t.sin()).collect();
    let hx = invert_lg_direct_on_grid(op, &vx)?;
    let hy = invert_lg_direct_on_grid(op, &vy)?;
    let avg = |a: &[f64], b: &[f64]| -a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
    Ok([[avg(&vx, &hx), avg(&vx, &hy)], [avg(&vy, &hx), avg(&vy, &hy)]])
}

/// The series-invertibility threshold on the Larmor period.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Threshold {
    pub beta: f64,
    /// `½ ln(2/(1−β))`, at which the contraction bound equals one (μ = 1).
    pub t_star: f64,
    pub b_star: f64,
    /// Period bound as stated alongside the field range `|B| < 8π/3`.
    pub stated_t_bound: f64,
    pub stated_b_bound: f64,
    /// `stated_b_bound − b_star`.
    pub b_gap: f64,
}

pub fn invertibility_threshold() -> Threshold {
    let t_star = 0.5 * (2.0 / (1.0 - BETA)).ln();
    let b_star = TAU / t_star;
    let stated_b_bound = 8.0 * PI / 3.0;
    Threshold {
        beta: BETA,
        t_star,
        b_star,
        stated_t_bound: 0.75,
        stated_b_bound,
        b_gap: stated_b_bound - b_star,
    }
}

/// One row of the `D_B(|B|)` sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub b_field: f64,
    pub period: f64,
    pub d_direct: f64,
    /// `−1/ℓ_1`, the `k = 0` term of the split series.
    pub d_markovian: f64,
    /// Remaining terms of the split series, summed until convergence.
    pub d_memory: f64,
    pub series_converged: bool,
    pub spectral_gap: f64,
}

/// Diffusion coefficient and its split-series decomposition over fields.
pub fn operator_sweep(
    mu: f64,
    fields: &[f64],
    modes: usize,
    quadrature_order: usize,
) -> Result<Vec<SweepRow>> {
    check_mu(mu)?;
    let l = build_l(mu, modes.max(1), quadrature_order)?;
    let ell = l.multiplier(1);
    fields
        .iter()
        .map(|&b| {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(invalid("B", format!("must be finite and non-negative, got {b}")));
            }
            let period = period_from_field(b);
            let lg = build_lg(mu, period, modes.max(1), None, quadrature_order)?;
            let d_direct = diffusion_coefficient(&lg)?;
            let d_markovian = -1.0 / ell;
            // first-harmonic split series: −Σ_{k≥1} (1/ℓ)(−m/ℓ)^k
            let ratio = -(lg.multiplier(1) - ell) / ell;
            let mut d_memory = 0.0;
            let mut term = -1.0 / ell;
            let mut converged = ratio.abs() < 1.0;
            if converged {
                let mut k = 0;
                loop {
                    term *= ratio;
                    d_memory += term;
                    k += 1;
                    if term.abs() < 1e-16 * d_direct.abs() || k > MAX_SERIES_TERMS {
                        break;
                    }
                }
                converged = k <= MAX_SERIES_TERMS;
            } else {
                d_memory = d_direct - d_markovian;
            }
            Ok(SweepRow {
                b_field: b,
                period,
                d_direct,
                d_markovian,
                d_memory,
                series_converged: converged && contraction_factor(mu, period) < 1.0,
                spectral_gap: lg.spectral_gap(),
            })
        })
        .collect()
}
