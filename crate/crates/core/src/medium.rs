//! Poisson field of hard-disk obstacles on the unbounded plane.
//!
//! The plane is cut into square cells, and cells into buckets. The
//! obstacles of a bucket are drawn from a ChaCha stream keyed by
//! `(master_seed, cell, bucket)`, so any region can be generated lazily, in
//! any order, and always gives the same points.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::PlanarPoint;
use crate::seeding::{derive_seed, mix_pair, rng_from_seed};

/// Regime parameters. The obstacle intensity is `μ_eff = ημ/ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub eps: f64,
    pub mu: f64,
    pub eta: f64,
    pub mu_eff: f64,
    pub b_field: f64,
    /// `1/|B|`; `None` at zero field.
    pub larmor_radius: Option<f64>,
    /// Microscopic cyclotron period `2π/|B|`; `None` at zero field.
    pub larmor_period: Option<f64>,
}

pub fn scaling_from(eps: f64, mu: f64, eta: f64, b_field: f64) -> Result<ScalingParams> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be positive, got {mu}")));
    }
    ScalingParams::build(eps, mu, eta, b_field)
}

impl ScalingParams {
    /// Same geometry without obstacles (`μ = 0`).
    pub fn obstacle_free(eps: f64, b_field: f64) -> Result<Self> {
        Self::build(eps, 0.0, 1.0, b_field)
    }

    fn build(eps: f64, mu: f64, eta: f64, b_field: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", format!("must be positive, got {eps}")));
        }
        if !(eta >= 1.0 && eta.is_finite()) {
            return Err(invalid("eta", format!("must be at least 1, got {eta}")));
        }
        if !(b_field >= 0.0 && b_field.is_finite()) {
            return Err(invalid("B", format!("must be finite and non-negative, got {b_field}")));
        }
        let (larmor_radius, larmor_period) = if b_field > 0.0 {
            (Some(1.0 / b_field), Some(2.0 * PI / b_field))
        } else {
            (None, None)
        };
        if let Some(r) = larmor_radius {
            if r <= eps {
                return Err(invalid("B", format!("Larmor radius {r} must exceed eps = {eps}")));
            }
        }
        Ok(Self {
            eps,
            mu,
            eta,
            mu_eff: eta * mu / eps,
            b_field,
            larmor_radius,
            larmor_period,
        })
    }

    /// Covered area fraction scale `μ_eff ε²`.
    pub fn dilution(&self) -> f64 {
        self.mu_eff * self.eps * self.eps
    }

    /// Inverse mean free path scale `μ_eff ε`.
    pub fn collision_density(&self) -> f64 {
        self.mu_eff * self.eps
    }

    /// `ε^{1/2} η⁵`, which must be small for the kinetic limit.
    pub fn growth_condition(&self) -> f64 {
        self.eps.sqrt() * self.eta.powi(5)
    }

    pub fn mean_free_path(&self) -> f64 {
        1.0 / (2.0 * self.eps * self.mu_eff)
    }

    /// Probability `e^{−4πRε μ_eff}` that a full Larmor orbit is obstacle free.
    pub fn circling_probability(&self) -> Option<f64> {
        self.larmor_radius
            .map(|r| (-4.0 * PI * r * self.eps * self.mu_eff).exp())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.mu_eff == 0.0 {
            return out;
        }
        if self.dilution() > 0.1 {
            out.push(format!("not dilute: mu_eff*eps^2 = {:.3e} > 0.1", self.dilution()));
        }
        if self.collision_density() < 1.0 {
            out.push(format!(
                "below Boltzmann-Grad scaling: mu_eff*eps = {:.3e} < 1",
                self.collision_density()
            ));
        }
        if self.growth_condition() > 1.0 {
            out.push(format!(
                "eps^(1/2)*eta^5 = {:.3e} > 1: divergence of eta too fast at unit time",
                self.growth_condition()
            ));
        }
        out
    }
}

/// Identifies an obstacle: generation cell, bucket within the cell, and
/// position within the bucket's list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObstacleId {
    pub cell: (i64, i64),
    pub bucket: u32,
    pub index: u32,
}

/// Lazily generated Poisson field.
///
/// Each cell is split into `buckets_per_side²` square buckets whose
/// obstacle counts are independent Poisson variables; the union over a cell
/// is therefore Poisson with mean `μ_eff · cell_size²` and uniform positions.
/// Only buckets that are actually queried get generated.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstacleField {
    pub master_seed: u64,
    pub cell_size: f64,
    pub params: ScalingParams,
    pub buckets_per_side: usize,
}

impl ObstacleField {
    pub fn new(params: ScalingParams, master_seed: u64) -> Self {
        let eps = params.eps;
        let cell_size = match params.larmor_radius {
            Some(r) => (2.0 * (r + eps)).max(10.0 * eps),
            None => 10.0 * eps,
        };
        // a couple of obstacles per bucket, never finer than a few radii
        let target = if params.mu_eff > 0.0 {
            (1.5 / params.mu_eff.sqrt()).max(4.0 * eps)
        } else {
            cell_size
        };
        let buckets_per_side = ((cell_size / target).floor() as usize).clamp(1, 256);
        Self {
            master_seed,
            cell_size,
            params,
            buckets_per_side,
        }
    }

    pub fn bucket_size(&self) -> f64 {
        self.cell_size / self.buckets_per_side as f64
    }

    pub fn cell_of(&self, p: PlanarPoint) -> (i64, i64) {
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
        )
    }

    /// Global bucket coordinates to (cell, bucket index within the cell).
    fn split_bucket(&self, gx: i64, gy: i64) -> ((i64, i64), u32) {
        let nb = self.buckets_per_side as i64;
        let cell = (gx.div_euclid(nb), gy.div_euclid(nb));
        let sub = gy.rem_euclid(nb) * nb + gx.rem_euclid(nb);
        (cell, sub as u32)
    }

    fn bucket_points(&self, cell: (i64, i64), bucket: u32) -> Vec<PlanarPoint> {
        let h = self.bucket_size();
        let mean = self.params.mu_eff * h * h;
        if mean <= 0.0 {
            return Vec::new();
        }
        let mut rng: ChaCha8Rng = rng_from_seed(self.master_seed);
        rng.set_stream(mix_pair(mix_pair(cell.0, cell.1) as i64, bucket as i64));
        let count = Poisson::new(mean)
            .map(|d| d.sample(&mut rng) as usize)
            .unwrap_or(0);
        let nb = self.buckets_per_side as u32;
        let x0 = cell.0 as f64 * self.cell_size + (bucket % nb) as f64 * h;
        let y0 = cell.1 as f64 * self.cell_size + (bucket / nb) as f64 * h;
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                PlanarPoint::new(x0 + h * u, y0 + h * v)
            })
            .collect()
    }

    /// Obstacle centers of one cell; a pure function of `(master_seed, cell)`.
    pub fn obstacles_in_cell(&self, cell: (i64, i64)) -> Vec<PlanarPoint> {
        let nb = self.buckets_per_side as u32;
        (0..nb * nb)
            .flat_map(|b| self.bucket_points(cell, b))
            .collect()
    }

    fn bucket_range(&self, lo: PlanarPoint, hi: PlanarPoint) -> (i64, i64, i64, i64) {
        let h = self.bucket_size();
        let slack = 1e-9;
        (
            ((lo.x - slack) / h).floor() as i64,
            ((hi.x + slack) / h).floor() as i64,
            ((lo.y - slack) / h).floor() as i64,
            ((hi.y + slack) / h).floor() as i64,
        )
    }

    /// Whether `x` lies outside every obstacle.
    pub fn is_admissible_start(&self, x: PlanarPoint) -> bool {
        let eps = self.params.eps;
        if self.params.mu_eff == 0.0 {
            return true;
        }
        let (x0, x1, y0, y1) = self.bucket_range(
            PlanarPoint::new(x.x - eps, x.y - eps),
            PlanarPoint::new(x.x + eps, x.y + eps),
        );
        for gy in y0..=y1 {
            for gx in x0..=x1 {
                let (cell, b) = self.split_bucket(gx, gy);
                if self.bucket_points(cell, b).iter().any(|c| c.distance(x) <= eps) {
                    return false;
                }
            }
        }
        true
    }

    /// A caching view for one trajectory.
    pub fn view(&self) -> FieldView<'_> {
        FieldView {
            field: self,
            buckets: HashMap::new(),
        }
    }
}

/// Lazily populated bucket cache, one per trajectory.
pub struct FieldView<'a> {
    field: &'a ObstacleField,
    buckets: HashMap<((i64, i64), u32), Vec<PlanarPoint>>,
}

impl<'a> FieldView<'a> {
    pub fn field(&self) -> &'a ObstacleField {
        self.field
    }

    fn bucket(&mut self, cell: (i64, i64), bucket: u32) -> &Vec<PlanarPoint> {
        let field = self.field;
        self.buckets
            .entry((cell, bucket))
            .or_insert_with(|| field.bucket_points(cell, bucket))
    }

    pub fn obstacle(&mut self, id: ObstacleId) -> PlanarPoint {
        self.bucket(id.cell, id.bucket)[id.index as usize]
    }

    /// Calls `f` for every obstacle whose bucket overlaps the box `[lo, hi]`.
    pub fn for_each_in_box<F: FnMut(ObstacleId, PlanarPoint)>(
        &mut self,
        lo: PlanarPoint,
        hi: PlanarPoint,
        mut f: F,
    ) {
        let field = self.field;
        if field.params.mu_eff == 0.0 {
            return;
        }
        let (x0, x1, y0, y1) = field.bucket_range(lo, hi);
        for gy in y0..=y1 {
            for gx in x0..=x1 {
                let (cell, bucket) = field.split_bucket(gx, gy);
                for (i, &c) in self.bucket(cell, bucket).iter().enumerate() {
                    f(
                        ObstacleId {
                            cell,
                            bucket,
                            index: i as u32,
                        },
                        c,
                    );
                }
            }
        }
    }

    pub fn cached_buckets(&self) -> usize {
        self.buckets.len()
    }
}

/// Monte Carlo estimate of the probability that the annulus
/// `(R−ε, R+ε)` about `center` holds no obstacle center.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AnnulusEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// `exp(−μ_eff · 4πRε)`.
    pub closed_form: f64,
    pub n_samples: usize,
}

pub fn empty_annulus_probability_mc(
    params: &ScalingParams,
    center: PlanarPoint,
    n_samples: usize,
    seed: u64,
) -> Result<AnnulusEstimate> {
    let r = params.larmor_radius.ok_or(Error::StraightLineRegime)?;
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    let eps = params.eps;
    let (inner, outer) = (r - eps, r + eps);
    let empty = (0..n_samples as u64)
        .into_par_iter()
        .filter(|&i| {
            let field = ObstacleField::new(*params, derive_seed(seed, i));
            let (x0, x1, y0, y1) = field.bucket_range(
                PlanarPoint::new(center.x - outer, center.y - outer),
                PlanarPoint::new(center.x + outer, center.y + outer),
            );
            for gy in y0..=y1 {
                for gx in x0..=x1 {
                    let (cell, b) = field.split_bucket(gx, gy);
                    let hit = field.bucket_points(cell, b).iter().any(|c| {
                        let d = c.distance(center);
                        d > inner && d < outer
                    });
                    if hit {
                        return false;
                    }
                }
            }
            true
        })
        .count();
    let p = empty as f64 / n_samples as f64;
    Ok(AnnulusEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
        closed_form: (-params.mu_eff * 4.0 * PI * r * eps).exp(),
        n_samples,
    })
}
