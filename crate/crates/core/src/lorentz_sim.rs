//! Event-driven dynamics of the test particle among Poisson obstacles.
//!
//! Free flight is exact (Larmor arcs or segments) and collisions are
//! specular. Each flight leg searches the lazily generated field piece by
//! piece along the orbit, so the first obstacle found is the first one hit.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    advance_free, flight_hit, reflect, segment_distance, Disk, LarmorArc, ParticleState,
    PlanarPoint, ScatterData,
};
use crate::medium::{scaling_from, FieldView, ObstacleField, ObstacleId, ScalingParams};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::stats::{binomial, power_law_fit, MeanSe, PowerFit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Fresh,
    SelfRecollision,
    Recollision,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub hit_time: f64,
    /// Collisions are instantaneous, so this equals `hit_time`.
    pub exit_time: f64,
    pub obstacle_id: ObstacleId,
    pub impact_vector: PlanarPoint,
    pub impact_parameter: f64,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Completed,
    /// A full Larmor orbit meets no obstacle; the motion is periodic forever.
    CirclingForever,
    /// A closed self-recollision cycle was detected.
    TrappedDaisy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub final_state: ParticleState,
    pub elapsed: f64,
    pub status: TrajectoryStatus,
    pub events: Vec<CollisionEvent>,
    /// `(t, ξ(t) − ξ(0))` at the requested sample times not after `t_max`.
    pub displacement_samples: Vec<(f64, PlanarPoint)>,
    /// Start of the free orbit when circling.
    pub circling_since: Option<f64>,
    /// Time at which a periodic daisy was detected.
    pub trapped_since: Option<f64>,
    /// Legs passing within `(ε, 2ε]` of an earlier-visited obstacle center
    /// other than the current and the next one.
    pub near_misses: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Events allowed per trajectory before aborting it.
    pub event_cap: usize,
    /// Longest daisy period searched for.
    pub k_max: usize,
    pub daisy_tolerance: f64,
    pub track_near_misses: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            event_cap: 1_000_000,
            k_max: 64,
            daisy_tolerance: 1e-9,
            track_near_misses: true,
        }
    }
}

struct LegHit {
    tau: f64,
    id: ObstacleId,
    normal: PlanarPoint,
}

/// Axis-aligned bounding box of the arc of radius `r` about `c` between
/// phases `p0 < p1`.
fn arc_box(c: PlanarPoint, r: f64, p0: f64, p1: f64) -> (PlanarPoint, PlanarPoint) {
    let a = c + r * PlanarPoint::from_angle(p0);
    let b = c + r * PlanarPoint::from_angle(p1);
    let mut lo = PlanarPoint::new(a.x.min(b.x), a.y.min(b.y));
    let mut hi = PlanarPoint::new(a.x.max(b.x), a.y.max(b.y));
    let quarter = PI / 2.0;
    let mut k = (p0 / quarter).ceil();
    while k * quarter <= p1 {
        let e = c + r * PlanarPoint::from_angle(k * quarter);
        lo = PlanarPoint::new(lo.x.min(e.x), lo.y.min(e.y));
        hi = PlanarPoint::new(hi.x.max(e.x), hi.y.max(e.y));
        k += 1.0;
    }
    (lo, hi)
}

/// Updates `best` with hits, within `upto`, on obstacles near the box.
fn scan_box(
    view: &mut FieldView<'_>,
    state: &ParticleState,
    lo: PlanarPoint,
    hi: PlanarPoint,
    upto: f64,
    best: &mut Option<LegHit>,
) {
    let params = view.field().params;
    let (eps, b) = (params.eps, params.b_field);
    let lo = PlanarPoint::new(lo.x - eps, lo.y - eps);
    let hi = PlanarPoint::new(hi.x + eps, hi.y + eps);
    view.for_each_in_box(lo, hi, |id, center| {
        let disk = Disk { center, radius: eps };
        if let Some(h) = flight_hit(state, b, &disk, upto) {
            if best.as_ref().map_or(true, |x| h.time < x.tau) {
                *best = Some(LegHit {
                    tau: h.time,
                    id,
                    normal: h.normal,
                });
            }
        }
    });
}

/// First obstacle hit within `horizon` (at most one revolution for B > 0).
fn next_hit(view: &mut FieldView<'_>, state: &ParticleState, horizon: f64) -> Option<LegHit> {
    let field = view.field();
    let b = field.params.b_field;
    let piece = field.bucket_size();
    let mut best: Option<LegHit> = None;
    let mut consider = |view: &mut FieldView<'_>, lo: PlanarPoint, hi: PlanarPoint, upto: f64| {
        scan_box(view, state, lo, hi, upto, &mut best);
        best.is_some()
    };
    if b > 0.0 {
        let r = 1.0 / b;
        let center = state.position + r * state.velocity().perp();
        let phase0 = state.velocity_angle - PI / 2.0;
        let total = (b * horizon).min(TAU);
        let step = (piece / r).min(PI / 4.0);
        let mut a = 0.0;
        while a < total {
            let e = (a + step).min(total);
            let (lo, hi) = arc_box(center, r, phase0 + a, phase0 + e);
            let upto = if e >= total { horizon.min(TAU / b) } else { e / b };
            if consider(view, lo, hi, upto) {
                break;
            }
            a = e;
        }
    } else {
        let v = state.velocity();
        let mut a = 0.0;
        while a < horizon {
            let e = (a + piece).min(horizon);
            let p = state.position + a * v;
            let q = state.position + e * v;
            let lo = PlanarPoint::new(p.x.min(q.x), p.y.min(q.y));
            let hi = PlanarPoint::new(p.x.max(q.x), p.y.max(q.y));
            if consider(view, lo, hi, e) {
                break;
            }
            a = e;
        }
    }
    best
}

fn leg_distance(state: &ParticleState, b: f64, duration: f64, p: PlanarPoint) -> f64 {
    if b > 0.0 {
        match LarmorArc::from_flight(state, b, duration) {
            Ok(arc) => arc.distance_to(p),
            Err(_) => f64::INFINITY,
        }
    } else {
        segment_distance(state.position, state.position + duration * state.velocity(), p)
    }
}

fn nearest_obstacle_distance(field: &ObstacleField, x: PlanarPoint) -> f64 {
    let eps = field.params.eps;
    let mut view = field.view();
    let mut d = f64::INFINITY;
    view.for_each_in_box(
        PlanarPoint::new(x.x - eps, x.y - eps),
        PlanarPoint::new(x.x + eps, x.y + eps),
        |_, c| d = d.min(c.distance(x)),
    );
    d
}

pub fn simulate_trajectory(
    field: &ObstacleField,
    start: ParticleState,
    t_max: f64,
    sample_times: &[f64],
) -> Result<TrajectoryOutcome> {
    simulate_trajectory_with(field, start, t_max, sample_times, &SimConfig::default())
}

pub fn simulate_trajectory_with(
    field: &ObstacleField,
    start: ParticleState,
    t_max: f64,
    sample_times: &[f64],
    config: &SimConfig,
) -> Result<TrajectoryOutcome> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", format!("must be positive and finite, got {t_max}")));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("sample_times", "must be non-decreasing"));
    }
    if !field.is_admissible_start(start.position) {
        return Err(Error::StartInsideObstacle {
            distance: nearest_obstacle_distance(field, start.position),
            radius: field.params.eps,
        });
    }
    let b = field.params.b_field;
    let eps = field.params.eps;
    let origin = start.position;
    let mut view = field.view();
    let mut state = start;
    let mut t = 0.0;
    let mut events: Vec<CollisionEvent> = Vec::new();
    let mut visited: HashSet<ObstacleId> = HashSet::new();
    let mut visited_list: Vec<(ObstacleId, PlanarPoint)> = Vec::new();
    let mut samples = Vec::new();
    let mut next_sample = sample_times.partition_point(|&s| s < 0.0);
    let mut status = TrajectoryStatus::Completed;
    let mut circling_since = None;
    let mut trapped_since = None;
    let mut near_misses = 0;
    // impact data of the current run of self-recollisions
    let mut run: Vec<(PlanarPoint, f64)> = Vec::new();

    loop {
        if events.len() >= config.event_cap {
            return Err(Error::EventCapExceeded {
                cap: config.event_cap,
                time: t,
            });
        }
        let remaining = t_max - t;
        let horizon = if b > 0.0 { TAU / b } else { remaining };
        let hit = next_hit(&mut view, &state, horizon);
        let leg = match &hit {
            Some(h) if h.tau <= remaining => h.tau,
            _ => remaining,
        };
        while next_sample < sample_times.len() && sample_times[next_sample] <= t + leg {
            let s = sample_times[next_sample];
            let p = advance_free(&state, b, s - t).position;
            samples.push((s, p - origin));
            next_sample += 1;
        }
        if config.track_near_misses && !visited_list.is_empty() {
            let current = events.last().map(|e| e.obstacle_id);
            let upcoming = hit.as_ref().filter(|h| h.tau <= remaining).map(|h| h.id);
            let missed = visited_list.iter().any(|(id, c)| {
                if Some(*id) == current || Some(*id) == upcoming {
                    return false;
                }
                let d = leg_distance(&state, b, leg, *c);
                d > eps && d <= 2.0 * eps
            });
            if missed {
                near_misses += 1;
            }
        }
        match hit {
            Some(h) if h.tau <= remaining => {
                let pre = advance_free(&state, b, h.tau);
                let hit_time = t + h.tau;
                let scatter = ScatterData::from_impact(pre.velocity_angle, h.normal, eps);
                let previous = events.last().map(|e| e.obstacle_id);
                let kind = if previous == Some(h.id) {
                    EventKind::SelfRecollision
                } else if visited.contains(&h.id) {
                    EventKind::Recollision
                } else {
                    EventKind::Fresh
                };
                events.push(CollisionEvent {
                    hit_time,
                    exit_time: hit_time,
                    obstacle_id: h.id,
                    impact_vector: h.normal,
                    impact_parameter: scatter.impact_parameter,
                    kind,
                });
                if visited.insert(h.id) {
                    visited_list.push((h.id, view.obstacle(h.id)));
                }
                if kind == EventKind::SelfRecollision {
                    run.push((h.normal, scatter.impact_parameter));
                    if trapped_since.is_none() && closes_cycle(&run, config) {
                        status = TrajectoryStatus::TrappedDaisy;
                        trapped_since = Some(hit_time);
                    }
                } else {
                    run.clear();
                    run.push((h.normal, scatter.impact_parameter));
                }
                state = ParticleState::new(pre.position, reflect(pre.velocity_angle, h.normal));
                t = hit_time;
            }
            None if b > 0.0 => {
                status = TrajectoryStatus::CirclingForever;
                circling_since = Some(t);
                state = advance_free(&state, b, remaining);
                t = t_max;
                break;
            }
            _ => {
                state = advance_free(&state, b, remaining);
                t = t_max;
                break;
            }
        }
    }
    Ok(TrajectoryOutcome {
        final_state: state,
        elapsed: t,
        status,
        events,
        displacement_samples: samples,
        circling_since,
        trapped_since,
        near_misses,
    })
}

/// Whether the last impact repeats one of the previous `k_max` impacts of
/// the current self-recollision run.
fn closes_cycle(run: &[(PlanarPoint, f64)], config: &SimConfig) -> bool {
    let last = run.len() - 1;
    let (n, b) = run[last];
    (1..=config.k_max.min(last)).any(|m| {
        let (n0, b0) = run[last - m];
        (n - n0).norm() < config.daisy_tolerance && (b - b0).abs() < config.daisy_tolerance
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub fresh: usize,
    pub self_recollisions: usize,
    pub recollisions: usize,
    /// Longest run of consecutive hits on one obstacle.
    pub daisy_leaf_max: usize,
}

/// Recounts event kinds from the obstacle sequence alone.
pub fn classify_events(events: &[CollisionEvent]) -> EventCounts {
    let mut counts = EventCounts::default();
    let mut seen = HashSet::new();
    let mut run = 0;
    for (i, e) in events.iter().enumerate() {
        let id = e.obstacle_id;
        if i > 0 && events[i - 1].obstacle_id == id {
            counts.self_recollisions += 1;
            run += 1;
        } else {
            if seen.contains(&id) {
                counts.recollisions += 1;
            } else {
                counts.fresh += 1;
            }
            run = 1;
        }
        seen.insert(id);
        counts.daisy_leaf_max = counts.daisy_leaf_max.max(run);
    }
    counts
}

/// Uniform admissible start in the unit square with a uniform direction.
fn random_start(field: &ObstacleField, seed: u64) -> ParticleState {
    let mut rng = rng_from_seed(seed);
    loop {
        let p = PlanarPoint::new(rng.random(), rng.random());
        let angle = TAU * rng.random::<f64>();
        if field.is_admissible_start(p) {
            return ParticleState::new(p, angle);
        }
    }
}

fn replica(params: &ScalingParams, seed: u64, index: u64) -> (ObstacleField, ParticleState) {
    let field = ObstacleField::new(*params, derive_seed(seed, 2 * index));
    let start = random_start(&field, derive_seed(seed, 2 * index + 1));
    (field, start)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsdRow {
    pub t: f64,
    pub msd: f64,
    pub msd_se: f64,
    pub circling_frac: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsdTable {
    pub rows: Vec<MsdRow>,
    pub replicas_used: usize,
    /// Replicas dropped after exceeding the event cap.
    pub replicas_aborted: usize,
    pub trapped_fraction: f64,
}

/// Mean squared displacement over independent fields and starts.
pub fn msd_estimate(
    params: &ScalingParams,
    n_replicas: usize,
    time_grid: &[f64],
    seed: u64,
) -> Result<MsdTable> {
    if n_replicas == 0 {
        return Err(invalid("n_replicas", "must be at least 1"));
    }
    if time_grid.is_empty() || time_grid.windows(2).any(|w| w[1] <= w[0]) || time_grid[0] < 0.0 {
        return Err(invalid("time_grid", "must be non-empty, non-negative and increasing"));
    }
    let t_max = *time_grid.last().unwrap();
    let t_max = if t_max > 0.0 { t_max } else { 1.0 };
    let config = SimConfig {
        track_near_misses: false,
        ..SimConfig::default()
    };
    let outcomes: Vec<Option<TrajectoryOutcome>> = (0..n_replicas as u64)
        .into_par_iter()
        .map(|i| {
            let (field, start) = replica(params, seed, i);
            match simulate_trajectory_with(&field, start, t_max, time_grid, &config) {
                Ok(o) => Ok(Some(o)),
                Err(Error::EventCapExceeded { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let used: Vec<&TrajectoryOutcome> = outcomes.iter().flatten().collect();
    let n = used.len();
    let rows = time_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let sq: Vec<f64> = used
                .iter()
                .map(|o| o.displacement_samples[k].1.norm_sq())
                .collect();
            let m = crate::stats::mean_and_se(&sq);
            let circling = used
                .iter()
                .filter(|o| o.circling_since.is_some_and(|s| s <= t))
                .count();
            MsdRow {
                t,
                msd: m.mean,
                msd_se: m.std_error,
                circling_frac: circling as f64 / n.max(1) as f64,
            }
        })
        .collect();
    let trapped = used
        .iter()
        .filter(|o| o.status == TrajectoryStatus::TrappedDaisy)
        .count();
    Ok(MsdTable {
        rows,
        replicas_used: n,
        replicas_aborted: n_replicas - n,
        trapped_fraction: trapped as f64 / n.max(1) as f64,
    })
}

/// How `η` is chosen for each `ε` of a scaling study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EtaRule {
    Fixed(f64),
    /// `η = coeff · ε^{−exponent}`.
    Power { coeff: f64, exponent: f64 },
}

impl EtaRule {
    pub fn eta(&self, eps: f64) -> f64 {
        match *self {
            EtaRule::Fixed(eta) => eta,
            EtaRule::Power { coeff, exponent } => coeff * eps.powf(-exponent),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRateRow {
    pub eps: f64,
    pub eta: f64,
    pub recollision: MeanSe,
    pub interference: MeanSe,
    pub daisy: MeanSe,
    pub circling: MeanSe,
    /// `e^{−4πRεμ_eff}`, or `None` at zero field.
    pub circling_closed_form: Option<f64>,
    pub replicas_aborted: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventRateStudy {
    pub rows: Vec<EventRateRow>,
    pub recollision_fit: Option<PowerFit>,
    pub interference_fit: Option<PowerFit>,
    pub daisy_fit: Option<PowerFit>,
}

/// Empirical probabilities of recollision, near-miss interference,
/// periodic-daisy trapping and circling up to time `t`, for each `ε`.
pub fn event_rate_study(
    eps_list: &[f64],
    eta_rule: &EtaRule,
    mu: f64,
    b_field: f64,
    t: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<EventRateStudy> {
    if eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(invalid("eps_list", "all values must lie in (0, 1)"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("eps_list", "must be strictly decreasing"));
    }
    if n_replicas == 0 {
        return Err(invalid("n_replicas", "must be at least 1"));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for (j, &eps) in eps_list.iter().enumerate() {
        let eta = eta_rule.eta(eps);
        let params = scaling_from(eps, mu, eta, b_field)?;
        let seed_j = derive_seed(seed, j as u64);
        let flags: Vec<Option<[bool; 4]>> = (0..n_replicas as u64)
            .into_par_iter()
            .map(|i| {
                let (field, start) = replica(&params, seed_j, i);
                match simulate_trajectory(&field, start, t, &[]) {
                    Ok(o) => Ok(Some([
                        o.events.iter().any(|e| e.kind == EventKind::Recollision),
                        o.near_misses > 0,
                        o.status == TrajectoryStatus::TrappedDaisy,
                        o.status == TrajectoryStatus::CirclingForever && o.events.is_empty(),
                    ])),
                    Err(Error::EventCapExceeded { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let used: Vec<[bool; 4]> = flags.iter().flatten().copied().collect();
        let n = used.len();
        let count = |k: usize| used.iter().filter(|f| f[k]).count();
        rows.push(EventRateRow {
            eps,
            eta,
            recollision: binomial(count(0), n),
            interference: binomial(count(1), n),
            daisy: binomial(count(2), n),
            circling: binomial(count(3), n),
            circling_closed_form: params.circling_probability(),
            replicas_aborted: n_replicas - n,
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let fit = |f: fn(&EventRateRow) -> f64| {
        let y: Vec<f64> = rows.iter().map(f).collect();
        power_law_fit(&eps, &y)
    };
    Ok(EventRateStudy {
        recollision_fit: fit(|r| r.recollision.mean),
        interference_fit: fit(|r| r.interference.mean),
        daisy_fit: fit(|r| r.daisy.mean),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(cell: i64, t: f64) -> CollisionEvent {
        CollisionEvent {
            hit_time: t,
            exit_time: t,
            obstacle_id: ObstacleId {
                cell: (cell, 0),
                bucket: 0,
                index: 0,
            },
            impact_vector: PlanarPoint::new(1.0, 0.0),
            impact_parameter: 0.0,
            kind: EventKind::Fresh,
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_events(&[]), EventCounts::default());
        let c = classify_events(&[event(1, 1.0), event(1, 2.0), event(1, 3.0)]);
        assert_eq!((c.fresh, c.self_recollisions, c.daisy_leaf_max), (1, 2, 3));
        let c = classify_events(&[event(1, 1.0), event(2, 2.0), event(1, 3.0)]);
        assert_eq!((c.fresh, c.recollisions, c.self_recollisions), (2, 1, 0));
    }

    #[test]
    fn free_circling_orbit() {
        let p = ScalingParams::obstacle_free(0.01, 2.0).unwrap();
        let f = ObstacleField::new(p, 0);
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.37).collect();
        let o = simulate_trajectory(&f, ParticleState::new(PlanarPoint::ORIGIN, 1.0), 20.0, &times)
            .unwrap();
        assert_eq!(o.status, TrajectoryStatus::CirclingForever);
        assert!(o.events.is_empty());
        assert_eq!(o.displacement_samples.len(), 50);
        for (_, d) in &o.displacement_samples {
            assert!(d.norm() <= 2.0 * 0.5 + 1e-12);
        }
    }

    #[test]
    fn free_straight_flight() {
        let p = ScalingParams::obstacle_free(0.01, 0.0).unwrap();
        let f = ObstacleField::new(p, 0);
        let s = ParticleState::new(PlanarPoint::new(0.2, 0.3), 0.4);
        let o = simulate_trajectory(&f, s, 10.0, &[0.0, 1.0, 5.0, 12.0]).unwrap();
        assert_eq!(o.status, TrajectoryStatus::Completed);
        assert_eq!(o.displacement_samples.len(), 3);
        for &(t, d) in &o.displacement_samples {
            assert!((d - t * s.velocity()).norm() < 1e-12);
        }
    }

    #[test]
    fn events_are_consistent() {
        let p = scaling_from(0.01, 1.0, 1.0, 1.0).unwrap();
        let f = ObstacleField::new(p, 11);
        let start = random_start(&f, 3);
        let o = simulate_trajectory(&f, start, 30.0, &[]).unwrap();
        assert!(o.events.len() > 10);
        for w in o.events.windows(2) {
            assert!(w[1].hit_time > w[0].hit_time);
            assert!(w[0].exit_time <= w[1].hit_time);
        }
        for e in &o.events {
            assert!((e.impact_vector.norm() - 1.0).abs() < 1e-12);
            assert!(e.impact_parameter.abs() <= p.eps);
        }
        let counts = classify_events(&o.events);
        let own = o.events.iter().filter(|e| e.kind == EventKind::Recollision).count();
        assert_eq!(counts.recollisions, own);
    }

    #[test]
    fn start_inside_rejected() {
        let p = scaling_from(0.01, 1.0, 1.0, 1.0).unwrap();
        let f = ObstacleField::new(p, 11);
        let c = f.obstacles_in_cell((0, 0))[0];
        let r = simulate_trajectory(&f, ParticleState::new(c, 0.0), 1.0, &[]);
        assert!(matches!(r, Err(Error::StartInsideObstacle { .. })));
    }

    #[test]
    fn arc_boxes_contain_arc() {
        let c = PlanarPoint::new(0.3, -0.2);
        for (p0, p1) in [(0.1, 0.5), (-0.3, 1.9), (2.0, 5.5), (5.0, 7.0)] {
            let (lo, hi) = arc_box(c, 0.7, p0, p1);
            for i in 0..=100 {
                let q = c + 0.7 * PlanarPoint::from_angle(p0 + (p1 - p0) * i as f64 / 100.0);
                assert!(q.x >= lo.x - 1e-12 && q.x <= hi.x + 1e-12);
                assert!(q.y >= lo.y - 1e-12 && q.y <= hi.y + 1e-12);
            }
        }
    }
}
