//! Planar kinematics of a unit-speed charge in a perpendicular magnetic field.
//!
//! Between collisions the particle moves counterclockwise on a Larmor circle
//! of radius `1/|B|` at angular rate `|B|`; at `|B| = 0` it moves on straight
//! lines, handled by a separate code path. Obstacles are hard disks and
//! collisions are specular reflections.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Impacts with `|v·n|` below this are treated as grazing and ignored.
pub const GRAZING_TOLERANCE: f64 = 1e-10;

/// Hits closer than this (in time) to the start of a flight are ignored, so
/// that the contact point of the previous reflection is not detected again.
pub const DEPARTURE_GUARD: f64 = 1e-9;

/// Relative slack when checking that a flight starts outside a disk.
const OUTSIDE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const ORIGIN: PlanarPoint = PlanarPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Self {
        Self {
            x: -self.y,
            y: self.x,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for PlanarPoint {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for PlanarPoint {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for PlanarPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl Mul<PlanarPoint> for f64 {
    type Output = PlanarPoint;
    fn mul(self, rhs: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self * rhs.x, self * rhs.y)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_signed(angle: f64) -> f64 {
    let a = normalize_angle(angle);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Position and direction of a unit-speed particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: PlanarPoint,
    /// Direction of motion in `[0, 2π)`.
    pub velocity_angle: f64,
}

impl ParticleState {
    pub fn new(position: PlanarPoint, velocity_angle: f64) -> Self {
        Self {
            position,
            velocity_angle: normalize_angle(velocity_angle),
        }
    }

    pub fn velocity(&self) -> PlanarPoint {
        PlanarPoint::from_angle(self.velocity_angle)
    }
}

/// Counterclockwise piece of a Larmor circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LarmorArc {
    pub center: PlanarPoint,
    pub radius: f64,
    /// Phase of the starting point as seen from `center`.
    pub start_phase: f64,
    /// Swept angle, counterclockwise.
    pub swept: f64,
}

impl LarmorArc {
    /// Arc traced by `state` during a flight of duration `tau` at field `b_field > 0`.
    pub fn from_flight(state: &ParticleState, b_field: f64, tau: f64) -> Result<Self> {
        let center = larmor_center(state, b_field)?;
        Ok(Self {
            center,
            radius: 1.0 / b_field,
            start_phase: state.velocity_angle - PI / 2.0,
            swept: b_field * tau,
        })
    }

    pub fn point_at(&self, swept: f64) -> PlanarPoint {
        self.center + self.radius * PlanarPoint::from_angle(self.start_phase + swept)
    }

    /// Smallest distance between the arc and `p`.
    pub fn distance_to(&self, p: PlanarPoint) -> f64 {
        let rel = p - self.center;
        let offset = normalize_angle(rel.angle() - self.start_phase);
        if self.swept >= TAU || offset <= self.swept {
            (rel.norm() - self.radius).abs()
        } else {
            p.distance(self.point_at(0.0))
                .min(p.distance(self.point_at(self.swept)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: PlanarPoint,
    pub radius: f64,
}

/// Geometric description of one impact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterData {
    /// Outward unit normal at the impact point.
    pub impact_vector: PlanarPoint,
    /// Signed impact parameter in `[-ε, ε]`.
    pub impact_parameter: f64,
    /// Angle between `n` and `-v`, in `[-π/2, π/2]`.
    pub incidence: f64,
    /// Signed deflection: post-collision angle minus pre-collision angle.
    pub deflection: f64,
}

impl ScatterData {
    /// Impact data for incoming direction `velocity_angle` hitting a disk of
    /// radius `radius` with outward normal `n`.
    ///
    /// The signed impact parameter is `ε (v × n)`; with this sign the
    /// reflected direction is `velocity_angle + deflection_from_impact(b/ε)`.
    pub fn from_impact(velocity_angle: f64, n: PlanarPoint, radius: f64) -> Self {
        let v = PlanarPoint::from_angle(velocity_angle);
        let b_norm = v.cross(n).clamp(-1.0, 1.0);
        let deflection = signed_deflection(b_norm);
        Self {
            impact_vector: n,
            impact_parameter: radius * b_norm,
            incidence: -b_norm.asin(),
            deflection,
        }
    }
}

/// Center of the Larmor circle, 90° counterclockwise from the velocity.
pub fn larmor_center(state: &ParticleState, b_field: f64) -> Result<PlanarPoint> {
    if b_field == 0.0 {
        return Err(Error::StraightLineRegime);
    }
    if !(b_field > 0.0) || !b_field.is_finite() {
        return Err(Error::Domain(format!("field magnitude {b_field} must be positive")));
    }
    let radius = 1.0 / b_field;
    Ok(state.position + radius * state.velocity().perp())
}

/// Free flight for a duration `tau` (arc length `tau`).
pub fn advance_free(state: &ParticleState, b_field: f64, tau: f64) -> ParticleState {
    if b_field == 0.0 {
        return ParticleState::new(state.position + tau * state.velocity(), state.velocity_angle);
    }
    let radius = 1.0 / b_field;
    let center = state.position + radius * state.velocity().perp();
    let turn = b_field * tau;
    let (s, c) = turn.sin_cos();
    let rel = state.position - center;
    let rotated = PlanarPoint::new(c * rel.x - s * rel.y, s * rel.x + c * rel.y);
    ParticleState::new(center + rotated, state.velocity_angle + turn)
}

/// A detected impact: flight time and outward normal at the impact point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub time: f64,
    pub normal: PlanarPoint,
}

/// Earliest time in `(0, horizon]` at which the flight from `state` meets
/// the boundary of `disk` moving inwards.
///
/// For `b_field > 0` at most one revolution is searched. Grazing contacts
/// (`|v·n| < GRAZING_TOLERANCE`) and contacts earlier than
/// `DEPARTURE_GUARD` are not reported.
pub fn first_arc_disk_hit(
    state: &ParticleState,
    b_field: f64,
    disk: &Disk,
    horizon: f64,
) -> Result<Option<Hit>> {
    let distance = state.position.distance(disk.center);
    if distance < disk.radius * (1.0 - OUTSIDE_SLACK) {
        return Err(Error::StartInsideObstacle {
            distance,
            radius: disk.radius,
        });
    }
    if !(horizon > 0.0) {
        return Ok(None);
    }
    Ok(flight_hit(state, b_field, disk, horizon))
}

/// [`first_arc_disk_hit`] without the start-point check.
pub(crate) fn flight_hit(state: &ParticleState, b_field: f64, disk: &Disk, horizon: f64) -> Option<Hit> {
    if b_field == 0.0 {
        segment_hit(state, disk, horizon)
    } else {
        arc_hit(state, b_field, disk, horizon)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(a: PlanarPoint, b: PlanarPoint, p: PlanarPoint) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + s * ab)
}

fn segment_hit(state: &ParticleState, disk: &Disk, horizon: f64) -> Option<Hit> {
    let v = state.velocity();
    let d = state.position - disk.center;
    let half_b = d.dot(v);
    let c = d.norm_sq() - disk.radius * disk.radius;
    let disc = half_b * half_b - c;
    if disc <= 0.0 {
        return None;
    }
    let root = disc.sqrt();
    // entry root; the stable form avoids cancellation when -half_b ~ root
    let tau = if half_b < 0.0 { c / (-half_b + root) } else { -half_b - root };
    if !(tau >= DEPARTURE_GUARD && tau <= horizon) {
        return None;
    }
    let point = state.position + tau * v;
    let normal = unit(point - disk.center);
    if v.dot(normal) > -GRAZING_TOLERANCE {
        return None;
    }
    Some(Hit { time: tau, normal })
}

fn arc_hit(state: &ParticleState, b_field: f64, disk: &Disk, horizon: f64) -> Option<Hit> {
    let radius = 1.0 / b_field;
    let center = state.position + radius * state.velocity().perp();
    let start_phase = state.velocity_angle - PI / 2.0;

    let crossings = circle_crossings(center, radius, disk.center, disk.radius)?;
    let max_turn = (b_field * horizon).min(TAU);
    let mut best: Option<Hit> = None;
    for phase in crossings {
        let turn = normalize_angle(phase - start_phase);
        let tau = turn / b_field;
        if tau < DEPARTURE_GUARD || turn > max_turn {
            continue;
        }
        let point = center + radius * PlanarPoint::from_angle(phase);
        let v = PlanarPoint::from_angle(phase + PI / 2.0);
        let normal = unit(point - disk.center);
        if v.dot(normal) > -GRAZING_TOLERANCE {
            continue;
        }
        if best.map_or(true, |h| tau < h.time) {
            best = Some(Hit { time: tau, normal });
        }
    }
    best
}

fn unit(p: PlanarPoint) -> PlanarPoint {
    (1.0 / p.norm()) * p
}

/// Phases (seen from `c1`) of the intersection points of two circles.
fn circle_crossings(c1: PlanarPoint, r1: f64, c2: PlanarPoint, r2: f64) -> Option<[f64; 2]> {
    let delta = c2 - c1;
    let d = delta.norm();
    if d == 0.0 || d > r1 + r2 || d < (r1 - r2).abs() {
        return None;
    }
    // projection of the chord midpoint onto the center line, from c1
    let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let half_width = h.atan2(a);
    let axis = delta.angle();
    Some([axis - half_width, axis + half_width])
}

/// Reflects direction `velocity_angle` off a surface with unit normal `n`.
pub fn reflect(velocity_angle: f64, n: PlanarPoint) -> f64 {
    let v = PlanarPoint::from_angle(velocity_angle);
    let reflected = v - (2.0 * v.dot(n)) * n;
    normalize_angle(reflected.angle())
}

fn signed_deflection(b_norm: f64) -> f64 {
    let magnitude = PI - 2.0 * b_norm.abs().asin();
    if b_norm < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Signed deflection `sign(b)(π − 2 arcsin|b|)` for a normalized impact
/// parameter; `b = 0` gives the head-on value `π`.
pub fn deflection_from_impact(b_norm: f64) -> Result<f64> {
    if !(b_norm.abs() <= 1.0) {
        return Err(Error::Domain(format!("impact parameter {b_norm} outside [-1, 1]")));
    }
    Ok(signed_deflection(b_norm))
}

/// Half-angle `β` subtended at the obstacle center by the two impact points of
/// a self-recollision, for Larmor-center distance `delta`.
pub fn self_recollision_angle(delta: f64, larmor_radius: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && larmor_radius > eps) {
        return Err(Error::Domain(format!(
            "need R > eps > 0, got R = {larmor_radius}, eps = {eps}"
        )));
    }
    let lo = larmor_radius - eps;
    let hi = larmor_radius + eps;
    if !(delta >= lo && delta <= hi) {
        return Err(Error::Domain(format!(
            "center distance {delta} outside [{lo}, {hi}]"
        )));
    }
    let cos_beta = ((delta - larmor_radius) * (delta + larmor_radius) + eps * eps) / (2.0 * delta * eps);
    Ok(cos_beta.clamp(-1.0, 1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn close_pt(a: PlanarPoint, b: PlanarPoint, tol: f64) -> bool {
        close(a.x, b.x, tol) && close(a.y, b.y, tol)
    }

    #[test]
    fn larmor_center_examples() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        assert!(close_pt(larmor_center(&s, 1.0).unwrap(), PlanarPoint::new(0.0, 1.0), 1e-15));
        let s = ParticleState::new(PlanarPoint::ORIGIN, PI / 2.0);
        assert!(close_pt(larmor_center(&s, 2.0).unwrap(), PlanarPoint::new(-0.5, 0.0), 1e-15));
        assert!(matches!(larmor_center(&s, 0.0), Err(Error::StraightLineRegime)));
    }

    #[test]
    fn advance_free_examples() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        let half = advance_free(&s, 1.0, PI);
        assert!(close_pt(half.position, PlanarPoint::new(0.0, 2.0), 1e-14));
        assert!(close(half.velocity_angle, PI, 1e-14));

        let s = ParticleState::new(PlanarPoint::new(0.3, -1.2), 2.0);
        let full = advance_free(&s, 0.7, TAU / 0.7);
        assert!(close_pt(full.position, s.position, 1e-12));
        assert!(close(wrap_signed(full.velocity_angle - s.velocity_angle), 0.0, 1e-12));

        let straight = advance_free(&ParticleState::new(PlanarPoint::ORIGIN, 0.0), 0.0, 3.0);
        assert_eq!(straight.position, PlanarPoint::new(3.0, 0.0));
        assert_eq!(straight.velocity_angle, 0.0);
    }

    #[test]
    fn straight_head_on_hit() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        let disk = Disk { center: PlanarPoint::new(5.0, 0.0), radius: 0.1 };
        let hit = first_arc_disk_hit(&s, 0.0, &disk, 10.0).unwrap().unwrap();
        assert!(close(hit.time, 4.9, 1e-14));
        assert!(close_pt(hit.normal, PlanarPoint::new(-1.0, 0.0), 1e-14));
        assert!(first_arc_disk_hit(&s, 0.0, &disk, 4.0).unwrap().is_none());
    }

    #[test]
    fn arc_out_of_reach() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        let disk = Disk { center: PlanarPoint::new(10.0, 10.0), radius: 0.1 };
        assert!(first_arc_disk_hit(&s, 1.0, &disk, 100.0).unwrap().is_none());
    }

    #[test]
    fn arc_hit_top_of_orbit() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        let disk = Disk { center: PlanarPoint::new(0.0, 2.0), radius: 0.1 };
        let hit = first_arc_disk_hit(&s, 1.0, &disk, 10.0).unwrap().unwrap();
        let at = advance_free(&s, 1.0, hit.time);
        assert!(close(at.position.distance(disk.center), 0.1, 1e-12));
        // the orbit reaches (0, 2) at tau = π; entry happens slightly before
        assert!(hit.time < PI && hit.time > PI - 0.2);
    }

    #[test]
    fn start_inside_is_rejected() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        let disk = Disk { center: PlanarPoint::new(0.05, 0.0), radius: 0.1 };
        assert!(matches!(
            first_arc_disk_hit(&s, 1.0, &disk, 1.0),
            Err(Error::StartInsideObstacle { .. })
        ));
    }

    #[test]
    fn tangential_flight_is_not_a_hit() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        let disk = Disk { center: PlanarPoint::new(5.0, 0.1), radius: 0.1 };
        assert!(first_arc_disk_hit(&s, 0.0, &disk, 10.0).unwrap().is_none());
    }

    #[test]
    fn departure_after_reflection_finds_the_other_crossing() {
        // particle just reflected off a disk; next contact with it must be
        // the second crossing of the new orbit, not the contact point
        let disk = Disk { center: PlanarPoint::ORIGIN, radius: 0.1 };
        let n = PlanarPoint::from_angle(0.3);
        let contact = disk.center + disk.radius * n;
        let incoming = PI + 0.3 + 0.4;
        let out = reflect(incoming, n);
        let s = ParticleState::new(contact, out);
        let hit = first_arc_disk_hit(&s, 1.0, &disk, 100.0).unwrap().unwrap();
        assert!(hit.time > 1.0);
        let at = advance_free(&s, 1.0, hit.time);
        assert!(close(at.position.distance(disk.center), 0.1, 1e-12));
    }

    #[test]
    fn reflect_examples() {
        let n = PlanarPoint::new(-1.0, 0.0);
        assert!(close(reflect(0.0, n), PI, 1e-15));
        let n = PlanarPoint::new(0.0, 1.0);
        assert!(close(reflect(0.0, n), 0.0, 1e-15));
        let h = 2f64.sqrt() / 2.0;
        let out = reflect(0.0, PlanarPoint::new(-h, h));
        assert!(close(out, PI / 2.0, 1e-15));
    }

    #[test]
    fn deflection_examples() {
        assert_eq!(deflection_from_impact(0.0).unwrap(), PI);
        assert!(close(deflection_from_impact(1.0).unwrap(), 0.0, 1e-15));
        assert!(close(deflection_from_impact(-1.0).unwrap(), 0.0, 1e-15));
        let h = 2f64.sqrt() / 2.0;
        let th = deflection_from_impact(h).unwrap();
        assert!(close(th, PI / 2.0, 1e-15));
        assert!(close(th.cos(), 0.0, 1e-15));
        assert!(deflection_from_impact(1.5).is_err());
    }

    #[test]
    fn scatter_data_matches_reflection() {
        for k in 0..50 {
            let phi = -1.5 + 3.0 * k as f64 / 49.0;
            let alpha = 0.7;
            // n makes angle phi with -v
            let n = PlanarPoint::from_angle(alpha + PI + phi);
            let data = ScatterData::from_impact(alpha, n, 0.01);
            let out = reflect(alpha, n);
            assert!(close(wrap_signed(out - alpha - data.deflection), 0.0, 1e-12));
            assert!(close(data.impact_parameter.abs(), 0.01 * phi.sin().abs(), 1e-14));
            assert!(close(data.deflection.abs(), PI - 2.0 * data.incidence.abs(), 1e-12));
        }
    }

    #[test]
    fn self_recollision_examples() {
        assert!(close(self_recollision_angle(1.1, 1.0, 0.1).unwrap(), 0.0, 1e-7));
        assert!(close(self_recollision_angle(0.9, 1.0, 0.1).unwrap(), PI, 1e-7));
        assert!(self_recollision_angle(1.2, 1.0, 0.1).is_err());
        assert!(self_recollision_angle(1.0, 0.1, 0.2).is_err());
    }

    #[test]
    fn self_recollision_matches_circle_intersection() {
        // oracle: intersect the Larmor circle and the obstacle circle directly
        let (r, eps, delta) = (1.0, 0.1, 1.0);
        let beta = self_recollision_angle(delta, r, eps).unwrap();
        assert!(close(beta, 0.05f64.acos(), 1e-15));
        let larmor = PlanarPoint::new(delta, 0.0);
        let crossings = circle_crossings(PlanarPoint::ORIGIN, eps, larmor, r).unwrap();
        let opening = wrap_signed(crossings[1] - crossings[0]).abs();
        assert!(close(opening, 2.0 * beta, 1e-12));
    }

    #[test]
    fn arc_distance() {
        let s = ParticleState::new(PlanarPoint::ORIGIN, 0.0);
        let arc = LarmorArc::from_flight(&s, 1.0, PI / 2.0).unwrap();
        // top of the circle is not on the quarter arc
        let top = PlanarPoint::new(0.0, 2.0);
        assert!(close(arc.distance_to(top), top.distance(arc.point_at(PI / 2.0)), 1e-14));
        let on_arc = PlanarPoint::new(1.5f64.sin() * 1.1, 1.0 - 1.5f64.cos() * 1.1);
        assert!(close(arc.distance_to(on_arc), 0.1, 1e-12));
    }
}
