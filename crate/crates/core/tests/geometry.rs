use std::f64::consts::{PI, TAU};

use maglorentz::geometry::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Position after flight time `t`, computed directly from the orbit.
fn position(state: &ParticleState, b: f64, t: f64) -> PlanarPoint {
    if b == 0.0 {
        return state.position + t * state.velocity();
    }
    let r = 1.0 / b;
    let center = state.position + r * state.velocity().perp();
    center + r * PlanarPoint::from_angle(state.velocity_angle - PI / 2.0 + b * t)
}

/// Time stepping with step 1e-5 for the first entry into the disk, refined
/// by bisection.
fn oracle_hit(state: &ParticleState, b: f64, disk: &Disk, horizon: f64) -> Option<f64> {
    let gap = |t: f64| position(state, b, t).distance(disk.center) - disk.radius;
    let step = 1e-5;
    let mut prev = DEPARTURE_GUARD;
    let mut k = 1u64;
    loop {
        let t = (k as f64 * step).min(horizon);
        if gap(t) < 0.0 {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        if t >= horizon {
            return None;
        }
        prev = t;
        k += 1;
    }
}

#[test]
fn arc_disk_hit_matches_time_stepping_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    for case in 0..1000 {
        let b = if case % 4 == 0 { 0.0 } else { rng.random_range(0.4..3.0) };
        let state = ParticleState::new(
            PlanarPoint::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            rng.random_range(0.0..TAU),
        );
        let radius = rng.random_range(0.01..0.3);
        let horizon = if b == 0.0 { 2.0 } else { (TAU / b).min(2.0) };
        // aim near the path so that hits and near misses are both common
        let t0 = rng.random_range(0.0..horizon);
        let offset = rng.random_range(0.0..2.0 * radius) * PlanarPoint::from_angle(rng.random_range(0.0..TAU));
        let center = position(&state, b, t0) + offset;
        if state.position.distance(center) <= radius * 1.001 {
            continue;
        }
        let disk = Disk { center, radius };
        let got = first_arc_disk_hit(&state, b, &disk, horizon).unwrap();
        let want = oracle_hit(&state, b, &disk, horizon);
        match (got, want) {
            (Some(h), Some(t)) => {
                hits += 1;
                assert!((h.time - t).abs() < 1e-8, "case {case}: {} vs {t}", h.time);
                let p = position(&state, b, h.time);
                assert!(((p - center).norm() - radius).abs() < 1e-10);
                assert!((h.normal.norm() - 1.0).abs() < 1e-12);
            }
            (None, None) => {}
            other => panic!("case {case}: verdicts differ {other:?}"),
        }
    }
    assert!(hits > 300, "only {hits} hits");
}

#[test]
fn head_on_and_outside_start() {
    let s = ParticleState::new(PlanarPoint::new(0.0, 0.0), 0.0);
    let disk = Disk {
        center: PlanarPoint::new(1.0, 0.0),
        radius: 0.1,
    };
    let hit = first_arc_disk_hit(&s, 0.0, &disk, 5.0).unwrap().unwrap();
    assert!((hit.time - 0.9).abs() < 1e-14);
    let inside = ParticleState::new(PlanarPoint::new(1.0, 0.05), 0.0);
    assert!(first_arc_disk_hit(&inside, 0.0, &disk, 5.0).is_err());
    let reversed = reflect(0.0, hit.normal);
    assert!((reversed - PI).abs() < 1e-14);
}

proptest! {
    #[test]
    fn speed_is_preserved(x in -5.0..5.0f64, y in -5.0..5.0f64, a in 0.0..TAU, b in 0.0..4.0f64,
                          t in 0.0..10.0f64, nx in -1.0..1.0f64, ny in -1.0..1.0f64) {
        prop_assume!(nx.hypot(ny) > 1e-3);
        let n = (1.0 / nx.hypot(ny)) * PlanarPoint::new(nx, ny);
        let s = advance_free(&ParticleState::new(PlanarPoint::new(x, y), a), b, t);
        let s = ParticleState::new(s.position, reflect(s.velocity_angle, n));
        let s = advance_free(&s, b, t);
        prop_assert!((s.velocity().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflect_is_an_involution(a in 0.0..TAU, phi in 0.0..TAU) {
        let n = PlanarPoint::from_angle(phi);
        let back = reflect(reflect(a, n), n);
        prop_assert!(wrap_signed(back - a).abs() < 1e-12);
    }

    #[test]
    fn flight_is_a_semigroup(x in -5.0..5.0f64, y in -5.0..5.0f64, a in 0.0..TAU, b in 0.0..4.0f64,
                             t1 in 0.0..5.0f64, t2 in 0.0..5.0f64) {
        let s = ParticleState::new(PlanarPoint::new(x, y), a);
        let once = advance_free(&s, b, t1 + t2);
        let twice = advance_free(&advance_free(&s, b, t1), b, t2);
        prop_assert!(once.position.distance(twice.position) < 1e-12);
        prop_assert!(wrap_signed(once.velocity_angle - twice.velocity_angle).abs() < 1e-12);
    }

    #[test]
    fn deflection_cosine(b in -1.0..=1.0f64) {
        let th = deflection_from_impact(b).unwrap();
        prop_assert!((th.cos() - (2.0 * b * b - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn scatter_matches_reflection(a in 0.0..TAU, phi in 0.0..TAU) {
        let n = PlanarPoint::from_angle(phi);
        let v = PlanarPoint::from_angle(a);
        prop_assume!(v.dot(n) < -1e-6);
        let data = ScatterData::from_impact(a, n, 0.1);
        prop_assert!(data.impact_parameter.abs() <= 0.1);
        let out = reflect(a, n);
        prop_assert!(wrap_signed(out - a - data.deflection).abs() < 1e-9);
    }

    #[test]
    fn self_recollision_angle_decreases(r in 0.5..3.0f64, e in 0.01..0.2f64, u in 0.0..1.0f64, w in 0.0..1.0f64) {
        prop_assume!(r > e);
        let (lo, hi) = (r - e, r + e);
        let (d1, d2) = ((lo + 2.0 * e * u.min(w)).min(hi), (lo + 2.0 * e * u.max(w)).min(hi));
        let b1 = self_recollision_angle(d1, r, e).unwrap();
        let b2 = self_recollision_angle(d2, r, e).unwrap();
        prop_assert!(b2 <= b1 + 1e-12);
        // β ~ sqrt(2(1 − cos β)) amplifies the rounding of R + ε
        prop_assert!(self_recollision_angle(hi, r, e).unwrap() < (8.0 * f64::EPSILON * hi / e).sqrt());
    }
}
