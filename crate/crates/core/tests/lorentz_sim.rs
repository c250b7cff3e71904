use std::f64::consts::{PI, TAU};

use maglorentz::geometry::{segment_distance, wrap_signed, ParticleState, PlanarPoint};
use maglorentz::lorentz_sim::*;
use maglorentz::medium::{scaling_from, ObstacleField, ScalingParams};

#[test]
fn head_on_reversal_on_generated_obstacle() {
    let params = scaling_from(0.01, 1.0, 1.0, 0.0).unwrap();
    let field = ObstacleField::new(params, 31);
    let (eps, d, angle) = (params.eps, 0.05, 0.3);
    let v = PlanarPoint::from_angle(angle);
    let mut neighbours = Vec::new();
    for cx in -2..=2 {
        for cy in -2..=2 {
            neighbours.extend(field.obstacles_in_cell((cx, cy)));
        }
    }
    let mut checked = 0;
    for cell in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        for c in field.obstacles_in_cell(cell) {
            let start = c - d * v;
            // only obstacles with nothing else near the approach path
            let clear = neighbours
                .iter()
                .filter(|&&o| o != c)
                .all(|&o| segment_distance(start, c + 2.0 * eps * v, o) > 2.0 * eps);
            if !clear {
                continue;
            }
            let out = simulate_trajectory(&field, ParticleState::new(start, angle), d, &[]).unwrap();
            let first = out.events[0];
            assert_eq!(first.kind, EventKind::Fresh);
            assert!((first.hit_time - (d - eps)).abs() < 1e-12);
            assert!(first.impact_parameter.abs() < 1e-12);
            assert!(wrap_signed(out.final_state.velocity_angle - (angle + PI)).abs() < 1e-12);
            checked += 1;
        }
    }
    assert!(checked >= 3, "only {checked} clean obstacles");
}

#[test]
fn obstacle_free_motion() {
    let field = ObstacleField::new(ScalingParams::obstacle_free(0.01, 2.0).unwrap(), 0);
    let grid: Vec<f64> = (0..=20).map(|k| k as f64).collect();
    let out = simulate_trajectory(&field, ParticleState::new(PlanarPoint::new(0.3, 0.1), 1.0), 20.0, &grid).unwrap();
    assert_eq!(out.status, TrajectoryStatus::CirclingForever);
    assert!(out.displacement_samples.iter().all(|(_, x)| x.norm() <= 2.0 * 0.5 + 1e-12));
    let table = msd_estimate(&field.params, 8, &grid, 1).unwrap();
    assert!(table.rows.iter().all(|r| r.msd <= 4.0 * 0.25 + 1e-12));
    let flat = ScalingParams::obstacle_free(0.01, 0.0).unwrap();
    let table = msd_estimate(&flat, 8, &grid, 1).unwrap();
    for r in &table.rows {
        assert!((r.msd - r.t * r.t).abs() < 1e-9 * (1.0 + r.t * r.t));
    }
}

#[test]
fn event_log_invariants() {
    for b in [0.0, 1.0, 4.0] {
        let params = scaling_from(0.005, 1.0, 2.0, b).unwrap();
        for seed in 0..40u64 {
            let field = ObstacleField::new(params, seed);
            let start = ParticleState::new(PlanarPoint::new(0.5, 0.5), seed as f64);
            if !field.is_admissible_start(start.position) {
                continue;
            }
            let out = simulate_trajectory(&field, start, 5.0, &[]).unwrap();
            for w in out.events.windows(2) {
                assert!(w[1].hit_time > w[0].hit_time);
                assert!(w[0].exit_time <= w[1].hit_time);
            }
            for e in &out.events {
                assert!(e.exit_time >= e.hit_time);
                assert!(e.impact_parameter.abs() <= params.eps * (1.0 + 1e-12));
                assert!((e.impact_vector.norm() - 1.0).abs() < 1e-12);
                if b == 0.0 {
                    assert_ne!(e.kind, EventKind::SelfRecollision);
                }
            }
            let counts = classify_events(&out.events);
            let kinds = |k| out.events.iter().filter(|e| e.kind == k).count();
            assert_eq!(counts.fresh, kinds(EventKind::Fresh));
            assert_eq!(counts.recollisions, kinds(EventKind::Recollision));
            assert_eq!(counts.self_recollisions, kinds(EventKind::SelfRecollision));
            assert!((out.final_state.velocity().norm() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn results_do_not_depend_on_workers() {
    let params = scaling_from(0.004, 1.0, 2.0, 1.0).unwrap();
    let grid = [0.0, 1.0, 2.0, 4.0];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| msd_estimate(&params, 64, &grid, 12).unwrap())
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.msd.to_bits(), y.msd.to_bits());
    }
    let s1 = event_rate_study(&[4e-3], &EtaRule::Fixed(2.0), 1.0, 1.0, 2.0, 50, 3).unwrap();
    let s2 = event_rate_study(&[4e-3], &EtaRule::Fixed(2.0), 1.0, 1.0, 2.0, 50, 3).unwrap();
    assert_eq!(s1.rows[0].recollision, s2.rows[0].recollision);
}

#[test]
fn circling_fraction_two_sided() {
    // μ_eff = 10, R = 1: closed form e^{−0.4π}
    let study = event_rate_study(&[0.01], &EtaRule::Fixed(1.0), 0.1, 1.0, TAU + 0.1, 100_000, 8).unwrap();
    let row = study.rows[0];
    let p = row.circling_closed_form.unwrap();
    assert!((p - (-0.4 * PI).exp()).abs() < 1e-12);
    assert!(
        (row.circling.mean - p).abs() <= 3.0 * row.circling.std_error,
        "{:?} vs {p}",
        row.circling
    );
}

#[test]
fn eta_rules() {
    assert_eq!(EtaRule::Fixed(2.0).eta(0.1), 2.0);
    let r = EtaRule::Power { coeff: 1.0, exponent: 0.5 };
    assert!((r.eta(0.01) - 10.0).abs() < 1e-12);
    assert!(event_rate_study(&[1e-3, 2e-3], &EtaRule::Fixed(1.0), 1.0, 1.0, 1.0, 1, 0).is_err());
}

#[test]
fn msd_slope_matches_heat_diffusivity() {
    // MSD ~ 4·(D_B/2)·t at late times; D_B = 3/8 at zero field, μ = 1
    let params = scaling_from(2e-3, 1.0, 1.0, 0.0).unwrap();
    let times: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
    let table = msd_estimate(&params, 1500, &times, 33).unwrap();
    let (t, m): (Vec<f64>, Vec<f64>) = table.rows.iter().filter(|r| r.t >= 8.0).map(|r| (r.t, r.msd)).unzip();
    let d = maglorentz::stats::linear_fit(&t, &m).unwrap().slope / 2.0;
    assert!((d / 0.375 - 1.0).abs() < 0.1, "MSD slope/2 = {d}");
}
