use maglorentz::operators::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_zero_mean(rng: &mut ChaCha8Rng, n: usize, harmonics: usize) -> Vec<f64> {
    let coeffs: Vec<(f64, f64)> = (0..harmonics)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    (0..n)
        .map(|j| {
            let th = std::f64::consts::TAU * j as f64 / n as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let m = (k + 1) as f64;
                    (a * (m * th).cos() + b * (m * th).sin()) / m
                })
                .sum()
        })
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn three_inversion_routes_agree() {
    let (mu, period, n) = (1.0, 1.0, 64);
    let op = build_lg(mu, period, n / 2, None, DEFAULT_QUADRATURE_ORDER).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let g = random_zero_mean(&mut rng, n, 20);
        let direct = invert_lg_direct_on_grid(&op, &g).unwrap();
        let neumann = invert_lg_neumann(mu, period, &g, 1e-12).unwrap();
        let split = invert_split_series(mu, period, &g, 1e-12).unwrap();
        assert!(max_diff(&direct, &neumann.values) < 1e-8);
        assert!(max_diff(&direct, &split.values) < 1e-8);
        // L^G h = g
        let back = op.apply_on_grid(&direct).unwrap();
        assert!(max_diff(&back, &g) < 1e-12);
    }
}

#[test]
fn boltzmann_operator_is_dissipative() {
    let l = build_l(1.3, 32, DEFAULT_QUADRATURE_ORDER).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let g = random_zero_mean(&mut rng, 64, 31);
        let lg = l.apply_on_grid(&g).unwrap();
        let form: f64 = g.iter().zip(&lg).map(|(a, b)| -a * b).sum();
        assert!(form > 0.0);
    }
}

#[test]
fn multipliers_are_even_and_conserve_mass() {
    for op in [
        build_k(64, 256).unwrap(),
        build_l(1.0, 64, 256).unwrap(),
        build_m(1.0, 1.0, 64, None, 256).unwrap(),
        build_lg(1.0, 1.0, 64, None, 256).unwrap(),
    ] {
        let s = op.symmetric_multipliers();
        for (a, b) in s.iter().zip(s.iter().rev()) {
            assert!((a - b).abs() < 1e-12);
        }
        if op.kind != OperatorKind::Gain {
            assert_eq!(op.multiplier(0), 0.0);
        }
    }
    let k = build_k(64, 256).unwrap();
    assert_eq!(k.multiplier(0), 1.0);
    assert!((1..=64).all(|m| k.multiplier(m).abs() <= BETA + 1e-12));
}

#[test]
fn converged_under_doubling() {
    let a = build_lg(1.0, 1.0, 64, None, 256).unwrap();
    let b = build_lg(1.0, 1.0, 128, None, 512).unwrap();
    for m in 0..=64 {
        assert!((a.multiplier(m) - b.multiplier(m)).abs() < 1e-12, "mode {m}");
    }
}

#[test]
fn long_period_tail_reaches_zero_field_value() {
    let mu = 1.0;
    let d0 = 3.0 / (8.0 * mu);
    // e^{−2μT} < 1e−7
    let mut prev = f64::INFINITY;
    for period in [8.5, 10.0, 15.0, 40.0] {
        let d = diffusion_coefficient(&build_lg(mu, period, 8, None, 256).unwrap()).unwrap();
        assert!((d - d0).abs() < 1e-6, "T = {period}: {d}");
        assert!((d - d0).abs() <= (prev - d0).abs());
        prev = d;
    }
    let tensor = diffusion_tensor(&build_lg(mu, 1.0, 8, None, 256).unwrap()).unwrap();
    assert!((tensor[0][0] - tensor[1][1]).abs() < 1e-12);
    assert!(tensor[0][1].abs() < 1e-12);
}

#[test]
fn threshold_reported_with_gap() {
    let th = invertibility_threshold();
    assert!(th.t_star > 0.75);
    assert!((contraction_factor(1.0, th.t_star) - 1.0).abs() < 1e-12);
    assert!(th.b_star < th.stated_b_bound);
    assert!(th.b_gap > 0.2);
    // between the two bounds the series routes refuse while the direct route works
    let t = 0.76;
    let g = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    assert!(invert_lg_neumann(1.0, t, &g, 1e-12).is_err());
    let op = build_lg(1.0, t, 4, None, 256).unwrap();
    assert!(invert_lg_direct_on_grid(&op, &g).is_ok());
}

#[test]
fn sweep_rows() {
    let rows = operator_sweep(1.0, &[0.0, 1.0, 4.0, 8.1], 16, 128).unwrap();
    assert!((rows[0].d_direct - 0.375).abs() < 1e-12);
    for r in &rows {
        assert!(r.series_converged);
        assert!((r.d_markovian + r.d_memory - r.d_direct).abs() < 1e-12);
        assert!(r.spectral_gap > 0.0);
    }
}
