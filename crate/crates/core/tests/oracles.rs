mod common;

use common::*;
use genedrift::model::{build_initial_map, FitnessPotential, InitialDensity, MassGrid, ModelSpec, TransportMap};
use genedrift::solver::{residual_split, self_concordance_a0, solve_euler_step, solve_split_step, Scheme, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn models() -> Vec<(ModelSpec, FitnessPotential)> {
    let drift = FitnessPotential::linear_slope(0.0, 2.0).unwrap();
    vec![
        (ModelSpec::diffusion(2.0).unwrap(), FitnessPotential::neutral()),
        (ModelSpec::new(2.0, drift.clone()).unwrap(), drift),
    ]
}

#[test]
fn split_step_on_uniform_map_matches_brute_force() {
    let prev = TransportMap::identity(MassGrid::new(4).unwrap());
    let model = ModelSpec::diffusion(2.0).unwrap();
    let newton = solve_split_step(&prev, &model, &SolverConfig::new(0.01)).unwrap();
    let oracle = brute_force_split_step(&prev, 2.0, &FitnessPotential::neutral(), 0.01);
    for (a, b) in newton.map.values().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn split_step_on_random_maps_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 3..=5 {
        for (model, potential) in models() {
            for _ in 0..4 {
                let prev = random_map(&mut rng, n, 0.05);
                let tau = rng.gen_range(0.005..0.2);
                let newton = solve_split_step(&prev, &model, &SolverConfig::new(tau)).unwrap();
                let oracle = brute_force_split_step(&prev, 2.0, &potential, tau);
                for (a, b) in newton.map.values().iter().zip(&oracle) {
                    assert!((a - b).abs() < 1e-6, "n={n} tau={tau}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn split_residual_is_gradient_of_functional() {
    let grid = MassGrid::new(4).unwrap();
    let prev = TransportMap::identity(grid);
    let cur = TransportMap::new(grid, vec![0.0, 0.2, 0.45, 0.8, 1.0]).unwrap();
    let tau = 0.1;
    let model = ModelSpec::diffusion(2.0).unwrap();
    let f = residual_split(&prev, &cur, &model, tau).unwrap();
    let h = grid.spacing();
    for (j, r) in f.iter().enumerate() {
        let i = j + 1;
        let at = |d: f64| {
            let mut y = cur.values().to_vec();
            y[i] += d;
            oracle_split_functional(prev.values(), &y, 2.0, &FitnessPotential::neutral(), tau)
        };
        let d = 1e-6;
        let grad = (at(d) - at(-d)) / (2.0 * d);
        assert!((grad / h - r).abs() < 1e-6 * r.abs().max(1.0), "node {i}: {} vs {r}", grad / h);
    }
}

#[test]
fn jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let potentials = [
        FitnessPotential::neutral(),
        FitnessPotential::linear_slope(0.0, 2.0).unwrap(),
        FitnessPotential::linear_slope(-3.0, 1.0).unwrap(),
        FitnessPotential::from_slope_coefficients(&[0.0, 0.0, 1.0]).unwrap(),
    ];
    for k in 0..20 {
        let n = rng.gen_range(3..25);
        let prev = random_map(&mut rng, n, 0.2 / n as f64);
        let cur = random_map(&mut rng, n, 0.2 / n as f64);
        let kappa = rng.gen_range(0.5..4.0);
        let model = ModelSpec::new(kappa, potentials[k % potentials.len()].clone()).unwrap();
        let tau = rng.gen_range(1e-3..0.1);
        for scheme in [Scheme::Euler, Scheme::Split] {
            let err = jacobian_fd_error(&prev, &cur, &model, tau, scheme);
            assert!(err < 1e-5, "{scheme} n={n}: {err:e}");
        }
    }
}

#[test]
fn splitting_functional_is_self_concordant() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let models = [
        ModelSpec::diffusion(2.0).unwrap(),
        ModelSpec::diffusion(0.7).unwrap(),
        ModelSpec::new(2.0, FitnessPotential::linear_slope(-3.0, 1.0).unwrap()).unwrap(),
        ModelSpec::new(2.0, FitnessPotential::from_slope_coefficients(&[0.0, 0.0, 1.0]).unwrap()).unwrap(),
    ];
    for k in 0..12 {
        let model = &models[k % models.len()];
        let n = rng.gen_range(3..30);
        let prev = random_map(&mut rng, n, 0.1 / n as f64);
        let y = random_map(&mut rng, n, 0.1 / n as f64);
        let mut u: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        u[0] = 0.0;
        u[n] = 0.0;
        let v = y.values();
        let room = (1..=n)
            .map(|i| (v[i] - v[i - 1]) / (u[i] - u[i - 1]).abs().max(1e-300))
            .fold(f64::INFINITY, f64::min);
        let (d2, d3) = directional_derivatives(&prev, &y, &u, model, 0.05, 1e-2 * room);
        let a0 = self_concordance_a0(model, prev.grid());
        assert!(d2 > 0.0);
        assert!(d3.abs() <= 2.0 / a0.sqrt() * d2.powf(1.5) * (1.0 + 1e-3), "case {k}: {d3} vs {d2}");
    }
}

#[test]
fn euler_step_error_is_second_order_per_step() {
    let grid = MassGrid::new(4).unwrap();
    let prev = build_initial_map(&InitialDensity::from_key("2x").unwrap(), grid).unwrap();
    let model = ModelSpec::diffusion(2.0).unwrap();
    let gap = |tau: f64| {
        let one = solve_euler_step(&prev, &model, &SolverConfig::new(tau)).unwrap().euler.map;
        let half = SolverConfig::new(0.5 * tau);
        let mid = solve_euler_step(&prev, &model, &half).unwrap().euler.map;
        let two = solve_euler_step(&mid, &model, &half).unwrap().euler.map;
        one.values()
            .iter()
            .zip(two.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (gap(1e-3), gap(5e-4));
    assert!(coarse < 1e-5, "{coarse:e}");
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}
