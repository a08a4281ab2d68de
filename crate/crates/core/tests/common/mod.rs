//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use genedrift::model::{FitnessPotential, MassGrid, ModelSpec, TransportMap};
use genedrift::solver::{jacobian, residual_euler, residual_split, split_functional, Scheme};
use rand::Rng;

/// Strictly increasing random map on `n` intervals with every gap at least
/// `min_gap`.
pub fn random_map<R: Rng>(rng: &mut R, n: usize, min_gap: f64) -> TransportMap {
    assert!(min_gap * n as f64 <= 0.5);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let spare = 1.0 - min_gap * n as f64;
    let mut values = vec![0.0];
    let mut acc = 0.0;
    for g in &raw[..n - 1] {
        acc += min_gap + spare * g / total;
        values.push(acc);
    }
    values.push(1.0);
    TransportMap::new(MassGrid::new(n).unwrap(), values).unwrap()
}

/// Splitting functional written out from its definition for a potential
/// that is convex on its own (linear `V`), so `V_c = V` and `V_e = 0`.
pub fn oracle_split_functional(prev: &[f64], y: &[f64], kappa: f64, potential: &FitnessPotential, tau: f64) -> f64 {
    let n = prev.len() - 1;
    let h = 1.0 / n as f64;
    let hk = 0.5 * kappa;
    let mut total = 0.0;
    for i in 1..n {
        let p = prev[i];
        let m = p * (1.0 - p);
        total += (y[i] - p).powi(2) / (2.0 * tau * m) + hk * (1.0 - 2.0 * p) / m * y[i] + potential.value(y[i]);
    }
    for i in 1..=n {
        let gap = y[i] - y[i - 1];
        if gap <= 0.0 {
            return f64::INFINITY;
        }
        total -= hk * (gap / h).ln();
    }
    h * total
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Minimizes the splitting functional by cyclic golden-section searches,
/// each node between its two neighbours, until a sweep moves nothing.
pub fn brute_force_split_step(prev: &TransportMap, kappa: f64, potential: &FitnessPotential, tau: f64) -> Vec<f64> {
    let p = prev.values();
    let n = p.len() - 1;
    let mut y = p.to_vec();
    for _ in 0..20_000 {
        let mut moved: f64 = 0.0;
        for i in 1..n {
            let (lo, hi) = (y[i - 1], y[i + 1]);
            let width = hi - lo;
            let trial = std::cell::RefCell::new(y.clone());
            let best = golden_section(
                |v| {
                    let mut t = trial.borrow_mut();
                    t[i] = v;
                    oracle_split_functional(p, &t, kappa, potential, tau)
                },
                lo + 1e-14 * width,
                hi - 1e-14 * width,
                1e-13,
            );
            moved = moved.max((best - y[i]).abs());
            y[i] = best;
        }
        if moved < 1e-12 {
            break;
        }
    }
    y
}

/// Largest row-relative deviation of the analytic Jacobian from central
/// finite differences of the residual.
pub fn jacobian_fd_error(prev: &TransportMap, cur: &TransportMap, model: &ModelSpec, tau: f64, scheme: Scheme) -> f64 {
    let residual = |map: &TransportMap| match scheme {
        Scheme::Euler => residual_euler(prev, map, model, tau).unwrap(),
        Scheme::Split => residual_split(prev, map, model, tau).unwrap(),
    };
    let analytic = jacobian(cur, prev, model, tau, scheme).unwrap();
    let v = cur.values();
    let dim = analytic.dim();
    let start = 1;
    let mut worst: f64 = 0.0;
    let mut fd = vec![vec![0.0; dim]; dim];
    for col in 0..dim {
        let i = start + col;
        let room = (v[i] - v[i - 1]).min(v[i + 1] - v[i]);
        let delta = 1e-6 * room;
        let shifted = |d: f64| {
            let mut w = v.to_vec();
            w[i] += d;
            TransportMap::new(cur.grid(), w).unwrap()
        };
        let plus = residual(&shifted(delta));
        let minus = residual(&shifted(-delta));
        for row in 0..dim {
            fd[row][col] = (plus[row] - minus[row]) / (2.0 * delta);
        }
    }
    for row in 0..dim {
        let scale = (0..dim).map(|c| analytic.get(row, c).abs()).fold(0.0, f64::max);
        for col in 0..dim {
            worst = worst.max((fd[row][col] - analytic.get(row, col)).abs() / scale);
        }
    }
    worst
}

/// `(D²J, D³J)` along `u` at `y` of the splitting functional built on
/// `prev`, by central differences with step `s`.
pub fn directional_derivatives(prev: &TransportMap, y: &TransportMap, u: &[f64], model: &ModelSpec, tau: f64, s: f64) -> (f64, f64) {
    let phi = |t: f64| {
        let w: Vec<f64> = y.values().iter().zip(u).map(|(v, d)| v + t * d).collect();
        split_functional(prev, &TransportMap::new(prev.grid(), w).unwrap(), model, tau).unwrap()
    };
    let (m2, m1, z, p1, p2) = (phi(-2.0 * s), phi(-s), phi(0.0), phi(s), phi(2.0 * s));
    let d2 = (-p2 + 16.0 * p1 - 30.0 * z + 16.0 * m1 - m2) / (12.0 * s * s);
    let d3 = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * s * s * s);
    (d2, d3)
}
