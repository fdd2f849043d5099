//! Path eigenvalues from a shooting method on the discrete Euler-Lagrange
//! equation, compared with the inverse-iteration solver.

use packspec::fakespec::{lambda_bar, FakeSpecConfig, Strategy};
use packspec::generators::{circle, interval};
use packspec::penergy::{dirichlet_eig1, EnergyConfig};
use packspec::MetricMeasureSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn phi(t: f64, p: f64) -> f64 {
    t.abs().powf(p - 2.0) * t
}

fn phi_inv(s: f64, p: f64) -> f64 {
    s.abs().powf(1.0 / (p - 1.0)) * s.signum()
}

fn edge_coef(space: &MetricMeasureSpace, a: usize, b: usize, p: f64) -> f64 {
    let e = space
        .edges()
        .iter()
        .find(|e| (e.u == a && e.v == b) || (e.u == b && e.v == a))
        .expect("consecutive path vertices are adjacent");
    e.measure / e.length.powf(p)
}

/// `true` once the shot solution reaches zero at or before the far end.
fn crosses(space: &MetricMeasureSpace, path: &[usize], p: f64, lambda: f64) -> bool {
    let m = space.measure();
    let (mut prev, mut cur) = (0.0, 1.0);
    for i in 1..path.len() - 1 {
        let back = edge_coef(space, path[i - 1], path[i], p);
        let fwd = edge_coef(space, path[i], path[i + 1], p);
        let rhs = (lambda * m[path[i]] * phi(cur, p) - back * phi(cur - prev, p)) / fwd;
        let next = cur - phi_inv(rhs, p);
        if next <= 0.0 {
            return true;
        }
        (prev, cur) = (cur, next);
    }
    false
}

/// First Dirichlet eigenvalue of the interior of `path`, whose two end
/// vertices lie outside the support. Only edges along the path may touch
/// the interior.
fn shooting_eigenvalue(space: &MetricMeasureSpace, path: &[usize], p: f64) -> f64 {
    let mut hi = 1.0;
    while !crosses(space, path, p, hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if crosses(space, path, p, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn solver(p: f64) -> EnergyConfig {
    EnergyConfig::new(p).with_tol(1e-13).with_seed(3)
}

#[test]
fn uniform_interval_matches_shooting() {
    let s = interval(2.0, 41).unwrap();
    let path: Vec<usize> = (0..41).collect();
    for p in [1.5, 2.0, 3.0, 4.0, 8.0, 16.0] {
        let oracle = shooting_eigenvalue(&s, &path, p);
        let got = dirichlet_eig1(&s, &path[1..40], &solver(p)).unwrap().lambda;
        assert!((got / oracle - 1.0).abs() < 1e-6, "p={p}: {got} vs {oracle}");
    }
}

#[test]
fn irregular_path_matches_shooting() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..5 {
        let n = rng.random_range(5..25);
        let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, rng.random_range(0.2..2.0))).collect();
        let measure: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let em: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.1..1.0)).collect();
        let s = MetricMeasureSpace::build(n, &edges, &measure, Some(&em)).unwrap();
        let path: Vec<usize> = (0..n).collect();
        let p = rng.random_range(1.5..6.0);
        let oracle = shooting_eigenvalue(&s, &path, p);
        let got = dirichlet_eig1(&s, &path[1..n - 1], &solver(p)).unwrap().lambda;
        assert!((got / oracle - 1.0).abs() < 1e-6, "trial {trial}, p={p}: {got} vs {oracle}");
    }
}

#[test]
fn circle_fake_spectrum_is_the_shortest_balanced_arc() {
    // optimal families on a cycle are k+1 arcs separated by single unused
    // vertices, the shortest arc holding floor((n-k-1)/(k+1)) vertices
    let n = 20;
    let c = circle(1.0, n).unwrap();
    for (k, p, strategy) in [
        (1, 3.0, Strategy::Exhaustive),
        (2, 3.0, Strategy::Exhaustive),
        (2, 6.0, Strategy::Local),
        (3, 4.0, Strategy::Local),
    ] {
        let arc = (n - k - 1) / (k + 1);
        let path: Vec<usize> = (0..arc + 2).collect();
        let oracle = shooting_eigenvalue(&c, &path, p);
        let cfg = FakeSpecConfig::new(strategy, solver(p));
        let got = lambda_bar(&c, k, p, &cfg).unwrap().lambda_bar;
        assert!((got / oracle - 1.0).abs() < 1e-6, "k={k}, p={p}: {got} vs {oracle}");
    }
}
