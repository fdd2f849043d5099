//! Benchmark spaces.
//!
//! One-dimensional generators assign each vertex half the length of its
//! incident edges and each edge its own length, so the discrete p-energy is
//! the trapezoid discretization of the integral of `|f'|^p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;

/// Metric graph with cell-length vertex measure and edge measure equal to length.
fn metric_graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<MetricMeasureSpace> {
    let mut measure = vec![0.0; n];
    for &(u, v, len) in edges {
        measure[u] += 0.5 * len;
        measure[v] += 0.5 * len;
    }
    let em: Vec<f64> = edges.iter().map(|e| e.2).collect();
    MetricMeasureSpace::build(n, edges, &measure, Some(&em))
}

fn check_length(name: &str, len: f64) -> Result<()> {
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {len}"
        )));
    }
    Ok(())
}

/// Cycle of circumference `length` with `n` equally spaced vertices.
pub fn circle(length: f64, n: usize) -> Result<MetricMeasureSpace> {
    check_length("L", length)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("circle needs n >= 2, got {n}")));
    }
    let h = length / n as f64;
    let edges: Vec<_> = if n == 2 {
        // two vertices: a single edge of half the circumference realizes the metric
        vec![(0, 1, 0.5 * length)]
    } else {
        (0..n).map(|i| (i, (i + 1) % n, h)).collect()
    };
    Ok(metric_graph(n, &edges)?.with_meta("generator", json!({"kind": "circle", "L": length, "n": n})))
}

/// Path of length `length` with `n` equally spaced vertices (endpoints included).
pub fn interval(length: f64, n: usize) -> Result<MetricMeasureSpace> {
    check_length("L", length)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("interval needs n >= 2, got {n}")));
    }
    let h = length / (n - 1) as f64;
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, h)).collect();
    Ok(metric_graph(n, &edges)?.with_meta("generator", json!({"kind": "interval", "L": length, "n": n})))
}

/// Flat torus `[0, l1) x [0, l2)` sampled on an `n1 x n2` grid with the
/// graph (l1-type) metric. Vertex and edge measure equal the cell area.
pub fn torus_grid(l1: f64, l2: f64, n1: usize, n2: usize) -> Result<MetricMeasureSpace> {
    check_length("L1", l1)?;
    check_length("L2", l2)?;
    if n1 < 3 || n2 < 3 {
        return Err(Error::InvalidArgument(format!(
            "torus grid needs n1, n2 >= 3, got {n1} x {n2}"
        )));
    }
    let (h1, h2) = (l1 / n1 as f64, l2 / n2 as f64);
    let id = |i: usize, j: usize| i * n2 + j;
    let mut edges = Vec::with_capacity(2 * n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            edges.push((id(i, j), id((i + 1) % n1, j), h1));
            edges.push((id(i, j), id(i, (j + 1) % n2), h2));
        }
    }
    let area = h1 * h2;
    let measure = vec![area; n1 * n2];
    let em = vec![area; edges.len()];
    Ok(MetricMeasureSpace::build(n1 * n2, &edges, &measure, Some(&em))?.with_meta(
        "generator",
        json!({"kind": "torus_grid", "L1": l1, "L2": l2, "n1": n1, "n2": n2}),
    ))
}

/// Planar space made of the segment `[-2,-1] x {0}`, the unit circle and the
/// segment `[1,2] x {0}`, glued at `(-1, 0)` and `(1, 0)`, with its intrinsic
/// metric and one-dimensional Hausdorff measure. Each piece is subdivided
/// into segments no longer than `h`.
///
/// Vertex 0 is `(-2, 0)` and the last vertex is `(2, 0)`.
pub fn theta_space(h: f64) -> Result<MetricMeasureSpace> {
    check_length("h", h)?;
    if h > 1.0 {
        return Err(Error::InvalidArgument(format!("theta space needs h <= 1, got {h}")));
    }
    let mut n = 3usize;
    let mut edges = Vec::new();
    let (left_end, left_joint, right_joint) = (0, 1, 2);
    add_path(&mut edges, &mut n, left_end, Some(left_joint), 1.0, h);
    add_path(&mut edges, &mut n, left_joint, Some(right_joint), std::f64::consts::PI, h);
    add_path(&mut edges, &mut n, left_joint, Some(right_joint), std::f64::consts::PI, h);
    add_path(&mut edges, &mut n, right_joint, None, 1.0, h);
    Ok(metric_graph(n, &edges)?.with_meta(
        "generator",
        json!({"kind": "theta_space", "h": h, "left_joint": left_joint, "right_joint": right_joint}),
    ))
}

/// Subdivide a segment of length `len` into pieces no longer than `h`,
/// appending new vertices; `to = None` creates the far endpoint as well.
fn add_path(
    edges: &mut Vec<(usize, usize, f64)>,
    n: &mut usize,
    from: usize,
    to: Option<usize>,
    len: f64,
    h: f64,
) {
    let m = ((len / h) - 1e-9).ceil().max(1.0) as usize;
    let step = len / m as f64;
    let mut prev = from;
    for i in 1..=m {
        let next = match (i == m, to) {
            (true, Some(t)) => t,
            _ => {
                *n += 1;
                *n - 1
            }
        };
        edges.push((prev, next, step));
        prev = next;
    }
}

/// Random geometric graph on `n` uniform points of the unit square, with an
/// edge between points closer than `radius` and Euclidean edge lengths.
/// Components are joined by their closest cross pair until connected.
pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<MetricMeasureSpace> {
    check_length("radius", radius)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "random geometric graph needs n >= 2, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let d = |a: usize, b: usize| {
        let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
        (dx * dx + dy * dy).sqrt().max(1e-9)
    };
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if d(a, b) < radius {
                edges.push((a, b, d(a, b)));
            }
        }
    }
    // union-find merge of components through closest pairs
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while c[r] != r {
            r = c[r];
        }
        let mut y = x;
        while c[y] != r {
            let next = c[y];
            c[y] = r;
            y = next;
        }
        r
    }
    for &(a, b, _) in &edges {
        let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
        comp[ra.max(rb)] = ra.min(rb);
    }
    loop {
        let root = find(&mut comp, 0);
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            for b in (a + 1)..n {
                let (ia, ib) = (find(&mut comp, a) == root, find(&mut comp, b) == root);
                if ia != ib && best.is_none_or(|(bd, _, _)| d(a, b) < bd) {
                    best = Some((d(a, b), a, b));
                }
            }
        }
        let Some((len, a, b)) = best else { break };
        edges.push((a, b, len));
        let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
        comp[ra.max(rb)] = ra.min(rb);
    }
    Ok(metric_graph(n, &edges)?.with_meta(
        "generator",
        json!({"kind": "random_geometric", "n": n, "radius": radius, "seed": seed}),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_four() {
        let c = circle(2.0 * PI, 4).unwrap();
        assert_eq!(c.edges().len(), 4);
        for e in c.edges() {
            assert!((e.length - PI / 2.0).abs() < 1e-15);
        }
        let total: f64 = c.measure().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_cells() {
        let s = interval(1.0, 11).unwrap();
        assert_eq!(s.edges().len(), 10);
        for e in s.edges() {
            assert!((e.length - 0.1).abs() < 1e-12);
        }
        assert!((s.measure()[0] - 0.05).abs() < 1e-12);
        assert!((s.measure()[5] - 0.1).abs() < 1e-12);
        let em: f64 = s.edges().iter().map(|e| e.measure).sum();
        assert!((em - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_diameter() {
        for h in [0.1, 0.05] {
            let t = theta_space(h).unwrap();
            let last = t.n() - 1;
            assert!((t.dist(0, last) - (PI + 2.0)).abs() < 1e-9);
            assert!((t.diameter() - (PI + 2.0)).abs() <= h);
        }
    }

    #[test]
    fn random_geometric_is_connected_and_deterministic() {
        for seed in 0..10 {
            let a = random_geometric(12, 0.2, seed).unwrap();
            let b = random_geometric(12, 0.2, seed).unwrap();
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        }
    }

    #[test]
    fn torus_grid_distances() {
        let t = torus_grid(1.0, 1.0, 4, 4).unwrap();
        assert!((t.diameter() - 1.0).abs() < 1e-12);
        assert!((t.dist(0, 5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_sizes() {
        assert!(circle(1.0, 1).is_err());
        assert!(interval(-1.0, 5).is_err());
        assert!(theta_space(0.0).is_err());
        assert!(torus_grid(1.0, 1.0, 2, 5).is_err());
    }
}
