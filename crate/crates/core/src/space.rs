//! Finite geodesic metric measure spaces.
//!
//! A space is a connected weighted graph. Distances are shortest-path
//! lengths, the vertex measure is a probability measure, and every edge
//! carries its own measure used by the discrete p-energy.

use std::collections::BTreeMap;
use std::path::Path;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the vertex measure sum below which no renormalization happens.
const MEASURE_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
    pub measure: f64,
}

impl Edge {
    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }
}

/// Connected weighted graph with its shortest-path metric and a probability
/// measure on vertices. Immutable after [`MetricMeasureSpace::build`].
#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    n: usize,
    edges: Vec<Edge>,
    measure: Vec<f64>,
    dist: Vec<f64>,
    adjacency: Vec<Vec<(usize, usize)>>,
    diameter: f64,
    meta: BTreeMap<String, serde_json::Value>,
}

/// On-disk representation of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub measure: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_measure: Option<Vec<f64>>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl MetricMeasureSpace {
    /// Validate the graph, compute all-pairs distances and normalize the
    /// measures. Vertex and edge measures are divided by the same constant.
    /// Without an explicit edge measure, each edge gets `length / total length`.
    pub fn build(
        n: usize,
        edges: &[(usize, usize, f64)],
        measure: &[f64],
        edge_measure: Option<&[f64]>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpace(format!(
                "a space needs at least two vertices, got {n}"
            )));
        }
        if measure.len() != n {
            return Err(Error::InvalidSpace(format!(
                "measure has {} entries for {n} vertices",
                measure.len()
            )));
        }
        for (x, &w) in measure.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "vertex {x} has nonpositive or non-finite measure {w}"
                )));
            }
        }
        if edges.is_empty() {
            return Err(Error::InvalidSpace("no edges".into()));
        }
        for (i, &(u, v, len)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidSpace(format!(
                    "edge {i} ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidSpace(format!("edge {i} is a self-loop at {u}")));
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "edge {i} ({u}, {v}) has nonpositive or non-finite length {len}"
                )));
            }
        }
        if let Some(em) = edge_measure {
            if em.len() != edges.len() {
                return Err(Error::InvalidSpace(format!(
                    "edge_measure has {} entries for {} edges",
                    em.len(),
                    edges.len()
                )));
            }
            for (i, &w) in em.iter().enumerate() {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidSpace(format!(
                        "edge {i} has negative or non-finite measure {w}"
                    )));
                }
            }
        }

        let total: f64 = measure.iter().sum();
        let scale = if (total - 1.0).abs() <= MEASURE_SUM_TOL {
            1.0
        } else {
            1.0 / total
        };
        let measure: Vec<f64> = measure.iter().map(|w| w * scale).collect();
        let total_length: f64 = edges.iter().map(|e| e.2).sum();
        let edges: Vec<Edge> = edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v, length))| Edge {
                u,
                v,
                length,
                measure: match edge_measure {
                    Some(em) => em[i] * scale,
                    None => length / total_length,
                },
            })
            .collect();

        let mut adjacency = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.u].push((e.v, i));
            adjacency[e.v].push((e.u, i));
        }

        let dist = all_pairs_shortest_paths(n, &edges)?;
        let diameter = dist.iter().cloned().fold(0.0, f64::max);

        Ok(Self {
            n,
            edges,
            measure,
            dist,
            adjacency,
            diameter,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: serde_json::Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn meta(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.meta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// `(neighbor, edge index)` pairs incident to `x`.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adjacency[x]
    }

    pub fn are_adjacent(&self, x: usize, y: usize) -> bool {
        self.adjacency[x].iter().any(|&(z, _)| z == y)
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    /// Row of the distance matrix for `x`.
    pub fn dist_row(&self, x: usize) -> &[f64] {
        &self.dist[x * self.n..(x + 1) * self.n]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// Smallest distance from `x` to any other vertex.
    pub fn min_positive_distance_from(&self, x: usize) -> f64 {
        self.dist_row(x)
            .iter()
            .enumerate()
            .filter(|&(y, _)| y != x)
            .map(|(_, &d)| d)
            .fold(f64::INFINITY, f64::min)
    }

    /// Open ball `{y : dist(x, y) < r}`, sorted by vertex index.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        self.dist_row(x)
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d < r)
            .map(|(y, _)| y)
            .collect()
    }

    /// Closed ball `{y : dist(x, y) <= r}`.
    pub fn closed_ball(&self, x: usize, r: f64) -> Vec<usize> {
        self.dist_row(x)
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d <= r)
            .map(|(y, _)| y)
            .collect()
    }

    pub fn set_measure(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.measure[x]).sum()
    }

    pub fn ball_measure(&self, x: usize, r: f64, closed: bool) -> f64 {
        self.dist_row(x)
            .iter()
            .zip(&self.measure)
            .filter(|&(&d, _)| if closed { d <= r } else { d < r })
            .map(|(_, &w)| w)
            .sum()
    }

    /// Distance from `x` to the vertex set `to` (infinite when `to` is empty).
    pub fn dist_to_set(&self, x: usize, to: &[usize]) -> f64 {
        to.iter()
            .map(|&y| self.dist(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Sorted distinct distances from `x` (including 0).
    pub fn distinct_distances_from(&self, x: usize) -> Vec<f64> {
        let mut d: Vec<f64> = self.dist_row(x).to_vec();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    /// Sorted distinct positive pairwise distances.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = (0..self.n)
            .flat_map(|x| ((x + 1)..self.n).map(move |y| (x, y)))
            .map(|(x, y)| self.dist(x, y))
            .collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    /// Exact doubling constant: the sup over centers and radii of
    /// `m(U_2r(x)) / m(U_r(x))`. The ratio is piecewise constant in `r`, so
    /// it suffices to evaluate at every critical radius (distances from `x`
    /// and their halves), both at the radius and just above it.
    pub fn doubling_constant(&self) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|x| {
                let profile = RadialProfile::new(self, x);
                let mut best: f64 = 1.0;
                for &d in profile.distances.iter().filter(|&&d| d > 0.0) {
                    for r in [d, 0.5 * d] {
                        let strict = profile.open(2.0 * r) / profile.open(r);
                        let closed = profile.closed(2.0 * r) / profile.closed(r);
                        if profile.open(r) > 0.0 {
                            best = best.max(strict);
                        }
                        best = best.max(closed);
                    }
                }
                best
            })
            .reduce(|| 1.0, f64::max)
    }

    /// Local slope `max_y |f(x) - f(y)| / len(x, y)` over edges at `x`.
    pub fn lip_local(&self, f: &FunctionOnSpace, x: usize) -> f64 {
        self.adjacency[x]
            .iter()
            .map(|&(y, e)| (f[x] - f[y]).abs() / self.edges[e].length)
            .fold(0.0, f64::max)
    }

    /// Global Lipschitz constant over all vertex pairs.
    pub fn lip_global(&self, f: &FunctionOnSpace) -> f64 {
        let n = self.n;
        (0..n)
            .map(|x| {
                ((x + 1)..n)
                    .map(|y| (f[x] - f[y]).abs() / self.dist(x, y))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `max` over edges of `|f(u) - f(v)| / len`.
    pub fn max_edge_slope(&self, f: &FunctionOnSpace) -> f64 {
        self.edges
            .iter()
            .map(|e| (f[e.u] - f[e.v]).abs() / e.length)
            .fold(0.0, f64::max)
    }

    /// Vertices of the complement of a (sorted or unsorted) vertex set.
    pub fn complement(&self, set: &[usize]) -> Vec<usize> {
        let mut inside = vec![false; self.n];
        for &x in set {
            inside[x] = true;
        }
        (0..self.n).filter(|&x| !inside[x]).collect()
    }

    /// Connected components of the subgraph induced by `set`, each sorted,
    /// ordered by smallest member.
    pub fn components(&self, set: &[usize]) -> Vec<Vec<usize>> {
        let mut inside = vec![false; self.n];
        for &x in set {
            inside[x] = true;
        }
        let mut seen = vec![false; self.n];
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        let mut out = Vec::new();
        for &s in &sorted {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                for &(y, _) in &self.adjacency[x] {
                    if inside[y] && !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn to_file(&self) -> SpaceFile {
        SpaceFile {
            vertices: self.n,
            edges: self.edges.iter().map(|e| (e.u, e.v, e.length)).collect(),
            measure: self.measure.clone(),
            edge_measure: Some(self.edges.iter().map(|e| e.measure).collect()),
            meta: self.meta.clone(),
        }
    }

    pub fn from_file(file: &SpaceFile) -> Result<Self> {
        let mut space = Self::build(
            file.vertices,
            &file.edges,
            &file.measure,
            file.edge_measure.as_deref(),
        )?;
        space.meta = file.meta.clone();
        Ok(space)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Sorted distances from one center with cumulative measure, for fast
/// ball-measure queries.
pub(crate) struct RadialProfile {
    pub distances: Vec<f64>,
    sorted: Vec<(f64, f64)>,
    prefix: Vec<f64>,
}

impl RadialProfile {
    pub fn new(space: &MetricMeasureSpace, x: usize) -> Self {
        let mut sorted: Vec<(f64, f64)> = space
            .dist_row(x)
            .iter()
            .zip(space.measure())
            .map(|(&d, &w)| (d, w))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &(_, w) in &sorted {
            acc += w;
            prefix.push(acc);
        }
        let mut distances: Vec<f64> = sorted.iter().map(|p| p.0).collect();
        distances.dedup();
        Self {
            distances,
            sorted,
            prefix,
        }
    }

    /// Measure of `{d < r}`.
    pub fn open(&self, r: f64) -> f64 {
        self.prefix[self.sorted.partition_point(|p| p.0 < r)]
    }

    /// Measure of `{d <= r}`.
    pub fn closed(&self, r: f64) -> f64 {
        self.prefix[self.sorted.partition_point(|p| p.0 <= r)]
    }
}

fn all_pairs_shortest_paths(n: usize, edges: &[Edge]) -> Result<Vec<f64>> {
    let mut graph = UnGraph::<(), f64>::with_capacity(n, edges.len());
    let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
    for e in edges {
        graph.add_edge(nodes[e.u], nodes[e.v], e.length);
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let reach = dijkstra(&graph, nodes[x], None, |e| *e.weight());
            let mut row = vec![f64::INFINITY; n];
            for (node, d) in reach {
                row[node.index()] = d;
            }
            row[x] = 0.0;
            row
        })
        .collect();
    if let Some(y) = rows[0].iter().position(|d| !d.is_finite()) {
        return Err(Error::Disconnected(y));
    }
    let mut dist = Vec::with_capacity(n * n);
    for row in &rows {
        dist.extend_from_slice(row);
    }
    // Symmetrize exactly; the two Dijkstra runs may sum edges in a different order.
    for x in 0..n {
        for y in (x + 1)..n {
            let d = dist[x * n + y].min(dist[y * n + x]);
            dist[x * n + y] = d;
            dist[y * n + x] = d;
        }
    }
    Ok(dist)
}

/// Real-valued function on the vertices of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionOnSpace(Vec<f64>);

impl FunctionOnSpace {
    pub fn new(space: &MetricMeasureSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n() {
            return Err(Error::InvalidArgument(format!(
                "function has {} values for {} vertices",
                values.len(),
                space.n()
            )));
        }
        if let Some(x) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "function value at vertex {x} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Indices where the function is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&x| self.0[x] != 0.0).collect()
    }
}

impl std::ops::Index<usize> for FunctionOnSpace {
    type Output = f64;
    fn index(&self, x: usize) -> &f64 {
        &self.0[x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{circle, interval};
    use std::f64::consts::PI;

    fn two_point() -> MetricMeasureSpace {
        MetricMeasureSpace::build(2, &[(0, 1, 1.0)], &[1.0, 1.0], None).unwrap()
    }

    #[test]
    fn two_point_space() {
        let s = two_point();
        assert_eq!(s.dist(0, 1), 1.0);
        assert_eq!(s.measure(), &[0.5, 0.5]);
        assert_eq!(s.diameter(), 1.0);
    }

    #[test]
    fn triangle_diameter() {
        let s = MetricMeasureSpace::build(
            3,
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
            &[1.0; 3],
            None,
        )
        .unwrap();
        assert_eq!(s.diameter(), 1.0);
    }

    #[test]
    fn circle_antipodes() {
        let c = circle(2.0 * PI, 8).unwrap();
        assert!((c.dist(0, 4) - PI).abs() < 1e-12);
        assert!((c.diameter() - PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            MetricMeasureSpace::build(1, &[], &[1.0], None),
            Err(Error::InvalidSpace(_))
        ));
        assert!(matches!(
            MetricMeasureSpace::build(3, &[(0, 1, 1.0)], &[1.0; 3], None),
            Err(Error::Disconnected(2))
        ));
        assert!(MetricMeasureSpace::build(2, &[(0, 1, 0.0)], &[1.0; 2], None).is_err());
        assert!(MetricMeasureSpace::build(2, &[(0, 1, -1.0)], &[1.0; 2], None).is_err());
        assert!(MetricMeasureSpace::build(2, &[(0, 1, 1.0)], &[1.0, 0.0], None).is_err());
        assert!(MetricMeasureSpace::build(2, &[(0, 0, 1.0)], &[1.0; 2], None).is_err());
    }

    #[test]
    fn balls_are_open() {
        let c = circle(2.0 * PI, 8).unwrap();
        assert_eq!(c.ball(0, 0.1), vec![0]);
        assert_eq!(c.ball(0, PI + 0.01).len(), 8);
        assert_eq!(c.ball(0, PI / 4.0 + 0.01), vec![0, 1, 7]);
        // exactly at the neighbor distance the neighbor is excluded
        assert_eq!(c.ball(0, c.dist(0, 1)), vec![0]);
    }

    #[test]
    fn interval_diameter() {
        let s = interval(1.0, 11).unwrap();
        assert!((s.diameter() - 1.0).abs() < 1e-12);
        assert_eq!(s.edges().len(), 10);
    }

    #[test]
    fn doubling_two_point() {
        assert_eq!(two_point().doubling_constant(), 2.0);
    }

    #[test]
    fn doubling_uniform_circle() {
        let c = circle(2.0 * PI, 64).unwrap();
        let cd = c.doubling_constant();
        assert!((2.0..=3.0).contains(&cd), "C_D = {cd}");
    }

    #[test]
    fn lipschitz_constants() {
        let s = two_point();
        let f = FunctionOnSpace::new(&s, vec![0.0, 1.0]).unwrap();
        assert_eq!(s.lip_local(&f, 0), 1.0);
        assert_eq!(s.lip_local(&f, 1), 1.0);
        assert_eq!(s.lip_global(&f), 1.0);

        let c = circle(2.0 * PI, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = 1.0;
        let spike = FunctionOnSpace::new(&c, v).unwrap();
        assert!((c.lip_global(&spike) - 1.0 / (2.0 * PI / 8.0)).abs() < 1e-12);
        let constant = FunctionOnSpace::new(&c, vec![2.5; 8]).unwrap();
        assert_eq!(c.lip_global(&constant), 0.0);
        assert_eq!(c.lip_local(&constant, 4), 0.0);
    }

    #[test]
    fn distance_functions_are_one_lipschitz() {
        let c = interval(2.0, 9).unwrap();
        let f = FunctionOnSpace::new(&c, c.dist_row(3).to_vec()).unwrap();
        assert!((c.lip_global(&f) - 1.0).abs() < 1e-12);
        for x in 0..c.n() {
            assert!(c.lip_local(&f, x) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_idempotent() {
        let c = circle(2.0 * PI, 16).unwrap();
        let text = c.to_json().unwrap();
        let again = MetricMeasureSpace::from_json(&text).unwrap();
        assert_eq!(text, again.to_json().unwrap());
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(MetricMeasureSpace::from_json("{\"vertices\": 2}").is_err());
        assert!(MetricMeasureSpace::from_json(
            "{\"vertices\": 2, \"edges\": [[0, 5, 1.0]], \"measure\": [1, 1]}"
        )
        .is_err());
    }
}
