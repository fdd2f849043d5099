//! Packing radii, inradius, inscribed packing radii and the counting
//! function.
//!
//! `pack_{k+1}` is half the largest achievable minimum pairwise distance of
//! `k+1` vertices. The exact solver runs a binary search over the sorted
//! distinct distances; each probe asks for a `(k+1)`-clique in the far graph
//! `{(u, v) : dist(u, v) >= t}` via depth-first branch and bound with
//! candidate-count, far-degree and metric-length pruning. The length bound
//! uses that open balls of radius `t/2` around points `t` apart are disjoint
//! in the metric graph, so their lengths cannot sum past the total length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;

pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackMode {
    Exact,
    Greedy,
    /// Exact within the node budget, greedy with a certified bracket otherwise.
    Auto,
}

impl std::str::FromStr for PackMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "greedy" => Ok(Self::Greedy),
            "auto" => Ok(Self::Auto),
            other => Err(Error::InvalidArgument(format!("unknown packing mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certificate {
    Exact,
    Heuristic { lower_bound: f64, upper_bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub k_plus_1: usize,
    pub radius: f64,
    pub centers: Vec<usize>,
    pub certificate: Certificate,
}

impl PackingResult {
    pub fn is_exact(&self) -> bool {
        matches!(self.certificate, Certificate::Exact)
    }
}

pub fn pack_radius(space: &MetricMeasureSpace, k_plus_1: usize, mode: PackMode) -> Result<PackingResult> {
    pack_radius_with_budget(space, k_plus_1, mode, DEFAULT_NODE_BUDGET)
}

pub fn pack_radius_with_budget(
    space: &MetricMeasureSpace,
    k_plus_1: usize,
    mode: PackMode,
    budget: u64,
) -> Result<PackingResult> {
    if k_plus_1 < 2 {
        return Err(Error::InvalidArgument(format!(
            "packing needs at least two centers, got {k_plus_1}"
        )));
    }
    if k_plus_1 > space.n() {
        return Err(Error::Infeasible(format!(
            "{k_plus_1} centers requested on {} vertices",
            space.n()
        )));
    }
    let all: Vec<usize> = (0..space.n()).collect();
    match mode {
        PackMode::Greedy => Ok(greedy_result(space, k_plus_1, &all)),
        PackMode::Exact => exact_pack(space, k_plus_1, &all, budget),
        PackMode::Auto => match exact_pack(space, k_plus_1, &all, budget) {
            Err(Error::BudgetExceeded(_)) => Ok(greedy_result(space, k_plus_1, &all)),
            other => other,
        },
    }
}

/// Farthest-point insertion seeded with the lexicographically smallest
/// diameter pair. Returns the centers and half their minimum distance.
pub fn greedy_dispersion(space: &MetricMeasureSpace, k_plus_1: usize) -> (Vec<usize>, f64) {
    let n = space.n();
    let (mut a, mut b, mut best) = (0, 1, f64::NEG_INFINITY);
    for x in 0..n {
        for y in (x + 1)..n {
            if space.dist(x, y) > best {
                best = space.dist(x, y);
                a = x;
                b = y;
            }
        }
    }
    let mut centers = vec![a, b];
    let mut near: Vec<f64> = (0..n).map(|z| space.dist(a, z).min(space.dist(b, z))).collect();
    while centers.len() < k_plus_1.min(n) {
        let mut pick = usize::MAX;
        for z in 0..n {
            if !centers.contains(&z) && (pick == usize::MAX || near[z] > near[pick]) {
                pick = z;
            }
        }
        centers.push(pick);
        for z in 0..n {
            near[z] = near[z].min(space.dist(pick, z));
        }
    }
    centers.truncate(k_plus_1);
    centers.sort_unstable();
    let radius = 0.5 * min_pairwise(space, &centers);
    (centers, radius)
}

fn greedy_result(space: &MetricMeasureSpace, k_plus_1: usize, allowed: &[usize]) -> PackingResult {
    let (centers, radius) = greedy_dispersion(space, k_plus_1);
    let upper = 0.5 * certified_threshold_bound(space, k_plus_1, allowed);
    PackingResult {
        k_plus_1,
        radius,
        centers,
        certificate: Certificate::Heuristic {
            lower_bound: radius,
            upper_bound: upper.max(radius),
        },
    }
}

pub fn min_pairwise(space: &MetricMeasureSpace, set: &[usize]) -> f64 {
    let mut m = f64::INFINITY;
    for (i, &x) in set.iter().enumerate() {
        for &y in &set[i + 1..] {
            m = m.min(space.dist(x, y));
        }
    }
    m
}

/// Length of the open metric-graph ball of radius `rho` around vertex `x`.
fn metric_ball_length(space: &MetricMeasureSpace, x: usize, rho: f64) -> f64 {
    let row = space.dist_row(x);
    space
        .edges()
        .iter()
        .map(|e| {
            let a = (rho - row[e.u]).clamp(0.0, e.length);
            let b = (rho - row[e.v]).clamp(0.0, e.length);
            (a + b).min(e.length)
        })
        .sum()
}

/// Branch and bound for a `need`-subset of `allowed` with pairwise distance
/// `>= t`. Candidates are tried in increasing index order, so the first
/// solution found is the lexicographically smallest.
struct CliqueSearch<'a> {
    space: &'a MetricMeasureSpace,
    t: f64,
    need: usize,
    ball_len: Vec<f64>,
    total_len: f64,
    nodes: u64,
    budget: u64,
}

impl<'a> CliqueSearch<'a> {
    fn new(space: &'a MetricMeasureSpace, t: f64, need: usize, budget: u64) -> Self {
        let ball_len = (0..space.n())
            .map(|x| metric_ball_length(space, x, 0.5 * t))
            .collect();
        Self {
            space,
            t,
            need,
            ball_len,
            total_len: space.total_length(),
            nodes: 0,
            budget,
        }
    }

    fn far(&self, x: usize, y: usize) -> bool {
        self.space.dist(x, y) >= self.t
    }

    /// Drop candidates with too few far neighbors among the candidates.
    fn degree_prune(&self, cands: &mut Vec<usize>, remaining: usize) {
        if remaining < 2 {
            return;
        }
        loop {
            let before = cands.len();
            let snapshot = cands.clone();
            cands.retain(|&v| {
                snapshot.iter().filter(|&&w| w != v && self.far(v, w)).count() + 1 >= remaining
            });
            if cands.len() == before {
                return;
            }
        }
    }

    fn length_excludes(&self, cands: &[usize], remaining: usize, used: f64) -> bool {
        let mut lens: Vec<f64> = cands.iter().map(|&v| self.ball_len[v]).collect();
        lens.sort_by(f64::total_cmp);
        let least: f64 = lens.iter().take(remaining).sum();
        used + least > self.total_len * (1.0 + 1e-12)
    }

    fn find(&mut self, allowed: &[usize]) -> Result<Option<Vec<usize>>> {
        let mut chosen = Vec::with_capacity(self.need);
        let found = self.dfs(&mut chosen, allowed.to_vec(), 0.0)?;
        Ok(found.then_some(chosen))
    }

    fn dfs(&mut self, chosen: &mut Vec<usize>, mut cands: Vec<usize>, used: f64) -> Result<bool> {
        if chosen.len() == self.need {
            return Ok(true);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        let remaining = self.need - chosen.len();
        self.degree_prune(&mut cands, remaining);
        if cands.len() < remaining || self.length_excludes(&cands, remaining, used) {
            return Ok(false);
        }
        for idx in 0..cands.len() {
            if cands.len() - idx < remaining {
                break;
            }
            let v = cands[idx];
            let next: Vec<usize> = cands[idx + 1..]
                .iter()
                .copied()
                .filter(|&w| self.far(v, w))
                .collect();
            chosen.push(v);
            if self.dfs(chosen, next, used + self.ball_len[v])? {
                return Ok(true);
            }
            chosen.pop();
        }
        Ok(false)
    }

    /// Root-level exclusion by the cheap bounds only.
    fn root_excluded(&self, allowed: &[usize]) -> bool {
        let mut cands = allowed.to_vec();
        self.degree_prune(&mut cands, self.need);
        cands.len() < self.need || self.length_excludes(&cands, self.need, 0.0)
    }
}

/// Largest distinct distance not excluded by the root bounds; twice a
/// certified upper bound on the packing radius.
fn certified_threshold_bound(space: &MetricMeasureSpace, k_plus_1: usize, allowed: &[usize]) -> f64 {
    let thresholds = space.distinct_distances();
    for &t in thresholds.iter().rev() {
        if !CliqueSearch::new(space, t, k_plus_1, u64::MAX).root_excluded(allowed) {
            return t;
        }
    }
    thresholds[0]
}

fn exact_pack(
    space: &MetricMeasureSpace,
    k_plus_1: usize,
    allowed: &[usize],
    budget: u64,
) -> Result<PackingResult> {
    let thresholds = space.distinct_distances();
    let (_, greedy_radius) = greedy_dispersion(space, k_plus_1);
    // thresholds[lo] is feasible, everything above hi is infeasible
    let mut lo = thresholds.partition_point(|&t| t < 2.0 * greedy_radius);
    lo = lo.min(thresholds.len() - 1);
    let mut hi = thresholds.len() - 1;
    let mut spent = 0u64;
    let probe = |t: f64, spent: &mut u64| -> Result<Option<Vec<usize>>> {
        let mut search = CliqueSearch::new(space, t, k_plus_1, budget.saturating_sub(*spent));
        let out = search.find(allowed);
        *spent += search.nodes;
        out
    };
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if probe(thresholds[mid], &mut spent)?.is_some() {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let centers = probe(thresholds[lo], &mut spent)?
        .ok_or_else(|| Error::Numerical("greedy threshold reported infeasible".into()))?;
    Ok(PackingResult {
        k_plus_1,
        radius: 0.5 * min_pairwise(space, &centers),
        centers,
        certificate: Certificate::Exact,
    })
}

fn validate_region(space: &MetricMeasureSpace, set: &[usize]) -> Result<Vec<usize>> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("region is empty".into()));
    }
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.last().is_some_and(|&x| x >= space.n()) {
        return Err(Error::InvalidArgument("region has a vertex outside the space".into()));
    }
    if s.len() == space.n() {
        return Err(Error::InvalidArgument(
            "region must be a proper subset: its complement is the boundary".into(),
        ));
    }
    Ok(s)
}

/// `max_{x in A} dist(x, V \ A)` together with the first maximizing vertex.
pub fn inradius_center(space: &MetricMeasureSpace, set: &[usize]) -> Result<(usize, f64)> {
    let s = validate_region(space, set)?;
    let complement = space.complement(&s);
    let mut best = (s[0], f64::NEG_INFINITY);
    for &x in &s {
        let d = space.dist_to_set(x, &complement);
        if d > best.1 {
            best = (x, d);
        }
    }
    Ok(best)
}

pub fn inradius(space: &MetricMeasureSpace, set: &[usize]) -> Result<f64> {
    Ok(inradius_center(space, set)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpackResult {
    pub k: usize,
    pub radius: f64,
    pub centers: Vec<usize>,
}

/// `k`-th inscribed packing radius of `omega`: the largest value of
/// `min(min_{i<j} dist(x_i, x_j)/2, min_i dist(x_i, V \ omega))` over
/// `k`-subsets of `omega`.
pub fn inpack(space: &MetricMeasureSpace, omega: &[usize], k: usize) -> Result<InpackResult> {
    let omega = validate_region(space, omega)?;
    if k == 0 || k > omega.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            omega.len()
        )));
    }
    let complement = space.complement(&omega);
    let depth: Vec<f64> = omega.iter().map(|&x| space.dist_to_set(x, &complement)).collect();
    if k == 1 {
        let (center, radius) = inradius_center(space, &omega)?;
        return Ok(InpackResult {
            k,
            radius,
            centers: vec![center],
        });
    }
    let mut values: Vec<f64> = depth.clone();
    for (i, &x) in omega.iter().enumerate() {
        for &y in &omega[i + 1..] {
            values.push(0.5 * space.dist(x, y));
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let probe = |tau: f64| -> Result<Option<Vec<usize>>> {
        let allowed: Vec<usize> = omega
            .iter()
            .zip(&depth)
            .filter(|&(_, &d)| d >= tau)
            .map(|(&x, _)| x)
            .collect();
        if allowed.len() < k {
            return Ok(None);
        }
        CliqueSearch::new(space, 2.0 * tau, k, DEFAULT_NODE_BUDGET).find(&allowed)
    };
    // the smallest candidate is always feasible: any k vertices qualify
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if probe(values[mid])?.is_some() {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let centers = probe(values[lo])?.ok_or_else(|| Error::Numerical("inpack probe failed".into()))?;
    let radius = centers
        .iter()
        .map(|&x| space.dist_to_set(x, &complement))
        .fold(0.5 * min_pairwise(space, &centers), f64::min);
    Ok(InpackResult { k, radius, centers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingResult {
    pub r: f64,
    pub count: usize,
    /// `pack_{k+1}` for `k = 1, 2, ...` as far as computed.
    pub radii: Vec<f64>,
    /// `pack_{k_max+1}` still exceeds `r`, so the count is only a lower bound.
    pub truncated: bool,
}

/// `N(r) = #{k >= 1 : pack_{k+1} > r}` from the non-increasing sequence of
/// exact packing radii, with `pack_j = 0` once `j` exceeds the vertex count.
pub fn counting_function(space: &MetricMeasureSpace, r: f64, k_max: usize) -> Result<CountingResult> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("r must be positive, got {r}")));
    }
    let mut radii = Vec::new();
    for k in 1..=k_max {
        if k + 1 > space.n() {
            return Ok(CountingResult {
                r,
                count: radii.len(),
                radii,
                truncated: false,
            });
        }
        let pack = pack_radius(space, k + 1, PackMode::Exact)?.radius;
        radii.push(pack);
        if pack <= r {
            return Ok(CountingResult {
                r,
                count: k - 1,
                radii,
                truncated: false,
            });
        }
    }
    Ok(CountingResult {
        r,
        count: k_max,
        radii,
        truncated: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingLawRow {
    pub space: String,
    pub k: usize,
    pub pack: f64,
    /// `k * pack_k^dim / volume`.
    pub value: f64,
    /// `pack_k` is at least the longest edge, so the mesh resolves it.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingLawReport {
    pub dim: u32,
    pub rows: Vec<PackingLawRow>,
    /// Value at the largest resolved `k` of the finest space.
    pub trend: Option<f64>,
    /// `1/2` in dimension one; not known here otherwise.
    pub target: Option<f64>,
}

pub struct LawInput<'a> {
    pub label: String,
    pub space: &'a MetricMeasureSpace,
    pub volume: f64,
}

/// Tabulate `k * pack_k^dim / volume` across a refinement family.
pub fn packing_law_report(inputs: &[LawInput<'_>], dim: u32, k_list: &[usize]) -> Result<PackingLawReport> {
    let mut rows = Vec::new();
    for input in inputs {
        for &k in k_list {
            if k < 2 || k > input.space.n() {
                continue;
            }
            let pack = pack_radius(input.space, k, PackMode::Auto)?.radius;
            rows.push(PackingLawRow {
                space: input.label.clone(),
                k,
                pack,
                value: k as f64 * pack.powi(dim as i32) / input.volume,
                resolved: pack >= input.space.max_edge_length(),
            });
        }
    }
    let trend = inputs.last().and_then(|last| {
        rows.iter()
            .filter(|r| r.space == last.label && r.resolved)
            .max_by_key(|r| r.k)
            .map(|r| r.value)
    });
    Ok(PackingLawReport {
        dim,
        rows,
        trend,
        target: (dim == 1).then_some(0.5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{circle, interval, random_geometric};
    use std::f64::consts::PI;

    /// Brute force over all subsets of the given size.
    fn brute_pack(space: &MetricMeasureSpace, size: usize) -> f64 {
        fn rec(s: &MetricMeasureSpace, start: usize, size: usize, cur: &mut Vec<usize>, best: &mut f64) {
            if cur.len() == size {
                *best = best.max(min_pairwise(s, cur));
                return;
            }
            for x in start..s.n() {
                cur.push(x);
                rec(s, x + 1, size, cur, best);
                cur.pop();
            }
        }
        let mut best = 0.0;
        rec(space, 0, size, &mut Vec::new(), &mut best);
        0.5 * best
    }

    #[test]
    fn pack_two_is_half_diameter() {
        for seed in 0..5 {
            let s = random_geometric(15, 0.4, seed).unwrap();
            let r = pack_radius(&s, 2, PackMode::Exact).unwrap();
            assert_eq!(r.radius, s.diameter() / 2.0);
        }
    }

    #[test]
    fn two_point_space() {
        let s = MetricMeasureSpace::build(2, &[(0, 1, 1.0)], &[1.0, 1.0], None).unwrap();
        let r = pack_radius(&s, 2, PackMode::Exact).unwrap();
        assert_eq!(r.radius, 0.5);
        assert_eq!(r.centers, vec![0, 1]);
    }

    #[test]
    fn circle_equal_spacing() {
        for (n, k1) in [(12, 3), (12, 4), (24, 4), (24, 6), (20, 5)] {
            let c = circle(2.0 * PI, n).unwrap();
            let r = pack_radius(&c, k1, PackMode::Exact).unwrap();
            assert!((r.radius - 2.0 * PI / (2.0 * k1 as f64)).abs() < 1e-12);
            assert!((r.radius - brute_pack(&c, k1)).abs() < 1e-12);
            let step = n / k1;
            assert_eq!(r.centers, (0..k1).map(|i| i * step).collect::<Vec<_>>());
        }
    }

    #[test]
    fn exact_matches_brute_force_and_greedy_is_half_approx() {
        for seed in 0..12 {
            let s = random_geometric(14, 0.35, 100 + seed).unwrap();
            for k1 in 2..=4 {
                let exact = pack_radius(&s, k1, PackMode::Exact).unwrap();
                assert!((exact.radius - brute_pack(&s, k1)).abs() < 1e-12);
                assert!((min_pairwise(&s, &exact.centers) - 2.0 * exact.radius).abs() < 1e-12);
                let greedy = pack_radius(&s, k1, PackMode::Greedy).unwrap();
                assert!(greedy.radius >= 0.5 * exact.radius - 1e-12);
                if let Certificate::Heuristic { lower_bound, upper_bound } = greedy.certificate {
                    assert!(lower_bound <= exact.radius + 1e-12);
                    assert!(upper_bound >= exact.radius - 1e-12);
                } else {
                    panic!("greedy must report a heuristic bracket");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_counts() {
        let c = circle(1.0, 5).unwrap();
        assert!(matches!(pack_radius(&c, 1, PackMode::Exact), Err(Error::InvalidArgument(_))));
        assert!(matches!(pack_radius(&c, 6, PackMode::Exact), Err(Error::Infeasible(_))));
    }

    #[test]
    fn packing_radii_are_non_increasing() {
        let s = random_geometric(20, 0.3, 9).unwrap();
        let radii: Vec<f64> = (2..=8)
            .map(|k| pack_radius(&s, k, PackMode::Exact).unwrap().radius)
            .collect();
        for w in radii.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn inradius_examples() {
        let s = interval(1.0, 11).unwrap();
        let middle: Vec<usize> = (1..10).collect();
        assert!((inradius(&s, &middle).unwrap() - 0.5).abs() < 1e-12);
        let single = inradius(&s, &[4]).unwrap();
        assert!((single - 0.1).abs() < 1e-12);

        let c = circle(2.0 * PI, 8).unwrap();
        // vertices 0..4: the deepest (1 and 2) sit two steps from the complement
        let half = inradius(&c, &[0, 1, 2, 3]).unwrap();
        assert!((half - 2.0 * (2.0 * PI / 8.0)).abs() < 1e-12);
        assert!(inradius(&c, &[]).is_err());
        assert!(inradius(&c, &(0..8).collect::<Vec<_>>()).is_err());
    }

    #[test]
    fn inpack_examples() {
        let s = interval(2.0, 21).unwrap();
        let interior: Vec<usize> = (1..20).collect();
        let one = inpack(&s, &interior, 1).unwrap();
        assert_eq!(one.radius, inradius(&s, &interior).unwrap());
        let two = inpack(&s, &interior, 2).unwrap();
        assert!((two.radius - 0.5).abs() < 1e-12);
        // every vertex of a dense region: bounded by half the spacing
        let all = inpack(&s, &interior, 19).unwrap();
        assert!((all.radius - 0.05).abs() < 1e-12);
        assert!(inpack(&s, &interior, 0).is_err());
        assert!(inpack(&s, &interior, 20).is_err());
    }

    #[test]
    fn counting_function_examples() {
        let c = circle(2.0 * PI, 48).unwrap();
        let res = counting_function(&c, 0.5, 20).unwrap();
        assert_eq!(res.count, 5);
        assert!(!res.truncated);
        assert_eq!(counting_function(&c, PI / 2.0, 5).unwrap().count, 0);
        let two = MetricMeasureSpace::build(2, &[(0, 1, 1.0)], &[1.0, 1.0], None).unwrap();
        assert_eq!(counting_function(&two, 0.4, 5).unwrap().count, 1);
        let short = counting_function(&c, 0.01, 3).unwrap();
        assert!(short.truncated);
        assert_eq!(short.count, 3);
    }

    #[test]
    fn circle_packing_law_is_one_half() {
        let c = circle(2.0 * PI, 60).unwrap();
        let report = packing_law_report(
            &[LawInput { label: "c60".into(), space: &c, volume: 2.0 * PI }],
            1,
            &[2, 3, 4, 5, 6, 10, 12],
        )
        .unwrap();
        for row in &report.rows {
            assert!((row.value - 0.5).abs() < 1e-12, "{row:?}");
        }
        assert_eq!(report.target, Some(0.5));
    }
}
