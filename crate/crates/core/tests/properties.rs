use packspec::fakespec::DisjointFamily;
use packspec::morrey::{riesz_potential, volume_comparison_check};
use packspec::packing::{greedy_dispersion, inradius, min_pairwise, pack_radius, PackMode};
use packspec::penergy::{dirichlet_eig1, p_norm, rayleigh, EnergyConfig};
use packspec::{FunctionOnSpace, MetricMeasureSpace};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct GraphData {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    measure: Vec<f64>,
}

impl GraphData {
    fn build(&self) -> MetricMeasureSpace {
        MetricMeasureSpace::build(self.n, &self.edges, &self.measure, None).unwrap()
    }
}

/// Random spanning tree plus extra edges, random lengths and measures.
fn graph(max_n: usize) -> impl Strategy<Value = GraphData> {
    (3..=max_n).prop_flat_map(|n| {
        let parents = (1..n).map(|i| 0..i).collect::<Vec<_>>();
        let extra = prop::collection::vec((0..n, 0..n, 0.1f64..2.0), 0..n);
        let lengths = prop::collection::vec(0.1f64..2.0, n - 1);
        let measure = prop::collection::vec(0.05f64..1.0, n);
        (parents, extra, lengths, measure).prop_map(move |(parents, extra, lengths, measure)| {
            let mut edges: Vec<(usize, usize, f64)> =
                parents.iter().enumerate().map(|(i, &par)| (par, i + 1, lengths[i])).collect();
            for (u, v, l) in extra {
                let dup = edges.iter().any(|&(a, b, _)| (a, b) == (u, v) || (a, b) == (v, u));
                if u != v && !dup {
                    edges.push((u, v, l));
                }
            }
            GraphData { n, edges, measure }
        })
    })
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn graph_and_function(max_n: usize) -> impl Strategy<Value = (GraphData, Vec<f64>)> {
    graph(max_n).prop_flat_map(|g| {
        let n = g.n;
        (Just(g), values(n))
    })
}

/// Random labels in `-1..k+1` turned into nonempty disjoint sets.
fn partition(labels: &[i64], parts: usize) -> Option<Vec<Vec<usize>>> {
    let mut sets = vec![Vec::new(); parts];
    for (x, &l) in labels.iter().enumerate() {
        if l >= 0 {
            sets[l as usize].push(x);
        }
    }
    sets.iter().all(|s| !s.is_empty()).then_some(sets)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(g in graph(14)) {
        let s = g.build();
        for x in 0..s.n() {
            prop_assert_eq!(s.dist(x, x), 0.0);
            for y in 0..s.n() {
                prop_assert_eq!(s.dist(x, y), s.dist(y, x));
                if x != y {
                    prop_assert!(s.dist(x, y) > 0.0);
                }
                for z in 0..s.n() {
                    prop_assert!(s.dist(x, z) <= s.dist(x, y) + s.dist(y, z) + 1e-12);
                }
            }
        }
        for e in s.edges() {
            prop_assert!(s.dist(e.u, e.v) <= e.length + 1e-12);
        }
    }

    #[test]
    fn lipschitz_constant_is_edge_slope((g, f) in graph_and_function(14)) {
        let s = g.build();
        let f = FunctionOnSpace::new(&s, f).unwrap();
        let global = s.lip_global(&f);
        let local = (0..s.n()).map(|x| s.lip_local(&f, x)).fold(0.0, f64::max);
        let slope = s.max_edge_slope(&f);
        prop_assert!(rel_close(global, slope, 1e-12), "{} vs {}", global, slope);
        prop_assert!(rel_close(global, local, 1e-12), "{} vs {}", global, local);
    }

    #[test]
    fn doubling_constant_controls_ball_ratios(g in graph(10)) {
        let s = g.build();
        let r = volume_comparison_check(&s, s.doubling_constant()).unwrap();
        prop_assert_eq!(r.same_center_violations, 0);
    }

    #[test]
    fn power_means_increase_with_exponent((g, f) in graph_and_function(14), q in 1.0f64..8.0, dp in 0.0f64..8.0) {
        let s = g.build();
        let f = FunctionOnSpace::new(&s, f).unwrap();
        let lo = p_norm(&s, &f, q).unwrap();
        let hi = p_norm(&s, &f, q + dp).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn rayleigh_scale_invariance((g, f) in graph_and_function(12), c in 1e-3f64..1e3, mc in 1e-3f64..1e3, p in 1.2f64..20.0) {
        prop_assume!(f.iter().any(|&v| v != 0.0));
        let s = g.build();
        let base = rayleigh(&s, &FunctionOnSpace::new(&s, f.clone()).unwrap(), p).unwrap();
        let scaled: Vec<f64> = f.iter().map(|v| c * v).collect();
        let r1 = rayleigh(&s, &FunctionOnSpace::new(&s, scaled).unwrap(), p).unwrap();
        prop_assert!(rel_close(base, r1, 1e-10));
        let file = s.to_file();
        let m: Vec<f64> = file.measure.iter().map(|x| mc * x).collect();
        let em: Vec<f64> = s.edges().iter().map(|e| mc * e.measure).collect();
        let t = MetricMeasureSpace::build(file.vertices, &file.edges, &m, Some(&em)).unwrap();
        let r2 = rayleigh(&t, &FunctionOnSpace::new(&t, f).unwrap(), p).unwrap();
        prop_assert!(rel_close(base, r2, 1e-10));
    }

    #[test]
    fn exact_packing_is_brute_force_and_greedy_half(g in graph(10), kp1 in 2usize..5) {
        let s = g.build();
        prop_assume!(kp1 <= s.n());
        let exact = pack_radius(&s, kp1, PackMode::Exact).unwrap();
        let mut best = 0.0f64;
        let n = s.n();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == kp1 {
                let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                best = best.max(0.5 * min_pairwise(&s, &set));
            }
        }
        prop_assert!(rel_close(exact.radius, best, 1e-12));
        prop_assert!(rel_close(0.5 * min_pairwise(&s, &exact.centers), exact.radius, 1e-12));
        let (_, greedy) = greedy_dispersion(&s, kp1);
        prop_assert!(greedy >= 0.5 * exact.radius - 1e-12);
        if kp1 < n {
            prop_assert!(pack_radius(&s, kp1 + 1, PackMode::Exact).unwrap().radius <= exact.radius);
        }
    }

    #[test]
    fn separated_inradii_below_packing_radius(g in graph(16), labels in prop::collection::vec(-1i64..3, 16), parts in 2usize..4) {
        let s = g.build();
        let labels: Vec<i64> = labels[..s.n()].iter().map(|&l| l.min(parts as i64 - 1)).collect();
        let Some(sets) = partition(&labels, parts) else { return Ok(()); };
        prop_assume!(sets.iter().all(|set| set.len() < s.n()));
        prop_assume!(DisjointFamily::new(&s, sets.clone(), None).is_ok());
        let min_inrad = sets.iter().map(|set| inradius(&s, set).unwrap()).fold(f64::INFINITY, f64::min);
        let pack = pack_radius(&s, parts, PackMode::Exact).unwrap().radius;
        prop_assert!(min_inrad <= pack * (1.0 + 1e-12), "{} > {}", min_inrad, pack);
    }

    #[test]
    fn riesz_potential_homogeneous_and_monotone((g, h) in graph_and_function(10), c in 0.0f64..5.0, p in 1.0f64..6.0, sigma in 1.0f64..3.0) {
        let s = g.build();
        let omega: Vec<usize> = (0..s.n()).collect();
        let hf = FunctionOnSpace::new(&s, h.clone()).unwrap();
        let scaled = FunctionOnSpace::new(&s, h.iter().map(|v| c * v).collect()).unwrap();
        let bigger = FunctionOnSpace::new(&s, h.iter().map(|v| v.abs() + 0.5).collect()).unwrap();
        for x in 0..s.n() {
            let j = riesz_potential(&s, &hf, p, sigma, &omega, x).unwrap();
            let js = riesz_potential(&s, &scaled, p, sigma, &omega, x).unwrap();
            let jb = riesz_potential(&s, &bigger, p, sigma, &omega, x).unwrap();
            prop_assert!((js - c * j).abs() <= 1e-10 * (1.0 + c * j));
            prop_assert!(jb >= j * (1.0 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn union_of_separated_supports(g in graph(12), labels in prop::collection::vec(-1i64..2, 12), p in 1.5f64..6.0) {
        let s = g.build();
        let Some(sets) = partition(&labels[..s.n()], 2) else { return Ok(()); };
        prop_assume!(DisjointFamily::new(&s, sets.clone(), None).is_ok());
        let cfg = EnergyConfig::new(p).with_tol(1e-12);
        let a = dirichlet_eig1(&s, &sets[0], &cfg).unwrap().lambda;
        let b = dirichlet_eig1(&s, &sets[1], &cfg).unwrap().lambda;
        let mut union = sets.concat();
        union.sort_unstable();
        let mut joint_cfg = cfg.clone();
        joint_cfg.split_components = false;
        let joint = dirichlet_eig1(&s, &union, &joint_cfg).unwrap().lambda;
        prop_assert!(joint <= a.max(b) * (1.0 + 1e-8), "{} > max({}, {})", joint, a, b);
        prop_assert!(rel_close(joint, a.min(b), 1e-5), "{} vs min({}, {})", joint, a, b);
    }

    #[test]
    fn rayleigh_quotients_bound_the_eigenvalue((g, f) in graph_and_function(12), p in 1.5f64..8.0, cut in 1usize..12) {
        let s = g.build();
        let support: Vec<usize> = (0..s.n().min(cut)).collect();
        prop_assume!(support.len() < s.n());
        let values: Vec<f64> = (0..s.n()).map(|x| if x < support.len() { f[x].abs() + 0.01 } else { 0.0 }).collect();
        let cfg = EnergyConfig::new(p).with_tol(1e-10);
        let lambda = dirichlet_eig1(&s, &support, &cfg).unwrap().lambda;
        let q = rayleigh(&s, &FunctionOnSpace::new(&s, values).unwrap(), p).unwrap();
        prop_assert!(q >= lambda * (1.0 - 1e-8), "{} < {}", q, lambda);
    }
}
