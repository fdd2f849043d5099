//! p-sweeps toward the packing targets, extrapolation, refinement studies
//! and the invariant audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fakespec::{
    self, log_mean_exp, solve, span_identity_residuals, DirichletSolver, DisjointFamily, Evaluator,
    FakeSpecConfig, FakeSpecResult, InverseIteration, Objective, Problem, Strategy,
};
use crate::generators;
use crate::packing::{inpack, inradius, pack_radius, PackMode};
use crate::penergy::{check_exponent, dirichlet_eig1, interval_eigenvalue, stream_seed};
use crate::space::MetricMeasureSpace;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub lambda_bar_root: f64,
    pub lambda_under_root: f64,
    pub p_times_root: f64,
    pub bound_root: Option<f64>,
    pub target: f64,
    pub rel_err: f64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<DisjointFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// `c0` of the fit `root ~ c0 + c1/p`, or the last value when refused.
    pub limit: f64,
    pub c1: Option<f64>,
    pub refused: bool,
    pub model: String,
    pub rows_used: usize,
    pub residual_rms: f64,
    /// Largest deviation of the rows left out of the fit from the model.
    pub holdout_max_dev: f64,
    /// `c0` of `ln lambda = p ln c0 + a ln p + b` over all rows.
    pub log_power_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub space: String,
    pub k: usize,
    /// Ambient region for Dirichlet sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<usize>>,
    pub strategy: Strategy,
    pub seed: u64,
    /// `pack_{k+1}`, or `inpack_k(omega)` for Dirichlet sweeps.
    pub radius: f64,
    pub target: f64,
    pub rows: Vec<SweepRow>,
    pub extrapolation: Extrapolation,
    pub rel_error_at_pmax: f64,
    pub rel_error_extrapolated: f64,
    /// Violations of the per-row and column invariants, reported not hidden.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SweepOptions {
    /// Independent rows in parallel instead of the warm-started chain.
    pub parallel: bool,
}

fn check_p_list(p_list: &[f64]) -> Result<()> {
    if p_list.is_empty() {
        return Err(Error::InvalidArgument("p list is empty".into()));
    }
    for &p in p_list {
        check_exponent(p)?;
    }
    if p_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("p list must be strictly increasing".into()));
    }
    Ok(())
}

fn space_label(space: &MetricMeasureSpace) -> String {
    space
        .meta()
        .get("generator")
        .map(|g| g.to_string())
        .unwrap_or_else(|| format!("graph(n={}, edges={})", space.n(), space.edges().len()))
}

/// Fake spectra over the p grid against the target `1/pack_{k+1}`.
pub fn p_sweep(
    space: &MetricMeasureSpace,
    k: usize,
    p_list: &[f64],
    config: &FakeSpecConfig,
    options: SweepOptions,
) -> Result<SweepReport> {
    check_p_list(p_list)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let radius = pack_radius(space, k + 1, PackMode::Auto)?.radius;
    let bar = Problem::full(k, Objective::Max);
    let under = Problem::full(k, Objective::Mean);
    let rows = run_rows(space, &bar, &under, p_list, config, options, 1.0 / radius);
    Ok(finish(space, k, None, config, radius, rows))
}

/// Dirichlet fake spectra inside `omega` against `1/inpack_k(omega)`.
pub fn dirichlet_sweep(
    space: &MetricMeasureSpace,
    omega: &[usize],
    k: usize,
    p_list: &[f64],
    config: &FakeSpecConfig,
    options: SweepOptions,
) -> Result<SweepReport> {
    check_p_list(p_list)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let radius = inpack(space, omega, k)?.radius;
    let bar = Problem::dirichlet(omega, k, Objective::Max);
    let under = Problem::dirichlet(omega, k, Objective::Mean);
    let rows = run_rows(space, &bar, &under, p_list, config, options, 1.0 / radius);
    let mut omega = omega.to_vec();
    omega.sort_unstable();
    omega.dedup();
    Ok(finish(space, k, Some(omega), config, radius, rows))
}

fn run_rows(
    space: &MetricMeasureSpace,
    bar: &Problem,
    under: &Problem,
    p_list: &[f64],
    config: &FakeSpecConfig,
    options: SweepOptions,
    target: f64,
) -> Vec<SweepRow> {
    let one = |p: f64, warm_bar: Option<&DisjointFamily>, warm_under: Option<&DisjointFamily>| {
        let b = solve(space, bar, p, config, warm_bar);
        let u = solve(space, under, p, config, warm_under.or(b.as_ref().ok().map(|r| &r.family)));
        (b, u)
    };
    let results: Vec<(f64, Result<FakeSpecResult>, Result<FakeSpecResult>)> = if options.parallel {
        p_list
            .par_iter()
            .map(|&p| {
                let (b, u) = one(p, None, None);
                (p, b, u)
            })
            .collect()
    } else {
        let mut out = Vec::with_capacity(p_list.len());
        let (mut wb, mut wu): (Option<DisjointFamily>, Option<DisjointFamily>) = (None, None);
        for &p in p_list {
            let (b, u) = one(p, wb.as_ref(), wu.as_ref());
            if let Ok(r) = &b {
                wb = Some(r.family.clone());
            }
            if let Ok(r) = &u {
                wu = Some(r.family.clone());
            }
            out.push((p, b, u));
        }
        out
    };
    results
        .into_iter()
        .map(|(p, b, u)| make_row(p, b, u, target))
        .collect()
}

fn make_row(p: f64, bar: Result<FakeSpecResult>, under: Result<FakeSpecResult>, target: f64) -> SweepRow {
    match bar {
        Err(e) => SweepRow {
            p,
            lambda_bar_root: f64::NAN,
            lambda_under_root: f64::NAN,
            p_times_root: f64::NAN,
            bound_root: None,
            target,
            rel_err: f64::NAN,
            status: "error".into(),
            error: Some(e.to_string()),
            family: None,
        },
        Ok(b) => {
            // the mean on the bar family is itself an admissible value
            let under_root = match &under {
                Ok(u) => u.lambda_under_root.min(b.lambda_under_root),
                Err(_) => b.lambda_under_root,
            };
            SweepRow {
                p,
                lambda_bar_root: b.lambda_bar_root,
                lambda_under_root: under_root,
                p_times_root: p * b.lambda_bar_root,
                bound_root: b.packing_bound_root,
                target,
                rel_err: (b.lambda_bar_root - target).abs() / target,
                status: serde_json::to_value(b.status)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                error: under.err().map(|e| format!("lambda_under: {e}")),
                family: Some(b.family),
            }
        }
    }
}

fn finish(
    space: &MetricMeasureSpace,
    k: usize,
    omega: Option<Vec<usize>>,
    config: &FakeSpecConfig,
    radius: f64,
    rows: Vec<SweepRow>,
) -> SweepReport {
    let target = 1.0 / radius;
    let good: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error.is_none() && r.lambda_bar_root.is_finite())
        .map(|r| (r.p, r.lambda_bar_root))
        .collect();
    let extrapolation = convergence_estimate(&good);
    let mut violations = Vec::new();
    let tol = if config.strategy == Strategy::Exhaustive { 1e-12 } else { 1e-6 };
    for r in &rows {
        if let Some(e) = &r.error {
            violations.push(format!("p={}: {e}", r.p));
        }
        if r.lambda_under_root > r.lambda_bar_root * (1.0 + 1e-12) {
            violations.push(format!("p={}: lambda_under root exceeds lambda_bar root", r.p));
        }
        if let Some(b) = r.bound_root {
            if r.lambda_bar_root > b * (1.0 + tol) {
                violations.push(format!("p={}: lambda_bar root exceeds the packing bound", r.p));
            }
        }
    }
    for w in rows.windows(2) {
        if w[1].p_times_root < w[0].p_times_root * (1.0 - tol) {
            violations.push(format!(
                "p*root decreases from p={} to p={}: {} -> {}",
                w[0].p, w[1].p, w[0].p_times_root, w[1].p_times_root
            ));
        }
    }
    let last = good.last().map(|r| r.1).unwrap_or(f64::NAN);
    SweepReport {
        schema_version: SCHEMA_VERSION,
        space: space_label(space),
        k,
        omega,
        strategy: config.strategy,
        seed: config.seed(),
        radius,
        target,
        rel_error_at_pmax: (last - target).abs() / target,
        rel_error_extrapolated: (extrapolation.limit - target).abs() / target,
        rows,
        extrapolation,
        violations,
    }
}

/// Least-squares fit `root ~ c0 + c1/p` over the upper half of the rows
/// (at least two), with a log-power fit over all rows as a diagnostic.
/// Fewer than three rows: no fit, the last value is returned and flagged.
pub fn convergence_estimate(rows: &[(f64, f64)]) -> Extrapolation {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let last = rows.last().map(|r| r.1).unwrap_or(f64::NAN);
    if rows.len() < 3 {
        return Extrapolation {
            limit: last,
            c1: None,
            refused: true,
            model: "c0 + c1/p".into(),
            rows_used: rows.len(),
            residual_rms: f64::NAN,
            holdout_max_dev: f64::NAN,
            log_power_limit: None,
        };
    }
    let used = rows.len().div_ceil(2).max(2);
    let fit = &rows[rows.len() - used..];
    let xs: Vec<f64> = fit.iter().map(|r| 1.0 / r.0).collect();
    let ys: Vec<f64> = fit.iter().map(|r| r.1).collect();
    let (c0, c1) = linear_fit(&xs, &ys);
    let model = |p: f64| c0 + c1 / p;
    let residual_rms = (fit.iter().map(|r| (r.1 - model(r.0)).powi(2)).sum::<f64>() / used as f64).sqrt();
    let holdout_max_dev = rows[..rows.len() - used]
        .iter()
        .map(|r| (r.1 - model(r.0)).abs())
        .fold(0.0, f64::max);
    Extrapolation {
        limit: c0,
        c1: Some(c1),
        refused: false,
        model: "c0 + c1/p".into(),
        rows_used: used,
        residual_rms,
        holdout_max_dev,
        log_power_limit: log_power_fit(&rows),
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// `ln root = ln c0 + a ln(p)/p + b/p`, the form of the one-dimensional
/// closed form, solved by least squares.
fn log_power_fit(rows: &[(f64, f64)]) -> Option<f64> {
    if rows.len() < 3 || rows.iter().any(|r| !(r.1 > 0.0)) {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), 3, |i, j| {
        let p = rows[i].0;
        match j {
            0 => 1.0,
            1 => p.ln() / p,
            _ => 1.0 / p,
        }
    });
    let b = nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1.ln()));
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    Some(sol[0].exp())
}

/// Sweep rows as CSV with a leading schema column.
pub fn sweep_csv(report: &SweepReport) -> Result<String> {
    #[derive(Serialize)]
    struct Line {
        schema_version: u32,
        p: f64,
        lambda_bar_root: f64,
        lambda_under_root: f64,
        p_times_root: f64,
        bound_root: Option<f64>,
        target: f64,
        rel_err: f64,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(Line {
            schema_version: report.schema_version,
            p: r.p,
            lambda_bar_root: r.lambda_bar_root,
            lambda_under_root: r.lambda_under_root,
            p_times_root: r.p_times_root,
            bound_root: r.bound_root,
            target: r.target,
            rel_err: r.rel_err,
        })
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub law: String,
    pub instance: String,
    pub k: usize,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Informational rows never count as violations.
    pub informational: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub space: String,
    pub rel_tol: f64,
    pub rows: Vec<AuditRow>,
    pub violations: usize,
}

impl AuditReport {
    pub fn failing(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| !r.pass && !r.informational)
    }
}

/// Audit with the default numerical solver.
pub fn audit(
    space: &MetricMeasureSpace,
    k_max: usize,
    p_list: &[f64],
    config: &FakeSpecConfig,
    rel_tol: f64,
) -> Result<AuditReport> {
    let mut energy = config.energy.clone();
    energy.split_components = false;
    audit_with(space, k_max, p_list, config, rel_tol, &InverseIteration { config: energy })
}

struct Rows<'a> {
    out: Vec<AuditRow>,
    tol: f64,
    instance: &'a str,
}

impl Rows<'_> {
    /// `lhs <= rhs` in log form, relative tolerance.
    fn le(&mut self, law: &str, k: usize, p: f64, lhs: f64, rhs: f64) {
        self.push(law, k, p, lhs, rhs, lhs <= rhs + self.tol, false);
    }

    fn push(&mut self, law: &str, k: usize, p: f64, lhs: f64, rhs: f64, pass: bool, informational: bool) {
        self.out.push(AuditRow {
            law: law.into(),
            instance: self.instance.into(),
            k,
            p,
            lhs,
            rhs,
            pass,
            informational,
        });
    }
}

/// Run the invariant suites for `k = 1..=k_max` over the p grid, every
/// eigenvalue coming from `solver`. Values are compared in log form, so the
/// tolerance is relative. Laws:
///
/// - `under_le_bar`, `bar_monotone_in_k`, `lindqvist_p_root`
/// - `inradius_le_pack` for the optimal families
/// - `union_bound` (and informational `union_equals_min`) for support pairs
/// - `domain_nested` for `U ⊂ V`, `domain_global` and `domain_disjoint_union`
/// - `span_norm`, `span_energy` at `1e-12`, `bar_le_packing_bound`
pub fn audit_with(
    space: &MetricMeasureSpace,
    k_max: usize,
    p_list: &[f64],
    config: &FakeSpecConfig,
    rel_tol: f64,
    solver: &dyn DirichletSolver,
) -> Result<AuditReport> {
    check_p_list(p_list)?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let label = space_label(space);
    let mut rows = Rows {
        out: Vec::new(),
        tol: rel_tol,
        instance: &label,
    };
    let n = space.n();
    let v_region: Vec<usize> = (0..n - 1).collect();
    let u_region: Vec<usize> = (1..n - 1).collect();
    let mut bar_roots: Vec<Vec<Option<f64>>> = vec![Vec::new(); k_max + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed(), 77));
    for &p in p_list {
        let eval = Evaluator::new(space, solver, p);
        let run = |problem: &Problem| fakespec::solve_with(space, problem, config, &eval, &eval, None);
        let mut bars: Vec<Option<FakeSpecResult>> = vec![None; k_max + 2];
        for k in 1..=k_max + 1 {
            bars[k] = feasible(run(&Problem::full(k, Objective::Max)))?;
        }
        for k in 1..=k_max {
            let Some(bar) = bars[k].clone() else {
                bar_roots[k].push(None);
                continue;
            };
            bar_roots[k].push(Some(bar.lambda_bar_root));
            let log_bar = bar.lambda_bar.ln();
            if let Some(under) = feasible(run(&Problem::full(k, Objective::Mean)))? {
                rows.le("under_le_bar", k, p, under.lambda_under.ln(), log_bar);
            }
            if let Some(next) = &bars[k + 1] {
                rows.le("bar_monotone_in_k", k, p, log_bar, next.lambda_bar.ln());
            }
            let pack = pack_radius(space, k + 1, PackMode::Exact)?.radius;
            let min_inrad = bar
                .family
                .supports
                .iter()
                .map(|s| inradius(space, s))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            rows.le("inradius_le_pack", k, p, min_inrad.ln(), pack.ln());
            let logs = &bar.per_set_log_lambda;
            for i in 0..bar.family.len() {
                for j in (i + 1)..bar.family.len() {
                    let mut union = bar.family.supports[i].clone();
                    union.extend(&bar.family.supports[j]);
                    union.sort_unstable();
                    let joint = solver.solve(space, &union, p)?.log_lambda;
                    rows.le("union_bound", k, p, joint, logs[i].max(logs[j]));
                    let min = logs[i].min(logs[j]);
                    rows.push("union_equals_min", k, p, joint, min, (joint - min).abs() <= 1e-6, true);
                }
            }
            if let (Some(v), Some(u)) = (
                feasible(run(&Problem::dirichlet(&v_region, k, Objective::Max)))?,
                feasible(run(&Problem::dirichlet(&u_region, k, Objective::Max)))?,
            ) {
                rows.le("domain_nested", k, p, v.lambda_bar.ln(), u.lambda_bar.ln());
            }
            if let Some(d) = feasible(run(&Problem::dirichlet(&v_region, k + 1, Objective::Max)))? {
                rows.le("domain_global", k, p, log_bar, d.lambda_bar.ln());
            }
            let mut union: Vec<usize> = bar.family.supports.iter().flatten().copied().collect();
            union.sort_unstable();
            if let Some(d) = feasible(run(&Problem::dirichlet(&union, k + 1, Objective::Max)))? {
                rows.le("domain_disjoint_union", k, p, d.lambda_bar.ln(), log_bar);
            }
            if let Some(bound) = bar.packing_bound {
                let certified = fakespec::packing_upper_bound(space, k, p)?.non_adjacent;
                if certified {
                    rows.le("bar_le_packing_bound", k, p, log_bar, bound.ln());
                }
            }
            let energy = config.energy.at_p(p);
            let functions = bar
                .family
                .supports
                .iter()
                .map(|s| dirichlet_eig1(space, s, &energy).map(|r| r.minimizer))
                .collect::<Result<Vec<_>>>()?;
            let weights: Vec<f64> = (0..bar.family.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let span = span_identity_residuals(space, &functions, &weights, p, logs)?;
            rows.push("span_norm", k, p, span.log_norm_lhs, span.log_norm_rhs, span.norm_rel_err <= 1e-12, false);
            rows.push(
                "span_energy",
                k,
                p,
                span.log_energy_lhs,
                span.log_energy_rhs,
                span.energy_rel_err <= 1e-12,
                false,
            );
        }
    }
    for (k, roots) in bar_roots.iter().enumerate().skip(1) {
        for i in 1..roots.len() {
            if let (Some(a), Some(b)) = (roots[i - 1], roots[i]) {
                let (pa, pb) = (p_list[i - 1], p_list[i]);
                rows.le("lindqvist_p_root", k, pb, (pa * a).ln(), (pb * b).ln());
            }
        }
    }
    let out = rows.out;
    let violations = out.iter().filter(|r| !r.pass && !r.informational).count();
    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        space: label,
        rel_tol,
        rows: out,
        violations,
    })
}

fn feasible(r: Result<FakeSpecResult>) -> Result<Option<FakeSpecResult>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RefinementKind {
    /// `lambda^D_{1,p}` of the interior of `interval(length, n)` against the
    /// closed form.
    IntervalDirichlet { length: f64 },
    /// Exact `pack_{k+1}` of `circle(length, n)` against `length/(2(k+1))`.
    CirclePack { length: f64 },
    /// Diameter of `theta_space(1/n)` against `pi + 2`.
    ThetaDiameter,
    /// `lambda_bar_{k,p}` root on `circle(length, n)` against equal arcs of
    /// length `length/(k+1)`.
    CircleFakeSpec { length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub n: usize,
    pub h: f64,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub schema_version: u32,
    pub kind: RefinementKind,
    pub k: usize,
    pub p: f64,
    pub rows: Vec<RefinementRow>,
    /// Slope of `ln |error|` against `ln h` over rows with nonzero error.
    pub order: Option<f64>,
}

pub fn refinement_study(
    kind: RefinementKind,
    n_list: &[usize],
    k: usize,
    p: f64,
    config: &FakeSpecConfig,
) -> Result<RefinementReport> {
    check_exponent(p)?;
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("n list is empty".into()));
    }
    let rows = n_list
        .iter()
        .map(|&n| refinement_row(kind, n, k, p, config))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.h.ln(), r.error.ln()))
        .collect();
    let order = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&xs, &ys).1
    });
    Ok(RefinementReport {
        schema_version: SCHEMA_VERSION,
        kind,
        k,
        p,
        rows,
        order,
    })
}

fn refinement_row(kind: RefinementKind, n: usize, k: usize, p: f64, config: &FakeSpecConfig) -> Result<RefinementRow> {
    let row = |h: f64, value: f64, reference: f64| RefinementRow {
        n,
        h,
        value,
        reference,
        error: (value - reference).abs() / reference.abs(),
    };
    match kind {
        RefinementKind::IntervalDirichlet { length } => {
            let s = generators::interval(length, n)?;
            let interior: Vec<usize> = (1..n - 1).collect();
            let value = dirichlet_eig1(&s, &interior, &config.energy.at_p(p))?.lambda;
            Ok(row(length / (n - 1) as f64, value, interval_eigenvalue(length, p)))
        }
        RefinementKind::CirclePack { length } => {
            let s = generators::circle(length, n)?;
            let value = pack_radius(&s, k + 1, PackMode::Exact)?.radius;
            Ok(row(length / n as f64, value, length / (2.0 * (k + 1) as f64)))
        }
        RefinementKind::ThetaDiameter => {
            let h = 1.0 / n as f64;
            let s = generators::theta_space(h)?;
            Ok(row(h, s.diameter(), std::f64::consts::PI + 2.0))
        }
        RefinementKind::CircleFakeSpec { length } => {
            let s = generators::circle(length, n)?;
            let r = fakespec::lambda_bar(&s, k, p, config)?;
            let arc = length / (k + 1) as f64;
            Ok(row(length / n as f64, r.lambda_bar_root, interval_eigenvalue(arc, p).powf(1.0 / p)))
        }
    }
}

/// Mean of `exp(logs)` in log form.
pub fn log_mean(logs: &[f64]) -> f64 {
    log_mean_exp(logs)
}
