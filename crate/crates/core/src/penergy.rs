//! Discrete p-energy, p-norms, Rayleigh quotients and the first Dirichlet
//! eigenvalue of the graph p-Laplacian.
//!
//! For a space with vertex measure `m` and edge measure `mu`,
//!
//! ```text
//! ||f||_p^p = sum_x m_x |f(x)|^p
//! E_p(f)    = sum_e mu_e (|f(u) - f(v)| / len_e)^p
//! R_p(f)    = E_p(f) / ||f||_p^p
//! ```
//!
//! Sums are evaluated after factoring out the largest term, so they can be
//! carried in the log domain for exponents where `|slope|^p` would overflow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::EnvelopeCholesky;
use crate::space::{FunctionOnSpace, MetricMeasureSpace};

/// Largest supported exponent.
pub const MAX_P: f64 = 256.0;

const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub p: f64,
    /// Relative decrease of the Rayleigh quotient below which a run stops.
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Form `lambda^(1/p)` from `ln(lambda)` instead of from `lambda`.
    pub log_domain: bool,
    /// Solve each connected component of a support separately.
    pub split_components: bool,
}

impl EnergyConfig {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            tol: 1e-8,
            max_iter: 20_000,
            restarts: 8,
            seed: 0,
            log_domain: p >= 32.0,
            split_components: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    /// Same settings at a different exponent.
    pub fn at_p(&self, p: f64) -> Self {
        Self {
            p,
            log_domain: p >= 32.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p <= MAX_P) {
        return Err(Error::InvalidArgument(format!(
            "exponent p must lie in (1, {MAX_P}], got {p}"
        )));
    }
    Ok(())
}

/// `2 pi (p-1)^(1/p) / (p sin(pi/p))`.
pub fn pi_p(p: f64) -> f64 {
    use std::f64::consts::PI;
    2.0 * PI * (p - 1.0).powf(1.0 / p) / (p * (PI / p).sin())
}

/// First Dirichlet eigenvalue of the p-Laplacian on an interval of length
/// `length`: `(pi_p / length)^p`.
pub fn interval_eigenvalue(length: f64, p: f64) -> f64 {
    (pi_p(p) / length).powf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Degenerate,
    /// Converged, but restarts disagreed by more than `10 * tol`.
    RestartSpread,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda: f64,
    pub log_lambda: f64,
    pub lambda_root: f64,
    pub minimizer: FunctionOnSpace,
    pub iterations: usize,
    pub status: SolveStatus,
    pub restart_spread: f64,
}

/// `ln sum_i w_i |a_i|^p`, with `-inf` for an all-zero vector.
fn log_power_sum<I>(items: I, p: f64) -> f64
where
    I: Iterator<Item = (f64, f64)> + Clone,
{
    let top = items
        .clone()
        .filter(|&(w, _)| w > 0.0)
        .fold(0.0, |m: f64, (_, a)| m.max(a.abs()));
    if top == 0.0 {
        return f64::NEG_INFINITY;
    }
    let s: f64 = items.map(|(w, a)| w * (a.abs() / top).powf(p)).sum();
    p * top.ln() + s.ln()
}

fn check_positive_exponent(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent must be positive, got {p}")));
    }
    Ok(())
}

/// `ln ||f||_p^p`.
pub fn log_norm_pow(space: &MetricMeasureSpace, f: &FunctionOnSpace, p: f64) -> f64 {
    log_power_sum(space.measure().iter().copied().zip(f.values().iter().copied()), p)
}

/// `||f||_p` with respect to the vertex measure.
pub fn p_norm(space: &MetricMeasureSpace, f: &FunctionOnSpace, p: f64) -> Result<f64> {
    check_positive_exponent(p)?;
    Ok((log_norm_pow(space, f, p) / p).exp())
}

/// `ln E_p(f)`.
pub fn log_p_energy(space: &MetricMeasureSpace, f: &FunctionOnSpace, p: f64) -> f64 {
    log_power_sum(
        space
            .edges()
            .iter()
            .map(|e| (e.measure, (f[e.u] - f[e.v]) / e.length)),
        p,
    )
}

pub fn p_energy(space: &MetricMeasureSpace, f: &FunctionOnSpace, p: f64) -> Result<f64> {
    check_positive_exponent(p)?;
    Ok(log_p_energy(space, f, p).exp())
}

/// Edge-gradient norm `E_p(f)^(1/p)`.
pub fn gradient_norm(space: &MetricMeasureSpace, f: &FunctionOnSpace, p: f64) -> Result<f64> {
    check_positive_exponent(p)?;
    Ok((log_p_energy(space, f, p) / p).exp())
}

pub fn log_rayleigh(space: &MetricMeasureSpace, f: &FunctionOnSpace, p: f64) -> Result<f64> {
    check_positive_exponent(p)?;
    let den = log_norm_pow(space, f, p);
    if den == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("Rayleigh quotient of the zero function".into()));
    }
    Ok(log_p_energy(space, f, p) - den)
}

/// `E_p(f) / ||f||_p^p`; scale invariant in `f`.
pub fn rayleigh(space: &MetricMeasureSpace, f: &FunctionOnSpace, p: f64) -> Result<f64> {
    Ok(log_rayleigh(space, f, p)?.exp())
}

/// Cone `max(r - dist(x, .), 0)`.
pub fn cone_function(space: &MetricMeasureSpace, x: usize, r: f64) -> FunctionOnSpace {
    FunctionOnSpace::from_vec_unchecked(
        space.dist_row(x).iter().map(|&d| (r - d).max(0.0)).collect(),
    )
}

/// Check that `support` is a nonempty proper subset of distinct vertices;
/// returns it sorted.
pub(crate) fn validate_support(space: &MetricMeasureSpace, support: &[usize]) -> Result<Vec<usize>> {
    if support.is_empty() {
        return Err(Error::InvalidArgument("support is empty".into()));
    }
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != support.len() {
        return Err(Error::InvalidArgument("support has repeated vertices".into()));
    }
    if let Some(&x) = s.last() {
        if x >= space.n() {
            return Err(Error::InvalidArgument(format!(
                "support vertex {x} outside 0..{}",
                space.n()
            )));
        }
    }
    if s.len() == space.n() {
        return Err(Error::InvalidArgument(
            "support must be a proper subset (its complement carries the boundary)".into(),
        ));
    }
    Ok(s)
}

/// First Dirichlet eigenvalue `inf R_p(f)` over `f` vanishing outside `support`.
///
/// Each connected component is solved by nonlinear inverse iteration: the
/// next iterate minimizes the convex functional `E_p(v)/p - <m u^(p-1), v>`
/// (damped Newton with backtracking), is projected onto the nonnegative
/// cone and normalized in sup norm. Every step decreases the quotient, and
/// the run stops once the relative decrease drops below `tol`. Restart 0
/// starts from the cone at the inradius center; the others from seeded
/// random nonnegative vectors.
pub fn dirichlet_eig1(
    space: &MetricMeasureSpace,
    support: &[usize],
    config: &EnergyConfig,
) -> Result<EigenResult> {
    config.validate()?;
    let support = validate_support(space, support)?;
    let pieces = if config.split_components {
        space.components(&support)
    } else {
        vec![support]
    };
    let mut best: Option<(ComponentSolution, Vec<usize>)> = None;
    let mut iterations = 0;
    for piece in pieces {
        let sol = solve_component(space, &piece, config)?;
        iterations += sol.iterations;
        if best.as_ref().is_none_or(|(b, _)| sol.log_lambda < b.log_lambda) {
            best = Some((sol, piece));
        }
    }
    let (sol, piece) = best.expect("support is nonempty");
    let mut values = vec![0.0; space.n()];
    for (i, &x) in piece.iter().enumerate() {
        values[x] = sol.values[i];
    }
    let p = config.p;
    let lambda = sol.log_lambda.exp();
    let lambda_root = if config.log_domain {
        (sol.log_lambda / p).exp()
    } else {
        lambda.powf(1.0 / p)
    };
    Ok(EigenResult {
        lambda,
        log_lambda: sol.log_lambda,
        lambda_root,
        minimizer: FunctionOnSpace::from_vec_unchecked(values),
        iterations,
        status: sol.status,
        restart_spread: sol.spread,
    })
}

/// Exact `p = 2` Dirichlet eigenvalue from a dense symmetric eigensolve of
/// `M^(-1/2) K M^(-1/2)` on the support.
pub fn linear_dirichlet_eig1(space: &MetricMeasureSpace, support: &[usize]) -> Result<f64> {
    let support = validate_support(space, support)?;
    let k = support.len();
    let mut local = vec![usize::MAX; space.n()];
    for (i, &x) in support.iter().enumerate() {
        local[x] = i;
    }
    let mut stiff = nalgebra::DMatrix::<f64>::zeros(k, k);
    for e in space.edges() {
        let w = e.measure / (e.length * e.length);
        let (a, b) = (local[e.u], local[e.v]);
        if a != usize::MAX {
            stiff[(a, a)] += w;
        }
        if b != usize::MAX {
            stiff[(b, b)] += w;
        }
        if a != usize::MAX && b != usize::MAX {
            stiff[(a, b)] -= w;
            stiff[(b, a)] -= w;
        }
    }
    let scale: Vec<f64> = support.iter().map(|&x| space.measure()[x].sqrt().recip()).collect();
    let sym = nalgebra::DMatrix::from_fn(k, k, |i, j| stiff[(i, j)] * scale[i] * scale[j]);
    let eig = nalgebra::SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

struct ComponentSolution {
    values: Vec<f64>,
    log_lambda: f64,
    iterations: usize,
    status: SolveStatus,
    spread: f64,
}

/// Seed for restart `index` of a run seeded with `seed`.
pub(crate) fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn solve_component(
    space: &MetricMeasureSpace,
    piece: &[usize],
    config: &EnergyConfig,
) -> Result<ComponentSolution> {
    let problem = LocalProblem::new(space, piece, config.p);
    let complement = space.complement(piece);
    let (center, depth) = piece
        .iter()
        .map(|&x| (x, space.dist_to_set(x, &complement)))
        .fold((piece[0], f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    let runs: Vec<Outcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let start: Vec<f64> = if r == 0 {
                piece
                    .iter()
                    .map(|&x| (depth - space.dist(center, x)).max(0.0))
                    .collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, r as u64));
                piece.iter().map(|_| rng.random_range(0.05..=1.0)).collect()
            };
            problem.clone().run(start, config)
        })
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.log_lambda < runs[best].log_lambda {
            best = i;
        }
    }
    let finite: Vec<f64> = runs
        .iter()
        .map(|r| r.log_lambda)
        .filter(|l| l.is_finite())
        .collect();
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rel_spread = if finite.is_empty() { 0.0 } else { (hi - lo).exp_m1() };
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let chosen = runs.into_iter().nth(best).expect("at least one restart");
    let mut status = chosen.status;
    if status == SolveStatus::Converged && rel_spread > 10.0 * config.tol {
        status = SolveStatus::RestartSpread;
    }
    if !chosen.log_lambda.is_finite() {
        return Err(Error::Numerical(format!(
            "Dirichlet solve on a support of {} vertices produced a non-finite quotient",
            piece.len()
        )));
    }
    Ok(ComponentSolution {
        spread: chosen.log_lambda.exp() * rel_spread,
        values: chosen.values,
        log_lambda: chosen.log_lambda,
        iterations,
        status,
    })
}

struct Outcome {
    values: Vec<f64>,
    log_lambda: f64,
    iterations: usize,
    status: SolveStatus,
}

/// Dirichlet problem restricted to one vertex set, in local indices.
#[derive(Clone)]
struct LocalProblem {
    p: f64,
    mass: Vec<f64>,
    /// `(a, b, mu, len)` for edges inside the set.
    internal: Vec<(usize, usize, f64, f64)>,
    /// `(a, mu, len)` for edges leaving the set.
    boundary: Vec<(usize, f64, f64)>,
    chol: EnvelopeCholesky,
}

impl LocalProblem {
    fn new(space: &MetricMeasureSpace, set: &[usize], p: f64) -> Self {
        let mut local = vec![usize::MAX; space.n()];
        for (i, &x) in set.iter().enumerate() {
            local[x] = i;
        }
        let mut internal = Vec::new();
        let mut boundary = Vec::new();
        for e in space.edges() {
            match (local[e.u], local[e.v]) {
                (usize::MAX, usize::MAX) => {}
                (a, usize::MAX) | (usize::MAX, a) => boundary.push((a, e.measure, e.length)),
                (a, b) => internal.push((a, b, e.measure, e.length)),
            }
        }
        let pairs: Vec<(usize, usize)> = internal.iter().map(|&(a, b, _, _)| (a, b)).collect();
        Self {
            p,
            mass: set.iter().map(|&x| space.measure()[x]).collect(),
            internal,
            boundary,
            chol: EnvelopeCholesky::new(set.len(), &pairs),
        }
    }

    fn slopes<'a>(&'a self, v: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + Clone + 'a {
        self.internal
            .iter()
            .map(move |&(a, b, mu, len)| (mu, (v[a] - v[b]) / len))
            .chain(self.boundary.iter().map(move |&(a, mu, len)| (mu, v[a] / len)))
    }

    fn log_energy(&self, v: &[f64]) -> f64 {
        log_power_sum(self.slopes(v), self.p)
    }

    fn log_rayleigh(&self, v: &[f64]) -> f64 {
        self.log_energy(v) - log_power_sum(self.mass.iter().copied().zip(v.iter().copied()), self.p)
    }

    /// `E_p(v)/p - <b, v>` in the linear domain (may be `+inf`).
    fn objective(&self, b: &[f64], v: &[f64]) -> f64 {
        let p = self.p;
        let e: f64 = self.slopes(v).map(|(mu, s)| mu * s.abs().powf(p)).sum();
        e / p - b.iter().zip(v).map(|(x, y)| x * y).sum::<f64>()
    }

    /// `|s|^(p-2)`, regularized at zero when `p < 2`.
    fn weight(&self, s: f64, eps: f64) -> f64 {
        if self.p >= 2.0 {
            s.abs().powf(self.p - 2.0)
        } else {
            (s * s + eps * eps).powf(0.5 * (self.p - 2.0))
        }
    }

    /// Minimize `E_p(v)/p - <b, v>` by damped Newton steps starting at `v`.
    fn newton(&mut self, b: &[f64], v: &mut [f64]) {
        let n = v.len();
        let p = self.p;
        let mut grad = vec![0.0; n];
        let mut step = vec![0.0; n];
        let mut trial = vec![0.0; n];
        for _ in 0..MAX_NEWTON {
            let eps = 1e-8 * self.slopes(v).fold(0.0, |m: f64, (_, s)| m.max(s.abs()));
            grad.iter_mut().zip(b).for_each(|(g, bi)| *g = -bi);
            self.chol.clear();
            for i in 0..self.internal.len() {
                let (a, c, mu, len) = self.internal[i];
                let s = (v[a] - v[c]) / len;
                let q = mu * self.weight(s, eps);
                let flux = q * s / len;
                grad[a] += flux;
                grad[c] -= flux;
                let h = (p - 1.0) * q / (len * len);
                self.chol.add(a, a, h);
                self.chol.add(c, c, h);
                self.chol.add(a, c, -h);
            }
            for i in 0..self.boundary.len() {
                let (a, mu, len) = self.boundary[i];
                let s = v[a] / len;
                let q = mu * self.weight(s, eps);
                grad[a] += q * s / len;
                self.chol.add(a, a, (p - 1.0) * q / (len * len));
            }
            let max_diag = (0..n).map(|a| self.chol.diagonal(a)).fold(0.0, f64::max);
            if !(max_diag > 0.0 && max_diag.is_finite()) {
                return;
            }
            let saved = self.chol.clone();
            let mut shift = 1e-13 * max_diag;
            loop {
                for a in 0..n {
                    self.chol.add(a, a, shift);
                }
                if self.chol.factor().is_ok() {
                    break;
                }
                self.chol = saved.clone();
                shift *= 100.0;
                if shift > 1e3 * max_diag {
                    return;
                }
            }
            step.iter_mut().zip(&grad).for_each(|(s, g)| *s = -g);
            self.chol.solve(&mut step);
            let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            let scale: f64 = b.iter().zip(v.iter()).map(|(x, y)| x * y).sum::<f64>().abs();
            if !(slope < 0.0) || -slope <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
                return;
            }
            let phi0 = self.objective(b, v);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                trial.iter_mut().zip(v.iter()).zip(&step).for_each(|((x, vi), s)| *x = vi + t * s);
                let phi = self.objective(b, &trial);
                if phi <= phi0 + 1e-4 * t * slope {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return;
            }
            v.copy_from_slice(&trial);
            if -slope <= 1e-13 * scale {
                return;
            }
        }
    }

    /// One inverse-iteration run from a nonnegative start.
    fn run(mut self, start: Vec<f64>, config: &EnergyConfig) -> Outcome {
        let p = self.p;
        let mut u = start;
        normalize_sup(&mut u);
        let mut log_r = self.log_rayleigh(&u);
        if !log_r.is_finite() {
            return Outcome {
                values: u,
                log_lambda: log_r,
                iterations: 0,
                status: SolveStatus::Degenerate,
            };
        }
        let mut b = vec![0.0; u.len()];
        for it in 1..=config.max_iter {
            // right-hand side m u^(p-1), scaled to unit maximum
            let logs: Vec<f64> = self
                .mass
                .iter()
                .zip(&u)
                .map(|(&m, &x)| if x > 0.0 { m.ln() + (p - 1.0) * x.ln() } else { f64::NEG_INFINITY })
                .collect();
            let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            b.iter_mut().zip(&logs).for_each(|(bi, l)| *bi = (l - top).exp());
            // best multiple of u as the Newton starting point
            let log_bu = log_power_sum(b.iter().copied().zip(u.iter().copied()), 1.0);
            let c = ((log_bu - self.log_energy(&u)) / (p - 1.0)).exp();
            let mut v: Vec<f64> = u.iter().map(|x| c * x).collect();
            self.newton(&b, &mut v);
            v.iter_mut().for_each(|x| *x = x.max(0.0));
            if !normalize_sup(&mut v) {
                return Outcome {
                    values: u,
                    log_lambda: log_r,
                    iterations: it,
                    status: SolveStatus::Degenerate,
                };
            }
            let log_new = self.log_rayleigh(&v);
            if !log_new.is_finite() {
                return Outcome {
                    values: u,
                    log_lambda: log_r,
                    iterations: it,
                    status: SolveStatus::Degenerate,
                };
            }
            let decrease = -(log_new - log_r).exp_m1();
            if log_new <= log_r {
                u = v;
                log_r = log_new;
            }
            if decrease < config.tol {
                return Outcome {
                    values: u,
                    log_lambda: log_r,
                    iterations: it,
                    status: SolveStatus::Converged,
                };
            }
        }
        Outcome {
            values: u,
            log_lambda: log_r,
            iterations: config.max_iter,
            status: SolveStatus::MaxIter,
        }
    }
}

/// Scale to unit sup norm; false for the zero vector.
fn normalize_sup(v: &mut [f64]) -> bool {
    let top = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if !(top > 0.0 && top.is_finite()) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= top);
    true
}
