use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use packspec::fakespec::{self, FakeSpecConfig, Objective, Problem, Strategy};
use packspec::morrey::{self, holder_check, morrey_constants_with, poincare_estimate, standard_test_family};
use packspec::packing::{pack_radius, PackMode};
use packspec::penergy::{dirichlet_eig1, EnergyConfig, SolveStatus};
use packspec::sweep::{self, RefinementKind, SweepOptions, SCHEMA_VERSION};
use packspec::{generators, Error, FunctionOnSpace, MetricMeasureSpace};
use serde::Serialize;
use serde_json::{json, Value};

mod output;

#[derive(Debug, Parser)]
#[command(name = "packspec", version, about = "Packing radii and fake p-Laplacian spectra on metric measure graphs")]
struct Cli {
    /// Worker threads for the solvers.
    #[arg(long, global = true, env = "PACKSPEC_THREADS")]
    threads: Option<usize>,
    /// Exit with status 2 when a solver did not converge.
    #[arg(long, global = true)]
    strict: bool,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a space file.
    #[command(subcommand)]
    Gen(GenSpec),
    /// Packing radius `pack_{k+1}`, or a CSV of `pack_k` over k.
    Pack(PackArgs),
    /// First Dirichlet eigenvalue of the p-Laplacian on a support.
    Eig(EigArgs),
    /// Fake spectra for one (k, p).
    Fakespec(FakeSpecArgs),
    /// Fake spectra over a p grid against the packing target.
    Sweep(SweepArgs),
    /// Invariant audit, one verdict per law and instance.
    Audit(AuditArgs),
    /// Mesh refinement study.
    Refine(RefineArgs),
    /// Morrey constants, or a Hölder check of a function.
    Morrey(MorreyArgs),
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GenSpec {
    Circle {
        #[arg(long = "L")]
        #[serde(rename = "L")]
        length: f64,
        #[arg(long)]
        n: usize,
    },
    Interval {
        #[arg(long = "L")]
        #[serde(rename = "L")]
        length: f64,
        #[arg(long)]
        n: usize,
    },
    Torus {
        #[arg(long = "L1")]
        #[serde(rename = "L1")]
        l1: f64,
        #[arg(long = "L2")]
        #[serde(rename = "L2")]
        l2: f64,
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
    },
    Theta {
        #[arg(long)]
        h: f64,
    },
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl GenSpec {
    fn build(&self) -> packspec::Result<MetricMeasureSpace> {
        match *self {
            GenSpec::Circle { length, n } => generators::circle(length, n),
            GenSpec::Interval { length, n } => generators::interval(length, n),
            GenSpec::Torus { l1, l2, n1, n2 } => generators::torus_grid(l1, l2, n1, n2),
            GenSpec::Theta { h } => generators::theta_space(h),
            GenSpec::Random { n, radius, seed } => generators::random_geometric(n, radius, seed),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SpaceArg {
    /// Space file, or a generator spec such as `circle:L=6.2831853,n=128`.
    #[arg(long)]
    space: String,
}

impl SpaceArg {
    fn load(&self) -> packspec::Result<MetricMeasureSpace> {
        let path = std::path::Path::new(&self.space);
        if path.exists() {
            return MetricMeasureSpace::load(path);
        }
        match self.space.split_once(':') {
            Some((kind, params)) => parse_generator(kind, params)?.build(),
            None => Err(Error::Io(format!("space file {:?} not found", self.space))),
        }
    }
}

fn parse_generator(kind: &str, params: &str) -> packspec::Result<GenSpec> {
    let mut map = std::collections::BTreeMap::new();
    for item in params.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("generator parameter {item:?} is not key=value")))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    let num = |key: &str| -> packspec::Result<f64> {
        map.get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("generator {kind} needs {key}")))?
            .parse::<f64>()
            .map_err(|e| Error::InvalidArgument(format!("{key}: {e}")))
    };
    let int = |key: &str| -> packspec::Result<usize> {
        map.get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("generator {kind} needs {key}")))?
            .parse::<usize>()
            .map_err(|e| Error::InvalidArgument(format!("{key}: {e}")))
    };
    Ok(match kind {
        "circle" => GenSpec::Circle { length: num("L")?, n: int("n")? },
        "interval" => GenSpec::Interval { length: num("L")?, n: int("n")? },
        "torus" => GenSpec::Torus {
            l1: num("L1")?,
            l2: num("L2")?,
            n1: int("n1")?,
            n2: int("n2")?,
        },
        "theta" => GenSpec::Theta { h: num("h")? },
        "random" => GenSpec::Random {
            n: int("n")?,
            radius: num("radius")?,
            seed: if map.contains_key("seed") { int("seed")? as u64 } else { 0 },
        },
        other => return Err(Error::InvalidArgument(format!("unknown generator {other:?}"))),
    })
}

#[derive(Debug, Args, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
}

impl SolverArgs {
    fn energy(&self, p: f64) -> EnergyConfig {
        let mut e = EnergyConfig::new(p).with_seed(self.seed).with_tol(self.tol).with_restarts(self.restarts);
        e.max_iter = self.max_iter;
        e
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum StrategyArg {
    Exhaustive,
    Local,
    Anneal,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Exhaustive => Strategy::Exhaustive,
            StrategyArg::Local => Strategy::Local,
            StrategyArg::Anneal => Strategy::Anneal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Exact,
    Greedy,
    Auto,
}

impl From<ModeArg> for PackMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => PackMode::Exact,
            ModeArg::Greedy => PackMode::Greedy,
            ModeArg::Auto => PackMode::Auto,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct PackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArg,
    /// Computes `pack_{k+1}`.
    #[arg(long, required_unless_present = "sweep_k")]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    /// CSV rows `(k, pack_k, k * pack_k^dim)` for `k = 2..=K`.
    #[arg(long)]
    sweep_k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    dim: u32,
}

#[derive(Debug, Args, Serialize)]
struct EigArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArg,
    /// Comma separated vertex indices.
    #[arg(long, value_delimiter = ',', required = true)]
    support: Vec<usize>,
    #[arg(long)]
    p: f64,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Include the minimizer in the output.
    #[arg(long)]
    minimizer: bool,
}

#[derive(Debug, Args, Serialize)]
struct FakeSpecArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArg,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Local)]
    strategy: StrategyArg,
    /// Dirichlet variant inside this vertex set.
    #[arg(long, value_delimiter = ',')]
    omega: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArg,
    #[arg(long)]
    k: usize,
    /// Comma separated, increasing.
    #[arg(long = "p", value_delimiter = ',', required = true)]
    p_list: Vec<f64>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Local)]
    strategy: StrategyArg,
    #[arg(long, value_delimiter = ',')]
    omega: Option<Vec<usize>>,
    /// Independent rows in parallel instead of the warm-started chain.
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args, Serialize)]
struct AuditArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArg,
    #[arg(long)]
    k_max: usize,
    #[arg(long = "p", value_delimiter = ',', required = true)]
    p_list: Vec<f64>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Exhaustive)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RefineKindArg {
    IntervalDirichlet,
    CirclePack,
    ThetaDiameter,
    CircleFakespec,
}

#[derive(Debug, Args, Serialize)]
struct RefineArgs {
    #[arg(long, value_enum)]
    kind: RefineKindArg,
    #[arg(long = "L", default_value_t = std::f64::consts::TAU)]
    #[serde(rename = "L")]
    length: f64,
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Local)]
    strategy: StrategyArg,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
struct MorreyArgs {
    #[command(subcommand)]
    check: Option<MorreySub>,
    #[command(flatten)]
    constants: Option<ConstantArgs>,
}

#[derive(Debug, Args, Serialize)]
struct ConstantArgs {
    #[arg(long)]
    cd: f64,
    #[arg(long)]
    cp: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    p0: f64,
    #[arg(long, default_value_t = 1.0)]
    diam: f64,
}

#[derive(Debug, Subcommand)]
enum MorreySub {
    /// Hölder check of a function against the Morrey bound.
    Check(CheckArgs),
}

#[derive(Debug, Args, Serialize)]
struct CheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArg,
    /// JSON file with an array of values, or comma separated values.
    #[arg(long)]
    f: String,
    #[arg(long)]
    p: f64,
    /// Doubling constant; computed from the space when omitted.
    #[arg(long)]
    cd: Option<f64>,
    /// Poincaré constant; estimated from a test family when omitted.
    #[arg(long)]
    cp: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    p0: f64,
    #[arg(long, default_value_t = 1.0)]
    safety: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

/// Result of a command: the document to emit and whether every solve converged.
struct Outcome {
    body: String,
    converged: bool,
}

fn json_doc(command: &str, config: Value, result: Value) -> String {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn fakespec_config(strategy: StrategyArg, solver: &SolverArgs, p: f64) -> FakeSpecConfig {
    FakeSpecConfig::new(strategy.into(), solver.energy(p))
}

fn csv_refused(format: Format, command: &str) -> packspec::Result<()> {
    if format == Format::Csv {
        return Err(Error::InvalidArgument(format!("{command} has no CSV output")));
    }
    Ok(())
}

fn run(cli: &Cli) -> packspec::Result<Outcome> {
    let ok = |body| Ok(Outcome { body, converged: true });
    match &cli.command {
        Command::Gen(spec) => {
            csv_refused(cli.format, "gen")?;
            let mut body = spec.build()?.to_json()?;
            body.push('\n');
            ok(body)
        }
        Command::Pack(a) => {
            let space = a.space.load()?;
            if let Some(k_max) = a.sweep_k {
                if k_max < 2 {
                    return Err(Error::InvalidArgument("--sweep-k needs K >= 2".into()));
                }
                let mut body = format!("schema_version,k,pack_k,k_pack_k_pow_{}\n", a.dim);
                for k in 2..=k_max.min(space.n()) {
                    let r = pack_radius(&space, k, a.mode.into())?.radius;
                    body.push_str(&format!(
                        "{SCHEMA_VERSION},{k},{r},{}\n",
                        k as f64 * r.powi(a.dim as i32)
                    ));
                }
                return ok(body);
            }
            csv_refused(cli.format, "pack")?;
            let k = a.k.expect("clap requires k without --sweep-k");
            let r = pack_radius(&space, k + 1, a.mode.into())?;
            ok(json_doc("pack", to_value(a), to_value(&r)))
        }
        Command::Eig(a) => {
            csv_refused(cli.format, "eig")?;
            let space = a.space.load()?;
            let r = dirichlet_eig1(&space, &a.support, &a.solver.energy(a.p))?;
            let mut result = json!({
                "lambda": r.lambda,
                "log_lambda": r.log_lambda,
                "lambda_root": r.lambda_root,
                "status": r.status,
                "iterations": r.iterations,
                "restart_spread": r.restart_spread,
            });
            if a.minimizer {
                result["minimizer"] = to_value(&r.minimizer);
            }
            Ok(Outcome {
                body: json_doc("eig", to_value(a), result),
                converged: r.status == SolveStatus::Converged,
            })
        }
        Command::Fakespec(a) => {
            csv_refused(cli.format, "fakespec")?;
            let space = a.space.load()?;
            let config = fakespec_config(a.strategy, &a.solver, a.p);
            let (bar, under) = match &a.omega {
                Some(omega) => (
                    Problem::dirichlet(omega, a.k, Objective::Max),
                    Problem::dirichlet(omega, a.k, Objective::Mean),
                ),
                None => (Problem::full(a.k, Objective::Max), Problem::full(a.k, Objective::Mean)),
            };
            let b = fakespec::solve(&space, &bar, a.p, &config, None)?;
            let u = fakespec::solve(&space, &under, a.p, &config, Some(&b.family))?;
            let converged = b.status == SolveStatus::Converged && u.status == SolveStatus::Converged;
            let result = json!({
                "lambda_bar": b.lambda_bar,
                "lambda_under": u.lambda_under.min(b.lambda_under),
                "lambda_bar_root": b.lambda_bar_root,
                "lambda_under_root": u.lambda_under_root.min(b.lambda_under_root),
                "family": b.family,
                "per_set_lambda": b.per_set_lambda,
                "certificate": b.certificate,
                "under_certificate": u.certificate,
                "packing_bound": b.packing_bound,
                "packing_bound_root": b.packing_bound_root,
                "status": b.status,
                "families_examined": b.families_examined,
                "under_family": u.family,
            });
            let mut cfg = to_value(a);
            cfg["search"] = to_value(&config);
            Ok(Outcome {
                body: json_doc("fakespec", cfg, result),
                converged,
            })
        }
        Command::Sweep(a) => {
            let space = a.space.load()?;
            let p0 = a.p_list.first().copied().unwrap_or(2.0);
            let config = fakespec_config(a.strategy, &a.solver, p0);
            let options = SweepOptions { parallel: a.parallel };
            let report = match &a.omega {
                Some(omega) => sweep::dirichlet_sweep(&space, omega, a.k, &a.p_list, &config, options)?,
                None => sweep::p_sweep(&space, a.k, &a.p_list, &config, options)?,
            };
            let converged = report.rows.iter().all(|r| r.status == "converged" && r.error.is_none());
            let body = match cli.format {
                Format::Csv => sweep::sweep_csv(&report)?,
                Format::Json => {
                    let mut cfg = to_value(a);
                    cfg["search"] = to_value(&config);
                    json_doc("sweep", cfg, to_value(&report))
                }
            };
            Ok(Outcome { body, converged })
        }
        Command::Audit(a) => {
            let space = a.space.load()?;
            let p0 = a.p_list.first().copied().unwrap_or(2.0);
            let config = fakespec_config(a.strategy, &a.solver, p0);
            let report = sweep::audit(&space, a.k_max, &a.p_list, &config, a.rel_tol)?;
            let body = match cli.format {
                Format::Csv => audit_csv(&report),
                Format::Json => json_doc("audit", to_value(a), to_value(&report)),
            };
            Ok(Outcome { body, converged: true })
        }
        Command::Refine(a) => {
            csv_refused(cli.format, "refine")?;
            let kind = match a.kind {
                RefineKindArg::IntervalDirichlet => RefinementKind::IntervalDirichlet { length: a.length },
                RefineKindArg::CirclePack => RefinementKind::CirclePack { length: a.length },
                RefineKindArg::ThetaDiameter => RefinementKind::ThetaDiameter,
                RefineKindArg::CircleFakespec => RefinementKind::CircleFakeSpec { length: a.length },
            };
            let config = fakespec_config(a.strategy, &a.solver, a.p);
            let report = sweep::refinement_study(kind, &a.n_list, a.k, a.p, &config)?;
            ok(json_doc("refine", to_value(a), to_value(&report)))
        }
        Command::Morrey(m) => {
            csv_refused(cli.format, "morrey")?;
            match (&m.check, &m.constants) {
                (Some(MorreySub::Check(c)), _) => morrey_check(c),
                (None, Some(c)) => {
                    let r = morrey_constants_with(c.cd, c.cp, c.sigma, c.p, c.p0, c.diam)?;
                    ok(json_doc("morrey", to_value(c), to_value(&r)))
                }
                (None, None) => Err(Error::InvalidArgument("morrey needs --cd --cp --p or `check`".into())),
            }
        }
    }
}

fn morrey_check(c: &CheckArgs) -> packspec::Result<Outcome> {
    let space = c.space.load()?;
    let values: Vec<f64> = if std::path::Path::new(&c.f).exists() {
        let text = std::fs::read_to_string(&c.f).map_err(|e| Error::Io(format!("{}: {e}", c.f)))?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", c.f)))?
    } else {
        parse_f64_list(&c.f).map_err(Error::InvalidArgument)?
    };
    let f = FunctionOnSpace::new(&space, values)?;
    let c_d = c.cd.unwrap_or_else(|| space.doubling_constant());
    let poincare = match c.cp {
        Some(_) => None,
        None => Some(poincare_estimate(&space, c.p0, c.sigma, &standard_test_family(&space, c.seed))?),
    };
    let c_p = c.cp.unwrap_or_else(|| poincare.as_ref().map_or(1.0, |d| d.c_p));
    let constants = morrey_constants_with(c_d, c_p, c.sigma, c.p, c.p0, space.diameter())?;
    let report = holder_check(&space, &f, c.p, &constants, c.safety)?;
    let volume = morrey::volume_comparison_check(&space, c_d)?;
    let result = json!({
        "holder": report,
        "constants": constants,
        "poincare": poincare,
        "volume_comparison": volume,
    });
    Ok(Outcome {
        body: json_doc("morrey check", to_value(c), result),
        converged: true,
    })
}

fn audit_csv(report: &sweep::AuditReport) -> String {
    let mut s = String::from("schema_version,law,instance,k,p,lhs,rhs,pass,informational\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{},{},\"{}\",{},{},{},{},{},{}\n",
            report.schema_version,
            r.law,
            r.instance.replace('"', "\"\""),
            r.k,
            r.p,
            r.lhs,
            r.rhs,
            r.pass,
            r.informational
        ));
    }
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = output::emit(cli.out.as_deref(), &outcome.body) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if cli.strict && !outcome.converged {
        eprintln!("error: a solver did not converge");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
