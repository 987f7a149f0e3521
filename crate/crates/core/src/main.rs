use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;

use mssa::bench::{run_heatshock, BenchConfig, Scale};
use mssa::kinetics::{ChannelSet, Kinetics};
use mssa::network::{
    first_timescale, parse_model, parse_output_expr, validate_assumptions, ReactionNetwork,
};
use mssa::oracle::{equivalence_check, Oracle};
use mssa::reduction::{second_timescale, simulate_reduced, Averaged, ReducedNetwork};
use mssa::report::{line, num, state, text};
use mssa::sensitivity::{cfd_full, full_vs_reduced_report, CfdConfig, SensitivityEstimate};
use mssa::ssa::{estimate_with, project, record_path, RngStream, Trajectory, DEFAULT_EVENT_CAP};
use mssa::stats::Z95;
use mssa::Error;

#[derive(Parser)]
#[command(
    name = "mssa",
    version,
    about = "Multiscale stochastic reaction networks"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the structural assumptions.
    Validate { model: PathBuf },
    /// Simulate one trajectory, or estimate E f(X(t)) with --samples.
    Simulate(SimulateArgs),
    /// Reduce a model and tabulate averaged rates on visited states.
    Reduce(ReduceArgs),
    /// Coupled finite-difference sensitivity on the full and/or reduced model.
    Sens(SensArgs),
    /// Occupation-time kernels on a fiber, or the W-process comparison.
    Oracle(OracleArgs),
    /// Built-in reproduction suite.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long = "N")]
    n: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Simulate the reduced model instead of the full one.
    #[arg(long)]
    reduced: bool,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    model: PathBuf,
    #[arg(long)]
    theta: Option<f64>,
    /// Horizon of the reduced paths used to visit states.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1)]
    paths: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SensMethod {
    Cfd,
    Reduced,
    Both,
}

#[derive(Args)]
struct SensArgs {
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = SensMethod::Reduced)]
    method: SensMethod,
    #[arg(long)]
    f: String,
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long = "rel-halfwidth", default_value_t = 0.05)]
    rel_halfwidth: f64,
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "max-samples", default_value_t = 10_000_000)]
    max_samples: u64,
    /// Central differences over (θ-h, θ+h).
    #[arg(long)]
    central: bool,
    /// Write 0 for wall_seconds so output depends only on inputs and seed.
    #[arg(long = "no-timing")]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    model: PathBuf,
    #[arg(long = "N")]
    n: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Reduced coordinate of the fiber (default: that of the initial state).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    v: Vec<i64>,
    /// Starting fiber state (default: initial state, or the first fiber state).
    #[arg(long, value_delimiter = ',')]
    z: Vec<i64>,
    #[arg(long = "t-grid", value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 1.0])]
    t_grid: Vec<f64>,
    /// Compare E f(X(t)) with the W-process estimate instead.
    #[arg(long)]
    compare: bool,
    #[arg(long)]
    f: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    t: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Heatshock,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::Heatshock)]
    suite: Suite,
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Also write wall-clock timings (not reproducible across runs).
    #[arg(long)]
    timings: bool,
}

/// Process exit status with a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. }
            | Error::Schema(_)
            | Error::Species(_)
            | Error::Value(_)
            | Error::Index { .. }
            | Error::Expr { .. }
            | Error::UnknownSpecies(_)
            | Error::Io(_) => 1,
            _ => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<u8, Failure>;

struct Context {
    verbose: bool,
}

impl Context {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("mssa: {}", msg.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("mssa: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let ctx = Context {
        verbose: cli.verbose,
    };
    let outcome = match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Reduce(a) => cmd_reduce(&ctx, a),
        Command::Sens(a) => cmd_sens(&ctx, a),
        Command::Oracle(a) => cmd_oracle(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("mssa: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// `MSSA_SEED` wins over the command line.
fn effective_seed(cli: u64) -> Result<u64, Failure> {
    match std::env::var("MSSA_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Failure {
            code: 1,
            message: format!("MSSA_SEED is not an unsigned integer: `{s}`"),
        }),
        Err(_) => Ok(cli),
    }
}

fn load(path: &Path) -> Result<ReactionNetwork, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_model(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| Failure {
            code: 1,
            message: format!("{}: {e}", p.display()),
        }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

/// Reference scale for full-model runs: the second time-scale when it
/// exists, else the first.
fn reference_scale(ctx: &Context, net: &ReactionNetwork) -> Rational64 {
    match second_timescale(net) {
        Ok(s) => s.gamma2,
        Err(e) => {
            ctx.log(format!("{e}; using the first time-scale"));
            first_timescale(net).0
        }
    }
}

fn cmd_validate(model: &Path) -> Outcome {
    let net = load(model)?;
    let report = validate_assumptions(&net);
    print!("{report}");
    Ok(if report.passed() { 0 } else { 2 })
}

fn trajectory_csv(names: &[String], traj: &Trajectory) -> String {
    let mut out = line(std::iter::once("time".to_string()).chain(names.iter().cloned()));
    for (t, x) in traj.jump_times.iter().zip(&traj.states) {
        out += &line(std::iter::once(num(*t)).chain(x.iter().map(|v| v.to_string())));
    }
    out
}

fn cmd_simulate(ctx: &Context, a: SimulateArgs) -> Outcome {
    let net = load(&a.model)?;
    let seed = effective_seed(a.seed)?;
    let theta = a.theta.unwrap_or(net.theta_nominal);
    let n = a.n.unwrap_or(net.n0 as f64);
    let shared = Arc::new(net.clone());
    let reduced = if a.reduced {
        Some(ReducedNetwork::new(shared)?)
    } else {
        None
    };
    let kin: &dyn Kinetics = match &reduced {
        Some(r) => r,
        None => &net,
    };
    let set = match &reduced {
        Some(r) => r.limit_channels(),
        None => ChannelSet::at_scale(&net, reference_scale(ctx, &net), n),
    };
    let Some(samples) = a.samples else {
        let traj = match &reduced {
            Some(r) => simulate_reduced(r, theta, a.t, RngStream::new(seed, 0))?,
            None => record_path(
                &net,
                &set,
                theta,
                net.x0.clone(),
                a.t,
                RngStream::new(seed, 0),
                DEFAULT_EVENT_CAP,
            )?,
        };
        ctx.log(format!("{} events", traj.reaction_log.len()));
        emit(
            a.out.as_deref(),
            &trajectory_csv(&kin.coordinate_names(), &traj),
        )?;
        return Ok(0);
    };
    let expr = a.f.as_deref().unwrap_or("x1");
    let f = parse_output_expr(expr, &net.species_names())?;
    let est = match &reduced {
        Some(r) => estimate_with(
            r,
            &set,
            theta,
            &Averaged { reduced: r, f: &f },
            a.t,
            samples,
            seed,
        )?,
        None => estimate_with(&net, &set, theta, &f, a.t, samples, seed)?,
    };
    let n_field = if reduced.is_some() {
        String::new()
    } else {
        num(n)
    };
    let mut body = line([
        "model",
        "f",
        "theta",
        "t",
        "N",
        "mean",
        "halfwidth95",
        "samples",
        "seed",
    ]);
    body += &line([
        if reduced.is_some() { "reduced" } else { "full" }.to_string(),
        text(expr),
        num(theta),
        num(a.t),
        n_field,
        num(est.mean),
        num(est.halfwidth95),
        est.samples.to_string(),
        seed.to_string(),
    ]);
    emit(a.out.as_deref(), &body)?;
    Ok(0)
}

fn cmd_reduce(ctx: &Context, a: ReduceArgs) -> Outcome {
    let net = load(&a.model)?;
    let seed = effective_seed(a.seed)?;
    let theta = a.theta.unwrap_or(net.theta_nominal);
    let reduced = ReducedNetwork::new(Arc::new(net.clone()))?;
    let scales = second_timescale(&net)?;
    for id in 0..a.paths {
        simulate_reduced(&reduced, theta, a.t, RngStream::new(seed, id))?;
    }
    ctx.log(format!("{} fibers visited", reduced.cached_fibers()));
    let list = |v: &[usize]| {
        v.iter()
            .map(|k| (k + 1).to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut body = String::new();
    body += &format!("# gamma1 = {}\n", scales.gamma1);
    body += &format!("# gamma2 = {}\n", scales.gamma2);
    body += &format!("# fast reactions = [{}]\n", list(&scales.fast));
    body += &format!("# gamma2 reactions = [{}]\n", list(&scales.gamma2_set));
    for (row, name) in reduced.m().iter().zip(reduced.coordinate_names()) {
        body += &format!("# M row {} = {name}\n", state(row));
    }
    for k in 0..reduced.channels() {
        let parent = reduced.channel(k);
        body += &format!(
            "# channel {} = reaction {}: {}\n",
            k + 1,
            parent + 1,
            net.equation(parent)
        );
    }
    let mut header: Vec<String> = reduced.coordinate_names();
    header.push("theta".into());
    for k in 1..=reduced.channels() {
        header.push(format!("rate{k}"));
        header.push(format!("drate{k}"));
    }
    body += &line(header);
    for (u, th, rates) in reduced.visited() {
        let mut fields: Vec<String> = u.iter().map(|v| v.to_string()).collect();
        fields.push(num(th));
        for (r, dr) in rates {
            fields.push(num(r));
            fields.push(num(dr));
        }
        body += &line(fields);
    }
    emit(a.out.as_deref(), &body)?;
    Ok(0)
}

fn sens_row(
    est: &SensitivityEstimate,
    f: &str,
    theta: f64,
    t: f64,
    n: Option<f64>,
    no_timing: bool,
) -> String {
    line([
        est.method.to_string(),
        text(f),
        num(theta),
        num(est.h),
        num(t),
        n.map(num).unwrap_or_default(),
        num(est.value),
        num(est.halfwidth95),
        est.samples.to_string(),
        num(if no_timing { 0.0 } else { est.wall_seconds }),
        est.seed.to_string(),
        est.converged.to_string(),
    ])
}

const SENS_HEADER: [&str; 12] = [
    "method",
    "f",
    "theta",
    "h",
    "t",
    "N",
    "value",
    "halfwidth95",
    "samples",
    "wall_seconds",
    "seed",
    "converged",
];

fn cmd_sens(ctx: &Context, a: SensArgs) -> Outcome {
    let net = load(&a.model)?;
    let seed = effective_seed(a.seed)?;
    let f = parse_output_expr(&a.f, &net.species_names())?;
    let theta = a.theta.unwrap_or(net.theta_nominal);
    let n_list = if a.n.is_empty() {
        vec![net.n0 as f64]
    } else {
        a.n.clone()
    };
    let cfg = CfdConfig {
        max_samples: a.max_samples,
        central: a.central,
        ..CfdConfig::new(theta, a.h, a.t, a.rel_halfwidth, seed)
    };
    let mut body = line(SENS_HEADER);
    let mut converged = true;
    let mut push = |est: &SensitivityEstimate, n: Option<f64>, body: &mut String| {
        ctx.log(format!(
            "{} N={:?}: {} ± {} ({} samples)",
            est.method, n, est.value, est.halfwidth95, est.samples
        ));
        converged &= est.converged;
        *body += &sens_row(est, &a.f, theta, a.t, n, a.no_timing);
    };
    match a.method {
        SensMethod::Cfd => {
            let gamma = reference_scale(ctx, &net);
            for &n in &n_list {
                let est = cfd_full(&net, gamma, n, &f, &cfg)?;
                push(&est, Some(n), &mut body);
            }
        }
        SensMethod::Reduced => {
            let reduced = ReducedNetwork::new(Arc::new(net.clone()))?;
            let est = mssa::sensitivity::cfd_reduced(&reduced, &f, &cfg)?;
            push(&est, None, &mut body);
        }
        SensMethod::Both => {
            let report = full_vs_reduced_report(Arc::new(net.clone()), &f, &cfg, &n_list)?;
            push(&report.reduced, None, &mut body);
            for row in &report.rows {
                push(&row.full, Some(row.n), &mut body);
            }
            for row in &report.rows {
                body += &line([
                    "gap".to_string(),
                    text(&a.f),
                    num(theta),
                    num(a.h),
                    num(a.t),
                    num(row.n),
                    num(row.gap),
                    num(Z95 * row.gap_se),
                    String::new(),
                    String::new(),
                    seed.to_string(),
                    String::new(),
                ]);
            }
        }
    }
    emit(a.out.as_deref(), &body)?;
    if converged {
        Ok(0)
    } else {
        eprintln!(
            "mssa: target half-width not reached within {} samples",
            a.max_samples
        );
        Ok(3)
    }
}

fn cmd_oracle(ctx: &Context, a: OracleArgs) -> Outcome {
    let net = load(&a.model)?;
    let seed = effective_seed(a.seed)?;
    let theta = a.theta.unwrap_or(net.theta_nominal);
    let n = a.n.unwrap_or(net.n0 as f64);
    let reduced = ReducedNetwork::new(Arc::new(net.clone()))?;
    let oracle = Oracle::new(&reduced, theta, n);
    if a.compare {
        let expr = a.f.as_deref().unwrap_or("x1");
        let f = parse_output_expr(expr, &net.species_names())?;
        let eq = equivalence_check(&oracle, &f, a.t, a.samples, seed)?;
        ctx.log(format!(
            "difference {} (pooled SE {})",
            eq.difference, eq.pooled_se
        ));
        let mut body = line([
            "estimator",
            "f",
            "t",
            "N",
            "mean",
            "halfwidth95",
            "samples",
            "seed",
        ]);
        for (name, est) in [("full", &eq.full), ("w-process", &eq.w)] {
            body += &line([
                name.to_string(),
                text(expr),
                num(a.t),
                num(n),
                num(est.mean),
                num(est.halfwidth95),
                est.samples.to_string(),
                est.seed.to_string(),
            ]);
        }
        body += &line([
            "difference".to_string(),
            text(expr),
            num(a.t),
            num(n),
            num(eq.difference),
            num(Z95 * eq.pooled_se),
            String::new(),
            seed.to_string(),
        ]);
        emit(a.out.as_deref(), &body)?;
        return Ok(0);
    }
    let v = if a.v.is_empty() {
        project(reduced.m(), &net.x0)
    } else {
        a.v.clone()
    };
    let sys = oracle.fiber_system(&v)?;
    let z = if !a.z.is_empty() {
        a.z.clone()
    } else if project(reduced.m(), &net.x0) == v {
        net.x0.clone()
    } else {
        sys.fiber.states[0].clone()
    };
    ctx.log(format!("fiber {:?}: {} states", v, sys.fiber.len()));
    let mut header = vec![
        "t".to_string(),
        "state".into(),
        "beta".into(),
        "survival".into(),
    ];
    header.extend(oracle.slow.iter().map(|k| format!("rho{}", k + 1)));
    let mut body = line(header);
    for &t in &a.t_grid {
        let kernel = oracle.jump_kernel(&v, &z, t)?;
        for (e, b) in sys.fiber.states.iter().zip(&kernel.beta) {
            let mut fields = vec![num(t), state(e), num(*b), num(kernel.survival)];
            fields.extend(kernel.rho.iter().map(|r| num(*r)));
            body += &line(fields);
        }
    }
    emit(a.out.as_deref(), &body)?;
    Ok(0)
}

fn cmd_bench(ctx: &Context, a: BenchArgs) -> Outcome {
    let seed = effective_seed(a.seed)?;
    let Suite::Heatshock = a.suite;
    let scale = match a.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let result = run_heatshock(&BenchConfig::new(scale, seed))?;
    let io = |p: &Path, e: std::io::Error| Failure {
        code: 1,
        message: format!("{}: {e}", p.display()),
    };
    fs::create_dir_all(&a.out).map_err(|e| io(&a.out, e))?;
    let mut files = vec![("results.csv".to_string(), result.results_csv())];
    for e in &result.entries {
        if let Some(d) = result.gap_data(e.f) {
            files.push((format!("gap_{}.dat", e.f), d));
        }
    }
    if a.timings {
        files.push(("timings.csv".into(), result.timings_csv()));
    }
    for (name, body) in files {
        let p = a.out.join(name);
        fs::write(&p, body).map_err(|e| io(&p, e))?;
        ctx.log(format!("wrote {}", p.display()));
    }
    Ok(if result.converged() { 0 } else { 3 })
}
