use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use lcco_core::verifier::{LP_ORACLE_LIMIT, QP_ORACLE_LIMIT};
use lcco_core::{
    generate_instance, kkt_residuals, parse_instance, reference_solve_lp, reference_solve_qp,
    serialize_instance, solve, write_trace_csv, Error, ObjectiveKind, Problem, SolveResult,
    SolveStatus, SolverConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INVALID_START: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ITERATION_CAP: u8 = 4;
const MAX_ORDER: u32 = 12;

#[derive(Parser)]
#[command(
    name = "lcco",
    version,
    about = "Full-Newton-step interior-point solver for linearly constrained convex problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file from its stored start point.
    Solve {
        instance: PathBuf,
        /// Order of the kernel transformation.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=MAX_ORDER as i64))]
        r: u32,
        /// Stop once the duality gap is at most this value.
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Barrier update parameter, or `auto`.
        #[arg(long, default_value = "auto", value_parser = parse_auto_f64)]
        theta: Auto<f64>,
        /// Iteration cap, or `auto` for ten times the bound.
        #[arg(long = "max-iter", default_value = "auto", value_parser = parse_auto_u64)]
        max_iter: Auto<u64>,
        /// Write the per-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Fail on the first monitor violation.
        #[arg(long)]
        strict: bool,
        /// Verify optimality residuals and compare with the enumeration oracle.
        #[arg(long)]
        check: bool,
    },
    /// Write a random instance with a perfectly centred start.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_parser = parse_kind)]
        objective: ObjectiveKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance for r = 1..r-max and tabulate the iteration counts.
    Sweep {
        instance: PathBuf,
        #[arg(long = "r-max", value_parser = clap::value_parser!(u32).range(1..=MAX_ORDER as i64))]
        r_max: u32,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
        /// Number of solves to run concurrently.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
    },
}

#[derive(Clone, Copy, Debug)]
enum Auto<T> {
    Auto,
    Value(T),
}

impl<T> Auto<T> {
    fn into_option(self) -> Option<T> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

fn parse_auto_f64(s: &str) -> Result<Auto<f64>, String> {
    if s == "auto" {
        return Ok(Auto::Auto);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected a number or `auto`, got `{s}`"))?;
    if !(v > 0.0 && v < 1.0) {
        return Err(format!("must lie in (0, 1), got {v}"));
    }
    Ok(Auto::Value(v))
}

fn parse_auto_u64(s: &str) -> Result<Auto<u64>, String> {
    if s == "auto" {
        return Ok(Auto::Auto);
    }
    match s.parse::<u64>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(Auto::Value(v)),
        Err(_) => Err(format!("expected a positive integer or `auto`, got `{s}`")),
    }
}

fn parse_kind(s: &str) -> Result<ObjectiveKind, String> {
    match s.parse::<ObjectiveKind>() {
        Ok(k @ (ObjectiveKind::Linear | ObjectiveKind::Quadratic)) => Ok(k),
        _ => Err(format!("expected `linear` or `quadratic`, got `{s}`")),
    }
}

/// A failure that ends the process with the given exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotInterior(_) | Error::Infeasible => EXIT_INVALID_START,
            Error::SingularKkt(_) | Error::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::InvalidStart => EXIT_INVALID_START,
        SolveStatus::NumericalFailure => EXIT_NUMERICAL,
        SolveStatus::IterationCap => EXIT_ITERATION_CAP,
    }
}

fn load(path: &Path) -> Result<Problem, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_failed(path: &Path, e: io::Error) -> Failure {
    Failure::usage(format!("cannot write {}: {e}", path.display()))
}

fn print_summary(p: &Problem, res: &SolveResult, r: u32) {
    println!("status            {}", res.status);
    println!("n, m              {}, {}", p.n(), p.m());
    println!("r                 {r}");
    println!("theta             {:.6e}", res.theta);
    println!("iterations        {}", res.iterations);
    println!("bound             {}", res.bound);
    println!("mu0               {:.6e}", res.mu0);
    println!("final gap         {:.6e}", res.gap_final);
    println!("final gap / mu0   {:.6e}", res.gap_final / res.mu0);
    if let Ok(f) = p.objective().value(&res.x) {
        println!("objective         {f:.12e}");
    }
    println!(
        "max proximity     {:.6e} (threshold {:.6e})",
        res.max_gamma(),
        res.gamma
    );
    println!("monitor failures  {}", res.monitor_violations);
    if let Some(msg) = &res.message {
        println!("note              {msg}");
    }
}

fn print_check(p: &Problem, res: &SolveResult) -> Result<(), Failure> {
    let kkt = kkt_residuals(p, &res.x, &res.y, &res.z)?;
    println!("check: primal residual   {:.3e}", kkt.primal);
    println!("check: dual residual     {:.3e}", kkt.dual);
    println!("check: complementarity   {:.3e}", kkt.complementarity);
    println!(
        "check: min x, min z      {:.3e}, {:.3e}",
        kkt.min_x, kkt.min_z
    );

    let reference = match p.objective().kind() {
        ObjectiveKind::Linear if p.n() <= LP_ORACLE_LIMIT => reference_solve_lp(p),
        ObjectiveKind::Quadratic if p.n() <= QP_ORACLE_LIMIT => reference_solve_qp(p),
        _ => {
            println!("check: oracle            skipped (instance too large or custom objective)");
            return Ok(());
        }
    };
    match reference {
        Ok(reference) => {
            let f = p.objective().value(&res.x)?;
            let f_star = reference.objective_star;
            let rel = (f - f_star).abs() / (1.0 + f_star.abs());
            let dist = (&res.x - &reference.x_star).norm();
            println!(
                "check: oracle objective  {f_star:.12e} ({})",
                reference.certificate
            );
            println!("check: relative error    {rel:.3e}");
            println!("check: distance to x*    {dist:.3e}");
        }
        Err(e) => println!("check: oracle            {e}"),
    }
    Ok(())
}

fn run_solve(
    instance: &Path,
    cfg: SolverConfig,
    trace: Option<&Path>,
    check: bool,
) -> Result<u8, Failure> {
    let p = load(instance)?;
    let r = cfg.r;
    let res = solve(&p, &cfg)?;
    if let Some(path) = trace {
        let mut out = create(path)?;
        write_trace_csv(&res.trace, &mut out)
            .and_then(|_| out.flush())
            .map_err(|e| write_failed(path, e))?;
    }
    print_summary(&p, &res, r);
    if check && res.status != SolveStatus::InvalidStart {
        print_check(&p, &res)?;
    }
    if let Some(msg) = &res.message {
        eprintln!("lcco: {}: {msg}", res.status);
    }
    Ok(status_code(res.status))
}

fn run_generate(
    n: usize,
    m: usize,
    kind: ObjectiveKind,
    seed: u64,
    out: &Path,
) -> Result<u8, Failure> {
    if n < 2 || m == 0 || m >= n {
        return Err(Failure::usage(format!(
            "dimensions need 0 < m < n and n >= 2, got n = {n}, m = {m}"
        )));
    }
    let p = generate_instance(n, m, kind, seed)?;
    let text = serialize_instance(&p)?;
    fs::write(out, text).map_err(|e| write_failed(out, e))?;
    println!(
        "wrote {} (n = {n}, m = {m}, {kind}, seed {seed})",
        out.display()
    );
    Ok(0)
}

const SWEEP_HEADER: &str = "r,theta,iterations,bound,final_gap,max_gamma,monitor_violations,status";

fn run_sweep(instance: &Path, r_max: u32, eps: f64, out: &Path, jobs: u64) -> Result<u8, Failure> {
    let p = load(instance)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(u32, Result<SolveResult, Error>)> = pool.install(|| {
        (1..=r_max)
            .into_par_iter()
            .map(|r| (r, solve(&p, &SolverConfig::new(eps, r))))
            .collect()
    });

    let mut csv = create(out)?;
    let mut first_failure: Option<(u32, u8)> = None;
    let mut best: Option<(u64, u32)> = None;
    let mut body = || -> io::Result<()> {
        writeln!(csv, "{SWEEP_HEADER}")?;
        for (r, res) in &results {
            match res {
                Ok(res) => {
                    writeln!(
                        csv,
                        "{r},{:.16e},{},{},{:.16e},{:.16e},{},{}",
                        res.theta,
                        res.iterations,
                        res.bound,
                        res.gap_final,
                        res.max_gamma(),
                        res.monitor_violations,
                        res.status
                    )?;
                    if res.converged() {
                        if best.map_or(true, |(it, _)| res.iterations < it) {
                            best = Some((res.iterations, *r));
                        }
                    } else if first_failure.is_none() {
                        first_failure = Some((*r, status_code(res.status)));
                    }
                }
                Err(e) => {
                    eprintln!("lcco: r = {r}: {e}");
                    if first_failure.is_none() {
                        first_failure = Some((*r, Failure::from(e.clone()).code));
                    }
                }
            }
        }
        csv.flush()
    };
    body().map_err(|e| write_failed(out, e))?;

    for (r, res) in &results {
        if let Ok(res) = res {
            println!(
                "r = {r:>2}: {:<17} {:>8} iterations (bound {})",
                res.status.as_str(),
                res.iterations,
                res.bound
            );
        }
    }
    match best {
        Some((iterations, r)) => println!("fewest iterations: r = {r} ({iterations})"),
        None => println!("fewest iterations: none converged"),
    }
    match first_failure {
        Some((r, code)) => {
            eprintln!("lcco: run with r = {r} did not converge");
            Ok(code)
        }
        None => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let outcome = match cli.command {
        Command::Solve {
            instance,
            r,
            eps,
            theta,
            max_iter,
            trace,
            strict,
            check,
        } => {
            if !(eps > 0.0 && eps.is_finite()) {
                Err(Failure::usage(format!("--eps must be positive, got {eps}")))
            } else {
                let cfg = SolverConfig {
                    epsilon: eps,
                    r,
                    theta: theta.into_option(),
                    max_iterations: max_iter.into_option(),
                    strict_monitors: strict,
                    ..Default::default()
                };
                run_solve(&instance, cfg, trace.as_deref(), check)
            }
        }
        Command::Generate {
            n,
            m,
            objective,
            seed,
            out,
        } => run_generate(n, m, objective, seed, &out),
        Command::Sweep {
            instance,
            r_max,
            eps,
            out,
            jobs,
        } => {
            if !(eps > 0.0 && eps.is_finite()) {
                Err(Failure::usage(format!("--eps must be positive, got {eps}")))
            } else {
                run_sweep(&instance, r_max, eps, &out, jobs)
            }
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("lcco: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
