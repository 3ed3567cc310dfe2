//! `pluripot`: run toolkit operations from a TOML configuration.
//!
//! Every subcommand writes a JSON summary (and CSV node tables where there is
//! a field to report) into the output directory and prints one summary line.
//! `PLURI_OUT` and `PLURI_THREADS` override the output directory and thread
//! count when the corresponding flags are absent.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pluripot::envelope::{envelope, EnvelopeStatus};
use pluripot::io::{self, Problem, RunConfig};
use pluripot::ma::{delta_theta_estimate, ma, npp_mixed};
use pluripot::solver::{solve_normalized, solve_twisted};
use pluripot::verify::{run_suites, Suite};
use pluripot::volumes::{vol_class, VolumeStatus};
use pluripot::{Error, QPshFunction, SolverSetup, Tolerances};
use serde_json::{json, Value};

const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_SAMPLING: u8 = 5;
const EXIT_VERIFY_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "pluripot", version, about = "Discrete pluripotential theory on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [env: PLURI_OUT, then run.output_dir, then ./pluripot-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [env: PLURI_THREADS].
    #[arg(long)]
    threads: Option<usize>,
    /// Seed recorded in the outputs (and used by sampling subcommands).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Monge–Ampère measure of one potential.
    Ma {
        #[command(flatten)]
        common: Common,
        /// Potential node table; zero when omitted.
        #[arg(long)]
        potential: Option<PathBuf>,
    },
    /// Non-pluripolar mixed product of d potentials against the configured form.
    Npp {
        #[command(flatten)]
        common: Common,
        /// Potential node tables, one per slot.
        #[arg(long = "potential")]
        potentials: Vec<PathBuf>,
    },
    /// Largest θ-psh function below an obstacle.
    Envelope {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        obstacle: Option<PathBuf>,
    },
    /// Volume of the configured class.
    Volume {
        #[command(flatten)]
        common: Common,
        /// Perturbation sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Monge–Ampère equation: twisted when a lambda is given, normalized otherwise.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        density: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        rho: Option<PathBuf>,
        /// Exponent of the density norm.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Spread of masses over extremal potentials.
    Delta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        c_bound: Option<f64>,
    },
    /// Seeded invariant suites.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Failure of a subcommand, carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            Error::SamplingExhausted(_) => EXIT_SAMPLING,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

/// Outcome of a subcommand that ran to the end.
struct Done {
    code: u8,
    summary: String,
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn run(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(done) => {
            println!("{}", done.summary);
            done.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn threads_from_env(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("PLURI_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| invalid(format!("PLURI_THREADS={s:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn out_dir(flag: Option<PathBuf>, config: Option<&RunConfig>) -> PathBuf {
    flag.or_else(|| std::env::var_os("PLURI_OUT").map(PathBuf::from))
        .or_else(|| {
            config.and_then(|c| c.run.output_dir.as_ref().map(|p| c.resolve(p)))
        })
        .unwrap_or_else(|| PathBuf::from("pluripot-out"))
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

struct Context {
    config: RunConfig,
    problem: Problem,
    out: PathBuf,
    seed: u64,
}

impl Context {
    fn load(common: &Common) -> Result<Self, Failure> {
        let config = RunConfig::from_path(&common.config)?;
        let problem = config.problem()?;
        let out = out_dir(common.out.clone(), Some(&config));
        std::fs::create_dir_all(&out)
            .map_err(|e| invalid(format!("cannot create {}: {e}", out.display())))?;
        let seed = common.seed.or(config.run.seed).unwrap_or(0);
        Ok(Context {
            config,
            problem,
            out,
            seed,
        })
    }

    fn tol(&self) -> &Tolerances {
        &self.config.tolerances
    }

    fn node_file(&self, flag: Option<&PathBuf>, config: Option<&PathBuf>) -> Result<Option<Vec<f64>>, Failure> {
        match flag.map(PathBuf::as_path).or(config.map(PathBuf::as_path)) {
            // Flags are relative to the working directory, config entries to the config file.
            Some(p) if flag.is_some() => Ok(Some(io::read_node_file(p, self.problem.grid.len())?)),
            Some(p) => Ok(Some(self.config.node_file(p, &self.problem.grid)?)),
            None => Ok(None),
        }
    }

    fn potential(&self, values: Option<Vec<f64>>) -> Result<QPshFunction, Failure> {
        Ok(match values {
            Some(v) => QPshFunction::new(&self.problem.grid, v)?,
            None => QPshFunction::zeros(&self.problem.grid),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn json(&self, name: &str, mut value: Value) -> Result<PathBuf, Failure> {
        if let Value::Object(m) = &mut value {
            m.insert("seed".into(), json!(self.seed));
        }
        let p = self.path(name);
        io::write_json(&p, &value)?;
        Ok(p)
    }

    fn csv(&self, name: &str, column: &str, values: &[f64]) -> Result<(), Failure> {
        io::write_node_file(&self.path(name), column, values)?;
        Ok(())
    }
}

fn dispatch(command: Command) -> Result<Done, Failure> {
    match command {
        Command::Verify {
            suite,
            seed,
            out,
            threads,
        } => {
            let suites = Suite::parse(&suite)?;
            let threads = threads_from_env(threads)?;
            let out = out_dir(out, None);
            std::fs::create_dir_all(&out)
                .map_err(|e| invalid(format!("cannot create {}: {e}", out.display())))?;
            let reports = in_pool(threads, || run_suites(&suites, seed, &Tolerances::default()))?;
            let failures: Vec<String> = reports.iter().flat_map(|r| r.failures()).collect();
            let checks: usize = reports.iter().map(|r| r.checks.len()).sum();
            let path = out.join("verify.json");
            io::write_json(
                &path,
                &json!({ "seed": seed, "passed": failures.is_empty(), "failures": failures, "suites": reports }),
            )?;
            for f in &failures {
                eprintln!("FAIL {f}");
            }
            Ok(Done {
                code: if failures.is_empty() { 0 } else { EXIT_VERIFY_FAILED },
                summary: format!(
                    "verify: {} of {checks} checks passed across {} suites (seed {seed}) -> {}",
                    checks - failures.len(),
                    reports.len(),
                    path.display()
                ),
            })
        }
        other => {
            let common = match &other {
                Command::Ma { common, .. }
                | Command::Npp { common, .. }
                | Command::Envelope { common, .. }
                | Command::Volume { common, .. }
                | Command::Solve { common, .. }
                | Command::Delta { common, .. } => common,
                Command::Verify { .. } => unreachable!(),
            };
            let threads = threads_from_env(common.threads)?;
            let cx = Context::load(common)?;
            in_pool(threads, || operation(&cx, &other))?
        }
    }
}

fn operation(cx: &Context, command: &Command) -> Result<Done, Failure> {
    let form = &cx.problem.form;
    let run = &cx.config.run;
    match command {
        Command::Ma { potential, .. } => {
            let u = cx.potential(cx.node_file(potential.as_ref(), run.potential_file.as_ref())?)?;
            let m = ma(form, &u)?;
            cx.csv("ma.csv", "weight", m.weights())?;
            let s = m.summary();
            let p = cx.json("ma.json", json!(s))?;
            Ok(Done {
                code: 0,
                summary: format!(
                    "ma: mass {} over {} nodes -> {}",
                    io::format_value(s.total_mass),
                    s.support_size,
                    p.display()
                ),
            })
        }
        Command::Npp { potentials, .. } => {
            let paths: Vec<&PathBuf> = if potentials.is_empty() {
                run.potentials.iter().flatten().collect()
            } else {
                potentials.iter().collect()
            };
            let d = cx.problem.grid.dim();
            if paths.len() != d {
                return Err(invalid(format!("npp needs {d} potentials, got {}", paths.len())));
            }
            let us = paths
                .iter()
                .map(|p| {
                    let v = if potentials.is_empty() {
                        cx.config.node_file(p, &cx.problem.grid)?
                    } else {
                        io::read_node_file(p, cx.problem.grid.len())?
                    };
                    cx.potential(Some(v))
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let forms = vec![form; d];
            let m = npp_mixed(&forms, &us.iter().collect::<Vec<_>>())?;
            cx.csv("npp.csv", "weight", m.weights())?;
            let s = m.summary();
            let p = cx.json("npp.json", json!(s))?;
            Ok(Done {
                code: 0,
                summary: format!(
                    "npp: mass {} over {} nodes -> {}",
                    io::format_value(s.total_mass),
                    s.support_size,
                    p.display()
                ),
            })
        }
        Command::Envelope { obstacle, .. } => {
            let f = cx
                .node_file(obstacle.as_ref(), run.obstacle_file.as_ref())?
                .ok_or_else(|| invalid("envelope needs an obstacle (--obstacle or run.obstacle_file)"))?;
            let r = envelope(form, &f, cx.tol())?;
            cx.csv("envelope.csv", "envelope", r.env.values())?;
            let p = cx.json(
                "envelope.json",
                json!({ "status": r.status, "sweeps": r.sweeps, "final_update": r.final_update, "trace": r.trace }),
            )?;
            let code = match r.status {
                EnvelopeStatus::Converged => 0,
                EnvelopeStatus::MaxSweeps => EXIT_NON_CONVERGENCE,
                EnvelopeStatus::Infeasible | EnvelopeStatus::Unbounded => EXIT_INFEASIBLE,
            };
            Ok(Done {
                code,
                summary: format!("envelope: {:?} after {} sweeps -> {}", r.status, r.sweeps, p.display()),
            })
        }
        Command::Volume { eps, .. } => {
            let eps = eps
                .clone()
                .or_else(|| run.eps_list.clone())
                .unwrap_or_else(|| (1..=6).map(|j| 0.5f64.powi(j)).collect());
            let rep = vol_class(form, &cx.problem.metric, &eps, cx.tol())?;
            let p = cx.json(
                "volume.json",
                json!({
                    "vol": rep.vol_big,
                    "lower_est": rep.lower_est,
                    "upper_est": rep.upper_est,
                    "eps_trace": rep.eps_trace,
                    "status": rep.status,
                }),
            )?;
            let code = if rep.status == VolumeStatus::NotPsef { EXIT_INFEASIBLE } else { 0 };
            Ok(Done {
                code,
                summary: format!(
                    "volume: {} ({:?}) -> {}",
                    io::format_value(rep.vol_big),
                    rep.status,
                    p.display()
                ),
            })
        }
        Command::Solve {
            density,
            lambda,
            rho,
            p,
            ..
        } => {
            let grid = &cx.problem.grid;
            let f = cx
                .node_file(density.as_ref(), run.density_file.as_ref())?
                .unwrap_or_else(|| vec![1.0; grid.len()]);
            let rho = cx.potential(cx.node_file(rho.as_ref(), run.rho_file.as_ref())?)?;
            let lambda = lambda.or(run.lambda);
            let setup = SolverSetup::new(
                form.clone(),
                rho,
                f,
                cx.problem.volume.clone(),
                lambda.unwrap_or(1.0),
                p.or(run.p).unwrap_or(2.0),
                &cx.problem.metric,
                cx.tol(),
            )?;
            let res = match lambda {
                Some(_) => solve_twisted(&setup, cx.tol())?,
                None => solve_normalized(&setup, cx.tol())?,
            };
            if let Some(phi) = &res.phi {
                cx.csv("phi.csv", "phi", phi.values())?;
            }
            let mut value = serde_json::to_value(&res).map_err(Error::from)?;
            if let Value::Object(m) = &mut value {
                m.insert("lambda".into(), json!(lambda));
            }
            let path = cx.json("solve.json", value)?;
            let c = res.c.map(io::format_value).unwrap_or_else(|| "-".into());
            Ok(Done {
                code: if res.converged { 0 } else { EXIT_NON_CONVERGENCE },
                summary: format!(
                    "solve: {} c={c} residual={:e} iterations={} -> {}",
                    if res.converged { "converged" } else { "not converged" },
                    res.residual_inf,
                    res.iterations,
                    path.display()
                ),
            })
        }
        Command::Delta { samples, c_bound, .. } => {
            let samples = samples.or(run.samples).unwrap_or(50);
            let c_bound = c_bound.or(run.c_bound).unwrap_or(1.0);
            let d = delta_theta_estimate(form, &cx.problem.metric, c_bound, samples, cx.seed, cx.tol())?;
            let p = cx.json(
                "delta.json",
                json!({ "estimate": d.estimate, "samples": d.samples, "c_bound": c_bound, "masses": d.masses }),
            )?;
            Ok(Done {
                code: 0,
                summary: format!(
                    "delta: {} from {samples} samples -> {}",
                    io::format_value(d.estimate),
                    p.display()
                ),
            })
        }
        Command::Verify { .. } => unreachable!(),
    }
}
