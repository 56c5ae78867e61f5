use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hypack::hypgeom;
use hypack::layout::{self, SvgOptions};
use hypack::nerve::Nerve;
use hypack::polytope::{self, Verdict, Witness};
use hypack::solver::{self, FlowOptions, FlowTrajectory, Method, NewtonOptions, SolveError, Termination};
use hypack::verify::{self, Suite};

const EXIT_VERIFY: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BOUNDARY: u8 = 3;
const EXIT_OUTSIDE: u8 = 4;
const EXIT_DIVERGED: u8 = 5;

/// Error carrying a specific exit status.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

#[derive(Parser)]
#[command(name = "hypack", version, about = "Generalized hyperbolic circle packings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Total curvatures of three mutually tangent generalized circles
    #[command(allow_negative_numbers = true)]
    Triangle { k1: f64, k2: f64, k3: f64 },
    /// Classify a target against a nerve
    Check { nerve: PathBuf, target: PathBuf },
    /// Find curvatures realizing a target
    Solve(SolveArgs),
    /// Draw the configuration of one face or the fan around one vertex
    Render(RenderArgs),
    /// Run the invariant suites
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SolveArgs {
    nerve: PathBuf,
    target: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Residual tolerance (default 1e-10 interior, 1e-8 on a stratum)
    #[arg(long)]
    tol: Option<f64>,
    /// Newton iteration budget
    #[arg(long, default_value_t = 100)]
    max_iterations: usize,
    /// Write the flow trajectory as CSV (flow method only)
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Solution file; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["vertex", "face"])))]
struct RenderArgs {
    nerve: PathBuf,
    /// Curvature or solution document
    curvatures: PathBuf,
    out: PathBuf,
    #[arg(long)]
    vertex: Option<usize>,
    #[arg(long)]
    face: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Newton,
    Flow,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

#[derive(Deserialize)]
struct NerveDoc {
    num_vertices: usize,
    faces: Vec<[usize; 3]>,
}

#[derive(Deserialize)]
struct TargetDoc {
    #[serde(rename = "T")]
    t: Vec<f64>,
}

// also accepts a solution document
#[derive(Deserialize)]
struct CurvatureDoc {
    k: Vec<f64>,
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    k: &'a [f64],
    residual: f64,
    stratum: &'a [usize],
    method: &'static str,
    steps: usize,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_nerve(path: &Path) -> Result<Nerve> {
    let doc: NerveDoc = read_json(path)?;
    Nerve::new(doc.num_vertices, doc.faces).with_context(|| format!("invalid nerve {}", path.display()))
}

fn load_vector(path: &Path, g: &Nerve, read: fn(&Path) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let v = read(path)?;
    if v.len() != g.num_vertices() {
        bail!("{} has {} entries, nerve has {} vertices", path.display(), v.len(), g.num_vertices());
    }
    Ok(v)
}

fn subset(v: &[usize]) -> String {
    let items: Vec<String> = v.iter().map(usize::to_string).collect();
    format!("{{{}}}", items.join(","))
}

fn triangle(k: [f64; 3]) -> Result<u8> {
    let arcs = hypgeom::triangle_arcs(k).map_err(|e| Exit(EXIT_INPUT, e.to_string()))?;
    let kp = hypgeom::orthocircle_curvature(k)?;
    println!("{:<3} {:<22} {:<22} {:<22} {:<22}", "i", "k", "T", "theta", "length");
    for (i, a) in arcs.arcs.iter().enumerate() {
        println!("{:<3} {:<22} {:<22} {:<22} {:<22}", i + 1, k[i], a.total, a.theta, a.length);
    }
    println!("k_P {kp}");
    Ok(0)
}

fn check(nerve: &Path, target: &Path) -> Result<u8> {
    let g = load_nerve(nerve)?;
    let t = load_vector(target, &g, |p| read_json::<TargetDoc>(p).map(|d| d.t))?;
    let verdict = polytope::classify(&t, &g)?;
    let code = match &verdict {
        Verdict::Interior => {
            println!("Interior");
            0
        }
        Verdict::Boundary(i) => {
            println!("Boundary {}", subset(i));
            EXIT_BOUNDARY
        }
        Verdict::Outside(Witness::Subset(i)) => {
            println!("Outside, witness {}", subset(i));
            return Ok(EXIT_OUTSIDE);
        }
        Verdict::Outside(Witness::NegativeEntry(v)) => {
            println!("Outside, negative entry at vertex {v}");
            return Ok(EXIT_OUTSIDE);
        }
    };
    let cert = polytope::coherent_certificate(&t, &g)?;
    let face_max = cert.face_sums(g.num_faces()).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let vertex_err =
        cert.vertex_sums(g.num_vertices()).iter().zip(&t).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("delta {}", cert.delta);
    println!("epsilon {}", cert.epsilon);
    println!("certificate: {} corners, max face sum {face_max}, max vertex error {vertex_err:e}", cert.corners.len());
    Ok(code)
}

/// One row per accepted step. `residual` is the sup norm used for
/// termination; `residual_l2` is the Euclidean norm over all vertices, which
/// the flow cannot increase.
fn write_trajectory(path: &Path, traj: &FlowTrajectory, target: &[f64]) -> Result<()> {
    let n = traj.last().k.len();
    let mut out = String::from("t");
    (0..n).for_each(|v| write!(out, ",k_{v}").unwrap());
    (0..n).for_each(|v| write!(out, ",T_{v}").unwrap());
    out.push_str(",residual,residual_l2\n");
    for s in &traj.samples {
        write!(out, "{}", s.t).unwrap();
        s.k.iter().chain(&s.totals).for_each(|x| write!(out, ",{x}").unwrap());
        let l2 = s.totals.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        writeln!(out, ",{},{l2}", s.residual).unwrap();
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn solve_error(e: SolveError) -> anyhow::Error {
    let code = match e {
        SolveError::OutsideTarget(_) => EXIT_OUTSIDE,
        SolveError::MaxIterations(_) | SolveError::LineSearch(_) | SolveError::Timeout(_) => EXIT_DIVERGED,
        _ => EXIT_INPUT,
    };
    Exit(code, e.to_string()).into()
}

fn solve(args: &SolveArgs) -> Result<u8> {
    let g = load_nerve(&args.nerve)?;
    let t = load_vector(&args.target, &g, |p| read_json::<TargetDoc>(p).map(|d| d.t))?;
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            bail!("tolerance must be positive, got {tol}");
        }
    }
    let newton = NewtonOptions { tol: args.tol, max_iterations: args.max_iterations };
    let flow = FlowOptions { tol: args.tol, ..FlowOptions::default() };
    let result = match (args.method, &args.trajectory) {
        (MethodArg::Flow, Some(path)) => {
            if let Verdict::Outside(w) = polytope::classify(&t, &g)? {
                return Err(solve_error(SolveError::OutsideTarget(w)));
            }
            let traj = solver::ricci_flow(&vec![1.0; g.num_vertices()], &t, &g, flow).map_err(solve_error)?;
            write_trajectory(path, &traj, &t)?;
            let last = traj.last();
            if traj.termination == Termination::Timeout {
                return Err(solve_error(SolveError::Timeout(last.t)));
            }
            solver::SolveResult {
                k: last.k.clone(),
                residual: last.residual,
                stratum: traj.stratum.clone(),
                steps: traj.samples.len() - 1,
                method: Method::Flow,
            }
        }
        (_, Some(_)) => bail!("--trajectory needs --method flow"),
        (m, None) => {
            let method = match m {
                MethodArg::Newton => Method::Newton,
                MethodArg::Flow => Method::Flow,
                MethodArg::Auto => Method::Auto,
            };
            solver::solve(&t, &g, method, None, newton, flow).map_err(solve_error)?
        }
    };
    log::info!("{} finished in {} steps", result.method.name(), result.steps);
    let doc = SolutionDoc {
        k: &result.k,
        residual: result.residual,
        stratum: &result.stratum,
        method: result.method.name(),
        steps: result.steps,
    };
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match &args.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn render(args: &RenderArgs) -> Result<u8> {
    let g = load_nerve(&args.nerve)?;
    let k = load_vector(&args.curvatures, &g, |p| read_json::<CurvatureDoc>(p).map(|d| d.k))?;
    let layouts = match (args.vertex, args.face) {
        (Some(v), _) => layout::vertex_fan(&k, &g, v)?.into_iter().map(|f| f.layout).collect(),
        (None, Some(f)) => {
            let Some(face) = g.faces().get(f) else { bail!("face {f} out of range") };
            vec![layout::realize_triangle(face.map(|u| k[u]))?]
        }
        (None, None) => unreachable!("clap requires one of --vertex, --face"),
    };
    let svg = layout::render_svg(&layouts, &SvgOptions::default());
    fs::write(&args.out, svg).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(0)
}

fn threads() -> usize {
    let default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("HYPACK_THREADS") {
        Ok(s) => s.trim().parse::<usize>().ok().filter(|&n| n > 0).unwrap_or(default),
        Err(_) => default,
    }
}

fn run_verify(suite: SuiteArg, seed: u64) -> Result<u8> {
    let suite = match suite {
        SuiteArg::Quick => Suite::Quick,
        SuiteArg::Full => Suite::Full,
    };
    let reports = verify::run_suite(suite, seed, threads());
    let mut failed = Vec::new();
    for r in &reports {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        if !r.passed {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        println!("{} checks passed", reports.len());
        Ok(0)
    } else {
        println!("failed: {}", failed.join(", "));
        Ok(EXIT_VERIFY)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Triangle { k1, k2, k3 } => triangle([*k1, *k2, *k3]),
        Command::Check { nerve, target } => check(nerve, target),
        Command::Solve(args) => solve(args),
        Command::Render(args) => render(args),
        Command::Verify { suite, seed } => run_verify(*suite, *seed),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.downcast_ref::<Exit>().map_or(EXIT_INPUT, |x| x.0))
        }
    }
}
