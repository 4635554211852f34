use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use translab::cones::{compare_cones_on_c, sample_relative_cone, sample_restricted_cone, COMPARE_TOL, IN_C_TOL};
use translab::constants::{estimate, ConstantKind};
use translab::constructions::{run_case1_corpus, run_chain_corpus, theorem2_sequence_check, Fault};
use translab::report::{aggregate_csv, SceneReport};
use translab::{altproj, corpus, Error, RadiusSchedule, Scene, Vector};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "translab", version, about = "Transversality constant estimators and construction verifiers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate constants for every scene in a directory.
    Estimate(EstimateArgs),
    /// Run the construction and cone suites.
    Verify(VerifyArgs),
    /// Run alternating projections on one scene.
    Ap(ApArgs),
}

#[derive(clap::Args)]
struct EstimateArgs {
    /// JSON manifest; replaces the other flags.
    #[arg(long, conflicts_with_all = ["scenes", "out"])]
    manifest: Option<PathBuf>,
    /// Directory of scene JSON files.
    #[arg(long, required_unless_present = "manifest")]
    scenes: Option<PathBuf>,
    /// Comma-separated constants (default: all).
    #[arg(long, value_delimiter = ',')]
    constants: Vec<ConstantKind>,
    /// `delta0,factor,count`
    #[arg(long, default_value = "0.5,0.5,5")]
    radii: String,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, required_unless_present = "manifest")]
    out: Option<PathBuf>,
    /// Worker threads (0: rayon default). Does not change results.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Constructions,
    Cones,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InjectFault {
    NegatedBisector,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    /// Scene directory for the cone suite (default: bundled scenes).
    #[arg(long)]
    scenes: Option<PathBuf>,
    /// Accepted instances per delta' in the construction suite.
    #[arg(long, default_value_t = 10_000)]
    instances: usize,
    #[arg(long, default_value = "0.5,0.5,6")]
    radii: String,
    #[arg(long, default_value_t = 600)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write `verify.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<InjectFault>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(clap::Args)]
struct ApArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Comma-separated start point.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    burn_in: usize,
    /// Write the trajectory CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything `estimate` needs; the seed ends up in every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    scenes: Vec<PathBuf>,
    #[serde(default)]
    constants: Vec<ConstantKind>,
    #[serde(default = "default_radii")]
    radii: (f64, f64, usize),
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
    out: PathBuf,
    #[serde(default)]
    threads: usize,
}

fn default_radii() -> (f64, f64, usize) {
    (0.5, 0.5, 5)
}

fn default_samples() -> usize {
    2000
}

/// Input problems map to exit 2, failed checks to exit 1.
enum Failure {
    Input(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn parse_radii(s: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Failure::Input(format!("--radii expects delta0,factor,count, got `{s}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let d0 = parts[0].parse().map_err(|_| bad())?;
    let f = parts[1].parse().map_err(|_| bad())?;
    let n = parts[2].parse().map_err(|_| bad())?;
    Ok((d0, f, n))
}

fn schedule(radii: (f64, f64, usize), samples: usize, seed: u64) -> Result<RadiusSchedule, Failure> {
    if !(radii.1 > 0.0 && radii.1 < 1.0) {
        return Err(Failure::Input("radius factor must lie in (0, 1)".into()));
    }
    Ok(RadiusSchedule::geometric(radii.0, radii.1, radii.2, samples, seed)?)
}

fn scene_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn load_scene(path: &Path) -> Result<Scene, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Scene::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_scenes(paths: &[PathBuf]) -> Result<Vec<Scene>, Failure> {
    if paths.is_empty() {
        return Err(Failure::Input("no scenes given".into()));
    }
    let scenes = paths.iter().map(|p| load_scene(p)).collect::<Result<Vec<_>, _>>()?;
    let mut ids: Vec<&str> = scenes.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::Input("scene ids must be unique".into()));
    }
    Ok(scenes)
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Input(e.to_string()))?;
    Ok(pool.install(f))
}

fn cmd_estimate(args: EstimateArgs) -> CmdResult {
    let m = match &args.manifest {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<RunManifest>(&text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?
        }
        None => RunManifest {
            scenes: scene_files(args.scenes.as_deref().expect("clap enforces --scenes"))?,
            constants: args.constants.clone(),
            radii: parse_radii(&args.radii)?,
            samples: args.samples,
            seed: args.seed,
            out: args.out.clone().expect("clap enforces --out"),
            threads: args.threads,
        },
    };
    run_manifest(&m)
}

fn run_manifest(m: &RunManifest) -> CmdResult {
    let scenes = load_scenes(&m.scenes)?;
    let sched = schedule(m.radii, m.samples, m.seed)?;
    let mut kinds = if m.constants.is_empty() { ConstantKind::ALL.to_vec() } else { m.constants.clone() };
    kinds.sort();
    kinds.dedup();
    let reports = in_pool(m.threads, || {
        scenes
            .iter()
            .map(|s| {
                let est = kinds.iter().map(|&k| estimate(k, s, &sched)).collect::<Result<Vec<_>, _>>()?;
                SceneReport::new(sched.clone(), est)
            })
            .collect::<Result<Vec<_>, _>>()
    })??;
    fs::create_dir_all(&m.out)?;
    let mut failed = Vec::new();
    for r in &reports {
        fs::write(m.out.join(format!("{}.json", r.scene_id)), r.to_json()?)?;
        for c in r.ordering.failures() {
            failed.push(format!("{}: {} (lhs {}, rhs {})", r.scene_id, c.name, c.lhs, c.rhs));
        }
    }
    fs::write(m.out.join("aggregate.csv"), aggregate_csv(&reports)?)?;
    println!("wrote {} scene reports to {}", reports.len(), m.out.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("ordering checks failed:\n  {}", failed.join("\n  "))))
    }
}

#[derive(Debug, Default, Serialize)]
struct VerifyReport {
    seed: u64,
    chains: Vec<translab::constructions::ChainRun>,
    case1: Vec<Case1Summary>,
    cones: Vec<ConeSummary>,
}

#[derive(Debug, Serialize)]
struct Case1Summary {
    delta_prime: f64,
    instances: usize,
    failures: usize,
    min_margin: f64,
}

#[derive(Debug, Serialize)]
struct ConeSummary {
    scene_id: String,
    comparison: translab::cones::ConeComparison,
    sequences_checked: usize,
    sequence_failures: usize,
}

fn verify_constructions(args: &VerifyArgs, rep: &mut VerifyReport, problems: &mut Vec<String>) -> Result<(), Failure> {
    let fault = match args.inject_fault {
        Some(InjectFault::NegatedBisector) => Fault::NegatedBisector,
        None => Fault::None,
    };
    for dp in [1e-2, 1e-3] {
        let run = run_chain_corpus(args.instances, dp, args.seed, fault)?;
        println!(
            "chain delta'={dp:e}: {} instances ({} draws), {} failures",
            run.instances, run.stats.attempts, run.failures.len()
        );
        if let Some((i, links)) = run.failures.first() {
            problems.push(format!("chain delta'={dp:e}: instance {i} fails {}", links.join(", ")));
        }
        if run.instances < args.instances {
            problems.push(format!("chain delta'={dp:e}: only {} instances accepted", run.instances));
        }
        rep.chains.push(run);
        let (fails, min_margin) = run_case1_corpus(args.instances, dp, args.seed)?;
        println!("case1 delta'={dp:e}: {} instances, {fails} failures, min margin {min_margin:e}", args.instances);
        if fails > 0 {
            problems.push(format!("case1 delta'={dp:e}: {fails} failures"));
        }
        rep.case1.push(Case1Summary { delta_prime: dp, instances: args.instances, failures: fails, min_margin });
    }
    Ok(())
}

fn verify_cones(args: &VerifyArgs, rep: &mut VerifyReport, problems: &mut Vec<String>) -> Result<(), Failure> {
    let scenes = match &args.scenes {
        Some(d) => load_scenes(&scene_files(d)?)?,
        None => corpus::scenes()?,
    };
    let sched = schedule(parse_radii(&args.radii)?, args.samples, args.seed)?;
    for s in &scenes {
        let rel = sample_relative_cone(s, &sched)?;
        let res = sample_restricted_cone(s, &sched)?;
        let cmp = compare_cones_on_c(&rel, &res, COMPARE_TOL)?;
        let (mut checked, mut failed) = (0, 0);
        for (i, p) in rel.pairs.iter().enumerate() {
            if p.x1s.dot(&p.x2s) <= IN_C_TOL {
                checked += 1;
                if !theorem2_sequence_check(s, &rel, i)?.passed() {
                    failed += 1;
                }
            }
        }
        println!(
            "cones {}: discrepancy {:.4} (tol {}), min sum-norm {:.4} vs {:.4}, sequences {checked} checked, {failed} failed",
            s.id, cmp.discrepancy, cmp.tol, cmp.min_relative, cmp.min_restricted
        );
        if !cmp.passed {
            problems.push(format!("cones {}: comparison on C failed", s.id));
        }
        if failed > 0 {
            problems.push(format!("cones {}: {failed} sequence checks failed", s.id));
        }
        rep.cones.push(ConeSummary { scene_id: s.id.clone(), comparison: cmp, sequences_checked: checked, sequence_failures: failed });
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    if args.instances == 0 {
        return Err(Failure::Input("--instances must be positive".into()));
    }
    let mut rep = VerifyReport { seed: args.seed, ..Default::default() };
    let mut problems = Vec::new();
    in_pool(args.threads, || -> CmdResult {
        if args.suite != Suite::Cones {
            verify_constructions(&args, &mut rep, &mut problems)?;
        }
        if args.suite != Suite::Constructions {
            verify_cones(&args, &mut rep, &mut problems)?;
        }
        Ok(())
    })??;
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        let mut s = serde_json::to_string_pretty(&rep).map_err(|e| Failure::Input(e.to_string()))?;
        s.push('\n');
        fs::write(out.join("verify.json"), s)?;
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(problems.join("\n")))
    }
}

fn cmd_ap(args: ApArgs) -> CmdResult {
    let scene = load_scene(&args.scene)?;
    let x0 = if args.x0.is_empty() { scene.xbar.clone() } else { Vector::new(args.x0.clone()) };
    let traj = altproj::run_ap(&scene, &x0, args.iters, args.tol)?;
    let rate = altproj::estimate_linear_rate(&traj, args.burn_in);
    if let Some(out) = &args.out {
        fs::write(out, traj.to_csv()?)?;
    }
    let rate = match rate {
        Ok(altproj::LinearRate::Rate(r)) => format!("{r}"),
        Ok(altproj::LinearRate::FiniteTermination) => "finite_termination".into(),
        Err(e) => format!("unavailable ({e})"),
    };
    println!(
        "scene {}: {} steps, converged {}, final residual {:e}, rate per cycle {rate}",
        scene.id,
        traj.points.len() - 1,
        traj.converged,
        traj.residuals.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Estimate(a) => cmd_estimate(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Ap(a) => cmd_ap(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
