//! `markersim` command-line front end.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 data
//! consistency error, 4 runtime or engine error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use markersim::camera::load_calibration;
use markersim::geometry::Vec3;
use markersim::metrics::{load_runs, report};
use markersim::mpm::ScatterMode;
use markersim::scenario::{
    batch_recipe, load_scenario, run_scenario, scenario_from_file, write_atomic, write_fixtures, RunOptions,
    Scenario, SensorSim,
};
use markersim::{MetricsError, ScenarioError};

#[derive(Parser)]
#[command(name = "markersim", version, about = "Marker-based tactile sensor simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write mask, depth, joint images and marker tables.
    Run(RunArgs),
    /// Compare predicted marker tables against reference tables.
    Metrics(MetricsArgs),
    /// Project 3-D points through a calibration.
    Project(ProjectArgs),
    /// Write the bundled indenter meshes, calibration and example scenarios.
    GenFixtures(GenArgs),
    /// Describe a scenario without running it.
    Info(InfoArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (defaults to the scenario's `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Fixed-order accumulation: bit-identical output for any thread count.
    #[arg(long)]
    deterministic: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "MARKERSIM_THREADS")]
    threads: Option<usize>,
    /// Run the depth × indenter × motion recipe derived from the scenario.
    #[arg(long)]
    batch: bool,
    #[arg(long, default_value_t = 20, requires = "batch")]
    batch_depths: usize,
    /// Press depth range of the batch, meters.
    #[arg(long, default_value_t = 0.0005, requires = "batch")]
    min_depth: f64,
    #[arg(long, default_value_t = 0.0015, requires = "batch")]
    max_depth: f64,
}

#[derive(Args)]
struct MetricsArgs {
    /// Run directory or directory of run directories.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Metrics CSV (`motion,metric,value`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-marker residual CSV.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    calib: PathBuf,
    /// CSV of `x,y,z` rows in meters (a header row is optional).
    #[arg(long)]
    points: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "scenarios")]
    dir: PathBuf,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    scenario: PathBuf,
}

/// An error paired with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }
    fn consistency(message: impl ToString) -> Self {
        Self {
            code: 3,
            message: message.to_string(),
        }
    }
    fn runtime(message: impl ToString) -> Self {
        Self {
            code: 4,
            message: message.to_string(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_input_error() {
            Failure::input(e)
        } else {
            Failure::runtime(e)
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        if e.is_input_error() {
            Failure::input(e)
        } else {
            Failure::consistency(e)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Project(args) => cmd_project(args),
        Command::GenFixtures(args) => cmd_gen(args),
        Command::Info(args) => cmd_info(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::input("--threads must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(Failure::runtime)?;
    let scatter = if args.deterministic {
        ScatterMode::Deterministic
    } else {
        ScatterMode::ThreadLocal
    };
    let out = args.out.clone().unwrap_or_else(|| scenario.output_dir());

    pool.install(|| {
        if !args.batch {
            return run_one(&scenario, &out, args.frames, scatter);
        }
        let recipe = batch_recipe(&scenario.file, args.batch_depths, args.min_depth, args.max_depth);
        let total = recipe.len();
        for (i, entry) in recipe.into_iter().enumerate() {
            println!("[{}/{total}] {}", i + 1, entry.name);
            let s = scenario_from_file(entry.file, &scenario.base_dir)?;
            run_one(&s, &out.join(&entry.name), args.frames, scatter)?;
        }
        Ok(())
    })
}

fn run_one(scenario: &Scenario, out: &Path, frames: Option<usize>, scatter: ScatterMode) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", out.display())))?;
    let options = RunOptions {
        out_dir: Some(out.to_path_buf()),
        frames,
        scatter: Some(scatter),
    };
    let run = run_scenario(scenario, &options)?;
    let m = &run.manifest;
    println!(
        "{}: {} frames, {} elastomer + {} indenter particles, {} grid nodes -> {}",
        m.name,
        m.frames_written,
        m.elastomer_particles,
        m.indenter_particles,
        m.grid_nodes,
        out.display()
    );
    println!(
        "steady-state throughput: {:.2} frames/s simulated ({} substeps/frame, {} threads), {:.2} frames/s end to end",
        m.sim_fps, m.substeps, m.threads, m.fps
    );
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), Failure> {
    let pred = load_runs(&args.pred)?;
    let truth = load_runs(&args.truth)?;
    for (p, t) in pred.iter().zip(&truth) {
        if p.motion != t.motion {
            return Err(Failure::consistency(format!(
                "run {} is {} in the prediction but {} in the truth",
                p.name, p.motion, t.motion
            )));
        }
    }
    let r = report(&pred, &truth)?;
    if let Some(path) = &args.out {
        write_atomic(path, r.to_csv().as_bytes()).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &args.residuals {
        write_atomic(path, r.residuals_csv().as_bytes())
            .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    print!("{}", r.summary());
    Ok(())
}

fn cmd_project(args: ProjectArgs) -> Result<(), Failure> {
    let camera = load_calibration(&args.calib).map_err(Failure::input)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(&args.points)
        .map_err(|e| Failure::input(format!("{}: {e}", args.points.display())))?;
    let mut out = String::from("u,v,visible\n");
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Failure::input(format!("{}: {e}", args.points.display())))?;
        let values: Vec<Option<f64>> = record.iter().map(|f| f.parse().ok()).collect();
        if line == 0 && values.iter().all(Option::is_none) {
            continue;
        }
        let xyz = match values.as_slice() {
            [Some(x), Some(y), Some(z)] => Vec3::new(*x, *y, *z),
            _ => {
                return Err(Failure::input(format!(
                    "{} line {}: expected three numbers x,y,z",
                    args.points.display(),
                    line + 1
                )))
            }
        };
        let p = camera.project(&xyz);
        writeln!(out, "{},{},{}", p.u, p.v, p.visible).unwrap();
    }
    match &args.out {
        Some(path) => {
            write_atomic(path, out.as_bytes()).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let written = write_fixtures(&args.dir).map_err(Failure::runtime)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_info(args: InfoArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario)?;
    let sim = SensorSim::build(&scenario, None)?;
    let f = &scenario.file;
    let grid = &sim.scene.grid;
    let wave = f.sim.wave_speed();
    println!("scenario        {}", scenario.name);
    println!("motion          {}", f.trajectory.kind);
    println!("config hash     {}", scenario.config_hash);
    println!("elastomer       {} particles at {} m", sim.elastomer_count, f.elastomer.spacing);
    println!("indenter        {} particles", sim.scene.particles.len() - sim.elastomer_count);
    println!("markers         {} ({}x{})", sim.groups.len(), f.markers.rows, f.markers.cols);
    println!("grid            {:?} = {} nodes, dx = {:.4e} m", grid.dims, grid.len(), grid.dx);
    println!(
        "time step       dt = {:.3e} s, wave speed {:.1} m/s, c*dt/dx = {:.2}",
        f.sim.dt,
        wave,
        wave * f.sim.dt / grid.dx
    );
    println!("frames          {} x {} substeps", f.output.frames, f.sim.substeps);
    if let Some(steps) = f.trajectory.total_steps(f.sim.dt) {
        println!("motion length   {steps} steps ({:.1} frames)", steps as f64 / f.sim.substeps as f64);
    }
    Ok(())
}
