//! `periprop` command-line driver.

mod manifest;

use clap::{Args, Parser, Subcommand};
use manifest::{mesh_hash, RunManifest};
use periprop::config::SimConfig;
use periprop::fem::ElementMode;
use periprop::forcing::ForceKind;
use periprop::meshgen::{read_mesh, write_mesh};
use periprop::nonlinear::{trajectory, write_periods_csv, write_trajectory_csv};
use periprop::output::fmt17;
use periprop::pipeline::{self, FailureClass, PipelineError, Setup};
use periprop::report::{self, ReferenceTargets, Target};
use periprop::timeloop::write_trace_csv;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "periprop", version, about = "Self-propulsion of an axisymmetric body driven by an oscillating internal mass")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady auxiliary problem and resistance K.
    Resistance(RunArgs),
    /// Linear periodic flow and thrust G_z.
    Linear(RunArgs),
    /// Full nonlinear problem integrated to the periodic regime.
    Nonlinear(NonlinearArgs),
    /// One run per Stokes number.
    Sweep(SweepArgs),
    /// Generate a mesh, or inspect an existing mesh file.
    Mesh(MeshArgs),
    /// Compare run summaries with the published tables.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    shape: Option<String>,
    #[arg(long)]
    force: Option<ForceKind>,
    /// Stokes number.
    #[arg(long)]
    h: Option<f64>,
    /// Time steps per period.
    #[arg(long)]
    nsteps: Option<usize>,
    /// Outer radius R of the truncated domain.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    size_body: Option<f64>,
    #[arg(long)]
    size_far: Option<f64>,
    /// `taylor-hood` or `equal-order-lps`.
    #[arg(long)]
    element: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct NonlinearArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    periods_max: Option<usize>,
    /// Also write the body velocity at every time level.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated Stokes numbers.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    h_list: Vec<f64>,
    /// `linear` or `nonlinear`.
    #[arg(long, default_value = "linear")]
    mode: String,
    /// Concurrent items, capped by PERIPROP_THREADS.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    periods_max: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct MeshArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Read and summarize this mesh file instead of generating one.
    #[arg(long)]
    inspect: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ReportArgs {
    #[arg(long)]
    target: String,
    /// Directory of run summaries (searched one level deep).
    #[arg(long)]
    runs: PathBuf,
    /// Markdown output; the CSV twin gets the `.csv` extension.
    #[arg(long)]
    out: PathBuf,
    /// Targets file replacing the bundled one.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Fit the single normalization constant of Table 1.
    #[arg(long)]
    normalize: bool,
}

/// Failure with its exit status.
struct Failure {
    class: FailureClass,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            class: FailureClass::Solver,
            message: format!("output error: {e}"),
        }
    }
}

fn bad_config(message: impl Into<String>) -> Failure {
    Failure {
        class: FailureClass::BadConfig,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Resistance(a) => cmd_resistance(&a),
        Command::Linear(a) => cmd_linear(&a),
        Command::Nonlinear(a) => cmd_nonlinear(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Mesh(a) => cmd_mesh(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.class.exit_code() as u8)
        }
    }
}

/// Config file (or defaults) with the given flags applied on top.
fn effective_config(a: &RunArgs) -> Result<SimConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => SimConfig::from_file(p).map_err(|e| bad_config(e.to_string()))?,
        None => SimConfig::default(),
    };
    if let Some(s) = &a.shape {
        cfg.problem.shape = s.clone();
    }
    if let Some(f) = a.force {
        cfg.problem.force = f;
    }
    if let Some(h) = a.h {
        cfg.problem.h = h;
    }
    if let Some(n) = a.nsteps {
        cfg.time.n_steps = n;
    }
    if let Some(r) = a.radius {
        cfg.domain.radius = r;
    }
    if let Some(s) = a.size_body {
        cfg.domain.size_body = s;
    }
    if let Some(s) = a.size_far {
        cfg.domain.size_far = s;
    }
    if let Some(e) = &a.element {
        cfg.problem.element = match e.as_str() {
            "taylor-hood" => ElementMode::TaylorHood,
            "equal-order-lps" => ElementMode::EqualOrderLps,
            other => return Err(bad_config(format!("unknown element `{other}`"))),
        };
    }
    cfg.validate().map_err(|e| bad_config(e.to_string()))?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| bad_config(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut v = serde_json::to_value(value).expect("summary serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.insert("manifest".into(), manifest::MANIFEST_FILE.into());
    }
    std::fs::write(path, serde_json::to_string_pretty(&v).expect("json") + "\n")
}

fn finish(command: &str, cfg: &SimConfig, setup: &Setup, dir: &Path, outputs: &[&str], start: Instant) -> std::io::Result<()> {
    RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        mesh_hash: mesh_hash(&setup.mesh),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    }
    .write(dir)
}

fn cmd_resistance(a: &RunArgs) -> CmdResult {
    let start = Instant::now();
    let cfg = effective_config(a)?;
    create_dir(&a.out)?;
    let setup = pipeline::setup(&cfg)?;
    let (summary, _) = pipeline::run_resistance(&cfg, &setup)?;
    write_json(&a.out.join("resistance.json"), &summary)?;
    write_mesh(&setup.mesh, &a.out.join("mesh.txt")).map_err(|e| Failure {
        class: FailureClass::Solver,
        message: e.to_string(),
    })?;
    finish("resistance", &cfg, &setup, &a.out, &["resistance.json", "mesh.txt"], start)?;
    println!("K = {} (energy {}, wall-corrected {})", fmt17(summary.k), fmt17(summary.k_energy), summary.k_exterior.map(fmt17).unwrap_or_default());
    Ok(())
}

fn cmd_linear(a: &RunArgs) -> CmdResult {
    let start = Instant::now();
    let cfg = effective_config(a)?;
    create_dir(&a.out)?;
    let setup = pipeline::setup(&cfg)?;
    let (summary, sol) = pipeline::run_linear(&cfg, &setup)?;
    write_json(&a.out.join("summary.json"), &summary)?;
    write_trace_csv(&sol.trace, BufWriter::new(File::create(a.out.join("trace.csv"))?))?;
    finish("linear", &cfg, &setup, &a.out, &["summary.json", "trace.csv"], start)?;
    println!("G_z = {}  K = {}  gamma0_bar = {}", fmt17(summary.g_z), fmt17(summary.k), fmt17(summary.gamma0_bar));
    Ok(())
}

fn cmd_nonlinear(a: &NonlinearArgs) -> CmdResult {
    let start = Instant::now();
    let mut cfg = effective_config(&a.run)?;
    if let Some(p) = a.periods_max {
        cfg.time.max_periods = p;
        cfg.validate().map_err(|e| bad_config(e.to_string()))?;
    }
    let out = &a.run.out;
    create_dir(out)?;
    let setup = pipeline::setup(&cfg)?;
    let (summary, res) = pipeline::run_nonlinear(&cfg, &setup)?;
    write_json(&out.join("summary.json"), &summary)?;
    write_periods_csv(&res.periods, BufWriter::new(File::create(out.join("periods.csv"))?))?;
    write_trajectory_csv(&trajectory(&res), BufWriter::new(File::create(out.join("trajectory.csv"))?))?;
    let mut outputs = vec!["summary.json", "periods.csv", "trajectory.csv"];
    if a.trace {
        let dt = 1.0 / res.n_steps as f64;
        let mut text = String::from("t,gamma\n");
        for (i, g) in res.gamma_history.iter().enumerate() {
            text.push_str(&format!("{},{}\n", fmt17(i as f64 * dt), fmt17(*g)));
        }
        std::fs::write(out.join("gamma_trace.csv"), text)?;
        outputs.push("gamma_trace.csv");
    }
    finish("nonlinear", &cfg, &setup, out, &outputs, start)?;
    println!("mean gamma = {}  periods {}  converged {}", fmt17(summary.mean_gamma), summary.cycles_run, summary.converged);
    if !summary.converged {
        return Err(Failure {
            class: FailureClass::NotConverged,
            message: format!(
                "periodic regime not reached after {} periods: mean change {:e}, state change {:e}",
                summary.cycles_run, summary.cycle_residual, summary.final_state_change
            ),
        });
    }
    Ok(())
}

/// Outcome of one sweep item.
struct Item {
    h: f64,
    value: Option<f64>,
    error: Option<String>,
}

fn sweep_item(cfg: &SimConfig, setup: &Setup, linear: bool, dir: &Path) -> Result<f64, Failure> {
    create_dir(dir)?;
    if linear {
        let (s, _) = pipeline::run_linear(cfg, setup)?;
        write_json(&dir.join("summary.json"), &s)?;
        Ok(s.gamma0_bar)
    } else {
        let (s, res) = pipeline::run_nonlinear(cfg, setup)?;
        write_json(&dir.join("summary.json"), &s)?;
        write_periods_csv(&res.periods, BufWriter::new(File::create(dir.join("periods.csv"))?))?;
        if !s.converged {
            return Err(Failure {
                class: FailureClass::NotConverged,
                message: format!("not periodic after {} periods", s.cycles_run),
            });
        }
        Ok(s.mean_gamma)
    }
}

fn job_limit(requested: usize) -> usize {
    let cap = std::env::var("PERIPROP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    cap.map_or(requested, |c| requested.min(c)).max(1)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let start = Instant::now();
    if a.h_list.is_empty() {
        return Err(bad_config("--h-list is empty"));
    }
    let linear = match a.mode.as_str() {
        "linear" => true,
        "nonlinear" => false,
        other => return Err(bad_config(format!("unknown mode `{other}`"))),
    };
    let mut base = effective_config(&a.run)?;
    if let Some(p) = a.periods_max {
        base.time.max_periods = p;
    }
    let configs: Vec<SimConfig> = a
        .h_list
        .iter()
        .map(|&h| {
            let mut c = base.clone();
            c.problem.h = h;
            c.validate().map(|_| c).map_err(|e| bad_config(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let out = &a.run.out;
    create_dir(out)?;
    let setup = pipeline::setup(&base)?;
    let jobs = job_limit(a.jobs);
    let mut items: Vec<Option<Item>> = (0..configs.len()).map(|_| None).collect();
    let run_one = |i: usize| {
        let cfg = &configs[i];
        let dir = out.join(format!("h_{}", cfg.problem.h));
        match sweep_item(cfg, &setup, linear, &dir) {
            Ok(v) => Item {
                h: cfg.problem.h,
                value: Some(v),
                error: None,
            },
            Err(f) => Item {
                h: cfg.problem.h,
                value: None,
                error: Some(f.message),
            },
        }
    };
    for chunk in (0..configs.len()).collect::<Vec<_>>().chunks(jobs) {
        let done: Vec<(usize, Item)> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&i| (i, s.spawn(move || run_one(i)))).collect();
            handles.into_iter().map(|(i, h)| (i, h.join().expect("sweep item panicked"))).collect()
        });
        for (i, item) in done {
            items[i] = Some(item);
        }
    }
    let mut items: Vec<Item> = items.into_iter().map(|i| i.expect("every item ran")).collect();
    items.sort_by(|x, y| x.h.total_cmp(&y.h));
    let mut csv = String::from("h,value\n");
    let mut dat = String::from("# h value\n");
    for it in &items {
        match it.value {
            Some(v) => {
                csv.push_str(&format!("{},{}\n", fmt17(it.h), fmt17(v)));
                dat.push_str(&format!("{} {}\n", fmt17(it.h), fmt17(v)));
            }
            None => {
                csv.push_str(&format!("{},NA\n", fmt17(it.h)));
                eprintln!("h = {}: {}", it.h, it.error.as_deref().unwrap_or("failed"));
            }
        }
    }
    std::fs::write(out.join("sweep.csv"), csv)?;
    std::fs::write(out.join("sweep.dat"), dat)?;
    finish("sweep", &base, &setup, out, &["sweep.csv", "sweep.dat"], start)?;
    if items.iter().all(|i| i.value.is_none()) {
        return Err(Failure {
            class: FailureClass::Solver,
            message: "every sweep item failed".into(),
        });
    }
    Ok(())
}

fn cmd_mesh(a: &MeshArgs) -> CmdResult {
    let mesh = match &a.inspect {
        Some(p) => read_mesh(p).map_err(|e| bad_config(e.to_string()))?,
        None => {
            let start = Instant::now();
            let cfg = effective_config(&a.run)?;
            create_dir(&a.run.out)?;
            let setup = pipeline::setup(&cfg)?;
            write_mesh(&setup.mesh, &a.run.out.join("mesh.txt")).map_err(|e| Failure {
                class: FailureClass::Solver,
                message: e.to_string(),
            })?;
            finish("mesh", &cfg, &setup, &a.run.out, &["mesh.txt"], start)?;
            setup.mesh
        }
    };
    mesh.validate().map_err(|e| bad_config(e.to_string()))?;
    let lengths = mesh.body_edge_lengths();
    let (lo, hi) = lengths.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    println!("vertices {}", mesh.num_vertices());
    println!("cells {}", mesh.num_cells());
    println!("body edges {} (length {lo:.4e} .. {hi:.4e})", lengths.len());
    println!("min angle {:.2} deg", mesh.min_angle());
    println!("hash {}", mesh_hash(&mesh));
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> CmdResult {
    let target: Target = a.target.parse().map_err(|e: report::ReportError| bad_config(e.to_string()))?;
    let targets = match &a.targets {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| bad_config(format!("{}: {e}", p.display())))?;
            ReferenceTargets::from_toml_str(&text).map_err(|e| bad_config(e.to_string()))?
        }
        None => ReferenceTargets::builtin(),
    };
    let runs = report::load_runs(&a.runs).map_err(|e| bad_config(e.to_string()))?;
    let table = report::build_table(&runs, &targets, target, a.normalize);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(&a.out, report::to_markdown(&table))?;
    std::fs::write(a.out.with_extension("csv"), report::to_csv(&table))?;
    let missing = table.missing();
    if missing > 0 {
        eprintln!("{missing} run(s) missing for {}", target.name());
        return Err(Failure {
            class: FailureClass::NotConverged,
            message: format!("{missing} required run(s) missing"),
        });
    }
    Ok(())
}
