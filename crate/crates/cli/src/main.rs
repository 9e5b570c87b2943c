use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use codesign_core::av::{parse_projection, sweep, write_exports, AvConfig, Manifest, QueryReport, Study};
use codesign_core::control::{run_closed_loop, ControllerChoice, Task};
use codesign_core::design::{cell_noise, task_path, Catalog, Family, NoiseCell, SimCache};
use codesign_core::plant::{write_path_csv, write_trace_csv};

const CACHE_FILE: &str = "sim_cache.csv";

#[derive(Parser)]
#[command(name = "av-codesign", version, about = "Co-design of autonomous vehicle control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Study configuration (JSON).
    #[arg(long, default_value = "configs/default.json")]
    config: PathBuf,
    /// Base seed of the Monte Carlo runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs per grid cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Directory holding the simulation cache.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Resource pairs for 2D reports, e.g. `err,effort|cost,err`.
    #[arg(long)]
    projection: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Single closed-loop run of the configured task; writes the trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Parameter label (e.g. `stanley(g=0.5)`) or family name (first grid entry).
        #[arg(long, default_value = "stanley")]
        controller: String,
        /// Measurement noise scale.
        #[arg(long, default_value_t = 1.0)]
        v_scale: f64,
    },
    /// Simulates the design grid and fills the cache.
    Build {
        #[command(flatten)]
        common: Common,
    },
    /// Solves the configured query and exports the front.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Solves the configured chain of tasks and checks that fronts are nested.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Re-exports a saved `front.json`.
    Export {
        #[command(flatten)]
        common: Common,
        /// Front produced by `solve`.
        #[arg(long)]
        input: PathBuf,
    },
}

fn load(common: &Common) -> Result<(AvConfig, Catalog)> {
    let mut config = AvConfig::load(&common.config).with_context(|| format!("loading {}", common.config.display()))?;
    if let Some(s) = common.seed {
        config.build.seed = s;
    }
    if let Some(r) = common.runs {
        config.build.runs = r;
    }
    if let Some(p) = &common.projection {
        config.projections = parse_projection(p)?;
    }
    config.validate()?;
    let catalog = config.load_catalog()?;
    Ok((config, catalog))
}

fn open_cache(common: &Common) -> Result<Option<SimCache>> {
    match &common.cache {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Ok(Some(SimCache::open(&dir.join(CACHE_FILE))?))
        }
        None => Ok(None),
    }
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<(String, String)> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(dir.join(name), &text)?;
    Ok((name.to_string(), codesign_core::av::Manifest::file_hash(text.as_bytes())))
}

fn simulate(common: &Common, controller: &str, v_scale: f64) -> Result<ExitCode> {
    let (config, catalog) = load(common)?;
    let settings = config.settings();
    let params = match controller.parse::<Family>() {
        Ok(f) => config.grids.params(f)?.into_iter().next().context("empty parameter grid")?,
        Err(_) => Family::ALL
            .iter()
            .flat_map(|&f| config.grids.params(f).unwrap_or_default())
            .find(|p| p.label == controller)
            .with_context(|| format!("no parameter set labelled `{controller}`"))?,
    };
    let choice = match (params.lateral(), params.pid()) {
        (Some(lateral), _) => ControllerChoice { lateral, pid: settings.reference_pid },
        (None, Some(pid)) => ControllerChoice { lateral: settings.reference_lateral, pid },
        _ => bail!("unsupported parameter set"),
    };
    let path = task_path(&config.task, &settings)?;
    let cell = NoiseCell { w_scale: config.nuisance.w_scale, v_scale, drop_p: config.nuisance.drop_p };
    let noise = cell_noise(&cell, &settings)?;
    let task = Task { path: path.clone(), v_t: config.task.speed };
    let out = run_closed_loop(&choice, &task, &noise, &settings.sim, true)?;
    std::fs::create_dir_all(&common.out)?;
    let trace = out.trace.clone().unwrap_or_default();
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace)?;
    std::fs::write(common.out.join("trace.csv"), &buf)?;
    let mut files = vec![("trace.csv".to_string(), Manifest::file_hash(&buf))];
    let mut pbuf = Vec::new();
    write_path_csv(&mut pbuf, &path)?;
    std::fs::write(common.out.join("path.csv"), &pbuf)?;
    files.push(("path.csv".to_string(), Manifest::file_hash(&pbuf)));
    let summary = serde_json::json!({
        "controller": params.label,
        "metrics": out.metrics,
        "steps": out.steps,
        "completed": out.completed,
    });
    files.push(write_json(&common.out, "run.json", &summary)?);
    Manifest::new("simulate", &config, &catalog, files.into_iter().collect()).write(&common.out)?;
    println!(
        "{}: e_p_tot={} delta_tot={} completed={}",
        params.label, out.metrics.e_p_tot, out.metrics.delta_tot, out.completed
    );
    Ok(ExitCode::SUCCESS)
}

fn build_study(common: &Common, save: bool) -> Result<(AvConfig, Catalog, Study)> {
    let (config, catalog) = load(common)?;
    let mut cache = open_cache(common)?;
    let study = Study::build(&config, &catalog, cache.as_mut())?;
    if save {
        if let Some(c) = cache.as_mut() {
            c.save()?;
        }
    }
    Ok((config, catalog, study))
}

fn build(common: &Common) -> Result<ExitCode> {
    let (config, catalog, study) = build_study(common, true)?;
    let files = [
        write_json(&common.out, "lateral.json", &study.lateral)?,
        write_json(&common.out, "longitudinal.json", &study.longitudinal)?,
        write_json(&common.out, "diagram.json", &study.diagram)?,
    ];
    Manifest::new("build", &config, &catalog, files.into_iter().collect()).write(&common.out)?;
    println!(
        "lateral: {} implementations, longitudinal: {} implementations",
        study.lateral.implementations.len(),
        study.longitudinal.implementations.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn print_front(r: &QueryReport) {
    let names: Vec<&str> = r.resource_poset.components().iter().map(|c| c.name.as_str()).collect();
    println!("{} minimal designs for {}", r.points.len(), r.functionality);
    println!("  {}", names.join(", "));
    for p in &r.points {
        let d = p.designs.first().map(|d| d.values().cloned().collect::<Vec<_>>().join(" | ")).unwrap_or_default();
        println!("  ({})  {d}", r.rendered(p).join(", "));
    }
}

fn solve(common: &Common) -> Result<ExitCode> {
    let (config, catalog, study) = build_study(common, false)?;
    let report = study.query(&config.task, &config.nuisance)?;
    let files = write_exports(&report, &config.projections, &common.out)?;
    Manifest::new("solve", &config, &catalog, files).write(&common.out)?;
    print_front(&report);
    Ok(if report.is_infeasible() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn run_sweep(common: &Common) -> Result<ExitCode> {
    let (config, catalog, study) = build_study(common, false)?;
    let report = sweep(&study, &config.sweep, &config.nuisance)?;
    let mut files = std::collections::BTreeMap::new();
    for (i, front) in report.fronts.iter().enumerate() {
        let dir = common.out.join(format!("task_{i}"));
        for (name, hash) in write_exports(front, &config.projections, &dir)? {
            files.insert(format!("task_{i}/{name}"), hash);
        }
    }
    let (name, hash) = write_json(&common.out, "sweep.json", &report.steps)?;
    files.insert(name, hash);
    Manifest::new("sweep", &config, &catalog, files).write(&common.out)?;
    for s in &report.steps {
        println!(
            "{} {:?} {} -> {} {:?} {}: {} violations",
            s.from.scenario.name(),
            s.from.curvature,
            s.from.speed,
            s.to.scenario.name(),
            s.to.curvature,
            s.to.speed,
            s.violations.len()
        );
    }
    Ok(if report.fronts.iter().any(QueryReport::is_infeasible) { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn export(common: &Common, input: &Path) -> Result<ExitCode> {
    let (config, catalog) = load(common)?;
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let report = QueryReport::from_json(&text)?;
    let files = write_exports(&report, &config.projections, &common.out)?;
    Manifest::new("export", &config, &catalog, files).write(&common.out)?;
    Ok(if report.is_infeasible() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, controller, v_scale } => simulate(common, controller, *v_scale),
        Command::Build { common } => build(common),
        Command::Solve { common } => solve(common),
        Command::Sweep { common } => run_sweep(common),
        Command::Export { common, input } => export(common, input),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
