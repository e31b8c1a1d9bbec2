use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use stlnav::report::{MonitorSpec, Report};
use stlnav::scenario::{
    load_scenario_with, parse_scenario, Overrides, Scenario, SLOW_ZONE_CFG, STATION_CFG,
};
use stlnav::sim::{obstacle_state, run_scenario, sig9, to_csv, TrajectoryLog};
use stlnav::stl::parse_formula;

const EXIT_REJECTED: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "plan",
    version,
    about = "Simulate STL navigation scenarios and check their logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the trajectory, report and plot data.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Output directory (default: $PLAN_LOG_DIR, else ./<name>-output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a trajectory CSV with the offline monitor.
    Report {
        csv: PathBuf,
        /// Formula to check instead of the one stored next to the CSV.
        #[arg(long, conflicts_with = "config")]
        formula: Option<String>,
        /// Take formula and obstacles from a scenario file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, requires = "config")]
        seed: Option<u64>,
    },
    /// Validate a scenario without running it.
    Check { config: PathBuf },
    /// Run every `*.cfg` file in a directory.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct RunFlags {
    /// Keep the initial deadlines instead of re-timing them.
    #[arg(long)]
    no_retime: bool,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            seed: self.seed,
            eta: self.eta,
            kappa: self.kappa,
            no_retime: self.no_retime,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, flags, out } => cmd_run(&config, &flags, out),
        Command::Report {
            csv,
            formula,
            config,
            seed,
        } => cmd_report(&csv, formula, config, seed),
        Command::Check { config } => cmd_check(&config),
        Command::Batch { dir, flags, out } => cmd_batch(&dir, &flags, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_REJECTED),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Loads a scenario; the names of the bundled scenarios resolve to the
/// built-in copies when no such file exists.
fn load(path: &Path, ov: &Overrides) -> Result<Scenario, String> {
    if !path.exists() {
        let bundled = match path.to_str() {
            Some("station.cfg") => Some(("station", STATION_CFG)),
            Some("slow_zone.cfg") => Some(("slow_zone", SLOW_ZONE_CFG)),
            _ => None,
        };
        if let Some((name, text)) = bundled {
            return parse_scenario(text, name, ov).map_err(|e| e.to_string());
        }
    }
    load_scenario_with(path, ov).map_err(|e| e.to_string())
}

fn output_dir(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.or_else(|| std::env::var_os("PLAN_LOG_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("{name}-output")))
}

struct RunResult {
    report: Report,
    dir: PathBuf,
}

fn run_one(sc: &Scenario, dir: &Path) -> Result<RunResult, String> {
    let log = run_scenario(sc).map_err(|e| format!("{}: simulation aborted: {e}", sc.name))?;
    let report = Report::from_log_rounded(&log.records, &sc.formula, &sc.world.obstacles);
    write_outputs(sc, &log, &report, dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(RunResult {
        report,
        dir: dir.to_path_buf(),
    })
}

fn write_outputs(
    sc: &Scenario,
    log: &TrajectoryLog,
    report: &Report,
    dir: &Path,
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), to_csv(&log.records))?;
    fs::write(dir.join("report.txt"), report.render())?;
    let formula = sc.formula.to_string();
    fs::write(dir.join("formula.stl"), format!("{formula}\n"))?;
    let spec = MonitorSpec {
        formula,
        obstacles: sc.world.obstacles.clone(),
    };
    fs::write(dir.join("monitor.toml"), spec.to_toml())?;

    let mut speed = String::from("# t speed vmax\n");
    let mut barrier = String::from("# t b\n");
    let mut path = String::from("# t x y");
    for o in &sc.world.obstacles {
        let _ = write!(path, " {0}_x {0}_y", o.id);
    }
    path.push('\n');
    for r in &log.records {
        let _ = writeln!(speed, "{} {} {}", sig9(r.t), sig9(r.speed), sig9(r.vmax));
        let _ = writeln!(barrier, "{} {}", sig9(r.t), sig9(r.b));
        let _ = write!(path, "{} {} {}", sig9(r.t), sig9(r.x[0]), sig9(r.x[1]));
        for o in &sc.world.obstacles {
            let (c, _) = obstacle_state(o, r.t);
            let _ = write!(path, " {} {}", sig9(c.x), sig9(c.y));
        }
        path.push('\n');
    }
    fs::write(dir.join("speed.dat"), speed)?;
    fs::write(dir.join("barrier.dat"), barrier)?;
    fs::write(dir.join("path.dat"), path)?;
    Ok(())
}

fn cmd_run(config: &Path, flags: &RunFlags, out: Option<PathBuf>) -> Result<bool, String> {
    let sc = load(config, &flags.overrides())?;
    for w in sc.schedule().warnings {
        eprintln!("warning: {w}");
    }
    let dir = output_dir(out, &sc.name);
    let res = run_one(&sc, &dir)?;
    print!("{}", res.report.render());
    println!("output written to {}", res.dir.display());
    Ok(res.report.accepted())
}

fn cmd_report(
    csv: &Path,
    formula: Option<String>,
    config: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<bool, String> {
    let text =
        fs::read_to_string(csv).map_err(|e| format!("cannot read {}: {e}", csv.display()))?;
    let dir = csv.parent().unwrap_or(Path::new("."));
    let spec = if let Some(cfg) = config {
        let sc = load(
            &cfg,
            &Overrides {
                seed,
                ..Overrides::default()
            },
        )?;
        MonitorSpec {
            formula: sc.formula.to_string(),
            obstacles: sc.world.obstacles,
        }
    } else {
        let sidecar = dir.join("monitor.toml");
        let mut spec = match fs::read_to_string(&sidecar) {
            Ok(s) => {
                MonitorSpec::from_toml(&s).map_err(|e| format!("{}: {e}", sidecar.display()))?
            }
            Err(_) if formula.is_some() => MonitorSpec {
                formula: String::new(),
                obstacles: Vec::new(),
            },
            Err(e) => {
                return Err(format!(
                    "cannot read {}: {e} (pass --formula or --config)",
                    sidecar.display()
                ))
            }
        };
        if let Some(f) = formula {
            spec.formula = f;
        }
        spec
    };
    parse_formula(&spec.formula).map_err(|e| format!("formula: {e}"))?;
    let report = Report::from_csv(&text, &spec).map_err(|e| format!("{}: {e}", csv.display()))?;
    print!("{}", report.render());
    Ok(report.accepted())
}

fn cmd_check(config: &Path) -> Result<bool, String> {
    let sc = load(config, &Overrides::default())?;
    let sched = sc.schedule();
    for w in &sched.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: ok ({} tasks, {} invariants, {} obstacles, {} zones, horizon {} s)",
        sc.name,
        sched.tasks.len(),
        sched.invariants.len(),
        sc.world.obstacles.len(),
        sc.world.zones.len(),
        sc.formula.horizon()
    );
    Ok(true)
}

fn cmd_batch(dir: &Path, flags: &RunFlags, out: Option<PathBuf>) -> Result<bool, String> {
    let mut configs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        return Err(format!("no .cfg files in {}", dir.display()));
    }
    let root = output_dir(out, "batch");
    let ov = flags.overrides();
    let results: Vec<(PathBuf, Result<RunResult, String>)> = configs
        .par_iter()
        .map(|cfg| {
            let res = load(cfg, &ov).and_then(|sc| run_one(&sc, &root.join(&sc.name)));
            (cfg.clone(), res)
        })
        .collect();
    let mut all_ok = true;
    for (cfg, res) in results {
        match res {
            Ok(r) => {
                let ok = r.report.accepted();
                all_ok &= ok;
                println!(
                    "{:<8} {}  movement {:.2} s  replans {}  -> {}",
                    if ok { "accepted" } else { "rejected" },
                    cfg.display(),
                    r.report.movement_time,
                    r.report.replan_events,
                    r.dir.display()
                );
            }
            Err(e) => {
                all_ok = false;
                println!("error    {}: {e}", cfg.display());
            }
        }
    }
    Ok(all_ok)
}
