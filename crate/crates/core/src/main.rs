use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use helfrich::config::RunConfig;
use helfrich::flow::{self, Outcome, RunResult};
use helfrich::stationary::{self, CircleCriticality};
use helfrich::verify::{print_table, Suite};

const OK: u8 = 0;
const SUITE_FAILED: u8 = 1;
const CONFIG_ERROR: u8 = 2;
const ABORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "helfrich", version, about = "Gradient flow of the generalised Helfrich energy for closed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow simulations.
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    /// Critical circle radii and their discrete residuals.
    Circles {
        #[arg(long, value_enum)]
        case: CaseArg,
        /// Rotation angle, case iv only.
        #[arg(long, allow_negative_numbers = true)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        c0: f64,
        /// Translation vector for case ii, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,0", allow_negative_numbers = true)]
        m: Vec<f64>,
        /// Nodes used for residual checks.
        #[arg(long, default_value_t = 512)]
        nodes: usize,
        /// Angles in the sweep.
        #[arg(long, default_value_t = 512)]
        angles: usize,
        /// Directory for figure1.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a bundled verification suite.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
    },
}

#[derive(Subcommand)]
enum FlowAction {
    /// Integrate the flow described by a TOML config.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    I,
    Ii,
    Iii,
    Iv,
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Gradient,
    Circles,
    Example1,
    Monitors,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Gradient => Suite::Gradient,
            SuiteArg::Circles => Suite::Circles,
            SuiteArg::Example1 => Suite::Example1,
            SuiteArg::Monitors => Suite::Monitors,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Flow { action: FlowAction::Run { config } } => cmd_flow_run(&config),
        Command::Circles { case, theta, lambda, c0, m, nodes, angles, out } => {
            cmd_circles(case, theta, lambda, c0, &m, nodes, angles, &out)
        }
        Command::Verify { suite } => cmd_verify(suite.into()),
    };
    ExitCode::from(code)
}

fn cmd_flow_run(path: &Path) -> u8 {
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return CONFIG_ERROR;
        }
    };
    let curve = match cfg.initial_curve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return CONFIG_ERROR;
        }
    };
    let result = match flow::run(&curve, &cfg.spec, &cfg.flow) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ABORTED;
        }
    };
    if let Err(e) = write_run(&cfg.output_dir, &result) {
        eprintln!("error: cannot write to {}: {e}", cfg.output_dir.display());
        return SUITE_FAILED;
    }
    println!("{}", summary(&result));
    match result.outcome {
        Outcome::Aborted => {
            eprintln!("run aborted: {}", result.diagnostics.abort_reason.as_deref().unwrap_or("unknown"));
            ABORTED
        }
        _ => OK,
    }
}

fn summary(result: &RunResult) -> serde_json::Value {
    let d = &result.diagnostics;
    let last = d.records.last();
    json!({
        "outcome": result.outcome.as_str(),
        "t": result.state.t,
        "steps": d.steps,
        "initial_energy": d.initial_energy,
        "final_energy": last.map(|r| r.energy.total),
        "final_residual": last.map(|r| r.residual),
        "centroid_displacement": d.centroid_displacement(),
        "centroid_velocity": d.centroid_velocity(),
        "max_energy_increase": d.max_energy_increase,
        "monitor_violations": d.monitor_violations().len(),
        "abort_reason": d.abort_reason,
    })
}

fn write_run(dir: &Path, result: &RunResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut traj = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    let dim = result.state.curve.dim();
    let coords: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    writeln!(traj, "t,node_index,{}", coords.join(","))?;
    for r in &result.diagnostics.records {
        for i in 0..r.curve.len() {
            write!(traj, "{:.16e},{i}", r.t)?;
            for x in r.curve.point(i) {
                write!(traj, ",{x:.16e}")?;
            }
            writeln!(traj)?;
        }
    }
    traj.flush()?;
    write_json(&dir.join("diagnostics.json"), &result.diagnostics.records)?;
    write_json(&dir.join("summary.json"), &summary(result))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

#[allow(clippy::too_many_arguments)]
fn cmd_circles(case: CaseArg, theta: Option<f64>, lambda: f64, c0: f64, m: &[f64], nodes: usize, angles: usize, out: &Path) -> u8 {
    if !(lambda > 0.0) {
        eprintln!("error: --lambda must be positive, got {lambda}");
        return CONFIG_ERROR;
    }
    let printed = match case {
        CaseArg::I => stationary::case_i(lambda, c0, nodes).map(critical_json),
        CaseArg::Iii => stationary::case_iii(lambda, c0, nodes).map(critical_json),
        CaseArg::Iv => match theta {
            Some(t) => stationary::radii_case_iv(t, lambda, c0, nodes).map(critical_json),
            None => {
                eprintln!("error: case iv needs --theta");
                return CONFIG_ERROR;
            }
        },
        CaseArg::Ii => stationary::nonexistence_scan_case_ii(m, lambda, c0, (0.1, 10.0), 200, nodes)
            .map(|scan| json!({ "case": "translation_nonzero", "radii": [], "scan": scan })),
        CaseArg::Sweep => {
            if angles < 2 {
                eprintln!("error: --angles must be at least 2");
                return CONFIG_ERROR;
            }
            let rows = stationary::sweep_figure1(lambda, c0, &stationary::theta_grid(angles));
            let path = out.join("figure1.csv");
            let written = fs::create_dir_all(out)
                .map_err(helfrich::Error::from)
                .and_then(|_| File::create(&path).map_err(helfrich::Error::from))
                .and_then(|f| stationary::write_figure1_csv(&rows, BufWriter::new(f)));
            if let Err(e) = written {
                eprintln!("error: cannot write {}: {e}", path.display());
                return SUITE_FAILED;
            }
            let counts: Vec<usize> = rows.iter().map(|(_, r)| r.len()).collect();
            Ok(json!({
                "path": path.display().to_string(),
                "rows": rows.len(),
                "min_roots": counts.iter().min(),
                "max_roots": counts.iter().max(),
                "first": rows.first().map(|(t, r)| json!({ "theta": t, "radii": r })),
            }))
        }
    };
    match printed {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
            OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            CONFIG_ERROR
        }
    }
}

fn critical_json(c: CircleCriticality) -> serde_json::Value {
    serde_json::to_value(c).expect("criticality serializes")
}

fn cmd_verify(suite: Suite) -> u8 {
    println!("suite {suite}");
    let checks = suite.run();
    let _ = print_table(&checks, io::stdout().lock());
    if checks.iter().all(|c| c.passed) {
        OK
    } else {
        SUITE_FAILED
    }
}
