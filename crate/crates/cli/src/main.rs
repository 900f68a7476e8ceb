use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use spinctrl::experiments::config::config_key_help;
use spinctrl::experiments::persist::{
    run_id, write_csv, write_grid_study, write_json, write_norms, write_run, write_states,
    write_sweep, write_yield_loss,
};
use spinctrl::experiments::{
    compare_controls, gamma_sweep, load_config, run_optimization, uniqueness_study,
    yield_loss_table, ExperimentConfig,
};
use spinctrl::objective::pmp_certificate;
use spinctrl::optimize::{OptimizerReport, Status};
use spinctrl::Error;

/// Proton counts above this need `--long`.
const CI_MAX_PROTONS: usize = 3;

/// Random feasible controls in the maximum-principle check.
const PMP_SAMPLES: usize = 100;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_MAX_ITERS: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "spinctrl",
    version,
    about = "Optimal magnetic-field control of radical-pair spin dynamics",
    after_help = config_key_help()
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Dotted-key override, e.g. `filter.gamma=60`. Repeatable.
    #[arg(short = 'o', long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Results root directory.
    #[arg(long, env = "SPINCTRL_OUT", default_value = "results")]
    out: PathBuf,

    /// Exit with status 3 when an optimizer stops at its iteration cap.
    #[arg(long)]
    strict: bool,

    /// Allow more than three protons (slow).
    #[arg(long)]
    long: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward-simulate the initial control: field, norms and singlet yield.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write every state vector at every node.
        #[arg(long)]
        dump_states: bool,
    },
    /// Optimize one configuration with GPM or IPMP.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Optimize over the configured γ list plus the no-filter baseline.
    SweepGamma {
        #[command(flatten)]
        common: Common,
    },
    /// Yield loss of filtered against no-filter optima.
    YieldLoss {
        #[command(flatten)]
        common: Common,
    },
    /// IPMP from 27-point initializer grids around each configured vertex.
    GridStudy {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the final controls and costs of two run directories.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
    },
    /// Resolve and validate a configuration, printing the result.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let cfg = load_config(common.config.as_deref(), &common.overrides)?;
    if cfg.p > CI_MAX_PROTONS && !common.long {
        bail!(Error::InvalidConfig {
            key: "p".into(),
            reason: format!("{} protons exceeds {CI_MAX_PROTONS}; pass --long to allow it", cfg.p),
        });
    }
    Ok(cfg)
}

fn experiment_dir(common: &Common, name: &str, cfg: &ExperimentConfig) -> PathBuf {
    common.out.join(name).join(run_id(cfg))
}

fn status_code(statuses: impl IntoIterator<Item = Status>, strict: bool) -> ExitCode {
    if strict && statuses.into_iter().any(|s| s == Status::MaxIters) {
        ExitCode::from(EXIT_MAX_ITERS)
    } else {
        ExitCode::SUCCESS
    }
}

fn simulate(common: &Common, dump_states: bool) -> anyhow::Result<ExitCode> {
    let cfg = load(common)?;
    let problem = cfg.problem()?;
    let u = cfg.initial_control(&problem.grid)?;
    let eval = problem.evaluate(&u)?;
    let dir = experiment_dir(common, "simulate", &cfg);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("config.json"), &cfg)?;
    let grid = problem.grid;
    let rows = |values: &[[f64; 3]]| -> Vec<Vec<String>> {
        values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                [grid.node(k), v[0], v[1], v[2]]
                    .iter()
                    .map(f64::to_string)
                    .collect()
            })
            .collect()
    };
    write_csv(&dir.join("control.csv"), &["t", "u_x", "u_y", "u_z"], rows(&u.values))?;
    write_csv(&dir.join("field.csv"), &["t", "v_x", "v_y", "v_z"], rows(&eval.field.nodes))?;
    write_norms(&dir.join("norm.csv"), &eval.forward, &grid)?;
    if dump_states {
        write_states(&dir.join("states.csv"), &eval.forward, &grid)?;
    }
    write_json(&dir.join("summary.json"), &json!({ "singlet_yield": eval.cost.value() }))?;
    println!("singlet yield J = {:.10e}", eval.cost.value());
    println!("results: {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn optimize(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = load(common)?;
    let run = run_optimization(&cfg)?;
    let dir = experiment_dir(common, "optimize", &cfg);
    write_run(&dir, &run)?;
    let r = &run.report;
    let cert = pmp_certificate(&r.final_switching, &r.final_control, &cfg.prism, PMP_SAMPLES, cfg.seed);
    write_json(&dir.join("pmp.json"), &cert)?;
    println!(
        "{:?}: {:?} after {} iterations, J = {:.10e}",
        r.method,
        r.status,
        r.iterations,
        r.final_cost.value()
    );
    println!(
        "maximum principle: residual {}, {} random controls {}",
        cert.residual,
        cert.samples,
        if cert.holds { "all dominated" } else { "NOT all dominated" }
    );
    println!("results: {}", dir.display());
    Ok(status_code([r.status], common.strict))
}

fn sweep_gamma(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = load(common)?;
    let sweep = gamma_sweep(&cfg, &cfg.sweep.gammas)?;
    let dir = experiment_dir(common, "sweep-gamma", &cfg);
    write_sweep(&dir, &cfg, &sweep)?;
    println!("{:>8}  {:>16}  {:<11}  iterations", "gamma", "J", "status");
    for row in &sweep.rows {
        let gamma = row.gamma.map_or_else(|| "none".to_string(), |g| g.to_string());
        println!("{gamma:>8}  {:>16.10e}  {:<11}  {}", row.cost, format!("{:?}", row.status), row.iterations);
    }
    println!("results: {}", dir.display());
    Ok(status_code(sweep.rows.iter().map(|r| r.status), common.strict))
}

fn yield_loss(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = load(common)?;
    if cfg.yield_loss.p_max > CI_MAX_PROTONS && !common.long {
        bail!(Error::InvalidConfig {
            key: "yield_loss.p_max".into(),
            reason: format!(
                "{} exceeds {CI_MAX_PROTONS}; pass --long to allow it",
                cfg.yield_loss.p_max
            ),
        });
    }
    let table = yield_loss_table(&cfg)?;
    let dir = experiment_dir(common, "yield-loss", &cfg);
    write_yield_loss(&dir, &cfg, &table)?;
    println!("{:>2}  {:<9}  {:>12}  {:>12}", "p", "u0", "min loss %", "max loss %");
    for s in &table.summary {
        println!(
            "{:>2}  {:<9}  {:>12.6}  {:>12.6}",
            s.p, s.u0_label, s.min_loss_percent, s.max_loss_percent
        );
    }
    println!("results: {}", dir.display());
    Ok(status_code(table.rows.iter().map(|r| r.status), common.strict))
}

fn grid_study(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = load(common)?;
    let study = uniqueness_study(&cfg)?;
    let dir = experiment_dir(common, "grid-study", &cfg);
    write_grid_study(&dir, &cfg, &study)?;
    println!(
        "{:?}: {} runs, {} distinct controls, max pairwise control {:.4e}, cost {:.4e}",
        study.outcome,
        study.runs.len(),
        study.distinct_controls,
        study.max_pairwise_ctrl,
        study.max_pairwise_cost
    );
    if let Some(gap) = study.max_cycle_gap {
        println!("max relative cost gap within cycles: {gap:.4e}");
    }
    if let Some(d) = study.cross_family {
        println!(
            "between families: control {:.4e}, cost {:.4e}",
            d.rel_ctrl, d.rel_cost
        );
    }
    println!("results: {}", dir.display());
    Ok(status_code(study.runs.iter().map(|r| r.status), common.strict))
}

fn read_report(dir: &Path) -> anyhow::Result<OptimizerReport> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn compare(a: &Path, b: &Path) -> anyhow::Result<ExitCode> {
    let ra = read_report(a)?;
    let rb = read_report(b)?;
    let d = compare_controls(&ra.final_control, &rb.final_control, ra.final_cost, rb.final_cost)?;
    println!("{}", serde_json::to_string_pretty(&d)?);
    Ok(ExitCode::SUCCESS)
}

fn validate(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = load(common)?;
    println!("{}", cfg.to_json_pretty());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Simulate { common, dump_states } => simulate(common, *dump_states),
        Command::Optimize { common } => optimize(common),
        Command::SweepGamma { common } => sweep_gamma(common),
        Command::YieldLoss { common } => yield_loss(common),
        Command::GridStudy { common } => grid_study(common),
        Command::Compare { run_a, run_b } => compare(run_a, run_b),
        Command::Validate { common } => validate(common),
    }
}

fn error_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NumericalAbort { .. }) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    info!("{:?}", cli.command);
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}
