use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use solq_cli::config::ScenarioConfig;
use solq_cli::{output, presets, runner};

/// Soliton propagation and photon-number correlation simulator.
#[derive(Parser)]
#[command(name = "solq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Output directory (overrides the scenario's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and per-slot back-propagation.
    #[arg(long)]
    threads: Option<usize>,
    /// Enable the Green-matrix cross-check (forces n <= 256).
    #[arg(long)]
    oracle: bool,
    /// Override the solver z step.
    #[arg(long)]
    step: Option<f64>,
    /// Override the grid as `n,t_half_span`.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        /// Scenario file (TOML).
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a built-in preset.
    Preset {
        /// Preset name (see `solq presets`).
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List the built-in presets.
    Presets,
}

fn config_error(msg: &str) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({ "kind": "config", "error": msg })
    );
    ExitCode::from(2)
}

fn apply_flags(cfg: &mut ScenarioConfig, flags: &RunFlags) -> Result<(), String> {
    if flags.oracle {
        cfg.oracle = true;
    }
    if let Some(step) = flags.step {
        cfg.solver.z_step = step;
    }
    if let Some(gspec) = &flags.grid {
        let parts: Vec<&str> = gspec.split(',').collect();
        if parts.len() != 2 {
            return Err(format!("--grid expects `n,t_half_span`, got `{gspec}`"));
        }
        cfg.grid.n = parts[0]
            .trim()
            .parse()
            .map_err(|e| format!("--grid n: {e}"))?;
        cfg.grid.t_half_span = parts[1]
            .trim()
            .parse()
            .map_err(|e| format!("--grid t_half_span: {e}"))?;
    }
    cfg.validate().map_err(|e| e.to_string())
}

fn execute(mut cfg: ScenarioConfig, flags: &RunFlags) -> ExitCode {
    if let Err(msg) = apply_flags(&mut cfg, flags) {
        return config_error(&msg);
    }
    let out_dir = match flags.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from)) {
        Some(d) => d,
        None => return config_error("no output directory: pass --out or set `output`"),
    };

    let run = || runner::run_scenario(&cfg, &out_dir);
    let result = match flags.threads {
        Some(k) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                Ok(p) => p,
                Err(e) => return config_error(&format!("thread pool: {e}")),
            };
            pool.install(run)
        }
        None => run(),
    };

    match result {
        Ok(outcome) => {
            output::print_report(&outcome);
            if outcome.all_tuples_failed() {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "kind": "numerical",
                        "error": "all sweep tuples failed",
                    })
                );
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "kind": "io", "error": e.to_string() })
            );
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, flags } => {
            let text = match std::fs::read_to_string(&scenario) {
                Ok(t) => t,
                Err(e) => {
                    return config_error(&format!("reading {}: {e}", scenario.display()))
                }
            };
            match ScenarioConfig::from_toml(&text) {
                Ok(cfg) => execute(cfg, &flags),
                Err(e) => config_error(&e.to_string()),
            }
        }
        Command::Preset { name, flags } => match presets::by_name(&name) {
            Some(cfg) => execute(cfg, &flags),
            None => config_error(&format!(
                "unknown preset `{name}`; available: {}",
                presets::all()
                    .iter()
                    .map(|p| p.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            )),
        },
        Command::Presets => {
            for p in presets::all() {
                println!("{}  (figure {})", p.name, p.figure);
                println!("    {}", p.summary);
                let cfg = &p.config;
                match cfg.initial {
                    solq_cli::config::InitialConfig::Scalar { gamma, theta, rho } => {
                        println!("    scalar: gamma={gamma} theta={theta} rho={rho}");
                    }
                    solq_cli::config::InitialConfig::Vector { t1, a_coeff, b_coeff } => {
                        println!("    vector: t1={t1} A={a_coeff} B={b_coeff}");
                    }
                }
                println!(
                    "    grid: n={} span={}  z_step={}",
                    cfg.grid.n, cfg.grid.t_half_span, cfg.solver.z_step
                );
                if let Some(r) = &cfg.sweep.rho {
                    println!("    sweep rho = {r:?}");
                }
                if let Some(t) = &cfg.sweep.theta {
                    println!("    sweep theta = {t:?}");
                }
            }
            ExitCode::SUCCESS
        }
    }
}
