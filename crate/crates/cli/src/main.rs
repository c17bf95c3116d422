use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rabisense::dynamics::Parameter;
use rabisense_cli::commands::{
    cmd_collapse, cmd_detector_demo, cmd_fisher, cmd_kappa_fit, cmd_replay, cmd_steady_scan, CollapseOptions,
    FisherOptions, ReplayOptions,
};
use rabisense_cli::manifest::RunStatus;
use rabisense_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rabisense", version, about = "Monitored quantum Rabi model: simulation, Fisher information and scaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads (0: all cores), overriding the config.
    #[arg(short, long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ParameterArg {
    Omega,
    Kappa,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state occupation at the critical point for each eta.
    SteadyScan(ConfigArgs),
    /// Fisher information from simulated trajectories; resumes interrupted runs.
    Fisher {
        #[command(flatten)]
        args: ConfigArgs,
        /// Discard stored trajectories and start over.
        #[arg(long)]
        fresh: bool,
        /// Stop after storing this many new trajectories.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Finite-size collapse of two or more Fisher tables.
    Collapse {
        /// Fisher CSV tables, one per system size.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// System sizes in input order, if the tables carry no eta column.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<f64>>,
        /// Noiseless tables in the same order, for the quality factor.
        #[arg(long, value_delimiter = ',')]
        ideal: Vec<PathBuf>,
        /// Rate multiplying t on the horizontal axis.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, num_args = 2, default_values_t = [1.0, 3.0])]
        a_range: Vec<f64>,
        #[arg(long, num_args = 2, default_values_t = [0.0, 2.0])]
        b_range: Vec<f64>,
        /// Exponents for the reported measure and quality factor.
        #[arg(long, num_args = 2, default_values_t = [2.0, 1.0])]
        fixed: Vec<f64>,
        #[arg(long)]
        no_optimize: bool,
        #[arg(short, long, default_value = "output")]
        output: PathBuf,
    },
    /// One conditional trajectory of the mode monitored through the ancilla.
    DetectorDemo(ConfigArgs),
    /// Induced damping rate of the ancilla detector and its parameter trends.
    KappaFit(ConfigArgs),
    /// Fisher information from a stored record container at a new step.
    Replay {
        records: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value = "omega")]
        parameter: ParameterArg,
        /// Checkpoint times.
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(short, long, default_value_t = 0)]
        workers: usize,
        #[arg(short, long, default_value = "output")]
        output: PathBuf,
    },
}

fn pair(v: &[f64]) -> (f64, f64) {
    (v[0], v[1])
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::SteadyScan(args) => {
            let r = cmd_steady_scan(&args.load()?)?;
            for row in &r.rows {
                match row.n_two_ion {
                    Some(n) => println!("eta = {}: <n> = {:.6} (two-ion {:.6})", row.eta, row.n_ideal, n),
                    None => println!("eta = {}: <n> = {:.6}", row.eta, row.n_ideal),
                }
            }
            if let Some((s, r2)) = r.slope {
                println!("log-log slope {s:.4} (R^2 = {r2:.4})");
            }
        }
        Command::Fisher { args, fresh, stop_after } => {
            let r = cmd_fisher(&args.load()?, &FisherOptions { fresh, stop_after })?;
            for (eta, est) in &r.estimates {
                println!("eta = {eta}: {} trajectories, {} failed, delta = {:e}", est.n_trajectories, est.n_failed, est.delta);
            }
            if r.status == RunStatus::Interrupted {
                println!("stopped early; run again to resume");
            }
        }
        Command::Collapse { inputs, sizes, ideal, kappa, a_range, b_range, fixed, no_optimize, output } => {
            let mut opts = CollapseOptions::new(inputs, output);
            opts.sizes = sizes;
            opts.ideal = ideal;
            opts.time_scale = kappa;
            opts.a_range = pair(&a_range);
            opts.b_range = pair(&b_range);
            opts.fixed = pair(&fixed);
            opts.no_optimize = no_optimize;
            let r = cmd_collapse(&opts)?;
            if let (Some(a), Some(b), Some(m)) = (r.a_opt, r.b_opt, r.measure_opt) {
                println!("optimum a = {a:.4}, b = {b:.4}, M = {m:.4e} {}", r.warnings);
            }
            println!("M(a = {}, b = {}) = {:.4e}", r.a_fixed, r.b_fixed, r.measure_fixed);
            if let Some(q) = r.quality_factor {
                println!("Q = {q:.4}");
            }
        }
        Command::DetectorDemo(args) => {
            let r = cmd_detector_demo(&args.load()?)?;
            println!("{} detections", r.total_clicks);
            if let Some(n) = r.empirical_n_ph {
                println!("N_ph = {n:.2} (expected {:.2})", r.expected_n_ph);
            }
        }
        Command::KappaFit(args) => {
            let r = cmd_kappa_fit(&args.load()?)?;
            let b = r.base();
            println!("kappa = {:.6e} (estimate {:.6e}, R^2 = {:.5})", b.kappa_fit, b.kappa_analytic, b.r2);
            for s in &r.slopes {
                println!("slope vs {}: {:.3} (R^2 = {:.4})", s.sweep, s.slope, s.r2);
            }
        }
        Command::Replay { records, delta, parameter, checkpoints, eta, workers, output } => {
            let parameter = match parameter {
                ParameterArg::Omega => Parameter::Omega,
                ParameterArg::Kappa => Parameter::Kappa,
            };
            let est = cmd_replay(&ReplayOptions { records, delta, parameter, checkpoints, eta, workers, output })?;
            println!("{} trajectories replayed, {} failed", est.n_trajectories, est.n_failed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core { source, .. } = &e {
                let mut cause = std::error::Error::source(source);
                while let Some(c) = cause {
                    eprintln!("  caused by: {c}");
                    cause = c.source();
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
