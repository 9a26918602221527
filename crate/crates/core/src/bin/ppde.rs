//! Command-line front end of the pseudo-Markovian PDE laboratory.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ppde::cli;

#[derive(Parser)]
#[command(name = "ppde", version, about = "Pseudo-Markovian numerical laboratory for path-dependent PDEs")]
struct Cli {
    /// Write the primary output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tail statistics of the recursive hitting sequence under the Wiener
    /// measure (CSV), plus variant-ordering columns.
    HittingStats {
        #[arg(long)]
        epsilon: f64,
        #[arg(long = "L")]
        l: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
    },
    /// Sublinear-expectation estimate of a named functional.
    NonlinExp {
        #[arg(long)]
        functional: String,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        /// Extend the control catalog with bang-bang feedback.
        #[arg(long, default_value_t = false)]
        feedback: bool,
    },
    /// One cone-domain finite-difference solve.
    SolveCone {
        #[arg(long, default_value = "zero")]
        generator: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        l1: f64,
        #[arg(long)]
        dx: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 0.0)]
        c0: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value = "exit-time")]
        boundary: String,
        #[arg(long, default_value_t = 0.0)]
        boundary_value: f64,
        /// Problem file supplying the generator when --generator custom-config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also emit the full field as CSV (to --out, or stdout after the JSON).
        #[arg(long, default_value_t = false)]
        field_csv: bool,
    },
    /// Upper/lower cascade roots of a configured problem.
    Cascade {
        /// Problem configuration file (TOML).
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        /// Base-layer family: wiener | default | feedback.
        #[arg(long, default_value = "default")]
        family: String,
        /// Restrict the discount catalog to {0}.
        #[arg(long, default_value_t = false)]
        zero_discount: bool,
    },
    /// Direct vs path-frozen stochastic control value.
    Shjb {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Upper/lower game values of a configured zero-sum game.
    Isaacs {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Bundled verification suites (exit status 1 on any failure).
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn io_err(e: std::io::Error) -> ppde::Error {
    ppde::Error::Config(format!("io: {e}"))
}

fn run() -> Result<bool, ppde::Error> {
    ppde::util::install_worker_pool();
    let cli = Cli::parse();
    let mut all_pass = true;
    match cli.command {
        Command::HittingStats { epsilon, l, samples, seed, step, horizon, n_max } => {
            let (json, csv) = cli::run_hitting_stats(epsilon, l, samples, seed, step, horizon, n_max)?;
            println!("{json}");
            emit(&cli.out, &csv).map_err(io_err)?;
        }
        Command::NonlinExp { functional, l, horizon, dim, samples, seed, feedback } => {
            let json = cli::run_nonlin_exp(&functional, l, horizon, dim, samples, seed, feedback)?;
            emit(&cli.out, &format!("{json}\n")).map_err(io_err)?;
        }
        Command::SolveCone {
            generator,
            epsilon,
            l1,
            dx,
            dt,
            l,
            c0,
            horizon,
            boundary,
            boundary_value,
            config,
            field_csv,
        } => {
            let config_text = match &config {
                Some(path) => Some(std::fs::read_to_string(path).map_err(io_err)?),
                None => None,
            };
            let (json, csv) = cli::run_solve_cone(
                &generator, epsilon, l1, dx, dt, l, c0, horizon, &boundary, boundary_value, field_csv,
                config_text.as_deref(),
            )?;
            println!("{json}");
            if let Some(csv) = csv {
                emit(&cli.out, &csv).map_err(io_err)?;
            }
        }
        Command::Cascade { problem, epsilon, m, dx, dt, samples, seed, family, zero_discount } => {
            let text = std::fs::read_to_string(&problem).map_err(io_err)?;
            let json = cli::run_cascade(&text, epsilon, m, dx, dt, samples, seed, &family, zero_discount)?;
            emit(&cli.out, &format!("{json}\n")).map_err(io_err)?;
        }
        Command::Shjb { problem, t, x, epsilon, samples, seed } => {
            let text = std::fs::read_to_string(&problem).map_err(io_err)?;
            let json = cli::run_shjb(&text, t, x, epsilon, samples, seed)?;
            emit(&cli.out, &format!("{json}\n")).map_err(io_err)?;
        }
        Command::Isaacs { game, depth, epsilon, samples, seed } => {
            let text = std::fs::read_to_string(&game).map_err(io_err)?;
            let json = cli::run_isaacs(&text, depth, epsilon, samples, seed)?;
            emit(&cli.out, &format!("{json}\n")).map_err(io_err)?;
        }
        Command::Verify { suite, seed } => {
            let checks = cli::run_verify(&suite, seed)?;
            let mut lines = String::new();
            for c in &checks {
                all_pass &= c.pass;
                lines.push_str(&format!("{} {} — {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
            }
            emit(&cli.out, &lines).map_err(io_err)?;
        }
    }
    Ok(all_pass)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
