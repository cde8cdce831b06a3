use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use annulus::{Execution, InnerState, Params};
use annulus_cli::commands;
use annulus_cli::output::to_json;
use annulus_cli::scan::{run_scan, ScanConfig};

#[derive(Parser)]
#[command(name = "annulus", version, about = "Billiards in an eccentric annulus")]
struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Copy)]
struct Table {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    r: f64,
}

impl Table {
    fn params(self) -> Result<Params> {
        Ok(Params::new(self.delta, self.r)?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Phase portrait of random orbits of the return map.
    Portrait {
        #[command(flatten)]
        table: Table,
        #[arg(long, default_value_t = 50)]
        orbits: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "portrait")]
        out: PathBuf,
    },
    /// One orbit from a given state, as CSV.
    Orbit {
        #[command(flatten)]
        table: Table,
        #[arg(long, allow_hyphen_values = true)]
        omega: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First return of one state with its tangent map.
    ReturnMap {
        #[command(flatten)]
        table: Table,
        #[arg(long, allow_hyphen_values = true)]
        omega: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
    },
    /// Closed-form tangent map against finite differences.
    JacobianCheck {
        #[command(flatten)]
        table: Table,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
    /// Sampled cone and expansion estimates.
    Cones {
        #[command(flatten)]
        table: Table,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Normal periodic points on the table.
    Normals {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 12)]
        m_max: usize,
        /// Also build the closed family with at least this many points.
        #[arg(long)]
        family: Option<usize>,
    },
    /// Strips, crossings and an optional coded periodic point.
    Strips {
        #[command(flatten)]
        table: Table,
        #[arg(long, default_value_t = 12)]
        m_max: usize,
        #[arg(long, default_value_t = 5)]
        min_points: usize,
        /// Comma separated strip indices.
        #[arg(long)]
        word: Option<String>,
        #[arg(long, default_value = "strips")]
        out: PathBuf,
    },
    /// Homoclinic tangency in `r` above a tangent normal point.
    Tangency {
        #[arg(long, default_value_t = 1)]
        p: u32,
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, default_value_t = 0.01)]
        offset: f64,
        #[arg(long, default_value_t = 0.022)]
        r_lo: f64,
        #[arg(long, default_value_t = 0.032)]
        r_hi: f64,
        #[arg(long, default_value_t = 8)]
        m_max: usize,
    },
    /// The predicted tangency curve as CSV.
    Gamma {
        #[arg(long, default_value_t = 1)]
        p: u32,
        #[arg(long, default_value_t = 3)]
        q: u32,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        anchor: f64,
        #[arg(long, default_value_t = 0.1)]
        t_max: f64,
        #[arg(long, default_value_t = 41)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid scan driven by a JSON configuration.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn print<T: serde::Serialize>(v: &T) -> Result<()> {
    print!("{}", to_json(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match cli.cmd {
        Cmd::Portrait { table, orbits, iters, seed, out } => {
            let port = commands::portrait(&table.params()?, orbits, iters, seed, exec);
            port.write(&out)?;
            print(&port.report)
        }
        Cmd::Orbit { table, omega, beta, iters, out } => {
            let (pts, stop) = commands::orbit(InnerState::new(omega, beta), &table.params()?, iters);
            let csv = commands::orbit_csv(&pts)?;
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            if let Some(reason) = stop {
                eprintln!("stopped after {} steps: {reason}", pts.len() - 1);
            }
            Ok(())
        }
        Cmd::ReturnMap { table, omega, beta } => print(&commands::return_map(InnerState::new(omega, beta), &table.params()?)),
        Cmd::JacobianCheck { table, samples, seed, step } => {
            let rep = commands::jacobian_check(&table.params()?, samples, seed, step, exec);
            print(&rep)?;
            if !rep.pass {
                anyhow::bail!("tangent map check failed");
            }
            Ok(())
        }
        Cmd::Cones { table, samples, seed } => print(&commands::cones(&table.params()?, samples, seed, exec)?),
        Cmd::Normals { delta, m_max, family } => print(&commands::normals(delta, m_max, family)?),
        Cmd::Strips { table, m_max, min_points, word, out } => {
            let word = word.as_deref().map(commands::read_word).transpose()?;
            let s = commands::strips(&table.params()?, m_max, min_points, word.as_deref(), exec)?;
            s.write(&out)?;
            print(&s.report)
        }
        Cmd::Tangency { p, q, offset, r_lo, r_hi, m_max } => print(&commands::tangency(p, q, offset, (r_lo, r_hi), m_max)?),
        Cmd::Gamma { p, q, m, anchor, t_max, samples, out } => {
            let c = commands::gamma(p, q, m, anchor, t_max, samples)?;
            let csv = commands::gamma_csv(&c)?;
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Cmd::Scan { config, workers, output_dir, seed } => {
            let mut cfg = ScanConfig::from_file(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let index = run_scan(&cfg)?;
            println!("{}", index.digest);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(annulus_cli::exit_code(&e) as u8)
        }
    }
}
