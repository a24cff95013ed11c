use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use molodensky::config::{parse_config, RunConfig, Shape};
use molodensky::experiments::{self, EIGS_HEADER, EOC_HEADER, HESSIAN_HEADER};
use molodensky::io::{report_line, write_csv, write_mesh, REPORT_HEADER};
use molodensky_core::mesh::{build_cube_surface, build_icosphere};

#[derive(Parser)]
#[command(name = "molodensky", version, about = "Nash-Hormander BEM solver for the nonlinear Molodensky problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Icosphere,
    Cube,
}

#[derive(Subcommand)]
enum Command {
    /// Write a mesh in the text format.
    GenMesh {
        #[arg(long, value_enum, default_value = "icosphere")]
        shape: ShapeArg,
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sphere recovery with the iteration; writes the convergence report.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        restart_every: Option<usize>,
        /// Overrides `output` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cube Dirichlet problem: FD Hessian errors for p = 0, 1, 2.
    HessianBench {
        #[arg(long, default_value_t = 3)]
        max_level: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pointwise errors of the linearized model problem over levels.
    EocTable {
        #[arg(long, default_value_t = 3)]
        max_level: usize,
        #[arg(long, default_value_t = 3)]
        iterations: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Laplace-Beltrami eigenvalues on the icosphere.
    Eigs {
        #[arg(long, default_value_t = 3)]
        level: usize,
        /// Highest mode index `M`; eigenpairs `0..=M` are written.
        #[arg(long, default_value_t = 16)]
        modes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("{}", p.display()))
        }
        None => Ok(RunConfig::default()),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn log_header(cfg: &RunConfig) {
    for line in cfg.echo() {
        log::info!("config {line}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMesh { shape, level, out } => {
            let mesh = match shape {
                ShapeArg::Icosphere => build_icosphere(level)?,
                ShapeArg::Cube => build_cube_surface(level)?,
            };
            write_mesh(&mesh, sink(out.as_deref())?)?;
        }
        Command::Run { config, restart_every, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(k) = restart_every {
                cfg.driver.restart_every = (k > 0).then_some(k);
            }
            if out.is_some() {
                cfg.output = out;
            }
            if cfg.shape != Shape::Icosphere {
                bail!("run needs shape=icosphere");
            }
            log_header(&cfg);
            let mut w = sink(cfg.output.as_deref())?;
            w.write_all(cfg.comment_block().as_bytes())?;
            writeln!(w, "{REPORT_HEADER}")?;
            let mut io_err = None;
            let result = experiments::recover_sphere(&cfg, |row| {
                if io_err.is_none() {
                    io_err = writeln!(w, "{}", report_line(row)).and_then(|_| w.flush()).err();
                }
            });
            if let Some(e) = io_err {
                return Err(e.into());
            }
            let report = result.map_err(|(report, e)| anyhow::anyhow!("{e} (after {} logged iterations)", report.rows.len()))?;
            log::info!(
                "finished: converged={} radius {:.6} -> {:.6}",
                report.converged,
                report.initial_radius.0,
                report.final_radius.0
            );
        }
        Command::HessianBench { max_level, config, out } => {
            let cfg = load_config(config.as_deref())?;
            log_header(&cfg);
            let rows = experiments::hessian_bench(max_level, &cfg.driver.quadrature, &cfg.driver.fd)?;
            let floor = experiments::analytic_hessian_floor(&cfg.driver.fd)?;
            let comments = format!("{}# max_level={max_level}\n# analytic_gradient_error={floor:.6e}\n", cfg.comment_block());
            write_csv(sink(out.as_deref())?, &comments, HESSIAN_HEADER, rows.iter().map(experiments::hessian_line))?;
        }
        Command::EocTable { max_level, iterations, config, out } => {
            let cfg = load_config(config.as_deref())?;
            log_header(&cfg);
            let rows = experiments::eoc_table(max_level, iterations, &cfg.driver)?;
            let q = experiments::eoc_point();
            let comments = format!("{}# max_level={max_level}\n# iterations={iterations}\n# q={},{},{}\n", cfg.comment_block(), q.x, q.y, q.z);
            write_csv(sink(out.as_deref())?, &comments, EOC_HEADER, rows.iter().map(experiments::eoc_line))?;
        }
        Command::Eigs { level, modes, out } => {
            let lambda = experiments::eigs(level, modes)?;
            let comments = format!("# level={level}\n# modes={modes}\n");
            let lines = lambda.iter().enumerate().map(|(j, l)| experiments::eigs_line(j, *l));
            write_csv(sink(out.as_deref())?, &comments, EIGS_HEADER, lines)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let reason = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {reason}");
            ExitCode::FAILURE
        }
    }
}
