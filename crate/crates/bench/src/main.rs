use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use megopolis::{io as formats, Algorithm, Precision};
use megopolis_bench::experiment::{generate, ExperimentSpec, Overrides, Profile, WeightFamily};
use megopolis_bench::output::{read_table, write_rows, Table};
use megopolis_bench::{pf, plotdata, quality, traffic};

/// Resampler quality, memory-traffic and particle-filter experiments.
#[derive(Parser)]
#[command(name = "megobench", version)]
struct Cli {
    /// JSON experiment file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid defaults: desk (minutes on a laptop) or paper (full scale).
    #[arg(long, global = true)]
    profile: Option<Profile>,
    /// Weight precision: single or double.
    #[arg(long, global = true)]
    precision: Option<Precision>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Grid {
    /// Comma-separated resamplers, e.g. megopolis,metropolis,c1-ps128.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Comma-separated particle counts.
    #[arg(long = "n", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    family: Option<WeightFamily>,
    /// Comma-separated weight parameters (y or alpha).
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<f64>>,
    /// Gamma rate.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed iteration budget instead of one derived from epsilon.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// MSE, variance and bias of repeated resampling.
    Quality {
        #[command(flatten)]
        grid: Grid,
        /// Resamples per weight sequence (K).
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        sequences: Option<usize>,
        /// Add wall-clock columns; output is then no longer reproducible.
        #[arg(long)]
        timings: bool,
    },
    /// Modelled memory transactions of the comparison reads.
    Traffic {
        #[command(flatten)]
        grid: Grid,
        /// Warps replayed per point.
        #[arg(long)]
        warp_sample: Option<usize>,
        /// Replay every warp.
        #[arg(long, conflicts_with = "warp_sample")]
        all_warps: bool,
    },
    /// Particle-filter RMSE over an iteration-budget grid. Filter weights are
    /// always double precision.
    Pf {
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
        /// Comma-separated fixed budgets.
        #[arg(long, value_delimiter = ',', conflicts_with = "runtime_budget")]
        b_grid: Option<Vec<usize>>,
        /// Choose the budget at every step from a subset of the weights.
        #[arg(long)]
        runtime_budget: bool,
        #[arg(long)]
        timings: bool,
    },
    /// Write one synthetic weight vector.
    GenWeights {
        #[arg(long, default_value = "gaussian")]
        family: WeightFamily,
        /// y for gaussian, alpha for gamma.
        #[arg(long)]
        param: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "bin")]
        format: Format,
    },
    /// Reshape a results file into long-format plot data.
    Plotdata {
        #[arg(long)]
        results: PathBuf,
        /// One of: mse-vs-N, mse-vs-param, bias-contribution, traffic-vs-N,
        /// traffic-ratio, pf-rmse, pf-resample-ratio.
        #[arg(long)]
        figure: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

impl Grid {
    fn overrides(self) -> Overrides {
        Overrides {
            algorithms: self.algorithms,
            n_grid: self.n_grid,
            family: self.family,
            params: self.params,
            beta: self.beta,
            epsilon: self.epsilon,
            iterations: self.iterations,
            ..Default::default()
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn resolve(cli: &Cli, command: Overrides) -> Result<ExperimentSpec> {
    let file = match &cli.config {
        Some(p) => Overrides::from_json_file(p)?,
        None => Overrides::default(),
    };
    let global = Overrides { seed: cli.seed, profile: cli.profile, precision: cli.precision, ..Default::default() };
    ExperimentSpec::resolve(file.merge(command).merge(global))
}

fn run(cli: Cli) -> Result<()> {
    let flag = |set: bool| set.then_some(true);
    match cli.command {
        Command::Quality { ref grid, runs, sequences, timings } => {
            let grid = grid.clone();
            let spec = resolve(&cli, Overrides { runs, sequences, timings: flag(timings), ..grid.overrides() })?;
            write_rows(output(&cli.out)?, Table::Quality, &quality::run_quality(&spec)?)
        }
        Command::Traffic { ref grid, warp_sample, all_warps } => {
            let grid = grid.clone();
            let mut spec = resolve(&cli, Overrides { warp_sample, ..grid.overrides() })?;
            if all_warps {
                spec.warp_sample = None;
            }
            write_rows(output(&cli.out)?, Table::Traffic, &traffic::run_traffic(&spec)?)
        }
        Command::Pf { ref algorithms, particles, steps, trajectories, runs, ref b_grid, runtime_budget, timings } => {
            let b_grid = if runtime_budget { Some(vec![]) } else { b_grid.clone() };
            let o = Overrides {
                algorithms: algorithms.clone(),
                particles,
                steps,
                trajectories,
                filter_runs: runs,
                b_grid,
                timings: flag(timings),
                ..Default::default()
            };
            let spec = resolve(&cli, o)?;
            write_rows(output(&cli.out)?, Table::Pf, &pf::run_pf(&spec)?)
        }
        Command::GenWeights { family, param, beta, n, format } => {
            let Some(path) = &cli.out else { bail!("gen-weights needs --out") };
            let spec = resolve(&cli, Overrides::default())?;
            let w = generate(family, param, beta, n, spec.precision, spec.seed)?;
            let mut out = output(&cli.out)?;
            match format {
                Format::Bin => formats::write_weights_binary(&mut out, &w)?,
                Format::Csv => formats::write_weights_csv(&mut out, &w)?,
            }
            out.flush()?;
            println!(
                "wrote {} {} weights to {}: mean={} max={} ratio={}",
                w.len(),
                w.precision(),
                path.display(),
                w.mean(),
                w.max(),
                w.mean() / w.max()
            );
            Ok(())
        }
        Command::Plotdata { ref results, ref figure } => {
            let file = File::open(results).with_context(|| format!("opening {}", results.display()))?;
            let (table, body) = read_table(file)?;
            write_rows(output(&cli.out)?, Table::Plot, &plotdata::plot_rows(table, &body, figure)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("megobench: {e:#}");
            ExitCode::FAILURE
        }
    }
}
