use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use vortex_fmm::harness::{
    run_single, run_sweep, run_timing, write_timing_csv, LevelPolicy, SingleArgs, SweepConfig, SweepOptions,
    TimingOptions,
};
use vortex_fmm::kernels::KernelKind;
use vortex_fmm::model::{generate_particles, write_particles, Distribution, Domain};
use vortex_fmm::quadtree::MAX_LEVELS;
use vortex_fmm::FmmError;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "vfmm", version, about = "Fast multipole evaluation of 2D vortex particle velocities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one configuration against the direct sum.
    Single {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(2..=MAX_LEVELS as i64))]
        levels: u32,
        #[arg(long, default_value_t = 8)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "uniform_random")]
        distribution: Distribution,
        #[arg(long, default_value = "point")]
        kernel: KernelKind,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Particle CSV (x,y,gamma,sigma) used instead of the generator.
        #[arg(long)]
        particles: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        map_grid: u64,
    },
    /// Run every (n, l, p, seed) tuple of a config file.
    Sweep {
        config: PathBuf,
        /// Skip tuples already present in the output file.
        #[arg(long)]
        resume: bool,
        /// Write one error map per run next to the output file.
        #[arg(long)]
        maps: bool,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
        /// Override the `out` key of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure FMM and direct run times over a range of particle counts.
    Timing {
        /// Comma-separated particle counts; defaults to powers of two from 2^8 to 2^15.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Fixed number of levels; otherwise chosen from --target-per-leaf.
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=MAX_LEVELS as i64))]
        levels: Option<u32>,
        #[arg(long, default_value_t = 16.0)]
        target_per_leaf: f64,
        #[arg(long, default_value_t = 8)]
        p: usize,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        /// Extrapolate direct times above this particle count.
        #[arg(long)]
        direct_cutoff: Option<usize>,
        #[arg(long, default_value = "point")]
        kernel: KernelKind,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "timing.csv")]
        out: PathBuf,
    },
    /// Write a generated particle set as CSV.
    Gen {
        #[arg(long, default_value = "uniform_random")]
        distribution: Distribution,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        xmin: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ymin: f64,
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &FmmError) -> u8 {
    match e {
        FmmError::Io { .. } | FmmError::Parse { .. } | FmmError::Format(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn run(cli: Cli) -> Result<(), FmmError> {
    match cli.command {
        Command::Single {
            n,
            levels,
            p,
            seed,
            distribution,
            kernel,
            sigma,
            particles,
            out_dir,
            map_grid,
        } => {
            let summary = run_single(&SingleArgs {
                n,
                levels,
                p,
                seed,
                distribution,
                kernel,
                sigma,
                particles,
                out_dir,
                map_grid: map_grid as usize,
            })?;
            for f in &summary.files {
                info!("wrote {}", f.display());
            }
            println!("{summary}");
        }
        Command::Sweep {
            config,
            resume,
            maps,
            jobs,
            out,
        } => {
            let mut cfg = SweepConfig::from_file(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            let s = run_sweep(
                &cfg,
                &SweepOptions {
                    resume,
                    write_maps: maps,
                    jobs: jobs as usize,
                },
            )?;
            println!(
                "{} rows in {} ({} computed, {} skipped)",
                s.total,
                s.out.display(),
                s.computed,
                s.skipped
            );
        }
        Command::Timing {
            n,
            levels,
            target_per_leaf,
            p,
            reps,
            direct_cutoff,
            kernel,
            sigma,
            seed,
            out,
        } => {
            let mut opts = TimingOptions {
                p,
                reps: reps as usize,
                direct_cutoff,
                kernel,
                sigma,
                seed,
                policy: levels.map_or(LevelPolicy::Occupancy(target_per_leaf), LevelPolicy::Fixed),
                ..Default::default()
            };
            if !n.is_empty() {
                opts.n_values = n;
            }
            let rows = run_timing(&opts)?;
            write_timing_csv(&out, &rows)?;
            for r in &rows {
                println!(
                    "n={} l={} t_fmm_ms={:.3} t_direct_ms={:.3}{}",
                    r.n,
                    r.l,
                    r.t_fmm_ms,
                    r.t_direct_ms,
                    if r.direct_extrapolated { " (extrapolated)" } else { "" }
                );
            }
        }
        Command::Gen {
            distribution,
            n,
            seed,
            sigma,
            xmin,
            ymin,
            side,
            out,
        } => {
            let domain = Domain::new(xmin, ymin, side)?;
            let ps = generate_particles(distribution, n, seed, &domain, sigma)?;
            write_particles(&out, &ps)?;
            println!("{} particles written to {}", ps.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
