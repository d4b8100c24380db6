use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use raqsim::config::{parse_fading, parse_modulation};
use raqsim::experiment::{run_experiment, write_csv, write_csv_file};
use raqsim::{pgm, ExperimentConfig, Scheme};
use raqsim_core::entropy::{pair_histogram, view_entropy};

#[derive(Parser)]
#[command(
    name = "raqsim",
    version,
    about = "Multi-view rate-adaptive inference simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write CSV results.
    Simulate(Box<SimulateArgs>),
    /// Print the pixel/window-mean entropy of a PGM image.
    Entropy {
        image: PathBuf,
        #[arg(long, default_value_t = 3)]
        entropy_window: usize,
        /// Also print the number of distinct pairs.
        #[arg(long)]
        verbose: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    #[arg(long, value_delimiter = ',')]
    rb_budget: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    views: Vec<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Vec<f64>,
    #[arg(long)]
    fading: Option<String>,
    #[arg(long)]
    modulation: Option<String>,
    #[arg(long)]
    entropy_window: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => {
            let SimulateArgs {
                config,
                out,
                seed,
                scheme,
                rb_budget,
                views,
                snr_db,
                fading,
                modulation,
                entropy_window,
                threads,
            } = *args;
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if !scheme.is_empty() {
                cfg.schemes = scheme;
            }
            if !rb_budget.is_empty() {
                cfg.rb_budget = rb_budget;
            }
            if !views.is_empty() {
                cfg.views = views;
            }
            if !snr_db.is_empty() {
                cfg.snr_db = snr_db;
            }
            if let Some(f) = fading {
                cfg.fading = parse_fading(&f)?;
            }
            if let Some(m) = modulation {
                cfg.modulation = parse_modulation(&m)?;
            }
            if let Some(w) = entropy_window {
                cfg.entropy_window = w;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            if out.is_some() {
                cfg.out = out;
            }
            cfg.validate()?;
            let rows = run_experiment(&cfg)?;
            match cfg.out.as_deref() {
                Some(p) if p.as_os_str() != "-" => {
                    write_csv_file(p, &rows).with_context(|| format!("writing {}", p.display()))?
                }
                _ => write_csv(&rows, std::io::stdout().lock())?,
            }
        }
        Command::Entropy {
            image,
            entropy_window,
            verbose,
        } => {
            let img = pgm::read(&image)?;
            let g = view_entropy(&img, entropy_window)?;
            if verbose {
                let h = pair_histogram(&img, entropy_window)?;
                println!(
                    "{:.12} bits ({} distinct pairs)",
                    g.bits(),
                    h.distinct_pairs()
                );
            } else {
                println!("{:.12}", g.bits());
            }
        }
    }
    Ok(())
}
