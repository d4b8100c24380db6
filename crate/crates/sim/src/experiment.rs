//! Sweeps over schemes, view counts, budgets, SNRs and seeds, reported as
//! one CSV row per cell.

use std::io::Write;
use std::path::Path;

use raqsim_core::fuse::ClassModel;
use raqsim_core::phy::{ChannelConfig, NoiseLevel};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Scheme};
use crate::dataset::{load_dataset_dir, synth_dataset, Dataset, Extractor, SynthParams};
use crate::episode::{fit_model, run_episode, Codebooks, EpisodeContext, EpisodeResult};
use crate::error::{Result, SimError};
use crate::formats;

pub const CSV_COLUMNS: [&str; 9] = [
    "scheme",
    "views",
    "rb_budget",
    "snr_db",
    "seed",
    "accuracy",
    "mean_reward",
    "mean_rb_used",
    "mean_bit_error_rate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub views: usize,
    pub rb_budget: u32,
    pub snr_db: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub mean_reward: f64,
    pub mean_rb_used: f64,
    pub mean_bit_error_rate: f64,
}

impl ResultRow {
    pub fn from_episodes(
        scheme: Scheme,
        views: usize,
        rb_budget: u32,
        snr_db: f64,
        seed: u64,
        episodes: &[EpisodeResult],
    ) -> Self {
        let n = episodes.len().max(1) as f64;
        let errors: usize = episodes.iter().flat_map(|e| &e.bit_errors).sum();
        let sent: usize = episodes.iter().flat_map(|e| &e.bits_sent).sum();
        Self {
            scheme,
            views,
            rb_budget,
            snr_db,
            seed,
            accuracy: episodes.iter().filter(|e| e.correct).count() as f64 / n,
            mean_reward: episodes.iter().map(EpisodeResult::reward).sum::<f64>() / n,
            mean_rb_used: episodes.iter().map(|e| f64::from(e.rb_used)).sum::<f64>() / n,
            mean_bit_error_rate: if sent == 0 {
                0.0
            } else {
                errors as f64 / sent as f64
            },
        }
    }
}

/// Per-seed state shared by every cell of that seed.
pub struct SeedSetup {
    pub seed: u64,
    pub dataset: Dataset,
    pub codebooks: Codebooks,
    /// Indexed by view count minus one.
    pub models: Vec<ClassModel>,
}

pub fn extractor(cfg: &ExperimentConfig) -> Extractor {
    Extractor::new(cfg.patch, cfg.feature_dim, cfg.extractor_seed)
}

pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let ex = extractor(cfg);
    match &cfg.dataset_dir {
        Some(dir) => load_dataset_dir(dir, cfg.max_views(), &ex),
        None => synth_dataset(
            &SynthParams {
                classes: cfg.classes,
                views: cfg.max_views(),
                train_size: cfg.train_size,
                test_size: cfg.test_size,
                image_size: cfg.image_size,
            },
            seed,
            &ex,
        ),
    }
}

pub fn prepare_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedSetup> {
    let dataset = load_dataset(cfg, seed)?;
    let codebooks = Codebooks::train(
        dataset.train.iter().flat_map(|o| &o.features),
        &cfg.option_bits,
        cfg.codebook_samples,
        seed,
    )?;
    let models = (1..=cfg.max_views())
        .map(|k| fit_model(&dataset.train, k, cfg.classes, &codebooks, cfg.temperature))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &cfg.artifacts_dir {
        std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        for cb in codebooks.iter() {
            formats::write_codebook(
                &dir.join(format!("seed{seed}_codebook_w{}.txt", cb.bits_per_index())),
                cb,
            )?;
        }
        for (k, m) in models.iter().enumerate() {
            formats::write_class_model(
                &dir.join(format!("seed{seed}_classmodel_k{}.txt", k + 1)),
                m,
            )?;
        }
    }
    Ok(SeedSetup {
        seed,
        dataset,
        codebooks,
        models,
    })
}

pub fn channel_for(cfg: &ExperimentConfig, snr_db: f64) -> ChannelConfig {
    ChannelConfig {
        fading: cfg.fading,
        channel_variance: 1.0,
        noise: NoiseLevel::SnrDb(snr_db),
    }
}

/// Every test episode of one cell, in object order.
pub fn run_cell(
    cfg: &ExperimentConfig,
    setup: &SeedSetup,
    scheme: Scheme,
    views: usize,
    budget: u32,
    snr_db: f64,
) -> Result<Vec<EpisodeResult>> {
    let options = cfg.rate_options()?;
    let fixed = cfg.fixed_rate_options();
    let ctx = EpisodeContext {
        options: &options,
        fixed_options: &fixed,
        codebooks: &setup.codebooks,
        model: &setup.models[views - 1],
        channel: channel_for(cfg, snr_db),
        modulation: cfg.modulation,
        entropy_window: cfg.entropy_window,
        seed: setup.seed,
    };
    setup
        .dataset
        .test
        .iter()
        .map(|o| run_episode(o, views, scheme, budget, &ctx))
        .collect()
}

fn seed_rows(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>> {
    let setup = prepare_seed(cfg, seed)?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for &views in &cfg.views {
            for &budget in &cfg.rb_budget {
                for &snr in &cfg.snr_db {
                    let eps = run_cell(cfg, &setup, scheme, views, budget, snr)?;
                    rows.push(ResultRow::from_episodes(
                        scheme, views, budget, snr, seed, &eps,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

/// Runs the whole sweep. Rows are ordered by scheme, views, budget, SNR and
/// seed (each in config order) regardless of the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    let per_seed: Vec<Vec<ResultRow>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&s| seed_rows(cfg, s))
            .collect::<Result<_>>()
    })?;
    let cells = per_seed.first().map_or(0, Vec::len);
    let mut rows = Vec::with_capacity(cells * per_seed.len());
    for c in 0..cells {
        rows.extend(per_seed.iter().map(|r| r[c].clone()));
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.views.to_string(),
            r.rb_budget.to_string(),
            r.snr_db.to_string(),
            r.seed.to_string(),
            r.accuracy.to_string(),
            r.mean_reward.to_string(),
            r.mean_rb_used.to_string(),
            r.mean_bit_error_rate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| SimError::io("<csv>", e))?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn write_csv_file(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
    write_csv(rows, std::io::BufWriter::new(file))
}
