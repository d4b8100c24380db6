//! Experiment configuration: flat `key = value` text with comma-separated
//! lists and `#` comments. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use raqsim_core::allocate::RateOptionSet;
use raqsim_core::phy::{Fading, Modulation};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    RaqDp,
    RaqRandom,
    VqDp,
    VqRandom,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::RaqDp,
        Scheme::RaqRandom,
        Scheme::VqDp,
        Scheme::VqRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RaqDp => "raq-dp",
            Scheme::RaqRandom => "raq-random",
            Scheme::VqDp => "vq-dp",
            Scheme::VqRandom => "vq-random",
        }
    }

    pub fn is_random(self) -> bool {
        matches!(self, Scheme::RaqRandom | Scheme::VqRandom)
    }

    pub fn is_fixed_rate(self) -> bool {
        matches!(self, Scheme::VqDp | Scheme::VqRandom)
    }

    pub(crate) fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown scheme `{s}`")))
    }
}

pub fn parse_fading(s: &str) -> Result<Fading> {
    match s {
        "rayleigh" => Ok(Fading::Rayleigh),
        "awgn" => Ok(Fading::Awgn),
        _ => Err(SimError::Config(format!(
            "unknown fading `{s}` (rayleigh, awgn)"
        ))),
    }
}

pub fn parse_modulation(s: &str) -> Result<Modulation> {
    match s {
        "qpsk" => Ok(Modulation::Qpsk),
        "16qam" => Ok(Modulation::Qam16),
        _ => Err(SimError::Config(format!(
            "unknown modulation `{s}` (qpsk, 16qam)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub views: Vec<usize>,
    pub classes: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub option_bits: Vec<u32>,
    pub option_betas: Vec<f64>,
    pub vq_bits: u32,
    pub rb_budget: Vec<u32>,
    pub snr_db: Vec<f64>,
    pub fading: Fading,
    pub modulation: Modulation,
    /// Coded bits carried by one RB under QPSK; doubled for 16-QAM.
    pub bits_per_rb: u32,
    pub entropy_window: usize,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    pub image_size: usize,
    pub patch: usize,
    pub feature_dim: usize,
    pub temperature: f64,
    pub extractor_seed: u64,
    pub codebook_samples: usize,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub dataset_dir: Option<PathBuf>,
    pub artifacts_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            views: vec![1, 2, 3],
            classes: 10,
            train_size: 200,
            test_size: 100,
            option_bits: vec![4, 6, 8],
            option_betas: vec![0.75, 0.85, 0.9],
            vq_bits: 6,
            rb_budget: vec![33],
            snr_db: vec![5.0],
            fading: Fading::Rayleigh,
            modulation: Modulation::Qpsk,
            bits_per_rb: 21,
            entropy_window: 3,
            seeds: (0..5).collect(),
            schemes: Scheme::ALL.to_vec(),
            image_size: 28,
            patch: 4,
            feature_dim: 8,
            temperature: 1.0,
            extractor_seed: 7,
            codebook_samples: 4096,
            threads: 0,
            out: None,
            dataset_dir: None,
            artifacts_dir: None,
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|t| scalar(key, t.trim())).collect()
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| SimError::Config(format!("`{key}`: cannot parse `{v}`")))
}

/// Seeds as a list, or a half-open range `a..b`.
fn seeds(v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (scalar("seeds", a.trim())?, scalar("seeds", b.trim())?);
        return Ok((a..b).collect());
    }
    list("seeds", v)
}

impl ExperimentConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::Config(format!("line {}: expected `key = value`", n + 1))
            })?;
            cfg.set(key.trim(), value.trim(), base_dir)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::formats::read_text(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str, base_dir: &Path) -> Result<()> {
        let path = |v: &str| Some(base_dir.join(v));
        match key {
            "views" => self.views = list(key, v)?,
            "classes" => self.classes = scalar(key, v)?,
            "train_size" => self.train_size = scalar(key, v)?,
            "test_size" => self.test_size = scalar(key, v)?,
            "option_bits" => self.option_bits = list(key, v)?,
            "option_betas" => self.option_betas = list(key, v)?,
            "vq_bits" => self.vq_bits = scalar(key, v)?,
            "rb_budget" => self.rb_budget = list(key, v)?,
            "snr_db" => self.snr_db = list(key, v)?,
            "fading" => self.fading = parse_fading(v)?,
            "modulation" => self.modulation = parse_modulation(v)?,
            "bits_per_rb" => self.bits_per_rb = scalar(key, v)?,
            "entropy_window" => self.entropy_window = scalar(key, v)?,
            "seeds" => self.seeds = seeds(v)?,
            "schemes" => self.schemes = list(key, v)?,
            "image_size" => self.image_size = scalar(key, v)?,
            "patch" => self.patch = scalar(key, v)?,
            "feature_dim" => self.feature_dim = scalar(key, v)?,
            "temperature" => self.temperature = scalar(key, v)?,
            "extractor_seed" => self.extractor_seed = scalar(key, v)?,
            "codebook_samples" => self.codebook_samples = scalar(key, v)?,
            "threads" => self.threads = scalar(key, v)?,
            "out" => self.out = path(v),
            "dataset_dir" => self.dataset_dir = path(v),
            "artifacts_dir" => self.artifacts_dir = path(v),
            _ => return Err(SimError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        for (name, empty) in [
            ("views", self.views.is_empty()),
            ("option_bits", self.option_bits.is_empty()),
            ("rb_budget", self.rb_budget.is_empty()),
            ("snr_db", self.snr_db.is_empty()),
            ("seeds", self.seeds.is_empty()),
            ("schemes", self.schemes.is_empty()),
        ] {
            if empty {
                return bad(&format!("`{name}` must not be empty"));
            }
        }
        if self.views.contains(&0) {
            return bad("`views` entries must be at least 1");
        }
        if self.classes < 2 {
            return bad("`classes` must be at least 2");
        }
        if self.train_size == 0 || self.test_size == 0 {
            return bad("`train_size` and `test_size` must be positive");
        }
        if self.option_bits.len() != self.option_betas.len() {
            return bad("`option_bits` and `option_betas` must have equal length");
        }
        if self.option_bits.iter().any(|&w| w == 0 || w > 16) {
            return bad("`option_bits` entries must be in 1..=16");
        }
        if self.fixed_rate_options().is_empty() {
            return bad("`vq_bits` must be one of `option_bits`");
        }
        if self.bits_per_rb == 0 {
            return bad("`bits_per_rb` must be positive");
        }
        if self.entropy_window.is_multiple_of(2) {
            return bad("`entropy_window` must be odd");
        }
        if self.patch == 0 || !self.image_size.is_multiple_of(self.patch) {
            return bad("`image_size` must be a multiple of `patch`");
        }
        if self.feature_dim == 0 {
            return bad("`feature_dim` must be positive");
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad("`temperature` must be positive");
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return bad("`snr_db` entries must be numbers");
        }
        self.rate_options().map(|_| ())
    }

    /// Codebook size exponent of the base codebook.
    pub fn base_bits(&self) -> u32 {
        self.option_bits.iter().copied().max().unwrap_or(0)
    }

    pub fn num_subvectors(&self) -> usize {
        (self.image_size / self.patch).pow(2)
    }

    pub fn effective_bits_per_rb(&self) -> u32 {
        self.bits_per_rb * self.modulation.bits_per_symbol() / 2
    }

    pub fn rate_options(&self) -> Result<RateOptionSet> {
        let pairs: Vec<(u32, f64)> = self
            .option_bits
            .iter()
            .copied()
            .zip(self.option_betas.iter().copied())
            .collect();
        Ok(RateOptionSet::from_pairs(
            &pairs,
            self.num_subvectors() as u32,
            self.effective_bits_per_rb(),
        )?)
    }

    pub fn fixed_rate_options(&self) -> RateOptionSet {
        self.rate_options()
            .map(|o| o.restricted_to(self.vq_bits))
            .unwrap_or_else(|_| RateOptionSet::new(Vec::new()))
    }

    pub fn max_views(&self) -> usize {
        self.views.iter().copied().max().unwrap_or(1)
    }
}
