//! One inference episode: entropy feedback, rate selection, per-view link
//! simulation, fusion and classification.

use std::collections::BTreeMap;

use rand::seq::index;
use raqsim_core::allocate::{
    random_maximal_select, select_rates, AllocationPlan, Choice, RateOptionSet,
};
use raqsim_core::entropy::view_entropy;
use raqsim_core::fuse::{
    classify, fit_centroids, max_pool_fuse, ClassModel, FusedFeature, Prediction,
};
use raqsim_core::phy::{transmit_indices, ChannelConfig, Modulation};
use raqsim_core::quantize::{
    build_base_codebook, dequantize, derive_codebook_with_samples, quantize_feature, Codebook,
    CodebookWarning, LatentFeature, QuantizedFeature,
};

use crate::config::Scheme;
use crate::dataset::ObjectSample;
use crate::error::{Result, SimError};
use crate::streams;

/// One codebook per supported bit width, all derived from a common base.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebooks {
    books: BTreeMap<u32, Codebook>,
    pub warnings: Vec<CodebookWarning>,
}

impl Codebooks {
    /// Trains the base codebook at the widest rate on at most `max_samples`
    /// sub-vectors drawn from `features`, then derives the narrower ones.
    pub fn train<'a>(
        features: impl IntoIterator<Item = &'a LatentFeature>,
        bits: &[u32],
        max_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut dim = 0;
        let mut pool: Vec<&[f64]> = Vec::new();
        for f in features {
            dim = f.dim();
            pool.extend(f.subvectors());
        }
        let base_bits = bits
            .iter()
            .copied()
            .max()
            .ok_or_else(|| SimError::Config("no code rates".into()))?;
        let mut rng = streams::stream(seed, &[streams::CODEBOOK]);
        let mut picked: Vec<usize> = if pool.len() > max_samples {
            index::sample(&mut rng, pool.len(), max_samples).into_vec()
        } else {
            (0..pool.len()).collect()
        };
        picked.sort_unstable();
        let samples: Vec<f64> = picked
            .iter()
            .flat_map(|&i| pool[i].iter().copied())
            .collect();
        let base = build_base_codebook(
            &samples,
            dim,
            1usize << base_bits,
            streams::derive_seed(seed, &[streams::CODEBOOK]),
        )?;
        let mut books = BTreeMap::new();
        for &w in bits {
            let cb = if w == base_bits {
                base.codebook.clone()
            } else {
                derive_codebook_with_samples(&base.codebook, 1usize << w, Some(&samples))?
            };
            books.insert(w, cb);
        }
        Ok(Self {
            books,
            warnings: base.warnings,
        })
    }

    pub fn from_books(books: impl IntoIterator<Item = Codebook>) -> Self {
        Self {
            books: books
                .into_iter()
                .map(|cb| (cb.bits_per_index(), cb))
                .collect(),
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, bits: u32) -> Result<&Codebook> {
        self.books
            .get(&bits)
            .ok_or_else(|| SimError::Config(format!("no codebook for {bits}-bit indices")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Codebook> {
        self.books.values()
    }

    pub fn widest(&self) -> &Codebook {
        self.books
            .values()
            .next_back()
            .expect("at least one codebook")
    }
}

fn roundtrip(z: &LatentFeature, cb: &Codebook) -> Result<QuantizedFeature> {
    Ok(dequantize(&quantize_feature(z, cb)?, cb)?)
}

/// Nearest-centroid model over noiselessly fused features of the first
/// `views` views, quantized at the widest rate.
pub fn fit_model(
    train: &[ObjectSample],
    views: usize,
    classes: usize,
    codebooks: &Codebooks,
    temperature: f64,
) -> Result<ClassModel> {
    let cb = codebooks.widest();
    let fused = train
        .iter()
        .map(|o| {
            let q = o.features[..views]
                .iter()
                .map(|z| roundtrip(z, cb))
                .collect::<Result<Vec<_>>>()?;
            Ok((o.label, max_pool_fuse(&q.iter().collect::<Vec<_>>())?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_centroids(
        fused.iter().map(|(l, f)| (*l, f)),
        classes,
        temperature,
    )?)
}

/// Everything an episode needs besides the object itself.
#[derive(Debug, Clone)]
pub struct EpisodeContext<'a> {
    pub options: &'a RateOptionSet,
    pub fixed_options: &'a RateOptionSet,
    pub codebooks: &'a Codebooks,
    pub model: &'a ClassModel,
    pub channel: ChannelConfig,
    pub modulation: Modulation,
    pub entropy_window: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub object: usize,
    pub scheme: Scheme,
    pub entropies: Vec<f64>,
    pub plan: AllocationPlan,
    pub bit_errors: Vec<usize>,
    pub bits_sent: Vec<usize>,
    pub prediction: Option<Prediction>,
    pub correct: bool,
    pub rb_used: u32,
}

impl EpisodeResult {
    pub fn reward(&self) -> f64 {
        self.plan.total_reward()
    }
}

pub fn view_entropies(obj: &ObjectSample, views: usize, window: usize) -> Result<Vec<f64>> {
    obj.views[..views]
        .iter()
        .map(|v| Ok(view_entropy(v, window)?.bits()))
        .collect()
}

/// Plan for the first `views` views of `obj` under `scheme`.
pub fn allocate(
    obj: &ObjectSample,
    entropies: &[f64],
    scheme: Scheme,
    budget: u32,
    ctx: &EpisodeContext<'_>,
) -> Result<AllocationPlan> {
    let options = option_set(scheme, ctx);
    Ok(if scheme.is_random() {
        let mut rng = streams::stream(ctx.seed, &[streams::SELECTION, obj.id as u64, scheme.id()]);
        random_maximal_select(entropies, options, budget, &mut rng)?
    } else {
        select_rates(entropies, options, budget)?
    })
}

fn option_set<'a>(scheme: Scheme, ctx: &EpisodeContext<'a>) -> &'a RateOptionSet {
    if scheme.is_fixed_rate() {
        ctx.fixed_options
    } else {
        ctx.options
    }
}

/// Runs the full protocol on the first `views` views of `obj`.
pub fn run_episode(
    obj: &ObjectSample,
    views: usize,
    scheme: Scheme,
    budget: u32,
    ctx: &EpisodeContext<'_>,
) -> Result<EpisodeResult> {
    if views == 0 || views > obj.views.len() || views > obj.features.len() {
        return Err(SimError::Dataset(format!(
            "object {} has fewer than {views} views",
            obj.id
        )));
    }
    let entropies = view_entropies(obj, views, ctx.entropy_window)?;
    let plan = allocate(obj, &entropies, scheme, budget, ctx)?;
    let options = option_set(scheme, ctx);

    let mut bit_errors = vec![0; views];
    let mut bits_sent = vec![0; views];
    let mut recovered = Vec::new();
    for (v, choice) in plan.choices().iter().enumerate() {
        let Choice::Option(i) = *choice else { continue };
        let w = options.options()[i].bits_per_index();
        let cb = ctx.codebooks.get(w)?;
        let c = quantize_feature(&obj.features[v], cb)?;
        let mut rng = streams::stream(ctx.seed, &[streams::CHANNEL, obj.id as u64, v as u64]);
        let link = transmit_indices(&c, w, ctx.modulation, &ctx.channel, &mut rng)?;
        bit_errors[v] = link.bit_errors;
        bits_sent[v] = link.bits_sent;
        recovered.push(dequantize(&link.recovered, cb)?);
    }

    let prediction = if recovered.is_empty() {
        None
    } else {
        let fused = max_pool_fuse(&recovered.iter().collect::<Vec<_>>())?;
        Some(classify(&fused, ctx.model)?)
    };
    let correct = prediction.as_ref().is_some_and(|p| p.label == obj.label);
    Ok(EpisodeResult {
        object: obj.id,
        scheme,
        entropies,
        rb_used: plan.total_rb(),
        plan,
        bit_errors,
        bits_sent,
        prediction,
        correct,
    })
}

/// Quantize, fuse and classify under `plan` with no link in between.
pub fn offline_prediction(
    obj: &ObjectSample,
    plan: &AllocationPlan,
    options: &RateOptionSet,
    codebooks: &Codebooks,
    model: &ClassModel,
) -> Result<Option<Prediction>> {
    let mut q = Vec::new();
    for (v, choice) in plan.choices().iter().enumerate() {
        if let Choice::Option(i) = *choice {
            q.push(roundtrip(
                &obj.features[v],
                codebooks.get(options.options()[i].bits_per_index())?,
            )?);
        }
    }
    if q.is_empty() {
        return Ok(None);
    }
    let fused: FusedFeature = max_pool_fuse(&q.iter().collect::<Vec<_>>())?;
    Ok(Some(classify(&fused, model)?))
}
