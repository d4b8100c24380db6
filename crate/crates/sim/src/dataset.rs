//! Procedural multi-view objects, a linear patch extractor, and directory
//! import.
//!
//! Each class has a template of bright blobs plus a striped texture. A view
//! rotates the template, hides part of it behind a random half-plane
//! occluder, and adds texture whose density grows with the view index, so
//! views differ both in what they show and in their entropy.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use raqsim_core::entropy::GrayImage;
use raqsim_core::quantize::LatentFeature;

use crate::error::{Result, SimError};
use crate::formats;
use crate::pgm;
use crate::streams;

pub const LEVELS: u16 = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSample {
    pub id: usize,
    pub label: usize,
    pub views: Vec<GrayImage>,
    pub features: Vec<LatentFeature>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<ObjectSample>,
    pub test: Vec<ObjectSample>,
}

impl Dataset {
    pub fn num_views(&self) -> usize {
        self.train
            .iter()
            .chain(&self.test)
            .map(|o| o.views.len())
            .min()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub classes: usize,
    pub views: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub image_size: usize,
}

/// A fixed random linear map from `patch × patch` pixel blocks to `dim`
/// values, shared by every device.
#[derive(Debug, Clone, PartialEq)]
pub struct Extractor {
    patch: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl Extractor {
    pub fn new(patch: usize, dim: usize, seed: u64) -> Self {
        let mut rng = streams::stream(seed, &[streams::EXTRACTOR]);
        let n = patch * patch;
        let scale = 1.0 / (n as f64).sqrt();
        let weights = (0..dim * n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            patch,
            dim,
            weights,
        }
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major patches become sub-vectors in raster order. Pixels are
    /// scaled by `1 / (levels - 1)`.
    pub fn extract(&self, img: &GrayImage) -> Result<LatentFeature> {
        let p = self.patch;
        if !img.height().is_multiple_of(p) || !img.width().is_multiple_of(p) {
            return Err(SimError::Dataset(format!(
                "{}x{} image does not divide into {p}x{p} patches",
                img.height(),
                img.width()
            )));
        }
        let norm = 1.0 / f64::from(img.levels().max(2) - 1);
        let mut block = vec![0.0; p * p];
        let mut data = Vec::with_capacity(img.height() * img.width() / (p * p) * self.dim);
        for by in (0..img.height()).step_by(p) {
            for bx in (0..img.width()).step_by(p) {
                for dy in 0..p {
                    for dx in 0..p {
                        block[dy * p + dx] = f64::from(img.get(by + dy, bx + dx)) * norm;
                    }
                }
                for row in self.weights.chunks_exact(p * p) {
                    data.push(row.iter().zip(&block).map(|(w, x)| w * x).sum());
                }
            }
        }
        Ok(LatentFeature::from_flat(self.dim, data)?)
    }
}

pub fn extract_features(
    img: &GrayImage,
    patch: usize,
    dim: usize,
    seed: u64,
) -> Result<LatentFeature> {
    Extractor::new(patch, dim, seed).extract(img)
}

struct Blob {
    radius: f64,
    angle: f64,
    width: f64,
    amplitude: f64,
}

struct Grating {
    freq: f64,
    angle: f64,
    phase: f64,
    amplitude: f64,
}

struct ClassTemplate {
    gratings: Vec<Grating>,
    blobs: Vec<Blob>,
    stripe_freq: f64,
    stripe_angle: f64,
}

impl ClassTemplate {
    fn sample(rng: &mut impl Rng) -> Self {
        let gratings = (0..3)
            .map(|_| Grating {
                freq: rng.random_range(0.8..3.0),
                angle: rng.random_range(0.0..PI),
                phase: rng.random_range(0.0..2.0 * PI),
                amplitude: rng.random_range(20.0..40.0),
            })
            .collect();
        let blobs = (0..3)
            .map(|_| Blob {
                radius: rng.random_range(0.05..0.35),
                angle: rng.random_range(0.0..2.0 * PI),
                width: rng.random_range(0.06..0.14),
                amplitude: if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                    * rng.random_range(40.0..80.0),
            })
            .collect();
        Self {
            gratings,
            blobs,
            stripe_freq: rng.random_range(5.0..8.0),
            stripe_angle: rng.random_range(0.0..PI),
        }
    }

    /// Class pattern at template coordinates `(u, v)`, relative to mid-gray.
    fn pattern(&self, u: f64, v: f64) -> f64 {
        let mut value = 0.0;
        for g in &self.gratings {
            let (s, c) = g.angle.sin_cos();
            value += g.amplitude * (2.0 * PI * g.freq * (u * c + v * s) + g.phase).sin();
        }
        for b in &self.blobs {
            let (s, c) = b.angle.sin_cos();
            let d2 = (u - b.radius * c).powi(2) + (v - b.radius * s).powi(2);
            value += b.amplitude * (-d2 / (2.0 * b.width * b.width)).exp();
        }
        value
    }
}

/// Knobs of a single rendered view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewStyle {
    pub rotation: f64,
    /// Texture density; stripe frequency, stripe contrast and noise grow with it.
    pub density: f64,
    pub occluder_angle: f64,
    /// Signed offset of the occluding half-plane from the image center.
    pub occluder_offset: f64,
}

fn render(
    template: &ClassTemplate,
    style: ViewStyle,
    size: usize,
    rng: &mut impl Rng,
) -> GrayImage {
    let (sin_r, cos_r) = style.rotation.sin_cos();
    let (sin_o, cos_o) = style.occluder_angle.sin_cos();
    let (sin_s, cos_s) = template.stripe_angle.sin_cos();
    let freq = template.stripe_freq * (1.0 + 0.5 * style.density);
    let noise = 4.0 * style.density;
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = (x as f64 + 0.5) / size as f64 - 0.5;
            let v = (y as f64 + 0.5) / size as f64 - 0.5;
            let mut value = 128.0;
            if u * cos_o + v * sin_o < style.occluder_offset {
                let (tu, tv) = (u * cos_r + v * sin_r, -u * sin_r + v * cos_r);
                value += template.pattern(tu, tv);
                value += 8.0 * style.density * (2.0 * PI * freq * (tu * cos_s + tv * sin_s)).sin();
            }
            value += noise * rng.sample::<f64, _>(StandardNormal);
            pixels.push(value.round().clamp(0.0, f64::from(LEVELS - 1)) as u16);
        }
    }
    GrayImage::new(size, size, LEVELS, pixels).expect("square image within level range")
}

fn class_templates(classes: usize, seed: u64) -> Vec<ClassTemplate> {
    (0..classes)
        .map(|c| {
            ClassTemplate::sample(&mut streams::stream(
                seed,
                &[streams::DATASET_CLASS, c as u64],
            ))
        })
        .collect()
}

/// Style of view `view` for one object; `jitter` is the object's rotation
/// offset.
fn view_style(view: usize, jitter: f64, rng: &mut impl Rng) -> ViewStyle {
    ViewStyle {
        rotation: jitter + 0.35 * view as f64,
        density: 1.0 + view as f64,
        occluder_angle: rng.random_range(0.0..2.0 * PI),
        occluder_offset: rng.random_range(-0.05..0.2),
    }
}

fn synth_object(
    id: usize,
    label: usize,
    templates: &[ClassTemplate],
    params: &SynthParams,
    seed: u64,
    extractor: &Extractor,
) -> Result<ObjectSample> {
    let mut rng = streams::stream(seed, &[streams::DATASET_OBJECT, id as u64]);
    let jitter = 0.25 * rng.sample::<f64, _>(StandardNormal);
    let mut views = Vec::with_capacity(params.views);
    for v in 0..params.views {
        let style = view_style(v, jitter, &mut rng);
        views.push(render(
            &templates[label],
            style,
            params.image_size,
            &mut rng,
        ));
    }
    let features = views
        .iter()
        .map(|img| extractor.extract(img))
        .collect::<Result<_>>()?;
    Ok(ObjectSample {
        id,
        label,
        views,
        features,
    })
}

/// Generates `train_size + test_size` objects with labels cycling through
/// the classes. Object ids are global: training objects come first.
pub fn synth_dataset(params: &SynthParams, seed: u64, extractor: &Extractor) -> Result<Dataset> {
    if params.classes < 2 || params.views == 0 {
        return Err(SimError::Dataset(
            "need at least 2 classes and 1 view".into(),
        ));
    }
    let templates = class_templates(params.classes, seed);
    let make =
        |id: usize| synth_object(id, id % params.classes, &templates, params, seed, extractor);
    let train = (0..params.train_size).map(make).collect::<Result<_>>()?;
    let test = (params.train_size..params.train_size + params.test_size)
        .map(make)
        .collect::<Result<_>>()?;
    Ok(Dataset { train, test })
}

/// Renders a single view of class `label` with an explicit style, for
/// probing how style knobs affect entropy.
pub fn render_view(
    classes: usize,
    label: usize,
    style: ViewStyle,
    size: usize,
    seed: u64,
    noise_seed: u64,
) -> GrayImage {
    let templates = class_templates(classes, seed);
    let mut rng = streams::stream(noise_seed, &[streams::DATASET_OBJECT]);
    render(&templates[label], style, size, &mut rng)
}

/// Loads `<object>_<view>.pgm` files listed by `labels.tsv`
/// (`object<TAB>label<TAB>train|test` per line). When `<object>.features`
/// exists it replaces the extracted features.
pub fn load_dataset_dir(dir: &Path, views: usize, extractor: &Extractor) -> Result<Dataset> {
    let labels_path = dir.join("labels.tsv");
    let text = formats::read_text(&labels_path)?;
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("object")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [object, label, split] = cols[..] else {
            return Err(SimError::parse(
                "labels.tsv",
                n + 1,
                "expected object, label and split columns",
            ));
        };
        let label: usize = label
            .parse()
            .map_err(|_| SimError::parse("labels.tsv", n + 1, format!("bad label `{label}`")))?;
        let train = match split {
            "train" => true,
            "test" => false,
            _ => {
                return Err(SimError::parse(
                    "labels.tsv",
                    n + 1,
                    format!("bad split `{split}`"),
                ))
            }
        };
        entries.insert(object.to_string(), (label, train));
    }
    let mut ds = Dataset::default();
    for (id, (object, (label, train))) in entries.into_iter().enumerate() {
        let views_img = (0..views)
            .map(|v| pgm::read(&dir.join(format!("{object}_{v}.pgm"))))
            .collect::<Result<Vec<_>>>()?;
        let feature_path = dir.join(format!("{object}.features"));
        let features = if feature_path.exists() {
            let f = formats::read_features(&feature_path)?;
            if f.len() < views {
                return Err(SimError::Dataset(format!(
                    "{object}.features holds {} views, need {views}",
                    f.len()
                )));
            }
            f.into_iter().take(views).collect()
        } else {
            views_img
                .iter()
                .map(|img| extractor.extract(img))
                .collect::<Result<_>>()?
        };
        let sample = ObjectSample {
            id,
            label,
            views: views_img,
            features,
        };
        if train {
            ds.train.push(sample)
        } else {
            ds.test.push(sample)
        }
    }
    if ds.train.is_empty() || ds.test.is_empty() {
        return Err(SimError::Dataset(
            "labels.tsv needs both train and test objects".into(),
        ));
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extractor_rejects_indivisible_grid() {
        let img = GrayImage::filled(6, 8, 256, 3).unwrap();
        assert!(extract_features(&img, 4, 2, 1).is_err());
    }

    #[test]
    fn zero_image_gives_zero_feature() {
        let img = GrayImage::filled(8, 8, 256, 0).unwrap();
        let f = extract_features(&img, 4, 3, 1).unwrap();
        assert_eq!(f.num_subvectors(), 4);
        assert!(f.as_flat().iter().all(|&x| x == 0.0));
    }
}
