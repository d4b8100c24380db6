//! Server-side fusion of recovered per-view features and classification.
//!
//! Features are fused by element-wise max over the views that transmitted.
//! Inference uses a nearest-centroid model whose class probabilities are a
//! softmax over negative squared distances scaled by a temperature.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::quantize::{LatentFeature, QuantizedFeature};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuseError {
    #[error("no view contributed a feature")]
    NoObservation,
    #[error("feature shape mismatch")]
    ShapeMismatch,
    #[error("class {0} has no training example")]
    MissingClass(usize),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("temperature {0} must be finite and positive")]
    BadTemperature(f64),
    #[error("at least one class is required")]
    NoClasses,
}

/// The view-invariant feature produced by max-pool fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeature(LatentFeature);

impl FusedFeature {
    pub fn as_latent(&self) -> &LatentFeature {
        &self.0
    }

    pub fn into_latent(self) -> LatentFeature {
        self.0
    }

    /// Wraps an already-fused feature (e.g. one loaded from disk).
    pub fn from_latent(z: LatentFeature) -> Self {
        Self(z)
    }
}

/// Element-wise maximum over the recovered features of participating views.
pub fn max_pool_fuse(features: &[&QuantizedFeature]) -> Result<FusedFeature, FuseError> {
    max_pool_latent(features.iter().map(|f| f.as_latent()))
}

/// As [`max_pool_fuse`] over arbitrary latent features.
pub fn max_pool_latent<'a>(
    mut features: impl Iterator<Item = &'a LatentFeature>,
) -> Result<FusedFeature, FuseError> {
    let first = features.next().ok_or(FuseError::NoObservation)?;
    let mut out = first.clone();
    for f in features {
        if !f.same_shape(&out) {
            return Err(FuseError::ShapeMismatch);
        }
        for (o, &x) in out.as_flat_mut().iter_mut().zip(f.as_flat()) {
            if x > *o {
                *o = x;
            }
        }
    }
    Ok(FusedFeature(out))
}

/// Nearest-centroid classifier over fused features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    centroids: Vec<LatentFeature>,
    temperature: f64,
}

impl ClassModel {
    pub fn new(centroids: Vec<LatentFeature>, temperature: f64) -> Result<Self, FuseError> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(FuseError::BadTemperature(temperature));
        }
        let first = centroids.first().ok_or(FuseError::NoClasses)?;
        if centroids.iter().any(|c| !c.same_shape(first)) {
            return Err(FuseError::ShapeMismatch);
        }
        Ok(Self {
            centroids,
            temperature,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.centroids.len()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn centroids(&self) -> &[LatentFeature] {
        &self.centroids
    }

    pub fn num_subvectors(&self) -> usize {
        self.centroids[0].num_subvectors()
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].dim()
    }
}

/// Per-class mean of labeled fused features.
pub fn fit_centroids<'a>(
    training: impl IntoIterator<Item = (usize, &'a FusedFeature)>,
    num_classes: usize,
    temperature: f64,
) -> Result<ClassModel, FuseError> {
    if num_classes == 0 {
        return Err(FuseError::NoClasses);
    }
    let mut sums: Vec<Option<Vec<f64>>> = vec![None; num_classes];
    let mut counts = vec![0usize; num_classes];
    let mut shape: Option<(usize, usize)> = None;
    for (label, f) in training {
        if label >= num_classes {
            return Err(FuseError::LabelOutOfRange { label, num_classes });
        }
        let z = f.as_latent();
        let s = (z.num_subvectors(), z.dim());
        if *shape.get_or_insert(s) != s {
            return Err(FuseError::ShapeMismatch);
        }
        let acc = sums[label].get_or_insert_with(|| vec![0.0; z.as_flat().len()]);
        for (a, x) in acc.iter_mut().zip(z.as_flat()) {
            *a += x;
        }
        counts[label] += 1;
    }
    let (_, dim) = shape.ok_or(FuseError::MissingClass(0))?;
    let mut centroids = Vec::with_capacity(num_classes);
    for (class, sum) in sums.into_iter().enumerate() {
        let mut sum = sum.ok_or(FuseError::MissingClass(class))?;
        let n = counts[class] as f64;
        for v in &mut sum {
            *v /= n;
        }
        centroids.push(LatentFeature::from_flat(dim, sum).map_err(|_| FuseError::ShapeMismatch)?);
    }
    ClassModel::new(centroids, temperature)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub label: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Softmax over `-‖z - centroid‖² / τ`; the label is the nearest centroid,
/// ties to the lowest class id.
pub fn classify(z: &FusedFeature, model: &ClassModel) -> Result<Prediction, FuseError> {
    let z = z.as_latent();
    if !z.same_shape(&model.centroids[0]) {
        return Err(FuseError::ShapeMismatch);
    }
    let dists: Vec<f64> = model
        .centroids
        .iter()
        .map(|c| squared_distance(z.as_flat(), c.as_flat()))
        .collect();
    let mut label = 0;
    for (c, &d) in dists.iter().enumerate() {
        if d < dists[label] {
            label = c;
        }
    }
    let shift = dists[label];
    let weights: Vec<f64> = dists
        .iter()
        .map(|d| libm::exp(-(d - shift) / model.temperature))
        .collect();
    let total: f64 = weights.iter().sum();
    let probabilities = weights.into_iter().map(|w| w / total).collect();
    Ok(Prediction {
        probabilities,
        label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{dequantize, Codebook, IndexVector};

    fn latent(dim: usize, v: &[f64]) -> LatentFeature {
        LatentFeature::from_flat(dim, v.to_vec()).unwrap()
    }

    fn quantized(rows: &[f64]) -> QuantizedFeature {
        let n = rows.len() / 2;
        let cb = Codebook::from_flat(2, {
            let mut d = rows.to_vec();
            while !(d.len() / 2).is_power_of_two() {
                d.extend_from_slice(&[0.0, 0.0]);
            }
            d
        })
        .unwrap();
        dequantize(&IndexVector::new((0..n).collect(), cb.size()).unwrap(), &cb).unwrap()
    }

    #[test]
    fn fuse_examples() {
        let a = quantized(&[1.0, 5.0]);
        let b = quantized(&[3.0, 2.0]);
        assert_eq!(max_pool_fuse(&[&a]).unwrap().as_latent(), a.as_latent());
        assert_eq!(
            max_pool_fuse(&[&a, &b]).unwrap().as_latent().as_flat(),
            &[3.0, 5.0]
        );
        assert_eq!(max_pool_fuse(&[]), Err(FuseError::NoObservation));
    }

    #[test]
    fn fuse_shape_mismatch() {
        let a = quantized(&[1.0, 5.0]);
        let b = quantized(&[3.0, 2.0, 1.0, 1.0]);
        assert_eq!(max_pool_fuse(&[&a, &b]), Err(FuseError::ShapeMismatch));
    }

    #[test]
    fn centroid_examples() {
        let f1 = FusedFeature(latent(2, &[1.0, 2.0]));
        let f2 = FusedFeature(latent(2, &[-4.0, 0.5]));
        let m = fit_centroids([(0, &f1), (1, &f2)], 2, 1.0).unwrap();
        assert_eq!(m.centroids()[0], *f1.as_latent());
        assert_eq!(m.centroids()[1], *f2.as_latent());

        let dup = fit_centroids([(0, &f1), (1, &f2), (0, &f1), (1, &f2)], 2, 1.0).unwrap();
        assert_eq!(dup, m);

        let neg = FusedFeature(latent(2, &[-1.0, -2.0]));
        let sym = fit_centroids([(0, &f1), (0, &neg)], 1, 1.0).unwrap();
        assert_eq!(sym.centroids()[0].as_flat(), &[0.0, 0.0]);
    }

    #[test]
    fn centroid_errors() {
        let f1 = FusedFeature(latent(2, &[1.0, 2.0]));
        assert_eq!(
            fit_centroids([(0, &f1)], 2, 1.0),
            Err(FuseError::MissingClass(1))
        );
        assert!(matches!(
            fit_centroids([(3, &f1)], 2, 1.0),
            Err(FuseError::LabelOutOfRange { .. })
        ));
        assert_eq!(
            fit_centroids([(0, &f1)], 1, 0.0),
            Err(FuseError::BadTemperature(0.0))
        );
    }

    #[test]
    fn classify_exact_centroid() {
        let cs: Vec<LatentFeature> = (0..4).map(|c| latent(1, &[c as f64 * 3.0])).collect();
        let m = ClassModel::new(cs, 1.0).unwrap();
        let p = classify(&FusedFeature(latent(1, &[6.0])), &m).unwrap();
        assert_eq!(p.label, 2);
        for (c, &q) in p.probabilities.iter().enumerate() {
            if c != 2 {
                assert!(p.probabilities[2] > q);
            }
        }
    }

    #[test]
    fn classify_equidistant_is_uniform() {
        let m = ClassModel::new(vec![latent(1, &[-1.0]), latent(1, &[1.0])], 2.5).unwrap();
        let p = classify(&FusedFeature(latent(1, &[0.0])), &m).unwrap();
        assert_eq!(p.label, 0);
        assert_eq!(p.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn classify_two_scalar_centroids() {
        let m = ClassModel::new(vec![latent(1, &[0.0]), latent(1, &[1.0])], 1.0).unwrap();
        let p = classify(&FusedFeature(latent(1, &[0.9])), &m).unwrap();
        let (a, b) = ((-0.81f64).exp(), (-0.01f64).exp());
        assert_eq!(p.label, 1);
        assert!((p.probabilities[0] - a / (a + b)).abs() < 1e-12);
        assert!((p.probabilities[1] - b / (a + b)).abs() < 1e-12);
    }
}
