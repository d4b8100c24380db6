//! Vector quantization of latent sub-vectors against a shared codebook.
//!
//! A [`Codebook`] holds `J` codewords of dimension `D`, with `J` a power of two
//! so each index maps to an exact `log2(J)`-bit field. Base codebooks are built
//! with seeded k-means ([`build_base_codebook`]); codebooks for other rates are
//! derived from a base by deterministic merging or splitting
//! ([`derive_codebook`]).

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Offset applied on each side of a split codeword.
pub const SPLIT_EPSILON: f64 = 1e-3;

const KMEANS_MAX_ITERS: usize = 50;
const KMEANS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantizeError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("codebook size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("non-finite component in input")]
    NonFinite,
    #[error("flat buffer of length {len} is not a multiple of dimension {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("index {index} out of range for codebook of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("index vector expects codebook size {expected}, codebook has {actual}")]
    CodebookSizeMismatch { expected: usize, actual: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn check_finite(values: &[f64]) -> Result<(), QuantizeError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(QuantizeError::NonFinite)
    }
}

/// An ordered, immutable set of `J` codewords of dimension `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    data: Vec<f64>,
}

impl Codebook {
    /// Builds a codebook from codewords in index order.
    pub fn new(dim: usize, codewords: Vec<Vec<f64>>) -> Result<Self, QuantizeError> {
        let mut data = Vec::with_capacity(codewords.len() * dim);
        for cw in &codewords {
            if cw.len() != dim {
                return Err(QuantizeError::DimensionMismatch {
                    expected: dim,
                    actual: cw.len(),
                });
            }
            data.extend_from_slice(cw);
        }
        Self::from_flat(dim, data)
    }

    /// Builds a codebook from a row-major `J × D` buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self, QuantizeError> {
        if dim == 0 {
            return Err(QuantizeError::ZeroDimension);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(QuantizeError::Ragged {
                len: data.len(),
                dim,
            });
        }
        let size = data.len() / dim;
        if !size.is_power_of_two() {
            return Err(QuantizeError::NotPowerOfTwo(size));
        }
        check_finite(&data)?;
        Ok(Self { dim, data })
    }

    pub fn size(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Code rate: bits needed to address one codeword.
    pub fn bits_per_index(&self) -> u32 {
        self.size().trailing_zeros()
    }

    pub fn codeword(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn codewords(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Index of the nearest codeword; ties go to the lowest index.
    pub fn nearest(&self, v: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (j, cw) in self.codewords().enumerate() {
            let d = squared_distance(v, cw);
            if d < best_dist {
                best = j;
                best_dist = d;
            }
        }
        (best, best_dist)
    }
}

/// `M` sub-vectors of dimension `D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFeature {
    dim: usize,
    data: Vec<f64>,
}

impl LatentFeature {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self, QuantizeError> {
        if dim == 0 {
            return Err(QuantizeError::ZeroDimension);
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(QuantizeError::Ragged {
                len: data.len(),
                dim,
            });
        }
        check_finite(&data)?;
        Ok(Self { dim, data })
    }

    pub fn from_subvectors(dim: usize, subvectors: &[Vec<f64>]) -> Result<Self, QuantizeError> {
        let mut data = Vec::with_capacity(subvectors.len() * dim);
        for sv in subvectors {
            if sv.len() != dim {
                return Err(QuantizeError::DimensionMismatch {
                    expected: dim,
                    actual: sv.len(),
                });
            }
            data.extend_from_slice(sv);
        }
        Self::from_flat(dim, data)
    }

    pub fn zeros(num_subvectors: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; num_subvectors * dim],
        }
    }

    pub fn num_subvectors(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subvector(&self, m: usize) -> &[f64] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn subvectors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &LatentFeature) -> bool {
        self.dim == other.dim && self.data.len() == other.data.len()
    }
}

/// Codeword indices for one latent feature, tagged with the codebook size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVector {
    indices: Vec<usize>,
    codebook_size: usize,
}

impl IndexVector {
    pub fn new(indices: Vec<usize>, codebook_size: usize) -> Result<Self, QuantizeError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= codebook_size) {
            return Err(QuantizeError::IndexOutOfRange {
                index: bad,
                size: codebook_size,
            });
        }
        Ok(Self {
            indices,
            codebook_size,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A latent feature whose every sub-vector is a codeword of its source codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedFeature(LatentFeature);

impl QuantizedFeature {
    pub fn as_latent(&self) -> &LatentFeature {
        &self.0
    }

    pub fn into_latent(self) -> LatentFeature {
        self.0
    }
}

/// Maps each sub-vector to its nearest codeword (Euclidean, ties to the lowest index).
pub fn quantize_feature(
    z: &LatentFeature,
    codebook: &Codebook,
) -> Result<IndexVector, QuantizeError> {
    if z.dim() != codebook.dim() {
        return Err(QuantizeError::DimensionMismatch {
            expected: codebook.dim(),
            actual: z.dim(),
        });
    }
    let indices = z.subvectors().map(|sv| codebook.nearest(sv).0).collect();
    Ok(IndexVector {
        indices,
        codebook_size: codebook.size(),
    })
}

/// Looks up each index in the shared codebook.
pub fn dequantize(c: &IndexVector, codebook: &Codebook) -> Result<QuantizedFeature, QuantizeError> {
    if c.codebook_size != codebook.size() {
        return Err(QuantizeError::CodebookSizeMismatch {
            expected: c.codebook_size,
            actual: codebook.size(),
        });
    }
    let mut data = Vec::with_capacity(c.len() * codebook.dim());
    for &i in &c.indices {
        if i >= codebook.size() {
            return Err(QuantizeError::IndexOutOfRange {
                index: i,
                size: codebook.size(),
            });
        }
        data.extend_from_slice(codebook.codeword(i));
    }
    if data.is_empty() {
        return Err(QuantizeError::Ragged {
            len: 0,
            dim: codebook.dim(),
        });
    }
    Ok(QuantizedFeature(LatentFeature {
        dim: codebook.dim(),
        data,
    }))
}

/// Mean squared quantization error of `samples` (row-major, dimension `D`) against `codebook`.
pub fn mean_quantization_error(samples: &[f64], codebook: &Codebook) -> f64 {
    let n = samples.len() / codebook.dim();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = samples
        .chunks_exact(codebook.dim())
        .map(|s| codebook.nearest(s).1)
        .sum();
    total / n as f64
}

/// Something unusual that happened while building a codebook.
#[derive(Debug, Clone, PartialEq)]
pub enum CodebookWarning {
    /// Fewer distinct samples than requested codewords; `perturbed` duplicate
    /// centers were nudged apart.
    DuplicateCenters {
        distinct_samples: usize,
        perturbed: usize,
    },
    /// Lloyd iterations hit the cap before the center shift fell below tolerance.
    NotConverged { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseCodebook {
    pub codebook: Codebook,
    pub warnings: Vec<CodebookWarning>,
}

fn sort_lexicographic(dim: usize, data: &mut Vec<f64>) {
    let mut rows: Vec<&[f64]> = data.chunks_exact(dim).collect();
    rows.sort_by(|a, b| lex_cmp(a, b));
    let sorted: Vec<f64> = rows.concat();
    *data = sorted;
}

fn count_distinct(dim: usize, samples: &[f64]) -> usize {
    let mut rows: Vec<&[f64]> = samples.chunks_exact(dim).collect();
    rows.sort_by(|a, b| lex_cmp(a, b));
    rows.dedup_by(|a, b| lex_cmp(a, b) == Ordering::Equal);
    rows.len()
}

/// Seeded k-means (k-means++ seeding, Lloyd refinement) over `samples`, a
/// row-major buffer of `D`-dimensional vectors.
///
/// Codewords are sorted lexicographically before indices are assigned. If
/// the samples hold fewer distinct points than `size`, duplicated centers are
/// offset along successive coordinates and a warning is emitted.
pub fn build_base_codebook(
    samples: &[f64],
    dim: usize,
    size: usize,
    seed: u64,
) -> Result<BaseCodebook, QuantizeError> {
    if dim == 0 {
        return Err(QuantizeError::ZeroDimension);
    }
    if !size.is_power_of_two() {
        return Err(QuantizeError::NotPowerOfTwo(size));
    }
    if !samples.len().is_multiple_of(dim) {
        return Err(QuantizeError::Ragged {
            len: samples.len(),
            dim,
        });
    }
    check_finite(samples)?;
    let n = samples.len() / dim;
    if n < size {
        return Err(QuantizeError::TooFewSamples {
            needed: size,
            got: n,
        });
    }
    let row = |i: usize| &samples[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();

    // k-means++ seeding
    let mut centers: Vec<f64> = Vec::with_capacity(size * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(row(first));
    let mut nearest_d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(row(i), row(first)))
        .collect();
    for _ in 1..size {
        let total: f64 = nearest_d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in nearest_d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick);
        centers.extend_from_slice(c);
        for (i, d) in nearest_d2.iter_mut().enumerate() {
            let nd = squared_distance(row(i), c);
            if nd < *d {
                *d = nd;
            }
        }
    }

    // Lloyd refinement
    let mut assignment = vec![0usize; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERS {
        iterations += 1;
        let book = Codebook {
            dim,
            data: centers.clone(),
        };
        for (i, a) in assignment.iter_mut().enumerate() {
            *a = book.nearest(row(i)).0;
        }
        let mut sums = vec![0.0; size * dim];
        let mut counts = vec![0usize; size];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        let mut shift = 0.0f64;
        for j in 0..size {
            if counts[j] == 0 {
                continue;
            }
            let inv = 1.0 / counts[j] as f64;
            for d in 0..dim {
                let updated = sums[j * dim + d] * inv;
                let delta = updated - centers[j * dim + d];
                shift = shift.max(delta * delta);
                centers[j * dim + d] = updated;
            }
        }
        if shift <= KMEANS_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(CodebookWarning::NotConverged { iterations });
    }

    let distinct = count_distinct(dim, samples);
    let perturbed = separate_duplicates(dim, &mut centers);
    if perturbed > 0 || distinct < size {
        warnings.push(CodebookWarning::DuplicateCenters {
            distinct_samples: distinct,
            perturbed,
        });
    }

    sort_lexicographic(dim, &mut centers);
    Ok(BaseCodebook {
        codebook: Codebook { dim, data: centers },
        warnings,
    })
}

/// Offsets exact duplicate centers by successive multiples of
/// [`SPLIT_EPSILON`] along coordinate `(k mod D)`. Returns how many moved.
fn separate_duplicates(dim: usize, centers: &mut [f64]) -> usize {
    let size = centers.len() / dim;
    let mut perturbed = 0;
    for j in 1..size {
        let mut step = 1usize;
        loop {
            let clash = (0..j).any(|i| {
                lex_cmp(
                    &centers[i * dim..(i + 1) * dim],
                    &centers[j * dim..(j + 1) * dim],
                ) == Ordering::Equal
            });
            if !clash {
                break;
            }
            let coord = (step - 1) % dim;
            centers[j * dim + coord] += SPLIT_EPSILON * step as f64;
            if step == 1 {
                perturbed += 1;
            }
            step += 1;
        }
    }
    perturbed
}

/// Resizes `base` to `target_size` codewords without sample statistics.
///
/// Shrinking repeatedly merges the closest pair into the mean of the base
/// codewords the two have absorbed (their midpoint on the first merge); growing
/// repeatedly splits the largest-norm codeword by `±SPLIT_EPSILON` along its
/// largest-magnitude coordinate.
pub fn derive_codebook(base: &Codebook, target_size: usize) -> Result<Codebook, QuantizeError> {
    derive_codebook_with_samples(base, target_size, None)
}

/// As [`derive_codebook`], but driven by `samples` when given: each base
/// codeword is weighted by its assigned-sample count and merges pick the pair
/// whose union least increases the squared error, and splits pick the
/// codeword whose assigned samples have the largest total variance, along the
/// coordinate where those samples spread most.
pub fn derive_codebook_with_samples(
    base: &Codebook,
    target_size: usize,
    samples: Option<&[f64]>,
) -> Result<Codebook, QuantizeError> {
    if !target_size.is_power_of_two() {
        return Err(QuantizeError::NotPowerOfTwo(target_size));
    }
    if let Some(s) = samples {
        if s.len() % base.dim() != 0 {
            return Err(QuantizeError::Ragged {
                len: s.len(),
                dim: base.dim(),
            });
        }
        check_finite(s)?;
    }
    if target_size == base.size() {
        return Ok(base.clone());
    }
    let dim = base.dim();
    let mut rows: Vec<Vec<f64>> = base.codewords().map(|c| c.to_vec()).collect();
    if rows.len() > target_size {
        let (mut weights, cost) = match samples {
            Some(s) => (cell_counts(base, s), MergeCost::Ward),
            None => (vec![1.0; rows.len()], MergeCost::Distance),
        };
        while rows.len() > target_size {
            merge_cheapest_pair(&mut rows, &mut weights, cost);
        }
    }
    while rows.len() < target_size {
        split_one(&mut rows, samples, dim);
    }
    let mut data = rows.concat();
    sort_lexicographic(dim, &mut data);
    Ok(Codebook { dim, data })
}

fn cell_counts(book: &Codebook, samples: &[f64]) -> Vec<f64> {
    let mut counts = vec![0.0; book.size()];
    for s in samples.chunks_exact(book.dim()) {
        counts[book.nearest(s).0] += 1.0;
    }
    counts
}

#[derive(Clone, Copy)]
enum MergeCost {
    /// Squared distance between the two codewords.
    Distance,
    /// Increase in within-cell squared error, `wᵢwⱼ/(wᵢ+wⱼ)·‖cᵢ-cⱼ‖²`.
    Ward,
}

/// Replaces the cheapest pair with the weighted mean of the two, weights being
/// the mass each side has absorbed so far (the plain midpoint for two
/// untouched codewords, or two empty cells).
fn merge_cheapest_pair(rows: &mut Vec<Vec<f64>>, weights: &mut Vec<f64>, cost: MergeCost) {
    let mut best = (0, 1);
    let mut best_d = f64::INFINITY;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let mut d = squared_distance(&rows[i], &rows[j]);
            if let MergeCost::Ward = cost {
                let (wi, wj) = (weights[i], weights[j]);
                d *= if wi + wj > 0.0 {
                    wi * wj / (wi + wj)
                } else {
                    0.0
                };
            }
            if d < best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    let (i, j) = best;
    let removed = rows.remove(j);
    let wj = weights.remove(j);
    let wi = weights[i];
    let (fi, fj) = if wi + wj > 0.0 {
        (wi / (wi + wj), wj / (wi + wj))
    } else {
        (0.5, 0.5)
    };
    for (a, b) in rows[i].iter_mut().zip(&removed) {
        *a = fi * *a + fj * b;
    }
    weights[i] = wi + wj;
}

fn split_one(rows: &mut Vec<Vec<f64>>, samples: Option<&[f64]>, dim: usize) {
    let by_samples = samples.and_then(|s| widest_cell(rows, s, dim));
    let (target, coord) = by_samples.unwrap_or_else(|| {
        let norm2 = |r: &Vec<f64>| r.iter().map(|x| x * x).sum::<f64>();
        let mut target = 0;
        for (j, r) in rows.iter().enumerate() {
            if norm2(r) > norm2(&rows[target]) {
                target = j;
            }
        }
        let row = &rows[target];
        let mut coord = 0;
        for d in 1..dim {
            if row[d].abs() > row[coord].abs() {
                coord = d;
            }
        }
        (target, coord)
    });
    let mut plus = rows[target].clone();
    plus[coord] += SPLIT_EPSILON;
    rows[target][coord] -= SPLIT_EPSILON;
    rows.insert(target + 1, plus);
}

/// The codeword with the largest assigned-sample variance and the coordinate
/// of largest spread, or `None` if every cell has zero variance.
fn widest_cell(rows: &[Vec<f64>], samples: &[f64], dim: usize) -> Option<(usize, usize)> {
    let k = rows.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k * dim];
    let mut sq = vec![0.0; k * dim];
    for s in samples.chunks_exact(dim) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, r) in rows.iter().enumerate() {
            let d = squared_distance(s, r);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        counts[best] += 1;
        for d in 0..dim {
            sums[best * dim + d] += s[d];
            sq[best * dim + d] += s[d] * s[d];
        }
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..k {
        if counts[j] < 2 {
            continue;
        }
        let n = counts[j] as f64;
        let mut total = 0.0;
        let mut coord = 0;
        let mut coord_var = f64::NEG_INFINITY;
        for d in 0..dim {
            let mean = sums[j * dim + d] / n;
            let var = (sq[j * dim + d] / n - mean * mean).max(0.0);
            total += var;
            if var > coord_var {
                coord_var = var;
                coord = d;
            }
        }
        if total > 0.0 && best.is_none_or(|(_, _, v)| total > v) {
            best = Some((j, coord, total));
        }
    }
    best.map(|(j, c, _)| (j, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn book(dim: usize, rows: &[&[f64]]) -> Codebook {
        Codebook::new(dim, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn exact_codewords_map_to_their_indices() {
        let rows: Vec<Vec<f64>> = (0..8).map(|j| vec![j as f64, -(j as f64)]).collect();
        let cb = Codebook::new(2, rows.clone()).unwrap();
        let z = LatentFeature::from_subvectors(2, &[rows[3].clone(), rows[7].clone()]).unwrap();
        let c = quantize_feature(&z, &cb).unwrap();
        assert_eq!(c.indices(), &[3, 7]);
        for (m, sv) in z.subvectors().enumerate() {
            assert_eq!(cb.nearest(sv).1, 0.0, "sub-vector {m}");
        }
    }

    #[test]
    fn scalar_nearest_and_tie() {
        let cb = book(1, &[&[0.0], &[1.0]]);
        let z = LatentFeature::from_flat(1, vec![0.4]).unwrap();
        assert_eq!(quantize_feature(&z, &cb).unwrap().indices(), &[0]);
        let z = LatentFeature::from_flat(1, vec![0.5]).unwrap();
        assert_eq!(quantize_feature(&z, &cb).unwrap().indices(), &[0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cb = book(1, &[&[0.0], &[1.0]]);
        let z = LatentFeature::from_flat(2, vec![0.0, 1.0]).unwrap();
        assert_eq!(
            quantize_feature(&z, &cb),
            Err(QuantizeError::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        );
    }

    #[test]
    fn dequantize_lookups() {
        let cb = book(2, &[&[1.0, 2.0], &[3.0, 4.0]]);
        let q = dequantize(&IndexVector::new(vec![0], 2).unwrap(), &cb).unwrap();
        assert_eq!(q.as_latent().as_flat(), &[1.0, 2.0]);

        let cb = book(2, &[&[0.0, 0.0], &[5.0, 5.0]]);
        let q = dequantize(&IndexVector::new(vec![1, 1], 2).unwrap(), &cb).unwrap();
        assert_eq!(q.as_latent().as_flat(), &[5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn dequantize_checks_size_and_range() {
        let cb = book(1, &[&[0.0], &[1.0]]);
        assert!(IndexVector::new(vec![2], 2).is_err());
        let c = IndexVector::new(vec![3], 4).unwrap();
        assert!(matches!(
            dequantize(&c, &cb),
            Err(QuantizeError::CodebookSizeMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(
            Codebook::from_flat(1, vec![0.0, 1.0, 2.0]),
            Err(QuantizeError::NotPowerOfTwo(3))
        );
        let cb = book(1, &[&[0.0], &[1.0]]);
        assert_eq!(
            derive_codebook(&cb, 3),
            Err(QuantizeError::NotPowerOfTwo(3))
        );
    }

    #[test]
    fn kmeans_two_clusters() {
        let mut samples = Vec::new();
        let mut sum_a = [0.0; 2];
        let mut sum_b = [0.0; 2];
        for i in 0..20 {
            let dx = (i as f64 * 0.37).sin() * 0.05;
            let dy = (i as f64 * 0.91).cos() * 0.05;
            samples.extend_from_slice(&[dx, dy]);
            samples.extend_from_slice(&[10.0 + dy, 10.0 + dx]);
            sum_a[0] += dx;
            sum_a[1] += dy;
            sum_b[0] += 10.0 + dy;
            sum_b[1] += 10.0 + dx;
        }
        let out = build_base_codebook(&samples, 2, 2, 7).unwrap();
        let mean_a = [sum_a[0] / 20.0, sum_a[1] / 20.0];
        let mean_b = [sum_b[0] / 20.0, sum_b[1] / 20.0];
        let cb = out.codebook;
        assert!(squared_distance(cb.codeword(0), &mean_a).sqrt() < 0.1);
        assert!(squared_distance(cb.codeword(1), &mean_b).sqrt() < 0.1);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn kmeans_exact_when_size_equals_distinct() {
        let samples = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0, 3.0, 1.0, 0.0, 3.0, 3.0];
        let out = build_base_codebook(&samples, 2, 4, 11).unwrap();
        assert_eq!(mean_quantization_error(&samples, &out.codebook), 0.0);
    }

    #[test]
    fn kmeans_is_deterministic() {
        let samples: Vec<f64> = (0..400).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let a = build_base_codebook(&samples, 4, 8, 3).unwrap();
        let b = build_base_codebook(&samples, 4, 8, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_flags_duplicates() {
        let samples = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        let out = build_base_codebook(&samples, 1, 4, 0).unwrap();
        assert_eq!(out.codebook.size(), 4);
        assert_eq!(count_distinct(1, out.codebook.as_flat()), 4);
        assert!(out.warnings.iter().any(|w| matches!(
            w,
            CodebookWarning::DuplicateCenters {
                distinct_samples: 2,
                ..
            }
        )));
    }

    #[test]
    fn derive_identity() {
        let cb = book(1, &[&[0.0], &[0.1], &[10.0], &[10.1]]);
        assert_eq!(derive_codebook(&cb, 4).unwrap(), cb);
    }

    /// Merges by exhaustive closest-pair scan over an independent representation.
    fn oracle_merge(mut pts: Vec<f64>, target: usize) -> Vec<f64> {
        while pts.len() > target {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i < j && (pts[i] - pts[j]).abs() < best.0 {
                        best = ((pts[i] - pts[j]).abs(), i, j);
                    }
                }
            }
            let mid = (pts[best.1] + pts[best.2]) / 2.0;
            pts.remove(best.2);
            pts[best.1] = mid;
        }
        pts.sort_by(f64::total_cmp);
        pts
    }

    #[test]
    fn derive_merge_scalar() {
        let cb = book(1, &[&[0.0], &[0.1], &[10.0], &[10.1]]);
        let expected = oracle_merge(vec![0.0, 0.1, 10.0, 10.1], 2);
        assert!((expected[0] - 0.05).abs() < 1e-12 && (expected[1] - 10.05).abs() < 1e-12);
        let out = derive_codebook(&cb, 2).unwrap();
        assert_eq!(out.as_flat(), expected.as_slice());
    }

    #[test]
    fn derive_split_doubles_and_stays_local() {
        let cb = book(2, &[&[0.0, 1.0], &[2.0, -3.0], &[5.0, 5.0], &[-1.0, 0.5]]);
        for samples in [None, Some(&[0.0, 1.1, 0.1, 0.9, 5.0, 5.2, 4.9, 5.0][..])] {
            let out = derive_codebook_with_samples(&cb, 8, samples).unwrap();
            assert_eq!(out.size(), 8);
            for cw in cb.codewords() {
                let near = out.codewords().any(|o| {
                    o.iter()
                        .zip(cw)
                        .all(|(a, b)| (a - b).abs() <= SPLIT_EPSILON + 1e-12)
                });
                assert!(near, "{cw:?} lost");
            }
        }
    }

    #[test]
    fn bits_per_index_matches_size() {
        let cb = Codebook::from_flat(1, (0..64).map(f64::from).collect()).unwrap();
        assert_eq!(cb.bits_per_index(), 6);
    }
}
