//! Deterministic reference backends.
//!
//! They stand in for foundation models in tests and demos: the proposer is a
//! color-quantized connected-components segmenter, the feature extractor pools
//! color statistics per cell, and the identifier/text encoder share an
//! explicit class → color-range table so that identification is exact.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::segment::{connected_components, flood_fill, quantize};
use super::{
    l2_norm, FeatureExtractor, IdentifiedTarget, Identifier, MaskPromoter, MaskProposer,
    TargetGeometry, TextEmbedding, TextEncoder,
};
use crate::error::{Error, Result};
use crate::model::{
    BBox, BinaryMask, FeatureMap, InstanceMask, MaskSet, MaskSource, Params, Raster, Temporal,
    Vocabulary,
};

/// Backend id of every synthetic component in the registry.
pub const SYNTHETIC_ID: &str = "synthetic";

pub(crate) fn parse_params<T: DeserializeOwned>(id: &str, params: &Params) -> Result<T> {
    serde_json::from_value(serde_json::Value::Object(params.clone()))
        .map_err(|e| Error::Config(format!("parameters of `{id}`: {e}")))
}

/// Inclusive per-channel color range.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorRange {
    pub min: Vec<u8>,
    pub max: Vec<u8>,
}

impl ColorRange {
    pub fn new(min: &[u8], max: &[u8]) -> Self {
        Self {
            min: min.to_vec(),
            max: max.to_vec(),
        }
    }

    pub fn contains(&self, px: &[u8]) -> bool {
        px.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Range midpoint scaled to [0, 1].
    pub fn center(&self) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(&lo, &hi)| (lo as f64 + hi as f64) / 2.0 / 255.0)
            .collect()
    }

    fn check_channels(&self, name: &str, channels: usize) -> Result<()> {
        if self.min.len() != channels || self.max.len() != channels {
            return Err(Error::Config(format!(
                "color range of `{name}` has {}/{} bounds, image has {channels} channels",
                self.min.len(),
                self.max.len()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Mask proposal

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposerParams {
    /// Quantization bins per channel.
    pub levels: u32,
    /// Components smaller than this many pixels are dropped.
    pub min_area: usize,
}

impl Default for ProposerParams {
    fn default() -> Self {
        Self {
            levels: 8,
            min_area: 16,
        }
    }
}

/// Quantized-color connected components as instance proposals.
///
/// Quality is the component's solidity (area over bounding-box area).
#[derive(Debug, Clone)]
pub struct SyntheticProposer {
    params: ProposerParams,
}

impl SyntheticProposer {
    pub fn new(params: ProposerParams) -> Result<Self> {
        if !(1..=256).contains(&params.levels) {
            return Err(Error::Config("levels must lie in 1..=256".into()));
        }
        Ok(Self { params })
    }

    pub fn from_params(params: &Params) -> Result<Self> {
        Self::new(parse_params(SYNTHETIC_ID, params)?)
    }
}

impl MaskProposer for SyntheticProposer {
    fn propose_masks(&self, image: &Raster, temporal: Temporal) -> Result<MaskSet> {
        let (h, w) = (image.height(), image.width());
        let keys = quantize(image, self.params.levels);
        let mut masks = Vec::new();
        for comp in connected_components(h, w, &keys, None) {
            if comp.len() < self.params.min_area {
                continue;
            }
            let mask = mask_from_indices(h, w, &comp);
            let bbox = mask.bbox().ok_or(Error::EmptyMask)?;
            let quality = comp.len() as f64 / bbox.area() as f64;
            masks.push(InstanceMask::new(mask, quality, temporal)?);
        }
        Ok(MaskSet::new(masks, MaskSource::Proposal).sorted())
    }
}

fn mask_from_indices(h: usize, w: usize, idx: &[usize]) -> BinaryMask {
    let mut bits = vec![false; h * w];
    for &i in idx {
        bits[i] = true;
    }
    BinaryMask::from_bits(h, w, bits).expect("indices come from an h*w grid")
}

// ---------------------------------------------------------------------------
// Shared embedding space

/// Statistics per channel: `cos(πm)`, `sin(πm)` of the mean `m` and the
/// standard deviation, all on a [0, 1] intensity scale.
const STATS_PER_CHANNEL: usize = 3;

fn encode_stats(means: &[f64], stds: &[f64]) -> Vec<f64> {
    means
        .iter()
        .zip(stds)
        .flat_map(|(&m, &s)| [(PI * m).cos(), (PI * m).sin(), s])
        .collect()
}

/// Seeded linear map from `STATS_PER_CHANNEL * channels` statistics to `dim`
/// outputs. Its columns are orthonormal when `dim` is at least the input
/// width, so inner products between statistic vectors are preserved.
#[derive(Debug, Clone)]
struct Projection {
    matrix: DMatrix<f64>,
}

impl Projection {
    fn new(seed: u64, dim: usize, channels: usize) -> Self {
        let k = STATS_PER_CHANNEL * channels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d_0b5e_55ed);
        let (rows, cols) = (dim.max(k), dim.min(k));
        let gauss = DMatrix::<f64>::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
        let q = gauss.qr().q();
        let matrix = if dim >= k { q } else { q.transpose() };
        Self { matrix }
    }

    fn apply(&self, stats: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(stats);
        (&self.matrix * v).iter().copied().collect()
    }
}

// ---------------------------------------------------------------------------
// Feature extraction

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureParams {
    pub dim: usize,
    pub stride: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { dim: 16, stride: 8 }
    }
}

/// Per-cell color statistics through a seeded projection.
#[derive(Debug, Clone)]
pub struct SyntheticFeatures {
    params: FeatureParams,
    seed: u64,
}

impl SyntheticFeatures {
    pub fn new(params: FeatureParams, seed: u64) -> Result<Self> {
        if params.dim == 0 || params.stride == 0 {
            return Err(Error::Config("dim and stride must be positive".into()));
        }
        Ok(Self { params, seed })
    }

    pub fn from_params(params: &Params, seed: u64) -> Result<Self> {
        Self::new(parse_params(SYNTHETIC_ID, params)?, seed)
    }
}

impl FeatureExtractor for SyntheticFeatures {
    fn extract_features(&self, image: &Raster, temporal: Temporal) -> Result<FeatureMap> {
        let (h, w, c) = (image.height(), image.width(), image.channels());
        let gh = h.div_ceil(self.params.stride);
        let gw = w.div_ceil(self.params.stride);
        let proj = Projection::new(self.seed, self.params.dim, c);

        let mut data = Vec::with_capacity(gh * gw * self.params.dim);
        for row in 0..gh {
            let rows = crate::model::partition_range(row, gh, h);
            for col in 0..gw {
                let cols = crate::model::partition_range(col, gw, w);
                let n = (rows.len() * cols.len()) as f64;
                let mut sum = vec![0.0; c];
                let mut sq = vec![0.0; c];
                for y in rows.clone() {
                    for x in cols.clone() {
                        for (ch, &v) in image.pixel(x, y).iter().enumerate() {
                            let v = v as f64 / 255.0;
                            sum[ch] += v;
                            sq[ch] += v * v;
                        }
                    }
                }
                let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
                let stds: Vec<f64> = sq
                    .iter()
                    .zip(&means)
                    .map(|(s, m)| (s / n - m * m).max(0.0).sqrt())
                    .collect();
                data.extend(proj.apply(&encode_stats(&means, &stds)));
            }
        }
        FeatureMap::new(gh, gw, self.params.dim, h, w, temporal, data)
    }

    fn dim(&self) -> usize {
        self.params.dim
    }
}

// ---------------------------------------------------------------------------
// Text encoding

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextParams {
    pub dim: usize,
    /// Channel count of the images whose features these embeddings meet.
    pub channels: usize,
    /// Texts with a color range embed as that color's statistics; all other
    /// texts embed as a hash-seeded random direction.
    pub colors: BTreeMap<String, ColorRange>,
}

impl Default for TextParams {
    fn default() -> Self {
        Self {
            dim: 16,
            channels: 3,
            colors: BTreeMap::new(),
        }
    }
}

/// Text encoder living in the same space as [`SyntheticFeatures`] built with
/// the same seed and `dim`.
#[derive(Debug, Clone)]
pub struct SyntheticTextEncoder {
    params: TextParams,
    seed: u64,
    projection: Projection,
}

impl SyntheticTextEncoder {
    pub fn new(params: TextParams, seed: u64) -> Result<Self> {
        if params.dim == 0 || !(params.channels == 1 || params.channels == 3) {
            return Err(Error::Config(
                "dim must be positive and channels 1 or 3".into(),
            ));
        }
        for (name, range) in &params.colors {
            range.check_channels(name, params.channels)?;
        }
        let projection = Projection::new(seed, params.dim, params.channels);
        Ok(Self {
            params,
            seed,
            projection,
        })
    }

    pub fn from_params(params: &Params, seed: u64) -> Result<Self> {
        Self::new(parse_params(SYNTHETIC_ID, params)?, seed)
    }

    fn hashed(&self, prompt: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(prompt.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes));
        (0..self.params.dim)
            .map(|_| rng.sample(StandardNormal))
            .collect()
    }

    fn text_vector(&self, vocabulary: &Vocabulary, text: &str) -> Result<Vec<f64>> {
        if let Some(range) = self.params.colors.get(text) {
            let center = range.center();
            let stds = vec![0.0; center.len()];
            return normalized(self.projection.apply(&encode_stats(&center, &stds)));
        }
        let mut acc = vec![0.0; self.params.dim];
        for prompt in vocabulary.prompts(text) {
            add_assign(&mut acc, &normalized(self.hashed(&prompt))?);
        }
        normalized(acc)
    }
}

fn normalized(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = l2_norm(&v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::ZeroVector);
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

fn add_assign(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

impl TextEncoder for SyntheticTextEncoder {
    fn embed_vocabulary(&self, vocabulary: &Vocabulary) -> Result<Vec<TextEmbedding>> {
        vocabulary.validate()?;
        let mut out = Vec::new();
        for class in &vocabulary.foreground {
            let mut acc = vec![0.0; self.params.dim];
            for text in class.texts() {
                add_assign(&mut acc, &self.text_vector(vocabulary, text)?);
            }
            out.push(TextEmbedding::new(&class.name, acc, false)?);
        }
        for bg in &vocabulary.background {
            out.push(TextEmbedding::new(
                bg,
                self.text_vector(vocabulary, bg)?,
                true,
            )?);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Identification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitKind {
    #[default]
    Box,
    Point,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifierParams {
    /// Class name (or synonym) → color range that identifies it.
    pub colors: BTreeMap<String, ColorRange>,
    pub kind: EmitKind,
    pub min_area: usize,
}

impl Default for IdentifierParams {
    fn default() -> Self {
        Self {
            colors: BTreeMap::new(),
            kind: EmitKind::Box,
            min_area: 16,
        }
    }
}

/// Finds connected regions whose pixels fall in a class's color range.
#[derive(Debug, Clone)]
pub struct SyntheticIdentifier {
    params: IdentifierParams,
}

impl SyntheticIdentifier {
    pub fn new(params: IdentifierParams) -> Self {
        Self { params }
    }

    pub fn from_params(params: &Params) -> Result<Self> {
        Ok(Self::new(parse_params(SYNTHETIC_ID, params)?))
    }
}

impl Identifier for SyntheticIdentifier {
    fn identify_targets(
        &self,
        image: &Raster,
        vocabulary: &Vocabulary,
        temporal: Temporal,
    ) -> Result<Vec<IdentifiedTarget>> {
        vocabulary.validate()?;
        let (h, w) = (image.height(), image.width());
        let mut out = Vec::new();
        for class in &vocabulary.foreground {
            let Some((text, range)) = class
                .texts()
                .into_iter()
                .find_map(|t| self.params.colors.get(t).map(|r| (t, r)))
            else {
                continue;
            };
            range.check_channels(text, image.channels())?;
            let keys: Vec<u32> = image
                .data()
                .chunks_exact(image.channels())
                .map(|px| range.contains(px) as u32)
                .collect();
            for comp in connected_components(h, w, &keys, Some(0)) {
                if comp.len() < self.params.min_area {
                    continue;
                }
                let mask = mask_from_indices(h, w, &comp);
                let geometry = match self.params.kind {
                    EmitKind::Box => TargetGeometry::Box(mask.bbox().ok_or(Error::EmptyMask)?),
                    EmitKind::Point => {
                        let (x, y) = central_pixel(&comp, w);
                        TargetGeometry::Point { x, y }
                    }
                    EmitKind::Mask => TargetGeometry::Mask(mask),
                };
                out.push(IdentifiedTarget {
                    geometry,
                    class_label: class.name.clone(),
                    confidence: 1.0,
                    temporal,
                });
            }
        }
        Ok(out)
    }
}

/// Component pixel nearest to the component centroid; ties go to the
/// smallest row-major index.
fn central_pixel(comp: &[usize], width: usize) -> (usize, usize) {
    let n = comp.len() as f64;
    let cx = comp.iter().map(|&p| (p % width) as f64).sum::<f64>() / n;
    let cy = comp.iter().map(|&p| (p / width) as f64).sum::<f64>() / n;
    let best = comp
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let d = |p: usize| {
                let dx = (p % width) as f64 - cx;
                let dy = (p / width) as f64 - cy;
                dx * dx + dy * dy
            };
            d(a).total_cmp(&d(b)).then(a.cmp(&b))
        })
        .expect("components are non-empty");
    (best % width, best / width)
}

// ---------------------------------------------------------------------------
// Promotion

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromoterParams {
    pub levels: u32,
}

impl Default for PromoterParams {
    fn default() -> Self {
        Self { levels: 8 }
    }
}

/// Box → pixels of the box's dominant quantized color; point → quantized
/// color component under the point; coarse mask → passed through.
#[derive(Debug, Clone)]
pub struct SyntheticPromoter {
    params: PromoterParams,
}

impl SyntheticPromoter {
    pub fn new(params: PromoterParams) -> Result<Self> {
        if !(1..=256).contains(&params.levels) {
            return Err(Error::Config("levels must lie in 1..=256".into()));
        }
        Ok(Self { params })
    }

    pub fn from_params(params: &Params) -> Result<Self> {
        Self::new(parse_params(SYNTHETIC_ID, params)?)
    }
}

impl MaskPromoter for SyntheticPromoter {
    fn promote_to_masks(&self, image: &Raster, targets: &[IdentifiedTarget]) -> Result<MaskSet> {
        let (h, w) = (image.height(), image.width());
        if let Some(first) = targets.first() {
            if targets.iter().any(|t| t.temporal != first.temporal) {
                return Err(Error::InvalidValue(
                    "targets to promote must come from one temporal image".into(),
                ));
            }
        }
        let keys = quantize(image, self.params.levels);
        let mut masks = Vec::with_capacity(targets.len());
        for (i, target) in targets.iter().enumerate() {
            let mask = match &target.geometry {
                TargetGeometry::Box(b) => {
                    let b = BBox::new(b.x_min, b.y_min, b.x_max.min(w), b.y_max.min(h));
                    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
                    for y in b.y_min..b.y_max {
                        for x in b.x_min..b.x_max {
                            *counts.entry(keys[y * w + x]).or_default() += 1;
                        }
                    }
                    // max_by_key keeps the last maximum; iterate in reverse so
                    // the smallest key wins ties
                    let dominant = counts.iter().rev().max_by_key(|(_, &n)| n).map(|(&k, _)| k);
                    match dominant {
                        Some(k) => BinaryMask::from_fn(h, w, |x, y| {
                            b.contains(x, y) && keys[y * w + x] == k
                        }),
                        None => BinaryMask::new(h, w),
                    }
                }
                TargetGeometry::Point { x, y } => {
                    if *x >= w || *y >= h {
                        return Err(Error::InvalidValue(format!(
                            "point ({x}, {y}) outside {h}x{w} image"
                        )));
                    }
                    mask_from_indices(h, w, &flood_fill(h, w, &keys, y * w + x))
                }
                TargetGeometry::Mask(m) => {
                    if m.height() != h || m.width() != w {
                        return Err(Error::ShapeMismatch(format!(
                            "coarse mask {}x{} for {h}x{w} image",
                            m.height(),
                            m.width()
                        )));
                    }
                    m.clone()
                }
            };
            let inst = InstanceMask::new(mask, target.confidence.clamp(0.0, 1.0), target.temporal)
                .map_err(|e| match e {
                    Error::EmptyMask => Error::EmptyPromotion(i),
                    other => other,
                })?;
            masks.push(inst.with_class_label(&target.class_label));
        }
        Ok(MaskSet::new(masks, MaskSource::Identified))
    }
}
