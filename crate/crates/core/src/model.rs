//! Domain types shared by the pipelines, components, geometry and evaluation.
//!
//! Everything here is immutable once constructed. Constructors validate the
//! invariants so downstream code can rely on them without re-checking.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit raster stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidRaster(format!(
                "extent must be at least 1x1, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidRaster(format!(
                "expected {} samples, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// A raster where every pixel has the value `pixel`.
    pub fn filled(height: usize, width: usize, pixel: &[u8]) -> Result<Self> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(height * width * pixel.len())
            .collect();
        Self::new(height, width, pixel.len(), data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Copy of this raster with the axis-aligned rectangle `rect` set to `pixel`.
    /// The rectangle is clipped to the raster extent.
    pub fn with_rect(&self, rect: BBox, pixel: &[u8]) -> Result<Self> {
        if pixel.len() != self.channels {
            return Err(Error::ShapeMismatch(format!(
                "pixel has {} channels, raster has {}",
                pixel.len(),
                self.channels
            )));
        }
        let mut data = self.data.clone();
        for y in rect.y_min..rect.y_max.min(self.height) {
            for x in rect.x_min..rect.x_max.min(self.width) {
                let start = (y * self.width + x) * self.channels;
                data[start..start + self.channels].copy_from_slice(pixel);
            }
        }
        Self::new(self.height, self.width, self.channels, data)
    }

    /// A `size`x`size` window with top-left corner at (`x0`, `y0`); samples
    /// outside the raster are zero.
    pub fn window(&self, x0: usize, y0: usize, size: usize) -> Self {
        let c = self.channels;
        let mut data = vec![0u8; size * size * c];
        for y in 0..size {
            let sy = y0 + y;
            if sy >= self.height {
                break;
            }
            let cols = size.min(self.width.saturating_sub(x0));
            let src = (sy * self.width + x0) * c;
            let dst = y * size * c;
            data[dst..dst + cols * c].copy_from_slice(&self.data[src..src + cols * c]);
        }
        Self {
            height: size,
            width: size,
            channels: c,
            data,
        }
    }
}

/// Temporal index of an image in a bi-temporal pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Temporal {
    T1,
    T2,
}

impl Temporal {
    pub fn other(self) -> Self {
        match self {
            Temporal::T1 => Temporal::T2,
            Temporal::T2 => Temporal::T1,
        }
    }
}

impl From<Temporal> for u8 {
    fn from(t: Temporal) -> u8 {
        match t {
            Temporal::T1 => 1,
            Temporal::T2 => 2,
        }
    }
}

impl TryFrom<u8> for Temporal {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Temporal::T1),
            2 => Ok(Temporal::T2),
            other => Err(format!("temporal index must be 1 or 2, got {other}")),
        }
    }
}

impl fmt::Display for Temporal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", u8::from(*self))
    }
}

/// Two co-registered images of the same scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiTemporalPair {
    pub image_t1: Raster,
    pub image_t2: Raster,
    pub pair_id: String,
}

impl BiTemporalPair {
    pub fn new(pair_id: impl Into<String>, image_t1: Raster, image_t2: Raster) -> Result<Self> {
        validate_pair(Self {
            image_t1,
            image_t2,
            pair_id: pair_id.into(),
        })
    }

    pub fn image(&self, t: Temporal) -> &Raster {
        match t {
            Temporal::T1 => &self.image_t1,
            Temporal::T2 => &self.image_t2,
        }
    }

    pub fn height(&self) -> usize {
        self.image_t1.height()
    }

    pub fn width(&self) -> usize {
        self.image_t1.width()
    }

    /// The same pair with the temporals exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            image_t1: self.image_t2.clone(),
            image_t2: self.image_t1.clone(),
            pair_id: self.pair_id.clone(),
        }
    }
}

/// Returns the pair unchanged when both temporals share height, width and
/// channel count.
pub fn validate_pair(pair: BiTemporalPair) -> Result<BiTemporalPair> {
    let (a, b) = (&pair.image_t1, &pair.image_t2);
    if a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels() {
        return Err(Error::ShapeMismatch(format!(
            "pair `{}`: t1 is {}x{}x{}, t2 is {}x{}x{}",
            pair.pair_id,
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    Ok(pair)
}

/// Pixel bounding box with exclusive maxima, so `width = x_max - x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 4]", from = "[usize; 4]")]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> usize {
        self.x_max.saturating_sub(self.x_min)
    }

    pub fn height(&self) -> usize {
        self.y_max.saturating_sub(self.y_min)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }
}

impl From<BBox> for [usize; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl From<[usize; 4]> for BBox {
    fn from(v: [usize; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

/// Dense binary grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} bits for a {height}x{width} mask",
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    /// All pixels inside `rect` set.
    pub fn from_rect(height: usize, width: usize, rect: BBox) -> Self {
        Self::from_fn(height, width, |x, y| rect.contains(x, y))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Tight outer box of the foreground, or `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        let mut out: Option<BBox> = None;
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            let Some(first) = row.iter().position(|&b| b) else {
                continue;
            };
            let last = row.iter().rposition(|&b| b).unwrap_or(first);
            out = Some(match out {
                None => BBox::new(first, y, last + 1, y + 1),
                Some(b) => BBox::new(b.x_min.min(first), b.y_min, b.x_max.max(last + 1), y + 1),
            });
        }
        out
    }

    /// Iterator over foreground pixel coordinates `(x, y)` in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    fn same_shape(&self, other: &BinaryMask) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// `(|a ∩ b|, |a ∪ b|)`.
    pub fn overlap_counts(&self, other: &BinaryMask) -> Result<(usize, usize)> {
        self.same_shape(other)?;
        let mut inter = 0;
        let mut union = 0;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok((inter, union))
    }
}

/// A single region proposal or identified instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    mask: BinaryMask,
    bbox: BBox,
    area: usize,
    quality: f64,
    temporal: Temporal,
    class_label: Option<String>,
    change_score: Option<f64>,
}

impl InstanceMask {
    pub fn new(mask: BinaryMask, quality: f64, temporal: Temporal) -> Result<Self> {
        if !(0.0..=1.0).contains(&quality) {
            return Err(Error::InvalidValue(format!(
                "quality must lie in [0, 1], got {quality}"
            )));
        }
        let bbox = mask.bbox().ok_or(Error::EmptyMask)?;
        let area = mask.area();
        Ok(Self {
            mask,
            bbox,
            area,
            quality,
            temporal,
            class_label: None,
            change_score: None,
        })
    }

    pub fn with_class_label(mut self, label: impl Into<String>) -> Self {
        self.class_label = Some(label.into());
        self
    }

    pub fn with_change_score(mut self, score: f64) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::InvalidValue(format!(
                "change score must be finite, got {score}"
            )));
        }
        self.change_score = Some(score);
        Ok(self)
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn quality(&self) -> f64 {
        self.quality
    }

    pub fn temporal(&self) -> Temporal {
        self.temporal
    }

    pub fn class_label(&self) -> Option<&str> {
        self.class_label.as_deref()
    }

    pub fn change_score(&self) -> Option<f64> {
        self.change_score
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    /// Key of the deterministic ordering: (temporal, y_min, x_min, area).
    /// Insertion index is the final tie-breaker and comes from stable sorting.
    pub fn ordering_key(&self) -> (Temporal, usize, usize, usize) {
        (self.temporal, self.bbox.y_min, self.bbox.x_min, self.area)
    }

    pub fn deterministic_cmp(&self, other: &Self) -> Ordering {
        self.ordering_key().cmp(&other.ordering_key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    Proposal,
    Identified,
    Changed,
    Final,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub masks: Vec<InstanceMask>,
    pub source: MaskSource,
}

impl MaskSet {
    pub fn new(masks: Vec<InstanceMask>, source: MaskSource) -> Self {
        Self { masks, source }
    }

    pub fn empty(source: MaskSource) -> Self {
        Self::new(Vec::new(), source)
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, InstanceMask> {
        self.masks.iter()
    }

    /// Stable sort into the deterministic order.
    pub fn sorted(mut self) -> Self {
        self.masks.sort_by(InstanceMask::deterministic_cmp);
        self
    }

    /// Common `(height, width)` of all masks; `None` when empty.
    pub fn extent(&self) -> Result<Option<(usize, usize)>> {
        let mut it = self.masks.iter();
        let Some(first) = it.next() else {
            return Ok(None);
        };
        let ext = (first.height(), first.width());
        if it.any(|m| (m.height(), m.width()) != ext) {
            return Err(Error::ShapeMismatch(
                "masks in a set have different extents".into(),
            ));
        }
        Ok(Some(ext))
    }
}

/// Dense embedding grid over an image.
///
/// Cell `(row, col)` covers image rows `floor(row*H/Hf)..floor((row+1)*H/Hf)`
/// and the analogous column range, so the stride is the rational `H/Hf`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    grid_height: usize,
    grid_width: usize,
    dim: usize,
    image_height: usize,
    image_width: usize,
    temporal: Temporal,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        grid_height: usize,
        grid_width: usize,
        dim: usize,
        image_height: usize,
        image_width: usize,
        temporal: Temporal,
        data: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || grid_height == 0 || grid_width == 0 {
            return Err(Error::InvalidValue(
                "feature map dimensions must be positive".into(),
            ));
        }
        if grid_height > image_height || grid_width > image_width {
            return Err(Error::InvalidValue(format!(
                "grid {grid_height}x{grid_width} is finer than image {image_height}x{image_width}"
            )));
        }
        if data.len() != grid_height * grid_width * dim {
            return Err(Error::ShapeMismatch(format!(
                "feature data has {} values, expected {}",
                data.len(),
                grid_height * grid_width * dim
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(
                "feature map contains non-finite values".into(),
            ));
        }
        Ok(Self {
            grid_height,
            grid_width,
            dim,
            image_height,
            image_width,
            temporal,
            data,
        })
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn temporal(&self) -> Temporal {
        self.temporal
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.grid_width + col) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// `(row_range, col_range)` of image pixels covered by a cell.
    pub fn cell_window(
        &self,
        row: usize,
        col: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (
            partition_range(row, self.grid_height, self.image_height),
            partition_range(col, self.grid_width, self.image_width),
        )
    }

    /// Cell whose window contains image pixel `(x, y)`.
    pub fn cell_of_pixel(&self, x: usize, y: usize) -> (usize, usize) {
        (
            partition_index(y, self.grid_height, self.image_height),
            partition_index(x, self.grid_width, self.image_width),
        )
    }

    /// Same layout, every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.grid_height,
            self.grid_width,
            self.dim,
            self.image_height,
            self.image_width,
            self.temporal,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn same_layout(&self, other: &FeatureMap) -> Result<()> {
        if self.grid_height != other.grid_height
            || self.grid_width != other.grid_width
            || self.dim != other.dim
            || self.image_height != other.image_height
            || self.image_width != other.image_width
        {
            return Err(Error::ShapeMismatch(format!(
                "feature maps {}x{}x{} over {}x{} vs {}x{}x{} over {}x{}",
                self.grid_height,
                self.grid_width,
                self.dim,
                self.image_height,
                self.image_width,
                other.grid_height,
                other.grid_width,
                other.dim,
                other.image_height,
                other.image_width
            )));
        }
        Ok(())
    }
}

/// Pixel range of part `i` when `extent` pixels are split into `parts` parts.
pub(crate) fn partition_range(i: usize, parts: usize, extent: usize) -> std::ops::Range<usize> {
    (i * extent / parts)..((i + 1) * extent / parts)
}

/// Inverse of [`partition_range`]: the part containing pixel `p`.
pub(crate) fn partition_index(p: usize, parts: usize, extent: usize) -> usize {
    ((p + 1) * parts - 1) / extent
}

/// Placeholder substituted by the class name in prompt templates.
pub const TEMPLATE_PLACEHOLDER: &str = "{}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl ClassEntry {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            synonyms: Vec::new(),
        }
    }

    /// The name followed by its synonyms, duplicates removed.
    pub fn texts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = vec![&self.name];
        for s in &self.synonyms {
            if !out.contains(&s.as_str()) {
                out.push(s);
            }
        }
        out
    }
}

/// Text side of the open-vocabulary query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vocabulary {
    pub foreground: Vec<ClassEntry>,
    #[serde(default)]
    pub background: Vec<String>,
    #[serde(default)]
    pub templates: Vec<String>,
}

impl Vocabulary {
    pub fn new(
        foreground: Vec<ClassEntry>,
        background: Vec<String>,
        templates: Vec<String>,
    ) -> Result<Self> {
        let v = Self {
            foreground,
            background,
            templates,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.foreground.is_empty() {
            return Err(Error::InvalidVocabulary("no foreground classes".into()));
        }
        for (i, c) in self.foreground.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::InvalidVocabulary("empty class name".into()));
            }
            if self.foreground[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidVocabulary(format!(
                    "duplicate class name `{}`",
                    c.name
                )));
            }
        }
        if self.foreground.len() > u8::MAX as usize {
            return Err(Error::InvalidVocabulary(
                "at most 255 foreground classes fit an 8-bit class map".into(),
            ));
        }
        for t in &self.templates {
            if t.matches(TEMPLATE_PLACEHOLDER).count() != 1 {
                return Err(Error::InvalidVocabulary(format!(
                    "template `{t}` must contain `{TEMPLATE_PLACEHOLDER}` exactly once"
                )));
            }
        }
        Ok(())
    }

    /// All prompts for `text`: one per template, or the bare text when no
    /// templates are configured.
    pub fn prompts(&self, text: &str) -> Vec<String> {
        if self.templates.is_empty() {
            vec![text.to_string()]
        } else {
            self.templates
                .iter()
                .map(|t| t.replacen(TEMPLATE_PLACEHOLDER, text, 1))
                .collect()
        }
    }

    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.foreground.iter().map(|c| c.name.as_str())
    }

    pub fn contains_class(&self, name: &str) -> bool {
        self.foreground.iter().any(|c| c.name == name)
    }

    /// Class name → class-map index, assigned 1.. in vocabulary order.
    pub fn class_index(&self) -> BTreeMap<String, u8> {
        self.foreground
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), (i + 1) as u8))
            .collect()
    }

    /// Vocabulary restricted to foreground class `idx`; the other foreground
    /// names join the background prompts.
    pub fn single_class(&self, idx: usize) -> Result<Self> {
        let fg = self
            .foreground
            .get(idx)
            .ok_or_else(|| Error::InvalidVocabulary(format!("no class at index {idx}")))?;
        let mut background = self.background.clone();
        for (i, other) in self.foreground.iter().enumerate() {
            if i != idx && !background.contains(&other.name) {
                background.push(other.name.clone());
            }
        }
        Self::new(vec![fg.clone()], background, self.templates.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Mci,
    Imc,
}

/// Which comparator decides whether a proposed region changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparatorKind {
    /// Negative cosine similarity of mask-pooled features.
    #[default]
    Latent,
    /// Mean per-pixel change-vector magnitude.
    Cva,
}

pub type Params = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendBinding {
    pub backend: String,
    #[serde(default)]
    pub params: Params,
}

impl BackendBinding {
    pub fn new(backend: impl Into<String>) -> Self {
        Self {
            backend: backend.into(),
            params: Params::new(),
        }
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        if let serde_json::Value::Object(map) = params {
            self.params = map;
        }
        self
    }
}

impl Default for BackendBinding {
    fn default() -> Self {
        Self::new("synthetic")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComponentBindings {
    pub proposer: BackendBinding,
    pub comparator_features: BackendBinding,
    pub identifier_features: BackendBinding,
    pub text_encoder: BackendBinding,
    pub identifier: BackendBinding,
    pub promoter: BackendBinding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub framework: Framework,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_half")]
    pub nms_iou: f64,
    #[serde(default = "default_half")]
    pub iou_sum_threshold: f64,
    #[serde(default)]
    pub tile_size: Option<usize>,
    #[serde(default)]
    pub comparator: ComparatorKind,
    #[serde(default = "default_cva_threshold")]
    pub cva_threshold: f64,
    #[serde(default)]
    pub components: ComponentBindings,
    #[serde(default)]
    pub seed: u64,
}

fn default_half() -> f64 {
    0.5
}

fn default_cva_threshold() -> f64 {
    0.25
}

impl PipelineConfig {
    pub fn new(framework: Framework) -> Self {
        Self {
            framework,
            beta: 0.0,
            nms_iou: 0.5,
            iou_sum_threshold: 0.5,
            tile_size: None,
            comparator: ComparatorKind::Latent,
            cva_threshold: default_cva_threshold(),
            components: ComponentBindings::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("beta", self.beta),
            ("nms_iou", self.nms_iou),
            ("iou_sum_threshold", self.iou_sum_threshold),
            ("cva_threshold", self.cva_threshold),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if !(-1.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "beta must lie in [-1, 1], got {}",
                self.beta
            )));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou <= 1.0) {
            return Err(Error::Config(format!(
                "nms_iou must lie in (0, 1], got {}",
                self.nms_iou
            )));
        }
        if self.iou_sum_threshold < 0.0 {
            return Err(Error::Config(
                "iou_sum_threshold must be non-negative".into(),
            ));
        }
        if self.tile_size == Some(0) {
            return Err(Error::Config("tile_size must be positive".into()));
        }
        Ok(())
    }
}

/// Single-channel class-index raster; 0 means no change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ClassMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} class indices for a {height}x{width} map",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// A `size`x`size` window at (`x0`, `y0`), zero outside the map.
    pub fn window(&self, x0: usize, y0: usize, size: usize) -> Self {
        let mut out = Self::zeros(size, size);
        for y in 0..size.min(self.height.saturating_sub(y0)) {
            for x in 0..size.min(self.width.saturating_sub(x0)) {
                out.set(x, y, self.get(x0 + x, y0 + y));
            }
        }
        out
    }

    /// Top-left `height`x`width` crop.
    pub fn cropped(&self, height: usize, width: usize) -> Self {
        let mut out = Self::zeros(height, width);
        for y in 0..height.min(self.height) {
            for x in 0..width.min(self.width) {
                out.set(x, y, self.get(x, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeResult {
    pub instances: MaskSet,
    pub class_map: ClassMap,
}

impl ChangeResult {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            instances: MaskSet::empty(MaskSource::Final),
            class_map: ClassMap::zeros(height, width),
        }
    }
}
