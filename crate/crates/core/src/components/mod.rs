//! Component interfaces for mask proposal, feature extraction, text encoding,
//! identification and mask promotion.
//!
//! Every backend is built once from a [`BackendBinding`] and then used
//! read-only; implementations must be deterministic for identical input,
//! parameters and seed.

mod registry;
mod segment;
pub mod synthetic;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    BBox, BinaryMask, FeatureMap, MaskSet, PipelineConfig, Raster, Temporal, Vocabulary,
};

pub use registry::{BackendContext, Registry, WEIGHTS_DIR_ENV};
pub use segment::{connected_components, flood_fill, quantize};

/// Class-agnostic region proposals for one image.
pub trait MaskProposer: Send + Sync {
    fn propose_masks(&self, image: &Raster, temporal: Temporal) -> Result<MaskSet>;

    /// Backends that cannot be called concurrently return `true`; callers
    /// then serialize access.
    fn requires_serial_access(&self) -> bool {
        false
    }
}

/// Dense per-cell embeddings of an image.
pub trait FeatureExtractor: Send + Sync {
    fn extract_features(&self, image: &Raster, temporal: Temporal) -> Result<FeatureMap>;

    /// Embedding width `D`.
    fn dim(&self) -> usize;

    fn requires_serial_access(&self) -> bool {
        false
    }
}

/// Text side of an image-text embedding space.
pub trait TextEncoder: Send + Sync {
    /// One embedding per foreground class (synonyms averaged, then
    /// renormalized) followed by one per background prompt.
    fn embed_vocabulary(&self, vocabulary: &Vocabulary) -> Result<Vec<TextEmbedding>>;

    fn requires_serial_access(&self) -> bool {
        false
    }
}

/// Vocabulary-guided detector emitting boxes, points or coarse masks.
pub trait Identifier: Send + Sync {
    fn identify_targets(
        &self,
        image: &Raster,
        vocabulary: &Vocabulary,
        temporal: Temporal,
    ) -> Result<Vec<IdentifiedTarget>>;

    fn requires_serial_access(&self) -> bool {
        false
    }
}

/// Turns identified targets into fine instance masks.
pub trait MaskPromoter: Send + Sync {
    fn promote_to_masks(&self, image: &Raster, targets: &[IdentifiedTarget]) -> Result<MaskSet>;

    fn requires_serial_access(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Box,
    Point,
    Mask,
}

/// Location of an identified target; exactly one representation per target.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetGeometry {
    Box(BBox),
    Point { x: usize, y: usize },
    Mask(BinaryMask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedTarget {
    pub geometry: TargetGeometry,
    pub class_label: String,
    pub confidence: f64,
    pub temporal: Temporal,
}

impl IdentifiedTarget {
    pub fn kind(&self) -> TargetKind {
        match self.geometry {
            TargetGeometry::Box(_) => TargetKind::Box,
            TargetGeometry::Point { .. } => TargetKind::Point,
            TargetGeometry::Mask(_) => TargetKind::Mask,
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        match &self.geometry {
            TargetGeometry::Box(b) => Some(*b),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<(usize, usize)> {
        match self.geometry {
            TargetGeometry::Point { x, y } => Some((x, y)),
            _ => None,
        }
    }

    pub fn coarse_mask(&self) -> Option<&BinaryMask> {
        match &self.geometry {
            TargetGeometry::Mask(m) => Some(m),
            _ => None,
        }
    }
}

/// Unit-norm text embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    class_name: String,
    vector: Vec<f64>,
    is_background: bool,
}

impl TextEmbedding {
    /// Normalizes `vector` to unit L2 norm.
    pub fn new(
        class_name: impl Into<String>,
        vector: Vec<f64>,
        is_background: bool,
    ) -> Result<Self> {
        let norm = l2_norm(&vector);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            class_name: class_name.into(),
            vector: vector.into_iter().map(|v| v / norm).collect(),
            is_background,
        })
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn is_background(&self) -> bool {
        self.is_background
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The full set of backends a pipeline run needs.
#[derive(Clone)]
pub struct Components {
    pub proposer: Arc<dyn MaskProposer>,
    pub comparator_features: Arc<dyn FeatureExtractor>,
    pub identifier_features: Arc<dyn FeatureExtractor>,
    pub text_encoder: Arc<dyn TextEncoder>,
    pub identifier: Arc<dyn Identifier>,
    pub promoter: Arc<dyn MaskPromoter>,
}

impl Components {
    pub fn from_config(
        cfg: &PipelineConfig,
        registry: &Registry,
        ctx: &BackendContext,
    ) -> Result<Self> {
        let b = &cfg.components;
        Ok(Self {
            proposer: registry.build_proposer(&b.proposer, ctx)?,
            comparator_features: registry.build_feature_extractor(&b.comparator_features, ctx)?,
            identifier_features: registry.build_feature_extractor(&b.identifier_features, ctx)?,
            text_encoder: registry.build_text_encoder(&b.text_encoder, ctx)?,
            identifier: registry.build_identifier(&b.identifier, ctx)?,
            promoter: registry.build_promoter(&b.promoter, ctx)?,
        })
    }

    pub fn requires_serial_access(&self) -> bool {
        self.proposer.requires_serial_access()
            || self.comparator_features.requires_serial_access()
            || self.identifier_features.requires_serial_access()
            || self.text_encoder.requires_serial_access()
            || self.identifier.requires_serial_access()
            || self.promoter.requires_serial_access()
    }
}

impl std::fmt::Debug for Components {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Components").finish_non_exhaustive()
    }
}
