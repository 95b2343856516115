//! Mask proposal → comparison → identification.
//!
//! Proposals from both temporals are merged with NMS, each surviving region
//! is scored by the negative cosine similarity of its mask-pooled features,
//! and regions above `beta` are labeled by text-embedding similarity.

use crate::components::{l2_norm, Components, TextEmbedding};
use crate::error::{Error, Result};
use crate::geometry::{merge_bitemporal, rasterize};
use crate::model::{
    validate_pair, BiTemporalPair, BinaryMask, ChangeResult, ComparatorKind, FeatureMap, Framework,
    InstanceMask, MaskSet, MaskSource, PipelineConfig, Temporal, Vocabulary,
};

/// A proposal together with its change score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMask {
    pub instance: InstanceMask,
    pub score: f64,
}

/// Mean of the feature cells selected by `mask`.
///
/// A cell is selected when at least half of its pixel window is masked. If
/// no cell qualifies, the cell containing the mask centroid is used.
pub fn masked_average_pool(features: &FeatureMap, mask: &BinaryMask) -> Result<Vec<f64>> {
    if mask.height() != features.image_height() || mask.width() != features.image_width() {
        return Err(Error::ShapeMismatch(format!(
            "mask is {}x{}, features cover {}x{}",
            mask.height(),
            mask.width(),
            features.image_height(),
            features.image_width()
        )));
    }
    let (gh, gw) = (features.grid_height(), features.grid_width());
    let mut counts = vec![0usize; gh * gw];
    let (mut sx, mut sy, mut n) = (0usize, 0usize, 0usize);
    for (x, y) in mask.foreground() {
        let (r, c) = features.cell_of_pixel(x, y);
        counts[r * gw + c] += 1;
        sx += x;
        sy += y;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySelection);
    }

    let mut selected = Vec::new();
    for r in 0..gh {
        for c in 0..gw {
            let count = counts[r * gw + c];
            if count == 0 {
                continue;
            }
            let (rows, cols) = features.cell_window(r, c);
            if 2 * count >= rows.len() * cols.len() {
                selected.push((r, c));
            }
        }
    }
    if selected.is_empty() {
        selected.push(features.cell_of_pixel(sx / n, sy / n));
    }

    let mut acc = vec![0.0; features.dim()];
    for &(r, c) in &selected {
        for (a, v) in acc.iter_mut().zip(features.cell(r, c)) {
            *a += v;
        }
    }
    let k = selected.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative cosine similarity of the mask-pooled features of both temporals,
/// in [-1, 1]; higher means more change.
pub fn change_score(f1: &FeatureMap, f2: &FeatureMap, mask: &BinaryMask) -> Result<f64> {
    f1.same_layout(f2)?;
    let z1 = masked_average_pool(f1, mask)?;
    let z2 = masked_average_pool(f2, mask)?;
    let (n1, n2) = (l2_norm(&z1), l2_norm(&z2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((-dot(&z1, &z2) / (n1 * n2)).clamp(-1.0, 1.0))
}

/// Masks whose change score exceeds `beta`, with scores attached.
pub fn filter_changes(
    masks: &MaskSet,
    f1: &FeatureMap,
    f2: &FeatureMap,
    beta: f64,
) -> Result<Vec<ScoredMask>> {
    let mut out = Vec::new();
    for m in masks.iter() {
        let score = change_score(f1, f2, m.mask())?;
        if score > beta {
            out.push(ScoredMask {
                instance: m.clone(),
                score,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Foreground { class_name: String, similarity: f64 },
    Background,
}

/// Labels a change region from its pooled identifier features.
///
/// Each temporal votes with its highest-similarity embedding. If either vote
/// is a foreground class, the foreground vote with the higher similarity wins
/// (t1 on ties); otherwise the region is background.
pub fn classify_change(
    f1: &FeatureMap,
    f2: &FeatureMap,
    mask: &BinaryMask,
    embeddings: &[TextEmbedding],
) -> Result<Classification> {
    if !embeddings.iter().any(|e| !e.is_background())
        || !embeddings.iter().any(|e| e.is_background())
    {
        return Err(Error::InvalidVocabulary(
            "classification needs at least one foreground and one background embedding".into(),
        ));
    }
    f1.same_layout(f2)?;
    if embeddings.iter().any(|e| e.vector().len() != f1.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "text embeddings do not match feature width {}",
            f1.dim()
        )));
    }

    let mut best: Option<(&TextEmbedding, f64)> = None;
    for f in [f1, f2] {
        let z = masked_average_pool(f, mask)?;
        let n = l2_norm(&z);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let (top, sim) = embeddings
            .iter()
            .map(|e| (e, dot(&z, e.vector()) / n))
            .fold(
                None,
                |acc: Option<(&TextEmbedding, f64)>, (e, s)| match acc {
                    Some((_, bs)) if bs >= s => acc,
                    _ => Some((e, s)),
                },
            )
            .expect("embeddings are non-empty");
        if !top.is_background() && best.is_none_or(|(_, bs)| sim > bs) {
            best = Some((top, sim));
        }
    }
    Ok(match best {
        Some((e, similarity)) => Classification::Foreground {
            class_name: e.class_name().to_string(),
            similarity,
        },
        None => Classification::Background,
    })
}

/// Mean over masked pixels of the per-pixel change-vector magnitude, with
/// channels scaled to [0, 1].
pub fn pixel_cva_score(pair: &BiTemporalPair, mask: &BinaryMask) -> Result<f64> {
    if mask.height() != pair.height() || mask.width() != pair.width() {
        return Err(Error::ShapeMismatch(
            "mask does not match the pair extent".into(),
        ));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for (x, y) in mask.foreground() {
        let d2: f64 = pair
            .image_t1
            .pixel(x, y)
            .iter()
            .zip(pair.image_t2.pixel(x, y))
            .map(|(&a, &b)| {
                let d = (a as f64 - b as f64) / 255.0;
                d * d
            })
            .sum();
        sum += d2.sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(sum / n as f64)
}

/// Runs `a` and `b` in parallel unless `serial` is set.
pub(crate) fn join<A, B, RA, RB>(serial: bool, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    if serial {
        (a(), b())
    } else {
        rayon::join(a, b)
    }
}

pub fn run_mci(
    pair: &BiTemporalPair,
    vocabulary: &Vocabulary,
    cfg: &PipelineConfig,
    components: &Components,
) -> Result<ChangeResult> {
    if cfg.framework != Framework::Mci {
        return Err(Error::Config("run_mci needs framework = \"mci\"".into()));
    }
    cfg.validate()?;
    vocabulary.validate()?;
    let pair = validate_pair(pair.clone())?;
    let serial = components.requires_serial_access();
    let (h, w) = (pair.height(), pair.width());

    let (m1, m2) = join(
        serial,
        || {
            components
                .proposer
                .propose_masks(&pair.image_t1, Temporal::T1)
        },
        || {
            components
                .proposer
                .propose_masks(&pair.image_t2, Temporal::T2)
        },
    );
    let proposals = merge_bitemporal(&m1?, &m2?, cfg.nms_iou)?;

    let changed = match cfg.comparator {
        ComparatorKind::Latent => {
            let extractor = &components.comparator_features;
            let (f1, f2) = join(
                serial,
                || extractor.extract_features(&pair.image_t1, Temporal::T1),
                || extractor.extract_features(&pair.image_t2, Temporal::T2),
            );
            filter_changes(&proposals, &f1?, &f2?, cfg.beta)?
        }
        ComparatorKind::Cva => {
            let mut out = Vec::new();
            for m in proposals.iter() {
                let score = pixel_cva_score(&pair, m.mask())?;
                if score > cfg.cva_threshold {
                    out.push(ScoredMask {
                        instance: m.clone(),
                        score,
                    });
                }
            }
            out
        }
    };
    log::debug!(
        "{}: {} proposals, {} changed",
        pair.pair_id,
        proposals.len(),
        changed.len()
    );
    if changed.is_empty() {
        return Ok(ChangeResult::empty(h, w));
    }

    let extractor = &components.identifier_features;
    let (g1, g2) = join(
        serial,
        || extractor.extract_features(&pair.image_t1, Temporal::T1),
        || extractor.extract_features(&pair.image_t2, Temporal::T2),
    );
    let (g1, g2) = (g1?, g2?);
    let embeddings = components.text_encoder.embed_vocabulary(vocabulary)?;

    let mut finals = Vec::new();
    for sm in changed {
        if let Classification::Foreground { class_name, .. } =
            classify_change(&g1, &g2, sm.instance.mask(), &embeddings)?
        {
            finals.push(
                sm.instance
                    .with_class_label(class_name)
                    .with_change_score(sm.score)?,
            );
        }
    }
    let instances = MaskSet::new(finals, MaskSource::Final).sorted();
    let class_map = rasterize(&instances, &vocabulary.class_index(), h, w)?;
    Ok(ChangeResult {
        instances,
        class_map,
    })
}
