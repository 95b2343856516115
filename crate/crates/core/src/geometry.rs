//! Mask and box geometry: IoU, greedy NMS, RLE codec and class-map rasterization.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, BinaryMask, ClassMap, InstanceMask, MaskSet};

/// `|a ∩ b| / |a ∪ b|` over the pixel masks.
pub fn mask_iou(a: &InstanceMask, b: &InstanceMask) -> Result<f64> {
    binary_iou(a.mask(), b.mask())
}

pub fn binary_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, union) = a.overlap_counts(b)?;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Area IoU of two boxes with exclusive maxima.
pub fn box_iou(a: BBox, b: BBox) -> f64 {
    let iw = a.x_max.min(b.x_max).saturating_sub(a.x_min.max(b.x_min));
    let ih = a.y_max.min(b.y_max).saturating_sub(a.y_min.max(b.y_min));
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// Ranking used by NMS: higher quality first, then the deterministic ordering.
fn quality_rank(a: &InstanceMask, b: &InstanceMask) -> Ordering {
    b.quality()
        .total_cmp(&a.quality())
        .then_with(|| a.deterministic_cmp(b))
}

/// Greedy non-maximum suppression on outer bounding boxes.
///
/// A mask is kept iff its box IoU with every already kept mask is below
/// `iou_threshold`. The output is in ranking order.
pub fn nms(masks: &MaskSet, iou_threshold: f64) -> MaskSet {
    let mut order: Vec<&InstanceMask> = masks.iter().collect();
    order.sort_by(|a, b| quality_rank(a, b));

    let mut kept: Vec<&InstanceMask> = Vec::new();
    for cand in order {
        if kept
            .iter()
            .all(|k| box_iou(k.bbox(), cand.bbox()) < iou_threshold)
        {
            kept.push(cand);
        }
    }
    MaskSet::new(kept.into_iter().cloned().collect(), masks.source)
}

/// `NMS(m1 ∪ m2)`; survivors keep their own temporal tag.
pub fn merge_bitemporal(m1: &MaskSet, m2: &MaskSet, iou_threshold: f64) -> Result<MaskSet> {
    if let (Some(a), Some(b)) = (m1.extent()?, m2.extent()?) {
        if a != b {
            return Err(Error::ShapeMismatch(format!(
                "t1 masks are {}x{}, t2 masks are {}x{}",
                a.0, a.1, b.0, b.1
            )));
        }
    }
    let union = MaskSet::new(m1.iter().chain(m2.iter()).cloned().collect(), m1.source);
    Ok(nms(&union, iou_threshold))
}

/// Row-major run-length encoding; the first run counts background pixels
/// (and is 0 when the mask starts with foreground).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub height: usize,
    pub width: usize,
    pub runs: Vec<u64>,
}

impl RleMask {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::MalformedRle("extent must be positive".into()));
        }
        let total: u64 = self.runs.iter().sum();
        if total != (self.height * self.width) as u64 {
            return Err(Error::MalformedRle(format!(
                "runs sum to {total}, expected {}",
                self.height * self.width
            )));
        }
        if let Some(i) = self.runs.iter().skip(1).position(|&r| r == 0) {
            return Err(Error::MalformedRle(format!(
                "zero-length run at index {}",
                i + 1
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).sum()
    }
}

pub fn encode_rle(mask: &BinaryMask) -> RleMask {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u64;
    for &b in mask.bits() {
        if b != current {
            runs.push(count);
            count = 0;
            current = b;
        }
        count += 1;
    }
    runs.push(count);
    RleMask {
        height: mask.height(),
        width: mask.width(),
        runs,
    }
}

pub fn decode_rle(rle: &RleMask) -> Result<BinaryMask> {
    rle.validate()?;
    let mut bits = Vec::with_capacity(rle.height * rle.width);
    let mut value = false;
    for &run in &rle.runs {
        bits.extend(std::iter::repeat_n(value, run as usize));
        value = !value;
    }
    BinaryMask::from_bits(rle.height, rle.width, bits)
}

/// Paint a class map: each pixel takes the class of the covering instance with
/// the highest change score, ties resolved by the deterministic ordering.
pub fn rasterize(
    instances: &MaskSet,
    class_index: &BTreeMap<String, u8>,
    height: usize,
    width: usize,
) -> Result<ClassMap> {
    let mut ranked: Vec<(usize, &InstanceMask, f64, u8)> = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        if inst.height() != height || inst.width() != width {
            return Err(Error::ShapeMismatch(format!(
                "instance is {}x{}, class map is {height}x{width}",
                inst.height(),
                inst.width()
            )));
        }
        let label = inst
            .class_label()
            .ok_or_else(|| Error::InvalidValue("instance without class label".into()))?;
        let idx = *class_index
            .get(label)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))?;
        let score = inst
            .change_score()
            .ok_or_else(|| Error::InvalidValue("instance without change score".into()))?;
        ranked.push((i, inst, score, idx));
    }
    ranked.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| a.1.deterministic_cmp(b.1))
            .then_with(|| a.0.cmp(&b.0))
    });

    let mut map = ClassMap::zeros(height, width);
    let mut painted = vec![false; height * width];
    for (_, inst, _, idx) in ranked {
        let b = inst.bbox();
        for y in b.y_min..b.y_max {
            for x in b.x_min..b.x_max {
                let p = y * width + x;
                if !painted[p] && inst.mask().get(x, y) {
                    painted[p] = true;
                    map.set(x, y, idx);
                }
            }
        }
    }
    Ok(map)
}
