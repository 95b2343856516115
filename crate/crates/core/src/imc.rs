//! Identification → mask promotion → comparison.
//!
//! Targets found independently in each temporal are promoted to masks. An
//! instance counts as changed only when the geometric comparator (IoU sum
//! against same-class instances of the other temporal) and the latent
//! comparator both say so.

use crate::components::Components;
use crate::error::{Error, Result};
use crate::geometry::{mask_iou, rasterize};
use crate::mci::{change_score, join};
use crate::model::{
    validate_pair, BiTemporalPair, ChangeResult, FeatureMap, Framework, InstanceMask, MaskSet,
    MaskSource, PipelineConfig, Temporal, Vocabulary,
};

/// True when the summed IoU of `target` with same-class masks in `others`
/// exceeds `tau`.
pub fn iou_sum_unchanged(target: &InstanceMask, others: &MaskSet, tau: f64) -> Result<bool> {
    let label = target
        .class_label()
        .ok_or_else(|| Error::InvalidValue("geometric comparison needs a class label".into()))?;
    let mut sum = 0.0;
    for o in others.iter().filter(|o| o.class_label() == Some(label)) {
        sum += mask_iou(target, o)?;
    }
    Ok(sum > tau)
}

pub fn latent_confirm(
    f1: &FeatureMap,
    f2: &FeatureMap,
    mask: &InstanceMask,
    beta: f64,
) -> Result<bool> {
    Ok(change_score(f1, f2, mask.mask())? > beta)
}

pub fn dual_confirm(geometric_changed: bool, latent_changed: bool) -> bool {
    geometric_changed && latent_changed
}

/// Verdicts of both comparators for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImcDecision {
    /// The instance with its latent change score attached.
    pub instance: InstanceMask,
    pub geometric_changed: bool,
    pub latent_changed: bool,
}

impl ImcDecision {
    pub fn changed(&self) -> bool {
        dual_confirm(self.geometric_changed, self.latent_changed)
    }
}

/// Compares every instance of either temporal against the other temporal.
pub fn compare_instances(
    t1: &MaskSet,
    t2: &MaskSet,
    f1: &FeatureMap,
    f2: &FeatureMap,
    tau: f64,
    beta: f64,
) -> Result<Vec<ImcDecision>> {
    let mut out = Vec::with_capacity(t1.len() + t2.len());
    for (own, other) in [(t1, t2), (t2, t1)] {
        for inst in own.iter() {
            let score = change_score(f1, f2, inst.mask())?;
            out.push(ImcDecision {
                geometric_changed: !iou_sum_unchanged(inst, other, tau)?,
                latent_changed: score > beta,
                instance: inst.clone().with_change_score(score)?,
            });
        }
    }
    Ok(out)
}

pub fn run_imc(
    pair: &BiTemporalPair,
    vocabulary: &Vocabulary,
    cfg: &PipelineConfig,
    components: &Components,
) -> Result<ChangeResult> {
    if cfg.framework != Framework::Imc {
        return Err(Error::Config("run_imc needs framework = \"imc\"".into()));
    }
    cfg.validate()?;
    vocabulary.validate()?;
    let pair = validate_pair(pair.clone())?;
    let serial = components.requires_serial_access();
    let (h, w) = (pair.height(), pair.width());

    let identify_and_promote = |t: Temporal| -> Result<MaskSet> {
        let image = pair.image(t);
        let targets = components
            .identifier
            .identify_targets(image, vocabulary, t)?;
        if let Some(bad) = targets
            .iter()
            .find(|t| !vocabulary.contains_class(&t.class_label))
        {
            return Err(Error::UnknownClass(bad.class_label.clone()));
        }
        components.promoter.promote_to_masks(image, &targets)
    };
    let (m1, m2) = join(
        serial,
        || identify_and_promote(Temporal::T1),
        || identify_and_promote(Temporal::T2),
    );
    let (m1, m2) = (m1?, m2?);
    if m1.is_empty() && m2.is_empty() {
        return Ok(ChangeResult::empty(h, w));
    }

    let extractor = &components.comparator_features;
    let (f1, f2) = join(
        serial,
        || extractor.extract_features(&pair.image_t1, Temporal::T1),
        || extractor.extract_features(&pair.image_t2, Temporal::T2),
    );
    let decisions = compare_instances(&m1, &m2, &f1?, &f2?, cfg.iou_sum_threshold, cfg.beta)?;
    log::debug!(
        "{}: {} instances, {} geometric, {} latent, {} confirmed",
        pair.pair_id,
        decisions.len(),
        decisions.iter().filter(|d| d.geometric_changed).count(),
        decisions.iter().filter(|d| d.latent_changed).count(),
        decisions.iter().filter(|d| d.changed()).count()
    );

    let finals = decisions
        .into_iter()
        .filter(ImcDecision::changed)
        .map(|d| d.instance)
        .collect();
    let instances = MaskSet::new(finals, MaskSource::Final).sorted();
    let class_map = rasterize(&instances, &vocabulary.class_index(), h, w)?;
    Ok(ChangeResult {
        instances,
        class_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, BinaryMask};

    fn labeled(b: BBox, t: Temporal, label: &str) -> InstanceMask {
        InstanceMask::new(BinaryMask::from_rect(20, 20, b), 1.0, t)
            .unwrap()
            .with_class_label(label)
    }

    #[test]
    fn self_match_is_unchanged() {
        let a = labeled(BBox::new(2, 2, 8, 8), Temporal::T2, "building");
        let others = MaskSet::new(
            vec![labeled(BBox::new(2, 2, 8, 8), Temporal::T1, "building")],
            MaskSource::Identified,
        );
        assert!(iou_sum_unchanged(&a, &others, 0.5).unwrap());
    }

    #[test]
    fn no_same_class_partner_is_changed() {
        let a = labeled(BBox::new(2, 2, 8, 8), Temporal::T2, "building");
        let others = MaskSet::new(
            vec![labeled(BBox::new(2, 2, 8, 8), Temporal::T1, "water")],
            MaskSource::Identified,
        );
        assert!(!iou_sum_unchanged(&a, &others, 0.5).unwrap());
    }

    #[test]
    fn partial_overlaps_are_summed() {
        // 10x3 strip inside a 10x10 target: 0.3; 5x5 corner: 0.25
        let target = labeled(BBox::new(0, 0, 10, 10), Temporal::T1, "b");
        let o1 = labeled(BBox::new(0, 0, 10, 3), Temporal::T2, "b");
        let o3 = labeled(BBox::new(5, 5, 10, 10), Temporal::T2, "b");
        assert!((mask_iou(&target, &o1).unwrap() - 0.3).abs() < 1e-12);
        assert!((mask_iou(&target, &o3).unwrap() - 0.25).abs() < 1e-12);
        let others = MaskSet::new(vec![o1, o3], MaskSource::Identified);
        assert!(iou_sum_unchanged(&target, &others, 0.5).unwrap());
        assert!(!iou_sum_unchanged(&target, &others, 0.55).unwrap());
    }

    #[test]
    fn dual_confirm_is_conjunction() {
        assert!(dual_confirm(true, true));
        assert!(!dual_confirm(true, false));
        assert!(!dual_confirm(false, true));
        assert!(!dual_confirm(false, false));
    }

    #[test]
    fn latent_confirm_examples() {
        let f = FeatureMap::new(1, 1, 2, 20, 20, Temporal::T1, vec![1.0, 0.5]).unwrap();
        let g = FeatureMap::new(1, 1, 2, 20, 20, Temporal::T2, vec![-1.0, 0.2]).unwrap();
        let m = labeled(BBox::new(0, 0, 20, 20), Temporal::T1, "b");
        assert!(!latent_confirm(&f, &f, &m, -0.999).unwrap());
        assert!(latent_confirm(&f, &g, &m, 0.0).unwrap());
        assert!(!latent_confirm(&f, &g, &m, 1.0).unwrap());
    }
}
