//! Per-class pixel IoU and F1.

use std::ops::{Add, AddAssign};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ClassMap;

/// Pixel confusion counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    /// `tp / (tp + fp + fn)`, 0 when nothing was predicted or labeled.
    pub fn iou(&self) -> f64 {
        let d = self.tp + self.fp + self.fn_;
        if d == 0 {
            0.0
        } else {
            self.tp as f64 / d as f64
        }
    }

    /// `2tp / (2tp + fp + fn)`, 0 when nothing was predicted or labeled.
    pub fn f1(&self) -> f64 {
        let d = 2 * self.tp + self.fp + self.fn_;
        if d == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / d as f64
        }
    }

    /// Class neither predicted nor present in the reference.
    pub fn is_absent(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores {
    pub class_name: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub iou: f64,
    pub f1: f64,
    /// Set when the class occurs in neither prediction nor reference; both
    /// scores are then 0.
    pub absent: bool,
}

impl ClassScores {
    pub fn from_counts(class_name: impl Into<String>, c: ConfusionCounts) -> Self {
        Self {
            class_name: class_name.into(),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            iou: c.iou(),
            f1: c.f1(),
            absent: c.is_absent(),
        }
    }

    pub fn counts(&self) -> ConfusionCounts {
        ConfusionCounts::new(self.tp, self.fp, self.fn_)
    }
}

/// Confusion counts for class indices `1..=n_classes`.
pub fn confusion(pred: &ClassMap, gt: &ClassMap, n_classes: usize) -> Result<Vec<ConfusionCounts>> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::ShapeMismatch(format!(
            "prediction is {}x{}, reference is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    if n_classes > u8::MAX as usize {
        return Err(Error::InvalidValue("at most 255 classes".into()));
    }
    let (mut hits, mut predicted, mut labeled) = ([0u64; 256], [0u64; 256], [0u64; 256]);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        predicted[p as usize] += 1;
        labeled[g as usize] += 1;
        if p == g {
            hits[p as usize] += 1;
        }
    }
    Ok((1..=n_classes)
        .map(|c| ConfusionCounts::new(hits[c], predicted[c] - hits[c], labeled[c] - hits[c]))
        .collect())
}

pub fn evaluate(pred: &ClassMap, gt: &ClassMap, classes: &[String]) -> Result<Vec<ClassScores>> {
    Ok(confusion(pred, gt, classes.len())?
        .into_iter()
        .zip(classes)
        .map(|(c, name)| ClassScores::from_counts(name, c))
        .collect())
}

/// Dataset-level evaluation: counts are summed over images before any ratio
/// is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalAccumulator {
    classes: Vec<String>,
    counts: Vec<ConfusionCounts>,
    images: usize,
}

impl EvalAccumulator {
    pub fn new(classes: Vec<String>) -> Self {
        let counts = vec![ConfusionCounts::default(); classes.len()];
        Self {
            classes,
            counts,
            images: 0,
        }
    }

    pub fn add(&mut self, pred: &ClassMap, gt: &ClassMap) -> Result<()> {
        let c = confusion(pred, gt, self.classes.len())?;
        self.counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        self.images += 1;
        Ok(())
    }

    /// Combines two accumulators over the same classes.
    pub fn merge(mut self, other: Self) -> Result<Self> {
        if self.classes != other.classes {
            return Err(Error::InvalidValue(
                "merging evaluations over different classes".into(),
            ));
        }
        self.counts
            .iter_mut()
            .zip(other.counts)
            .for_each(|(a, b)| *a += b);
        self.images += other.images;
        Ok(self)
    }

    pub fn images(&self) -> usize {
        self.images
    }

    pub fn counts(&self) -> &[ConfusionCounts] {
        &self.counts
    }

    pub fn scores(&self) -> Vec<ClassScores> {
        self.classes
            .iter()
            .zip(&self.counts)
            .map(|(n, &c)| ClassScores::from_counts(n, c))
            .collect()
    }
}
