//! Pixel-level segmentation scores and cut-position matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BinaryImage;
use crate::profileseg::PageSegmentation;
use crate::synthgen::{placement_gaps, Placement};

/// Confusion counts and the ratios derived from them.
///
/// Empty denominators follow fixed conventions so that every input scores:
/// precision and recall are 1 when both prediction and truth are empty and 0
/// when only their own denominator is empty; f1 is 0 when `P + R = 0`; IoU is
/// 1 when the union is empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub iou: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl SegScores {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let both_empty = tp + fp == 0 && tp + fn_ == 0;
        let ratio = |den: u64| {
            if den == 0 {
                if both_empty {
                    1.0
                } else {
                    0.0
                }
            } else {
                tp as f64 / den as f64
            }
        };
        let precision = ratio(tp + fp);
        let recall = ratio(tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let union = tp + fp + fn_;
        let iou = if union == 0 {
            1.0
        } else {
            tp as f64 / union as f64
        };
        Self {
            iou,
            f1,
            precision,
            recall,
            tp,
            fp,
            fn_,
            tn,
        }
    }
}

pub fn seg_scores(pred: &BinaryImage, truth: &BinaryImage) -> Result<SegScores> {
    if pred.height() != truth.height() || pred.width() != truth.width() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.height(),
            pred.width(),
            truth.height(),
            truth.width()
        )));
    }
    let mut counts = [0u64; 4];
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        // index: 0 = tn, 1 = fn, 2 = fp, 3 = tp
        counts[((p != 0) as usize) << 1 | (t != 0) as usize] += 1;
    }
    Ok(SegScores::from_counts(
        counts[3], counts[2], counts[1], counts[0],
    ))
}

/// Ratios averaged over pages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub iou: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    /// Scores of the pooled confusion counts.
    pub micro: SegScores,
    /// Per-page scores averaged.
    #[serde(rename = "macro")]
    pub macro_: MeanScores,
}

pub fn aggregate(pages: &[SegScores]) -> AggregateScores {
    let sum = |f: fn(&SegScores) -> u64| pages.iter().map(f).sum::<u64>();
    let micro = SegScores::from_counts(sum(|s| s.tp), sum(|s| s.fp), sum(|s| s.fn_), sum(|s| s.tn));
    let n = pages.len().max(1) as f64;
    let mean = |f: fn(&SegScores) -> f64| pages.iter().map(f).sum::<f64>() / n;
    let macro_ = if pages.is_empty() {
        MeanScores {
            iou: micro.iou,
            f1: micro.f1,
            precision: micro.precision,
            recall: micro.recall,
        }
    } else {
        MeanScores {
            iou: mean(|s| s.iou),
            f1: mean(|s| s.f1),
            precision: mean(|s| s.precision),
            recall: mean(|s| s.recall),
        }
    };
    AggregateScores { micro, macro_ }
}

/// Mask with each region's box set.
pub fn regions_to_mask(seg: &PageSegmentation, height: usize, width: usize) -> Result<BinaryImage> {
    let mut mask = BinaryImage::zeros(height, width)?;
    for r in &seg.regions {
        if r.row_start >= r.row_end
            || r.col_start >= r.col_end
            || r.row_end > height
            || r.col_end > width
        {
            return Err(Error::RegionOutOfBounds(format!(
                "region {} rows [{},{}) cols [{},{}) on a {height}x{width} page",
                r.order_index, r.row_start, r.row_end, r.col_start, r.col_end
            )));
        }
        mask.fill_box(r.row_start, r.row_end, r.col_start, r.col_end);
    }
    Ok(mask)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CutMatchReport {
    pub true_gaps: usize,
    pub matched: usize,
    /// Predicted cuts not assigned to any gap.
    pub spurious: usize,
    pub predicted: usize,
    pub tolerance: f64,
}

impl CutMatchReport {
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            true_gaps: self.true_gaps + other.true_gaps,
            matched: self.matched + other.matched,
            spurious: self.spurious + other.spurious,
            predicted: self.predicted + other.predicted,
            tolerance: self.tolerance.max(other.tolerance),
        }
    }
}

/// Centre row of the blank rows `[end, start)` between two placements.
pub fn gap_center(gap: (usize, usize)) -> f64 {
    (gap.0 + gap.1) as f64 / 2.0 - 0.5
}

/// Greedy nearest-first matching of predicted cuts to true gap centres.
///
/// A gap is matched by a cut within `tolerance` rows of its centre; each cut
/// and each gap is used at most once, closest pairs first.
pub fn match_cuts(pred_cuts: &[usize], truth: &[Placement], tolerance: f64) -> CutMatchReport {
    let centers: Vec<f64> = placement_gaps(truth).into_iter().map(gap_center).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (g, &c) in centers.iter().enumerate() {
        for (k, &cut) in pred_cuts.iter().enumerate() {
            let d = (cut as f64 - c).abs();
            if d <= tolerance {
                pairs.push((d, g, k));
            }
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mut gap_used = vec![false; centers.len()];
    let mut cut_used = vec![false; pred_cuts.len()];
    let mut matched = 0;
    for (_, g, k) in pairs {
        if !gap_used[g] && !cut_used[k] {
            gap_used[g] = true;
            cut_used[k] = true;
            matched += 1;
        }
    }
    CutMatchReport {
        true_gaps: centers.len(),
        matched,
        spurious: pred_cuts.len() - matched,
        predicted: pred_cuts.len(),
        tolerance,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageReport {
    pub page_id: String,
    pub scores: SegScores,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cuts: Option<CutMatchReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pages: Vec<PageReport>,
    pub aggregate: AggregateScores,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cuts: Option<CutMatchReport>,
}

impl EvalReport {
    pub fn from_pages(pages: Vec<PageReport>) -> Self {
        let scores: Vec<SegScores> = pages.iter().map(|p| p.scores).collect();
        let cuts = pages
            .iter()
            .filter_map(|p| p.cuts)
            .reduce(|a, b| a.merge(&b));
        Self {
            aggregate: aggregate(&scores),
            pages,
            cuts,
        }
    }
}
