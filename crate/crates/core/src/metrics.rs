//! Instance-level scores: matched IoU, Dice, and panoptic quality.
//!
//! A ground-truth and a predicted instance match when their pixel IoU
//! exceeds 0.5; at that threshold each instance can match at most one
//! partner, so no assignment search is needed. Background (id 0) never
//! takes part in matching.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::grid::{LabelImage, Segmentation};
use crate::Result;

pub const MATCH_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub gt_id: u32,
    pub pred_id: u32,
    pub iou: f64,
    pub intersection: usize,
    pub gt_area: usize,
    pub pred_area: usize,
}

impl MatchedPair {
    pub fn dice(&self) -> f64 {
        dice_from_iou(self.iou)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchTable {
    /// True positives, ordered by ground-truth id.
    pub matched: Vec<MatchedPair>,
    /// Unmatched ground-truth ids (false negatives), ascending.
    pub unmatched_gt: Vec<u32>,
    /// Unmatched predicted ids (false positives), ascending.
    pub unmatched_pred: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PanopticQuality {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub n_gt: usize,
    pub n_pred: usize,
    pub mean_iou: f64,
    pub dice: f64,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    /// Dice of the union foreground masks, ignoring instance identity.
    pub foreground_dice: f64,
    pub pairs: Vec<MatchedPair>,
}

/// `2·IoU / (1 + IoU)`, the Dice coefficient of a pair with that IoU.
pub fn dice_from_iou(iou: f64) -> f64 {
    2.0 * iou / (1.0 + iou)
}

pub fn match_instances(gt: &LabelImage, pred: &Segmentation) -> Result<MatchTable> {
    gt.raster().ensure_same_dims(pred.instance_map())?;
    let mut gt_area: BTreeMap<u32, usize> = BTreeMap::new();
    let mut pred_area: BTreeMap<u32, usize> = BTreeMap::new();
    let mut overlap: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&g, &p) in gt.labels().iter().zip(pred.instance_map().data()) {
        if g != 0 {
            *gt_area.entry(g).or_default() += 1;
        }
        if p != 0 {
            *pred_area.entry(p).or_default() += 1;
        }
        if g != 0 && p != 0 {
            *overlap.entry((g, p)).or_default() += 1;
        }
    }
    let mut matched = Vec::new();
    for (&(g, p), &inter) in &overlap {
        let (ga, pa) = (gt_area[&g], pred_area[&p]);
        let iou = inter as f64 / (ga + pa - inter) as f64;
        if iou > MATCH_IOU_THRESHOLD {
            matched.push(MatchedPair {
                gt_id: g,
                pred_id: p,
                iou,
                intersection: inter,
                gt_area: ga,
                pred_area: pa,
            });
        }
    }
    let unmatched_gt = gt_area
        .keys()
        .copied()
        .filter(|g| !matched.iter().any(|m| m.gt_id == *g))
        .collect();
    let unmatched_pred = pred_area
        .keys()
        .copied()
        .filter(|p| !matched.iter().any(|m| m.pred_id == *p))
        .collect();
    Ok(MatchTable {
        matched,
        unmatched_gt,
        unmatched_pred,
    })
}

/// `SQ` is the mean matched IoU, `RQ = TP / (TP + FP/2 + FN/2)`, and
/// `PQ = SQ · RQ`. Empty means and zero denominators give 0.
pub fn panoptic_quality(table: &MatchTable) -> PanopticQuality {
    let tp = table.matched.len() as f64;
    let sq = mean(table.matched.iter().map(|m| m.iou));
    let denom =
        tp + 0.5 * table.unmatched_pred.len() as f64 + 0.5 * table.unmatched_gt.len() as f64;
    let rq = if denom > 0.0 { tp / denom } else { 0.0 };
    PanopticQuality {
        pq: sq * rq,
        sq,
        rq,
    }
}

/// Mean IoU and mean Dice over matched pairs; `(0, 0)` without matches.
pub fn overlap_scores(gt: &LabelImage, pred: &Segmentation) -> Result<(f64, f64)> {
    let table = match_instances(gt, pred)?;
    Ok(pair_means(&table))
}

fn pair_means(table: &MatchTable) -> (f64, f64) {
    (
        mean(table.matched.iter().map(|m| m.iou)),
        mean(table.matched.iter().map(|m| m.dice())),
    )
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn foreground_dice(gt: &LabelImage, pred: &Segmentation) -> Result<f64> {
    gt.raster().ensure_same_dims(pred.instance_map())?;
    let (mut a, mut b, mut both) = (0usize, 0usize, 0usize);
    for (&g, &p) in gt.labels().iter().zip(pred.instance_map().data()) {
        a += (g != 0) as usize;
        b += (p != 0) as usize;
        both += (g != 0 && p != 0) as usize;
    }
    Ok(if a + b == 0 {
        0.0
    } else {
        2.0 * both as f64 / (a + b) as f64
    })
}

/// All scores for one image.
pub fn evaluate(gt: &LabelImage, pred: &Segmentation) -> Result<MetricsReport> {
    let table = match_instances(gt, pred)?;
    let (mean_iou, dice) = pair_means(&table);
    let PanopticQuality { pq, sq, rq } = panoptic_quality(&table);
    let n_gt = table.matched.len() + table.unmatched_gt.len();
    let n_pred = table.matched.len() + table.unmatched_pred.len();
    Ok(MetricsReport {
        n_gt,
        n_pred,
        mean_iou,
        dice,
        pq,
        sq,
        rq,
        foreground_dice: foreground_dice(gt, pred)?,
        pairs: table.matched,
    })
}

/// Unweighted mean of per-image scores, in slice order. Instance counts are
/// averaged too; `pairs` is left empty.
pub fn aggregate(reports: &[MetricsReport]) -> MetricsReport {
    let m = |f: fn(&MetricsReport) -> f64| mean(reports.iter().map(f));
    let n = reports.len().max(1);
    MetricsReport {
        n_gt: reports.iter().map(|r| r.n_gt).sum::<usize>() / n,
        n_pred: reports.iter().map(|r| r.n_pred).sum::<usize>() / n,
        mean_iou: m(|r| r.mean_iou),
        dice: m(|r| r.dice),
        pq: m(|r| r.pq),
        sq: m(|r| r.sq),
        rq: m(|r| r.rq),
        foreground_dice: m(|r| r.foreground_dice),
        pairs: Vec::new(),
    }
}
