//! Column-wise trimming and removal of word boxes against the opaque
//! occlusion mask.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::WordAnnotation;
use crate::degrade::DegradationClass;
use crate::geometry::{aabb_to_quad, Aabb};
use crate::raster::BinaryMask;

#[derive(Debug, Error, PartialEq)]
pub enum RefineError {
    #[error("box has zero height inside the mask")]
    ZeroHeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    pub tau_col: f64,
    pub tau_dense: f64,
    pub tau_global: f64,
    pub w_min: u32,
    pub h_min: u32,
    pub a_min: u32,
    /// Boxes with less than this occluded fraction are kept untouched.
    pub skip_ratio: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            tau_col: 0.30,
            tau_dense: 0.90,
            tau_global: 0.50,
            w_min: 10,
            h_min: 10,
            a_min: 150,
            skip_ratio: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    NoValidExtent,
    LeadingDenseWall,
    GlobalRatio,
    MinDims,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum RefinementOutcome {
    KeptUnchanged,
    Trimmed { new_box: Aabb },
    Removed { reason: RemovalReason },
}

/// Integer pixel region `[x1, x2) x [y1, y2)` of a box, rounded to the pixel
/// grid and clamped to the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRegion {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl PixelRegion {
    pub fn of(b: &Aabb, mask: &BinaryMask) -> Self {
        let clamp = |v: f64, hi: u32| v.round().clamp(0.0, hi as f64) as u32;
        let x1 = clamp(b.x1, mask.width());
        let y1 = clamp(b.y1, mask.height());
        Self {
            x1,
            y1,
            x2: clamp(b.x2, mask.width()).max(x1),
            y2: clamp(b.y2, mask.height()).max(y1),
        }
    }

    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }
}

fn column_counts(mask: &BinaryMask, r: &PixelRegion) -> Vec<u32> {
    let mut counts = vec![0u32; r.width() as usize];
    for y in r.y1..r.y2 {
        for (j, c) in counts.iter_mut().enumerate() {
            *c += mask.get(r.x1 + j as u32, y) as u32;
        }
    }
    counts
}

/// Fraction of set pixels in each column of the box.
pub fn column_occupancy(mask: &BinaryMask, b: &Aabb) -> Result<Vec<f64>, RefineError> {
    let r = PixelRegion::of(b, mask);
    if r.height() == 0 {
        return Err(RefineError::ZeroHeight);
    }
    let bh = r.height() as f64;
    Ok(column_counts(mask, &r).into_iter().map(|c| c as f64 / bh).collect())
}

pub fn refine_word(b: &Aabb, mask: &BinaryMask, cfg: &RefinementConfig) -> RefinementOutcome {
    let r = PixelRegion::of(b, mask);
    let (bw, bh) = (r.width() as usize, r.height() as usize);
    if bw == 0 || bh == 0 {
        // nothing of the box lies on the page, so nothing can occlude it
        return RefinementOutcome::KeptUnchanged;
    }
    let counts = column_counts(mask, &r);
    let total: u32 = counts.iter().sum();
    if (total as f64) / ((bw * bh) as f64) < cfg.skip_ratio {
        return RefinementOutcome::KeptUnchanged;
    }
    let occ: Vec<f64> = counts.iter().map(|&c| c as f64 / bh as f64).collect();

    let (Some(l), Some(mut right)) = (
        occ.iter().position(|&c| c < cfg.tau_col),
        occ.iter().rposition(|&c| c < cfg.tau_col),
    ) else {
        return RefinementOutcome::Removed { reason: RemovalReason::NoValidExtent };
    };
    if right < l {
        return RefinementOutcome::Removed { reason: RemovalReason::NoValidExtent };
    }
    if let Some(j) = (l..=right).find(|&j| occ[j] >= cfg.tau_dense) {
        if j == l {
            return RefinementOutcome::Removed { reason: RemovalReason::LeadingDenseWall };
        }
        right = j - 1;
    }
    let fw = right - l + 1;
    let kept: u32 = counts[l..=right].iter().sum();
    if kept as f64 / ((fw * bh) as f64) > cfg.tau_global {
        return RefinementOutcome::Removed { reason: RemovalReason::GlobalRatio };
    }
    if fw < cfg.w_min as usize || bh < cfg.h_min as usize || fw * bh < cfg.a_min as usize {
        return RefinementOutcome::Removed { reason: RemovalReason::MinDims };
    }
    RefinementOutcome::Trimmed {
        new_box: Aabb {
            x1: (r.x1 as usize + l) as f64,
            y1: r.y1 as f64,
            x2: (r.x1 as usize + right + 1) as f64,
            y2: r.y2 as f64,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLogEntry {
    pub word_index: usize,
    #[serde(flatten)]
    pub outcome: RefinementOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedPage {
    pub annotations: Vec<WordAnnotation>,
    pub log: Vec<RefinementLogEntry>,
}

/// Applies [`refine_word`] to every annotation's bounding box, preserving
/// order. Only opaque classes are refined; other classes pass through.
pub fn refine_page(
    annotations: &[WordAnnotation],
    occlusion: &BinaryMask,
    class: DegradationClass,
    cfg: &RefinementConfig,
) -> RefinedPage {
    if !class.populates_occlusion_mask() {
        return RefinedPage {
            annotations: annotations.to_vec(),
            log: (0..annotations.len())
                .map(|word_index| RefinementLogEntry { word_index, outcome: RefinementOutcome::KeptUnchanged })
                .collect(),
        };
    }
    let mut kept = Vec::with_capacity(annotations.len());
    let mut log = Vec::with_capacity(annotations.len());
    for (word_index, a) in annotations.iter().enumerate() {
        let outcome = refine_word(&a.bbox(), occlusion, cfg);
        match outcome {
            RefinementOutcome::KeptUnchanged => kept.push(a.clone()),
            RefinementOutcome::Trimmed { new_box } => {
                kept.push(WordAnnotation { quad: aabb_to_quad(&new_box), ..a.clone() })
            }
            RefinementOutcome::Removed { .. } => {}
        }
        log.push(RefinementLogEntry { word_index, outcome });
    }
    RefinedPage { annotations: kept, log }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> Aabb {
        Aabb::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn occupancy_basics() {
        let mut m = BinaryMask::new(20, 20);
        assert!(column_occupancy(&m, &bx(0.0, 0.0, 5.0, 4.0)).unwrap().iter().all(|&c| c == 0.0));
        m.fill_rect(0, 0, 5, 4);
        assert!(column_occupancy(&m, &bx(0.0, 0.0, 5.0, 4.0)).unwrap().iter().all(|&c| c == 1.0));
        let mut m = BinaryMask::new(20, 20);
        m.set(3, 1);
        let c = column_occupancy(&m, &bx(0.0, 0.0, 5.0, 4.0)).unwrap();
        assert_eq!(c, vec![0.0, 0.0, 0.0, 0.25, 0.0]);
        assert_eq!(column_occupancy(&m, &bx(0.0, 3.0, 5.0, 3.0)), Err(RefineError::ZeroHeight));
    }

    #[test]
    fn lightly_occluded_box_is_kept() {
        let mut m = BinaryMask::new(100, 100);
        // 40x20 = 800 pixels, 32 occluded = 4%
        m.fill_rect(10, 10, 12, 26);
        let out = refine_word(&bx(10.0, 10.0, 50.0, 30.0), &m, &RefinementConfig::default());
        assert_eq!(out, RefinementOutcome::KeptUnchanged);
    }

    #[test]
    fn fully_covered_box_has_no_extent() {
        let mut m = BinaryMask::new(100, 100);
        m.fill_rect(0, 0, 100, 100);
        let out = refine_word(&bx(10.0, 10.0, 50.0, 30.0), &m, &RefinementConfig::default());
        assert_eq!(out, RefinementOutcome::Removed { reason: RemovalReason::NoValidExtent });
    }

    #[test]
    fn leading_block_is_trimmed() {
        let mut m = BinaryMask::new(100, 100);
        m.fill_rect(10, 10, 18, 30);
        let out = refine_word(&bx(10.0, 10.0, 50.0, 30.0), &m, &RefinementConfig::default());
        assert_eq!(out, RefinementOutcome::Trimmed { new_box: bx(18.0, 10.0, 50.0, 30.0) });
    }

    #[test]
    fn interior_dense_wall_cuts_right_side() {
        let mut m = BinaryMask::new(100, 100);
        m.fill_rect(35, 10, 38, 30);
        let out = refine_word(&bx(10.0, 10.0, 50.0, 30.0), &m, &RefinementConfig::default());
        assert_eq!(out, RefinementOutcome::Trimmed { new_box: bx(10.0, 10.0, 35.0, 30.0) });
    }

    #[test]
    fn global_ratio_removal() {
        // Columns at 0.25 occupancy stay below tau_col, but a dense checker
        // of 0.6-occupied columns... use an alternating pattern instead: every
        // column 0.25 except enough 0.85 columns to push the mean over 0.5.
        let mut m = BinaryMask::new(100, 100);
        let cfg = RefinementConfig::default();
        // box 40x20; column j occupied rows: 17 of 20 (0.85) for j >= 1, first and last 0
        for j in 1..39 {
            m.fill_rect(10 + j, 10, 11 + j, 27);
        }
        let out = refine_word(&bx(10.0, 10.0, 50.0, 30.0), &m, &cfg);
        assert_eq!(out, RefinementOutcome::Removed { reason: RemovalReason::GlobalRatio });
    }

    #[test]
    fn min_dims_removal() {
        let mut m = BinaryMask::new(100, 100);
        // trimmed width 8 < 10
        m.fill_rect(18, 10, 50, 30);
        let out = refine_word(&bx(10.0, 10.0, 50.0, 30.0), &m, &RefinementConfig::default());
        assert_eq!(out, RefinementOutcome::Removed { reason: RemovalReason::MinDims });
    }

    #[test]
    fn leading_dense_wall_needs_inverted_thresholds() {
        // With the default thresholds c_l < tau_col < tau_dense, so the branch
        // only fires when tau_col exceeds tau_dense.
        let cfg = RefinementConfig { tau_col: 0.95, tau_dense: 0.90, ..Default::default() };
        let mut m = BinaryMask::new(100, 100);
        // 0.925 occupancy in every column: below tau_col, at least tau_dense
        for j in 0..40 {
            m.fill_rect(10 + j, 10, 11 + j, 10 + 37);
        }
        let out = refine_word(&bx(10.0, 10.0, 50.0, 50.0), &m, &cfg);
        assert_eq!(out, RefinementOutcome::Removed { reason: RemovalReason::LeadingDenseWall });
    }

    #[test]
    fn page_passes_through_for_transparent_classes() {
        let words = vec![WordAnnotation {
            text: "hello".into(),
            quad: aabb_to_quad(&bx(0.0, 0.0, 40.0, 20.0)),
            font: "f".into(),
            class_label: "paragraph".into(),
        }];
        let mut m = BinaryMask::new(50, 50);
        m.fill_rect(0, 0, 50, 50);
        let out = refine_page(&words, &m, DegradationClass::Dust, &RefinementConfig::default());
        assert_eq!(out.annotations, words);
        let out = refine_page(&words, &BinaryMask::new(50, 50), DegradationClass::BlackInk, &RefinementConfig::default());
        assert_eq!(out.annotations, words);
        let out = refine_page(&words, &m, DegradationClass::BlackInk, &RefinementConfig::default());
        assert!(out.annotations.is_empty());
        assert_eq!(out.log[0].outcome, RefinementOutcome::Removed { reason: RemovalReason::NoValidExtent });
    }

    #[test]
    fn log_json_shape() {
        let e = RefinementLogEntry {
            word_index: 3,
            outcome: RefinementOutcome::Trimmed { new_box: bx(1.0, 2.0, 3.0, 4.0) },
        };
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["word_index"], 3);
        assert_eq!(v["decision"], "trimmed");
        assert_eq!(v["new_box"]["x2"], 3.0);
        let e = RefinementLogEntry { word_index: 0, outcome: RefinementOutcome::Removed { reason: RemovalReason::MinDims } };
        assert_eq!(serde_json::to_value(&e).unwrap()["reason"], "min_dims");
    }
}
