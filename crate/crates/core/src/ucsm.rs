//! Unified Context Similarity Metric.
//!
//! `UCSM = S^(1 - E_context)` where `S` is the weighted geometric mean of
//! edit, semantic and length similarity and `E_context` is the calibrated
//! unpredictability of the ground truth given its surrounding text. The
//! semantic and context terms come from optional providers and fall back to
//! 0.5 when none is configured or a call fails.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SEMANTIC: f64 = 0.5;
pub const DEFAULT_CONTEXT: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum UcsmError {
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("weights must be finite, nonnegative and not all zero")]
    InvalidWeights,
    #[error("calibration upper bound must exceed the lower bound")]
    InvalidCalibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcsmWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for UcsmWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, gamma: 1.0 }
    }
}

impl UcsmWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, UcsmError> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), UcsmError> {
        let all = [self.alpha, self.beta, self.gamma];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) || !(all.iter().sum::<f64>() > 0.0) {
            return Err(UcsmError::InvalidWeights);
        }
        Ok(())
    }
}

/// Lower bound `m` and upper bound `M` for the negative conditional
/// log-probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextCalibration {
    pub m: f64,
    pub m_cal: f64,
}

impl Default for ContextCalibration {
    fn default() -> Self {
        Self { m: -2.0, m_cal: 10.0 }
    }
}

impl ContextCalibration {
    pub fn new(m: f64, m_cal: f64) -> Result<Self, UcsmError> {
        let c = Self { m, m_cal };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), UcsmError> {
        if !(self.m.is_finite() && self.m_cal.is_finite() && self.m_cal > self.m) {
            return Err(UcsmError::InvalidCalibration);
        }
        Ok(())
    }
}

/// Where a provider-backed component came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Provider,
    /// No provider configured.
    Default,
    /// A provider was configured but the call failed or returned garbage.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub semantic: Source,
    pub context: Source,
}

/// Cosine similarity between embeddings of two strings. `None` means the
/// provider is unavailable.
pub trait SemanticProvider: Send + Sync {
    fn cosine(&self, a: &str, b: &str) -> Option<f64>;
}

/// `log P(gt | pre, post)`. `None` means the provider is unavailable.
pub trait ContextProvider: Send + Sync {
    fn logp_conditional(&self, pre: &str, gt: &str, post: &str) -> Option<f64>;
}

#[derive(Clone, Copy, Default)]
pub struct Providers<'a> {
    pub semantic: Option<&'a dyn SemanticProvider>,
    pub context: Option<&'a dyn ContextProvider>,
}

impl Providers<'_> {
    pub fn offline() -> Self {
        Self::default()
    }
}

/// Character-level Levenshtein distance with unit costs over Unicode scalar
/// values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

pub fn edit_similarity(p: &str, gt: &str) -> f64 {
    let longest = char_len(p).max(char_len(gt));
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(gt, p) as f64 / longest as f64
}

pub fn length_similarity(p: &str, gt: &str) -> f64 {
    let (a, b) = (char_len(p), char_len(gt));
    if a.max(b) == 0 {
        return 1.0;
    }
    a.min(b) as f64 / a.max(b) as f64
}

/// Maps a cosine in `[-1, 1]` to `[0, 1]`, clipping out-of-range input.
pub fn rescale_cosine(cosine: f64) -> f64 {
    (cosine.clamp(-1.0, 1.0) + 1.0) / 2.0
}

pub fn semantic_similarity(p: &str, gt: &str, provider: Option<&dyn SemanticProvider>) -> (f64, Source) {
    let Some(provider) = provider else { return (DEFAULT_SEMANTIC, Source::Default) };
    match provider.cosine(gt, p) {
        Some(c) if c.is_finite() => (rescale_cosine(c), Source::Provider),
        other => {
            log::warn!("semantic provider unavailable ({other:?}); using {DEFAULT_SEMANTIC}");
            (DEFAULT_SEMANTIC, Source::Fallback)
        }
    }
}

/// Weighted geometric mean `(e^a * s^b * l^g)^(1 / (a + b + g))`.
pub fn combined_similarity(s_edit: f64, s_sem: f64, s_len: f64, w: &UcsmWeights) -> f64 {
    let total = w.alpha + w.beta + w.gamma;
    let product = s_edit.powf(w.alpha) * s_sem.powf(w.beta) * s_len.powf(w.gamma);
    product.powf(1.0 / total).clamp(0.0, 1.0)
}

/// Normalized context error from a conditional log-probability, clipped to
/// `[0, 1]`. Absent input gives 0.5.
pub fn context_error(logp_conditional: Option<f64>, cal: &ContextCalibration) -> f64 {
    match logp_conditional {
        Some(lp) if lp.is_finite() => ((-lp - cal.m) / (cal.m_cal - cal.m)).clamp(0.0, 1.0),
        Some(lp) => {
            log::warn!("non-finite log-probability {lp}; using {DEFAULT_CONTEXT}");
            DEFAULT_CONTEXT
        }
        None => DEFAULT_CONTEXT,
    }
}

/// `s^(1 - e)` with a zero similarity always scoring zero.
pub fn ucsm_from_parts(s_combined: f64, e_context: f64) -> f64 {
    if s_combined <= 0.0 {
        return 0.0;
    }
    s_combined.powf(1.0 - e_context).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcsmReport {
    pub s_edit: f64,
    pub s_sem: f64,
    pub s_len: f64,
    pub s_combined: f64,
    pub e_context: f64,
    pub ucsm: f64,
    pub edit_distance: usize,
    pub gt_chars: usize,
    pub exact: bool,
    pub provenance: Provenance,
}

/// Scores one prediction. An exact match has `S = 1` and therefore scores 1
/// whatever the context term.
pub fn ucsm(
    p: &str,
    gt: &str,
    pre: &str,
    post: &str,
    providers: &Providers<'_>,
    w: &UcsmWeights,
    cal: &ContextCalibration,
) -> Result<UcsmReport, UcsmError> {
    if gt.is_empty() {
        return Err(UcsmError::EmptyGroundTruth);
    }
    w.validate()?;
    cal.validate()?;
    let edit_distance = levenshtein(gt, p);
    let s_edit = edit_similarity(p, gt);
    let s_len = length_similarity(p, gt);
    let (s_sem, semantic) = semantic_similarity(p, gt, providers.semantic);
    let (logp, context) = match providers.context {
        None => (None, Source::Default),
        Some(c) => match c.logp_conditional(pre, gt, post) {
            Some(lp) if lp.is_finite() => (Some(lp), Source::Provider),
            other => {
                log::warn!("context provider unavailable ({other:?}); using {DEFAULT_CONTEXT}");
                (None, Source::Fallback)
            }
        },
    };
    let e_context = context_error(logp, cal);
    let exact = p == gt;
    let s_combined = if exact { 1.0 } else { combined_similarity(s_edit, s_sem, s_len, w) };
    Ok(UcsmReport {
        s_edit,
        s_sem,
        s_len,
        s_combined,
        e_context,
        ucsm: ucsm_from_parts(s_combined, e_context),
        edit_distance,
        gt_chars: char_len(gt),
        exact,
        provenance: Provenance { semantic, context },
    })
}

/// Corpus-level aggregates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub mean_ucsm: f64,
    pub mean_edit_distance: f64,
    /// Total edit distance over total ground-truth characters.
    pub cer: f64,
    pub exact_match_pct: f64,
}

pub fn summarize(reports: &[UcsmReport]) -> ScoreSummary {
    let n = reports.len();
    if n == 0 {
        return ScoreSummary::default();
    }
    let total_ed: usize = reports.iter().map(|r| r.edit_distance).sum();
    let total_chars: usize = reports.iter().map(|r| r.gt_chars).sum();
    ScoreSummary {
        count: n,
        mean_ucsm: reports.iter().map(|r| r.ucsm).sum::<f64>() / n as f64,
        mean_edit_distance: total_ed as f64 / n as f64,
        cer: if total_chars == 0 { 0.0 } else { total_ed as f64 / total_chars as f64 },
        exact_match_pct: 100.0 * reports.iter().filter(|r| r.exact).count() as f64 / n as f64,
    }
}

/// Fixed responses, for recorded provider outputs and tests.
#[derive(Debug, Clone, Copy)]
pub struct FixedCosine(pub f64);

impl SemanticProvider for FixedCosine {
    fn cosine(&self, _: &str, _: &str) -> Option<f64> {
        Some(self.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedLogProb(pub f64);

impl ContextProvider for FixedLogProb {
    fn logp_conditional(&self, _: &str, _: &str, _: &str) -> Option<f64> {
        Some(self.0)
    }
}
