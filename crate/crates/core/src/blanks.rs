//! Blank-region extraction from OCR lines and occlusion patches, and the
//! length-conditioned fill-mask prompt for each blank.
//!
//! A blank is the part of an occlusion patch that hides missing text:
//!
//! * **mid** blanks are the overlap of a patch with the gap between two
//!   adjacent words of a line;
//! * **start** / **end** blanks sit before the first or after the last
//!   visible word and are accepted only when enclosed by the text margin and
//!   the neighbouring lines;
//! * scribbles hide whole words, so each contiguous run of scribbled words
//!   becomes a single blank bounded by the surrounding unaffected words.
//!
//! Every blank box is clamped to its source patch, and its character budget
//! is `max(1, floor(1.2 * rho * width))` where `rho` is the line's
//! characters-per-pixel density. Budgets below two are never emitted.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{box_array, OcrWord};
use crate::degrade::DegradationClass;
use crate::geometry::Aabb;

/// Tolerance in pixels for the start/end enclosure test.
pub const ENCLOSURE_TOLERANCE: f64 = 2.0;
/// Minimum vertical overlap, as a fraction of the shorter height, for two
/// words to share a line.
pub const LINE_OVERLAP: f64 = 0.5;
/// Minimum horizontal overlap with a scribble, as a fraction of word width.
pub const SCRIBBLE_OVERLAP: f64 = 0.30;
/// Share of a transparent patch that recognized words must cover for the
/// inpaint-only branch.
pub const VISIBILITY_THRESHOLD: f64 = 0.5;
pub const MASK_MARKER: &str = "<mask>";

#[derive(Debug, Error, PartialEq)]
pub enum BlankError {
    #[error("line {0} has zero total word width")]
    ZeroWidth(usize),
    #[error("line {0} has no words")]
    EmptyLine(usize),
    #[error("malformed prompt token {0:?}")]
    BadToken(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub id: usize,
    /// Sorted by `x1`.
    pub words: Vec<OcrWord>,
    /// Vertical extent `(top, bottom)` of the member words.
    pub band: (f64, f64),
}

impl TextLine {
    /// Space-joined text of `words[range]`.
    pub fn text(&self, range: std::ops::Range<usize>) -> String {
        self.words[range].iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

fn vertical_overlap_ratio(a: (f64, f64), b: (f64, f64)) -> f64 {
    let overlap = a.1.min(b.1) - a.0.max(b.0);
    let shorter = (a.1 - a.0).min(b.1 - b.0).max(f64::EPSILON);
    overlap.max(0.0) / shorter
}

/// Greedy vertical-band clustering. Words are visited top to bottom and join
/// the line whose members they all overlap by at least half the shorter
/// height, preferring the strongest such overlap; lines are then sorted top
/// to bottom and their words left to right.
pub fn group_lines(words: &[OcrWord]) -> Vec<TextLine> {
    let band_of = |i: usize| (words[i].bbox.y1, words[i].bbox.y2);
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| {
        let (wa, wb) = (&words[a].bbox, &words[b].bbox);
        (wa.y1 + wa.y2).total_cmp(&(wb.y1 + wb.y2)).then(wa.x1.total_cmp(&wb.x1))
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let band = band_of(i);
        let best = groups
            .iter()
            .enumerate()
            .map(|(g, members)| {
                let worst = members
                    .iter()
                    .map(|&m| vertical_overlap_ratio(band, band_of(m)))
                    .fold(f64::INFINITY, f64::min);
                (g, worst)
            })
            .filter(|&(_, r)| r >= LINE_OVERLAP)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((g, _)) => groups[g].push(i),
            None => groups.push(vec![i]),
        }
    }
    let mut lines: Vec<(Vec<usize>, (f64, f64))> = groups
        .into_iter()
        .map(|members| {
            let band = members.iter().map(|&m| band_of(m)).fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| {
                (a.0.min(b.0), a.1.max(b.1))
            });
            (members, band)
        })
        .collect();
    lines.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.1 .1.total_cmp(&b.1 .1)));
    lines
        .into_iter()
        .enumerate()
        .map(|(id, (members, band))| {
            let mut ws: Vec<OcrWord> = members.into_iter().map(|i| words[i].clone()).collect();
            ws.sort_by(|a, b| a.bbox.x1.total_cmp(&b.bbox.x1).then(a.bbox.x2.total_cmp(&b.bbox.x2)));
            TextLine { id, words: ws, band }
        })
        .collect()
}

/// Heuristic check for layouts with more than one text column: some line
/// has an inter-word gap wider than a quarter of the text block.
pub fn looks_multi_column(lines: &[TextLine]) -> bool {
    let Some(m) = TextMargins::from_lines(lines) else { return false };
    let width = m.right - m.left;
    lines.iter().any(|l| l.words.windows(2).any(|p| p[1].bbox.x1 - p[0].bbox.x2 > 0.25 * width))
}

/// Characters per pixel over the words of a line.
pub fn estimate_chars_per_pixel(line: &TextLine) -> Result<f64, BlankError> {
    if line.words.is_empty() {
        return Err(BlankError::EmptyLine(line.id));
    }
    let chars: usize = line.words.iter().map(|w| w.text.chars().count()).sum();
    let width: f64 = line.words.iter().map(|w| w.bbox.width()).sum();
    if !(width > 0.0) {
        return Err(BlankError::ZeroWidth(line.id));
    }
    Ok(chars as f64 / width)
}

/// Text block bounds used by the start/end enclosure test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextMargins {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl TextMargins {
    pub fn from_lines(lines: &[TextLine]) -> Option<Self> {
        let mut words = lines.iter().flat_map(|l| &l.words).map(|w| w.bbox);
        let first = words.next()?;
        Some(words.fold(
            TextMargins { left: first.x1, top: first.y1, right: first.x2, bottom: first.y2 },
            |m, b| TextMargins {
                left: m.left.min(b.x1),
                top: m.top.min(b.y1),
                right: m.right.max(b.x2),
                bottom: m.bottom.max(b.y2),
            },
        ))
    }
}

/// A detected occlusion region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionPatch {
    pub id: String,
    #[serde(rename = "box", with = "box_array")]
    pub bbox: Aabb,
    pub class: DegradationClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlankType {
    Start,
    Mid,
    End,
}

impl fmt::Display for BlankType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlankType::Start => "start",
            BlankType::Mid => "mid",
            BlankType::End => "end",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlankRecord {
    pub alpha: usize,
    pub blank_type: BlankType,
    pub bbox: Aabb,
    /// Index of the last word before the blank, for mid blanks.
    pub gap_index: Option<usize>,
    pub pre_text: String,
    pub post_text: String,
    pub blank_width: f64,
    pub chars_per_pixel: f64,
    pub max_chars: u32,
    pub line: usize,
    pub patch: String,
}

impl BlankRecord {
    /// Duplicate-suppression key.
    pub fn key(&self) -> (usize, BlankType, Option<usize>, String) {
        (self.line, self.blank_type, self.gap_index, self.patch.clone())
    }
}

/// `max(1, floor(1.2 * rho * width))`.
pub fn max_chars(chars_per_pixel: f64, blank_width: f64) -> u32 {
    let m = (1.2 * chars_per_pixel * blank_width).floor();
    if m.is_finite() && m >= 1.0 {
        m.min(u32::MAX as f64) as u32
    } else {
        1
    }
}

/// Gap between two adjacent words, spanning both words vertically.
pub fn gap_box(left: &OcrWord, right: &OcrWord) -> Aabb {
    Aabb {
        x1: left.bbox.x2,
        y1: left.bbox.y1.min(right.bbox.y1),
        x2: right.bbox.x1,
        y2: left.bbox.y2.max(right.bbox.y2),
    }
}

struct Neighbours {
    above: f64,
    below: f64,
}

fn neighbours(lines: &[TextLine], idx: usize, margins: &TextMargins) -> Neighbours {
    Neighbours {
        above: if idx > 0 { lines[idx - 1].band.1 } else { margins.top },
        below: lines.get(idx + 1).map_or(margins.bottom, |l| l.band.0),
    }
}

fn enclosed_vertically(c: &Aabb, n: &Neighbours) -> bool {
    c.y1 >= n.above - ENCLOSURE_TOLERANCE && c.y2 <= n.below + ENCLOSURE_TOLERANCE
}

fn on_band(p: &Aabb, band: (f64, f64)) -> bool {
    p.y1 < band.1 && p.y2 > band.0
}

/// Start-of-line candidate: the part of the patch left of the first word,
/// accepted when it stays inside the left text margin and between the
/// neighbouring lines.
fn start_candidate(line: &TextLine, p: &Aabb, margins: &TextMargins, n: &Neighbours) -> Option<Aabb> {
    let first = line.words.first()?.bbox;
    if !on_band(p, line.band) || p.x1 >= first.x1 {
        return None;
    }
    let c = Aabb { x1: p.x1, y1: p.y1, x2: p.x2.min(first.x1), y2: p.y2 };
    (c.x1 >= margins.left - ENCLOSURE_TOLERANCE && enclosed_vertically(&c, n)).then_some(c)
}

fn end_candidate(line: &TextLine, p: &Aabb, margins: &TextMargins, n: &Neighbours) -> Option<Aabb> {
    let last = line.words.last()?.bbox;
    if !on_band(p, line.band) || p.x2 <= last.x2 {
        return None;
    }
    let c = Aabb { x1: p.x1.max(last.x2), y1: p.y1, x2: p.x2, y2: p.y2 };
    (c.x2 <= margins.right + ENCLOSURE_TOLERANCE && enclosed_vertically(&c, n)).then_some(c)
}

#[allow(clippy::too_many_arguments)]
fn record(
    line: &TextLine,
    rho: f64,
    blank_type: BlankType,
    bbox: Aabb,
    gap_index: Option<usize>,
    pre: std::ops::Range<usize>,
    post: std::ops::Range<usize>,
    patch: &str,
) -> BlankRecord {
    let blank_width = bbox.width();
    BlankRecord {
        alpha: 0,
        blank_type,
        bbox,
        gap_index,
        pre_text: line.text(pre),
        post_text: line.text(post),
        blank_width,
        chars_per_pixel: rho,
        max_chars: max_chars(rho, blank_width),
        line: line.id,
        patch: patch.to_string(),
    }
}

/// Drops duplicate keys and budgets below two, orders blanks top to bottom
/// and left to right, and numbers them from zero.
pub fn finalize_blanks(mut blanks: Vec<BlankRecord>) -> Vec<BlankRecord> {
    let mut seen = BTreeSet::new();
    blanks.retain(|b| b.max_chars >= 2 && seen.insert(b.key()));
    blanks.sort_by(|a, b| {
        a.line
            .cmp(&b.line)
            .then(a.bbox.x1.total_cmp(&b.bbox.x1))
            .then(a.bbox.x2.total_cmp(&b.bbox.x2))
            .then(a.blank_type.cmp(&b.blank_type))
            .then(a.gap_index.cmp(&b.gap_index))
            .then(a.patch.cmp(&b.patch))
    });
    for (alpha, b) in blanks.iter_mut().enumerate() {
        b.alpha = alpha;
    }
    blanks
}

/// Blanks from non-scribble patches: gap intersections plus enclosed
/// start/end candidates. Scribble patches are ignored here.
pub fn extract_blanks(lines: &[TextLine], patches: &[OcclusionPatch], margins: &TextMargins) -> Vec<BlankRecord> {
    let mut out = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        let Ok(rho) = estimate_chars_per_pixel(line) else { continue };
        let n = line.words.len();
        let around = neighbours(lines, li, margins);
        for p in patches.iter().filter(|p| p.class != DegradationClass::Scribble) {
            for i in 0..n.saturating_sub(1) {
                let gap = gap_box(&line.words[i], &line.words[i + 1]);
                if gap.is_empty() {
                    continue;
                }
                if let Some(b) = gap.overlap(&p.bbox) {
                    out.push(record(line, rho, BlankType::Mid, b, Some(i), 0..i + 1, i + 1..n, &p.id));
                }
            }
            if let Some(b) = start_candidate(line, &p.bbox, margins, &around) {
                out.push(record(line, rho, BlankType::Start, b, None, 0..0, 0..n, &p.id));
            }
            if let Some(b) = end_candidate(line, &p.bbox, margins, &around) {
                out.push(record(line, rho, BlankType::End, b, None, 0..n, n..n, &p.id));
            }
        }
    }
    finalize_blanks(out)
}

/// Blanks from scribble patches: each maximal run of words whose horizontal
/// overlap with the patch exceeds 30% of the word width becomes one blank
/// spanning from the previous unaffected word to the next one.
pub fn extract_scribble_blanks(lines: &[TextLine], patches: &[OcclusionPatch]) -> Vec<BlankRecord> {
    let mut out = Vec::new();
    for line in lines {
        let Ok(rho) = estimate_chars_per_pixel(line) else { continue };
        let n = line.words.len();
        for p in patches.iter().filter(|p| p.class == DegradationClass::Scribble) {
            let hit: Vec<bool> = line
                .words
                .iter()
                .map(|w| {
                    let b = &w.bbox;
                    let dx = b.x2.min(p.bbox.x2) - b.x1.max(p.bbox.x1);
                    let vertical = b.y1 < p.bbox.y2 && b.y2 > p.bbox.y1;
                    vertical && b.width() > 0.0 && dx / b.width() > SCRIBBLE_OVERLAP
                })
                .collect();
            let mut j = 0;
            while j < n {
                if !hit[j] {
                    j += 1;
                    continue;
                }
                let start = j;
                while j < n && hit[j] {
                    j += 1;
                }
                let end = j; // exclusive
                let left = if start > 0 { line.words[start - 1].bbox.x2 } else { line.words[start].bbox.x1 };
                let right = if end < n { line.words[end].bbox.x1 } else { line.words[end - 1].bbox.x2 };
                let anchor = Aabb { x1: left.min(right), y1: line.band.0, x2: right.max(left), y2: line.band.1 };
                if let Some(b) = anchor.overlap(&p.bbox) {
                    out.push(record(line, rho, BlankType::Mid, b, start.checked_sub(1), 0..start, end..n, &p.id));
                }
            }
        }
    }
    finalize_blanks(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Reconstruct,
    InpaintOnly,
}

/// Share of the patch area covered by words that carry recognized text.
pub fn visible_fraction(patch: &Aabb, lines: &[TextLine]) -> f64 {
    let area = patch.area();
    if !(area > 0.0) {
        return 0.0;
    }
    let covered: f64 = lines
        .iter()
        .flat_map(|l| &l.words)
        .filter(|w| !w.text.trim().is_empty())
        .filter_map(|w| w.bbox.overlap(patch))
        .map(|b| b.area())
        .sum();
    (covered / area).min(1.0)
}

/// For semi-transparent patches, decides whether enough text is still
/// readable to skip prediction. Opaque and scribble patches always
/// reconstruct.
pub fn visibility_gate(patch: &OcclusionPatch, lines: &[TextLine]) -> GateDecision {
    if !matches!(patch.class, DegradationClass::Dust | DegradationClass::Stamp) {
        return GateDecision::Reconstruct;
    }
    if visible_fraction(&patch.bbox, lines) >= VISIBILITY_THRESHOLD {
        GateDecision::InpaintOnly
    } else {
        GateDecision::Reconstruct
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptToken {
    pub alpha: usize,
    pub token: String,
}

/// `[K=M] pre <mask> post`, leaving out empty context without doubling
/// spaces.
pub fn render_token(max_chars: u32, pre: &str, post: &str) -> String {
    let mut s = format!("[K={max_chars}]");
    for part in [pre, MASK_MARKER, post] {
        if !part.is_empty() {
            s.push(' ');
            s.push_str(part);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedToken {
    pub max_chars: u32,
    pub pre_text: String,
    pub post_text: String,
}

pub fn parse_token(token: &str) -> Result<ParsedToken, BlankError> {
    let bad = || BlankError::BadToken(token.to_string());
    let rest = token.strip_prefix("[K=").ok_or_else(bad)?;
    let (k, rest) = rest.split_once(']').ok_or_else(bad)?;
    let max_chars: u32 = k.parse().map_err(|_| bad())?;
    if rest.matches(MASK_MARKER).count() != 1 {
        return Err(bad());
    }
    let (pre, post) = rest.split_once(MASK_MARKER).ok_or_else(bad)?;
    let pre = pre.strip_prefix(' ').ok_or_else(bad)?;
    let pre = if pre.is_empty() { pre } else { pre.strip_suffix(' ').ok_or_else(bad)? };
    let post = if post.is_empty() { post } else { post.strip_prefix(' ').ok_or_else(bad)? };
    Ok(ParsedToken { max_chars, pre_text: pre.to_string(), post_text: post.to_string() })
}

/// Builds one prompt per blank, recomputing the character budget from the
/// stored density and width and skipping budgets below two. Tokens follow
/// the input order, which [`finalize_blanks`] makes left to right per line.
pub fn generate_prompt_tokens(blanks: &[BlankRecord]) -> Vec<PromptToken> {
    blanks
        .iter()
        .filter_map(|b| {
            let m = max_chars(b.chars_per_pixel, b.blank_width);
            (m >= 2).then(|| PromptToken { alpha: b.alpha, token: render_token(m, &b.pre_text, &b.post_text) })
        })
        .collect()
}

/// One JSON line of blank-extraction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlankEntry {
    pub alpha: usize,
    #[serde(rename = "type")]
    pub blank_type: BlankType,
    #[serde(rename = "box", with = "box_array")]
    pub bbox: Aabb,
    pub pre_text: String,
    pub post_text: String,
    pub max_chars: u32,
    pub token: String,
    pub line: usize,
    pub patch: String,
}

/// Pairs blanks with their prompts; blanks without a prompt are dropped.
pub fn blank_entries(blanks: &[BlankRecord]) -> Vec<BlankEntry> {
    let tokens = generate_prompt_tokens(blanks);
    blanks
        .iter()
        .filter_map(|b| {
            let t = tokens.iter().find(|t| t.alpha == b.alpha)?;
            Some(BlankEntry {
                alpha: b.alpha,
                blank_type: b.blank_type,
                bbox: b.bbox,
                pre_text: b.pre_text.clone(),
                post_text: b.post_text.clone(),
                max_chars: b.max_chars,
                token: t.token.clone(),
                line: b.line,
                patch: b.patch.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(text: &str, x1: f64, y1: f64, x2: f64, y2: f64) -> OcrWord {
        OcrWord::new(text, Aabb::new(x1, y1, x2, y2).unwrap())
    }

    fn patch(id: &str, x1: f64, y1: f64, x2: f64, y2: f64) -> OcclusionPatch {
        OcclusionPatch { id: id.into(), bbox: Aabb::new(x1, y1, x2, y2).unwrap(), class: DegradationClass::BlackInk }
    }

    /// Six 40-px words of five characters with 20-px gaps on one line.
    fn six_word_line() -> Vec<OcrWord> {
        ["alpha", "bravo", "delta", "gamma", "omega", "sigma"]
            .iter()
            .enumerate()
            .map(|(i, t)| w(t, 60.0 * i as f64, 100.0, 60.0 * i as f64 + 40.0, 112.0))
            .collect()
    }

    #[test]
    fn grouping_simple() {
        let lines = group_lines(&[w("b", 50.0, 0.0, 60.0, 10.0), w("a", 0.0, 1.0, 10.0, 11.0)]);
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].text(0..2), "a b");
        let lines = group_lines(&[w("low", 0.0, 30.0, 10.0, 40.0), w("high", 0.0, 0.0, 10.0, 10.0)]);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].words[0].text, "high");
        assert_eq!(lines[1].id, 1);
    }

    #[test]
    fn density_examples() {
        let l = TextLine { id: 0, words: vec![w("abcd", 0.0, 0.0, 40.0, 10.0)], band: (0.0, 10.0) };
        assert!((estimate_chars_per_pixel(&l).unwrap() - 0.1).abs() < 1e-12);
        let l = TextLine {
            id: 0,
            words: vec![w("ab", 0.0, 0.0, 20.0, 10.0), w("cdef", 30.0, 0.0, 70.0, 10.0)],
            band: (0.0, 10.0),
        };
        assert!((estimate_chars_per_pixel(&l).unwrap() - 0.1).abs() < 1e-12);
        let l = TextLine { id: 3, words: vec![w("ab", 5.0, 0.0, 5.0, 10.0)], band: (0.0, 10.0) };
        assert_eq!(estimate_chars_per_pixel(&l), Err(BlankError::ZeroWidth(3)));
    }

    #[test]
    fn patch_over_one_gap_gives_one_mid_blank() {
        let lines = group_lines(&six_word_line());
        let margins = TextMargins::from_lines(&lines).unwrap();
        // gap between words 2 and 3 spans x 160..180
        let out = extract_blanks(&lines, &[patch("p0", 160.0, 100.0, 180.0, 112.0)], &margins);
        assert_eq!(out.len(), 1);
        let b = &out[0];
        assert_eq!(b.blank_type, BlankType::Mid);
        assert_eq!(b.gap_index, Some(2));
        assert_eq!(b.pre_text, "alpha bravo delta");
        assert_eq!(b.post_text, "gamma omega sigma");
        assert_eq!(b.bbox, Aabb::new(160.0, 100.0, 180.0, 112.0).unwrap());
        // 30 chars over 240 px -> 0.125 * 1.2 * 20 = 3
        assert_eq!(b.max_chars, 3);
    }

    #[test]
    fn far_patch_gives_nothing() {
        let lines = group_lines(&six_word_line());
        let margins = TextMargins::from_lines(&lines).unwrap();
        assert!(extract_blanks(&lines, &[patch("p", 500.0, 500.0, 540.0, 540.0)], &margins).is_empty());
        assert!(extract_blanks(&lines, &[], &margins).is_empty());
    }

    #[test]
    fn two_patches_on_one_gap() {
        let lines = group_lines(&six_word_line());
        let margins = TextMargins::from_lines(&lines).unwrap();
        let ps = [patch("a", 160.0, 90.0, 175.0, 120.0), patch("b", 165.0, 95.0, 200.0, 110.0)];
        let out = extract_blanks(&lines, &ps, &margins);
        assert_eq!(out.len(), 2);
        for (b, p) in out.iter().zip(&ps) {
            assert_eq!(b.patch, p.id);
            assert!(p.bbox.contains(&b.bbox));
        }
        assert_eq!(out[1].bbox, Aabb::new(165.0, 100.0, 180.0, 110.0).unwrap());
    }

    #[test]
    fn start_and_end_blanks_need_enclosure() {
        // three lines; the middle one starts late because its first words are hidden
        let mut words = vec![
            w("first", 0.0, 0.0, 50.0, 12.0),
            w("line", 60.0, 0.0, 100.0, 12.0),
            w("here", 110.0, 0.0, 200.0, 12.0),
            w("visible", 80.0, 20.0, 150.0, 32.0),
            w("tail", 160.0, 20.0, 200.0, 32.0),
        ];
        words.extend([w("third", 0.0, 40.0, 50.0, 52.0), w("line", 60.0, 40.0, 200.0, 52.0)]);
        let lines = group_lines(&words);
        let margins = TextMargins::from_lines(&lines).unwrap();
        let inside = patch("p", 2.0, 14.0, 78.0, 38.0);
        let out = extract_blanks(&lines, &[inside], &margins);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].blank_type, BlankType::Start);
        assert_eq!(out[0].pre_text, "");
        assert_eq!(out[0].post_text, "visible tail");
        assert_eq!(out[0].bbox, Aabb::new(2.0, 14.0, 78.0, 38.0).unwrap());
        let tokens = generate_prompt_tokens(&out);
        assert!(tokens[0].token.starts_with(&format!("[K={}] <mask> visible", out[0].max_chars)));

        // spilling into the line above fails the enclosure test
        let tall = patch("q", 2.0, 5.0, 78.0, 38.0);
        assert!(extract_blanks(&lines, &[tall], &margins).iter().all(|b| b.blank_type == BlankType::Mid));
        // sticking out past the left margin fails too
        let wide = patch("r", -20.0, 14.0, 78.0, 38.0);
        assert!(extract_blanks(&lines, &[wide], &margins).is_empty());

        // end-of-line on the first line
        let words2 = vec![w("short", 0.0, 0.0, 50.0, 12.0), w("longer", 0.0, 20.0, 200.0, 32.0)];
        let lines2 = group_lines(&words2);
        let m2 = TextMargins::from_lines(&lines2).unwrap();
        let out = extract_blanks(&lines2, &[patch("e", 55.0, 0.0, 198.0, 14.0)], &m2);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].blank_type, BlankType::End);
        assert_eq!(out[0].pre_text, "short");
        assert_eq!(out[0].post_text, "");
    }

    #[test]
    fn scribble_runs() {
        let lines = group_lines(&six_word_line());
        let mk = |x1, x2| OcclusionPatch {
            id: "s".into(),
            bbox: Aabb::new(x1, 98.0, x2, 114.0).unwrap(),
            class: DegradationClass::Scribble,
        };
        // 50% of word 1 (60..100)
        let out = extract_scribble_blanks(&lines, &[mk(80.0, 100.0)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].pre_text, "alpha");
        assert_eq!(out[0].post_text, "delta gamma omega sigma");
        assert_eq!(out[0].gap_index, Some(0));
        // 10% overlap is not enough
        assert!(extract_scribble_blanks(&lines, &[mk(96.0, 104.0)]).is_empty());
        // words 1..=3 covered -> a single blank from word 0's edge to word 4's edge, clamped
        let out = extract_scribble_blanks(&lines, &[mk(40.0, 240.0)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].pre_text, "alpha");
        assert_eq!(out[0].post_text, "omega sigma");
        assert_eq!(out[0].bbox, Aabb::new(40.0, 100.0, 240.0, 112.0).unwrap());
        // non-scribble patches are ignored by the scribble path and vice versa
        let margins = TextMargins::from_lines(&lines).unwrap();
        assert!(extract_blanks(&lines, &[mk(40.0, 240.0)], &margins).is_empty());
    }

    #[test]
    fn gate_decisions() {
        let lines = group_lines(&[w("seen", 0.0, 0.0, 10.0, 10.0)]);
        let mut p = OcclusionPatch { id: "d".into(), bbox: Aabb::new(50.0, 50.0, 60.0, 60.0).unwrap(), class: DegradationClass::Dust };
        assert_eq!(visibility_gate(&p, &lines), GateDecision::Reconstruct);
        p.bbox = Aabb::new(2.0, 2.0, 8.0, 8.0).unwrap();
        assert_eq!(visibility_gate(&p, &lines), GateDecision::InpaintOnly);
        // exactly half covered
        p.bbox = Aabb::new(5.0, 0.0, 15.0, 10.0).unwrap();
        assert_eq!(visible_fraction(&p.bbox, &lines), 0.5);
        assert_eq!(visibility_gate(&p, &lines), GateDecision::InpaintOnly);
        p.bbox = Aabb::new(5.1, 0.0, 15.1, 10.0).unwrap();
        assert_eq!(visibility_gate(&p, &lines), GateDecision::Reconstruct);
        p.class = DegradationClass::BlackInk;
        p.bbox = Aabb::new(2.0, 2.0, 8.0, 8.0).unwrap();
        assert_eq!(visibility_gate(&p, &lines), GateDecision::Reconstruct);
    }

    #[test]
    fn token_rendering() {
        assert_eq!(max_chars(0.1, 100.0), 12);
        assert_eq!(render_token(12, "the", "sat"), "[K=12] the <mask> sat");
        assert_eq!(max_chars(0.1, 10.0), 1);
        assert_eq!(render_token(5, "", "full line"), "[K=5] <mask> full line");
        assert_eq!(render_token(5, "full line", ""), "[K=5] full line <mask>");
        assert_eq!(render_token(2, "", ""), "[K=2] <mask>");
        let b = BlankRecord {
            alpha: 0,
            blank_type: BlankType::Mid,
            bbox: Aabb::new(0.0, 0.0, 10.0, 5.0).unwrap(),
            gap_index: Some(0),
            pre_text: "a".into(),
            post_text: "b".into(),
            blank_width: 10.0,
            chars_per_pixel: 0.1,
            max_chars: 1,
            line: 0,
            patch: "p".into(),
        };
        assert!(generate_prompt_tokens(&[b]).is_empty());
    }

    #[test]
    fn token_parse_rejects_garbage() {
        assert!(parse_token("K=3 <mask>").is_err());
        assert!(parse_token("[K=x] <mask>").is_err());
        assert!(parse_token("[K=3] a b").is_err());
        assert!(parse_token("[K=3] <mask> <mask>").is_err());
        let p = parse_token("[K=7] a b <mask> c").unwrap();
        assert_eq!((p.max_chars, p.pre_text.as_str(), p.post_text.as_str()), (7, "a b", "c"));
    }
}
