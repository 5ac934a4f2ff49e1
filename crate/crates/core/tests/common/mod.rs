//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use image::{GrayImage, Luma};
use occlusion_bench::annotation::OcrWord;
use occlusion_bench::blanks::{BlankRecord, OcclusionPatch};
use occlusion_bench::degrade::DegradationClass;
use occlusion_bench::geometry::Aabb;
use occlusion_bench::raster::BinaryMask;
use occlusion_bench::refine::{RefinementConfig, RefinementOutcome, RemovalReason};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Column-wise refinement written straight from the listing, over a plain
/// row-major grid.
pub fn refine_oracle(grid: &[Vec<bool>], b: &Aabb, cfg: &RefinementConfig) -> RefinementOutcome {
    let (mh, mw) = (grid.len() as f64, grid.first().map_or(0, Vec::len) as f64);
    let x1 = b.x1.round().max(0.0).min(mw) as usize;
    let y1 = b.y1.round().max(0.0).min(mh) as usize;
    let x2 = (b.x2.round().max(0.0).min(mw) as usize).max(x1);
    let y2 = (b.y2.round().max(0.0).min(mh) as usize).max(y1);
    let bw = x2 - x1;
    let bh = y2 - y1;
    if bw == 0 || bh == 0 {
        return RefinementOutcome::KeptUnchanged;
    }
    let mut sub = vec![vec![0u32; bw]; bh];
    let mut set = 0u32;
    for i in 0..bh {
        for j in 0..bw {
            if grid[y1 + i][x1 + j] {
                sub[i][j] = 1;
                set += 1;
            }
        }
    }
    if (set as f64) / ((bw * bh) as f64) < cfg.skip_ratio {
        return RefinementOutcome::KeptUnchanged;
    }
    let mut c = vec![0.0; bw];
    for j in 0..bw {
        let mut s = 0u32;
        for row in &sub {
            s += row[j];
        }
        c[j] = s as f64 / bh as f64;
    }
    let mut l: Option<usize> = None;
    let mut r: Option<usize> = None;
    for j in 0..bw {
        if c[j] < cfg.tau_col {
            if l.is_none() {
                l = Some(j);
            }
            r = Some(j);
        }
    }
    let (l, mut r) = match (l, r) {
        (Some(l), Some(r)) if r >= l => (l, r),
        _ => return RefinementOutcome::Removed { reason: RemovalReason::NoValidExtent },
    };
    let mut j = l;
    while j <= r {
        if c[j] >= cfg.tau_dense {
            if j == l {
                return RefinementOutcome::Removed { reason: RemovalReason::LeadingDenseWall };
            }
            r = j - 1;
            break;
        }
        j += 1;
    }
    let fw = r - l + 1;
    let mut kept = 0u32;
    for row in &sub {
        for v in &row[l..=r] {
            kept += v;
        }
    }
    if kept as f64 / (fw * bh) as f64 > cfg.tau_global {
        return RefinementOutcome::Removed { reason: RemovalReason::GlobalRatio };
    }
    if fw < cfg.w_min as usize || bh < cfg.h_min as usize || fw * bh < cfg.a_min as usize {
        return RefinementOutcome::Removed { reason: RemovalReason::MinDims };
    }
    RefinementOutcome::Trimmed {
        new_box: Aabb { x1: (x1 + l) as f64, y1: y1 as f64, x2: (x1 + r + 1) as f64, y2: y2 as f64 },
    }
}

/// A random mask built from a few filled rectangles plus speckle, returned
/// both as a [`BinaryMask`] and as a grid.
pub fn random_mask(rng: &mut ChaCha8Rng, w: u32, h: u32) -> (BinaryMask, Vec<Vec<bool>>) {
    let mut mask = BinaryMask::new(w, h);
    for _ in 0..rng.gen_range(0..4) {
        let x1 = rng.gen_range(0..w as i64);
        let y1 = rng.gen_range(0..h as i64);
        let x2 = x1 + rng.gen_range(1..=w as i64);
        let y2 = y1 + rng.gen_range(1..=h as i64);
        mask.fill_rect(x1 - 5, y1 - 5, x2, y2);
    }
    let speckle = rng.gen_range(0.0..0.4);
    for y in 0..h {
        for x in 0..w {
            if rng.gen_bool(speckle) {
                mask.set(x, y);
            }
        }
    }
    let grid = (0..h).map(|y| (0..w).map(|x| mask.get(x, y)).collect()).collect();
    (mask, grid)
}

/// A random refinement config; mostly the defaults, sometimes thresholds
/// that make every branch reachable.
pub fn random_config(rng: &mut ChaCha8Rng) -> RefinementConfig {
    if rng.gen_bool(0.5) {
        return RefinementConfig::default();
    }
    let tau_col = rng.gen_range(0.1..0.99);
    RefinementConfig {
        tau_col,
        tau_dense: rng.gen_range(0.3..1.0),
        tau_global: rng.gen_range(0.2..0.8),
        w_min: rng.gen_range(1..15),
        h_min: rng.gen_range(1..15),
        a_min: rng.gen_range(10..200),
        skip_ratio: rng.gen_range(0.0..0.1),
    }
}

/// A random single-column layout with its true line membership.
pub struct Layout {
    pub words: Vec<OcrWord>,
    pub lines: Vec<Vec<usize>>,
    pub patches: Vec<OcclusionPatch>,
}

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

pub fn random_layout(rng: &mut ChaCha8Rng, max_lines: usize, max_patches: usize) -> Layout {
    let mut words = Vec::new();
    let mut lines = Vec::new();
    let n_lines = rng.gen_range(1..=max_lines);
    let mut y = 20.0;
    for _ in 0..n_lines {
        let h = rng.gen_range(12.0..18.0f64).round();
        let mut x = 30.0 + rng.gen_range(0..4) as f64 * 20.0;
        let mut line = Vec::new();
        for _ in 0..rng.gen_range(1..=8) {
            let len = rng.gen_range(1..=8);
            let text: String = (0..len).map(|_| LETTERS[rng.gen_range(0..26)] as char).collect();
            let w = (len as f64 * rng.gen_range(6.0..10.0f64)).round();
            let dy = rng.gen_range(-2..=2) as f64;
            line.push(words.len());
            words.push(OcrWord::new(text, Aabb::new(x, y + dy, x + w, y + dy + h).unwrap()));
            x += w + rng.gen_range(3..=30) as f64;
        }
        lines.push(line);
        y += h + rng.gen_range(6.0..20.0f64).round();
    }
    let classes = [
        DegradationClass::BlackInk,
        DegradationClass::Burnt,
        DegradationClass::Whitener,
        DegradationClass::Dust,
        DegradationClass::Stamp,
    ];
    let patches = (0..rng.gen_range(0..=max_patches))
        .map(|k| {
            let bbox = if rng.gen_bool(0.5) {
                // confined to one line band, near its start or end
                let ws = &lines[rng.gen_range(0..lines.len())];
                let band_top = ws.iter().map(|&i| words[i].bbox.y1).fold(f64::INFINITY, f64::min);
                let band_bottom = ws.iter().map(|&i| words[i].bbox.y2).fold(f64::NEG_INFINITY, f64::max);
                let y1 = band_top + rng.gen_range(-2..=3) as f64;
                let y2 = band_bottom + rng.gen_range(-3..=2) as f64;
                let w = rng.gen_range(5.0..60.0f64).round();
                let x1 = if rng.gen_bool(0.5) {
                    words[ws[0]].bbox.x1 - rng.gen_range(0.0..50.0f64).round()
                } else {
                    words[ws[ws.len() - 1]].bbox.x2 - rng.gen_range(0.0..30.0f64).round()
                };
                Aabb::new(x1, y1, x1 + w, y2).unwrap()
            } else {
                let x1 = rng.gen_range(0.0..700.0f64).round();
                let y1 = rng.gen_range(0.0..y + 10.0).round();
                let w = rng.gen_range(5.0..140.0f64).round();
                let h = rng.gen_range(5.0..60.0f64).round();
                Aabb::new(x1, y1, x1 + w, y1 + h).unwrap()
            };
            OcclusionPatch {
                id: format!("p{k}"),
                bbox,
                class: classes[rng.gen_range(0..classes.len())],
            }
        })
        .collect();
    Layout { words, lines, patches }
}

/// Canonical comparable form of a blank: everything except the id.
pub type BlankKey = (usize, String, Option<usize>, String, [i64; 4], String, String, u32);

fn quantize(b: &Aabb) -> [i64; 4] {
    [b.x1, b.y1, b.x2, b.y2].map(|v| (v * 1000.0).round() as i64)
}

pub fn blank_key(b: &BlankRecord) -> BlankKey {
    (
        b.line,
        b.blank_type.to_string(),
        b.gap_index,
        b.patch.clone(),
        quantize(&b.bbox),
        b.pre_text.clone(),
        b.post_text.clone(),
        b.max_chars,
    )
}

/// Exhaustive enumeration over every (line, gap, patch) triple plus the
/// start/end candidates of every (line, patch) pair, given lines as word
/// lists sorted left to right.
pub fn blank_oracle(lines: &[Vec<OcrWord>], patches: &[OcclusionPatch]) -> Vec<BlankKey> {
    const TOL: f64 = 2.0;
    let all: Vec<&OcrWord> = lines.iter().flatten().collect();
    if all.is_empty() {
        return Vec::new();
    }
    let left = all.iter().map(|w| w.bbox.x1).fold(f64::INFINITY, f64::min);
    let right = all.iter().map(|w| w.bbox.x2).fold(f64::NEG_INFINITY, f64::max);
    let top = all.iter().map(|w| w.bbox.y1).fold(f64::INFINITY, f64::min);
    let bottom = all.iter().map(|w| w.bbox.y2).fold(f64::NEG_INFINITY, f64::max);
    let band = |ws: &Vec<OcrWord>| {
        (
            ws.iter().map(|w| w.bbox.y1).fold(f64::INFINITY, f64::min),
            ws.iter().map(|w| w.bbox.y2).fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let join = |ws: &[OcrWord]| ws.iter().map(|w| w.text.clone()).collect::<Vec<_>>().join(" ");
    let mut out = Vec::new();
    for (li, ws) in lines.iter().enumerate() {
        let chars: usize = ws.iter().map(|w| w.text.chars().count()).sum();
        let width: f64 = ws.iter().map(|w| w.bbox.x2 - w.bbox.x1).sum();
        if width <= 0.0 {
            continue;
        }
        let rho = chars as f64 / width;
        let budget = |bw: f64| ((1.2 * rho * bw).floor() as i64).max(1) as u32;
        let (bt, bb) = band(ws);
        let above = if li == 0 { top } else { band(&lines[li - 1]).1 };
        let below = if li + 1 == lines.len() { bottom } else { band(&lines[li + 1]).0 };
        for p in patches.iter().filter(|p| p.class != DegradationClass::Scribble) {
            let pb = p.bbox;
            for i in 0..ws.len().saturating_sub(1) {
                let (a, b) = (&ws[i].bbox, &ws[i + 1].bbox);
                let g = [a.x2, a.y1.min(b.y1), b.x1, a.y2.max(b.y2)];
                if g[2] - g[0] <= 0.0 {
                    continue;
                }
                let x1 = g[0].max(pb.x1);
                let y1 = g[1].max(pb.y1);
                let x2 = g[2].min(pb.x2);
                let y2 = g[3].min(pb.y2);
                if x2 > x1 && y2 > y1 {
                    let bx = Aabb { x1, y1, x2, y2 };
                    out.push((li, "mid".into(), Some(i), p.id.clone(), quantize(&bx), join(&ws[..=i]), join(&ws[i + 1..]), budget(x2 - x1)));
                }
            }
            let on_band = pb.y1 < bb && pb.y2 > bt;
            let vertical_ok = pb.y1 >= above - TOL && pb.y2 <= below + TOL;
            let first = ws[0].bbox;
            if on_band && vertical_ok && pb.x1 < first.x1 && pb.x1 >= left - TOL {
                let bx = Aabb { x1: pb.x1, y1: pb.y1, x2: pb.x2.min(first.x1), y2: pb.y2 };
                out.push((li, "start".into(), None, p.id.clone(), quantize(&bx), String::new(), join(ws), budget(bx.x2 - bx.x1)));
            }
            let last = ws[ws.len() - 1].bbox;
            if on_band && vertical_ok && pb.x2 > last.x2 && pb.x2 <= right + TOL {
                let bx = Aabb { x1: pb.x1.max(last.x2), y1: pb.y1, x2: pb.x2, y2: pb.y2 };
                out.push((li, "end".into(), None, p.id.clone(), quantize(&bx), join(ws), String::new(), budget(bx.x2 - bx.x1)));
            }
        }
    }
    out.retain(|k| k.7 >= 2);
    out.sort();
    out.dedup_by(|a, b| (a.0, &a.1, a.2, &a.3) == (b.0, &b.1, b.2, &b.3));
    out
}

/// Deterministic SSIM fixtures; the same formulas feed the reference values.
pub fn ssim_fixture_a(w: u32, h: u32) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| Luma([((x * 7 + y * 13 + (x * y) % 17) % 256) as u8]))
}

pub fn ssim_fixture_b(w: u32, h: u32) -> GrayImage {
    let a = ssim_fixture_a(w, h);
    GrayImage::from_fn(w, h, |x, y| {
        let v = a.get_pixel(x, y).0[0] as i64 + ((x * 31 + y * 17) % 23) as i64 - 11;
        Luma([v.clamp(0, 255) as u8])
    })
}

pub fn ssim_fixture_c(w: u32, h: u32) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| Luma([if ((x / 6) + (y / 5)) % 2 == 0 { 240 } else { 30 }]))
}

pub fn ssim_fixture_d(w: u32, h: u32) -> GrayImage {
    let c = ssim_fixture_c(w, h);
    GrayImage::from_fn(w, h, |x, y| {
        let v = (c.get_pixel(x, y).0[0] as f64 * 0.8 + ((x * 3) % 40) as f64).round();
        Luma([v.clamp(0.0, 255.0) as u8])
    })
}

/// Mean SSIM over 8x8 windows from a numpy sliding-window implementation
/// (population statistics, L = 255) on the fixtures above.
pub const SSIM_REF_AB_64X48: f64 = 0.9890724712142107;
pub const SSIM_REF_CD_50X40: f64 = 0.9674294413510716;

/// Published rows: (label, prediction, ground truth, S_sem, E_ctx, UCSM).
/// The 44-character row uses a phrase with five scattered substitutions.
pub const TABLE_ROWS: [(&str, &str, &str, f64, f64, f64); 8] = [
    ("exact", "proposed method", "proposed method", 1.000, 0.000, 1.000),
    ("typo", "proposed methoc", "proposed method", 0.665, 0.000, 0.853),
    ("synonym", "suggested approach", "proposed method", 0.859, 0.000, 0.584),
    ("hallucination", "random variables", "proposed method", 0.523, 0.000, 0.313),
    ("plant/where", "plant", "where", 0.649, 0.500, 0.000),
    ("44-char phrase", PHRASE_NOISY, PHRASE_CLEAN, 0.503, 0.500, 0.874),
    ("predictable", "measurement", "temperature", 0.619, 0.000, 0.483),
    ("ambiguous", "measurement", "temperature", 0.619, 0.657, 0.779),
];

pub const PHRASE_CLEAN: &str = "the quick brown fox jumps over the lazy cats";
pub const PHRASE_NOISY: &str = "tne quick hrown fox jumqs over thc lazy c0ts";

/// Published S_edit / S_len for the rows above, to three decimals.
pub const TABLE_COMPONENTS: [(f64, f64); 8] = [
    (1.000, 1.000),
    (0.933, 1.000),
    (0.278, 0.833),
    (0.062, 0.938),
    (0.000, 1.000),
    (0.886, 1.000),
    (0.182, 1.000),
    (0.182, 1.000),
];

/// `log P` that the default calibration maps to `e`.
pub fn logp_for(e: f64) -> f64 {
    -(-2.0 + e * 12.0)
}
