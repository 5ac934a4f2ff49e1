//! Procedural patch assets and text-like pages for demos and tests.
//!
//! Pages are drawn in a fixed-pitch pseudo-font so the character density of
//! every line is known exactly.

use std::f64::consts::TAU;

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use rand::Rng;

use crate::annotation::{OcrWord, WordAnnotation};
use crate::degrade::DegradationClass;
use crate::geometry::{aabb_to_quad, Aabb};
use crate::patches::{PatchAsset, PatchLibrary};
use crate::rng::{derive_seed, seeded_rng};

pub const WHITE: Rgb<u8> = Rgb([255, 255, 255]);

fn class_colour(class: DegradationClass) -> [u8; 3] {
    match class {
        DegradationClass::BlackInk => [12, 12, 18],
        DegradationClass::Burnt => [58, 34, 18],
        DegradationClass::Whitener => [250, 250, 246],
        DegradationClass::Dust => [120, 110, 92],
        DegradationClass::Scribble => [20, 24, 90],
        DegradationClass::Stamp => [170, 30, 40],
    }
}

/// An irregular filled blob: a disc whose radius is perturbed by a few
/// random harmonics, with a one-pixel soft edge.
pub fn blob_asset(id: &str, class: DegradationClass, size: u32, seed: u64) -> PatchAsset {
    let mut rng = seeded_rng(seed);
    let harmonics: Vec<(f64, f64, f64)> =
        (2..6).map(|k| (k as f64, rng.gen_range(0.03..0.12), rng.gen_range(0.0..TAU))).collect();
    let [r, g, b] = class_colour(class);
    let c = size as f64 / 2.0;
    let base = 0.78 * c;
    let raster = RgbaImage::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        let theta = dy.atan2(dx);
        let radius = base * (1.0 + harmonics.iter().map(|(k, a, p)| a * (k * theta + p).sin()).sum::<f64>());
        let edge = (radius - dx.hypot(dy) + 0.5).clamp(0.0, 1.0);
        Rgba([r, g, b, (edge * 255.0).round() as u8])
    });
    PatchAsset::new(id, class, raster).expect("blob has area")
}

/// A horizontal zig-zag stroke, wider than tall.
pub fn scribble_asset(id: &str, seed: u64) -> PatchAsset {
    let mut rng = seeded_rng(seed);
    let (w, h) = (120u32, 40u32);
    let [r, g, b] = class_colour(DegradationClass::Scribble);
    let mut raster = RgbaImage::from_pixel(w, h, Rgba([r, g, b, 0]));
    let turns = rng.gen_range(6..12);
    let pts: Vec<(f64, f64)> = (0..=turns)
        .map(|i| {
            let x = 4.0 + (w as f64 - 8.0) * i as f64 / turns as f64;
            let y = if i % 2 == 0 { rng.gen_range(4.0..12.0) } else { rng.gen_range(28.0..36.0) };
            (x, y)
        })
        .collect();
    let thick = rng.gen_range(2.5..4.0);
    for y in 0..h {
        for x in 0..w {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let d = pts.windows(2).map(|s| segment_distance(p, s[0], s[1])).fold(f64::INFINITY, f64::min);
            if d <= thick {
                raster.put_pixel(x, y, Rgba([r, g, b, 255]));
            }
        }
    }
    PatchAsset::new(id, DegradationClass::Scribble, raster).expect("scribble has area")
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    (p.0 - a.0 - t * vx).hypot(p.1 - a.1 - t * vy)
}

/// A ring with a solid centre band, in stamp red.
pub fn stamp_asset(id: &str, seed: u64) -> PatchAsset {
    let mut rng = seeded_rng(seed);
    let size = 160u32;
    let [r, g, b] = class_colour(DegradationClass::Stamp);
    let c = size as f64 / 2.0;
    let (outer, ring) = (c - 2.0, rng.gen_range(6.0..12.0));
    let band = rng.gen_range(12.0..22.0);
    let raster = RgbaImage::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        let d = dx.hypot(dy);
        let on = (d <= outer && d >= outer - ring) || (d < outer - ring && dy.abs() < band / 2.0);
        Rgba([r, g, b, if on { 255 } else { 0 }])
    });
    PatchAsset::new(id, DegradationClass::Stamp, raster).expect("stamp has area")
}

/// Three assets per class.
pub fn default_library(seed: u64) -> PatchLibrary {
    let mut lib = PatchLibrary::new();
    for (ci, class) in DegradationClass::ALL.into_iter().enumerate() {
        for k in 0..3u64 {
            let s = derive_seed(seed, ci as u64 * 16 + k);
            let id = format!("{}_{k}", class.as_str());
            lib.insert(match class {
                DegradationClass::Scribble => scribble_asset(&id, s),
                DegradationClass::Stamp => stamp_asset(&id, s),
                _ => blob_asset(&id, class, 96 + 16 * k as u32, s),
            });
        }
    }
    lib
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageStyle {
    pub char_width: u32,
    pub line_height: u32,
    pub line_gap: u32,
    pub word_gap: u32,
    pub margin: u32,
}

impl Default for PageStyle {
    fn default() -> Self {
        Self { char_width: 9, line_height: 14, line_gap: 12, word_gap: 9, margin: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPage {
    pub image: RgbImage,
    pub annotations: Vec<WordAnnotation>,
    /// Annotation indices per line, top to bottom, left to right.
    pub lines: Vec<Vec<usize>>,
    pub style: PageStyle,
}

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

/// Paints a glyph-like mark for `ch` inside one character cell.
fn draw_glyph(img: &mut RgbImage, x0: u32, y0: u32, style: &PageStyle, ch: u8) {
    let bits = (ch as u32).wrapping_mul(2654435761) >> 7;
    let (cw, lh) = (style.char_width, style.line_height);
    for dy in 2..lh.saturating_sub(2) {
        for dx in 1..cw.saturating_sub(2) {
            let stem = dx == 1 || dx == cw - 3;
            let bar = dy == 2 + (bits % 3) || dy == lh / 2 + (bits >> 3) % 3;
            if (stem && (bits >> ((dx + dy) % 5)) & 1 == 1) || bar {
                let (x, y) = (x0 + dx, y0 + dy);
                if x < img.width() && y < img.height() {
                    img.put_pixel(x, y, Rgb([25, 25, 25]));
                }
            }
        }
    }
}

/// A single-column page of random lower-case words in a fixed-pitch
/// pseudo-font, with exact word annotations.
pub fn text_page(width: u32, height: u32, seed: u64, style: PageStyle) -> SyntheticPage {
    let mut rng = seeded_rng(seed);
    let mut image = RgbImage::from_pixel(width, height, WHITE);
    let mut annotations = Vec::new();
    let mut lines = Vec::new();
    let right = width.saturating_sub(style.margin);
    let mut y = style.margin;
    while y + style.line_height + style.margin <= height {
        let mut x = style.margin + if rng.gen_bool(0.2) { 4 * style.char_width } else { 0 };
        let mut line = Vec::new();
        loop {
            let len = rng.gen_range(2..=9u32);
            let w = len * style.char_width;
            if x + w > right {
                break;
            }
            let text: String = (0..len).map(|_| LETTERS[rng.gen_range(0..LETTERS.len())] as char).collect();
            for (i, ch) in text.bytes().enumerate() {
                draw_glyph(&mut image, x + i as u32 * style.char_width, y, &style, ch);
            }
            let b = Aabb { x1: x as f64, y1: y as f64, x2: (x + w) as f64, y2: (y + style.line_height) as f64 };
            line.push(annotations.len());
            annotations.push(WordAnnotation {
                text,
                quad: aabb_to_quad(&b),
                font: "mono".into(),
                class_label: "paragraph".into(),
            });
            x += w + style.word_gap;
            // ragged right edge
            if rng.gen_bool(0.04) {
                break;
            }
        }
        if !line.is_empty() {
            lines.push(line);
        }
        y += style.line_height + style.line_gap;
    }
    SyntheticPage { image, annotations, lines, style }
}

/// OCR view of a set of annotations: axis-aligned boxes with full confidence.
pub fn ocr_layout(annotations: &[WordAnnotation]) -> Vec<OcrWord> {
    annotations
        .iter()
        .map(|a| OcrWord { text: a.text.clone(), bbox: a.bbox(), confidence: Some(1.0) })
        .collect()
}
