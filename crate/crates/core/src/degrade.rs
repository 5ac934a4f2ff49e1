//! Patch compositing for the six occlusion classes and the global page
//! rotation.
//!
//! Standard classes (black ink, burnt, whitener, dust) are placed to reach a
//! pixel coverage target; scribbles hide selected words and stamps add one
//! semi-transparent overlay. Coverage is tracked exactly through a pair of
//! binary masks.

use std::fmt;
use std::str::FromStr;

use image::{RgbImage, RgbaImage};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::WordAnnotation;
use crate::geometry::{make_rotation, transform_quad, Aabb, GeometryError, Point, RotationTransform};
use crate::patches::{PatchAsset, PatchLibrary};
use crate::raster::{composite, footprint, rotate_raster, transform_patch, BinaryMask, MaskTargets, TransformedPatch};
use crate::rng::{seeded_rng, BenchRng};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("class {0} has no assets")]
    EmptyLibrary(DegradationClass),
    #[error("page {0}x{1} is smaller than 8x8")]
    PageTooSmall(u32, u32),
    #[error("{0} is not a coverage-targeted class")]
    NotStandard(DegradationClass),
    #[error("invalid coverage level {0}; expected 0.5, 1.0 or 1.5")]
    InvalidLevel(f64),
    #[error("patch has zero effective area")]
    InvalidAsset,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationClass {
    BlackInk,
    Burnt,
    Whitener,
    Dust,
    Scribble,
    Stamp,
}

impl DegradationClass {
    pub const ALL: [DegradationClass; 6] = [
        DegradationClass::BlackInk,
        DegradationClass::Burnt,
        DegradationClass::Whitener,
        DegradationClass::Dust,
        DegradationClass::Scribble,
        DegradationClass::Stamp,
    ];

    pub const OPAQUE: [DegradationClass; 3] =
        [DegradationClass::BlackInk, DegradationClass::Burnt, DegradationClass::Whitener];

    pub fn opacity(self) -> f64 {
        match self {
            DegradationClass::Dust => 0.65,
            DegradationClass::Stamp => 0.60,
            _ => 1.0,
        }
    }

    pub fn populates_occlusion_mask(self) -> bool {
        matches!(self, DegradationClass::BlackInk | DegradationClass::Burnt | DegradationClass::Whitener)
    }

    /// Classes placed against a numeric coverage target.
    pub fn is_standard(self) -> bool {
        !matches!(self, DegradationClass::Scribble | DegradationClass::Stamp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DegradationClass::BlackInk => "black_ink",
            DegradationClass::Burnt => "burnt",
            DegradationClass::Whitener => "whitener",
            DegradationClass::Dust => "dust",
            DegradationClass::Scribble => "scribble",
            DegradationClass::Stamp => "stamp",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DegradationClass::BlackInk => "Black Ink",
            DegradationClass::Burnt => "Burnt",
            DegradationClass::Whitener => "Whitener",
            DegradationClass::Dust => "Dust",
            DegradationClass::Scribble => "Scribble",
            DegradationClass::Stamp => "Stamp",
        }
    }
}

impl fmt::Display for DegradationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error)]
#[error("unknown degradation class {0:?}")]
pub struct UnknownClass(pub String);

impl FromStr for DegradationClass {
    type Err = UnknownClass;

    /// Accepts `black_ink`, `BlackInk`, `Black Ink` and similar spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        DegradationClass::ALL
            .into_iter()
            .find(|c| c.as_str().replace('_', "") == key)
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageTarget {
    /// Percent of document area: 0.5, 1.0 or 1.5.
    pub percent: f64,
    pub document_area: u64,
    pub target_area: f64,
}

impl CoverageTarget {
    pub const LEVELS: [f64; 3] = [0.5, 1.0, 1.5];

    pub fn new(percent: f64, width: u32, height: u32) -> Result<Self, EngineError> {
        if !Self::LEVELS.contains(&percent) {
            return Err(EngineError::InvalidLevel(percent));
        }
        let document_area = width as u64 * height as u64;
        Ok(Self { percent, document_area, target_area: percent / 100.0 * document_area as f64 })
    }
}

/// Binary coverage mask plus the opaque-only occlusion mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPair {
    pub coverage: BinaryMask,
    pub occlusion: BinaryMask,
}

impl MaskPair {
    pub fn new(width: u32, height: u32) -> Self {
        Self { coverage: BinaryMask::new(width, height), occlusion: BinaryMask::new(width, height) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementPass {
    Initial,
    Topup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub asset_id: String,
    pub scale: f64,
    /// Vertical scale; differs from `scale` only for scribbles.
    pub scale_y: f64,
    /// Rotation in `[0, 360)`.
    pub rotation_deg: f64,
    /// Top-left of the transformed patch on the page.
    pub position: Point,
    pub pass: PlacementPass,
    /// Patch size after scaling, before rotation.
    pub scaled_size: [f64; 2],
    /// Page-space box of the rotated patch canvas.
    pub footprint: Aabb,
    /// Solid pixels of the rotated patch, measured before compositing.
    pub effective_area: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StampMode {
    Centre,
    BottomLeft,
    BottomRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub seed: u64,
    pub class: DegradationClass,
    pub opacity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<CoverageTarget>,
    pub placements: Vec<Placement>,
    /// Covered pixel count `|M_cov|`.
    pub achieved_area: u64,
    pub occluded_area: u64,
    pub initial_count: usize,
    pub topup_passes: usize,
    /// Top-up passes ran out before reaching 95% of the target.
    pub exhausted: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_words: Vec<usize>,
    /// Fewer eligible scribble words than requested.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub shortfall: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stamp_mode: Option<StampMode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl GenerationRecord {
    fn new(seed: u64, class: DegradationClass) -> Self {
        Self {
            seed,
            class,
            opacity: class.opacity(),
            target: None,
            placements: Vec::new(),
            achieved_area: 0,
            occluded_area: 0,
            initial_count: 0,
            topup_passes: 0,
            exhausted: false,
            removed_words: Vec::new(),
            shortfall: false,
            stamp_mode: None,
            flags: Vec::new(),
        }
    }
}

pub const MIN_SCALE: f64 = 0.005;
pub const MAX_SCALE: f64 = 10.0;
pub const MAX_TOPUP_PASSES: usize = 6;
pub const TOPUP_GOAL: f64 = 0.95;

/// Per-patch scale `sqrt(A_R / A_P)` with `A_R = (A_T - A_O) / k_left`,
/// clamped to `[0.005, 10]`. A met or exceeded target yields the lower clamp.
pub fn compute_patch_scale(target_area: f64, covered_area: f64, k_left: usize, patch_area: f64) -> Result<f64, EngineError> {
    if !(patch_area > 0.0) {
        return Err(EngineError::InvalidAsset);
    }
    let k = k_left.max(1) as f64;
    let residual = (target_area - covered_area) / k;
    if !(residual > 0.0) {
        return Ok(MIN_SCALE);
    }
    Ok((residual / patch_area).sqrt().clamp(MIN_SCALE, MAX_SCALE))
}

fn uniform_axis(rng: &mut BenchRng, page: u32, patch: u32) -> (f64, bool) {
    let lo = -(patch as f64) / 4.0;
    let hi = page as f64 - 3.0 * patch as f64 / 4.0;
    if hi < lo {
        ((lo + hi) / 2.0, true)
    } else if hi == lo {
        (lo, false)
    } else {
        (rng.gen_range(lo..=hi), false)
    }
}

/// Top-left position for an initial-pass patch, uniform over
/// `[-w/4, W - 3w/4] x [-h/4, H - 3h/4]`. The flag is set when a range is
/// empty and its midpoint was used instead.
pub fn sample_initial_position(rng: &mut BenchRng, page: (u32, u32), patch: (u32, u32)) -> (Point, bool) {
    let (x, fx) = uniform_axis(rng, page.0, patch.0);
    let (y, fy) = uniform_axis(rng, page.1, patch.1);
    (Point::new(x, y), fx || fy)
}

fn check_page(page: &RgbImage) -> Result<(), EngineError> {
    if page.width() < 8 || page.height() < 8 {
        return Err(EngineError::PageTooSmall(page.width(), page.height()));
    }
    Ok(())
}

fn pick<'a>(rng: &mut BenchRng, lib: &'a PatchLibrary, class: DegradationClass) -> Result<&'a PatchAsset, EngineError> {
    lib.assets_for(class).choose(rng).ok_or(EngineError::EmptyLibrary(class))
}

fn origin_of(p: Point) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

fn placement(
    asset: &PatchAsset,
    sx: f64,
    sy: f64,
    rotation: f64,
    origin: (i64, i64),
    pass: PlacementPass,
    patch: &TransformedPatch,
) -> Placement {
    Placement {
        asset_id: asset.id.clone(),
        scale: sx,
        scale_y: sy,
        rotation_deg: rotation.rem_euclid(360.0),
        position: Point::new(origin.0 as f64, origin.1 as f64),
        pass,
        scaled_size: [asset.raster.width() as f64 * sx, asset.raster.height() as f64 * sy],
        footprint: footprint(origin, patch),
        effective_area: patch.effective_area,
    }
}

#[derive(Debug, Clone)]
pub struct StandardOutput {
    pub image: RgbImage,
    pub masks: MaskPair,
    pub record: GenerationRecord,
}

/// Places coverage-targeted patches: an initial pass of 3..=7 patches with
/// partial out-of-frame placement, then up to six in-bounds top-up patches
/// until 95% of the target area is covered.
pub fn place_standard(
    page: &RgbImage,
    class: DegradationClass,
    target: CoverageTarget,
    library: &PatchLibrary,
    seed: u64,
) -> Result<StandardOutput, EngineError> {
    if !class.is_standard() {
        return Err(EngineError::NotStandard(class));
    }
    check_page(page)?;
    if library.assets_for(class).is_empty() {
        return Err(EngineError::EmptyLibrary(class));
    }
    let (w, h) = page.dimensions();
    let mut rng = seeded_rng(seed);
    let mut image = page.clone();
    let mut masks = MaskPair::new(w, h);
    let mut record = GenerationRecord::new(seed, class);
    record.target = Some(target);
    let mut covered: u64 = 0;
    let opacity = class.opacity();
    let occ = class.populates_occlusion_mask();

    let paint = |image: &mut RgbImage, masks: &mut MaskPair, patch: &TransformedPatch, origin: (i64, i64)| {
        composite(
            image,
            patch,
            origin,
            opacity,
            Some(MaskTargets {
                coverage: &mut masks.coverage,
                occlusion: occ.then_some(&mut masks.occlusion),
            }),
        )
    };

    let n = rng.gen_range(3..=7usize);
    record.initial_count = n;
    for k in 0..n {
        let asset = pick(&mut rng, library, class)?;
        let s = compute_patch_scale(target.target_area, covered as f64, n - k, asset.effective_area as f64)?;
        let theta = rng.gen_range(0.0..360.0);
        let patch = transform_patch(&asset.raster, s, s, theta);
        let (pos, flagged) = sample_initial_position(&mut rng, (w, h), (patch.width(), patch.height()));
        if flagged {
            record.flags.push(format!("initial placement {k}: position range empty, used midpoint"));
        }
        let origin = origin_of(pos);
        covered += paint(&mut image, &mut masks, &patch, origin);
        record.placements.push(placement(asset, s, s, theta, origin, PlacementPass::Initial, &patch));
    }

    while (covered as f64) < TOPUP_GOAL * target.target_area && record.topup_passes < MAX_TOPUP_PASSES {
        record.topup_passes += 1;
        let asset = pick(&mut rng, library, class)?;
        let mut s = compute_patch_scale(target.target_area, covered as f64, 1, asset.effective_area as f64)?;
        let theta = rng.gen_range(0.0..360.0);
        let mut patch = transform_patch(&asset.raster, s, s, theta);
        // Must sit fully inside the page; shrink to fit with a 1 px margin.
        let (max_w, max_h) = (w.saturating_sub(2).max(1), h.saturating_sub(2).max(1));
        while (patch.width() > max_w || patch.height() > max_h) && s > MIN_SCALE {
            let fit = (max_w as f64 / patch.width() as f64).min(max_h as f64 / patch.height() as f64);
            s = (s * fit.min(0.999)).max(MIN_SCALE);
            patch = transform_patch(&asset.raster, s, s, theta);
        }
        let x = rng.gen_range(0.0..=(w - patch.width().min(w)) as f64);
        let y = rng.gen_range(0.0..=(h - patch.height().min(h)) as f64);
        let origin = origin_of(Point::new(x, y));
        covered += paint(&mut image, &mut masks, &patch, origin);
        record.placements.push(placement(asset, s, s, theta, origin, PlacementPass::Topup, &patch));
    }

    record.achieved_area = covered;
    record.occluded_area = masks.occlusion.count();
    record.exhausted = (covered as f64) < TOPUP_GOAL * target.target_area;
    Ok(StandardOutput { image, masks, record })
}

pub const SCRIBBLE_MIN_WIDTH: f64 = 15.0;

/// Whether a word may be scribbled out: paragraph class, more than two
/// characters, at least one letter, at least 15 px wide and clear of every
/// exclusion zone.
pub fn scribble_eligible(word: &WordAnnotation, exclusions: &[Aabb]) -> bool {
    let b = word.bbox();
    word.class_label == "paragraph"
        && word.text.chars().count() > 2
        && word.text.chars().any(char::is_alphabetic)
        && b.width() >= SCRIBBLE_MIN_WIDTH
        && !exclusions.iter().any(|z| z.overlap(&b).is_some())
}

#[derive(Debug, Clone)]
pub struct ScribbleOutput {
    pub image: RgbImage,
    /// Indices into the input annotations, ascending.
    pub removed: Vec<usize>,
    pub record: GenerationRecord,
}

pub const SCRIBBLE_JITTER: f64 = 0.05;

pub fn place_scribbles(
    page: &RgbImage,
    annotations: &[WordAnnotation],
    exclusions: &[Aabb],
    library: &PatchLibrary,
    seed: u64,
) -> Result<ScribbleOutput, EngineError> {
    let class = DegradationClass::Scribble;
    check_page(page)?;
    if library.assets_for(class).is_empty() {
        return Err(EngineError::EmptyLibrary(class));
    }
    let mut rng = seeded_rng(seed);
    let mut image = page.clone();
    let mut cov = BinaryMask::new(page.width(), page.height());
    let mut record = GenerationRecord::new(seed, class);

    let eligible: Vec<usize> = (0..annotations.len())
        .filter(|&i| scribble_eligible(&annotations[i], exclusions))
        .collect();
    let n = rng.gen_range(5..=6usize);
    record.initial_count = n;
    if eligible.len() < n {
        record.shortfall = true;
        record.flags.push(format!("only {} eligible words for {n} scribbles", eligible.len()));
    }
    let chosen: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), n.min(eligible.len()))
        .into_iter()
        .map(|k| eligible[k])
        .collect();

    let mut covered = 0;
    for &idx in &chosen {
        let b = annotations[idx].bbox();
        let asset = pick(&mut rng, library, class)?;
        let ow = rng.gen_range(1.00..=1.15);
        let oh = rng.gen_range(1.00..=1.20);
        let sx = b.width() * ow / asset.raster.width() as f64;
        let sy = b.height() * oh / asset.raster.height() as f64;
        let jx = rng.gen_range(-SCRIBBLE_JITTER..=SCRIBBLE_JITTER) * b.width();
        let jy = rng.gen_range(-SCRIBBLE_JITTER..=SCRIBBLE_JITTER) * b.height();
        let tilt = rng.gen_range(-10.0..=10.0);
        let patch = transform_patch(&asset.raster, sx.max(MIN_SCALE), sy.max(MIN_SCALE), tilt);
        let c = b.center();
        let origin = origin_of(Point::new(
            c.x + jx - patch.width() as f64 / 2.0,
            c.y + jy - patch.height() as f64 / 2.0,
        ));
        covered += composite(
            &mut image,
            &patch,
            origin,
            class.opacity(),
            Some(MaskTargets { coverage: &mut cov, occlusion: None }),
        );
        record.placements.push(placement(asset, sx, sy, tilt, origin, PlacementPass::Initial, &patch));
    }
    let mut removed = chosen;
    removed.sort_unstable();
    record.achieved_area = covered;
    record.removed_words = removed.clone();
    Ok(ScribbleOutput { image, removed, record })
}

#[derive(Debug, Clone)]
pub struct StampOutput {
    pub image: RgbImage,
    pub record: GenerationRecord,
}

pub const STAMP_MARGIN: f64 = 0.03;

/// Places exactly one stamp, either centred at 20-35% of the page height or
/// in a bottom corner at 8-12% with a 3% margin. Annotations are untouched.
pub fn place_stamp(page: &RgbImage, library: &PatchLibrary, seed: u64) -> Result<StampOutput, EngineError> {
    let class = DegradationClass::Stamp;
    check_page(page)?;
    let mut rng = seeded_rng(seed);
    let asset = pick(&mut rng, library, class)?;
    let (w, h) = (page.width() as f64, page.height() as f64);
    let centre = rng.gen_bool(0.5);
    let frac = if centre { rng.gen_range(0.20..=0.35) } else { rng.gen_range(0.08..=0.12) };
    let s = (frac * h / asset.raster.height() as f64).max(MIN_SCALE);
    let tilt = rng.gen_range(-15.0..=15.0);
    let patch = transform_patch(&asset.raster, s, s, tilt);
    let (pw, ph) = (patch.width() as f64, patch.height() as f64);
    let (mode, origin) = if centre {
        (StampMode::Centre, origin_of(Point::new((w - pw) / 2.0, (h - ph) / 2.0)))
    } else {
        let y = (h - STAMP_MARGIN * h - ph).floor() as i64;
        if rng.gen_bool(0.5) {
            (StampMode::BottomLeft, ((STAMP_MARGIN * w).ceil() as i64, y))
        } else {
            (StampMode::BottomRight, ((w - STAMP_MARGIN * w - pw).floor() as i64, y))
        }
    };
    let mut image = page.clone();
    let mut cov = BinaryMask::new(page.width(), page.height());
    let covered = composite(
        &mut image,
        &patch,
        origin,
        class.opacity(),
        Some(MaskTargets { coverage: &mut cov, occlusion: None }),
    );
    let mut record = GenerationRecord::new(seed, class);
    record.initial_count = 1;
    record.stamp_mode = Some(mode);
    record.achieved_area = covered;
    record.placements.push(placement(asset, s, s, tilt, origin, PlacementPass::Initial, &patch));
    Ok(StampOutput { image, record })
}

pub const MAX_GLOBAL_ROTATION: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct RotatedPage {
    pub image: RgbImage,
    pub annotations: Vec<WordAnnotation>,
    pub angle_deg: f64,
    pub transform: RotationTransform,
}

/// Rotates the page by a fixed angle onto an expanded white canvas and maps
/// every annotation quad through the same transform.
pub fn rotate_page(raster: &RgbImage, annotations: &[WordAnnotation], angle_deg: f64) -> Result<RotatedPage, EngineError> {
    let transform = make_rotation(angle_deg, raster.dimensions())?;
    let image = if angle_deg == 0.0 { raster.clone() } else { rotate_raster(raster, &transform) };
    let annotations = annotations
        .iter()
        .map(|a| WordAnnotation { quad: transform_quad(&transform, &a.quad), ..a.clone() })
        .collect();
    Ok(RotatedPage { image, annotations, angle_deg, transform })
}

/// Samples `phi ~ U[-5, 5]` degrees from `seed` and applies [`rotate_page`].
pub fn apply_global_rotation(raster: &RgbImage, annotations: &[WordAnnotation], seed: u64) -> Result<RotatedPage, EngineError> {
    let angle = seeded_rng(seed).gen_range(-MAX_GLOBAL_ROTATION..=MAX_GLOBAL_ROTATION);
    rotate_page(raster, annotations, angle)
}

/// A solid rectangle asset; handy for tests and quick experiments.
pub fn solid_asset(id: &str, class: DegradationClass, w: u32, h: u32, rgb: [u8; 3]) -> PatchAsset {
    let raster = RgbaImage::from_pixel(w, h, image::Rgba([rgb[0], rgb[1], rgb[2], 255]));
    PatchAsset::new(id, class, raster).expect("solid asset has area")
}
