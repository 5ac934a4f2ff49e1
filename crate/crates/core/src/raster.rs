//! Pixel-level helpers: binary masks, patch resampling, alpha compositing and
//! whole-page rotation.

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Point, RotationTransform};

/// Patch alpha above this fraction counts a pixel as covered.
pub const ALPHA_THRESHOLD: f64 = 0.5;

pub(crate) fn alpha_is_solid(alpha: u8) -> bool {
    alpha as f64 / 255.0 > ALPHA_THRESHOLD
}

/// Page-resolution binary raster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Sets a pixel, returning `true` if it was previously clear.
    pub fn set(&mut self, x: u32, y: u32) -> bool {
        let i = y as usize * self.width as usize + x as usize;
        !std::mem::replace(&mut self.bits[i], true)
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Fills the half-open pixel rectangle `[x1, x2) x [y1, y2)`, clipped to
    /// the mask.
    pub fn fill_rect(&mut self, x1: i64, y1: i64, x2: i64, y2: i64) {
        let (w, h) = (self.width as i64, self.height as i64);
        for y in y1.max(0)..y2.min(h) {
            for x in x1.max(0)..x2.min(w) {
                self.set(x as u32, y as u32);
            }
        }
    }

    /// True when every pixel set here is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn to_image(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }
}

/// A patch after scaling and rotation, ready to be composited.
#[derive(Debug, Clone)]
pub struct TransformedPatch {
    /// Bilinearly resampled colour and alpha.
    pub rgba: RgbaImage,
    /// Nearest-neighbour solid footprint (source alpha above threshold).
    pub solid: BinaryMask,
    pub effective_area: u64,
}

impl TransformedPatch {
    pub fn width(&self) -> u32 {
        self.rgba.width()
    }

    pub fn height(&self) -> u32 {
        self.rgba.height()
    }
}

fn bilinear_rgba(src: &RgbaImage, u: f64, v: f64) -> [f64; 4] {
    // sample position in pixel-centre coordinates
    let (fx, fy) = (u - 0.5, v - 0.5);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let (w, h) = (src.width() as i64, src.height() as i64);
    let mut acc = [0.0f64; 4];
    for (dx, dy, wt) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        let (x, y) = (x0 + dx, y0 + dy);
        if wt == 0.0 || x < 0 || y < 0 || x >= w || y >= h {
            continue;
        }
        let p = src.get_pixel(x as u32, y as u32).0;
        let a = p[3] as f64 * wt;
        // colour accumulated premultiplied so transparent texels do not bleed
        acc[0] += p[0] as f64 * a;
        acc[1] += p[1] as f64 * a;
        acc[2] += p[2] as f64 * a;
        acc[3] += a;
    }
    if acc[3] > 0.0 {
        [acc[0] / acc[3], acc[1] / acc[3], acc[2] / acc[3], acc[3]]
    } else {
        [0.0; 4]
    }
}

/// Scales a patch by `(sx, sy)` and rotates it by `angle_deg` about its
/// centre onto the smallest canvas that holds it.
pub fn transform_patch(src: &RgbaImage, sx: f64, sy: f64, angle_deg: f64) -> TransformedPatch {
    let (sw, sh) = (src.width() as f64 * sx, src.height() as f64 * sy);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let ext_w = sw * cos.abs() + sh * sin.abs();
    let ext_h = sw * sin.abs() + sh * cos.abs();
    let dw = ((ext_w - 1e-6).ceil() as u32).max(1);
    let dh = ((ext_h - 1e-6).ceil() as u32).max(1);
    let (dcx, dcy) = (dw as f64 / 2.0, dh as f64 / 2.0);
    let (scx, scy) = (src.width() as f64 / 2.0, src.height() as f64 / 2.0);
    let (iw, ih) = (src.width() as f64, src.height() as f64);

    let mut rgba = RgbaImage::new(dw, dh);
    let mut solid = BinaryMask::new(dw, dh);
    let mut effective_area = 0;
    for j in 0..dh {
        for i in 0..dw {
            let (px, py) = (i as f64 + 0.5 - dcx, j as f64 + 0.5 - dcy);
            // inverse rotation, then inverse scale
            let rx = cos * px + sin * py;
            let ry = -sin * px + cos * py;
            let u = rx / sx + scx;
            let v = ry / sy + scy;
            if u >= 0.0 && v >= 0.0 && u < iw && v < ih {
                let a = src.get_pixel(u as u32, v as u32).0[3];
                if alpha_is_solid(a) {
                    solid.set(i, j);
                    effective_area += 1;
                }
            }
            let c = bilinear_rgba(src, u, v);
            if c[3] > 0.0 {
                rgba.put_pixel(
                    i,
                    j,
                    Rgba([
                        c[0].round() as u8,
                        c[1].round() as u8,
                        c[2].round() as u8,
                        c[3].round().min(255.0) as u8,
                    ]),
                );
            }
        }
    }
    TransformedPatch { rgba, solid, effective_area }
}

/// Mask targets updated while compositing.
pub struct MaskTargets<'a> {
    pub coverage: &'a mut BinaryMask,
    pub occlusion: Option<&'a mut BinaryMask>,
}

/// Blends `patch` onto `page` with its top-left at `origin`, scaled by the
/// class opacity. Returns the number of newly covered pixels.
pub fn composite(
    page: &mut RgbImage,
    patch: &TransformedPatch,
    origin: (i64, i64),
    opacity: f64,
    mut masks: Option<MaskTargets<'_>>,
) -> u64 {
    let (pw, ph) = (page.width() as i64, page.height() as i64);
    let mut newly = 0;
    for j in 0..patch.height() {
        let y = origin.1 + j as i64;
        if y < 0 || y >= ph {
            continue;
        }
        for i in 0..patch.width() {
            let x = origin.0 + i as i64;
            if x < 0 || x >= pw {
                continue;
            }
            let (x, y) = (x as u32, y as u32);
            let src = patch.rgba.get_pixel(i, j).0;
            let a = opacity * src[3] as f64 / 255.0;
            if a > 0.0 {
                let dst = page.get_pixel_mut(x, y);
                for c in 0..3 {
                    let v = dst.0[c] as f64 * (1.0 - a) + src[c] as f64 * a;
                    dst.0[c] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
            if let Some(m) = masks.as_mut() {
                if patch.solid.get(i, j) {
                    if m.coverage.set(x, y) {
                        newly += 1;
                    }
                    if let Some(occ) = m.occlusion.as_deref_mut() {
                        occ.set(x, y);
                    }
                }
            }
        }
    }
    newly
}

/// Page-space footprint of a placed patch.
pub fn footprint(origin: (i64, i64), patch: &TransformedPatch) -> Aabb {
    Aabb {
        x1: origin.0 as f64,
        y1: origin.1 as f64,
        x2: (origin.0 + patch.width() as i64) as f64,
        y2: (origin.1 + patch.height() as i64) as f64,
    }
}

const WHITE: [f64; 3] = [255.0, 255.0, 255.0];

/// Resamples `src` onto the transform's destination canvas with bilinear
/// interpolation; uncovered canvas is white.
pub fn rotate_raster(src: &RgbImage, t: &RotationTransform) -> RgbImage {
    let inv = t.inverse();
    let (w, h) = (src.width() as i64, src.height() as i64);
    let sample = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= w || y >= h {
            WHITE
        } else {
            let p = src.get_pixel(x as u32, y as u32).0;
            [p[0] as f64, p[1] as f64, p[2] as f64]
        }
    };
    RgbImage::from_fn(t.dst_size.0, t.dst_size.1, |i, j| {
        let s = inv.apply(Point::new(i as f64 + 0.5, j as f64 + 0.5));
        let (fx, fy) = (s.x - 0.5, s.y - 0.5);
        let (x0, y0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - x0, fy - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let mut out = [0.0; 3];
        for (dx, dy, wt) in [
            (0, 0, (1.0 - tx) * (1.0 - ty)),
            (1, 0, tx * (1.0 - ty)),
            (0, 1, (1.0 - tx) * ty),
            (1, 1, tx * ty),
        ] {
            let c = sample(x0 + dx, y0 + dy);
            for k in 0..3 {
                out[k] += c[k] * wt;
            }
        }
        Rgb(out.map(|v| v.round().clamp(0.0, 255.0) as u8))
    })
}

/// Pixels whose darkest channel falls below 255 - `tolerance`.
pub fn count_non_white(img: &RgbImage, tolerance: u8) -> u64 {
    img.pixels().filter(|p| p.0.iter().any(|&c| c < 255 - tolerance)).count() as u64
}
