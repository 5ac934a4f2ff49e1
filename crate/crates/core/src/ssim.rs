//! Structural similarity between two grayscale rasters.
//!
//! Mean SSIM over every `w x w` window position (stride 1, uniform weights,
//! population statistics), with `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2` and
//! `L = 255`.

use image::{GrayImage, RgbImage};
use thiserror::Error;

pub const DEFAULT_WINDOW: u32 = 8;
const L: f64 = 255.0;
const C1: f64 = (0.01 * L) * (0.01 * L);
const C2: f64 = (0.03 * L) * (0.03 * L);

#[derive(Debug, Error, PartialEq)]
pub enum SsimError {
    #[error("image sizes differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("window {window} does not fit a {width}x{height} image")]
    WindowTooLarge { window: u32, width: u32, height: u32 },
}

pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64, SsimError> {
    ssim_with_window(a, b, DEFAULT_WINDOW)
}

/// Summed-area table with a zero first row and column.
struct Integral {
    stride: usize,
    data: Vec<f64>,
}

impl Integral {
    fn new(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let stride = w + 1;
        let mut data = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f(x, y);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row;
            }
        }
        Self { stride, data }
    }

    fn window(&self, x: usize, y: usize, n: usize) -> f64 {
        let s = self.stride;
        self.data[(y + n) * s + x + n] - self.data[y * s + x + n] - self.data[(y + n) * s + x] + self.data[y * s + x]
    }
}

pub fn ssim_with_window(a: &GrayImage, b: &GrayImage, window: u32) -> Result<f64, SsimError> {
    if a.dimensions() != b.dimensions() {
        return Err(SsimError::DimensionMismatch(a.dimensions(), b.dimensions()));
    }
    let (w, h) = a.dimensions();
    if window == 0 || window > w || window > h {
        return Err(SsimError::WindowTooLarge { window, width: w, height: h });
    }
    let (wu, hu, n) = (w as usize, h as usize, window as usize);
    let pa = |x: usize, y: usize| a.get_pixel(x as u32, y as u32).0[0] as f64;
    let pb = |x: usize, y: usize| b.get_pixel(x as u32, y as u32).0[0] as f64;
    let sa = Integral::new(wu, hu, pa);
    let sb = Integral::new(wu, hu, pb);
    let saa = Integral::new(wu, hu, |x, y| pa(x, y) * pa(x, y));
    let sbb = Integral::new(wu, hu, |x, y| pb(x, y) * pb(x, y));
    let sab = Integral::new(wu, hu, |x, y| pa(x, y) * pb(x, y));
    let count = (n * n) as f64;
    let mut total = 0.0;
    for y in 0..=hu - n {
        for x in 0..=wu - n {
            let ma = sa.window(x, y, n) / count;
            let mb = sb.window(x, y, n) / count;
            let va = (saa.window(x, y, n) / count - ma * ma).max(0.0);
            let vb = (sbb.window(x, y, n) / count - mb * mb).max(0.0);
            let cov = sab.window(x, y, n) / count - ma * mb;
            total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
    }
    Ok(total / ((wu - n + 1) * (hu - n + 1)) as f64)
}

/// ITU-R BT.601 luma, rounded.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let [r, g, b] = img.get_pixel(x, y).0;
        let v = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
        image::Luma([v.round().clamp(0.0, 255.0) as u8])
    })
}
