//! Degradation patch assets and the JSON patch manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::RgbaImage;
use thiserror::Error;

use crate::degrade::DegradationClass;
use crate::raster::alpha_is_solid;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("patch manifest is not a JSON object of class -> asset list: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("unknown degradation class {0:?} in manifest")]
    UnknownClass(String),
    #[error("missing asset file {path}: {source}")]
    Missing { path: PathBuf, source: std::io::Error },
    #[error("cannot decode asset {path}: {source}")]
    Decode { path: PathBuf, source: image::ImageError },
    #[error("asset {0} has no alpha channel")]
    NoAlpha(String),
    #[error("asset {0} has no pixel with alpha above the threshold")]
    Transparent(String),
}

#[derive(Debug, Clone)]
pub struct PatchAsset {
    pub id: String,
    pub raster: RgbaImage,
    pub class: DegradationClass,
    /// Pixels whose alpha exceeds [`crate::raster::ALPHA_THRESHOLD`].
    pub effective_area: u64,
}

pub fn effective_area(raster: &RgbaImage) -> u64 {
    raster.pixels().filter(|p| alpha_is_solid(p.0[3])).count() as u64
}

impl PatchAsset {
    pub fn new(id: impl Into<String>, class: DegradationClass, raster: RgbaImage) -> Result<Self, PatchError> {
        let id = id.into();
        let effective_area = effective_area(&raster);
        if effective_area == 0 {
            return Err(PatchError::Transparent(id));
        }
        Ok(Self { id, raster, class, effective_area })
    }
}

#[derive(Debug, Clone, Default)]
pub struct PatchLibrary {
    assets: BTreeMap<DegradationClass, Vec<PatchAsset>>,
}

impl PatchLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, asset: PatchAsset) {
        self.assets.entry(asset.class).or_default().push(asset);
    }

    /// Assets for a class; empty when the manifest listed none.
    pub fn assets_for(&self, class: DegradationClass) -> &[PatchAsset] {
        self.assets.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.assets.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FromIterator<PatchAsset> for PatchLibrary {
    fn from_iter<I: IntoIterator<Item = PatchAsset>>(iter: I) -> Self {
        let mut lib = PatchLibrary::new();
        for a in iter {
            lib.insert(a);
        }
        lib
    }
}

/// Loads every asset listed in a `{"class": ["file.png", ...]}` manifest,
/// resolving paths against `asset_dir`. Classes with no entries are allowed;
/// generation for them fails later.
pub fn load_patch_library(manifest: &[u8], asset_dir: &Path) -> Result<PatchLibrary, PatchError> {
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_slice(manifest)?;
    let mut lib = PatchLibrary::new();
    for (tag, files) in raw {
        let class: DegradationClass = tag.parse().map_err(|_| PatchError::UnknownClass(tag.clone()))?;
        for file in files {
            let path = asset_dir.join(&file);
            let bytes = std::fs::read(&path).map_err(|source| PatchError::Missing { path: path.clone(), source })?;
            let img = image::load_from_memory(&bytes).map_err(|source| PatchError::Decode { path: path.clone(), source })?;
            if !img.color().has_alpha() {
                return Err(PatchError::NoAlpha(file));
            }
            lib.insert(PatchAsset::new(file, class, img.to_rgba8())?);
        }
    }
    Ok(lib)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage, Rgba};

    #[test]
    fn effective_area_counts_solid_pixels() {
        let full = RgbaImage::from_pixel(10, 10, Rgba([0, 0, 0, 255]));
        assert_eq!(effective_area(&full), 100);
        let checker = RgbaImage::from_fn(10, 10, |x, y| Rgba([0, 0, 0, if (x + y) % 2 == 0 { 255 } else { 0 }]));
        assert_eq!(effective_area(&checker), 50);
        // exactly half alpha is not above the threshold
        let half = RgbaImage::from_pixel(4, 4, Rgba([0, 0, 0, 127]));
        assert!(PatchAsset::new("h", DegradationClass::Dust, half).is_err());
        let over = RgbaImage::from_pixel(4, 4, Rgba([0, 0, 0, 128]));
        assert_eq!(effective_area(&over), 16);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        RgbaImage::from_pixel(10, 10, Rgba([5, 5, 5, 255])).save(dir.path().join("ink.png")).unwrap();
        RgbImage::from_pixel(4, 4, Rgb([0, 0, 0])).save(dir.path().join("flat.png")).unwrap();

        let lib = load_patch_library(br#"{"black_ink": ["ink.png"], "stamp": []}"#, dir.path()).unwrap();
        assert_eq!(lib.assets_for(DegradationClass::BlackInk)[0].effective_area, 100);
        assert!(lib.assets_for(DegradationClass::Stamp).is_empty());

        assert!(matches!(
            load_patch_library(br#"{"black_ink": ["nope.png"]}"#, dir.path()),
            Err(PatchError::Missing { .. })
        ));
        assert!(matches!(
            load_patch_library(br#"{"burnt": ["flat.png"]}"#, dir.path()),
            Err(PatchError::NoAlpha(_))
        ));
        assert!(matches!(
            load_patch_library(br#"{"coffee": []}"#, dir.path()),
            Err(PatchError::UnknownClass(_))
        ));
        assert!(load_patch_library(b"{}", dir.path()).unwrap().is_empty());
    }
}
