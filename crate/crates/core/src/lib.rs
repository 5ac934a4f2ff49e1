pub mod annotation;
pub mod blanks;
pub mod cli;
pub mod degrade;
pub mod geometry;
pub mod patches;
pub mod provider;
pub mod raster;
pub mod refine;
pub mod rng;
pub mod ssim;
pub mod synthetic;
pub mod ucsm;
