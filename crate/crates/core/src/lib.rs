//! Coronary angiogram analysis: preprocessing, Chan-Vese contours, ridge-based
//! centerline tracking, diameter measurement and stenosis grading, plus synthetic
//! phantoms and evaluation metrics for verification.

pub mod config;
pub mod contour;
pub mod error;
pub mod evalmetrics;
pub mod geometry;
pub mod image;
pub mod interactive;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod quant;
pub mod report;
pub mod tracker;

pub use config::{config_default, Config};
pub use error::{Error, Result};
pub use geometry::{Direction2, Point2};
pub use image::GrayImage;
