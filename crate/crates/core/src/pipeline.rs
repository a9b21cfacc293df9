//! End-to-end preparation of an image and the automatic whole-tree analysis.

use crate::config::Config;
use crate::contour::{chan_vese, extract_contours_on_field, percentile_mask, CvInput, CvOutcome, VesselContour};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::preprocess::{preprocess, Preprocessed};
use crate::quant::{find_stenoses, quantify, StenosisFinding, VesselSegment};
use crate::tracker::{detect_ridges, split_segments, track_tree, CenterlineTrack, RidgeSet};

/// Everything derived from one image before tracking.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub original: GrayImage,
    pub stages: Preprocessed,
    pub segmentation: CvOutcome,
    pub contour: VesselContour,
    pub ridges: RidgeSet,
}

impl Prepared {
    /// Image on which ridges are detected and tracking runs.
    pub fn tracking(&self) -> &GrayImage {
        &self.stages.tracking
    }
}

/// Pixels this close to the Chan-Vese phase boundary are re-thresholded on the
/// denoised image before contouring.
const BOUNDARY_BAND: usize = 2;

/// Preprocessing, ridge detection and Chan-Vese contouring.
///
/// Near the segmentation boundary the phase is re-decided by the denoised image at
/// the midpoint of its two phase means, and contour vertices are placed where the
/// denoised image crosses that level.
pub fn prepare(img: &GrayImage, cfg: &Config) -> Result<Prepared> {
    cfg.validate()?;
    let stages = preprocess(img, &cfg.preprocess)?;
    let ridges = detect_ridges(&stages.tracking, cfg.ridge_sigma);
    if ridges.is_empty() {
        return Err(Error::EmptyRidgeSet);
    }
    let cv_img = match cfg.cv.input {
        CvInput::Denoised => &stages.denoised,
        CvInput::Equalized => &stages.equalized,
        CvInput::Blend => &stages.blend,
    };
    let init = percentile_mask(cv_img, cfg.cv.init_percentile);
    let segmentation = chan_vese(cv_img, &cfg.cv, &init)?;
    let contour = match segmentation.mask.phase_means(&stages.denoised) {
        (Some(a), Some(b)) => {
            let level = 0.5 * (a + b);
            let mask = segmentation.mask.refine_boundary(&stages.denoised, level, BOUNDARY_BAND);
            extract_contours_on_field(&mask, &stages.denoised, level)
        }
        _ => VesselContour::default(),
    };
    Ok(Prepared {
        original: img.clone(),
        stages,
        segmentation,
        contour,
        ridges,
    })
}

#[derive(Debug, Clone)]
pub struct AutoAnalysis {
    pub tracks: Vec<CenterlineTrack>,
    pub segments: Vec<VesselSegment>,
    pub findings: Vec<StenosisFinding>,
}

/// Whole-tree tracking, segmentation at cutoffs, quantification and grading.
pub fn analyze_auto(prep: &Prepared, cfg: &Config) -> Result<AutoAnalysis> {
    let tracks = track_tree(prep.tracking(), &prep.ridges, &prep.contour, cfg)?;
    let segments: Vec<VesselSegment> = split_segments(&tracks, cfg.min_segment_points)
        .into_iter()
        .map(|s| quantify(s, &prep.contour, cfg))
        .collect();
    let findings = segments.iter().flat_map(|s| find_stenoses(s, cfg)).collect();
    Ok(AutoAnalysis {
        tracks,
        segments,
        findings,
    })
}
