//! Canonical face alignment and cropping.
//!
//! The crop is a square whose side is the inter-eye distance divided by
//! 0.28, rotated so the eye line is horizontal, with the eyes landing at
//! (0.36·s, 0.43·s) and (0.64·s, 0.43·s). Regions falling outside the
//! source frame are filled by edge replication (the sampler clamps).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facepipe::detect::FaceDetection;
use crate::raster::Raster;

/// Horizontal fraction of the crop spanned by the eyes.
pub const EYE_SPAN_FRAC: f32 = 0.28;
/// Left eye x as a fraction of the side.
pub const EYE_LEFT_X_FRAC: f32 = 0.36;
/// Right eye x as a fraction of the side.
pub const EYE_RIGHT_X_FRAC: f32 = 0.64;
/// Eye row as a fraction of the side, from the top.
pub const EYE_Y_FRAC: f32 = 0.43;

/// A square aligned face crop.
#[derive(Debug, Clone)]
pub struct FaceCrop {
    pub raster: Raster,
    pub side_px: u32,
    pub person_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignGeometry {
    pub side_px: u32,
    /// Rotation applied, radians (the eye-line angle in the source).
    pub rotation: f32,
    /// Eye midpoint in the source frame.
    pub eye_midpoint: [f32; 2],
    pub inter_eye_px: f32,
}

/// Compute the crop geometry for a detection.
pub fn crop_geometry(det: &FaceDetection) -> Result<AlignGeometry> {
    let [lx, ly] = det.left_eye;
    let [rx, ry] = det.right_eye;
    let dx = rx - lx;
    let dy = ry - ly;
    let inter_eye = (dx * dx + dy * dy).sqrt();
    if inter_eye < 1e-6 {
        return Err(Error::InvalidInput("degenerate landmarks: eyes coincident".into()));
    }
    let side = (inter_eye / EYE_SPAN_FRAC).round().max(1.0);
    Ok(AlignGeometry {
        side_px: side as u32,
        rotation: dy.atan2(dx),
        eye_midpoint: [(lx + rx) / 2.0, (ly + ry) / 2.0],
        inter_eye_px: inter_eye,
    })
}

/// Rotate about the eye midpoint so the inter-eye line is horizontal and
/// resample the canonical square. Works for any channel count.
pub fn align_and_crop(image: &Raster, det: &FaceDetection, person_id: &str) -> Result<FaceCrop> {
    let geom = crop_geometry(det)?;
    let side = geom.side_px as usize;
    let side_f = geom.side_px as f32;

    // Map output pixels back into the source: scale by the true
    // (unrounded) side over the integer side, rotate by the eye-line
    // angle, translate to the eye midpoint. With this map the eyes land
    // exactly on (0.36·s, 0.43·s) and (0.64·s, 0.43·s).
    let scale = (geom.inter_eye_px / EYE_SPAN_FRAC) / side_f;
    let (sin, cos) = geom.rotation.sin_cos();
    let anchor = [0.5 * side_f, EYE_Y_FRAC * side_f];
    let [mx, my] = geom.eye_midpoint;

    let mut out = Raster::new(side, side, image.channels);
    for v in 0..side {
        for u in 0..side {
            let px = (u as f32 - anchor[0]) * scale;
            let py = (v as f32 - anchor[1]) * scale;
            let sx = mx + cos * px - sin * py;
            let sy = my + sin * px + cos * py;
            for ch in 0..image.channels {
                out.set(u, v, ch, image.sample(sx, sy, ch));
            }
        }
    }
    Ok(FaceCrop {
        raster: out,
        side_px: geom.side_px,
        person_id: person_id.to_string(),
    })
}

/// Keep crops at or above the minimum side.
pub fn width_filter(crop: &FaceCrop, min_px: u32) -> bool {
    crop.side_px >= min_px
}
