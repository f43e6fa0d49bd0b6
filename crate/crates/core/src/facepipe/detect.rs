//! Face detector adapters and the confidence gate.
//!
//! Detection itself is pluggable: anything that can produce a box, five
//! landmarks, and a confidence in [0,1] can back the pipeline. Two
//! adapters ship here — one replaying frozen detector outputs from JSON
//! (reference-detector runs, test fixtures), one shelling out to an
//! external detector command per image.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// One detected face: box, five landmarks, confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceDetection {
    /// (x, y, w, h) in pixels.
    #[serde(rename = "box")]
    pub bbox: [f32; 4],
    pub left_eye: [f32; 2],
    pub right_eye: [f32; 2],
    pub nose: [f32; 2],
    pub mouth_left: [f32; 2],
    pub mouth_right: [f32; 2],
    pub confidence: f32,
}

impl FaceDetection {
    pub fn landmarks(&self) -> [[f32; 2]; 5] {
        [self.left_eye, self.right_eye, self.nose, self.mouth_left, self.mouth_right]
    }

    /// Contract check: confidence in [0,1], landmarks inside the frame.
    pub fn validate(&self, width: usize, height: usize) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0,1]", self.confidence));
        }
        for [x, y] in self.landmarks() {
            if x < 0.0 || y < 0.0 || x >= width as f32 || y >= height as f32 {
                return Err(format!("landmark ({x}, {y}) outside {width}x{height} frame"));
            }
        }
        Ok(())
    }
}

/// Adapter contract for detectors.
pub trait FaceDetector: Send + Sync {
    fn detect(&self, image_path: &Path, image: &Raster) -> Result<Vec<FaceDetection>>;

    /// Whether one handle may be shared across worker threads. Adapters
    /// wrapping non-reentrant native handles return false and the
    /// pipeline degrades to a sequential map.
    fn shareable(&self) -> bool {
        true
    }
}

/// Decode an image and run the detector, validating the output contract.
pub fn detect_faces(
    detector: &dyn FaceDetector,
    image_path: &Path,
    image: &Raster,
) -> Result<Vec<FaceDetection>> {
    let detections = detector.detect(image_path, image)?;
    for d in &detections {
        d.validate(image.width, image.height)
            .map_err(|e| Error::InvalidInput(format!("detector contract violation: {e}")))?;
    }
    Ok(detections)
}

/// Gate outcome for one image.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOutcome {
    Accept(FaceDetection),
    Reject(String),
}

/// Accept iff exactly one detection with confidence at or above the
/// threshold.
pub fn gate_detections(detections: &[FaceDetection], threshold: f32) -> GateOutcome {
    match detections {
        [] => GateOutcome::Reject("no face".into()),
        [single] => {
            if single.confidence >= threshold {
                GateOutcome::Accept(single.clone())
            } else {
                GateOutcome::Reject(format!(
                    "low confidence: {:.4} < {threshold}",
                    single.confidence
                ))
            }
        }
        many => GateOutcome::Reject(format!("multiple faces: {}", many.len())),
    }
}

/// Frontal-pose heuristic: both eyes strictly inside the detection box
/// with a margin of `margin_frac` of box width, and the nose x strictly
/// between the eyes after in-plane alignment.
pub fn frontal_check(det: &FaceDetection, margin_frac: f32) -> bool {
    let [bx, by, bw, bh] = det.bbox;
    let margin = margin_frac * bw;
    for eye in [det.left_eye, det.right_eye] {
        let [x, y] = eye;
        if !(x > bx + margin && x < bx + bw - margin && y > by + margin && y < by + bh - margin) {
            return false;
        }
    }

    // Rotate landmarks so the eye line is horizontal, then require the
    // nose to sit between the eyes.
    let [lx, ly] = det.left_eye;
    let [rx, ry] = det.right_eye;
    let theta = (ry - ly).atan2(rx - lx);
    let (sin, cos) = theta.sin_cos();
    let mid = [(lx + rx) / 2.0, (ly + ry) / 2.0];
    let unrotate_x = |p: [f32; 2]| {
        let dx = p[0] - mid[0];
        let dy = p[1] - mid[1];
        // x component of R(-theta) * d
        mid[0] + cos * dx + sin * dy
    };
    let exl = unrotate_x(det.left_eye);
    let exr = unrotate_x(det.right_eye);
    let nx = unrotate_x(det.nose);
    let (lo, hi) = if exl <= exr { (exl, exr) } else { (exr, exl) };
    nx > lo && nx < hi
}

/// Replays frozen detector outputs keyed by image file name.
///
/// The JSON maps file name -> list of detections; an explicit empty list
/// means the reference detector found no face, a missing key means the
/// detector was never run on that file and is an error.
pub struct RecordedDetector {
    path: PathBuf,
    by_file: HashMap<String, Vec<FaceDetection>>,
}

impl RecordedDetector {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("recorded detections {}: {e}", path.display()))
        })?;
        let by_file = serde_json::from_str(&text)?;
        Ok(RecordedDetector { path: path.to_path_buf(), by_file })
    }
}

impl FaceDetector for RecordedDetector {
    fn detect(&self, image_path: &Path, _image: &Raster) -> Result<Vec<FaceDetection>> {
        let name = image_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.by_file.get(&name).cloned().ok_or_else(|| {
            Error::InvalidInput(format!(
                "no recorded detection for {name} in {}",
                self.path.display()
            ))
        })
    }
}

/// Runs an external detector command once per image. The image path is
/// appended to the argv; the command prints a JSON list of detections on
/// stdout.
pub struct CommandDetector {
    argv: Vec<String>,
}

impl CommandDetector {
    pub fn new(argv: Vec<String>) -> Result<Self> {
        if argv.is_empty() {
            return Err(Error::Config("detector command is empty".into()));
        }
        Ok(CommandDetector { argv })
    }
}

impl FaceDetector for CommandDetector {
    fn detect(&self, image_path: &Path, _image: &Raster) -> Result<Vec<FaceDetection>> {
        let output = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .arg(image_path)
            .output()
            .map_err(|e| Error::InvalidInput(format!("detector command failed to start: {e}")))?;
        if !output.status.success() {
            return Err(Error::InvalidInput(format!(
                "detector command exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr)
            )));
        }
        let detections = serde_json::from_slice(&output.stdout)?;
        Ok(detections)
    }
}

#[cfg(test)]
pub(crate) fn simple_detection(
    left: [f32; 2],
    right: [f32; 2],
    confidence: f32,
) -> FaceDetection {
    let cx = (left[0] + right[0]) / 2.0;
    let cy = (left[1] + right[1]) / 2.0;
    let d = ((right[0] - left[0]).powi(2) + (right[1] - left[1]).powi(2)).sqrt();
    FaceDetection {
        bbox: [cx - d, cy - d, 2.0 * d, 2.5 * d],
        left_eye: left,
        right_eye: right,
        nose: [cx, cy + 0.4 * d],
        mouth_left: [cx - 0.3 * d, cy + 0.8 * d],
        mouth_right: [cx + 0.3 * d, cy + 0.8 * d],
        confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(confidence: f32) -> FaceDetection {
        simple_detection([100.0, 100.0], [128.0, 100.0], confidence)
    }

    #[test]
    fn gate_accepts_single_confident_detection() {
        let d = det(0.99);
        assert_eq!(gate_detections(&[d.clone()], 0.98), GateOutcome::Accept(d));
    }

    #[test]
    fn gate_threshold_is_inclusive() {
        assert!(matches!(gate_detections(&[det(0.98)], 0.98), GateOutcome::Accept(_)));
    }

    #[test]
    fn gate_rejects_low_confidence() {
        match gate_detections(&[det(0.97)], 0.98) {
            GateOutcome::Reject(reason) => assert!(reason.contains("low confidence")),
            other => panic!("expected reject, got {other:?}"),
        }
    }

    #[test]
    fn gate_rejects_multiple_faces() {
        match gate_detections(&[det(0.99), det(0.99)], 0.98) {
            GateOutcome::Reject(reason) => assert!(reason.contains("multiple faces")),
            other => panic!("expected reject, got {other:?}"),
        }
    }

    #[test]
    fn gate_rejects_empty() {
        assert_eq!(gate_detections(&[], 0.98), GateOutcome::Reject("no face".into()));
    }

    #[test]
    fn frontal_pass_for_centered_face() {
        assert!(frontal_check(&det(0.99), 0.05));
    }

    #[test]
    fn frontal_fails_when_nose_outside_eyes() {
        let mut d = det(0.99);
        d.nose = [d.left_eye[0] - 10.0, d.nose[1]];
        assert!(!frontal_check(&d, 0.05));
    }

    #[test]
    fn frontal_fails_for_eye_on_box_edge() {
        let mut d = det(0.99);
        d.left_eye = [d.bbox[0], d.left_eye[1]];
        assert!(!frontal_check(&d, 0.05));
    }

    #[test]
    fn frontal_is_rotation_invariant_for_nose_rule() {
        // A face rotated 90 degrees in-plane: nose still between the eyes
        // along the (rotated) eye axis.
        let d = FaceDetection {
            bbox: [0.0, 0.0, 60.0, 60.0],
            left_eye: [30.0, 10.0],
            right_eye: [30.0, 50.0],
            nose: [38.0, 30.0],
            mouth_left: [46.0, 20.0],
            mouth_right: [46.0, 40.0],
            confidence: 0.99,
        };
        assert!(frontal_check(&d, 0.05));
    }

    #[test]
    fn contract_validation_catches_bad_outputs() {
        let mut d = det(1.2);
        assert!(d.validate(300, 300).is_err());
        d.confidence = 0.99;
        assert!(d.validate(300, 300).is_ok());
        assert!(d.validate(90, 90).is_err()); // landmarks outside frame
    }

    #[test]
    fn recorded_detector_replays_and_errors_on_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.json");
        let map: HashMap<String, Vec<FaceDetection>> = [
            ("a.png".to_string(), vec![det(0.99)]),
            ("blank.png".to_string(), vec![]),
        ]
        .into();
        std::fs::write(&path, serde_json::to_string(&map).unwrap()).unwrap();
        let detector = RecordedDetector::load(&path).unwrap();
        let img = Raster::new(300, 300, 1);
        assert_eq!(detector.detect(Path::new("x/a.png"), &img).unwrap().len(), 1);
        assert_eq!(detector.detect(Path::new("blank.png"), &img).unwrap().len(), 0);
        assert!(detector.detect(Path::new("never.png"), &img).is_err());
    }
}
