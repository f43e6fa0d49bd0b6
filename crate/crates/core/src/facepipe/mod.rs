//! Stage 3: detect, gate, align, and crop faces.
//!
//! Each labeled record's image runs through the detector adapter, the
//! single-face/98%-confidence gate, the frontal-pose check, canonical
//! alignment, and the 64-px width floor. Surviving crops are written as
//! lossless PNGs together with an updated manifest carrying the crop
//! side and provenance.

pub mod align;
pub mod detect;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DetectorKind, FacepipeConfig};
use crate::error::{Error, Result};
use crate::labeling::LabeledRecord;
use crate::labeling::DropEntry;
use crate::manifest::{read_jsonl, require_artifact, write_jsonl, Provenance};
use crate::raster::Raster;

pub use align::{align_and_crop, crop_geometry, width_filter, AlignGeometry, FaceCrop};
pub use detect::{
    detect_faces, frontal_check, gate_detections, CommandDetector, FaceDetection, FaceDetector,
    GateOutcome, RecordedDetector,
};

/// One face-crop training example, as written to the faces manifest.
/// `split` stays empty until the split stage assigns it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFace {
    pub person_id: String,
    /// Crop image path, relative to the faces artifact directory.
    pub crop_path: String,
    pub rl_years: i32,
    pub age_at_image: i32,
    pub age_at_death: i32,
    pub side_px: u32,
    /// Source image the crop came from (ingest-store relative path).
    pub source_image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<crate::dataset::Split>,
}

pub fn build_detector(kind: &DetectorKind) -> Result<Box<dyn FaceDetector>> {
    match kind {
        DetectorKind::Recorded(path) => Ok(Box::new(RecordedDetector::load(path)?)),
        DetectorKind::Command(argv) => Ok(Box::new(CommandDetector::new(argv.clone())?)),
    }
}

/// Process one record end to end. `Ok(None)` carries a drop reason.
fn process_record(
    cfg: &FacepipeConfig,
    detector: &dyn FaceDetector,
    record: &LabeledRecord,
    image_root: &Path,
    crops_dir: &Path,
) -> Result<std::result::Result<LabeledFace, String>> {
    let image_path = image_root.join(&record.image_path);
    let image = match Raster::load(&image_path) {
        Ok(img) => img,
        Err(e) => return Ok(Err(format!("undecodable_image:{e}"))),
    };

    let detections = match detect_faces(detector, &image_path, &image) {
        Ok(d) => d,
        Err(e) if e.is_retriable() => return Err(e),
        Err(e) => return Ok(Err(format!("detector_failed:{e}"))),
    };

    let detection = match gate_detections(&detections, cfg.confidence_threshold as f32) {
        GateOutcome::Accept(d) => d,
        GateOutcome::Reject(reason) => return Ok(Err(format!("gate:{reason}"))),
    };

    if !frontal_check(&detection, cfg.eye_margin_frac as f32) {
        return Ok(Err("not_frontal".into()));
    }

    let crop = match align_and_crop(&image, &detection, &record.person_id) {
        Ok(c) => c,
        Err(e) => return Ok(Err(format!("align:{e}"))),
    };

    if !width_filter(&crop, cfg.min_crop_px) {
        return Ok(Err(format!("crop_too_small:{}px", crop.side_px)));
    }

    let crop_name = format!("{}.png", record.person_id);
    crop.raster.save_png(&crops_dir.join(&crop_name))?;
    Ok(Ok(LabeledFace {
        person_id: record.person_id.clone(),
        crop_path: format!("crops/{crop_name}"),
        rl_years: record.rl_years,
        age_at_image: record.age_at_image,
        age_at_death: record.age_at_death,
        side_px: crop.side_px,
        source_image: record.image_path.clone(),
        split: None,
    }))
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct FacepipeSummary {
    pub input: usize,
    pub cropped: usize,
    pub dropped: usize,
}

/// Run the face stage over a labeled manifest. `manifest_name` selects
/// which labeling output to process ("labeled.jsonl" or "covid.jsonl").
pub fn run_facepipe_on(
    cfg: &FacepipeConfig,
    label_dir: &Path,
    ingest_dir: &Path,
    out_dir: &Path,
    manifest_name: &str,
    out_manifest_name: &str,
) -> Result<FacepipeSummary> {
    let manifest_path = label_dir.join(manifest_name);
    require_artifact(&manifest_path, "labeled manifest", "label")?;
    let detector = build_detector(&cfg.detector)?;

    let mut records: Vec<LabeledRecord> = read_jsonl(&manifest_path)?;
    records.sort_by(|a, b| a.person_id.cmp(&b.person_id));
    let crops_dir = out_dir.join("crops");
    std::fs::create_dir_all(&crops_dir)?;

    let run_one = |record: &LabeledRecord| {
        process_record(cfg, detector.as_ref(), record, ingest_dir, &crops_dir)
            .map(|outcome| (record.person_id.clone(), outcome))
    };

    // Adapters whose handles are not shareable get a sequential map.
    let results: Vec<(String, std::result::Result<LabeledFace, String>)> =
        if detector.shareable() {
            records.par_iter().map(run_one).collect::<Result<_>>()?
        } else {
            records.iter().map(run_one).collect::<Result<_>>()?
        };

    let mut faces = Vec::new();
    let mut drops = Vec::new();
    for (person_id, outcome) in results {
        match outcome {
            Ok(face) => faces.push(face),
            Err(reason) => drops.push(DropEntry {
                person_id,
                stage: "facepipe".into(),
                reason,
            }),
        }
    }
    faces.sort_by(|a, b| a.person_id.cmp(&b.person_id));
    drops.sort_by(|a, b| a.person_id.cmp(&b.person_id));

    write_jsonl(&out_dir.join(out_manifest_name), &faces)?;
    write_jsonl(
        &out_dir.join(format!("drops_{out_manifest_name}")),
        &drops,
    )?;
    Ok(FacepipeSummary {
        input: records.len(),
        cropped: faces.len(),
        dropped: drops.len(),
    })
}

/// Full stage: both the training-eligible manifest and the held-out
/// cohort manifest go through identical face processing.
pub fn run_facepipe(
    cfg: &FacepipeConfig,
    label_dir: &Path,
    ingest_dir: &Path,
    out_dir: &Path,
    config_sha256: &str,
) -> Result<FacepipeSummary> {
    let summary = run_facepipe_on(cfg, label_dir, ingest_dir, out_dir, "labeled.jsonl", "faces.jsonl")?;
    if label_dir.join("covid.jsonl").exists() {
        let cohort =
            run_facepipe_on(cfg, label_dir, ingest_dir, out_dir, "covid.jsonl", "covid_faces.jsonl")?;
        log::info!("facepipe cohort: {} in, {} cropped", cohort.input, cohort.cropped);
    }
    Provenance::new("faces", config_sha256)
        .input("labeled manifest", &label_dir.join("labeled.jsonl"))?
        .output("faces.jsonl")
        .output("crops/")
        .write(out_dir)?;
    log::info!(
        "facepipe: {} in, {} cropped, {} dropped",
        summary.input, summary.cropped, summary.dropped
    );
    Ok(summary)
}
