//! Synthetic portraits and a recorded fixture corpus.
//!
//! Real upstream sources mutate, so pipeline correctness is validated on
//! generated data: portrait images with exactly known eye coordinates,
//! frozen detector outputs, and a recorded transport corpus (SPARQL
//! pages, entity documents, encyclopedia pages, image bodies) that the
//! whole pipeline can run against offline.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::config::IngestConfig;
use crate::error::Result;
use crate::facepipe::FaceDetection;
use crate::ingest::sparql::{percent_encode, person_query};
use crate::ingest::transport::FixtureRecorder;
use crate::manifest::sha256_hex;
use crate::raster::Raster;

/// A generated portrait with its ground-truth detection.
#[derive(Debug, Clone)]
pub struct SynthPortrait {
    pub image: Raster,
    pub detection: FaceDetection,
}

/// Draw a portrait-like grayscale image with eyes exactly at the given
/// coordinates. The face is a light ellipse on a textured background;
/// eyes are dark discs, so their positions can be re-measured from
/// pixels alone.
pub fn portrait(w: usize, h: usize, left_eye: [f32; 2], right_eye: [f32; 2], seed: u64) -> SynthPortrait {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut img = Raster::new(w, h, 1);

    let dx = right_eye[0] - left_eye[0];
    let dy = right_eye[1] - left_eye[1];
    let d = (dx * dx + dy * dy).sqrt().max(1.0);
    let axis = [dx / d, dy / d];
    // "Down" the face, perpendicular to the eye line.
    let down = [-axis[1], axis[0]];
    let mid = [(left_eye[0] + right_eye[0]) / 2.0, (left_eye[1] + right_eye[1]) / 2.0];
    let face_center = [mid[0] + 0.35 * d * down[0], mid[1] + 0.35 * d * down[1]];

    // Smooth background with mild per-image variation.
    let phase: f32 = rng.gen_range(0.0..6.28);
    let base: f32 = rng.gen_range(0.55..0.7);
    for y in 0..h {
        for x in 0..w {
            let v = base
                + 0.08 * ((x as f32 * 0.031 + phase).sin())
                + 0.08 * ((y as f32 * 0.023 - phase).cos());
            img.set(x, y, 0, v.clamp(0.0, 1.0));
        }
    }

    // Face ellipse (radii relative to inter-eye distance).
    let (ra, rb) = (1.1 * d, 1.45 * d);
    for y in 0..h {
        for x in 0..w {
            let px = x as f32 - face_center[0];
            let py = y as f32 - face_center[1];
            let u = (px * axis[0] + py * axis[1]) / ra;
            let v = (px * down[0] + py * down[1]) / rb;
            let r2 = u * u + v * v;
            if r2 < 1.0 {
                let cur = img.get(x, y, 0);
                img.set(x, y, 0, (cur + 0.22 * (1.0 - r2)).clamp(0.0, 1.0));
            }
        }
    }

    let nose = [mid[0] + 0.55 * d * down[0], mid[1] + 0.55 * d * down[1]];
    let mouth_c = [mid[0] + 0.9 * d * down[0], mid[1] + 0.9 * d * down[1]];
    let mouth_left = [mouth_c[0] - 0.3 * d * axis[0], mouth_c[1] - 0.3 * d * axis[1]];
    let mouth_right = [mouth_c[0] + 0.3 * d * axis[0], mouth_c[1] + 0.3 * d * axis[1]];

    let eye_r = (0.07 * d).max(1.5);
    for (pos, r, dark) in [
        (left_eye, eye_r, 0.05),
        (right_eye, eye_r, 0.05),
        (nose, eye_r * 0.6, 0.35),
        (mouth_left, eye_r * 0.5, 0.3),
        (mouth_right, eye_r * 0.5, 0.3),
    ] {
        disc(&mut img, pos, r, dark);
    }

    let xs: Vec<f32> = vec![left_eye[0], right_eye[0], nose[0], mouth_left[0], mouth_right[0]];
    let ys: Vec<f32> = vec![left_eye[1], right_eye[1], nose[1], mouth_left[1], mouth_right[1]];
    let min_x = xs.iter().cloned().fold(f32::INFINITY, f32::min) - 0.55 * d;
    let max_x = xs.iter().cloned().fold(f32::NEG_INFINITY, f32::max) + 0.55 * d;
    let min_y = ys.iter().cloned().fold(f32::INFINITY, f32::min) - 0.55 * d;
    let max_y = ys.iter().cloned().fold(f32::NEG_INFINITY, f32::max) + 0.55 * d;

    SynthPortrait {
        image: img,
        detection: FaceDetection {
            bbox: [min_x, min_y, max_x - min_x, max_y - min_y],
            left_eye,
            right_eye,
            nose,
            mouth_left,
            mouth_right,
            confidence: 0.995,
        },
    }
}

fn disc(img: &mut Raster, center: [f32; 2], radius: f32, value: f32) {
    let x0 = (center[0] - radius - 1.0).floor().max(0.0) as usize;
    let x1 = ((center[0] + radius + 1.0).ceil() as usize).min(img.width.saturating_sub(1));
    let y0 = (center[1] - radius - 1.0).floor().max(0.0) as usize;
    let y1 = ((center[1] + radius + 1.0).ceil() as usize).min(img.height.saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f32 - center[0];
            let dy = y as f32 - center[1];
            let dist = (dx * dx + dy * dy).sqrt();
            if dist <= radius {
                img.set(x, y, 0, value);
            } else if dist <= radius + 1.0 {
                // Soft 1px rim for sub-pixel centroid accuracy.
                let t = dist - radius;
                let cur = img.get(x, y, 0);
                img.set(x, y, 0, value * (1.0 - t) + cur * t);
            }
        }
    }
}

/// Darkness-weighted centroid inside a window, for re-measuring where a
/// dark feature (an eye) actually landed.
pub fn dark_centroid(img: &Raster, near: [f32; 2], radius: f32) -> [f32; 2] {
    let x0 = (near[0] - radius).floor().max(0.0) as usize;
    let x1 = ((near[0] + radius).ceil() as usize).min(img.width - 1);
    let y0 = (near[1] - radius).floor().max(0.0) as usize;
    let y1 = ((near[1] + radius).ceil() as usize).min(img.height - 1);
    let mut sum_w = 0.0f64;
    let mut sum_x = 0.0f64;
    let mut sum_y = 0.0f64;
    // Only strongly dark pixels participate, so the face texture does
    // not bias the centroid.
    for y in y0..=y1 {
        for x in x0..=x1 {
            let v = img.get(x, y, 0);
            let w = ((0.5 - v).max(0.0)) as f64;
            sum_w += w;
            sum_x += w * x as f64;
            sum_y += w * y as f64;
        }
    }
    if sum_w == 0.0 {
        return near;
    }
    [(sum_x / sum_w) as f32, (sum_y / sum_w) as f32]
}

/// Everything a recorded corpus run needs.
#[derive(Debug)]
pub struct FixtureCorpus {
    pub fixture_dir: PathBuf,
    pub detections_path: PathBuf,
    pub persons: Vec<CorpusPerson>,
}

#[derive(Debug, Clone)]
pub struct CorpusPerson {
    pub qid: String,
    pub name: String,
    pub birth_year: i32,
    pub death_year: i32,
    pub image_year: Option<i32>,
    pub kind: CorpusKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    /// Clean record: survives every stage.
    Good,
    /// Year via caption parse instead of the graph qualifier.
    GoodCaption,
    /// Pandemic cause; diverted to the held-out cohort.
    Covid,
    /// Unnatural manner; dropped at labeling.
    UnnaturalManner,
    /// Two faces in the image; dropped at the gate.
    TwoFaces,
    /// Detector confidence below the gate.
    LowConfidence,
    /// Face too small for the width floor.
    TinyFace,
    /// No usable image year (ambiguous caption).
    AmbiguousCaption,
    /// Died before 50.
    YoungDeath,
}

/// Counts per kind for a generated corpus.
#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub good: usize,
    pub good_caption: usize,
    pub covid: usize,
    pub unnatural: usize,
    pub two_faces: usize,
    pub low_confidence: usize,
    pub tiny_face: usize,
    pub ambiguous_caption: usize,
    pub young_death: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn small() -> Self {
        CorpusSpec {
            good: 12,
            good_caption: 6,
            covid: 4,
            unnatural: 3,
            two_faces: 2,
            low_confidence: 2,
            tiny_face: 2,
            ambiguous_caption: 2,
            young_death: 2,
            seed: 7,
        }
    }
}

fn sparql_row(p: &CorpusPerson, manner: Option<(&str, &str)>, cause: Option<&str>) -> String {
    let mut fields = vec![
        format!(r#""person": {{"type":"uri","value":"http://graph.test/entity/{}"}}"#, p.qid),
        format!(r#""personLabel": {{"type":"literal","value":"{}"}}"#, p.name),
        format!(r#""birth": {{"type":"literal","value":"+{:04}-01-01T00:00:00Z"}}"#, p.birth_year),
        r#""birthPrecision": {"type":"literal","value":"11"}"#.to_string(),
        format!(r#""death": {{"type":"literal","value":"+{:04}-06-15T00:00:00Z"}}"#, p.death_year),
        r#""deathPrecision": {"type":"literal","value":"11"}"#.to_string(),
    ];
    if let Some((qid, label)) = manner {
        fields.push(format!(r#""manner": {{"type":"uri","value":"http://graph.test/entity/{qid}"}}"#));
        fields.push(format!(r#""mannerLabel": {{"type":"literal","value":"{label}"}}"#));
    }
    if let Some(c) = cause {
        fields.push(format!(r#""causeLabel": {{"type":"literal","value":"{c}"}}"#));
    }
    format!("{{ {} }}", fields.join(", "))
}

fn entity_doc(qid: &str, image_file: Option<&str>, pit_year: Option<i32>, enwiki: Option<&str>) -> String {
    let mut claims = String::new();
    if let Some(file) = image_file {
        let quals = match pit_year {
            Some(y) => format!(
                r#", "qualifiers": {{ "P585": [ {{ "datavalue": {{ "type": "time", "value": {{ "time": "+{y:04}-03-01T00:00:00Z", "precision": 11 }} }} }} ] }}"#
            ),
            None => String::new(),
        };
        claims = format!(
            r#""P18": [ {{ "mainsnak": {{ "datavalue": {{ "type": "string", "value": "{file}" }} }} }}{quals} ]"#
        );
    }
    let sitelinks = match enwiki {
        Some(title) => format!(r#""enwiki": {{ "site": "enwiki", "title": "{title}" }}"#),
        None => String::new(),
    };
    format!(
        r#"{{ "entities": {{ "{qid}": {{ "id": "{qid}", "claims": {{ {claims} }}, "sitelinks": {{ {sitelinks} }} }} }} }}"#
    )
}

fn wiki_page(caption: &str, img_src: &str) -> String {
    format!(
        r#"<html><body>
<img src="/static/logo.png" alt="site logo">
<table class="infobox biography vcard"><tbody><tr><td>
  <img src="{img_src}" width="220">
  <div class="infobox-caption">{caption}</div>
</td></tr></tbody></table>
<p>Article text.</p>
</body></html>"#
    )
}

/// Generate a full recorded corpus under `root` for the given ingest
/// config (endpoint/base URLs and page size must match the config the
/// pipeline will run with).
pub fn build_fixture_corpus(root: &Path, ingest: &IngestConfig, spec: &CorpusSpec) -> Result<FixtureCorpus> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let fixture_dir = root.join("recorded");
    let mut rec = FixtureRecorder::create(&fixture_dir)?;
    let mut detections: HashMap<String, Vec<FaceDetection>> = HashMap::new();
    let mut persons: Vec<CorpusPerson> = Vec::new();
    let mut rows: Vec<String> = Vec::new();

    let kinds: Vec<CorpusKind> = [
        (CorpusKind::Good, spec.good),
        (CorpusKind::GoodCaption, spec.good_caption),
        (CorpusKind::Covid, spec.covid),
        (CorpusKind::UnnaturalManner, spec.unnatural),
        (CorpusKind::TwoFaces, spec.two_faces),
        (CorpusKind::LowConfidence, spec.low_confidence),
        (CorpusKind::TinyFace, spec.tiny_face),
        (CorpusKind::AmbiguousCaption, spec.ambiguous_caption),
        (CorpusKind::YoungDeath, spec.young_death),
    ]
    .iter()
    .flat_map(|&(k, n)| std::iter::repeat(k).take(n))
    .collect();

    for (i, &kind) in kinds.iter().enumerate() {
        let qid = format!("Q{}", 1000 + i);
        let name = format!("Person {}", 1000 + i);
        let title = name.replace(' ', "_");

        let (birth, death) = match kind {
            CorpusKind::YoungDeath => {
                let death = rng.gen_range(1995..=2019);
                (death - rng.gen_range(30..45), death)
            }
            _ => {
                let death = rng.gen_range(1995..=2019);
                (death - rng.gen_range(55..90), death)
            }
        };
        let image_year = birth.max(death - rng.gen_range(0..35));

        // Portrait: eye geometry varies per person.
        let (w, h) = (320, 320);
        let eye_y = rng.gen_range(120.0..150.0);
        let eye_d: f32 = match kind {
            CorpusKind::TinyFace => rng.gen_range(10.0..16.0),
            _ => rng.gen_range(40.0..70.0),
        };
        let cx = rng.gen_range(140.0..180.0);
        let left = [cx - eye_d / 2.0, eye_y];
        let right = [cx + eye_d / 2.0, eye_y];
        let p = portrait(w, h, left, right, spec.seed ^ (i as u64) << 3);
        let png = p.image.png_bytes()?;
        let stored_name = format!("{}.png", sha256_hex(&png));

        let mut dets = vec![p.detection.clone()];
        match kind {
            CorpusKind::TwoFaces => {
                let mut second = p.detection.clone();
                for pt in [
                    &mut second.left_eye,
                    &mut second.right_eye,
                    &mut second.nose,
                    &mut second.mouth_left,
                    &mut second.mouth_right,
                ] {
                    pt[0] = (pt[0] - 90.0).max(1.0);
                }
                second.bbox[0] = (second.bbox[0] - 90.0).max(0.0);
                dets.push(second);
            }
            CorpusKind::LowConfidence => dets[0].confidence = 0.91,
            _ => {}
        }
        detections.insert(stored_name, dets);

        // Graph-side records.
        let (manner, cause): (Option<(&str, &str)>, Option<&str>) = match kind {
            CorpusKind::Covid => (None, Some("COVID-19")),
            CorpusKind::UnnaturalManner => (Some(("Q149086", "homicide")), None),
            _ => {
                if i % 2 == 0 {
                    (Some(("Q3739104", "natural causes")), None)
                } else {
                    (None, Some("pneumonia"))
                }
            }
        };
        let person = CorpusPerson {
            qid: qid.clone(),
            name: name.clone(),
            birth_year: birth,
            death_year: death,
            image_year: match kind {
                CorpusKind::AmbiguousCaption => None,
                _ => Some(image_year),
            },
            kind,
        };
        rows.push(sparql_row(&person, manner, cause));

        // Entity document + image plumbing. Caption-path persons carry
        // the image on their encyclopedia page instead of the graph.
        let via_caption = matches!(kind, CorpusKind::GoodCaption | CorpusKind::AmbiguousCaption);
        let image_url;
        if via_caption {
            let doc = entity_doc(&qid, None, None, Some(&title));
            rec.record(
                &format!("{}/wiki/Special:EntityData/{qid}.json", ingest.entity_base),
                200,
                Some("application/json"),
                doc.as_bytes(),
            )?;
            image_url = format!("https://media.test/{qid}.png");
            let caption = match kind {
                CorpusKind::AmbiguousCaption => {
                    format!("{name} between {} and {}", image_year, image_year + 2)
                }
                _ => format!("{name} in {image_year}"),
            };
            let page = wiki_page(&caption, &image_url);
            rec.record(
                &format!("{}/wiki/{}", ingest.wiki_base, percent_encode(&title)),
                200,
                Some("text/html"),
                page.as_bytes(),
            )?;
        } else {
            let file = format!("{qid} portrait.png");
            let doc = entity_doc(&qid, Some(&file), Some(image_year), Some(&title));
            rec.record(
                &format!("{}/wiki/Special:EntityData/{qid}.json", ingest.entity_base),
                200,
                Some("application/json"),
                doc.as_bytes(),
            )?;
            image_url = format!(
                "{}/wiki/Special:FilePath/{}",
                ingest.commons_base,
                percent_encode(&file.replace(' ', "_"))
            );
        }
        rec.record(&image_url, 200, Some("image/png"), &png)?;
        persons.push(person);
    }

    // One SPARQL page holds the whole corpus (page size must exceed it).
    let results = format!(
        r#"{{ "head": {{"vars": []}}, "results": {{ "bindings": [ {} ] }} }}"#,
        rows.join(", ")
    );
    let query = person_query(ingest.window, ingest.page_size, 0);
    let url = format!("{}?format=json&query={}", ingest.endpoint, percent_encode(&query));
    rec.record(&url, 200, Some("application/sparql-results+json"), results.as_bytes())?;
    let fixture_dir = rec.finish()?;

    let detections_path = root.join("detections.json");
    std::fs::write(&detections_path, serde_json::to_string_pretty(&detections)?)?;

    Ok(FixtureCorpus {
        fixture_dir,
        detections_path,
        persons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn portrait_eyes_are_measurable() {
        let p = portrait(320, 320, [130.0, 140.0], [186.0, 140.0], 3);
        let got_l = dark_centroid(&p.image, [130.0, 140.0], 6.0);
        let got_r = dark_centroid(&p.image, [186.0, 140.0], 6.0);
        assert!((got_l[0] - 130.0).abs() < 0.8, "{got_l:?}");
        assert!((got_l[1] - 140.0).abs() < 0.8);
        assert!((got_r[0] - 186.0).abs() < 0.8, "{got_r:?}");
    }

    #[test]
    fn portrait_detection_passes_frontal_rules() {
        let p = portrait(320, 320, [130.0, 140.0], [186.0, 140.0], 5);
        assert!(p.detection.validate(320, 320).is_ok());
        assert!(crate::facepipe::frontal_check(&p.detection, 0.05));
    }

    #[test]
    fn corpus_builder_produces_consistent_fixture() {
        let tmp = tempfile::tempdir().unwrap();
        let ingest = IngestConfig {
            endpoint: "https://sparql.test/sparql".into(),
            entity_base: "https://graph.test".into(),
            wiki_base: "https://wiki.test".into(),
            commons_base: "https://commons.test".into(),
            page_size: 500,
            ..Default::default()
        };
        let corpus = build_fixture_corpus(tmp.path(), &ingest, &CorpusSpec::small()).unwrap();
        assert!(corpus.fixture_dir.join("index.json").exists());
        assert!(corpus.detections_path.exists());
        let n: usize = [12, 6, 4, 3, 2, 2, 2, 2, 2].iter().sum();
        assert_eq!(corpus.persons.len(), n);
    }
}
