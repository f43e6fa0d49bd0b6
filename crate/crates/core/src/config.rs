//! Pipeline configuration: one TOML file covering every stage.
//!
//! Defaults match the study's stated values (query window 1990–2022,
//! 70/30 split, 98% detector gate, 64-px width floor, 244→224 crop,
//! two-stage schedule). Endpoint URLs may be overridden through
//! environment variables; everything else comes from the file or CLI
//! flags. Validation runs before any stage does work.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::sha256_hex;
use crate::model::config::ModelConfig;

pub const ENV_SPARQL_ENDPOINT: &str = "FACESPAN_SPARQL_ENDPOINT";
pub const ENV_ENTITY_BASE: &str = "FACESPAN_ENTITY_BASE";
pub const ENV_WIKI_BASE: &str = "FACESPAN_WIKI_BASE";
pub const ENV_COMMONS_BASE: &str = "FACESPAN_COMMONS_BASE";

/// Inclusive death-year query window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub from: i32,
    pub to: i32,
}

impl Default for YearWindow {
    fn default() -> Self {
        YearWindow { from: 1990, to: 2022 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Http,
    /// Replay recorded responses from a directory (tests, reproductions).
    Fixture(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub endpoint: String,
    pub entity_base: String,
    pub wiki_base: String,
    pub commons_base: String,
    pub window: YearWindow,
    pub transport: TransportKind,
    /// Max requests per second per host.
    pub rate_per_host: f64,
    pub max_retries: u32,
    pub workers: usize,
    pub page_size: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            endpoint: "https://query.wikidata.org/sparql".into(),
            entity_base: "https://www.wikidata.org".into(),
            wiki_base: "https://en.wikipedia.org".into(),
            commons_base: "https://commons.wikimedia.org".into(),
            window: YearWindow::default(),
            transport: TransportKind::Http,
            rate_per_host: 2.0,
            max_retries: 4,
            workers: 4,
            page_size: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingConfig {
    /// Cause→manner table; the built-in starter table applies when unset.
    pub cause_map: Option<PathBuf>,
    pub min_age_at_death: i32,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig { cause_map: None, min_age_at_death: 50 }
    }
}

/// Which face detector backs the pipeline. Both satisfy the same output
/// contract (box, five landmarks, confidence).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Frozen detector outputs keyed by image file name (JSON).
    Recorded(PathBuf),
    /// External command invoked per image; prints contract JSON.
    Command(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FacepipeConfig {
    pub detector: DetectorKind,
    pub confidence_threshold: f64,
    pub min_crop_px: u32,
    /// Eye landmarks must sit inside the detection box by this fraction
    /// of box width for the frontal check.
    pub eye_margin_frac: f64,
}

impl Default for FacepipeConfig {
    fn default() -> Self {
        FacepipeConfig {
            detector: DetectorKind::Recorded(PathBuf::from("detections.json")),
            confidence_threshold: 0.98,
            min_crop_px: 64,
            eye_margin_frac: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub split_ratio: f64,
    pub resize_px: usize,
    pub crop_px: usize,
    pub brightness: (f64, f64),
    pub flip_prob: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            split_ratio: 0.7,
            resize_px: 244,
            crop_px: 224,
            brightness: (0.8, 1.2),
            flip_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub rl_bin_years: i32,
    pub age_bin_years: i32,
    pub width_bin_px: i32,
    pub error_hist_bin: f64,
    pub k_extremes: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            rl_bin_years: 5,
            age_bin_years: 5,
            width_bin_px: 50,
            error_hist_bin: 5.0,
            k_extremes: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppsConfig {
    /// Cohort restricted to images taken in or after this year.
    pub cohort_min_image_year: i32,
}

impl Default for AppsConfig {
    fn default() -> Self {
        AppsConfig { cohort_min_image_year: 2000 }
    }
}

/// One pretrained-weights asset: file inside the assets dir plus the
/// hash it is pinned to once converted and verified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub file: String,
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssetsConfig {
    pub dir: PathBuf,
    pub backbones: BTreeMap<String, AssetSpec>,
}

impl Default for AssetsConfig {
    fn default() -> Self {
        let mut backbones = BTreeMap::new();
        for (id, file) in [
            ("vggface_vgg16", "vggface_vgg16.safetensors"),
            ("vggface2_resnet50", "vggface2_resnet50.safetensors"),
            ("facenet", "facenet.safetensors"),
        ] {
            backbones.insert(
                id.to_string(),
                AssetSpec { file: file.to_string(), sha256: None },
            );
        }
        AssetsConfig { dir: PathBuf::from("assets"), backbones }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub artifacts_dir: PathBuf,
    pub ingest: IngestConfig,
    pub labeling: LabelingConfig,
    pub facepipe: FacepipeConfig,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub evaluate: EvaluateConfig,
    pub apps: AppsConfig,
    pub assets: AssetsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            artifacts_dir: PathBuf::from("artifacts"),
            ingest: IngestConfig::default(),
            labeling: LabelingConfig::default(),
            facepipe: FacepipeConfig::default(),
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            evaluate: EvaluateConfig::default(),
            apps: AppsConfig::default(),
            assets: AssetsConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Load from TOML (or defaults when `path` is None), apply endpoint
    /// env overrides, and validate.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg: PipelineConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => PipelineConfig::default(),
        };
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_env(&mut self) {
        if let Ok(v) = std::env::var(ENV_SPARQL_ENDPOINT) {
            self.ingest.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_ENTITY_BASE) {
            self.ingest.entity_base = v;
        }
        if let Ok(v) = std::env::var(ENV_WIKI_BASE) {
            self.ingest.wiki_base = v;
        }
        if let Ok(v) = std::env::var(ENV_COMMONS_BASE) {
            self.ingest.commons_base = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));

        let w = self.ingest.window;
        if w.from > w.to {
            return fail(format!("window from {} after to {}", w.from, w.to));
        }
        if w.from < 1990 || w.to > 2022 {
            return fail(format!(
                "window {}..={} outside the supported death-year range 1990..=2022",
                w.from, w.to
            ));
        }
        if self.ingest.rate_per_host <= 0.0 {
            return fail("ingest.rate_per_host must be > 0".into());
        }
        if self.ingest.page_size == 0 {
            return fail("ingest.page_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.facepipe.confidence_threshold) {
            return fail(format!(
                "facepipe.confidence_threshold must be in [0,1], got {}",
                self.facepipe.confidence_threshold
            ));
        }
        if self.facepipe.min_crop_px == 0 {
            return fail("facepipe.min_crop_px must be >= 1".into());
        }
        if !(0.0..0.5).contains(&self.facepipe.eye_margin_frac) {
            return fail("facepipe.eye_margin_frac must be in [0, 0.5)".into());
        }
        if !(0.0 < self.dataset.split_ratio && self.dataset.split_ratio < 1.0) {
            return fail(format!(
                "dataset.split_ratio must be in (0,1), got {}",
                self.dataset.split_ratio
            ));
        }
        if self.dataset.crop_px == 0 || self.dataset.crop_px > self.dataset.resize_px {
            return fail(format!(
                "dataset.crop_px ({}) must be in 1..=resize_px ({})",
                self.dataset.crop_px, self.dataset.resize_px
            ));
        }
        let (lo, hi) = self.dataset.brightness;
        if !(lo > 0.0 && lo <= hi) {
            return fail(format!("dataset.brightness range ({lo}, {hi}) invalid"));
        }
        if !(0.0..=1.0).contains(&self.dataset.flip_prob) {
            return fail("dataset.flip_prob must be in [0,1]".into());
        }
        self.model.validate().map_err(Error::Config)?;
        if self.labeling.min_age_at_death < 0 {
            return fail("labeling.min_age_at_death must be >= 0".into());
        }
        if self.evaluate.rl_bin_years <= 0
            || self.evaluate.age_bin_years <= 0
            || self.evaluate.width_bin_px <= 0
            || self.evaluate.error_hist_bin <= 0.0
        {
            return fail("evaluate bin widths must be positive".into());
        }
        if self.evaluate.k_extremes == 0 {
            return fail("evaluate.k_extremes must be >= 1".into());
        }
        Ok(())
    }

    /// Stable hash of the full config, logged by every stage.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        sha256_hex(json.as_bytes())
    }

    /// Stage artifact directory (artifacts_dir/<stage>).
    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.artifacts_dir.join(stage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_stated_values() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.ingest.window, YearWindow { from: 1990, to: 2022 });
        assert_eq!(cfg.dataset.split_ratio, 0.7);
        assert_eq!(cfg.dataset.resize_px, 244);
        assert_eq!(cfg.dataset.crop_px, 224);
        assert_eq!(cfg.facepipe.confidence_threshold, 0.98);
        assert_eq!(cfg.facepipe.min_crop_px, 64);
        assert_eq!(cfg.labeling.min_age_at_death, 50);
        assert_eq!(cfg.apps.cohort_min_image_year, 2000);
        assert_eq!(cfg.model.fc_sizes, vec![1024, 1024]);
    }

    #[test]
    fn rejects_out_of_range_values_before_work() {
        let mut cfg = PipelineConfig::default();
        cfg.model.dropout = 1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.dataset.split_ratio = 1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = PipelineConfig::default();
        cfg.ingest.window = YearWindow { from: 1980, to: 2000 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg: PipelineConfig = toml::from_str("seed = 7\n[dataset]\nsplit_ratio = 0.5\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.dataset.split_ratio, 0.5);
        assert_eq!(cfg.dataset.resize_px, 244);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = PipelineConfig::default();
        let b = PipelineConfig::default();
        assert_eq!(a.sha256(), b.sha256());
        let mut c = PipelineConfig::default();
        c.seed = 1;
        assert_ne!(a.sha256(), c.sha256());
    }
}
