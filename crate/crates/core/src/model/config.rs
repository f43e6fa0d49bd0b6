//! Model architecture and training-schedule configuration.

use serde::{Deserialize, Serialize};

/// FC widths the architecture grid allows.
pub const ALLOWED_FC_SIZES: [usize; 6] = [32, 64, 128, 512, 1024, 4096];

/// Output labels for the distribution heads: integer years 0..=100.
pub const NUM_LABELS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneId {
    VggfaceVgg16,
    Vggface2Resnet50,
    Facenet,
    /// Small randomly-initialized CNN for tests and CPU smoke runs; needs
    /// no weights asset.
    Stub,
}

impl BackboneId {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackboneId::VggfaceVgg16 => "vggface_vgg16",
            BackboneId::Vggface2Resnet50 => "vggface2_resnet50",
            BackboneId::Facenet => "facenet",
            BackboneId::Stub => "stub",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Regression,
    ExpectedValue,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Which parameters train during a stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfreezeSpec {
    /// Only the added FC stack and head.
    HeadsOnly,
    /// Heads plus the last N convolutional layers of the backbone, as
    /// resolved by the backbone's ordered layer list.
    LastConvLayers(usize),
    /// Heads plus explicitly named backbone layers.
    Layers(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub unfreeze: UnfreezeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub backbone: BackboneId,
    pub fc_sizes: Vec<usize>,
    pub dropout: f64,
    pub head: HeadKind,
    pub huber_delta: f64,
    pub optimizer: OptimizerKind,
    pub stages: Vec<StageConfig>,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            backbone: BackboneId::VggfaceVgg16,
            fc_sizes: vec![1024, 1024],
            dropout: 0.5,
            head: HeadKind::Regression,
            huber_delta: 1.0,
            optimizer: OptimizerKind::Adam,
            stages: vec![
                StageConfig {
                    epochs: 10,
                    learning_rate: 1e-3,
                    unfreeze: UnfreezeSpec::HeadsOnly,
                },
                StageConfig {
                    epochs: 10,
                    learning_rate: 1e-5,
                    unfreeze: UnfreezeSpec::LastConvLayers(2),
                },
            ],
            batch_size: 64,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.fc_sizes.is_empty() || self.fc_sizes.len() > 3 {
            return Err(format!(
                "fc_sizes must have 1..=3 entries, got {}",
                self.fc_sizes.len()
            ));
        }
        for &size in &self.fc_sizes {
            if !ALLOWED_FC_SIZES.contains(&size) {
                return Err(format!(
                    "fc size {size} not in allowed set {ALLOWED_FC_SIZES:?}"
                ));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout must be in [0,1), got {}", self.dropout));
        }
        if self.huber_delta <= 0.0 {
            return Err(format!("huber_delta must be > 0, got {}", self.huber_delta));
        }
        if self.stages.is_empty() {
            return Err("at least one training stage is required".into());
        }
        let mut prev_lr = f64::INFINITY;
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.epochs == 0 {
                return Err(format!("stage {i} has zero epochs"));
            }
            if stage.learning_rate <= 0.0 {
                return Err(format!("stage {i} learning rate must be > 0"));
            }
            if stage.learning_rate > prev_lr {
                return Err(format!(
                    "stage learning rates must be non-increasing (stage {i}: {} > {})",
                    stage.learning_rate, prev_lr
                ));
            }
            prev_lr = stage.learning_rate;
        }
        if self.batch_size == 0 {
            return Err("batch_size must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(ModelConfig::default().validate().is_ok());
    }

    #[test]
    fn rejects_bad_dropout() {
        let cfg = ModelConfig { dropout: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_increasing_stage_lr() {
        let mut cfg = ModelConfig::default();
        cfg.stages[1].learning_rate = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_fc_size_outside_grid() {
        let cfg = ModelConfig { fc_sizes: vec![77], ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn backbone_serde_names() {
        assert_eq!(
            serde_json::to_string(&BackboneId::VggfaceVgg16).unwrap(),
            r#""vggface_vgg16""#
        );
        assert_eq!(
            serde_json::to_string(&UnfreezeSpec::LastConvLayers(2)).unwrap(),
            r#"{"last_conv_layers":2}"#
        );
    }
}
