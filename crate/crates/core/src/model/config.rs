use serde::{Deserialize, Serialize};

/// Which text encoder backs the label tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextEncoderKind {
    /// Mean of token embeddings.
    #[default]
    MeanPool,
    /// One multi-head self-attention layer with a residual, then mean-pool.
    Attention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub image_height: usize,
    pub image_width: usize,
    /// Output channels of the stride-2 conv blocks; the last one is the
    /// image feature width.
    pub conv_channels: Vec<usize>,
    pub text_encoder: TextEncoderKind,
    pub d_txt: usize,
    pub attention_heads: usize,
    /// Shared embedding width after projection.
    pub d_embed: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_height: 64,
            image_width: 64,
            conv_channels: vec![8, 16, 128],
            text_encoder: TextEncoderKind::MeanPool,
            d_txt: 128,
            attention_heads: 2,
            d_embed: 64,
        }
    }
}

impl ModelConfig {
    pub fn d_img(&self) -> usize {
        self.conv_channels.last().copied().unwrap_or(0)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.image_height == 0 || self.image_width == 0 {
            v.push("ModelConfig.image_height/image_width must be positive".into());
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            v.push("ModelConfig.conv_channels must be a non-empty list of positive widths".into());
        }
        if self.d_txt == 0 {
            v.push("ModelConfig.d_txt must be positive".into());
        }
        if self.d_embed == 0 {
            v.push("ModelConfig.d_embed must be positive".into());
        }
        if self.text_encoder == TextEncoderKind::Attention
            && (self.attention_heads == 0 || !self.d_txt.is_multiple_of(self.attention_heads))
        {
            v.push(format!(
                "ModelConfig.attention_heads must divide d_txt ({}), got {}",
                self.d_txt, self.attention_heads
            ));
        }
        v
    }
}

/// Form of the cross-entropy term of the matching loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// `-(1/n) Σ s·log ŷ`.
    #[default]
    Canonical,
    /// `-(1/n) Σ ŷ·log s`, operands as printed in the source formula.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Switches {
    /// Off: the whole report text is the single label of a study.
    pub use_entity: bool,
    /// Severity and location qualifiers in label text.
    pub use_fg: bool,
    /// Category explanations appended to label text.
    pub use_iki: bool,
    /// Soft similarity targets; off means 0/1 block membership.
    pub use_ssm: bool,
}

impl Default for Switches {
    fn default() -> Self {
        Self {
            use_entity: true,
            use_fg: true,
            use_iki: true,
            use_ssm: true,
        }
    }
}

impl Switches {
    pub fn entity_only() -> Self {
        Self {
            use_entity: true,
            use_fg: false,
            use_iki: false,
            use_ssm: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Floor of the cosine schedule.
    pub lr_min: f64,
    /// First restart period in epochs.
    pub t_0: f64,
    /// Period multiplier after each restart.
    pub t_mult: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub mask_prob: f64,
    pub loss_mode: LossMode,
    pub temperature: f64,
    pub seed: u64,
    pub switches: Switches,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.006,
            lr_min: 0.0,
            t_0: 10.0,
            t_mult: 2.0,
            epochs: 30,
            batch_size: 32,
            mask_prob: 0.15,
            loss_mode: LossMode::Canonical,
            temperature: 1.0,
            seed: 0,
            switches: Switches::default(),
        }
    }
}

impl TrainConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            v.push(format!("TrainConfig.lr must be > 0, got {}", self.lr));
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            v.push(format!("TrainConfig.lr_min must be in [0, lr], got {}", self.lr_min));
        }
        if !(self.t_0 > 0.0 && self.t_0.is_finite()) {
            v.push(format!("TrainConfig.t_0 must be > 0, got {}", self.t_0));
        }
        if !(self.t_mult >= 1.0 && self.t_mult.is_finite()) {
            v.push(format!("TrainConfig.t_mult must be >= 1, got {}", self.t_mult));
        }
        if self.batch_size < 2 {
            v.push(format!("TrainConfig.batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(0.0..=1.0).contains(&self.mask_prob) {
            v.push(format!("TrainConfig.mask_prob must be in [0, 1], got {}", self.mask_prob));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            v.push(format!("TrainConfig.temperature must be > 0, got {}", self.temperature));
        }
        v
    }
}
