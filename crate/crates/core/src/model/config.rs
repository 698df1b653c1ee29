use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const DEFAULT_CLASSES: [&str; 9] = [
    "AF", "IAVB", "LBBB", "PAC", "PVC", "RBBB", "SNR", "STD", "STE",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBlockConfig {
    /// Output channels of the two stacked convolutions.
    pub channels: [usize; 2],
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub enabled: bool,
    /// Either the conv feature width (per-channel gate) or 1 (one gate per
    /// time step, broadcast across channels).
    pub out_channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmConfig {
    pub enabled: bool,
    /// Hidden size per direction for each stacked layer.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub width: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_leads: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub class_names: Vec<String>,
    pub conv_blocks: Vec<ConvBlockConfig>,
    pub attention: AttentionConfig,
    pub bilstm: BiLstmConfig,
    pub head: HeadConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::standard(12)
    }
}

impl ModelConfig {
    /// The reference architecture for `leads` input leads and nine classes.
    pub fn standard(leads: usize) -> Self {
        let block = |a: usize, b: usize, kernel: usize| ConvBlockConfig {
            channels: [a, b],
            kernel,
            pool: 2,
            dropout: 0.3,
        };
        Self {
            input_leads: leads,
            num_classes: DEFAULT_CLASSES.len(),
            class_names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
            conv_blocks: vec![block(64, 64, 7), block(128, 128, 5), block(256, 256, 3)],
            attention: AttentionConfig {
                enabled: true,
                out_channels: 256,
            },
            bilstm: BiLstmConfig {
                enabled: true,
                hidden: vec![96, 64],
            },
            head: HeadConfig {
                width: 64,
                dropout: 0.5,
            },
        }
    }

    /// Same topology at desk scale, for tests and quick experiments.
    pub fn tiny(leads: usize, num_classes: usize) -> Self {
        let block = |a: usize, b: usize, kernel: usize| ConvBlockConfig {
            channels: [a, b],
            kernel,
            pool: 2,
            dropout: 0.1,
        };
        Self {
            input_leads: leads,
            num_classes,
            class_names: (0..num_classes).map(|i| format!("C{i}")).collect(),
            conv_blocks: vec![block(8, 8, 7), block(16, 16, 5), block(16, 16, 3)],
            attention: AttentionConfig {
                enabled: true,
                out_channels: 16,
            },
            bilstm: BiLstmConfig {
                enabled: true,
                hidden: vec![8, 8],
            },
            head: HeadConfig {
                width: 16,
                dropout: 0.1,
            },
        }
    }

    pub fn with_class_names(mut self, names: &[String]) -> Self {
        self.num_classes = names.len();
        self.class_names = names.to_vec();
        self
    }

    /// Channel width after the convolutional stack.
    pub fn conv_width(&self) -> usize {
        self.conv_blocks.last().map(|b| b.channels[1]).unwrap_or(0)
    }

    /// Total temporal downsampling factor of the convolutional stack.
    pub fn pool_factor(&self) -> usize {
        self.conv_blocks.iter().map(|b| b.pool).product()
    }

    /// Width of the vector entering the classifier head.
    pub fn pooled_width(&self) -> usize {
        if self.bilstm.enabled {
            2 * self.bilstm.hidden.last().copied().unwrap_or(0)
        } else {
            self.conv_width()
        }
    }

    pub fn class_name(&self, i: usize) -> String {
        self.class_names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("class{i}"))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.input_leads == 0 {
            return bad("input_leads must be positive".into());
        }
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if !self.class_names.is_empty() && self.class_names.len() != self.num_classes {
            return bad(format!(
                "{} class names for {} classes",
                self.class_names.len(),
                self.num_classes
            ));
        }
        if self.conv_blocks.len() != 3 {
            return bad(format!(
                "expected 3 convolutional blocks, got {}",
                self.conv_blocks.len()
            ));
        }
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.channels.contains(&0) || b.kernel == 0 || b.pool == 0 {
                return bad(format!("block{} has a zero width, kernel or pool", i + 1));
            }
            if !(0.0..1.0).contains(&b.dropout) {
                return bad(format!("block{} dropout {} not in [0, 1)", i + 1, b.dropout));
            }
        }
        if self.attention.enabled
            && self.attention.out_channels != self.conv_width()
            && self.attention.out_channels != 1
        {
            return bad(format!(
                "attention out_channels must be {} or 1, got {}",
                self.conv_width(),
                self.attention.out_channels
            ));
        }
        if self.bilstm.enabled && (self.bilstm.hidden.is_empty() || self.bilstm.hidden.contains(&0))
        {
            return bad("bilstm enabled with an empty or zero hidden size".into());
        }
        if self.head.width == 0 || !(0.0..1.0).contains(&self.head.dropout) {
            return bad("head width must be positive and dropout in [0, 1)".into());
        }
        Ok(())
    }

    pub fn variant(&self, which: Variant) -> Self {
        let mut c = self.clone();
        let (att, lstm) = which.flags();
        c.attention.enabled = att;
        c.bilstm.enabled = lstm;
        c
    }

    pub fn variant_kind(&self) -> Variant {
        match (self.attention.enabled, self.bilstm.enabled) {
            (false, false) => Variant::Cnn,
            (true, false) => Variant::CnnAttention,
            (false, true) => Variant::CnnBilstm,
            (true, true) => Variant::Full,
        }
    }
}

/// Architecture variants of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Cnn,
    CnnAttention,
    CnnBilstm,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Cnn,
        Variant::CnnAttention,
        Variant::CnnBilstm,
        Variant::Full,
    ];

    fn flags(self) -> (bool, bool) {
        match self {
            Variant::Cnn => (false, false),
            Variant::CnnAttention => (true, false),
            Variant::CnnBilstm => (false, true),
            Variant::Full => (true, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cnn => "cnn",
            Variant::CnnAttention => "cnn_attention",
            Variant::CnnBilstm => "cnn_bilstm",
            Variant::Full => "full",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ModelError::UnknownVariant(s.to_string()))
    }
}

/// Closed-form trainable parameter count.
pub fn count_params(config: &ModelConfig) -> usize {
    let conv = |c_in: usize, c_out: usize, k: usize| c_in * c_out * k + c_out;
    let bn = |c: usize| 2 * c;
    let lstm = |input: usize, d: usize| 4 * ((input + d) * d + d);
    let dense = |i: usize, o: usize| i * o + o;

    let mut total = 0;
    let mut width = config.input_leads;
    for b in &config.conv_blocks {
        for &out in &b.channels {
            total += conv(width, out, b.kernel) + bn(out);
            width = out;
        }
    }
    if config.attention.enabled {
        total += conv(width, config.attention.out_channels, 1);
    }
    if config.bilstm.enabled {
        for &d in &config.bilstm.hidden {
            total += 2 * lstm(width, d);
            width = 2 * d;
        }
    }
    total += dense(width, config.head.width) + dense(config.head.width, config.num_classes);
    total
}
