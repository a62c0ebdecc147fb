use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which modules take part in the forward pass. The three single-module
/// removals reproduce the ablation grid: no AV-Encoder, no Pointer, no
/// 2DP-Encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationConfig {
    pub use_av_encoder: bool,
    pub use_pointer: bool,
    pub use_2dp: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self::FULL
    }
}

impl AblationConfig {
    pub const FULL: Self = Self {
        use_av_encoder: true,
        use_pointer: true,
        use_2dp: true,
    };
    pub const NO_AV_ENCODER: Self = Self {
        use_av_encoder: false,
        ..Self::FULL
    };
    pub const NO_POINTER: Self = Self {
        use_pointer: false,
        ..Self::FULL
    };
    pub const NO_2DP: Self = Self {
        use_2dp: false,
        ..Self::FULL
    };

    pub fn validate(&self) -> Result<()> {
        if !self.use_pointer && !self.use_2dp {
            return Err(Error::Config(
                "at least one of use_pointer and use_2dp must be enabled".into(),
            ));
        }
        Ok(())
    }

    /// Loss weight on the 2D term after ablation overrides.
    pub fn effective_lambda(&self, lambda: f64) -> f64 {
        match (self.use_pointer, self.use_2dp) {
            (false, _) => 1.0,
            (true, false) => 0.0,
            (true, true) => lambda,
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.use_av_encoder, self.use_pointer, self.use_2dp) {
            (true, true, true) => "full",
            (false, true, true) => "no-av-encoder",
            (true, false, true) => "no-pointer",
            (true, true, false) => "no-2dp",
            _ => "custom",
        }
    }
}

/// Widths of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden size shared by every module.
    pub d: usize,
    pub d_video: usize,
    pub d_asr: usize,
    pub d_query: usize,
    pub conv_width: usize,
    pub ablation: AblationConfig,
}

impl ModelConfig {
    pub fn new(d: usize, d_video: usize, d_asr: usize, d_query: usize) -> Self {
        Self {
            d,
            d_video,
            d_asr,
            d_query,
            conv_width: 3,
            ablation: AblationConfig::FULL,
        }
    }

    pub fn with_ablation(mut self, ablation: AblationConfig) -> Self {
        self.ablation = ablation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.ablation.validate()?;
        if self.d == 0 || self.d % 2 != 0 {
            return Err(Error::Config(format!(
                "hidden size d must be even and positive, got {}",
                self.d
            )));
        }
        if self.d_video == 0 || self.d_asr == 0 || self.d_query == 0 || self.conv_width == 0 {
            return Err(Error::Config("feature widths must be positive".into()));
        }
        Ok(())
    }
}
