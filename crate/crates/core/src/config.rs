//! Run settings with three layers: command-line flag, config file, built-in
//! default. The file is TOML with flat `key = value` lines using the key
//! names of [`ConfigLayer`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentWindows, DEFAULT_DISC_THRESHOLD, DEFAULT_TSD_THRESHOLD};
use crate::crossmodal::{MarginMode, Optimizer, TrainConfig};
use crate::error::{Error, Result};

/// Every setting, all optional. One layer of the precedence stack.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub fps: Option<u32>,
    pub duration_s: Option<u32>,
    pub jitter_threshold: Option<f64>,
    pub distance_threshold: Option<f64>,
    pub target_height: Option<f64>,
    pub omega_a: Option<usize>,
    pub omega_b: Option<usize>,
    pub omega_c: Option<usize>,
    pub tsd_threshold: Option<f64>,
    pub disc_threshold: Option<f64>,
    pub margin: Option<f64>,
    pub margin_mode: Option<String>,
    pub accuracy_threshold: Option<f64>,
    pub dim: Option<usize>,
    pub lr: Option<f64>,
    pub dropout: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub hidden: Option<usize>,
    pub channels: Option<usize>,
    pub kernel: Option<usize>,
    pub optimizer: Option<String>,
    pub clip: Option<f64>,
    pub seed: Option<u64>,
    pub beat_tolerance: Option<usize>,
    pub render_width: Option<u32>,
    pub render_height: Option<u32>,
}

impl ConfigLayer {
    pub fn parse(text: &str, origin: &str) -> Result<ConfigLayer> {
        toml::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ConfigLayer> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Values set in `over` win over values set here.
    pub fn overlay(self, over: &ConfigLayer) -> ConfigLayer {
        macro_rules! pick {
            ($($f:ident),*) => {
                ConfigLayer { $($f: over.$f.clone().or(self.$f)),* }
            };
        }
        pick!(
            fps, duration_s, jitter_threshold, distance_threshold, target_height, omega_a, omega_b, omega_c,
            tsd_threshold, disc_threshold, margin, margin_mode, accuracy_threshold, dim, lr, dropout, epochs,
            batch, hidden, channels, kernel, optimizer, clip, seed, beat_tolerance, render_width, render_height
        )
    }
}

/// Resolved settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub fps: u32,
    pub duration_s: u32,
    pub jitter_threshold: f64,
    pub distance_threshold: f64,
    pub target_height: f64,
    pub omega_a: usize,
    pub omega_b: usize,
    /// `None`: the median spacing of the detected beats.
    pub omega_c: Option<usize>,
    pub tsd_threshold: f64,
    pub disc_threshold: f64,
    pub accuracy_threshold: f64,
    pub train: TrainConfig,
    pub beat_tolerance: usize,
    pub render_width: u32,
    pub render_height: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            fps: crate::DEFAULT_FPS,
            duration_s: 4,
            jitter_threshold: 10.0,
            distance_threshold: 100.0,
            target_height: 600.0,
            omega_a: 8,
            omega_b: 24,
            omega_c: None,
            tsd_threshold: DEFAULT_TSD_THRESHOLD,
            disc_threshold: DEFAULT_DISC_THRESHOLD,
            accuracy_threshold: 1.0,
            train: TrainConfig::default(),
            beat_tolerance: 2,
            render_width: 960,
            render_height: 540,
        }
    }
}

/// One row of the defaults table: key, default value, meaning.
pub type DefaultRow = (&'static str, String, &'static str);

impl Settings {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(file: Option<&ConfigLayer>, flags: &ConfigLayer) -> Result<Settings> {
        let merged = file.cloned().unwrap_or_default().overlay(flags);
        Settings::default().apply(&merged)
    }

    pub fn apply(mut self, layer: &ConfigLayer) -> Result<Settings> {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = layer.$f { self.$f = v; })* };
        }
        set!(fps, duration_s, jitter_threshold, distance_threshold, target_height, omega_a, omega_b, tsd_threshold,
            disc_threshold, accuracy_threshold, beat_tolerance, render_width, render_height);
        if let Some(v) = layer.omega_c {
            self.omega_c = (v > 0).then_some(v);
        }
        let t = &mut self.train;
        macro_rules! set_train {
            ($($f:ident),*) => { $(if let Some(v) = layer.$f { t.$f = v; })* };
        }
        set_train!(margin, dim, lr, dropout, epochs, batch, hidden, channels, kernel, clip, seed);
        if let Some(m) = &layer.margin_mode {
            t.margin_mode = m.parse().map_err(Error::InvalidInput)?;
        }
        if let Some(o) = &layer.optimizer {
            t.optimizer = o.parse().map_err(Error::InvalidInput)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fps == 0 {
            return Err(Error::invalid("fps must be positive"));
        }
        crate::pose::check_duration(self.duration_s)?;
        for (name, v) in [
            ("jitter_threshold", self.jitter_threshold),
            ("distance_threshold", self.distance_threshold),
            ("target_height", self.target_height),
            ("tsd_threshold", self.tsd_threshold),
            ("disc_threshold", self.disc_threshold),
            ("accuracy_threshold", self.accuracy_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.render_width < 2 || self.render_height < 2 {
            return Err(Error::invalid("render canvas must be at least 2x2"));
        }
        self.windows(12).validate()?;
        self.train.validate()
    }

    /// Alignment windows, with `omega_c` falling back to `beat_spacing`.
    pub fn windows(&self, beat_spacing: usize) -> AlignmentWindows {
        AlignmentWindows {
            omega_a: self.omega_a,
            omega_b: self.omega_b,
            omega_c: self.omega_c.unwrap_or(beat_spacing),
        }
    }

    pub fn defaults_table() -> Vec<DefaultRow> {
        let d = Settings::default();
        let t = &d.train;
        vec![
            ("fps", d.fps.to_string(), "video frame rate"),
            ("duration_s", d.duration_s.to_string(), "fragment length in seconds (1 to 4)"),
            ("jitter_threshold", d.jitter_threshold.to_string(), "spike threshold for smoothing, px"),
            ("distance_threshold", d.distance_threshold.to_string(), "frame-filter jump threshold, px"),
            ("target_height", d.target_height.to_string(), "nose-to-ankle height after normalisation, px"),
            ("omega_a", d.omega_a.to_string(), "repair window, frames"),
            ("omega_b", d.omega_b.to_string(), "reference window, frames"),
            ("omega_c", "auto".into(), "beat window, frames; 0 or unset uses the median beat spacing"),
            ("tsd_threshold", d.tsd_threshold.to_string(), "volatility threshold for period detection"),
            ("disc_threshold", d.disc_threshold.to_string(), "discontinuity threshold, px"),
            ("margin", t.margin.to_string(), "matching-loss margin"),
            ("margin_mode", t.margin_mode.to_string(), "hinge or offset"),
            ("accuracy_threshold", d.accuracy_threshold.to_string(), "embedding distance below which a pair counts as corresponding"),
            ("dim", t.dim.to_string(), "embedding dimension"),
            ("lr", t.lr.to_string(), "learning rate"),
            ("dropout", t.dropout.to_string(), "dropout on the audio features"),
            ("epochs", t.epochs.to_string(), "training epochs"),
            ("batch", t.batch.to_string(), "pairs per update"),
            ("hidden", t.hidden.to_string(), "LSTM hidden units per direction"),
            ("channels", t.channels.to_string(), "graph-convolution channels"),
            ("kernel", t.kernel.to_string(), "temporal kernel, frames"),
            ("optimizer", t.optimizer.to_string(), "adam or sgd"),
            ("clip", t.clip.to_string(), "global gradient-norm clip"),
            ("seed", t.seed.to_string(), "random seed"),
            ("beat_tolerance", d.beat_tolerance.to_string(), "beat-match tolerance for S_BA, frames"),
            ("render_width", d.render_width.to_string(), "rendered frame width, px"),
            ("render_height", d.render_height.to_string(), "rendered frame height, px"),
        ]
    }
}

impl std::fmt::Display for MarginMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MarginMode::Hinge => "hinge",
            MarginMode::Offset => "offset",
        })
    }
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Optimizer::Adam => "adam",
            Optimizer::Sgd => "sgd",
        })
    }
}
