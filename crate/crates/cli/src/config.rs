//! Experiment configuration, stored as versioned TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use hexsr_core::metrics::{LumaSwing, DEFAULT_SHAVE};
use hexsr_core::optics::{ChannelOptics, DEFAULT_KERNEL_SIZE};
use hexsr_core::sampling::hex_pitch_from_rect;
use hexsr_core::synthetic::SyntheticImage;
use hexsr_nnet::train::TrainConfig;
use hexsr_nnet::RestorerConfig;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSplit;
use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// The compared systems, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SystemVariant {
    HexNi4,
    RectBic4,
    HexNi4Wiener,
    RectBic4Wiener,
    HexNi2Rcan2,
    RectBic2Rcan2,
    Rect4Rcan4,
}

/// Sampling lattice of the simulated camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Lattice {
    Rect,
    Hex,
}

impl SystemVariant {
    pub const ALL: [SystemVariant; 7] = [
        Self::HexNi4,
        Self::RectBic4,
        Self::HexNi4Wiener,
        Self::RectBic4Wiener,
        Self::HexNi2Rcan2,
        Self::RectBic2Rcan2,
        Self::Rect4Rcan4,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::HexNi4 => "Hex+NI(4x)",
            Self::RectBic4 => "Rect+Bic(4x)",
            Self::HexNi4Wiener => "Hex+NI(4x)+Wiener",
            Self::RectBic4Wiener => "Rect+Bic(4x)+Wiener",
            Self::HexNi2Rcan2 => "Hex+NI(2x)+RCAN(2x)",
            Self::RectBic2Rcan2 => "Rect+Bic(2x)+RCAN(2x)",
            Self::Rect4Rcan4 => "Rect+RCAN(4x)",
        }
    }

    pub fn lattice(self) -> Lattice {
        match self {
            Self::HexNi4 | Self::HexNi4Wiener | Self::HexNi2Rcan2 => Lattice::Hex,
            _ => Lattice::Rect,
        }
    }

    pub fn uses_wiener(self) -> bool {
        matches!(self, Self::HexNi4Wiener | Self::RectBic4Wiener)
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Self::HexNi2Rcan2 | Self::RectBic2Rcan2 | Self::Rect4Rcan4)
    }

    /// Network configuration for a learned variant built from the shared
    /// body settings.
    pub fn restorer_config(self, net: &NetworkConfig) -> Option<RestorerConfig> {
        let (scale, use_distance_head) = match self {
            Self::HexNi2Rcan2 => (2, net.distance_head),
            Self::RectBic2Rcan2 => (2, false),
            Self::Rect4Rcan4 => (4, false),
            _ => return None,
        };
        Some(RestorerConfig {
            groups: net.groups,
            blocks_per_group: net.blocks_per_group,
            feature_channels: net.feature_channels,
            attention_reduction: net.attention_reduction,
            scale,
            use_distance_head,
        })
    }
}

impl fmt::Display for SystemVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// um
    pub wavelength: f64,
    pub f_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsConfig {
    pub kernel_size: usize,
    pub red: ChannelSpec,
    pub green: ChannelSpec,
    pub blue: ChannelSpec,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        let spec = |c: ChannelOptics| ChannelSpec {
            wavelength: c.wavelength,
            f_number: c.f_number,
        };
        let [r, g, b] = ChannelOptics::rgb();
        Self {
            kernel_size: DEFAULT_KERNEL_SIZE,
            red: spec(r),
            green: spec(g),
            blue: spec(b),
        }
    }
}

/// Sample pitches in um.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// HR pitch `p`.
    pub hr_pitch: f64,
    /// LR rectangular pitch `d`; also the square detector side.
    pub rect_pitch: f64,
    pub hex_t1: f64,
    pub hex_t2: f64,
    /// Allow `hex_t2 != sqrt(3) hex_t1`.
    #[serde(default)]
    pub approximate_hex: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        let t1 = hex_pitch_from_rect(4.0).expect("positive pitch");
        Self {
            hr_pitch: 1.0,
            rect_pitch: 4.0,
            hex_t1: t1,
            hex_t2: 3f64.sqrt() * t1,
            approximate_hex: false,
        }
    }
}

impl GridConfig {
    /// `d / p` as an integer.
    pub fn factor(&self) -> Option<usize> {
        let r = self.rect_pitch / self.hr_pitch;
        let n = r.round();
        ((r - n).abs() < 1e-9 && n >= 1.0).then_some(n as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// DU
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma: 1.0, seed: 0 }
    }
}

/// Per-channel (R, G, B) noise-to-signal ratios for the Wiener variants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hex_nsr: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect_nsr: Option<[f64; 3]>,
}

impl WienerConfig {
    pub fn nsr(&self, lattice: Lattice) -> Option<[f64; 3]> {
        match lattice {
            Lattice::Hex => self.hex_nsr,
            Lattice::Rect => self.rect_nsr,
        }
    }

    pub fn set_nsr(&mut self, lattice: Lattice, nsr: [f64; 3]) {
        match lattice {
            Lattice::Hex => self.hex_nsr = Some(nsr),
            Lattice::Rect => self.rect_nsr = Some(nsr),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// Body settings shared by the learned variants; scale and distance input
/// follow from the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub groups: usize,
    pub blocks_per_group: usize,
    pub feature_channels: usize,
    pub attention_reduction: usize,
    /// Feed the distance matrix to the hexagonal learned variant.
    pub distance_head: bool,
    pub precision: Precision,
    pub init_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let r = RestorerConfig::default();
        Self {
            groups: r.groups,
            blocks_per_group: r.blocks_per_group,
            feature_channels: r.feature_channels,
            attention_reduction: r.attention_reduction,
            distance_head: true,
            precision: Precision::F64,
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct TrainingConfig {
    /// Add the eight dihedral variants of every training HR image before
    /// simulating the camera.
    pub augment: bool,
    pub schedule: TrainConfig,
}


/// Trained weights for the learned variants. A learned variant without a
/// checkpoint is trained on the train split before evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hex_ni2_rcan2: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect_bic2_rcan2: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect4_rcan4: Option<PathBuf>,
}

impl CheckpointPaths {
    pub fn get(&self, v: SystemVariant) -> Option<&Path> {
        match v {
            SystemVariant::HexNi2Rcan2 => self.hex_ni2_rcan2.as_deref(),
            SystemVariant::RectBic2Rcan2 => self.rect_bic2_rcan2.as_deref(),
            SystemVariant::Rect4Rcan4 => self.rect4_rcan4.as_deref(),
            _ => None,
        }
    }

    pub fn set(&mut self, v: SystemVariant, path: PathBuf) {
        match v {
            SystemVariant::HexNi2Rcan2 => self.hex_ni2_rcan2 = Some(path),
            SystemVariant::RectBic2Rcan2 => self.rect_bic2_rcan2 = Some(path),
            SystemVariant::Rect4Rcan4 => self.rect4_rcan4 = Some(path),
            _ => {}
        }
    }
}

/// Built-in images used when no dataset root is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    /// HR side length in pixels.
    pub size: usize,
    pub train: usize,
    pub val: usize,
    /// Cosine components and top frequency (cyc/um) of the training and
    /// validation textures.
    pub texture_components: usize,
    pub texture_f_max: f64,
    pub test: Vec<SyntheticImage>,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self {
            size: 128,
            train: 24,
            val: 4,
            texture_components: 24,
            texture_f_max: 0.3,
            test: hexsr_core::synthetic::standard_suite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct DataConfig {
    /// Directory of numbered PNG files. Unset means the synthetic set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    pub split: DatasetSplit,
    pub synthetic: SyntheticData,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub shave: usize,
    pub luma: LumaSwing,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            shave: DEFAULT_SHAVE,
            luma: LumaSwing::Studio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub systems: Vec<SystemVariant>,
    pub optics: OpticsConfig,
    pub grid: GridConfig,
    pub noise: NoiseConfig,
    pub wiener: WienerConfig,
    pub network: NetworkConfig,
    pub training: TrainingConfig,
    pub checkpoints: CheckpointPaths,
    pub data: DataConfig,
    pub evaluation: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            systems: SystemVariant::ALL.to_vec(),
            optics: OpticsConfig::default(),
            grid: GridConfig::default(),
            noise: NoiseConfig::default(),
            wiener: WienerConfig::default(),
            network: NetworkConfig::default(),
            training: TrainingConfig::default(),
            checkpoints: CheckpointPaths::default(),
            data: DataConfig::default(),
            evaluation: EvalConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn channel_optics(&self) -> Result<[ChannelOptics; 3]> {
        let p = self.grid.hr_pitch;
        let mk = |c: &ChannelSpec| ChannelOptics::new(c.wavelength, c.f_number, p);
        Ok([mk(&self.optics.red)?, mk(&self.optics.green)?, mk(&self.optics.blue)?])
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.channel_optics().map_err(|e| Error::Config(e.to_string()))?;
        let k = self.optics.kernel_size;
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::Config(format!("optics.kernel_size must be odd, got {k}")));
        }
        let g = &self.grid;
        for (name, v) in [
            ("grid.hr_pitch", g.hr_pitch),
            ("grid.rect_pitch", g.rect_pitch),
            ("grid.hex_t1", g.hex_t1),
            ("grid.hex_t2", g.hex_t2),
        ] {
            positive(name, v)?;
        }
        match g.factor() {
            Some(f) if f % 4 == 0 => {}
            _ => {
                return Err(Error::Config(format!(
                    "grid.rect_pitch / grid.hr_pitch must be a multiple of 4, got {}",
                    g.rect_pitch / g.hr_pitch
                )))
            }
        }
        if !g.approximate_hex && ((g.hex_t2 / g.hex_t1) / 3f64.sqrt() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "grid.hex_t2 must equal sqrt(3) * grid.hex_t1 unless approximate_hex is set ({} vs {})",
                g.hex_t2,
                3f64.sqrt() * g.hex_t1
            )));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::Config(format!("noise.sigma must be >= 0, got {}", self.noise.sigma)));
        }
        if self.systems.is_empty() {
            return Err(Error::Config("systems is empty".into()));
        }
        for &v in &self.systems {
            if let Some(n) = self.wiener.nsr(v.lattice()).filter(|_| v.uses_wiener()) {
                if n.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    return Err(Error::Config(format!("{v}: nsr values must be >= 0, got {n:?}")));
                }
            }
            if let Some(rc) = v.restorer_config(&self.network) {
                rc.validate().map_err(|e| Error::Config(e.to_string()))?;
                if self.checkpoints.get(v).is_none() && self.training.schedule.steps == 0 {
                    return Err(Error::Config(format!("{v} needs a checkpoint or training.steps > 0")));
                }
            }
        }
        let t = &self.training.schedule;
        if t.batch_size == 0 || t.patch_size == 0 || !(t.lr >= 0.0 && t.lr.is_finite()) {
            return Err(Error::Config("training batch_size, patch_size must be > 0 and lr >= 0".into()));
        }
        self.data.split.validate()?;
        let s = &self.data.synthetic;
        if self.data.root.is_none() && (s.size == 0 || !s.size.is_multiple_of(g.factor().unwrap_or(4))) {
            return Err(Error::Config(format!(
                "data.synthetic.size must be a positive multiple of {}",
                g.factor().unwrap_or(4)
            )));
        }
        if self.evaluation.shave * 2 >= s.size.max(1) && self.data.root.is_none() {
            return Err(Error::Config("evaluation.shave too large for the synthetic image size".into()));
        }
        Ok(())
    }
}
