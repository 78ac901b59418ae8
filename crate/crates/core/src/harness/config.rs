use super::{Family, HarnessError};
use crate::ar::EsnConfig;
use crate::culture::{CultureConfig, DayDrift};
use crate::dsp::{ArtifactFilter, DetectorConfig};
use crate::grid::{ElectrodeCoord, Waveform};
use crate::patterns::{ClockGeometry, MnistMapping};
use crate::readout::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Session layout and evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub repetitions_per_pattern: usize,
    /// Presentations of each image in MNIST sessions.
    pub mnist_repetitions: usize,
    pub mnist_images: usize,
    pub n_replicates: usize,
    pub n_days: usize,
    /// Post-stimulus counting window. Unset means 5 ms, or 10 ms for MNIST.
    pub w_ms: Option<f64>,
    pub w_list: Vec<f64>,
    pub k_folds: usize,
    /// Chebyshev margin of the excluded region around stimulated electrodes.
    pub mask_margin: u16,
    /// Zero the same region in artificial-reservoir states.
    pub mask_ar_states: bool,
    /// Spontaneous windows used to calibrate the artificial-reservoir noise.
    pub noise_windows: usize,
    pub write_events: bool,
    pub write_traces: bool,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            repetitions_per_pattern: 20,
            mnist_repetitions: 1,
            mnist_images: 200,
            n_replicates: 3,
            n_days: 3,
            w_ms: None,
            w_list: vec![5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            k_folds: 5,
            mask_margin: 2,
            mask_ar_states: true,
            noise_windows: 30,
            write_events: false,
            write_traces: false,
            seed: 42,
        }
    }
}

impl ProtocolConfig {
    pub fn window_for(&self, family: Family) -> f64 {
        self.w_ms.unwrap_or(match family {
            Family::Mnist => 10.0,
            _ => 5.0,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.repetitions_per_pattern < 20 {
            return bad(format!("repetitions_per_pattern must be at least 20, got {}", self.repetitions_per_pattern));
        }
        if self.mnist_repetitions == 0 || self.mnist_images == 0 {
            return bad("mnist_repetitions and mnist_images must be positive".into());
        }
        if self.n_replicates == 0 || self.n_days == 0 {
            return bad("n_replicates and n_days must be at least 1".into());
        }
        if self.k_folds < 2 {
            return bad(format!("k_folds must be at least 2, got {}", self.k_folds));
        }
        if let Some(w) = self.w_ms {
            if !(w > 0.0) {
                return bad(format!("w_ms must be positive, got {w}"));
            }
        }
        if self.w_list.iter().any(|&w| !(w > 0.0)) {
            return bad("w_list entries must be positive".into());
        }
        if self.noise_windows <= 20 {
            return bad(format!("noise_windows must exceed 20, got {}", self.noise_windows));
        }
        Ok(())
    }
}

/// Stimulus sets of the four experiment families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    pub pointwise_sites: Vec<ElectrodeCoord>,
    pub pointwise_waveform: Waveform,
    pub bar_center: ElectrodeCoord,
    pub bar_pairs: usize,
    pub bar_dilation: usize,
    pub bar_waveform: Waveform,
    pub clock_origin: ElectrodeCoord,
    pub clock_segment_length: usize,
    pub clock_waveform: Waveform,
    pub mnist: MnistMapping,
    pub mnist_waveform: Waveform,
    pub mnist_images_path: PathBuf,
    pub mnist_labels_path: PathBuf,
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist").join(name)
}

impl Default for FamilyConfig {
    fn default() -> Self {
        let at = |row, col| ElectrodeCoord { row, col };
        let clock = ClockGeometry::centered();
        Self {
            pointwise_sites: vec![at(24, 24), at(24, 40), at(40, 24), at(40, 40)],
            pointwise_waveform: Waveform::monophasic(10.0, 20.0),
            bar_center: at(32, 32),
            bar_pairs: 5,
            bar_dilation: 1,
            bar_waveform: Waveform::monophasic(10.0, 20.0),
            clock_origin: clock.origin,
            clock_segment_length: clock.segment_length,
            clock_waveform: Waveform::biphasic(4.0, 100.0, 100.0),
            mnist: MnistMapping::default(),
            mnist_waveform: Waveform::biphasic(5.0, 100.0, 100.0),
            mnist_images_path: bundled("mnist-1k-images-idx3-ubyte"),
            mnist_labels_path: bundled("mnist-1k-labels-idx1-ubyte"),
        }
    }
}

/// Everything a run needs; one TOML file with a section per module.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub protocol: ProtocolConfig,
    pub families: FamilyConfig,
    pub culture: CultureConfig,
    pub drift: DayDrift,
    pub detector: DetectorConfig,
    pub artifact_filter: ArtifactFilter,
    pub esn: EsnConfig,
    pub readout: TrainConfig,
}

impl HarnessConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.protocol.validate()?;
        self.culture.validate().map_err(HarnessError::Config)?;
        self.detector.validate()?;
        self.esn.validate()?;
        if self.readout.epochs == 0 || self.readout.batch_size == 0 || !(self.readout.lr0 > 0.0) {
            return Err(HarnessError::Config("readout epochs, batch_size and lr0 must be positive".into()));
        }
        Ok(())
    }
}
