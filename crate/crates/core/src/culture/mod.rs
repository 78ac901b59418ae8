//! Seeded spiking stand-in for a living culture on the electrode array.
//!
//! A current-based leaky integrate-and-fire network (80/20 excitatory /
//! inhibitory, Gaussian spatial connectivity) is simulated at 0.1 ms steps.
//! Spikes are rendered into 20 kHz extracellular traces together with
//! Gaussian noise and explicit stimulation artifacts, and the true spike
//! times are kept so detection can be scored.

mod config;
mod network;
mod recording;
mod sim;

pub use config::{ArtifactConfig, CultureConfig, Layout, RecordingConfig, StimCoupling};
pub use network::{advance_day, grow_culture, support_overlap, Culture, DayDrift, Synapses};
pub use recording::{
    channel_spike_truth, distance_to_stimulus, evoked_spikes, read_spike_log, spike_template, spontaneous_window, stimulate,
    write_spike_log, ArtifactTruth, GroundTruth, RawRecording, RecordingMeta, SAMPLES_PER_MS, SAMPLE_RATE_HZ,
    TEMPLATE_LEN, TEMPLATE_START, TRACE_MAGIC,
};
pub use sim::SpikeRecord;

use crate::grid::Violation;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CultureError {
    #[error("culture config: {0}")]
    Config(String),
    #[error("invalid stimulus pattern: {0:?}")]
    Pattern(Vec<Violation>),
}
