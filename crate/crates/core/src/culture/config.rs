use serde::{Deserialize, Serialize};

/// Network construction and dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CultureConfig {
    pub n_neurons: usize,
    pub layout: Layout,
    pub frac_inhibitory: f64,
    /// Gaussian connectivity length, electrode-pitch units.
    pub connect_sigma: f64,
    pub mean_out_degree: f64,
    /// Excitatory PSP size (mV).
    pub syn_weight_mean: f64,
    pub syn_weight_std: f64,
    /// Inhibitory PSPs are this many times larger than excitatory ones.
    pub inhibitory_scale: f64,
    pub synaptic_delay_ms: f64,
    pub membrane_tau_ms: f64,
    pub refractory_ms: f64,
    pub rest_mv: f64,
    pub threshold_mv: f64,
    pub reset_mv: f64,
    /// Rate of suprathreshold background kicks per neuron.
    pub spont_rate_hz: f64,
    /// Trial-to-trial coefficient of variation of a network-wide synaptic
    /// gain (lognormal), standing in for slow excitability fluctuations.
    pub state_gain_cv: f64,
    pub seed: u64,
    pub stimulation: StimCoupling,
    pub recording: RecordingConfig,
    pub artifact: ArtifactConfig,
}

impl Default for CultureConfig {
    fn default() -> Self {
        Self {
            n_neurons: 4096,
            layout: Layout::Lattice,
            frac_inhibitory: 0.2,
            connect_sigma: 4.0,
            mean_out_degree: 40.0,
            syn_weight_mean: 2.0,
            syn_weight_std: 0.5,
            inhibitory_scale: 4.0,
            synaptic_delay_ms: 1.0,
            membrane_tau_ms: 20.0,
            refractory_ms: 2.0,
            rest_mv: -65.0,
            threshold_mv: -50.0,
            reset_mv: -65.0,
            spont_rate_hz: 2.0,
            state_gain_cv: 0.0,
            seed: 1,
            stimulation: StimCoupling::default(),
            recording: RecordingConfig::default(),
            artifact: ArtifactConfig::default(),
        }
    }
}

/// Placement of neuron somata over the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Independent uniform positions.
    Uniform,
    /// One neuron per cell of a square lattice, jittered within the cell.
    Lattice,
}

/// How a current pulse at a positive pole depolarizes nearby neurons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimCoupling {
    pub coupling_radius: f64,
    /// Depolarization per nC of leading-phase charge at zero distance.
    pub gain_mv_per_nc: f64,
    /// Distance at which the depolarization halves.
    pub half_distance: f64,
    /// Trial-to-trial coefficient of variation of the coupling (lognormal).
    pub efficacy_cv: f64,
    /// Standard deviation of independent per-neuron noise on the delivered
    /// depolarization; makes recruitment near threshold probabilistic.
    pub drive_noise_mv: f64,
}

impl Default for StimCoupling {
    fn default() -> Self {
        Self { coupling_radius: 0.5, gain_mv_per_nc: 200.0, half_distance: 0.7, efficacy_cv: 0.0, drive_noise_mv: 0.0 }
    }
}

/// Recording windows and extracellular trace synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordingConfig {
    pub pre_ms: f64,
    pub post_ms: f64,
    /// Relaxation from a randomized state before the recorded window.
    pub warmup_ms: f64,
    pub dt_ms: f64,
    pub noise_uv: f64,
    /// Trough amplitude of a spike seen from zero distance.
    pub spike_amplitude_uv: f64,
    /// Distance at which the spike amplitude halves.
    pub spike_half_distance: f64,
    /// Channels farther than this do not see the spike.
    pub spike_radius: f64,
    /// Length of each neuron's straight axon (pitch); 0 disables axonal signals.
    pub axon_length: f64,
    /// Trough amplitude of the spike seen along the axon.
    pub axon_amplitude_uv: f64,
    pub conduction_pitch_per_ms: f64,
    /// Inter-stimulus interval; metadata only.
    pub isi_s: f64,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        Self {
            pre_ms: 20.0,
            post_ms: 60.0,
            warmup_ms: 50.0,
            dt_ms: 0.1,
            noise_uv: 5.0,
            spike_amplitude_uv: 150.0,
            spike_half_distance: 0.7,
            spike_radius: 2.0,
            axon_length: 24.0,
            axon_amplitude_uv: 50.0,
            conduction_pitch_per_ms: 30.0,
            isi_s: 10.0,
        }
    }
}

/// Stimulation artifact synthesis.
///
/// Every channel within `radius` (Chebyshev) of a stimulated electrode gets a
/// transient starting at stimulus onset: a plateau of `plateau_ms` at
/// `peak_uv / (1 + d^2)` followed by exponential recovery with `tau_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtifactConfig {
    pub enabled: bool,
    pub peak_uv: f64,
    pub radius: u16,
    pub plateau_ms: f64,
    pub tau_ms: f64,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        Self { enabled: true, peak_uv: 1500.0, radius: 3, plateau_ms: 0.5, tau_ms: 6.0 }
    }
}

impl CultureConfig {
    pub(crate) fn validate(&self) -> Result<(), String> {
        let positive = [
            ("connect_sigma", self.connect_sigma),
            ("mean_out_degree", self.mean_out_degree),
            ("membrane_tau_ms", self.membrane_tau_ms),
            ("recording.dt_ms", self.recording.dt_ms),
            ("recording.conduction_pitch_per_ms", self.recording.conduction_pitch_per_ms),
            ("synaptic_delay_ms", self.synaptic_delay_ms),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("refractory_ms", self.refractory_ms),
            ("spont_rate_hz", self.spont_rate_hz),
            ("state_gain_cv", self.state_gain_cv),
            ("stimulation.efficacy_cv", self.stimulation.efficacy_cv),
            ("stimulation.drive_noise_mv", self.stimulation.drive_noise_mv),
            ("recording.noise_uv", self.recording.noise_uv),
            ("recording.axon_length", self.recording.axon_length),
            ("recording.pre_ms", self.recording.pre_ms),
            ("recording.post_ms", self.recording.post_ms),
            ("recording.warmup_ms", self.recording.warmup_ms),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.n_neurons == 0 {
            return Err("n_neurons must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.frac_inhibitory) {
            return Err(format!("frac_inhibitory {} outside [0,1]", self.frac_inhibitory));
        }
        if self.mean_out_degree >= self.n_neurons as f64 {
            return Err(format!(
                "mean_out_degree {} infeasible for {} neurons",
                self.mean_out_degree, self.n_neurons
            ));
        }
        if self.threshold_mv <= self.reset_mv {
            return Err("threshold_mv must exceed reset_mv".into());
        }
        Ok(())
    }
}
