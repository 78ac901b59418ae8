//! Time-stepped LIF dynamics with background kicks and stimulation.

use super::Culture;
use crate::grid::StimPattern;
use crate::rng;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// One ground-truth spike, timed from the start of the recorded window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub neuron: u32,
    pub t_ms: f64,
}

/// Initial membrane potentials are uniform over this fraction of the rest-to-threshold gap.
const INIT_SPREAD: f32 = 0.3;

pub(crate) struct Window {
    pub warmup_steps: usize,
    pub recorded_steps: usize,
    /// Step (within the recorded window) at which the stimulus lands.
    pub onset_step: usize,
}

/// Simulate `warmup + recorded` steps from a randomized state and return the
/// spikes of the recorded part. `stim` is delivered at `onset_step`.
pub(crate) fn run(c: &Culture, window: &Window, stim: Option<&StimPattern>, seed: u64) -> Vec<SpikeRecord> {
    let cfg = &c.cfg;
    let n = c.n_neurons();
    let dt = cfg.recording.dt_ms;
    let total = window.warmup_steps + window.recorded_steps;
    let delay = ((cfg.synaptic_delay_ms / dt).round() as usize).max(1);
    let refractory = (cfg.refractory_ms / dt).round() as u32;
    let decay = (-dt / cfg.membrane_tau_ms).exp() as f32;
    let rest = cfg.rest_mv as f32;
    let threshold = cfg.threshold_mv as f32;
    let reset = cfg.reset_mv as f32;

    let mut rng = rng::stream(seed, "culture-dynamics", c.day_index as u64);
    // Start near rest; the warm-up settles the rest.
    let mut v: Vec<f32> = (0..n).map(|_| rest + rng.random::<f32>() * INIT_SPREAD * (threshold - rest)).collect();
    let mut refr = vec![0u32; n];

    // Background kicks: superposition of per-neuron Poisson processes.
    let expected = n as f64 * cfg.spont_rate_hz * total as f64 * dt * 1e-3;
    let n_kicks = if expected > 0.0 {
        Poisson::new(expected).expect("finite rate").sample(&mut rng) as usize
    } else {
        0
    };
    let mut kicks: Vec<(u32, u32)> = (0..n_kicks)
        .map(|_| (rng.random_range(0..total as u32), rng.random_range(0..n as u32)))
        .collect();
    kicks.sort_unstable();

    let state_gain = lognormal_unit_mean(cfg.state_gain_cv, &mut rng) as f32;
    let efficacy = lognormal_unit_mean(cfg.stimulation.efficacy_cv, &mut rng);

    // Stimulation: depolarization per neuron at the onset step.
    let mut drive: Vec<(u32, f32)> = Vec::new();
    if let Some(p) = stim {
        let q = p.waveform.leading_charge_nc() * cfg.stimulation.gain_mv_per_nc * efficacy;
        let radius = cfg.stimulation.coupling_radius;
        let h2 = cfg.stimulation.half_distance.powi(2);
        if q > 0.0 {
            let mut acc = std::collections::BTreeMap::<u32, f64>::new();
            for pair in &p.pairs {
                let (pr, pc) = (pair.positive.row as f64, pair.positive.col as f64);
                c.index.for_each_near(pr, pc, radius, |j| {
                    let (r, cc) = c.positions[j as usize];
                    let d2 = (r - pr).powi(2) + (cc - pc).powi(2);
                    if d2 <= radius * radius {
                        *acc.entry(j).or_default() += q / (1.0 + d2 / h2);
                    }
                });
            }
            let sd = cfg.stimulation.drive_noise_mv;
            drive = acc
                .into_iter()
                .map(|(j, dv)| {
                    let z: f64 = if sd > 0.0 { rand_distr::StandardNormal.sample(&mut rng) } else { 0.0 };
                    (j, (dv + sd * z).max(0.0) as f32)
                })
                .collect();
        }
    }

    let mut ring = vec![vec![0f32; n]; delay + 1];
    let mut spikes = Vec::new();
    let mut next_kick = 0usize;
    let stim_step = window.warmup_steps + window.onset_step;
    for t in 0..total {
        let slot = t % (delay + 1);
        {
            let input = &mut ring[slot];
            for i in 0..n {
                let inp = std::mem::take(&mut input[i]);
                if refr[i] > 0 {
                    refr[i] -= 1;
                } else {
                    v[i] = rest + (v[i] - rest) * decay + inp;
                }
            }
        }
        while next_kick < kicks.len() && kicks[next_kick].0 as usize == t {
            let i = kicks[next_kick].1 as usize;
            if refr[i] == 0 {
                v[i] = v[i].max(threshold);
            }
            next_kick += 1;
        }
        if t == stim_step {
            for &(j, dv) in &drive {
                if refr[j as usize] == 0 {
                    v[j as usize] += dv;
                }
            }
        }
        let out_slot = (t + delay) % (delay + 1);
        for i in 0..n {
            if v[i] >= threshold && refr[i] == 0 {
                v[i] = reset;
                refr[i] = refractory;
                let (targets, weights) = c.synapses.row(i);
                let out = &mut ring[out_slot];
                for (&j, &w) in targets.iter().zip(weights) {
                    out[j as usize] += w * state_gain;
                }
                if t >= window.warmup_steps {
                    spikes.push(SpikeRecord { neuron: i as u32, t_ms: (t - window.warmup_steps) as f64 * dt });
                }
            }
        }
    }
    spikes
}

/// Unit-mean lognormal factor with the given coefficient of variation.
fn lognormal_unit_mean(cv: f64, rng: &mut crate::rng::Rng) -> f64 {
    if cv <= 0.0 {
        return 1.0;
    }
    let s2 = (1.0 + cv * cv).ln();
    rand_distr::LogNormal::new(-s2 / 2.0, s2.sqrt()).expect("finite cv").sample(rng)
}
