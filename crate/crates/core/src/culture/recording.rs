//! Extracellular trace synthesis and the raw-trace file formats.

use super::sim::{self, SpikeRecord, Window};
use super::{Culture, CultureError};
use crate::grid::{channel_index, coord_of, validate_pattern, StimPattern, Violation, GRID_SIZE, N_CHANNELS};
use crate::rng;
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Read, Write};

pub const SAMPLE_RATE_HZ: u32 = 20_000;
pub const SAMPLES_PER_MS: f64 = SAMPLE_RATE_HZ as f64 / 1000.0;
pub const TRACE_MAGIC: &[u8; 4] = b"BRC1";

/// Spike waveform: a sharp negative trough at offset 0 and a slower
/// positive rebound, in units of the trough amplitude.
pub const TEMPLATE_START: i32 = -6;
pub const TEMPLATE_LEN: usize = 23;

pub fn spike_template() -> [f32; TEMPLATE_LEN] {
    let mut t = [0f32; TEMPLATE_LEN];
    for (k, slot) in t.iter_mut().enumerate() {
        let x = (k as i32 + TEMPLATE_START) as f64;
        let trough = -(-x * x / (2.0 * 1.2 * 1.2)).exp();
        let rebound = 0.3 * (-(x - 7.0).powi(2) / (2.0 * 2.4 * 2.4)).exp();
        *slot = (trough + rebound) as f32;
    }
    t
}

/// Ground truth for one synthesized artifact transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactTruth {
    pub channel: u32,
    pub onset_sample: u32,
    /// Signed plateau level (uV).
    pub peak_uv: f32,
    pub plateau_samples: u32,
    pub tau_samples: f32,
}

impl ArtifactTruth {
    pub fn value_at(&self, sample: usize) -> f32 {
        let on = self.onset_sample as usize;
        if sample < on {
            return 0.0;
        }
        let k = sample - on;
        if k < self.plateau_samples as usize {
            self.peak_uv
        } else {
            self.peak_uv * (-((k - self.plateau_samples as usize) as f32) / self.tau_samples).exp()
        }
    }

    /// Last sample at which the transient still has magnitude >= `level`.
    pub fn end_sample(&self, level: f32) -> usize {
        let p = self.peak_uv.abs();
        let on = self.onset_sample as usize + self.plateau_samples as usize;
        if p < level {
            return self.onset_sample as usize;
        }
        on + (self.tau_samples * (p / level).ln()).floor() as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spikes: Vec<SpikeRecord>,
    pub artifacts: Vec<ArtifactTruth>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub label: Option<u32>,
    pub session: u32,
    pub replicate: u32,
    pub day: u32,
    pub stimulus_index: u32,
    pub isi_s: f64,
}

/// Multi-channel voltage traces (uV) sampled at 20 kHz, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub n_channels: usize,
    pub n_samples: usize,
    pub sample_rate_hz: u32,
    pub t_stim_sample: usize,
    pub traces: Vec<f32>,
    pub meta: RecordingMeta,
    pub truth: GroundTruth,
}

impl RawRecording {
    pub fn channel(&self, ch: usize) -> &[f32] {
        &self.traces[ch * self.n_samples..(ch + 1) * self.n_samples]
    }

    pub fn post_window_ms(&self) -> f64 {
        (self.n_samples - self.t_stim_sample) as f64 / SAMPLES_PER_MS
    }

    /// Write the bit-exact binary trace format: `BRC1`, four little-endian
    /// u32 header fields, then channel-major little-endian f32 samples.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(TRACE_MAGIC)?;
        for x in [self.n_channels, self.n_samples, self.sample_rate_hz as usize, self.t_stim_sample] {
            let x = u32::try_from(x).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "header field exceeds u32"))?;
            w.write_all(&x.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.traces.len() * 4);
        for &v in &self.traces {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Read a binary trace file. Metadata and ground truth are not stored in
    /// the format and come back empty.
    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TRACE_MAGIC {
            return Err(bad(format!("bad trace magic {magic:?}")));
        }
        let mut header = [0u32; 4];
        for h in header.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *h = u32::from_le_bytes(b);
        }
        let [n_channels, n_samples, sample_rate_hz, t_stim_sample] = header;
        let len = n_channels as usize * n_samples as usize;
        let mut raw = vec![0u8; len * 4];
        r.read_exact(&mut raw)?;
        let traces = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        Ok(Self {
            n_channels: n_channels as usize,
            n_samples: n_samples as usize,
            sample_rate_hz,
            t_stim_sample: t_stim_sample as usize,
            traces,
            meta: RecordingMeta::default(),
            truth: GroundTruth::default(),
        })
    }
}

/// Write the ground-truth spike log as line-delimited JSON `{neuron, t_ms}`.
pub fn write_spike_log<W: Write>(mut w: W, spikes: &[SpikeRecord]) -> io::Result<()> {
    for s in spikes {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_spike_log<R: BufRead>(r: R) -> io::Result<Vec<SpikeRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::from))
        .collect()
}

/// Per-neuron list of `(channel, trough amplitude uV)` for every channel that sees it.
#[derive(Debug, Clone, Default)]
pub(crate) struct Contacts {
    offsets: Vec<u32>,
    /// `(channel, amplitude, delay in samples)`.
    entries: Vec<(u32, f32, u32)>,
}

impl Contacts {
    pub fn build(c: &Culture) -> Self {
        let rc = &c.cfg.recording;
        let mut offsets = vec![0u32];
        let mut entries: Vec<(u32, f32, u32)> = Vec::new();
        let reach = rc.spike_radius.floor() as i64 + 1;
        let mut axon_rng = rng::stream(c.cfg.seed, "culture-axons", 0);
        for &(r, col) in &c.positions {
            let start = entries.len();
            let (r0, c0) = (r.round() as i64, col.round() as i64);
            for er in (r0 - reach).max(0)..=(r0 + reach).min(GRID_SIZE as i64 - 1) {
                for ec in (c0 - reach).max(0)..=(c0 + reach).min(GRID_SIZE as i64 - 1) {
                    let d2 = (er as f64 - r).powi(2) + (ec as f64 - col).powi(2);
                    if d2 <= rc.spike_radius * rc.spike_radius {
                        let amp = rc.spike_amplitude_uv / (1.0 + d2 / rc.spike_half_distance.powi(2));
                        entries.push(((er as usize * GRID_SIZE + ec as usize) as u32, amp as f32, 0));
                    }
                }
            }
            // Straight axon in a random direction, seen once per pitch beyond the soma's reach.
            let theta = axon_rng.random::<f64>() * std::f64::consts::TAU;
            let (dr, dc) = (theta.sin(), theta.cos());
            let mut s = 1.0;
            while s <= rc.axon_length {
                let (ar, ac) = ((r + s * dr).round(), (col + s * dc).round());
                if !(0.0..GRID_SIZE as f64).contains(&ar) || !(0.0..GRID_SIZE as f64).contains(&ac) {
                    break;
                }
                let ch = (ar as usize * GRID_SIZE + ac as usize) as u32;
                if !entries[start..].iter().any(|e| e.0 == ch) {
                    let delay = (s / rc.conduction_pitch_per_ms * SAMPLES_PER_MS).round() as u32;
                    entries.push((ch, rc.axon_amplitude_uv as f32, delay));
                }
                s += 1.0;
            }
            offsets.push(entries.len() as u32);
        }
        Self { offsets, entries }
    }

    pub fn of(&self, neuron: usize) -> &[(u32, f32, u32)] {
        &self.entries[self.offsets[neuron] as usize..self.offsets[neuron + 1] as usize]
    }
}

/// Per-channel `(trough sample, amplitude)` contributions of ground-truth
/// spikes, somatic and axonal.
pub fn channel_spike_truth(c: &Culture, spikes: &[SpikeRecord]) -> Vec<Vec<(usize, f32)>> {
    let mut per = vec![Vec::new(); N_CHANNELS];
    for s in spikes {
        let sample = (s.t_ms * SAMPLES_PER_MS).round() as usize;
        for &(ch, amp, delay) in c.contacts.of(s.neuron as usize) {
            per[ch as usize].push((sample + delay as usize, amp));
        }
    }
    per
}

fn artifact_truth(c: &Culture, p: &StimPattern, onset: usize) -> Vec<ArtifactTruth> {
    let a = &c.cfg.artifact;
    if !a.enabled || p.waveform.amplitude_ua <= 0.0 {
        return Vec::new();
    }
    let r = a.radius as i64;
    // Nearest stimulated electrode per channel; positive poles win ties.
    let mut nearest: Vec<Option<(u16, bool)>> = vec![None; N_CHANNELS];
    for (pole, positive) in p.pairs.iter().flat_map(|q| [(q.positive, true), (q.negative, false)]) {
        for dr in -r..=r {
            for dc in -r..=r {
                let Ok(e) = pole.offset(dr, dc) else { continue };
                let ch = channel_index(e).expect("in bounds");
                let d = e.chebyshev(&pole);
                let better = match nearest[ch] {
                    None => true,
                    Some((bd, bpos)) => d < bd || (d == bd && positive && !bpos),
                };
                if better {
                    nearest[ch] = Some((d, positive));
                }
            }
        }
    }
    nearest
        .iter()
        .enumerate()
        .filter_map(|(ch, n)| {
            n.map(|(d, positive)| {
                let level = a.peak_uv / (1.0 + (d as f64).powi(2));
                ArtifactTruth {
                    channel: ch as u32,
                    onset_sample: onset as u32,
                    peak_uv: if positive { level as f32 } else { -level as f32 },
                    plateau_samples: (a.plateau_ms * SAMPLES_PER_MS).round() as u32,
                    tau_samples: (a.tau_ms * SAMPLES_PER_MS) as f32,
                }
            })
        })
        .collect()
}

fn synthesize(c: &Culture, n_samples: usize, truth: &GroundTruth, seed: u64) -> Vec<f32> {
    let noise = c.cfg.recording.noise_uv as f32;
    let template = spike_template();
    let per_channel = channel_spike_truth(c, &truth.spikes);
    let mut artifacts: Vec<Option<ArtifactTruth>> = vec![None; N_CHANNELS];
    for a in &truth.artifacts {
        artifacts[a.channel as usize] = Some(*a);
    }
    let mut traces = vec![0f32; N_CHANNELS * n_samples];
    traces.par_chunks_mut(n_samples).enumerate().for_each(|(ch, out)| {
        if noise > 0.0 {
            let mut r = rng::Rng::seed_from_u64(rng::derive(seed, "trace-noise", ch as u64));
            for x in out.iter_mut() {
                let z: f32 = StandardNormal.sample(&mut r);
                *x = z * noise;
            }
        }
        for &(sample, amp) in &per_channel[ch] {
            for (k, &tv) in template.iter().enumerate() {
                let s = sample as i64 + TEMPLATE_START as i64 + k as i64;
                if (0..n_samples as i64).contains(&s) {
                    out[s as usize] += amp * tv;
                }
            }
        }
        if let Some(a) = &artifacts[ch] {
            for (s, x) in out.iter_mut().enumerate().skip(a.onset_sample as usize) {
                *x += a.value_at(s);
            }
        }
    });
    traces
}

impl Culture {
    fn window(&self, total_ms: f64, onset_ms: f64) -> Window {
        let dt = self.cfg.recording.dt_ms;
        Window {
            warmup_steps: (self.cfg.recording.warmup_ms / dt).round() as usize,
            recorded_steps: (total_ms / dt).round() as usize,
            onset_step: (onset_ms / dt).round() as usize,
        }
    }
}

/// Unstimulated activity. `t_stim_sample` is set where `stimulate` would put
/// the onset, so windowed counts line up with stimulated recordings.
pub fn spontaneous_window(c: &Culture, duration_ms: f64, seed: u64) -> Result<RawRecording, CultureError> {
    if !(duration_ms > 0.0) {
        return Err(CultureError::Config(format!("duration {duration_ms} ms must be positive")));
    }
    let rc = &c.cfg.recording;
    let n_samples = (duration_ms * SAMPLES_PER_MS).round() as usize;
    let onset_ms = rc.pre_ms.min(duration_ms);
    let spikes = sim::run(c, &c.window(duration_ms, onset_ms), None, seed);
    let truth = GroundTruth { spikes, artifacts: Vec::new() };
    let traces = synthesize(c, n_samples, &truth, seed);
    Ok(RawRecording {
        n_channels: N_CHANNELS,
        n_samples,
        sample_rate_hz: SAMPLE_RATE_HZ,
        t_stim_sample: ((onset_ms * SAMPLES_PER_MS).round() as usize).min(n_samples.saturating_sub(1)),
        traces,
        meta: RecordingMeta { day: c.day_index, isi_s: rc.isi_s, ..Default::default() },
        truth,
    })
}

/// Network response to one stimulus without trace synthesis. Spike times
/// are relative to the start of the pre-stimulus window.
pub fn evoked_spikes(c: &Culture, p: &StimPattern, pre_ms: f64, post_ms: f64, seed: u64) -> Result<Vec<SpikeRecord>, CultureError> {
    check_stimulus(p, pre_ms, post_ms)?;
    Ok(sim::run(c, &c.window(pre_ms + post_ms, pre_ms), Some(p), seed))
}

fn check_stimulus(p: &StimPattern, pre_ms: f64, post_ms: f64) -> Result<(), CultureError> {
    let violations: Vec<Violation> = validate_pattern(p)
        .into_iter()
        .filter(|v| !(p.waveform.amplitude_ua == 0.0 && matches!(v, Violation::Waveform(_))))
        .collect();
    if !violations.is_empty() {
        return Err(CultureError::Pattern(violations));
    }
    if !(pre_ms >= 0.0 && post_ms > 0.0) {
        return Err(CultureError::Config(format!("bad window: pre {pre_ms} ms, post {post_ms} ms")));
    }
    Ok(())
}

/// Deliver `p` after `pre_ms` of baseline and record until `post_ms` after
/// onset. A pattern with zero amplitude is a null stimulus.
pub fn stimulate(c: &Culture, p: &StimPattern, pre_ms: f64, post_ms: f64, seed: u64) -> Result<RawRecording, CultureError> {
    check_stimulus(p, pre_ms, post_ms)?;
    let total = pre_ms + post_ms;
    let n_samples = (total * SAMPLES_PER_MS).round() as usize;
    let onset = (pre_ms * SAMPLES_PER_MS).round() as usize;
    let spikes = sim::run(c, &c.window(total, pre_ms), Some(p), seed);
    let truth = GroundTruth { spikes, artifacts: artifact_truth(c, p, onset) };
    let traces = synthesize(c, n_samples, &truth, seed);
    Ok(RawRecording {
        n_channels: N_CHANNELS,
        n_samples,
        sample_rate_hz: SAMPLE_RATE_HZ,
        t_stim_sample: onset,
        traces,
        meta: RecordingMeta { label: Some(p.label), day: c.day_index, isi_s: c.cfg.recording.isi_s, ..Default::default() },
        truth,
    })
}

/// Distance in channels from `ch` to the nearest positive pole of `p`.
pub fn distance_to_stimulus(p: &StimPattern, ch: usize) -> f64 {
    let e = coord_of(ch).expect("valid channel");
    p.pairs.iter().map(|q| q.positive.euclidean(&e)).fold(f64::INFINITY, f64::min)
}
