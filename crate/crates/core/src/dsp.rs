//! Acquisition pipeline: double-threshold spike detection, artifact
//! rejection by amplitude and normalized area, and windowed spike-count
//! state extraction with stimulated-region masking.

use crate::culture::{RawRecording, SAMPLES_PER_MS};
use crate::grid::{channel_index, StimPattern, GRID_SIZE, N_CHANNELS};
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("normalized area undefined for an empty or all-zero snippet")]
    UndefinedArea,
    #[error("detector config: {0}")]
    Config(String),
    #[error("window W = {0} ms must be positive")]
    Window(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Low threshold multiplier on the full-trace standard deviation.
    pub thr_l: f64,
    /// High threshold multiplier on the cleaned noise estimate.
    pub thr_h: f64,
    /// Half-width of the segment excised around each low-threshold crossing.
    pub w_s_ms: f64,
    /// Half-width of the waveform snippet stored with each event. Events are
    /// the largest |V| within this half-width, so `|peak| = max |snippet|`.
    pub snippet_ms: f64,
    /// Minimum spacing between events on one channel.
    pub refractory_ms: f64,
    /// Rounds of excise-and-re-estimate for the noise level.
    pub noise_rounds: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { thr_l: 3.0, thr_h: 5.0, w_s_ms: 2.0, snippet_ms: 2.0, refractory_ms: 1.0, noise_rounds: 8 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.thr_l > 0.0 && self.thr_h >= self.thr_l) {
            return Err(DspError::Config(format!("need thr_h >= thr_l > 0, got {} / {}", self.thr_h, self.thr_l)));
        }
        if !(self.w_s_ms >= 0.0 && self.snippet_ms >= 0.0 && self.refractory_ms >= 0.0) {
            return Err(DspError::Config("window lengths must be non-negative".into()));
        }
        if self.noise_rounds == 0 {
            return Err(DspError::Config("noise_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub channel: u32,
    pub t_sample: u32,
    /// Signed voltage at the |V| maximum.
    pub peak_uv: f32,
    pub snippet: Vec<f32>,
}

fn std_where(trace: &[f32], keep: impl Fn(usize) -> bool) -> Option<f64> {
    let (mut n, mut s, mut s2) = (0usize, 0f64, 0f64);
    for (i, &x) in trace.iter().enumerate() {
        if keep(i) {
            n += 1;
            s += x as f64;
            s2 += (x as f64) * (x as f64);
        }
    }
    if n < 2 {
        return None;
    }
    let mean = s / n as f64;
    Some(((s2 / n as f64) - mean * mean).max(0.0).sqrt())
}

/// Noise level after excising `±half` samples around every sample whose
/// magnitude exceeds `thr_l` times the current estimate. The first round
/// starts from the full-trace deviation; later rounds refine it.
pub fn noise_estimate(trace: &[f32], cfg: &DetectorConfig) -> Option<(f64, f64)> {
    let sigma = std_where(trace, |_| true)?;
    if sigma == 0.0 {
        return None;
    }
    let half = (cfg.w_s_ms * SAMPLES_PER_MS).round() as usize;
    let n = trace.len();
    let mut excluded = vec![false; n];
    let mut sigma_n = sigma;
    for _ in 0..cfg.noise_rounds {
        let level = (cfg.thr_l * sigma_n) as f32;
        // Difference array marks the union of [i - half, i + half].
        let mut diff = vec![0i32; n + 1];
        for (i, &x) in trace.iter().enumerate() {
            if x.abs() > level {
                diff[i.saturating_sub(half)] += 1;
                diff[(i + half + 1).min(n)] -= 1;
            }
        }
        let mut run = 0;
        for i in 0..n {
            run += diff[i];
            excluded[i] = run > 0;
        }
        let next = match std_where(trace, |i| !excluded[i]) {
            Some(s) if s > 0.0 => s,
            _ => break,
        };
        let done = (next - sigma_n).abs() <= 1e-3 * sigma_n;
        sigma_n = next;
        if done {
            break;
        }
    }
    Some((sigma, sigma_n))
}

/// Double-threshold detection on one channel.
///
/// The full-trace deviation seeds a low-threshold pass whose crossings are
/// excised to estimate the noise floor `sigma_n`. Events are samples whose
/// |V| exceeds `thr_h * sigma_n` and is the largest |V| within the snippet
/// half-width (and at least the refractory spacing) on either side. A
/// constant trace has no noise floor and yields no events.
pub fn detect_spikes(trace: &[f32], channel: u32, cfg: &DetectorConfig) -> Vec<SpikeEvent> {
    let Some((_, sigma_n)) = noise_estimate(trace, cfg) else {
        return Vec::new();
    };
    let level = (cfg.thr_h * sigma_n) as f32;
    let half = ((cfg.snippet_ms.max(cfg.refractory_ms)) * SAMPLES_PER_MS).round() as usize;
    let snip = (cfg.snippet_ms * SAMPLES_PER_MS).round() as usize;
    let n = trace.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let a = trace[i].abs();
        if a <= level {
            i += 1;
            continue;
        }
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        // Earlier samples must be strictly smaller, later ones not larger.
        let dominated = trace[lo..i].iter().any(|x| x.abs() >= a) || trace[i + 1..=hi].iter().any(|x| x.abs() > a);
        if dominated {
            i += 1;
            continue;
        }
        let s_lo = i.saturating_sub(snip);
        let s_hi = (i + snip).min(n - 1);
        out.push(SpikeEvent {
            channel,
            t_sample: i as u32,
            peak_uv: trace[i],
            snippet: trace[s_lo..=s_hi].to_vec(),
        });
        // Nothing else can win inside this neighbourhood.
        i = hi + 1;
    }
    out
}

/// `S = sum |V| / max |V|`, between 1 and the snippet length.
pub fn normalized_area(snippet: &[f32]) -> Result<f64, DspError> {
    let max = snippet.iter().fold(0f32, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Err(DspError::UndefinedArea);
    }
    let sum: f64 = snippet.iter().map(|x| x.abs() as f64).sum();
    Ok(sum / max as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtifactFilter {
    pub v_thr_uv: f64,
    pub w_thr: f64,
}

impl Default for ArtifactFilter {
    fn default() -> Self {
        Self { v_thr_uv: 500.0, w_thr: 25.0 }
    }
}

impl ArtifactFilter {
    pub fn is_artifact(&self, e: &SpikeEvent) -> bool {
        if (e.peak_uv.abs() as f64) > self.v_thr_uv {
            return true;
        }
        // An all-zero snippet cannot come from a detected event; treat it as suspect.
        normalized_area(&e.snippet).map_or(true, |s| s > self.w_thr)
    }
}

/// Split events into `(kept, rejected)`, preserving input order in each.
pub fn remove_artifacts(events: Vec<SpikeEvent>, filter: &ArtifactFilter) -> (Vec<SpikeEvent>, Vec<SpikeEvent>) {
    events.into_iter().partition(|e| !filter.is_artifact(e))
}

/// Channels within Chebyshev distance `margin` of any electrode of `p`.
pub fn stim_mask(p: &StimPattern, margin: u16) -> Vec<bool> {
    let mut mask = vec![false; N_CHANNELS];
    let m = margin as i64;
    for e in p.electrodes() {
        let (r, c) = (e.row as i64, e.col as i64);
        for rr in (r - m).max(0)..=(r + m).min(GRID_SIZE as i64 - 1) {
            for cc in (c - m).max(0)..=(c + m).min(GRID_SIZE as i64 - 1) {
                mask[rr as usize * GRID_SIZE + cc as usize] = true;
            }
        }
    }
    mask
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateMeta {
    pub w_ms: f64,
    pub t_stim_sample: u32,
    pub session: u32,
    pub replicate: u32,
    pub day: u32,
    pub stimulus_index: u32,
}

/// Per-channel evoked spike counts for one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirState {
    pub counts: Vec<u32>,
    pub mask: Vec<bool>,
    pub label: u32,
    pub meta: StateMeta,
}

impl ReservoirState {
    pub fn features(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Last sample (inclusive) of a `w_ms` window starting at `t_stim_sample`.
pub fn window_end(t_stim_sample: u32, w_ms: f64) -> u64 {
    t_stim_sample as u64 + (w_ms * SAMPLES_PER_MS).round() as u64
}

/// Count kept events with `t_s <= t <= t_s + W` per channel, then zero the
/// masked channels.
pub fn extract_state(
    events_by_channel: &[Vec<SpikeEvent>],
    t_stim_sample: u32,
    w_ms: f64,
    mask: &[bool],
    label: u32,
) -> Result<ReservoirState, DspError> {
    if !(w_ms > 0.0) {
        return Err(DspError::Window(w_ms));
    }
    let end = window_end(t_stim_sample, w_ms);
    let mut counts = vec![0u32; N_CHANNELS];
    for (ch, evs) in events_by_channel.iter().enumerate().take(N_CHANNELS) {
        if mask.get(ch).copied().unwrap_or(false) {
            continue;
        }
        counts[ch] = evs
            .iter()
            .filter(|e| e.t_sample >= t_stim_sample && (e.t_sample as u64) <= end)
            .count() as u32;
    }
    Ok(ReservoirState {
        counts,
        mask: mask.to_vec(),
        label,
        meta: StateMeta { w_ms, t_stim_sample, ..Default::default() },
    })
}

/// Detection output for one recording, split by artifact filtering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessedRecording {
    pub t_stim_sample: u32,
    pub n_samples: u32,
    pub kept: Vec<Vec<SpikeEvent>>,
    pub rejected: Vec<Vec<SpikeEvent>>,
}

impl ProcessedRecording {
    pub fn post_window_ms(&self) -> f64 {
        (self.n_samples - self.t_stim_sample) as f64 / SAMPLES_PER_MS
    }

    pub fn state(&self, w_ms: f64, mask: &[bool], label: u32) -> Result<ReservoirState, DspError> {
        extract_state(&self.kept, self.t_stim_sample, w_ms, mask, label)
    }

    /// Drop waveform snippets once filtering is done.
    pub fn without_snippets(mut self) -> Self {
        for e in self.kept.iter_mut().chain(self.rejected.iter_mut()).flatten() {
            e.snippet = Vec::new();
        }
        self
    }
}

/// Detect and filter every channel of a recording.
pub fn process_recording(rec: &RawRecording, det: &DetectorConfig, filter: &ArtifactFilter) -> ProcessedRecording {
    use rayon::prelude::*;
    let (kept, rejected): (Vec<_>, Vec<_>) = (0..rec.n_channels)
        .into_par_iter()
        .map(|ch| remove_artifacts(detect_spikes(rec.channel(ch), ch as u32, det), filter))
        .unzip();
    ProcessedRecording { t_stim_sample: rec.t_stim_sample as u32, n_samples: rec.n_samples as u32, kept, rejected }
}

/// One line of the spike-event export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub channel: u32,
    pub t_sample: u32,
    pub peak_uv: f32,
    #[serde(rename = "S")]
    pub s: f64,
    pub kept: bool,
}

pub fn write_events<W: Write>(mut w: W, p: &ProcessedRecording) -> io::Result<()> {
    let tagged = p.kept.iter().flatten().map(|e| (e, true)).chain(p.rejected.iter().flatten().map(|e| (e, false)));
    let mut all: Vec<_> = tagged.collect();
    all.sort_by_key(|(e, _)| (e.channel, e.t_sample));
    for (e, kept) in all {
        let rec = EventRecord {
            channel: e.channel,
            t_sample: e.t_sample,
            peak_uv: e.peak_uv,
            s: normalized_area(&e.snippet).unwrap_or(f64::NAN),
            kept,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events<R: BufRead>(r: R) -> io::Result<Vec<EventRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::from))
        .collect()
}

/// Stimulated-region check helper for reports: channel index of an electrode.
pub fn channel_of(e: crate::grid::ElectrodeCoord) -> usize {
    channel_index(e).expect("pattern electrodes are in bounds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BipolarPair, ElectrodeCoord, Waveform};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn ev(channel: u32, t_sample: u32, peak: f32, snippet: Vec<f32>) -> SpikeEvent {
        SpikeEvent { channel, t_sample, peak_uv: peak, snippet }
    }

    #[test]
    fn zero_trace_has_no_events() {
        assert!(detect_spikes(&[0.0; 500], 0, &DetectorConfig::default()).is_empty());
        assert!(detect_spikes(&[3.0; 500], 0, &DetectorConfig::default()).is_empty());
    }

    fn noisy_spike(seed: u64) -> (Vec<f32>, usize) {
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, 5.0).unwrap();
        let mut t: Vec<f32> = (0..4000).map(|_| noise.sample(&mut rng)).collect();
        let at = 1700 + (seed as usize % 300);
        let template = crate::culture::spike_template();
        for (k, v) in template.iter().enumerate() {
            t[(at as i64 + crate::culture::TEMPLATE_START as i64 + k as i64) as usize] += 60.0 * v;
        }
        (t, at)
    }

    #[test]
    fn single_inserted_spike_is_found() {
        let cfg = DetectorConfig::default();
        let mut ok = 0;
        for seed in 0..100 {
            let (t, at) = noisy_spike(seed);
            let evs = detect_spikes(&t, 0, &cfg);
            if evs.len() == 1 && (evs[0].t_sample as i64 - at as i64).abs() <= 2 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok}/100");
    }

    #[test]
    fn huge_threshold_finds_nothing() {
        let (t, _) = noisy_spike(3);
        let cfg = DetectorConfig { thr_h: 1000.0, ..Default::default() };
        assert!(detect_spikes(&t, 0, &cfg).is_empty());
    }

    #[test]
    fn snippet_peak_invariant() {
        let (mut t, _) = noisy_spike(4);
        for (k, x) in t.iter_mut().enumerate().skip(200).take(300) {
            *x += 300.0 * (-(k as f32 - 200.0) / 80.0).exp();
        }
        for e in detect_spikes(&t, 0, &DetectorConfig::default()) {
            let m = e.snippet.iter().fold(0f32, |m, x| m.max(x.abs()));
            assert_eq!(m, e.peak_uv.abs());
            assert_eq!(t[e.t_sample as usize], e.peak_uv);
        }
    }

    #[test]
    fn normalized_area_examples() {
        assert_eq!(normalized_area(&[0.0, 0.0, 7.0, 0.0]).unwrap(), 1.0);
        assert_eq!(normalized_area(&[500.0; 30]).unwrap(), 30.0);
        assert_eq!(normalized_area(&[0.0, 100.0, 0.0]).unwrap(), 1.0);
        assert_eq!(normalized_area(&[0.0; 4]), Err(DspError::UndefinedArea));
        assert_eq!(normalized_area(&[]), Err(DspError::UndefinedArea));
    }

    #[test]
    fn artifact_rules() {
        let f = ArtifactFilter::default();
        let mut spike = vec![0.0f32; 81];
        spike[40] = -800.0;
        assert!(f.is_artifact(&ev(0, 10, -800.0, spike)));
        let long = vec![300.0f32; 30];
        assert!((normalized_area(&long).unwrap() - 30.0).abs() < 1e-12);
        assert!(f.is_artifact(&ev(0, 10, 300.0, long)));
        // S = 4 exactly: one full sample plus six at half height.
        let mut short = vec![0.0f32; 81];
        short[40] = -60.0;
        for k in 0..6 {
            short[34 + k] = 30.0;
        }
        assert!((normalized_area(&short).unwrap() - 4.0).abs() < 1e-12);
        assert!(!f.is_artifact(&ev(0, 10, -60.0, short)));
    }

    #[test]
    fn template_area_is_spike_like() {
        let t = crate::culture::spike_template();
        let s = normalized_area(&t).unwrap();
        assert!((3.0..6.0).contains(&s), "template S = {s}");
    }

    #[test]
    fn partition_is_exact_and_idempotent() {
        let f = ArtifactFilter::default();
        let evs = vec![
            ev(0, 1, -60.0, vec![0.0, -60.0, 20.0]),
            ev(0, 50, 900.0, vec![900.0]),
            ev(1, 5, 200.0, vec![200.0; 40]),
        ];
        let (kept, rejected) = remove_artifacts(evs.clone(), &f);
        assert_eq!(kept.len() + rejected.len(), evs.len());
        assert_eq!(kept, vec![evs[0].clone()]);
        let (again, none) = remove_artifacts(kept.clone(), &f);
        assert_eq!(again, kept);
        assert!(none.is_empty());
    }

    fn pair_at(r: i64, c: i64) -> StimPattern {
        let pos = ElectrodeCoord::new(r, c).unwrap();
        StimPattern::new(0, vec![BipolarPair::rightward(pos).unwrap()], Waveform::monophasic(10.0, 20.0))
    }

    #[test]
    fn mask_of_single_pair() {
        let p = pair_at(20, 20);
        let m = stim_mask(&p, 2);
        // Union of two 5x5 squares centered one column apart.
        let mut oracle = 0;
        for r in 0..64i64 {
            for c in 0..64i64 {
                let near = |cc: i64| (r - 20).abs() <= 2 && (c - cc).abs() <= 2;
                if near(20) || near(21) {
                    oracle += 1;
                    assert!(m[r as usize * 64 + c as usize]);
                }
            }
        }
        assert_eq!(oracle, 30);
        assert_eq!(m.iter().filter(|x| **x).count(), 30);
        let m0 = stim_mask(&p, 0);
        assert_eq!(m0.iter().filter(|x| **x).count(), 2);
        assert!(m0[20 * 64 + 20] && m0[20 * 64 + 21]);
        let corner = stim_mask(&pair_at(0, 0), 2);
        assert_eq!(corner.iter().filter(|x| **x).count(), 3 * 4);
    }

    #[test]
    fn window_counts() {
        let ts = 1000u32;
        let evs: Vec<SpikeEvent> = [1.0, 3.0, 7.0].iter().map(|ms| ev(5, ts + (ms * 20.0) as u32, -50.0, vec![])).collect();
        let mut by = vec![Vec::new(); N_CHANNELS];
        by[5] = evs;
        let none = vec![false; N_CHANNELS];
        assert_eq!(extract_state(&by, ts, 5.0, &none, 0).unwrap().counts[5], 2);
        assert_eq!(extract_state(&by, ts, 10.0, &none, 0).unwrap().counts[5], 3);
        let mut masked = none.clone();
        masked[5] = true;
        assert_eq!(extract_state(&by, ts, 10.0, &masked, 0).unwrap().counts[5], 0);
        assert!(extract_state(&by, ts, 0.0, &none, 0).is_err());
        // Both window ends are inclusive.
        by[6] = vec![ev(6, ts, -50.0, vec![]), ev(6, ts + 100, -50.0, vec![]), ev(6, ts + 101, -50.0, vec![])];
        assert_eq!(extract_state(&by, ts, 5.0, &none, 0).unwrap().counts[6], 2);
    }
}
