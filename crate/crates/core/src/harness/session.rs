use super::{Family, FamilyConfig, HarnessConfig, HarnessError};
use crate::ar::{ar_state, estimate_noise, EsnReservoir, NoiseFamily, NoiseModel};
use crate::culture::{spontaneous_window, stimulate, Culture};
use crate::dsp::{extract_state, process_recording, stim_mask, write_events, ProcessedRecording, ReservoirState};
use crate::grid::{StimPattern, N_CHANNELS};
use crate::patterns::{
    load_mnist_idx, make_bar, make_clock_digit, make_pointwise, map_mnist, ClockGeometry, MnistImage, BAR_ORIENTATIONS,
};
use crate::readout::{LabeledDataset, SampleTag};
use crate::rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

/// A seeded random subset of `n` images, in file order.
pub fn load_mnist_subset(fc: &FamilyConfig, n: usize, seed: u64) -> Result<Vec<MnistImage>, HarnessError> {
    let imgs = load_mnist_idx(&fc.mnist_images_path, &fc.mnist_labels_path)?;
    if imgs.len() < n {
        return Err(HarnessError::Protocol(format!("need {n} MNIST images, the files hold {}", imgs.len())));
    }
    let mut pick = rand::seq::index::sample(&mut rng::stream(seed, "mnist-subset", 0), imgs.len(), n).into_vec();
    pick.sort_unstable();
    Ok(pick.into_iter().map(|i| imgs[i].clone()).collect())
}

/// Draw an MNIST pattern, redrawing from fresh substreams while it is empty.
fn draw_mnist(img: &MnistImage, fc: &FamilyConfig, seed: u64) -> Result<StimPattern, HarnessError> {
    for attempt in 0..1000u64 {
        let p = map_mnist(img, &fc.mnist, fc.mnist_waveform, rng::derive(seed, "mnist-redraw", attempt))?;
        if !p.pairs.is_empty() {
            return Ok(p);
        }
    }
    Err(HarnessError::Protocol(format!("image with label {} never produced a stimulated pixel", img.label)))
}

/// The fixed stimulus set of a family. For MNIST, one draw per image.
pub fn canonical_patterns(family: Family, cfg: &HarnessConfig) -> Result<Vec<StimPattern>, HarnessError> {
    let fc = &cfg.families;
    Ok(match family {
        Family::Pointwise => fc
            .pointwise_sites
            .iter()
            .enumerate()
            .map(|(i, &s)| make_pointwise(i as u32, s, fc.pointwise_waveform))
            .collect::<Result<_, _>>()?,
        Family::Bars => BAR_ORIENTATIONS
            .iter()
            .enumerate()
            .map(|(i, &o)| make_bar(i as u32, o, fc.bar_center, fc.bar_pairs, fc.bar_dilation, fc.bar_waveform))
            .collect::<Result<_, _>>()?,
        Family::Clock => {
            let geom = ClockGeometry::new(fc.clock_origin, fc.clock_segment_length)?;
            (0..10u8).map(|d| make_clock_digit(d, &geom, fc.clock_waveform)).collect::<Result<_, _>>()?
        }
        Family::Mnist => load_mnist_subset(fc, cfg.protocol.mnist_images, cfg.protocol.seed)?
            .iter()
            .enumerate()
            .map(|(i, img)| draw_mnist(img, fc, rng::derive(cfg.protocol.seed, "mnist-canonical", i as u64)))
            .collect::<Result<_, _>>()?,
    })
}

pub fn n_classes(family: Family, cfg: &HarnessConfig) -> usize {
    match family {
        Family::Pointwise => cfg.families.pointwise_sites.len(),
        Family::Bars => BAR_ORIENTATIONS.len(),
        Family::Clock | Family::Mnist => 10,
    }
}

/// `reps` copies of each of `n_items` indices in a seeded random order.
pub fn delivery_order(n_items: usize, reps: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_items).flat_map(|i| std::iter::repeat(i).take(reps)).collect();
    order.shuffle(&mut rng::stream(seed, "delivery-order", 0));
    order
}

/// Stimulus sequence of one session. Both substrates consume the same plan.
#[derive(Debug, Clone)]
pub struct SessionPlan {
    pub session: u32,
    pub replicate: u32,
    pub day: u32,
    pub seed: u64,
    pub deliveries: Vec<StimPattern>,
}

pub fn session_plan(
    family: Family,
    cfg: &HarnessConfig,
    canonical: &[StimPattern],
    images: Option<&[MnistImage]>,
    replicate: u32,
    day: u32,
) -> Result<SessionPlan, HarnessError> {
    let session = replicate * cfg.protocol.n_days as u32 + day;
    let seed = rng::derive(cfg.protocol.seed, "session", session as u64);
    let deliveries = match (family, images) {
        (Family::Mnist, Some(imgs)) => delivery_order(imgs.len(), cfg.protocol.mnist_repetitions, seed)
            .into_iter()
            .enumerate()
            .map(|(k, i)| draw_mnist(&imgs[i], &cfg.families, rng::derive(seed, "mnist-map", k as u64)))
            .collect::<Result<_, _>>()?,
        (Family::Mnist, None) => return Err(HarnessError::Protocol("MNIST sessions need the image subset".into())),
        _ => delivery_order(canonical.len(), cfg.protocol.repetitions_per_pattern, seed)
            .into_iter()
            .map(|i| canonical[i].clone())
            .collect(),
    };
    Ok(SessionPlan { session, replicate, day, seed, deliveries })
}

/// Detected and filtered events of every delivery in a session.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub plan: SessionPlan,
    pub processed: Vec<ProcessedRecording>,
}

impl SessionRecord {
    pub fn post_window_ms(&self) -> f64 {
        self.processed.iter().map(|p| p.post_window_ms()).fold(f64::INFINITY, f64::min)
    }

    pub fn states(&self, w_ms: f64, margin: u16) -> Result<Vec<ReservoirState>, HarnessError> {
        self.plan
            .deliveries
            .iter()
            .zip(&self.processed)
            .enumerate()
            .map(|(i, (p, rec))| {
                let mut s = rec.state(w_ms, &stim_mask(p, margin), p.label)?;
                s.meta.session = self.plan.session;
                s.meta.replicate = self.plan.replicate;
                s.meta.day = self.plan.day;
                s.meta.stimulus_index = i as u32;
                Ok(s)
            })
            .collect()
    }

    pub fn dataset(&self, w_ms: f64, margin: u16, n_classes: usize) -> Result<LabeledDataset, HarnessError> {
        let states = self.states(w_ms, margin)?;
        let mut ds = LabeledDataset::new(
            states.iter().map(|s| s.features()).collect(),
            states.iter().map(|s| s.label).collect(),
            n_classes,
        );
        ds.tags = (0..states.len()).map(|i| tag(&self.plan, i)).collect();
        Ok(ds)
    }
}

fn tag(plan: &SessionPlan, i: usize) -> SampleTag {
    SampleTag { session: plan.session, replicate: plan.replicate, day: plan.day, stimulus_index: i as u32 }
}

/// Stimulate, detect and filter every delivery of `plan`. With `out`,
/// events and raw traces are written there when the protocol asks for them.
pub fn record_session(
    culture: &Culture,
    plan: &SessionPlan,
    cfg: &HarnessConfig,
    out: Option<&Path>,
) -> Result<SessionRecord, HarnessError> {
    let rc = &cfg.culture.recording;
    let proto = &cfg.protocol;
    if let Some(dir) = out {
        if proto.write_events {
            fs::create_dir_all(dir.join("events"))?;
        }
        if proto.write_traces {
            fs::create_dir_all(dir.join("traces"))?;
        }
    }
    let processed = plan
        .deliveries
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rec = stimulate(culture, p, rc.pre_ms, rc.post_ms, rng::derive(plan.seed, "stimulus", i as u64))
                .map_err(|source| HarnessError::Stimulus { index: i, source })?;
            rec.meta.session = plan.session;
            rec.meta.replicate = plan.replicate;
            rec.meta.day = plan.day;
            rec.meta.stimulus_index = i as u32;
            let proc = process_recording(&rec, &cfg.detector, &cfg.artifact_filter);
            if let Some(dir) = out {
                let stem = format!("s{:02}_i{:04}", plan.session, i);
                if proto.write_events {
                    write_events(BufWriter::new(File::create(dir.join("events").join(format!("{stem}.jsonl")))?), &proc)?;
                }
                if proto.write_traces {
                    rec.write_binary(BufWriter::new(File::create(dir.join("traces").join(format!("{stem}.bin")))?))?;
                }
            }
            Ok(proc.without_snippets())
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SessionRecord { plan: plan.clone(), processed })
}

/// Repeat each pattern, shuffle the deliveries, then stimulate, detect,
/// filter and count in the protocol window.
pub fn run_session(
    culture: &Culture,
    patterns: &[StimPattern],
    cfg: &HarnessConfig,
    seed: u64,
) -> Result<LabeledDataset, HarnessError> {
    let deliveries = delivery_order(patterns.len(), cfg.protocol.repetitions_per_pattern, seed)
        .into_iter()
        .map(|i| patterns[i].clone())
        .collect();
    let plan = SessionPlan { session: 0, replicate: 0, day: culture.day_index, seed, deliveries };
    let n_classes = patterns.iter().map(|p| p.label as usize + 1).max().unwrap_or(0);
    let w = cfg.protocol.w_ms.unwrap_or(5.0);
    record_session(culture, &plan, cfg, None)?.dataset(w, cfg.protocol.mask_margin, n_classes)
}

/// Fit the artificial-reservoir noise on spontaneous windows of `culture`.
pub fn calibrate_noise(culture: &Culture, cfg: &HarnessConfig, w_ms: f64, seed: u64) -> Result<NoiseModel, HarnessError> {
    let rc = &cfg.culture.recording;
    let unmasked = vec![false; N_CHANNELS];
    let windows = (0..cfg.protocol.noise_windows)
        .into_par_iter()
        .map(|i| {
            let rec = spontaneous_window(culture, rc.pre_ms + rc.post_ms, rng::derive(seed, "spontaneous", i as u64))?;
            let proc = process_recording(&rec, &cfg.detector, &cfg.artifact_filter);
            Ok(extract_state(&proc.kept, proc.t_stim_sample, w_ms, &unmasked, 0)?.counts)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(estimate_noise(&windows, NoiseFamily::Poisson)?)
}

/// Artificial-reservoir states for the deliveries of `plan`.
pub fn ar_dataset(
    esn: &EsnReservoir,
    plan: &SessionPlan,
    noise: &NoiseModel,
    cfg: &HarnessConfig,
    n_classes: usize,
) -> LabeledDataset {
    let x: Vec<Vec<f64>> = plan
        .deliveries
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut x = ar_state(esn, p, noise, rng::derive(plan.seed, "ar-state", i as u64));
            if cfg.protocol.mask_ar_states {
                for (v, m) in x.iter_mut().zip(stim_mask(p, cfg.protocol.mask_margin)) {
                    if m {
                        *v = 0.0;
                    }
                }
            }
            x
        })
        .collect();
    let mut ds = LabeledDataset::new(x, plan.deliveries.iter().map(|p| p.label).collect(), n_classes);
    ds.tags = (0..plan.deliveries.len()).map(|i| tag(plan, i)).collect();
    ds
}
