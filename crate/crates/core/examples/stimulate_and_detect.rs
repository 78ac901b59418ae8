//! Deliver one bipolar pulse, then run detection and artifact rejection.

use brc::culture::{grow_culture, stimulate, CultureConfig};
use brc::dsp::{process_recording, stim_mask, ArtifactFilter, DetectorConfig};
use brc::grid::{ElectrodeCoord, Waveform};
use brc::patterns::make_pointwise;

fn main() {
    let cfg = CultureConfig::default();
    let c = grow_culture(&cfg).unwrap();
    let p = make_pointwise(0, ElectrodeCoord::new(32, 32).unwrap(), Waveform::monophasic(10.0, 20.0)).unwrap();
    let rec = stimulate(&c, &p, cfg.recording.pre_ms, cfg.recording.post_ms, 7).unwrap();
    println!(
        "{} samples x {} channels, stimulus at sample {}, {} true spikes, {} artifact channels",
        rec.n_samples,
        rec.n_channels,
        rec.t_stim_sample,
        rec.truth.spikes.len(),
        rec.truth.artifacts.len()
    );

    let proc = process_recording(&rec, &DetectorConfig::default(), &ArtifactFilter::default());
    let mask = stim_mask(&p, 2);
    let count = |evs: &[Vec<brc::dsp::SpikeEvent>], inside: bool| {
        evs.iter().enumerate().filter(|(ch, _)| mask[*ch] == inside).map(|(_, e)| e.len()).sum::<usize>()
    };
    println!("near the stimulus: kept {}, rejected {}", count(&proc.kept, true), count(&proc.rejected, true));
    println!("elsewhere:         kept {}, rejected {}", count(&proc.kept, false), count(&proc.rejected, false));

    for w in [5.0, 10.0, 20.0] {
        let s = proc.state(w, &mask, p.label).unwrap();
        println!("W = {w:>4} ms: {} events on {} channels", s.counts.iter().sum::<u32>(), s.counts.iter().filter(|&&n| n > 0).count());
    }
}
