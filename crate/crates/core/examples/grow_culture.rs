//! Grow the default culture and look at its spontaneous activity.

use brc::culture::{grow_culture, spontaneous_window, CultureConfig};
use brc::dsp::{process_recording, ArtifactFilter, DetectorConfig};

fn main() {
    let cfg = CultureConfig::default();
    let c = grow_culture(&cfg).expect("valid config");
    let n_exc = c.excitatory.iter().filter(|&&e| e).count();
    println!("{} neurons ({} excitatory), {} synapses, mean out-degree {:.1}", c.n_neurons(), n_exc, c.synapses.n_edges(), c.mean_out_degree());

    let rec = spontaneous_window(&c, 500.0, 1).unwrap();
    let secs = 0.5;
    println!("somatic rate {:.2} Hz", rec.truth.spikes.len() as f64 / c.n_neurons() as f64 / secs);

    let p = process_recording(&rec, &DetectorConfig::default(), &ArtifactFilter::default());
    let kept: usize = p.kept.iter().map(Vec::len).sum();
    let active = p.kept.iter().filter(|e| !e.is_empty()).count();
    println!("{kept} detected events on {active} of {} channels", rec.n_channels);
}
