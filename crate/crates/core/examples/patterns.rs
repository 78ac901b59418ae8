//! Build every stimulus family and check it against the hardware rules.

use brc::grid::{validate_pattern, ElectrodeCoord, Waveform};
use brc::patterns::*;

fn main() {
    let mono = Waveform::monophasic(10.0, 20.0);
    let bi = Waveform::biphasic(4.0, 100.0, 100.0);
    let at = |r, c| ElectrodeCoord::new(r, c).unwrap();

    let mut all = vec![make_pointwise(0, at(24, 24), mono).unwrap()];
    for (i, &o) in BAR_ORIENTATIONS.iter().enumerate() {
        all.push(make_bar(i as u32, o, at(32, 32), 5, 1, mono).unwrap());
    }
    let geom = ClockGeometry::centered();
    for d in 0..10 {
        all.push(make_clock_digit(d, &geom, bi).unwrap());
    }
    for p in &all {
        let bad = validate_pattern(p);
        println!("label {:>2}: {:>3} pairs, {:.3} nC leading phase, violations {:?}", p.label, p.pairs.len(), p.waveform.leading_charge_nc(), bad);
    }

    let root = env!("CARGO_MANIFEST_DIR");
    let imgs = load_mnist_idx(format!("{root}/data/mnist/mnist-1k-images-idx3-ubyte"), format!("{root}/data/mnist/mnist-1k-labels-idx1-ubyte")).unwrap();
    let mapping = MnistMapping::default();
    for (i, img) in imgs.iter().take(5).enumerate() {
        let p = map_mnist(img, &mapping, Waveform::biphasic(5.0, 100.0, 100.0), i as u64).unwrap();
        println!("mnist digit {}: {} pairs", img.label, p.pairs.len());
    }
}
