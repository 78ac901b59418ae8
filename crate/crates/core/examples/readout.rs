//! Softmax readout with k-fold cross-validation and the shuffle baseline on
//! synthetic count vectors.

use brc::readout::{cross_validate, shuffle_baseline, LabeledDataset, TrainConfig};
use rand_distr::{Distribution, Poisson};

fn main() {
    let (n_classes, per_class, dim) = (4, 40, 256);
    let mut rng = brc::rng::stream(3, "example", 0);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for c in 0..n_classes {
        // Each class lights a different block of channels.
        let rates: Vec<f64> = (0..dim).map(|j| if j / 64 == c { 2.0 } else { 0.3 }).collect();
        for _ in 0..per_class {
            x.push(rates.iter().map(|&r| Poisson::new(r).unwrap().sample(&mut rng)).collect());
            y.push(c as u32);
        }
    }
    let ds = LabeledDataset::new(x, y, n_classes);
    let cfg = TrainConfig { epochs: 200, ..TrainConfig::default() };
    let real = cross_validate(&ds, 5, &cfg, 1).unwrap();
    let shuf = cross_validate(&shuffle_baseline(&ds, 2), 5, &cfg, 1).unwrap();
    println!("5-fold accuracy {:.3} +- {:.3}", real.mean, real.std);
    println!("shuffled        {:.3} +- {:.3} (chance {:.2})", shuf.mean, shuf.std, 1.0 / n_classes as f64);
    println!("confusion {:?}", real.confusion);
}
