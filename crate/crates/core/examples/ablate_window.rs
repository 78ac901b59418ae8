//! Accuracy as the counting window grows, from one set of recordings.

use brc::harness::{ablate_window, Family, HarnessConfig};

fn main() {
    let mut cfg = HarnessConfig::default();
    cfg.protocol.n_replicates = 1;
    cfg.protocol.n_days = 2;
    let r = ablate_window(Family::Bars, &cfg, None).unwrap();
    for p in r.w_curve.unwrap() {
        println!("W {:>4} ms  {:.3} +- {:.3}", p.w_ms, p.mean, p.sem);
    }
}
