//! One experiment family end to end on both substrates, scaled down to a
//! single culture and day.

use brc::harness::{run_family, Family, HarnessConfig, Substrate};

fn main() {
    let mut cfg = HarnessConfig::default();
    cfg.protocol.n_replicates = 1;
    cfg.protocol.n_days = 1;
    let family: Family = std::env::args().nth(1).as_deref().unwrap_or("pointwise").parse().unwrap();
    let r = run_family(family, Substrate::Both, &cfg, None).unwrap();
    for s in [&r.culture, &r.ar, &r.shuffle].into_iter().flatten() {
        println!("{:<8} {:.3} (per class {:?})", s.substrate, s.overall.mean, s.per_class.iter().map(|c| (c.mean * 100.0).round() / 100.0).collect::<Vec<_>>());
    }
    println!("{:.1} s", r.timing.wall_s);
}
