//! Train on the first day, test on the drifted culture of later days.

use brc::culture::DayDrift;
use brc::harness::{cross_day_eval, Family, HarnessConfig};

fn main() {
    let mut cfg = HarnessConfig::default();
    cfg.protocol.n_replicates = 1;
    for drift in [DayDrift::NONE, DayDrift::default(), DayDrift { rewire_frac: 0.4, weight_jitter_cv: 0.3, soma_shift: 0.6 }] {
        cfg.drift = drift;
        let x = cross_day_eval(Family::Bars, &cfg, None).unwrap().cross_day.unwrap();
        let days: Vec<String> = x.days.iter().map(|d| format!("day {} {:.3}", d.day, d.accuracy.mean)).collect();
        println!("{:?}: within {:.3}, {}", drift, x.within_day.mean, days.join(", "));
    }
}
