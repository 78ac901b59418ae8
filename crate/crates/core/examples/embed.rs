//! Two-dimensional PCA of culture states from one session.

use brc::culture::grow_culture;
use brc::harness::{canonical_patterns, pca_embed, run_session, Family, HarnessConfig};

fn main() {
    let cfg = HarnessConfig::default();
    let c = grow_culture(&cfg.culture).unwrap();
    let patterns = canonical_patterns(Family::Bars, &cfg).unwrap();
    let ds = run_session(&c, &patterns, &cfg, 5).unwrap();
    let e = pca_embed(&ds.x, 2);
    println!("explained variance ratio {:.3} {:.3}", e.explained_ratio[0], e.explained_ratio[1]);
    for class in 0..ds.n_classes as u32 {
        let pts: Vec<&Vec<f64>> = e.coords.iter().zip(&ds.labels).filter(|(_, &l)| l == class).map(|(c, _)| c).collect();
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        println!("class {class}: centroid ({cx:8.2}, {cy:8.2})");
    }
}
