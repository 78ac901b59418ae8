//! Build the artificial reservoir, check its spectral radius, and round-trip
//! the weight file.

use brc::ar::{ar_state, init_esn, spectral_radius, EsnConfig, NoiseModel, SparseMatrix};
use brc::grid::{ElectrodeCoord, Waveform};
use brc::patterns::make_pointwise;
use std::time::Instant;

fn main() {
    let t = Instant::now();
    let esn = init_esn(&EsnConfig::default()).unwrap();
    let w = &esn.w_rec;
    println!("{}x{} with {} nonzeros (density {:.4}) in {:.1?}", w.n_rows(), w.n_cols(), w.nnz(), w.density(), t.elapsed());
    println!("spectral radius {:.9}", spectral_radius(w).unwrap());

    let mut buf = Vec::new();
    w.write_binary(&mut buf).unwrap();
    let back = SparseMatrix::read_binary(buf.as_slice()).unwrap();
    println!("{} bytes on disk, round trip exact: {}", buf.len(), &back == w);

    let p = make_pointwise(0, ElectrodeCoord::new(32, 32).unwrap(), Waveform::monophasic(10.0, 20.0)).unwrap();
    let x = ar_state(&esn, &p, &NoiseModel::zero(4096), 1);
    let active = x.iter().filter(|v| v.abs() > 1e-9).count();
    println!("noise-free state: {active} nonzero units, max |x| {:.3}", x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
}
