use brc::ar::{init_esn, EsnConfig, SparseMatrix, MATRIX_MAGIC};
use brc::culture::{grow_culture, stimulate, CultureConfig, RawRecording, TRACE_MAGIC};
use brc::dsp::{process_recording, read_events, write_events, ArtifactFilter, DetectorConfig};
use brc::grid::{read_patterns, write_patterns, ElectrodeCoord, Waveform};
use brc::harness::{canonical_patterns, rows_of, read_states_csv, run_session, write_states_csv, Family, HarnessConfig};
use brc::patterns::{load_mnist_idx, make_pointwise, read_idx_images, read_idx_labels, IDX_IMAGES_MAGIC};

fn mnist_paths() -> (String, String) {
    let d = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mnist");
    (format!("{d}/mnist-1k-images-idx3-ubyte"), format!("{d}/mnist-1k-labels-idx1-ubyte"))
}

fn small_culture() -> CultureConfig {
    let mut c = CultureConfig::default();
    c.n_neurons = 1024;
    c.mean_out_degree = 20.0;
    c
}

#[test]
fn raw_trace_binary_is_bit_exact() {
    let c = grow_culture(&small_culture()).unwrap();
    let p = make_pointwise(1, ElectrodeCoord::new(10, 10).unwrap(), Waveform::monophasic(10.0, 20.0)).unwrap();
    let rec = stimulate(&c, &p, 10.0, 20.0, 3).unwrap();
    let mut a = Vec::new();
    rec.write_binary(&mut a).unwrap();
    assert_eq!(&a[..4], TRACE_MAGIC);
    let back = RawRecording::read_binary(a.as_slice()).unwrap();
    assert!(back.traces.iter().zip(&rec.traces).all(|(x, y)| x.to_bits() == y.to_bits()));
    let mut b = Vec::new();
    back.write_binary(&mut b).unwrap();
    assert_eq!(a, b);
    let mut bad = a.clone();
    bad[0] ^= 1;
    assert!(RawRecording::read_binary(bad.as_slice()).is_err());
    assert!(RawRecording::read_binary(&a[..a.len() - 3]).is_err());
}

#[test]
fn esn_matrix_binary_is_bit_exact() {
    let esn = init_esn(&EsnConfig { n_units: 300, seed: 4, ..EsnConfig::default() }).unwrap();
    let mut a = Vec::new();
    esn.w_rec.write_binary(&mut a).unwrap();
    assert_eq!(&a[..4], MATRIX_MAGIC);
    let back = SparseMatrix::read_binary(a.as_slice()).unwrap();
    assert_eq!(back, esn.w_rec);
    assert!(back.triplets().zip(esn.w_rec.triplets()).all(|(x, y)| x.2.to_bits() == y.2.to_bits()));
    let mut b = Vec::new();
    back.write_binary(&mut b).unwrap();
    assert_eq!(a, b);
    assert!(SparseMatrix::read_binary(&a[..a.len() / 2]).is_err());
}

#[test]
fn mnist_files_load_with_expected_counts() {
    let (img, lbl) = mnist_paths();
    let imgs = load_mnist_idx(&img, &lbl).unwrap();
    assert_eq!(imgs.len(), 1000);
    let bytes = std::fs::read(&img).unwrap();
    assert_eq!(u32::from_be_bytes(bytes[..4].try_into().unwrap()), IDX_IMAGES_MAGIC);
    assert_eq!(bytes.len(), 16 + 1000 * 28 * 28);
    let mut counts = [0; 10];
    imgs.iter().for_each(|i| counts[i.label as usize] += 1);
    assert!(counts.iter().all(|&c| c > 50));

    let mut corrupt = bytes.clone();
    corrupt[3] = 0x01;
    assert!(read_idx_images(&corrupt).is_err());
    let mut short = bytes.clone();
    short.truncate(bytes.len() - 1);
    assert!(read_idx_images(&short).is_err());
    let lb = std::fs::read(&lbl).unwrap();
    assert!(read_idx_labels(&bytes).is_err());
    assert_eq!(read_idx_labels(&lb).unwrap().len(), 1000);
}

#[test]
fn patterns_and_events_round_trip() {
    let cfg = HarnessConfig::default();
    let pats = canonical_patterns(Family::Clock, &cfg).unwrap();
    let mut buf = Vec::new();
    write_patterns(&mut buf, &pats).unwrap();
    assert_eq!(read_patterns(buf.as_slice()).unwrap(), pats);

    let c = grow_culture(&small_culture()).unwrap();
    let rec = stimulate(&c, &pats[8], 10.0, 20.0, 1).unwrap();
    let proc = process_recording(&rec, &DetectorConfig::default(), &ArtifactFilter::default());
    let mut ev = Vec::new();
    write_events(&mut ev, &proc).unwrap();
    let back = read_events(ev.as_slice()).unwrap();
    let n: usize = proc.kept.iter().chain(&proc.rejected).map(Vec::len).sum();
    assert_eq!(back.len(), n);
}

#[test]
fn state_csv_round_trip_from_a_session() {
    let mut cfg = HarnessConfig::default();
    cfg.culture = small_culture();
    let c = grow_culture(&cfg.culture).unwrap();
    let pats = canonical_patterns(Family::Pointwise, &cfg).unwrap();
    let ds = run_session(&c, &pats, &cfg, 2).unwrap();
    assert_eq!(ds.len(), 80);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    write_states_csv(&path, &rows_of(&ds, 5.0)).unwrap();
    let rows = read_states_csv(&path).unwrap();
    assert_eq!(rows.len(), 80);
    for (r, (x, &y)) in rows.iter().zip(ds.x.iter().zip(&ds.labels)) {
        assert_eq!(&r.values, x);
        assert_eq!(r.label, y);
    }
}
