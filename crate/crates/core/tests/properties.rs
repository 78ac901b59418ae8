use brc::ar::SparseMatrix;
use brc::dsp::{extract_state, normalized_area, stim_mask, SpikeEvent};
use brc::grid::{channel_index, coord_of, validate_pattern, ElectrodeCoord, Waveform, GRID_SIZE, N_CHANNELS};
use brc::harness::{delivery_order, pca_embed};
use brc::patterns::{make_bar, make_clock_digit, make_pointwise, ClockGeometry, BAR_ORIENTATIONS};
use brc::readout::{shuffle_baseline, softmax, LabeledDataset};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = ElectrodeCoord> {
    (0..GRID_SIZE as u16, 0..GRID_SIZE as u16).prop_map(|(r, c)| ElectrodeCoord { row: r, col: c })
}

fn events() -> impl Strategy<Value = Vec<(u16, u32)>> {
    prop::collection::vec((0..N_CHANNELS as u16, 0u32..2000), 0..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_index_is_a_bijection(e in coord()) {
        let ch = channel_index(e).unwrap();
        prop_assert!(ch < N_CHANNELS);
        prop_assert_eq!(coord_of(ch).unwrap(), e);
    }

    #[test]
    fn state_counts_match_recount(evs in events(), t_s in 0u32..1500, w in 0.05f64..60.0, margin in 0u16..4, centre in coord()) {
        let mut by_ch = vec![Vec::new(); N_CHANNELS];
        for &(ch, t) in &evs {
            by_ch[ch as usize].push(SpikeEvent { channel: ch as u32, t_sample: t, peak_uv: -60.0, snippet: vec![] });
        }
        let p = make_pointwise(0, ElectrodeCoord { row: centre.row, col: centre.col.min(GRID_SIZE as u16 - 2) }, Waveform::monophasic(1.0, 20.0)).unwrap();
        let mask = stim_mask(&p, margin);
        let s = extract_state(&by_ch, t_s, w, &mask, 0).unwrap();
        let end = t_s as f64 + (w * 20.0).round();
        for ch in 0..N_CHANNELS {
            let want = if mask[ch] { 0 } else {
                evs.iter().filter(|&&(c, t)| c as usize == ch && t >= t_s && (t as f64) <= end).count() as u32
            };
            prop_assert_eq!(s.counts[ch], want);
        }
    }

    #[test]
    fn counts_grow_with_the_window(evs in events(), t_s in 0u32..1500, w1 in 0.1f64..30.0, dw in 0.0f64..30.0) {
        let mut by_ch = vec![Vec::new(); N_CHANNELS];
        for &(ch, t) in &evs {
            by_ch[ch as usize].push(SpikeEvent { channel: ch as u32, t_sample: t, peak_uv: -60.0, snippet: vec![] });
        }
        let none = vec![false; N_CHANNELS];
        let a = extract_state(&by_ch, t_s, w1, &none, 0).unwrap();
        let b = extract_state(&by_ch, t_s, w1 + dw, &none, 0).unwrap();
        prop_assert!(a.counts.iter().zip(&b.counts).all(|(x, y)| x <= y));
    }

    #[test]
    fn mask_is_chebyshev_ball(centre in coord(), margin in 0u16..5) {
        let col = centre.col.min(GRID_SIZE as u16 - 2);
        let p = make_pointwise(0, ElectrodeCoord { row: centre.row, col }, Waveform::monophasic(1.0, 20.0)).unwrap();
        let mask = stim_mask(&p, margin);
        for ch in 0..N_CHANNELS {
            let e = coord_of(ch).unwrap();
            let d = p.electrodes().map(|s| s.chebyshev(&e)).min().unwrap();
            prop_assert_eq!(mask[ch], d <= margin);
        }
    }

    #[test]
    fn normalized_area_bounds(v in prop::collection::vec(-1000f32..1000.0, 1..200)) {
        prop_assume!(v.iter().any(|x| *x != 0.0));
        let s = normalized_area(&v).unwrap();
        prop_assert!(s >= 1.0 - 1e-9);
        prop_assert!(s <= v.len() as f64 + 1e-9);
        let scaled: Vec<f32> = v.iter().map(|x| x * -3.0).collect();
        prop_assert!((normalized_area(&scaled).unwrap() - s).abs() < 1e-4 * s);
    }

    #[test]
    fn generated_patterns_are_valid(centre in (8u16..56, 8u16..56), o in 0usize..4, n in 1usize..6, dil in 1usize..3, amp in 0.5f64..20.0) {
        let c = ElectrodeCoord { row: centre.0, col: centre.1 };
        let wf = Waveform::monophasic(amp, 20.0);
        let bar = make_bar(1, BAR_ORIENTATIONS[o], c, n, dil, wf).unwrap();
        prop_assert!(validate_pattern(&bar).is_empty());
        prop_assert_eq!(bar.pairs.len(), n);
        prop_assert!(make_pointwise(2, c, wf).unwrap().is_valid());
    }

    #[test]
    fn clock_digits_valid_anywhere(r in 0u16..40, c in 0u16..40, len in 2usize..7) {
        let Ok(g) = ClockGeometry::new(ElectrodeCoord { row: r, col: c }, len) else { return Ok(()) };
        for d in 0..10 {
            prop_assert!(make_clock_digit(d, &g, Waveform::biphasic(4.0, 100.0, 100.0)).unwrap().is_valid());
        }
    }

    #[test]
    fn softmax_is_a_distribution(s in prop::collection::vec(-800f64..800.0, 1..20)) {
        let p = softmax(&s);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let shifted: Vec<f64> = s.iter().map(|x| x + 123.0).collect();
        prop_assert!(softmax(&shifted).iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn shuffle_preserves_each_multiset(rows in prop::collection::vec(prop::collection::vec(0u8..6, 16), 1..12), seed in any::<u64>()) {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let labels = (0..x.len() as u32).map(|i| i % 3).collect();
        let ds = LabeledDataset::new(x, labels, 3);
        let sh = shuffle_baseline(&ds, seed);
        prop_assert_eq!(&sh.labels, &ds.labels);
        for (a, b) in ds.x.iter().zip(&sh.x) {
            let mut a = a.clone();
            let mut b = b.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(shuffle_baseline(&ds, seed), sh);
    }

    #[test]
    fn delivery_order_balanced(n in 1usize..12, reps in 1usize..30, seed in any::<u64>()) {
        let o = delivery_order(n, reps, seed);
        prop_assert_eq!(o.len(), n * reps);
        for i in 0..n {
            prop_assert_eq!(o.iter().filter(|&&k| k == i).count(), reps);
        }
    }

    #[test]
    fn sparse_matvec_matches_dense(trip in prop::collection::vec((0u32..12, 0u32..9, -5f64..5.0), 0..60), x in prop::collection::vec(-3f64..3.0, 9)) {
        let m = SparseMatrix::from_triplets(12, 9, &trip);
        let mut d = DMatrix::<f64>::zeros(12, 9);
        for &(r, c, v) in &trip {
            d[(r as usize, c as usize)] += v;
        }
        let want = &d * nalgebra::DVector::from_vec(x.clone());
        for (a, b) in m.matvec(&x).iter().zip(want.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert_eq!(SparseMatrix::from_dense(&m.to_dense()), m);
    }

    #[test]
    fn pca_is_translation_invariant(rows in prop::collection::vec(prop::collection::vec(-10f64..10.0, 5), 3..10), shift in -50f64..50.0) {
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let a = pca_embed(&rows, 2);
        let b = pca_embed(&moved, 2);
        for (p, q) in a.explained_variance.iter().zip(&b.explained_variance) {
            prop_assert!((p - q).abs() < 1e-6 * (1.0 + p.abs()));
        }
    }
}

#[test]
fn pca_on_wide_collinear_points() {
    let dir: Vec<f64> = (0..N_CHANNELS).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
    let x: Vec<Vec<f64>> = [0.0, 1.0, 3.0].iter().map(|&t| dir.iter().map(|d| 2.0 + t * d).collect()).collect();
    let e = pca_embed(&x, 2);
    assert!((e.explained_ratio[0] - 1.0).abs() < 1e-9);
    assert!(e.coords.iter().all(|c| c[1].abs() < 1e-6));
}

#[test]
fn pca_separates_two_clusters() {
    let mut g = brc::rng::stream(5, "pca-test", 0);
    use rand_distr::{Distribution, Normal};
    let n = Normal::new(0.0, 0.3).unwrap();
    let x: Vec<Vec<f64>> = (0..40)
        .map(|i| (0..50).map(|j| n.sample(&mut g) + if i < 20 && j < 10 { 4.0 } else { 0.0 }).collect())
        .collect();
    let e = pca_embed(&x, 2);
    let (a, b): (Vec<f64>, Vec<f64>) = (e.coords[..20].iter().map(|c| c[0]).collect(), e.coords[20..].iter().map(|c| c[0]).collect());
    let (amin, amax) = (a.iter().cloned().fold(f64::MAX, f64::min), a.iter().cloned().fold(f64::MIN, f64::max));
    let (bmin, bmax) = (b.iter().cloned().fold(f64::MAX, f64::min), b.iter().cloned().fold(f64::MIN, f64::max));
    assert!(amax < bmin || bmax < amin, "clusters overlap on the first component");
}
