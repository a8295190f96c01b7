use std::collections::BTreeMap;

use proptest::prelude::*;

use salinity::database::{
    boost_extract, build_mixed, equalize, extract_random, flatten, generate_world, group_by_box, BoxWidths,
    Database, Provenance, TrainingRecord, WorldConfig,
};
use salinity::eval::{bias_map, blend_outputs, global_stats, sst_bin};
use salinity::forward::SeaState;

fn small_world() -> Vec<SeaState> {
    let cfg = WorldConfig {
        resolution: 4.0,
        months: 3,
        ..WorldConfig::default()
    };
    flatten(&generate_world(&cfg, 17).unwrap())
}

fn weighted_var(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let v: Vec<(f64, f64)> = values.collect();
    let w: f64 = v.iter().map(|p| p.1).sum();
    let m = v.iter().map(|(x, w)| x * w).sum::<f64>() / w;
    v.iter().map(|(x, wi)| wi * (x - m).powi(2)).sum::<f64>() / w
}

#[test]
fn equalized_boxes_are_flat() {
    let b0 = small_world();
    let widths = BoxWidths::default();
    let b2 = equalize(&b0, &widths, 10, 3).unwrap();
    let mut per_box: BTreeMap<u64, u64> = BTreeMap::new();
    for s in &b2.samples {
        *per_box.entry(s.box_id).or_default() += u64::from(s.weight);
    }
    assert_eq!(per_box.len(), group_by_box(&b0, &widths).len());
    assert!(per_box.values().all(|w| *w == 10));

    // flattening the joint histogram spreads salinity
    let (b1, _) = extract_random(&b0, 0.1, 3).unwrap();
    let v1 = weighted_var(b1.samples.iter().map(|s| (s.state.sss, 1.0)));
    let v2 = weighted_var(b2.samples.iter().map(|s| (s.state.sss, f64::from(s.weight))));
    assert!(v2 > v1, "B1 var {v1}, B2 var {v2}");
}

#[test]
fn random_extraction_is_disjoint_and_reproducible() {
    let b0 = small_world();
    let (l, v) = extract_random(&b0, 0.1, 8).unwrap();
    let (l2, _) = extract_random(&b0, 0.1, 8).unwrap();
    assert_eq!(l, l2);
    assert_eq!(l.len(), (0.1 * b0.len() as f64).round() as usize);
    let key = |s: &SeaState| (s.lat.unwrap().to_bits(), s.lon.unwrap().to_bits(), s.sss.to_bits());
    let learn: std::collections::BTreeSet<_> = l.samples.iter().map(|s| key(&s.state)).collect();
    assert!(v.samples.iter().all(|s| !learn.contains(&key(&s.state))));
}

#[test]
fn mixed_database_splits_on_temperature() {
    let b0 = small_world();
    let widths = BoxWidths::default();
    let warm_only: Vec<SeaState> = b0.iter().copied().filter(|s| s.sst > 10.0).collect();
    let warm = equalize(&warm_only, &widths, 10, 0).unwrap().total_weight();
    let bm = build_mixed(&b0, &widths, 10, 10.0, warm + 500, 4).unwrap();
    assert_eq!(bm.total_weight(), warm + 500);
    let cold: u64 = bm.samples.iter().filter(|s| s.state.sst <= 10.0).map(|s| u64::from(s.weight)).sum();
    assert_eq!(cold, 500);
}

fn record(sss: f64, box_id: u64, weight: u32) -> TrainingRecord {
    TrainingRecord {
        inputs: vec![0.0; 5],
        target_sss: sss,
        box_id,
        lat: 0.0,
        lon: 0.0,
        weight,
        true_sst: 10.0,
        true_wind: 5.0,
    }
}

#[test]
fn boost_extraction_uses_the_threshold() {
    let b2 = Database {
        class_id: 8,
        provenance: Provenance::B2,
        build_seed: 0,
        records: vec![record(34.0, 1, 2), record(35.0, 2, 1), record(36.0, 3, 1)],
    };
    let biases = BTreeMap::from([(1, 0.3), (2, -0.25), (3, 0.1)]);
    let b3 = boost_extract(&b2, &biases, 0.2).unwrap();
    assert_eq!(b3.provenance, Provenance::B3);
    assert_eq!(b3.box_ids().into_iter().collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(b3.total_weight(), 3);
}

proptest! {
    #[test]
    fn boxes_contain_their_states(sss in 0.0..45.0f64, sst in -2.0..35.0f64, wind in 0.0..30.0f64) {
        let w = BoxWidths::default();
        let id = w.box_id(&SeaState::new(sss, sst, wind).unwrap());
        let (is, it, iw) = (id / 1_000_000, id / 1000 % 1000, id % 1000);
        prop_assert!(is as f64 * w.sss <= sss + 1e-9 && sss < (is + 1) as f64 * w.sss + 1e-9);
        prop_assert!(-2.0 + it as f64 * w.sst <= sst + 1e-9 && sst < -2.0 + (it + 1) as f64 * w.sst + 1e-9);
        prop_assert!(iw as f64 * w.wind <= wind + 1e-9 && wind < (iw + 1) as f64 * w.wind + 1e-9);
    }

    #[test]
    fn blend_is_continuous(a in 30.0..40.0f64, b in 30.0..40.0f64, lat in -65.0..65.0f64) {
        let (lo, hi) = (-50.0, -45.0);
        let y = blend_outputs(a, b, lat, lo, hi).unwrap();
        prop_assert!(y >= a.min(b) - 1e-12 && y <= a.max(b) + 1e-12);
        if lat >= hi { prop_assert_eq!(y, a); }
        if lat <= lo { prop_assert_eq!(y, b); }
        let y2 = blend_outputs(a, b, lat + 1e-7, lo, hi).unwrap();
        prop_assert!((y2 - y).abs() <= (a - b).abs() * 1e-7 / (hi - lo) + 1e-12);
    }

    #[test]
    fn stats_ignore_record_order(
        rows in prop::collection::vec((30.0..40.0f64, -1.0..1.0f64, -2.0..35.0f64, -64.9..64.9f64, -180.0..180.0f64), 3..60),
        rot in 0usize..60,
    ) {
        let split = |rows: &[(f64, f64, f64, f64, f64)]| {
            let reference: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let retrieved: Vec<f64> = rows.iter().map(|r| r.0 + r.1).collect();
            let sst: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let lat: Vec<f64> = rows.iter().map(|r| r.3).collect();
            let lon: Vec<f64> = rows.iter().map(|r| r.4).collect();
            let map = bias_map(&retrieved, &reference, &lat, &lon).unwrap();
            global_stats(&retrieved, &reference, &sst, &lat, &map).unwrap()
        };
        let a = split(&rows);
        let mut shuffled = rows.clone();
        shuffled.rotate_left(rot % rows.len());
        shuffled.reverse();
        let b = split(&shuffled);
        prop_assert!((a.bias - b.bias).abs() < 1e-9);
        prop_assert!((a.std - b.std).abs() < 1e-9);
        prop_assert_eq!(a.pct_above, b.pct_above);
        prop_assert_eq!(a.pct_below, b.pct_below);
        for p in [a.pct_above, a.pct_below, a.band_pct_above, a.band_pct_below] {
            prop_assert!((0.0..=100.0).contains(&p));
        }
        prop_assert!(a.pct_above + a.pct_below <= 100.0 + 1e-9);
    }

    #[test]
    fn sst_bins_cover_the_axis(t in -2.0..35.0f64) {
        let k = sst_bin(t);
        prop_assert!(k < 6);
        prop_assert!(sst_bin(t + 0.001) >= k);
    }
}
