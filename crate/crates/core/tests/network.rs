use rand::Rng;

use salinity::database::{Database, Provenance, TrainingRecord};
use salinity::net::{
    continue_training, fit_normalization, forward, gradient, init_with_inputs, loss, read_params, rmse, train,
    write_params, TrainConfig,
};
use salinity::seed;

fn random_batch<R: Rng>(rng: &mut R, n: usize, n_inputs: usize) -> Vec<TrainingRecord> {
    (0..n)
        .map(|_| TrainingRecord {
            inputs: (0..n_inputs).map(|_| rng.random_range(-3.0..3.0)).collect(),
            target_sss: rng.random_range(30.0..40.0),
            box_id: 0,
            lat: 0.0,
            lon: 0.0,
            weight: rng.random_range(1..4),
            true_sst: 10.0,
            true_wind: 5.0,
        })
        .collect()
}

/// Norm-wise relative error `max|g - fd| / max|g|` against central
/// differences, over randomized shapes, weights and batches.
#[test]
fn backprop_matches_finite_differences() {
    let mut rng = seed::rng(2024);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let ni = rng.random_range(1..8);
        let nh = rng.random_range(1..12);
        let n = rng.random_range(1..20);
        let batch = random_batch(&mut rng, n, ni);
        let mut p = init_with_inputs(1, ni, nh, case).unwrap();
        p.norm = Some(fit_normalization(&batch).unwrap());
        let g = gradient(&p, &batch).unwrap();
        let theta = p.to_vec();
        let h = 1e-5;
        let mut fd = Vec::with_capacity(theta.len());
        for k in 0..theta.len() {
            let mut t = theta.clone();
            t[k] += h;
            p.set_from_vec(&t).unwrap();
            let up = loss(&p, &batch).unwrap();
            t[k] -= 2.0 * h;
            p.set_from_vec(&t).unwrap();
            let down = loss(&p, &batch).unwrap();
            fd.push((up - down) / (2.0 * h));
        }
        p.set_from_vec(&theta).unwrap();
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst = worst.max(err);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn gradient_ignores_batch_order() {
    let mut rng = seed::rng(9);
    let batch = random_batch(&mut rng, 25, 4);
    let mut p = init_with_inputs(1, 4, 7, 2).unwrap();
    p.norm = Some(fit_normalization(&batch).unwrap());
    let g = gradient(&p, &batch).unwrap();
    let mut rev = batch.clone();
    rev.reverse();
    rev.rotate_left(7);
    let h = gradient(&p, &rev).unwrap();
    assert!(g.iter().zip(&h).all(|(a, b)| (a - b).abs() < 1e-12));
}

fn linear_db(rng_seed: u64, n: usize) -> Database {
    let mut rng = seed::rng(rng_seed);
    let records = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            TrainingRecord {
                target_sss: 35.0 + 1.5 * x[0] - 0.5 * x[1] + 0.25 * x[2],
                inputs: x,
                box_id: 1,
                lat: 0.0,
                lon: 0.0,
                weight: 1,
                true_sst: 0.0,
                true_wind: 0.0,
            }
        })
        .collect();
    Database {
        class_id: 9,
        provenance: Provenance::B1,
        build_seed: rng_seed,
        records,
    }
}

#[test]
fn training_is_reproducible_and_warm_starts() {
    let learn = linear_db(1, 400);
    let valid = linear_db(2, 100);
    let cfg = TrainConfig {
        max_epochs: 40,
        seed: 5,
        ..TrainConfig::default()
    };
    let init = init_with_inputs(9, 3, 6, 3).unwrap();
    let (a, ha) = train(&init, &learn, &valid, &cfg).unwrap();
    let (b, hb) = train(&init, &learn, &valid, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha.best_valid_rmse, hb.best_valid_rmse);
    assert!(ha.best_valid_rmse < 0.1, "rmse {}", ha.best_valid_rmse);

    // zero continuation epochs keep the starting weights and normalization
    let none = TrainConfig { max_epochs: 0, ..cfg.clone() };
    let (c, _) = continue_training(&a, &learn, &valid, &none).unwrap();
    assert_eq!(c, a);
    let x = &valid.records[0].inputs;
    assert_eq!(forward(&c, x).unwrap(), forward(&a, x).unwrap());

    // a real continuation starts from the trained network, not a fresh one
    let (d, hd) = continue_training(&a, &learn, &valid, &cfg).unwrap();
    assert_eq!(hd.initial_valid_rmse, rmse(&a, &valid.records).unwrap());
    assert_eq!(d.norm, a.norm);
    assert!(hd.best_valid_rmse <= hd.initial_valid_rmse);
}

#[test]
fn params_survive_a_file_round_trip() {
    let learn = linear_db(3, 50);
    let mut p = init_with_inputs(9, 3, 4, 1).unwrap();
    p.norm = Some(fit_normalization(&learn.records).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.txt");
    write_params(&p, &path).unwrap();
    assert_eq!(read_params(&path).unwrap(), p);
}
