//! Experiment stages: calibration, world, databases, training, boosting and
//! evaluation. Every stage takes the experiment config and derives its own
//! seeds from the master seed, so stages can run separately or end to end.

pub mod commands;
pub mod config;

use rayon::prelude::*;

use crate::database::{
    boost_extract, build_mixed, equalize, extract_random, flatten, generate_world, materialize_records,
    Database, MaterializeConfig, OceanField, Provenance, Selection,
};
use crate::error::{Error, Result};
use crate::eval::{blend_outputs, box_bias, evaluate, retrieve_field, EvalReport};
use crate::forward::{first_stokes_profile, SeaState};
use crate::geometry::{simulate_raw_observations, PixelClassSpec};
use crate::net::{continue_training, init_network, rmse, train, NetworkParams, TrainHistory};
use crate::noise::{estimate_residual_stats, CorrelatedNoiseSpec, ResidualStats};
use crate::seed;
use crate::smoother::smooth_pixel;

pub use config::ExperimentConfig;

fn stage_seed(cfg: &ExperimentConfig, label: &str, class_id: u8) -> u64 {
    seed::derive(cfg.seed, &format!("{label}-c{class_id}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub class_id: u8,
    pub stats: ResidualStats,
    pub spec: CorrelatedNoiseSpec,
    /// Residual std over raw std, per interpolation angle.
    pub ratios: Vec<f64>,
}

impl Calibration {
    pub fn ratio_range(&self) -> (f64, f64) {
        self.ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)))
    }
}

/// Simulate, smooth and difference `calibration_pixels` pixels of a class
/// over a spread of sea states.
pub fn residual_stats(cfg: &ExperimentConfig, class: &PixelClassSpec, rng_seed: u64) -> Result<ResidualStats> {
    let smoother = cfg.smoother(class);
    let radiometer = cfg.radiometer();
    let pairs = (0..cfg.calibration_pixels as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive_index(rng_seed, i);
            let mut rng = seed::rng(seed::derive(s, "state"));
            use rand::Rng;
            let state = SeaState::new(
                rng.random_range(32.0..38.0),
                rng.random_range(0.0..30.0),
                rng.random_range(0.0..15.0),
            )?;
            let obs = simulate_raw_observations(class, &state, &radiometer, cfg.raw_density, s)?;
            let interp = smooth_pixel(&obs, class, &smoother)?.tbs;
            let truth = first_stokes_profile(&state, &class.angle_grid, &radiometer)?;
            Ok((interp, truth))
        })
        .collect::<Result<Vec<_>>>()?;
    let (interp, truth): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    estimate_residual_stats(&interp, &truth)
}

/// Residual noise spec for one class, rejected when the smoothing gain is
/// outside `cfg.reduction_band`.
pub fn calibrate_class(cfg: &ExperimentConfig, class_id: u8) -> Result<Calibration> {
    let class = cfg.class_spec(class_id)?;
    let stats = residual_stats(cfg, &class, stage_seed(cfg, "calibrate", class_id))?;
    let ratios: Vec<f64> = stats.std.iter().map(|s| s / class.raw_sigma).collect();
    let (lo, hi) = cfg.reduction_band;
    if let Some(r) = ratios.iter().find(|r| !(lo..=hi).contains(*r)) {
        return Err(Error::Calibration {
            class: class_id,
            ratio: *r,
            lo,
            hi,
        });
    }
    let spec = stats.to_noise_spec()?;
    Ok(Calibration {
        class_id,
        stats,
        spec,
        ratios,
    })
}

pub fn build_world(cfg: &ExperimentConfig) -> Result<Vec<OceanField>> {
    generate_world(&cfg.world(), seed::derive(cfg.seed, "world"))
}

pub fn materialize_config(cfg: &ExperimentConfig, noise: &CorrelatedNoiseSpec) -> MaterializeConfig {
    MaterializeConfig {
        radiometer: cfg.radiometer(),
        tb_noise: Some(noise.clone()),
        aux_noise: true,
    }
}

/// Everything needed to build and evaluate databases for one class.
#[derive(Debug, Clone)]
pub struct ClassContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub class: PixelClassSpec,
    pub noise: CorrelatedNoiseSpec,
    pub b0: &'a [SeaState],
}

impl<'a> ClassContext<'a> {
    pub fn new(cfg: &'a ExperimentConfig, class_id: u8, noise: CorrelatedNoiseSpec, b0: &'a [SeaState]) -> Result<Self> {
        let class = cfg.class_spec(class_id)?;
        if noise.dim() != class.n_angles {
            return Err(Error::ShapeMismatch(format!(
                "class {class_id} noise spec has {} angles, expected {}",
                noise.dim(),
                class.n_angles
            )));
        }
        Ok(ClassContext { cfg, class, noise, b0 })
    }

    fn seed(&self, label: &str) -> u64 {
        stage_seed(self.cfg, label, self.class.class_id)
    }

    pub fn materialize(&self, selection: &Selection, label: &str) -> Result<Database> {
        let (db, clamps) = materialize_records(
            selection,
            &self.class,
            &materialize_config(self.cfg, &self.noise),
            self.seed(label),
        )?;
        log::debug!(
            "{label}: {} records, aux clamping sst {:.4} wind {:.4}",
            db.len(),
            clamps.sst_rate(),
            clamps.wind_rate()
        );
        Ok(db)
    }

    /// Random learning database and its disjoint validation database.
    pub fn build_b1(&self) -> Result<(Database, Database)> {
        let (learn, valid) = extract_random(self.b0, self.cfg.b1_fraction, seed::derive(self.cfg.seed, "b1-extract"))?;
        Ok((self.materialize(&learn, "b1-noise")?, self.materialize(&valid, "valid-noise")?))
    }

    pub fn build_b2(&self) -> Result<Database> {
        let sel = equalize(self.b0, &self.cfg.boxes(), self.cfg.per_box, seed::derive(self.cfg.seed, "b2-equalize"))?;
        self.materialize(&sel, "b2-noise")
    }

    /// Validation set for equalized learning databases: a sparser
    /// equalized draw with its own noise.
    pub fn build_valid_equalized(&self) -> Result<Database> {
        let per_box = self.cfg.valid_per_box;
        let sel = equalize(self.b0, &self.cfg.boxes(), per_box, seed::derive(self.cfg.seed, "valid-equalize"))?;
        let mut db = self.materialize(&sel, "valid-eq-noise")?;
        db.provenance = Provenance::Validation;
        Ok(db)
    }

    pub fn build_bm(&self, total_size: u64) -> Result<Database> {
        let sel = build_mixed(
            self.b0,
            &self.cfg.boxes(),
            self.cfg.per_box,
            self.cfg.sst_split,
            total_size,
            seed::derive(self.cfg.seed, "bm-build"),
        )?;
        self.materialize(&sel, "bm-noise")
    }

    pub fn train(&self, label: &str, learn: &Database, valid: &Database) -> Result<(NetworkParams, TrainHistory)> {
        let id = self.class.class_id;
        let init = init_network(&self.class, self.cfg.hidden_for(id), self.seed(&format!("init-{label}")))?;
        train(&init, learn, valid, &self.cfg.train_config(self.seed(&format!("train-{label}"))))
    }

    /// Box biases of the trained network on re-noised copies of its learning set, boxes over
    /// the threshold, then a warm-started continuation on them.
    pub fn boost(&self, b2: &Database, b2_net: &NetworkParams, valid: &Database) -> Result<BoostOutcome> {
        // biases averaged over fresh noise draws, so single-draw noise does
        // not decide which boxes are kept
        let selection = b2.to_selection();
        let mut records = Vec::new();
        let mut retrieved = Vec::new();
        for r in 0..self.cfg.boost_replicates {
            let db = self.materialize(&selection, &format!("boost-eval-r{r}"))?;
            retrieved.extend(retrieve_field(b2_net, &db.records)?);
            records.extend(db.records);
        }
        let biases = box_bias(&records, &retrieved)?;
        let b3 = boost_extract(b2, &biases, self.cfg.boost_threshold)?;
        if b3.is_empty() {
            return Err(Error::InsufficientData("no box exceeds the boost threshold".into()));
        }
        // early stopping watches the boosted boxes only
        let boxes = b3.box_ids();
        let mut watch = valid.clone();
        watch.records.retain(|r| boxes.contains(&r.box_id));
        let watch = if watch.is_empty() { valid.clone() } else { watch };
        let start_rmse = rmse(b2_net, &watch.records)?;
        let (net, history) = continue_training(b2_net, &b3, &watch, &self.cfg.boost_config(self.seed("boost")))?;
        Ok(BoostOutcome {
            retained_fraction: b3.total_weight() as f64 / b2.total_weight() as f64,
            b3,
            net,
            history,
            start_rmse,
        })
    }

    /// Apply each network to `test_replicates` independent noisy copies of
    /// the whole world. Test noise streams are keyed apart from every
    /// training stream.
    pub fn test_outputs(&self, nets: &[&NetworkParams]) -> Result<TestOutputs> {
        let all = Selection {
            provenance: Provenance::B0,
            samples: self
                .b0
                .iter()
                .map(|s| crate::database::Sample {
                    state: *s,
                    box_id: self.cfg.boxes().box_id(s),
                    weight: 1,
                })
                .collect(),
        };
        let mut out = TestOutputs {
            reference: Vec::new(),
            sst: Vec::new(),
            lat: Vec::new(),
            lon: Vec::new(),
            retrieved: vec![Vec::new(); nets.len()],
        };
        for r in 0..self.cfg.test_replicates {
            let db = self.materialize(&all, &format!("test-r{r}"))?;
            for (k, net) in nets.iter().enumerate() {
                out.retrieved[k].extend(retrieve_field(net, &db.records)?);
            }
            for rec in &db.records {
                out.reference.push(rec.target_sss);
                out.sst.push(rec.true_sst);
                out.lat.push(rec.lat);
                out.lon.push(rec.lon);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub b3: Database,
    pub net: NetworkParams,
    pub history: TrainHistory,
    /// Validation RMSE (boosted boxes) of the B2 network the continuation
    /// started from.
    pub start_rmse: f64,
    /// Weight share of B2 kept in B3.
    pub retained_fraction: f64,
}

/// Aligned test-set truth and per-network retrievals.
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutputs {
    pub reference: Vec<f64>,
    pub sst: Vec<f64>,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub retrieved: Vec<Vec<f64>>,
}

impl TestOutputs {
    fn report_for(&self, retrieved: &[f64]) -> Result<EvalReport> {
        let reference = &self.reference;
        let map = crate::eval::bias_map(retrieved, reference, &self.lat, &self.lon)?;
        let stats = crate::eval::global_stats(retrieved, reference, &self.sst, &self.lat, &map)?;
        Ok(EvalReport { stats, map })
    }

    pub fn report(&self, k: usize) -> Result<EvalReport> {
        self.report_for(&self.retrieved[k])
    }

    /// Latitude blend of network `north` (global) and `south` (southern band).
    pub fn blended(&self, north: usize, south: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        self.retrieved[north]
            .iter()
            .zip(&self.retrieved[south])
            .zip(&self.lat)
            .map(|((a, b), lat)| blend_outputs(*a, *b, *lat, lo, hi))
            .collect()
    }

    pub fn blend_report(&self, north: usize, south: usize, lo: f64, hi: f64) -> Result<EvalReport> {
        self.report_for(&self.blended(north, south, lo, hi)?)
    }
}

/// Evaluate a network on any set of materialized records.
pub fn evaluate_records(net: &NetworkParams, db: &Database) -> Result<EvalReport> {
    evaluate(&retrieve_field(net, &db.records)?, &db.records)
}

/// Flattened B0 of the configured world.
pub fn world_records(cfg: &ExperimentConfig) -> Result<Vec<SeaState>> {
    Ok(flatten(&build_world(cfg)?))
}
