//! One-hidden-layer regression networks, one per pixel class.
//!
//! Inputs and the SSS target are standardized with learning-set statistics.
//! Training minimizes the weighted mean squared error on the standardized
//! target with momentum SGD, keeping the best epoch on the validation set.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::database::{Database, TrainingRecord};
use crate::error::{Error, Result};
use crate::geometry::PixelClassSpec;
use crate::seed;

pub const PARAM_FILE_VERSION: &str = "salinity-net v1";

/// Default hidden layer size for a class.
pub fn default_hidden(class_id: u8) -> usize {
    match class_id {
        1..=5 => 30,
        6..=8 => 20,
        _ => 10,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: f64,
    pub out_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub class_id: u8,
    pub n_inputs: usize,
    pub n_hidden: usize,
    /// Row-major `n_hidden x n_inputs`.
    pub w_hidden: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub norm: Option<Normalization>,
}

pub fn init_network(class: &PixelClassSpec, n_hidden: usize, rng_seed: u64) -> Result<NetworkParams> {
    init_with_inputs(class.class_id, class.n_inputs(), n_hidden, rng_seed)
}

/// Uniform symmetric initialization scaled by fan-in.
pub fn init_with_inputs(class_id: u8, n_inputs: usize, n_hidden: usize, rng_seed: u64) -> Result<NetworkParams> {
    if n_hidden == 0 || n_inputs == 0 {
        return Err(Error::InvalidConfig("network needs >= 1 input and hidden unit".into()));
    }
    let mut rng = seed::rng(rng_seed);
    let a1 = 1.0 / (n_inputs as f64).sqrt();
    let a2 = 1.0 / (n_hidden as f64).sqrt();
    let w_hidden = (0..n_hidden * n_inputs).map(|_| rng.random_range(-a1..a1)).collect();
    let b_hidden = (0..n_hidden).map(|_| rng.random_range(-0.1..0.1)).collect();
    let w_out = (0..n_hidden).map(|_| rng.random_range(-a2..a2)).collect();
    Ok(NetworkParams {
        class_id,
        n_inputs,
        n_hidden,
        w_hidden,
        b_hidden,
        w_out,
        b_out: 0.0,
        norm: None,
    })
}

impl NetworkParams {
    pub fn n_params(&self) -> usize {
        self.n_hidden * (self.n_inputs + 2) + 1
    }

    fn norm(&self) -> Result<&Normalization> {
        self.norm.as_ref().ok_or(Error::Unfitted)
    }

    /// Weights flattened as `w_hidden, b_hidden, w_out, b_out`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w_hidden);
        v.extend_from_slice(&self.b_hidden);
        v.extend_from_slice(&self.w_out);
        v.push(self.b_out);
        v
    }

    pub fn set_from_vec(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::ShapeMismatch(format!("{} parameters, expected {}", v.len(), self.n_params())));
        }
        let (nh, ni) = (self.n_hidden, self.n_inputs);
        self.w_hidden.copy_from_slice(&v[..nh * ni]);
        self.b_hidden.copy_from_slice(&v[nh * ni..nh * ni + nh]);
        self.w_out.copy_from_slice(&v[nh * ni + nh..nh * ni + 2 * nh]);
        self.b_out = v[nh * ni + 2 * nh];
        Ok(())
    }

    pub fn normalize_inputs(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let norm = self.norm()?;
        if inputs.len() != self.n_inputs {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs for a {}-input network",
                inputs.len(),
                self.n_inputs
            )));
        }
        Ok(inputs
            .iter()
            .zip(norm.in_mean.iter().zip(&norm.in_std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    /// Standardized output for standardized inputs.
    #[inline]
    fn output_normalized(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let ni = self.n_inputs;
        let mut y = self.b_out;
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.w_hidden[j * ni..(j + 1) * ni];
            let a: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b_hidden[j];
            *h = a.tanh();
            y += self.w_out[j] * *h;
        }
        y
    }

    pub fn validate(&self) -> Result<()> {
        let (nh, ni) = (self.n_hidden, self.n_inputs);
        if self.w_hidden.len() != nh * ni || self.b_hidden.len() != nh || self.w_out.len() != nh {
            return Err(Error::ShapeMismatch("inconsistent network shapes".into()));
        }
        if let Some(n) = &self.norm {
            if n.in_mean.len() != ni || n.in_std.len() != ni {
                return Err(Error::ShapeMismatch("normalization length".into()));
            }
            if n.in_std.iter().chain(std::iter::once(&n.out_std)).any(|s| !(*s > 0.0)) {
                return Err(Error::InvalidConfig("normalization stds must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// SSS estimate (psu) for one raw input vector.
pub fn forward(params: &NetworkParams, inputs: &[f64]) -> Result<f64> {
    let x = params.normalize_inputs(inputs)?;
    let norm = params.norm()?;
    let mut hidden = vec![0.0; params.n_hidden];
    Ok(params.output_normalized(&x, &mut hidden) * norm.out_std + norm.out_mean)
}

pub fn forward_batch(params: &NetworkParams, records: &[TrainingRecord]) -> Result<Vec<f64>> {
    records.par_iter().map(|r| forward(params, &r.inputs)).collect()
}

/// Weighted mean and std (population) of inputs and target.
pub fn fit_normalization(records: &[TrainingRecord]) -> Result<Normalization> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientData("cannot normalize an empty database".into()))?;
    let ni = first.inputs.len();
    let mut sw = 0.0;
    let mut m = vec![0.0; ni + 1];
    for r in records {
        if r.inputs.len() != ni {
            return Err(Error::ShapeMismatch("records of different lengths".into()));
        }
        let w = f64::from(r.weight);
        sw += w;
        r.inputs.iter().enumerate().for_each(|(k, x)| m[k] += w * x);
        m[ni] += w * r.target_sss;
    }
    m.iter_mut().for_each(|v| *v /= sw);
    let mut v = vec![0.0; ni + 1];
    for r in records {
        let w = f64::from(r.weight);
        r.inputs.iter().enumerate().for_each(|(k, x)| v[k] += w * (x - m[k]).powi(2));
        v[ni] += w * (r.target_sss - m[ni]).powi(2);
    }
    // constant columns keep a unit scale
    let s: Vec<f64> = v.iter().map(|v| (v / sw).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
    Ok(Normalization {
        in_mean: m[..ni].to_vec(),
        in_std: s[..ni].to_vec(),
        out_mean: m[ni],
        out_std: s[ni],
    })
}

/// A record with pre-standardized inputs and target.
#[derive(Debug, Clone)]
struct Prepared {
    x: Vec<f64>,
    y: f64,
    w: f64,
}

fn prepare(params: &NetworkParams, records: &[TrainingRecord]) -> Result<Vec<Prepared>> {
    let norm = params.norm()?;
    records
        .iter()
        .map(|r| {
            Ok(Prepared {
                x: params.normalize_inputs(&r.inputs)?,
                y: (r.target_sss - norm.out_mean) / norm.out_std,
                w: f64::from(r.weight),
            })
        })
        .collect()
}

/// Adds the weighted squared-error gradient of `batch` into `grad` and
/// returns (sum of weighted squared errors, sum of weights).
fn accumulate(params: &NetworkParams, batch: &[&Prepared], grad: &mut [f64], hidden: &mut [f64]) -> (f64, f64) {
    let (nh, ni) = (params.n_hidden, params.n_inputs);
    let (gw1, rest) = grad.split_at_mut(nh * ni);
    let (gb1, rest) = rest.split_at_mut(nh);
    let (gw2, gb2) = rest.split_at_mut(nh);
    let mut sse = 0.0;
    let mut sw = 0.0;
    for p in batch {
        let y = params.output_normalized(&p.x, hidden);
        let e = y - p.y;
        sse += p.w * e * e;
        sw += p.w;
        let d = 2.0 * p.w * e;
        gb2[0] += d;
        for j in 0..nh {
            gw2[j] += d * hidden[j];
            let dh = d * params.w_out[j] * (1.0 - hidden[j] * hidden[j]);
            gb1[j] += dh;
            let row = &mut gw1[j * ni..(j + 1) * ni];
            row.iter_mut().zip(&p.x).for_each(|(g, x)| *g += dh * x);
        }
    }
    (sse, sw)
}

/// Gradient of the weighted MSE on the standardized target, in the
/// `NetworkParams::to_vec` layout.
pub fn gradient(params: &NetworkParams, batch: &[TrainingRecord]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    let prepared = prepare(params, batch)?;
    let refs: Vec<&Prepared> = prepared.iter().collect();
    let mut grad = vec![0.0; params.n_params()];
    let mut hidden = vec![0.0; params.n_hidden];
    let (_, sw) = accumulate(params, &refs, &mut grad, &mut hidden);
    grad.iter_mut().for_each(|g| *g /= sw);
    Ok(grad)
}

/// Weighted MSE on the standardized target.
pub fn loss(params: &NetworkParams, batch: &[TrainingRecord]) -> Result<f64> {
    let prepared = prepare(params, batch)?;
    let mut hidden = vec![0.0; params.n_hidden];
    let (sse, sw) = prepared.iter().fold((0.0, 0.0), |(s, w), p| {
        let e = params.output_normalized(&p.x, &mut hidden) - p.y;
        (s + p.w * e * e, w + p.w)
    });
    if sw == 0.0 {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    Ok(sse / sw)
}

/// Weighted RMSE in psu.
pub fn rmse(params: &NetworkParams, records: &[TrainingRecord]) -> Result<f64> {
    let out = forward_batch(params, records)?;
    let (s, w) = out.iter().zip(records).fold((0.0, 0.0), |(s, w), (y, r)| {
        let wt = f64::from(r.weight);
        (s + wt * (y - r.target_sss).powi(2), w + wt)
    });
    if w == 0.0 {
        return Err(Error::InsufficientData("empty database".into()));
    }
    Ok((s / w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 150,
            patience: 15,
            learning_rate: 0.01,
            lr_decay: 0.98,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("patience and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidConfig("need learning_rate > 0 and lr_decay in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_rmse: f64,
    pub valid_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Validation RMSE (psu) of the starting parameters.
    pub initial_valid_rmse: f64,
    pub epochs: Vec<EpochStats>,
    /// 0 when the starting parameters were never beaten.
    pub best_epoch: usize,
    pub best_valid_rmse: f64,
}

fn check_class(params: &NetworkParams, db: &Database) -> Result<()> {
    if db.class_id != params.class_id {
        return Err(Error::ClassMismatch {
            expected: params.class_id,
            found: db.class_id,
        });
    }
    if db.is_empty() {
        return Err(Error::InsufficientData(format!("{} database is empty", db.provenance)));
    }
    Ok(())
}

/// Fit normalization on `learning`, then run the training loop.
pub fn train(
    params: &NetworkParams,
    learning: &Database,
    validation: &Database,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainHistory)> {
    check_class(params, learning)?;
    let mut p = params.clone();
    p.norm = Some(fit_normalization(&learning.records)?);
    run_loop(p, learning, validation, cfg)
}

/// Warm start from trained parameters; normalization stays frozen.
pub fn continue_training(
    params: &NetworkParams,
    boost: &Database,
    validation: &Database,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainHistory)> {
    params.norm()?;
    check_class(params, boost)?;
    run_loop(params.clone(), boost, validation, cfg)
}

fn run_loop(
    mut p: NetworkParams,
    learning: &Database,
    validation: &Database,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, TrainHistory)> {
    cfg.validate()?;
    check_class(&p, validation)?;
    p.validate()?;
    let data = prepare(&p, &learning.records)?;
    let initial = rmse(&p, &validation.records)?;
    let mut history = TrainHistory {
        initial_valid_rmse: initial,
        epochs: Vec::new(),
        best_epoch: 0,
        best_valid_rmse: initial,
    };
    let mut best = p.clone();
    let mut theta = p.to_vec();
    let mut velocity = vec![0.0; theta.len()];
    let mut grad = vec![0.0; theta.len()];
    let mut hidden = vec![0.0; p.n_hidden];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = seed::rng(seed::derive(cfg.seed, "train-shuffle"));
    let mut lr = cfg.learning_rate;
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        let mut sw = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &data[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let (s, w) = accumulate(&p, &batch, &mut grad, &mut hidden);
            sse += s;
            sw += w;
            for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - lr * g / w;
                *t += *v;
            }
            p.set_from_vec(&theta)?;
        }
        lr *= cfg.lr_decay;
        let out_std = p.norm()?.out_std;
        let valid = rmse(&p, &validation.records)?;
        history.epochs.push(EpochStats {
            epoch,
            train_rmse: (sse / sw).sqrt() * out_std,
            valid_rmse: valid,
        });
        if !valid.is_finite() {
            break;
        }
        if valid < history.best_valid_rmse {
            history.best_valid_rmse = valid;
            history.best_epoch = epoch;
            best = p.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    log::debug!(
        "class {} trained: best epoch {} rmse {:.4} psu",
        best.class_id,
        history.best_epoch,
        history.best_valid_rmse
    );
    Ok((best, history))
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Versioned text dump; floats round-trip bit-exactly.
pub fn params_to_text(p: &NetworkParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PARAM_FILE_VERSION}");
    let _ = writeln!(out, "class_id,{}", p.class_id);
    let _ = writeln!(out, "n_inputs,{}", p.n_inputs);
    let _ = writeln!(out, "n_hidden,{}", p.n_hidden);
    match &p.norm {
        Some(n) => {
            let _ = writeln!(out, "in_mean,{}", join(&n.in_mean));
            let _ = writeln!(out, "in_std,{}", join(&n.in_std));
            let _ = writeln!(out, "out,{},{}", n.out_mean, n.out_std);
        }
        None => out.push_str("unfitted\n"),
    }
    for j in 0..p.n_hidden {
        let _ = writeln!(out, "w_hidden,{}", join(&p.w_hidden[j * p.n_inputs..(j + 1) * p.n_inputs]));
    }
    let _ = writeln!(out, "b_hidden,{}", join(&p.b_hidden));
    let _ = writeln!(out, "w_out,{}", join(&p.w_out));
    let _ = writeln!(out, "b_out,{}", p.b_out);
    out
}

pub fn params_from_text(text: &str, path: &str) -> Result<NetworkParams> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, v)) if v.trim() == PARAM_FILE_VERSION => {}
        other => {
            return Err(Error::Schema(format!(
                "{path}: expected {PARAM_FILE_VERSION:?}, found {:?}",
                other.map(|(_, l)| l)
            )))
        }
    }
    let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
        let (i, line) = lines.next().ok_or_else(|| perr(0, format!("missing {key}")))?;
        let mut parts = line.split(',').map(|s| s.trim().to_string());
        let k = parts.next().unwrap_or_default();
        if k != key {
            return Err(perr(i + 1, format!("expected {key}, found {k}")));
        }
        Ok((i + 1, parts.collect()))
    };
    let floats = |line: usize, v: &[String]| -> Result<Vec<f64>> {
        v.iter()
            .map(|s| s.parse::<f64>().map_err(|e| perr(line, e.to_string())))
            .collect()
    };
    let int = |line: usize, v: &[String]| -> Result<usize> {
        v.first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| perr(line, "expected an integer".into()))
    };
    let (l, v) = next("class_id")?;
    let class_id = int(l, &v)? as u8;
    let (l, v) = next("n_inputs")?;
    let n_inputs = int(l, &v)?;
    let (l, v) = next("n_hidden")?;
    let n_hidden = int(l, &v)?;
    let norm = match next("in_mean") {
        Ok((l, v)) => {
            let in_mean = floats(l, &v)?;
            let (l, v) = next("in_std")?;
            let in_std = floats(l, &v)?;
            let (l, v) = next("out")?;
            let o = floats(l, &v)?;
            if o.len() != 2 {
                return Err(perr(l, "out needs mean,std".into()));
            }
            Some(Normalization {
                in_mean,
                in_std,
                out_mean: o[0],
                out_std: o[1],
            })
        }
        Err(_) => None,
    };
    let mut w_hidden = Vec::with_capacity(n_hidden * n_inputs);
    for _ in 0..n_hidden {
        let (l, v) = next("w_hidden")?;
        w_hidden.extend(floats(l, &v)?);
    }
    let (l, v) = next("b_hidden")?;
    let b_hidden = floats(l, &v)?;
    let (l, v) = next("w_out")?;
    let w_out = floats(l, &v)?;
    let (l, v) = next("b_out")?;
    let b_out = *floats(l, &v)?.first().ok_or_else(|| perr(l, "missing b_out".into()))?;
    let p = NetworkParams {
        class_id,
        n_inputs,
        n_hidden,
        w_hidden,
        b_hidden,
        w_out,
        b_out,
        norm,
    };
    p.validate()?;
    Ok(p)
}

pub fn write_params(p: &NetworkParams, path: &Path) -> Result<()> {
    fs::write(path, params_to_text(p))?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<NetworkParams> {
    let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
    params_from_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::database::Provenance;

    fn rec(inputs: Vec<f64>, y: f64, weight: u32) -> TrainingRecord {
        TrainingRecord {
            inputs,
            target_sss: y,
            box_id: 0,
            lat: 0.0,
            lon: 0.0,
            weight,
            true_sst: 0.0,
            true_wind: 0.0,
        }
    }

    fn toy_db(n: usize, seed_: u64) -> Database {
        let mut rng = seed::rng(seed_);
        let records = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                rec(vec![a, b], a + b, 1)
            })
            .collect();
        Database {
            class_id: 9,
            provenance: Provenance::B1,
            build_seed: seed_,
            records,
        }
    }

    fn fitted(n_inputs: usize, seed_: u64) -> NetworkParams {
        let mut p = init_with_inputs(9, n_inputs, 4, seed_).unwrap();
        p.norm = Some(Normalization {
            in_mean: vec![0.0; n_inputs],
            in_std: vec![1.0; n_inputs],
            out_mean: 0.0,
            out_std: 1.0,
        });
        p
    }

    #[test]
    fn input_counts() {
        let c1 = PixelClassSpec::default_for(1).unwrap();
        let c8 = PixelClassSpec::default_for(8).unwrap();
        assert_eq!(init_network(&c1, 30, 1).unwrap().n_inputs, 25);
        assert_eq!(init_network(&c8, 20, 1).unwrap().n_inputs, 5);
        assert_eq!(init_network(&c1, 30, 1).unwrap(), init_network(&c1, 30, 1).unwrap());
        assert!(init_network(&c1, 0, 1).is_err());
    }

    #[test]
    fn zero_weights_return_denormalized_bias() {
        let mut p = fitted(3, 1);
        p.w_hidden.iter_mut().for_each(|w| *w = 0.0);
        p.w_out.iter_mut().for_each(|w| *w = 0.0);
        p.b_out = 0.5;
        if let Some(n) = p.norm.as_mut() {
            n.out_mean = 35.0;
            n.out_std = 2.0;
        }
        assert_eq!(forward(&p, &[1.0, 2.0, 3.0]).unwrap(), 36.0);
        let unfit = init_with_inputs(9, 3, 4, 1).unwrap();
        assert!(matches!(forward(&unfit, &[1.0, 2.0, 3.0]), Err(Error::Unfitted)));
        assert!(forward(&p, &[1.0]).is_err());
    }

    #[test]
    fn weight_two_equals_two_copies() {
        let p = fitted(2, 3);
        let a = rec(vec![0.3, -0.2], 0.7, 1);
        let b = rec(vec![-0.5, 0.9], -0.1, 1);
        let mut a2 = a.clone();
        a2.weight = 2;
        let g1 = gradient(&p, &[a.clone(), a, b.clone()]).unwrap();
        let g2 = gradient(&p, &[a2, b]).unwrap();
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let p = fitted(2, 4);
        let x = vec![0.2, 0.4];
        let y = forward(&p, &x).unwrap();
        let g = gradient(&p, &[rec(x, y, 1)]).unwrap();
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10);
    }

    #[test]
    fn learns_a_sum() {
        let learn = toy_db(2000, 1);
        let valid = toy_db(500, 2);
        let p = init_with_inputs(9, 2, 8, 3).unwrap();
        let cfg = TrainConfig {
            max_epochs: 60,
            ..TrainConfig::default()
        };
        let (trained, hist) = train(&p, &learn, &valid, &cfg).unwrap();
        assert!(hist.epochs.len() <= cfg.max_epochs);
        assert!(hist.best_valid_rmse <= hist.initial_valid_rmse);
        let test = toy_db(200, 4);
        let worst = test
            .records
            .iter()
            .map(|r| (forward(&trained, &r.inputs).unwrap() - r.target_sss).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "max error {worst}");
    }

    #[test]
    fn zero_epoch_continuation_is_identity() {
        let learn = toy_db(300, 1);
        let p = init_with_inputs(9, 2, 4, 3).unwrap();
        let cfg = TrainConfig {
            max_epochs: 5,
            ..TrainConfig::default()
        };
        let (trained, _) = train(&p, &learn, &learn, &cfg).unwrap();
        let zero = TrainConfig {
            max_epochs: 0,
            ..cfg.clone()
        };
        let (same, hist) = continue_training(&trained, &learn, &learn, &zero).unwrap();
        assert_eq!(same, trained);
        assert!(hist.epochs.is_empty());
        assert!(continue_training(&p, &learn, &learn, &cfg).is_err());
    }

    #[test]
    fn class_mismatch_is_rejected() {
        let learn = toy_db(10, 1);
        let p = init_with_inputs(8, 2, 4, 3).unwrap();
        assert!(matches!(
            train(&p, &learn, &learn, &TrainConfig::default()),
            Err(Error::ClassMismatch { expected: 8, found: 9 })
        ));
    }

    #[test]
    fn param_text_round_trip() {
        let learn = toy_db(100, 1);
        let mut p = init_with_inputs(9, 2, 3, 5).unwrap();
        assert_eq!(params_from_text(&params_to_text(&p), "mem").unwrap(), p);
        p.norm = Some(fit_normalization(&learn.records).unwrap());
        let text = params_to_text(&p);
        let back = params_from_text(&text, "mem").unwrap();
        assert_eq!(back, p);
        assert_eq!(params_to_text(&back), text);
        assert!(matches!(params_from_text("other v9\n", "mem"), Err(Error::Schema(_))));
    }
}
