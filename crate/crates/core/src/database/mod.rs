//! Learning-database construction.
//!
//! Selections (`B1`, `B2`, `Bm`, validation) are drawn from the flattened
//! synthetic world `B0` and then materialized into network-ready records:
//! noise-free TBs on the class grid, one fixed realization of the class's
//! residual noise, and perturbed auxiliary SST and wind.

pub mod io;
pub mod world;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{first_stokes_profile, RadiometerSpec, SeaState};
use crate::geometry::PixelClassSpec;
use crate::noise::{perturb_aux_with, CorrelatedNoiseSpec};
use crate::seed;

pub use world::{flatten, generate_world, OceanField, WorldConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    B0,
    B1,
    B2,
    B3,
    Bm,
    Validation,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::B0 => "B0",
            Provenance::B1 => "B1",
            Provenance::B2 => "B2",
            Provenance::B3 => "B3",
            Provenance::Bm => "Bm",
            Provenance::Validation => "validation",
        };
        f.write_str(s)
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "B0" => Provenance::B0,
            "B1" => Provenance::B1,
            "B2" => Provenance::B2,
            "B3" => Provenance::B3,
            "Bm" => Provenance::Bm,
            "validation" => Provenance::Validation,
            other => return Err(Error::InvalidConfig(format!("unknown provenance {other:?}"))),
        })
    }
}

/// Bin widths of the (SSS, SST, W) equalization grid. Boxes are half-open and
/// anchored at (0 psu, -2 °C, 0 m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxWidths {
    pub sss: f64,
    pub sst: f64,
    pub wind: f64,
}

impl Default for BoxWidths {
    fn default() -> Self {
        BoxWidths {
            sss: 0.2,
            sst: 0.5,
            wind: 1.0,
        }
    }
}

const BOX_STRIDE: u64 = 1000;

impl BoxWidths {
    pub fn validate(&self) -> Result<()> {
        if [self.sss, self.sst, self.wind].iter().all(|w| *w > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("box widths must be > 0".into()))
        }
    }

    /// `i_sss * 10^6 + i_sst * 10^3 + i_wind`
    pub fn box_id(&self, s: &SeaState) -> u64 {
        let i = |v: f64, origin: f64, w: f64| (((v - origin) / w).floor().max(0.0) as u64).min(BOX_STRIDE - 1);
        let is = i(s.sss, 0.0, self.sss);
        let it = i(s.sst, -2.0, self.sst);
        let iw = i(s.wind, 0.0, self.wind);
        (is * BOX_STRIDE + it) * BOX_STRIDE + iw
    }
}

/// A chosen world pixel with its equalization box and duplication count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: SeaState,
    pub box_id: u64,
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub provenance: Provenance,
    pub samples: Vec<Sample>,
}

impl Selection {
    pub fn total_weight(&self) -> u64 {
        self.samples.iter().map(|s| u64::from(s.weight)).sum()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn unit_samples(b0: &[SeaState], idx: impl IntoIterator<Item = usize>, widths: &BoxWidths) -> Vec<Sample> {
    idx.into_iter()
        .map(|i| Sample {
            state: b0[i],
            box_id: widths.box_id(&b0[i]),
            weight: 1,
        })
        .collect()
}

/// Uniform random learning and validation extractions without replacement.
/// The validation set is a quarter of the learning size and disjoint from it.
pub fn extract_random(b0: &[SeaState], fraction: f64, rng_seed: u64) -> Result<(Selection, Selection)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("fraction {fraction} not in (0, 1)")));
    }
    let n = b0.len();
    let n_learn = (fraction * n as f64).round() as usize;
    let n_valid = (fraction * n as f64 / 4.0).round() as usize;
    if n_learn == 0 {
        return Err(Error::InvalidConfig(format!("fraction {fraction} selects no record out of {n}")));
    }
    if n_learn + n_valid > n {
        return Err(Error::InvalidConfig(format!(
            "fraction {fraction} too large: {n_learn} + {n_valid} > {n}"
        )));
    }
    let mut rng = seed::rng(rng_seed);
    let picked = index::sample(&mut rng, n, n_learn + n_valid).into_vec();
    let widths = BoxWidths::default();
    let mut learn: Vec<usize> = picked[..n_learn].to_vec();
    let mut valid: Vec<usize> = picked[n_learn..].to_vec();
    learn.sort_unstable();
    valid.sort_unstable();
    Ok((
        Selection {
            provenance: Provenance::B1,
            samples: unit_samples(b0, learn, &widths),
        },
        Selection {
            provenance: Provenance::Validation,
            samples: unit_samples(b0, valid, &widths),
        },
    ))
}

/// Group indices of `b0` by box, in ascending box order.
pub fn group_by_box(b0: &[SeaState], widths: &BoxWidths) -> BTreeMap<u64, Vec<usize>> {
    let mut boxes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, s) in b0.iter().enumerate() {
        boxes.entry(widths.box_id(s)).or_default().push(i);
    }
    boxes
}

/// Constant number of triplets per (SSS, SST, W) box. Crowded boxes are
/// subsampled without replacement; sparse ones are duplicated cyclically,
/// which is carried as per-sample weights summing to `per_box`.
pub fn equalize(b0: &[SeaState], widths: &BoxWidths, per_box: u32, rng_seed: u64) -> Result<Selection> {
    widths.validate()?;
    if per_box == 0 {
        return Err(Error::InvalidConfig("per_box must be >= 1".into()));
    }
    let mut samples = Vec::new();
    for (box_id, members) in group_by_box(b0, widths) {
        let k = per_box as usize;
        if members.len() >= k {
            let mut rng = seed::rng(seed::derive_index(rng_seed, box_id));
            let mut chosen: Vec<usize> = index::sample(&mut rng, members.len(), k)
                .into_iter()
                .map(|j| members[j])
                .collect();
            chosen.sort_unstable();
            samples.extend(chosen.into_iter().map(|i| Sample {
                state: b0[i],
                box_id,
                weight: 1,
            }));
        } else {
            let n = members.len();
            samples.extend(members.iter().enumerate().map(|(j, &i)| Sample {
                state: b0[i],
                box_id,
                weight: (k / n + usize::from(j < k % n)) as u32,
            }));
        }
    }
    Ok(Selection {
        provenance: Provenance::B2,
        samples,
    })
}

/// Geographically uniform for cold water (`sst <= sst_split`), equalized for
/// warm water. The cold part fills whatever the equalized warm part leaves
/// of `total_size`.
pub fn build_mixed(
    b0: &[SeaState],
    widths: &BoxWidths,
    per_box: u32,
    sst_split: f64,
    total_size: u64,
    rng_seed: u64,
) -> Result<Selection> {
    if total_size == 0 {
        return Err(Error::InvalidConfig("total_size must be > 0".into()));
    }
    let (cold, warm): (Vec<usize>, Vec<usize>) = (0..b0.len()).partition(|&i| b0[i].sst <= sst_split);
    let warm_states: Vec<SeaState> = warm.iter().map(|&i| b0[i]).collect();
    let mut samples = if warm_states.is_empty() {
        Vec::new()
    } else {
        equalize(&warm_states, widths, per_box, seed::derive(rng_seed, "warm"))?.samples
    };
    let warm_total: u64 = samples.iter().map(|s| u64::from(s.weight)).sum();
    let n_cold = (total_size.saturating_sub(warm_total) as usize).min(cold.len());
    if n_cold > 0 {
        let mut rng = seed::rng(seed::derive(rng_seed, "cold"));
        let mut picked: Vec<usize> = index::sample(&mut rng, cold.len(), n_cold)
            .into_iter()
            .map(|j| cold[j])
            .collect();
        picked.sort_unstable();
        samples.extend(unit_samples(b0, picked, widths));
    }
    Ok(Selection {
        provenance: Provenance::Bm,
        samples,
    })
}

/// Network input vector plus its truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    /// Interpolated TBs, then noisy SST, then noisy wind.
    pub inputs: Vec<f64>,
    pub target_sss: f64,
    pub box_id: u64,
    pub lat: f64,
    pub lon: f64,
    pub weight: u32,
    /// True SST and wind, kept for evaluation and re-noising.
    pub true_sst: f64,
    pub true_wind: f64,
}

impl TrainingRecord {
    pub fn tbs(&self) -> &[f64] {
        &self.inputs[..self.inputs.len() - 2]
    }

    pub fn noisy_sst(&self) -> f64 {
        self.inputs[self.inputs.len() - 2]
    }

    pub fn noisy_wind(&self) -> f64 {
        self.inputs[self.inputs.len() - 1]
    }

    /// The noise-free sea state behind this record.
    pub fn truth(&self) -> SeaState {
        SeaState {
            sss: self.target_sss,
            sst: self.true_sst,
            wind: self.true_wind,
            lat: self.lat.is_finite().then_some(self.lat),
            lon: self.lon.is_finite().then_some(self.lon),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    pub class_id: u8,
    pub provenance: Provenance,
    pub build_seed: u64,
    pub records: Vec<TrainingRecord>,
}

impl Database {
    pub fn total_weight(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.weight)).sum()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_inputs(&self) -> Option<usize> {
        self.records.first().map(|r| r.inputs.len())
    }

    pub fn box_ids(&self) -> BTreeSet<u64> {
        self.records.iter().map(|r| r.box_id).collect()
    }

    /// The records' sea states as a selection, for re-materializing with
    /// another noise realization.
    pub fn to_selection(&self) -> Selection {
        Selection {
            provenance: self.provenance,
            samples: self
                .records
                .iter()
                .map(|r| Sample {
                    state: r.truth(),
                    box_id: r.box_id,
                    weight: r.weight,
                })
                .collect(),
        }
    }
}

/// Noise applied when turning sea states into network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializeConfig {
    pub radiometer: RadiometerSpec,
    /// Residual TB noise on the class grid; `None` for noise-free inputs.
    pub tb_noise: Option<CorrelatedNoiseSpec>,
    pub aux_noise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClampStats {
    pub sst_clamped: usize,
    pub wind_clamped: usize,
    pub records: usize,
}

impl ClampStats {
    pub fn sst_rate(&self) -> f64 {
        self.sst_clamped as f64 / self.records.max(1) as f64
    }

    pub fn wind_rate(&self) -> f64 {
        self.wind_clamped as f64 / self.records.max(1) as f64
    }
}

fn materialize_one(
    sample: &Sample,
    class: &PixelClassSpec,
    cfg: &MaterializeConfig,
    record_seed: u64,
) -> Result<(TrainingRecord, bool, bool)> {
    let mut inputs = first_stokes_profile(&sample.state, &class.angle_grid, &cfg.radiometer)?;
    let mut rng = seed::rng(record_seed);
    if let Some(spec) = &cfg.tb_noise {
        let mut noise = vec![0.0; spec.dim()];
        spec.draw_into(&mut rng, &mut noise);
        inputs.iter_mut().zip(&noise).for_each(|(tb, n)| *tb += n);
    }
    let (sst, wind, cs, cw) = if cfg.aux_noise {
        let d = perturb_aux_with(sample.state.sst, sample.state.wind, &mut rng);
        (d.sst, d.wind, d.sst_clamped, d.wind_clamped)
    } else {
        (sample.state.sst, sample.state.wind, false, false)
    };
    inputs.push(sst);
    inputs.push(wind);
    Ok((
        TrainingRecord {
            inputs,
            target_sss: sample.state.sss,
            box_id: sample.box_id,
            lat: sample.state.lat.unwrap_or(f64::NAN),
            lon: sample.state.lon.unwrap_or(f64::NAN),
            weight: sample.weight,
            true_sst: sample.state.sst,
            true_wind: sample.state.wind,
        },
        cs,
        cw,
    ))
}

/// Forward-model TBs plus one fixed noise realization per record. Record `i`
/// draws from a stream keyed by `(rng_seed, i)`, so output is independent of
/// thread count.
pub fn materialize_records(
    selection: &Selection,
    class: &PixelClassSpec,
    cfg: &MaterializeConfig,
    rng_seed: u64,
) -> Result<(Database, ClampStats)> {
    class.validate()?;
    if let Some(spec) = &cfg.tb_noise {
        if spec.dim() != class.n_angles {
            return Err(Error::ShapeMismatch(format!(
                "noise spec has {} angles, class {} has {}",
                spec.dim(),
                class.class_id,
                class.n_angles
            )));
        }
    }
    let out: Vec<(TrainingRecord, bool, bool)> = selection
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| materialize_one(s, class, cfg, seed::derive_index(rng_seed, i as u64)))
        .collect::<Result<_>>()?;
    let mut stats = ClampStats {
        records: out.len(),
        ..ClampStats::default()
    };
    let records = out
        .into_iter()
        .map(|(r, cs, cw)| {
            stats.sst_clamped += usize::from(cs);
            stats.wind_clamped += usize::from(cw);
            r
        })
        .collect();
    Ok((
        Database {
            class_id: class.class_id,
            provenance: selection.provenance,
            build_seed: rng_seed,
            records,
        },
        stats,
    ))
}

/// Keep whole boxes whose mean retrieval error exceeds `threshold` in
/// absolute value.
pub fn boost_extract(b2: &Database, box_bias: &BTreeMap<u64, f64>, threshold: f64) -> Result<Database> {
    let mut records = Vec::new();
    for r in &b2.records {
        let bias = *box_bias.get(&r.box_id).ok_or(Error::MissingBox(r.box_id))?;
        if bias.abs() > threshold {
            records.push(r.clone());
        }
    }
    Ok(Database {
        class_id: b2.class_id,
        provenance: Provenance::B3,
        build_seed: b2.build_seed,
        records,
    })
}
