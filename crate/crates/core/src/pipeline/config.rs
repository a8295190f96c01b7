//! Flat experiment configuration, read from TOML.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::database::{BoxWidths, WorldConfig};
use crate::error::{Error, Result};
use crate::forward::RadiometerSpec;
use crate::geometry::PixelClassSpec;
use crate::net::{default_hidden, TrainConfig};
use crate::smoother::{Kernel, SmootherConfig, DEFAULT_BANDWIDTH_FACTOR};

/// Every key is optional in the file; missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    /// Pixel classes to build networks for.
    pub classes: Vec<u8>,

    pub frequency: f64,
    /// Linear wind term of the first Stokes TB (K per m/s).
    pub wind_coeff: f64,

    pub world_resolution: f64,
    pub world_months: usize,
    pub world_sss_anomaly: f64,
    pub world_sst_anomaly: f64,
    pub world_wind_anomaly: f64,
    pub world_wind_gust: f64,

    /// Raw observations per interpolation angle.
    pub raw_density: usize,
    /// Raw radiometric noise per class (K), classes 1..=10.
    pub raw_sigma: Vec<f64>,
    pub kernel: Kernel,
    /// Kernel half-width in units of the mean raw angle spacing.
    pub bandwidth_factor: f64,
    pub calibration_pixels: usize,
    /// Accepted residual/raw std ratio band.
    pub reduction_band: (f64, f64),

    pub b1_fraction: f64,
    pub box_sss: f64,
    pub box_sst: f64,
    pub box_wind: f64,
    pub per_box: u32,
    /// Per-box count of the validation set used with equalized databases.
    pub valid_per_box: u32,
    pub boost_threshold: f64,
    /// Fresh noise draws of B2 used to estimate box biases.
    pub boost_replicates: usize,
    pub sst_split: f64,
    /// Independent noise realizations of the test set.
    pub test_replicates: usize,

    /// Hidden units per class, classes 1..=10.
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub boost_max_epochs: usize,
    pub boost_learning_rate: f64,

    pub blend_lo: f64,
    pub blend_hi: f64,
    /// Worker threads; 0 lets the runtime decide.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let world = WorldConfig::default();
        let train = TrainConfig::default();
        let boxes = BoxWidths::default();
        ExperimentConfig {
            seed: 20260101,
            classes: vec![1, 8],
            frequency: RadiometerSpec::default().frequency,
            wind_coeff: RadiometerSpec::default().wind_coeff,
            world_resolution: world.resolution,
            world_months: world.months,
            world_sss_anomaly: world.sss_anomaly,
            world_sst_anomaly: world.sst_anomaly,
            world_wind_anomaly: world.wind_anomaly,
            world_wind_gust: world.wind_gust,
            raw_density: crate::geometry::DEFAULT_DENSITY,
            raw_sigma: (1..=10).map(|c| PixelClassSpec::default_for(c).map(|s| s.raw_sigma).unwrap_or(2.0)).collect(),
            kernel: Kernel::Epanechnikov,
            bandwidth_factor: DEFAULT_BANDWIDTH_FACTOR,
            calibration_pixels: 10_000,
            reduction_band: (0.4, 0.7),
            b1_fraction: 0.1,
            box_sss: boxes.sss,
            box_sst: boxes.sst,
            box_wind: boxes.wind,
            per_box: 10,
            valid_per_box: 3,
            boost_threshold: 0.2,
            boost_replicates: 4,
            sst_split: 10.0,
            test_replicates: 4,
            hidden: (1..=10).map(default_hidden).collect(),
            max_epochs: train.max_epochs,
            patience: train.patience,
            learning_rate: train.learning_rate,
            lr_decay: train.lr_decay,
            momentum: train.momentum,
            batch_size: train.batch_size,
            boost_max_epochs: 60,
            boost_learning_rate: 0.003,
            blend_lo: -50.0,
            blend_hi: -45.0,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.classes.is_empty() {
            return bad("classes must not be empty".into());
        }
        for c in &self.classes {
            PixelClassSpec::default_for(*c)?;
        }
        if self.raw_sigma.len() != 10 || self.hidden.len() != 10 {
            return bad("raw_sigma and hidden need one entry per class (10)".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden sizes must be >= 1".into());
        }
        self.radiometer().validate()?;
        self.world().validate()?;
        self.boxes().validate()?;
        if !(self.b1_fraction > 0.0 && self.b1_fraction < 0.8) {
            return bad(format!("b1_fraction {} not in (0, 0.8)", self.b1_fraction));
        }
        if self.per_box == 0 || self.valid_per_box == 0 || self.test_replicates == 0 || self.boost_replicates == 0 || self.raw_density == 0 {
            return bad("per_box, test_replicates, boost_replicates and raw_density must be >= 1".into());
        }
        if self.calibration_pixels < 30 {
            return bad("calibration_pixels must be >= 30".into());
        }
        if !(self.reduction_band.0 < self.reduction_band.1) {
            return bad("reduction_band must be increasing".into());
        }
        if !(self.blend_lo < self.blend_hi) {
            return bad("blend_lo must be below blend_hi".into());
        }
        if !(self.bandwidth_factor > 0.0) {
            return bad("bandwidth_factor must be > 0".into());
        }
        self.train_config(0).validate()?;
        self.boost_config(0).validate()
    }

    pub fn radiometer(&self) -> RadiometerSpec {
        RadiometerSpec {
            frequency: self.frequency,
            wind_coeff: self.wind_coeff,
        }
    }

    pub fn world(&self) -> WorldConfig {
        WorldConfig {
            resolution: self.world_resolution,
            months: self.world_months,
            sss_anomaly: self.world_sss_anomaly,
            sst_anomaly: self.world_sst_anomaly,
            wind_anomaly: self.world_wind_anomaly,
            wind_gust: self.world_wind_gust,
            ..WorldConfig::default()
        }
    }

    pub fn boxes(&self) -> BoxWidths {
        BoxWidths {
            sss: self.box_sss,
            sst: self.box_sst,
            wind: self.box_wind,
        }
    }

    pub fn class_spec(&self, class_id: u8) -> Result<PixelClassSpec> {
        let mut spec = PixelClassSpec::default_for(class_id)?;
        spec.raw_sigma = self.raw_sigma[usize::from(class_id) - 1];
        Ok(spec)
    }

    pub fn smoother(&self, class: &PixelClassSpec) -> SmootherConfig {
        SmootherConfig {
            kernel: self.kernel,
            ..SmootherConfig::for_class(class, self.raw_density, self.bandwidth_factor)
        }
    }

    pub fn hidden_for(&self, class_id: u8) -> usize {
        self.hidden[usize::from(class_id) - 1]
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            patience: self.patience,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            momentum: self.momentum,
            batch_size: self.batch_size,
            seed,
        }
    }

    pub fn boost_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.boost_max_epochs,
            learning_rate: self.boost_learning_rate,
            ..self.train_config(seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_files_use_defaults() {
        let c = ExperimentConfig::from_toml("seed = 7\nclasses = [1]\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.per_box, 10);
    }

    #[test]
    fn bad_keys_and_values() {
        assert!(ExperimentConfig::from_toml("sede = 7\n").is_err());
        assert!(ExperimentConfig::from_toml("classes = [11]\n").is_err());
        assert!(ExperimentConfig::from_toml("b1_fraction = 0.9\n").is_err());
    }
}
