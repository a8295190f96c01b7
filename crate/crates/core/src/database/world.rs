//! Parametric synthetic ocean: monthly global (SSS, SST, W) fields.
//!
//! Zonal climatologies plus a handful of regional features (river plumes,
//! warm western boundary currents, saline Atlantic subtropics) and smooth
//! random anomalies. The land mask is a fixed set of lat/lon boxes loosely
//! shaped like the continents.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{SeaState, SSS_RANGE, SST_RANGE, WIND_RANGE};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Grid spacing (degrees).
    pub resolution: f64,
    pub months: usize,
    pub lat_limit: f64,
    /// Std of the smooth SSS anomaly field (psu).
    pub sss_anomaly: f64,
    /// Std of the smooth SST anomaly field (°C).
    pub sst_anomaly: f64,
    /// Std of the smooth wind anomaly field (m/s).
    pub wind_anomaly: f64,
    /// Std of pixel-scale wind variability (m/s).
    pub wind_gust: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            resolution: 1.0,
            months: 12,
            lat_limit: 65.0,
            sss_anomaly: 0.35,
            sst_anomaly: 1.0,
            wind_anomaly: 1.5,
            wind_gust: 1.5,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution <= 10.0) {
            return Err(Error::InvalidConfig(format!("resolution {} not in (0, 10]", self.resolution)));
        }
        if !(1..=12).contains(&self.months) {
            return Err(Error::InvalidConfig(format!("months {} not in 1..=12", self.months)));
        }
        if !(self.lat_limit > 0.0 && self.lat_limit <= 90.0) {
            return Err(Error::InvalidConfig("lat_limit must be in (0, 90]".into()));
        }
        let anomalies = [self.sss_anomaly, self.sst_anomaly, self.wind_anomaly, self.wind_gust];
        if anomalies.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidConfig("anomaly amplitudes must be >= 0".into()));
        }
        Ok(())
    }

    /// Cell-centre latitudes, south to north.
    pub fn latitudes(&self) -> Vec<f64> {
        let n = (2.0 * self.lat_limit / self.resolution).round() as usize;
        (0..n)
            .map(|i| -self.lat_limit + (i as f64 + 0.5) * self.resolution)
            .collect()
    }

    pub fn longitudes(&self) -> Vec<f64> {
        let n = (360.0 / self.resolution).round() as usize;
        (0..n).map(|i| -180.0 + (i as f64 + 0.5) * self.resolution).collect()
    }
}

/// One month of the synthetic ocean.
#[derive(Debug, Clone, PartialEq)]
pub struct OceanField {
    /// 1..=12
    pub month: usize,
    pub resolution: f64,
    pub cells: Vec<SeaState>,
}

/// (lat_lo, lat_hi, lon_lo, lon_hi)
const LAND: &[(f64, f64, f64, f64)] = &[
    // North America
    (30.0, 70.0, -130.0, -60.0),
    (15.0, 30.0, -115.0, -82.0),
    (8.0, 15.0, -92.0, -78.0),
    // Greenland
    (60.0, 70.0, -55.0, -20.0),
    // South America
    (-5.0, 12.0, -80.0, -50.0),
    (-25.0, -5.0, -75.0, -38.0),
    (-40.0, -25.0, -72.0, -52.0),
    (-56.0, -40.0, -74.0, -64.0),
    // Europe and Asia
    (36.0, 70.0, -8.0, 180.0),
    (50.0, 70.0, -170.0, -165.0),
    (22.0, 36.0, 35.0, 122.0),
    (8.0, 22.0, 72.0, 80.0),
    (8.0, 22.0, 95.0, 108.0),
    // Africa
    (5.0, 36.0, -17.0, 35.0),
    (5.0, 12.0, 35.0, 51.0),
    (-35.0, 5.0, 9.0, 40.0),
    // Australia
    (-39.0, -12.0, 114.0, 153.0),
];

pub fn is_ocean(lat: f64, lon: f64) -> bool {
    !LAND
        .iter()
        .any(|(a, b, c, d)| lat >= *a && lat < *b && lon >= *c && lon < *d)
}

/// Sum of random plane waves on the sphere, unit variance.
struct SmoothField {
    modes: Vec<(f64, f64, f64, f64, f64)>,
}

impl SmoothField {
    const N_MODES: usize = 24;

    fn new<R: Rng>(rng: &mut R) -> Self {
        let amp = (2.0 / Self::N_MODES as f64).sqrt();
        let modes = (0..Self::N_MODES)
            .map(|_| {
                let kx = f64::from(rng.random_range(1..=8u32)) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let ky = f64::from(rng.random_range(1..=10u32));
                let phase = rng.random::<f64>() * 2.0 * PI;
                let drift = (rng.random::<f64>() - 0.5) * PI / 3.0;
                (kx, ky, phase, drift, amp)
            })
            .collect();
        SmoothField { modes }
    }

    fn at(&self, lat: f64, lon: f64, month: usize) -> f64 {
        let (x, y) = (lon.to_radians(), lat.to_radians());
        self.modes
            .iter()
            .map(|(kx, ky, ph, dr, a)| a * (kx * x + ky * y + ph + dr * month as f64).cos())
            .sum()
    }
}

fn gauss(x: f64, centre: f64, width: f64) -> f64 {
    (-((x - centre) / width).powi(2)).exp()
}

fn blob(lat: f64, lon: f64, clat: f64, clon: f64, radius: f64) -> f64 {
    (-((lat - clat).powi(2) + (lon - clon).powi(2)) / (radius * radius)).exp()
}

/// Climatological SST (°C).
fn sst_climatology(lat: f64, lon: f64, month: usize) -> f64 {
    let s = (lat.abs() / 65.0).min(1.0);
    let base = 28.5 - 28.5 * s.powf(1.3);
    // hemispheric seasons: NH warmest in August, SH in February
    let phase = 2.0 * PI * (month as f64 - 8.0) / 12.0;
    let seasonal = 2.5 * s * phase.cos() * lat.signum();
    // warm North Atlantic drift and Kuroshio extension
    let boundary = 4.0 * gauss(lat, 52.0, 10.0) * gauss(lon, -30.0, 25.0)
        + 1.5 * gauss(lat, 38.0, 6.0) * gauss(lon, 150.0, 15.0);
    base + seasonal + boundary
}

/// Climatological SSS (psu).
fn sss_climatology(lat: f64, lon: f64, month: usize) -> f64 {
    let mut s = 34.6 + 1.5 * gauss(lat.abs(), 24.0, 10.0) - 0.5 * gauss(lat, 6.0, 6.0);
    if lat < -40.0 {
        s -= 0.5 * ((-lat - 40.0) / 20.0).min(1.0);
    }
    if lat > 40.0 {
        s -= 2.0 * ((lat - 40.0) / 25.0).min(1.0);
    }
    // saline subtropical Atlantic
    s += 0.7 * gauss(lon, -40.0, 25.0) * gauss(lat.abs(), 25.0, 12.0);
    // river plumes and fresh coastal seas
    s -= 5.0 * blob(lat, lon, 5.0, -45.0, 7.0);
    s -= 4.0 * blob(lat, lon, 15.0, 88.0, 7.0);
    s -= 2.5 * blob(lat, lon, -5.0, 8.0, 6.0);
    s -= 2.0 * blob(lat, lon, 5.0, 125.0, 8.0);
    s -= 1.5 * blob(lat, lon, 55.0, -58.0, 8.0);
    s -= 1.5 * blob(lat, lon, 55.0, 160.0, 10.0);
    let phase = 2.0 * PI * (month as f64 - 1.0) / 12.0;
    s + 0.1 * phase.sin()
}

/// Climatological wind speed (m/s).
fn wind_climatology(lat: f64, month: usize) -> f64 {
    let trades = 1.5 * gauss(lat.abs(), 15.0, 8.0);
    let doldrums = -3.0 * gauss(lat, 5.0, 4.0);
    let westerlies = 3.0 * gauss(lat.abs(), 50.0, 10.0) + if lat < 0.0 { 0.5 * gauss(lat, -52.0, 10.0) } else { 0.0 };
    // stronger winter winds
    let phase = 2.0 * PI * (month as f64 - 1.0) / 12.0;
    let seasonal = (lat.abs() / 65.0) * phase.cos() * lat.signum();
    7.0 + trades + doldrums + westerlies + seasonal
}

/// Generate `config.months` monthly fields. Months are spread evenly over
/// the year when fewer than 12 are requested.
pub fn generate_world(config: &WorldConfig, rng_seed: u64) -> Result<Vec<OceanField>> {
    config.validate()?;
    let mut rng = seed::rng(seed::derive(rng_seed, "world-fields"));
    let sss_field = SmoothField::new(&mut rng);
    let sst_field = SmoothField::new(&mut rng);
    let wind_field = SmoothField::new(&mut rng);
    let lats = config.latitudes();
    let lons = config.longitudes();
    let gust = Normal::new(0.0, config.wind_gust.max(f64::MIN_POSITIVE)).expect("positive std");
    let step = 12 / config.months;
    let mut fields = Vec::with_capacity(config.months);
    for k in 0..config.months {
        let month = 1 + k * step;
        let mut mrng = seed::rng(seed::derive_index(seed::derive(rng_seed, "world-gusts"), month as u64));
        let mut cells = Vec::new();
        for &lat in &lats {
            // weaker mesoscale salinity variability in the Southern Ocean
            let sss_amp = if lat < -45.0 { 0.6 } else { 1.0 } * config.sss_anomaly;
            for &lon in &lons {
                if !is_ocean(lat, lon) {
                    continue;
                }
                let sst = sst_climatology(lat, lon, month) + config.sst_anomaly * sst_field.at(lat, lon, month);
                let sss = sss_climatology(lat, lon, month) + sss_amp * sss_field.at(lat, lon, month);
                let w = wind_climatology(lat, month)
                    + config.wind_anomaly * wind_field.at(lat, lon, month)
                    + if config.wind_gust > 0.0 { gust.sample(&mut mrng) } else { 0.0 };
                let state = SeaState {
                    sss: sss.clamp(SSS_RANGE.0, SSS_RANGE.1),
                    sst: sst.clamp(-1.8, SST_RANGE.1),
                    wind: w.clamp(WIND_RANGE.0, 25.0),
                    lat: Some(lat),
                    lon: Some(lon),
                };
                cells.push(state);
            }
        }
        fields.push(OceanField {
            month,
            resolution: config.resolution,
            cells,
        });
    }
    Ok(fields)
}

/// All cells of all months, in month-major order.
pub fn flatten(fields: &[OceanField]) -> Vec<SeaState> {
    fields.iter().flat_map(|f| f.cells.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_checks() {
        let mut c = WorldConfig::default();
        c.months = 0;
        assert!(c.validate().is_err());
        let mut c = WorldConfig::default();
        c.resolution = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn coarse_world_is_deterministic_and_valid() {
        let c = WorldConfig {
            resolution: 5.0,
            months: 2,
            ..WorldConfig::default()
        };
        let a = generate_world(&c, 1).unwrap();
        let b = generate_world(&c, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a[1].month, 7);
        for s in flatten(&a) {
            s.validate().unwrap();
            assert!(s.lat.unwrap().abs() < 65.0);
        }
        assert_ne!(flatten(&a), flatten(&generate_world(&c, 2).unwrap()));
    }

    #[test]
    fn mask_has_known_points() {
        assert!(is_ocean(0.0, -150.0));
        assert!(is_ocean(-55.0, 0.0));
        assert!(!is_ocean(45.0, 90.0));
        assert!(!is_ocean(-25.0, 135.0));
    }
}
