//! Locally weighted kernel linear estimation of TBs on a fixed angle grid.
//!
//! Each interpolation angle gets its own weighted least-squares line fit.
//! When a target falls in a gap of the raw observations the bandwidth grows
//! until the window holds at least `min_points` observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PixelClassSpec, RawObservationSet};

/// Multiplicative step used when widening the bandwidth.
const EXPANSION_STEP: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    /// Gaussian with `sigma = bandwidth / 3`, truncated at the bandwidth.
    Gaussian,
}

impl Kernel {
    /// Weight at scaled distance `u = |x - t| / h`; zero outside `u < 1`.
    #[inline]
    pub fn weight(self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
            Kernel::Gaussian => (-4.5 * u * u).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub kernel: Kernel,
    /// Half-width of the kernel window (degrees).
    pub base_bandwidth: f64,
    pub min_points: usize,
    pub max_bandwidth: f64,
}

/// Default bandwidth in units of the mean raw angle spacing.
pub const DEFAULT_BANDWIDTH_FACTOR: f64 = 3.0;

impl SmootherConfig {
    /// Bandwidth scaled to the class's raw angle spacing.
    pub fn for_class(class: &PixelClassSpec, density: usize, bandwidth_factor: f64) -> Self {
        let spacing = class.raw_spacing(density.max(1));
        let base = bandwidth_factor * spacing;
        SmootherConfig {
            kernel: Kernel::Epanechnikov,
            base_bandwidth: base,
            min_points: 3,
            max_bandwidth: (4.0 * base).max(class.span.1 - class.span.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_bandwidth > 0.0 && self.base_bandwidth <= self.max_bandwidth) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < base_bandwidth ({}) <= max_bandwidth ({})",
                self.base_bandwidth, self.max_bandwidth
            )));
        }
        if self.min_points < 3 {
            return Err(Error::InvalidConfig("min_points must be >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EstimateFlags {
    /// Bandwidth was widened beyond the base value.
    pub expanded: bool,
    /// Even the maximum bandwidth held fewer than `min_points` observations.
    pub degraded: bool,
    /// Line fit was singular; a weighted mean was returned.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub value: f64,
    pub expanded: bool,
    pub degraded: bool,
}

fn count_within(angles: &[f64], target: f64, h: f64) -> usize {
    angles.iter().filter(|a| (*a - target).abs() < h).count()
}

pub fn adaptive_bandwidth(angles: &[f64], target: f64, cfg: &SmootherConfig) -> Result<Bandwidth> {
    if angles.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    let mut h = cfg.base_bandwidth;
    let mut expanded = false;
    while count_within(angles, target, h) < cfg.min_points {
        if h >= cfg.max_bandwidth {
            return Ok(Bandwidth {
                value: cfg.max_bandwidth,
                expanded,
                degraded: true,
            });
        }
        h = (h * EXPANSION_STEP).min(cfg.max_bandwidth);
        expanded = true;
    }
    Ok(Bandwidth {
        value: h,
        expanded,
        degraded: false,
    })
}

struct Moments {
    s0: f64,
    s1: f64,
    s2: f64,
    t0: f64,
    t1: f64,
}

fn moments(obs: &RawObservationSet, target: f64, h: f64, kernel: Kernel) -> Moments {
    let mut m = Moments {
        s0: 0.0,
        s1: 0.0,
        s2: 0.0,
        t0: 0.0,
        t1: 0.0,
    };
    for (&a, &tb) in obs.angles.iter().zip(&obs.tbs) {
        let d = a - target;
        let w = kernel.weight(d.abs() / h);
        if w > 0.0 {
            m.s0 += w;
            m.s1 += w * d;
            m.s2 += w * d * d;
            m.t0 += w * tb;
            m.t1 += w * d * tb;
        }
    }
    m
}

/// Local linear estimate of the TB at `target`.
pub fn loclin_estimate(
    obs: &RawObservationSet,
    target: f64,
    cfg: &SmootherConfig,
) -> Result<(f64, EstimateFlags)> {
    let bw = adaptive_bandwidth(&obs.angles, target, cfg)?;
    let mut flags = EstimateFlags {
        expanded: bw.expanded,
        degraded: bw.degraded,
        fallback: false,
    };
    let m = moments(obs, target, bw.value, cfg.kernel);
    if m.s0 <= 0.0 {
        return Err(Error::InsufficientData(format!(
            "no observations within {} deg of {target}",
            bw.value
        )));
    }
    let det = m.s0 * m.s2 - m.s1 * m.s1;
    if det <= 1e-12 * m.s0 * m.s2.max(f64::MIN_POSITIVE) || m.s2 <= 0.0 {
        flags.fallback = true;
        return Ok((m.t0 / m.s0, flags));
    }
    Ok(((m.s2 * m.t0 - m.s1 * m.t1) / det, flags))
}

/// Kernel-weighted local mean at `target` (single-angle classes).
pub fn local_mean_estimate(
    obs: &RawObservationSet,
    target: f64,
    cfg: &SmootherConfig,
) -> Result<(f64, EstimateFlags)> {
    let bw = adaptive_bandwidth(&obs.angles, target, cfg)?;
    let m = moments(obs, target, bw.value, cfg.kernel);
    if m.s0 <= 0.0 {
        return Err(Error::InsufficientData(format!(
            "no observations within {} deg of {target}",
            bw.value
        )));
    }
    Ok((
        m.t0 / m.s0,
        EstimateFlags {
            expanded: bw.expanded,
            degraded: bw.degraded,
            fallback: false,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPixel {
    pub tbs: Vec<f64>,
    pub flags: Vec<EstimateFlags>,
}

/// Interpolate one pixel's raw observations onto its class grid.
pub fn smooth_pixel(
    obs: &RawObservationSet,
    class: &PixelClassSpec,
    cfg: &SmootherConfig,
) -> Result<SmoothedPixel> {
    cfg.validate()?;
    obs.check_for(class)?;
    let single = class.n_angles == 1;
    let (tbs, flags) = class
        .angle_grid
        .iter()
        .map(|&t| {
            if single {
                local_mean_estimate(obs, t, cfg)
            } else {
                loclin_estimate(obs, t, cfg)
            }
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(SmoothedPixel { tbs, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SmootherConfig {
        SmootherConfig {
            kernel: Kernel::Epanechnikov,
            base_bandwidth: 2.0,
            min_points: 3,
            max_bandwidth: 20.0,
        }
    }

    fn line_obs(n: usize, lo: f64, hi: f64) -> RawObservationSet {
        let angles: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.37) / n as f64).collect();
        let tbs = angles.iter().map(|a| 2.0 * a + 100.0).collect();
        RawObservationSet::new(angles, tbs).unwrap()
    }

    #[test]
    fn dense_data_keeps_base_bandwidth() {
        let obs = line_obs(60, 0.0, 60.0);
        let bw = adaptive_bandwidth(&obs.angles, 30.0, &cfg()).unwrap();
        assert_eq!(bw.value, 2.0);
        assert!(!bw.expanded && !bw.degraded);
    }

    #[test]
    fn gap_forces_expansion() {
        let obs = line_obs(60, 0.0, 60.0);
        let drop: Vec<usize> = (0..60).filter(|i| (obs.angles[*i] - 30.0).abs() < 4.0).collect();
        let gappy = obs.without(&drop);
        let bw = adaptive_bandwidth(&gappy.angles, 30.0, &cfg()).unwrap();
        assert!(bw.value > 2.0 && bw.expanded && !bw.degraded);
    }

    #[test]
    fn too_few_points_hit_the_cap() {
        let c = cfg();
        let bw = adaptive_bandwidth(&[0.0, 50.0, 60.0], 30.0, &c).unwrap();
        assert_eq!(bw.value, c.max_bandwidth);
        assert!(bw.degraded);
        assert!(adaptive_bandwidth(&[], 30.0, &c).is_err());
    }

    #[test]
    fn reproduces_affine_exactly() {
        let obs = line_obs(69, 0.0, 60.0);
        for k in 0..=60 {
            let t = k as f64;
            let (est, _) = loclin_estimate(&obs, t, &cfg()).unwrap();
            assert!((est - (2.0 * t + 100.0)).abs() < 1e-9, "t={t} est={est}");
        }
    }

    #[test]
    fn constant_in_constant_out() {
        let mut obs = line_obs(30, 10.0, 40.0);
        obs.tbs.iter_mut().for_each(|t| *t = 210.5);
        for kernel in [Kernel::Epanechnikov, Kernel::Gaussian] {
            let c = SmootherConfig { kernel, ..cfg() };
            let (est, _) = loclin_estimate(&obs, 25.0, &c).unwrap();
            assert!((est - 210.5).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_angles_fall_back_to_mean() {
        let obs = RawObservationSet::new(vec![30.0; 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (est, flags) = loclin_estimate(&obs, 30.0, &cfg()).unwrap();
        assert!(flags.fallback);
        assert!((est - 2.5).abs() < 1e-12);
    }

    #[test]
    fn single_angle_class_gives_one_value() {
        let class = PixelClassSpec::default_for(9).unwrap();
        let obs = RawObservationSet::new(vec![41.0, 45.5, 49.0], vec![200.0, 201.0, 202.0]).unwrap();
        let c = SmootherConfig::for_class(&class, 3, DEFAULT_BANDWIDTH_FACTOR);
        let out = smooth_pixel(&obs, &class, &c).unwrap();
        assert_eq!(out.tbs.len(), 1);
        assert!(out.tbs[0] > 200.0 && out.tbs[0] < 202.0);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.base_bandwidth = 30.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.min_points = 2;
        assert!(c.validate().is_err());
    }
}
