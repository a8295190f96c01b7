//! Flat-sea L-band emission model.
//!
//! Seawater permittivity follows Klein & Swift (1977); emissivity is one minus
//! the Fresnel power reflectivity of a specular interface, and the
//! brightness temperature is the first Stokes parameter `TB_H + TB_V` with a
//! linear wind adjustment.
//!
//! Sign convention: `eps = eps' - j eps''`, i.e. loss is carried by a
//! *negative* imaginary part. Only `|r|^2` is used downstream.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

pub const KELVIN_OFFSET: f64 = 273.15;
/// Vacuum permittivity (F/m) as used by Klein & Swift.
const EPS_VACUUM: f64 = 8.854e-12;
/// High-frequency permittivity limit of seawater.
const EPS_INF: f64 = 4.9;
/// Highest incidence angle the TB model accepts (degrees).
pub const MAX_INCIDENCE: f64 = 65.0;

pub const SSS_RANGE: (f64, f64) = (0.0, 45.0);
pub const SST_RANGE: (f64, f64) = (-2.0, 35.0);
pub const WIND_RANGE: (f64, f64) = (0.0, 30.0);

/// One geophysical situation: the unit of truth data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaState {
    /// Salinity (psu).
    pub sss: f64,
    /// Temperature (°C).
    pub sst: f64,
    /// Wind speed (m/s).
    pub wind: f64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

impl SeaState {
    pub fn new(sss: f64, sst: f64, wind: f64) -> Result<Self> {
        let s = SeaState {
            sss,
            sst,
            wind,
            lat: None,
            lon: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_geo(mut self, lat: f64, lon: f64) -> Result<Self> {
        check_range("lat", lat, -90.0, 90.0)?;
        if !(lon.is_finite() && (-180.0..180.0).contains(&lon)) {
            return Err(Error::Domain {
                field: "lon",
                value: lon,
                lo: -180.0,
                hi: 180.0,
            });
        }
        self.lat = Some(lat);
        self.lon = Some(lon);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("sss", self.sss, SSS_RANGE.0, SSS_RANGE.1)?;
        check_range("sst", self.sst, SST_RANGE.0, SST_RANGE.1)?;
        check_range("wind", self.wind, WIND_RANGE.0, WIND_RANGE.1)
    }
}

/// Complex relative permittivity, `real_part - j * |imag_part|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Permittivity {
    pub real_part: f64,
    pub imag_part: f64,
}

impl Permittivity {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.real_part, self.imag_part)
    }

    pub fn loss(self) -> f64 {
        -self.imag_part
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiometerSpec {
    /// Hz
    pub frequency: f64,
    /// K per (m/s), added to the first Stokes parameter.
    pub wind_coeff: f64,
}

impl Default for RadiometerSpec {
    fn default() -> Self {
        RadiometerSpec {
            frequency: 1.413e9,
            wind_coeff: 0.4,
        }
    }
}

impl RadiometerSpec {
    pub fn validate(&self) -> Result<()> {
        check_range("frequency", self.frequency, 1e9, 2e9)?;
        check_range("wind_coeff", self.wind_coeff, 0.0, f64::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
}

/// Static permittivity `eps_s(T, S)`.
fn static_permittivity(t: f64, s: f64) -> f64 {
    let eps_t = 87.134 - 1.949e-1 * t - 1.276e-2 * t * t + 2.491e-4 * t * t * t;
    let a = 1.0 + 1.613e-5 * t * s - 3.656e-3 * s + 3.210e-5 * s * s - 4.232e-7 * s * s * s;
    eps_t * a
}

/// Debye relaxation time `tau(T, S)` in seconds.
fn relaxation_time(t: f64, s: f64) -> f64 {
    let tau_t = 1.768e-11 - 6.086e-13 * t + 1.104e-14 * t * t - 8.111e-17 * t * t * t;
    let b = 1.0 + 2.282e-5 * t * s - 7.638e-4 * s - 7.760e-6 * s * s + 1.105e-8 * s * s * s;
    tau_t * b
}

/// Ionic conductivity of seawater (S/m). Exactly zero at zero salinity.
pub fn ionic_conductivity(sst: f64, sss: f64) -> f64 {
    let s = sss;
    let sigma25 = s * (0.182521 - 1.46192e-3 * s + 2.09324e-5 * s * s - 1.28205e-7 * s * s * s);
    let delta = 25.0 - sst;
    let beta = 2.033e-2 + 1.266e-4 * delta + 2.464e-6 * delta * delta
        - s * (1.849e-5 - 2.551e-7 * delta + 2.551e-8 * delta * delta);
    sigma25 * (-delta * beta).exp()
}

/// The Debye-only part of the permittivity (no conductivity loss).
pub fn debye_term(sst: f64, sss: f64, frequency: f64) -> Complex64 {
    let omega = 2.0 * std::f64::consts::PI * frequency;
    let eps_s = static_permittivity(sst, sss);
    let tau = relaxation_time(sst, sss);
    EPS_INF + (eps_s - EPS_INF) / Complex64::new(1.0, omega * tau)
}

pub fn permittivity_klein_swift(sst: f64, sss: f64, frequency: f64) -> Result<Permittivity> {
    check_range("sst", sst, SST_RANGE.0, SST_RANGE.1)?;
    check_range("sss", sss, SSS_RANGE.0, SSS_RANGE.1)?;
    check_range("frequency", frequency, 1e9, 2e9)?;
    let omega = 2.0 * std::f64::consts::PI * frequency;
    let eps = debye_term(sst, sss, frequency)
        - Complex64::new(0.0, ionic_conductivity(sst, sss) / (omega * EPS_VACUUM));
    Ok(Permittivity {
        real_part: eps.re,
        imag_part: eps.im,
    })
}

/// Fresnel reflection coefficients `(r_H, r_V)` of a flat interface.
fn reflection_coefficients(eps: Complex64, incidence_deg: f64) -> (Complex64, Complex64) {
    let theta = incidence_deg.to_radians();
    let cos_t = theta.cos();
    let sin2 = theta.sin().powi(2);
    let root = (eps - sin2).sqrt();
    let r_h = (cos_t - root) / (cos_t + root);
    let r_v = (eps * cos_t - root) / (eps * cos_t + root);
    (r_h, r_v)
}

fn check_incidence(incidence: f64, max: f64) -> Result<()> {
    if incidence.is_finite() && incidence >= 0.0 && incidence < max {
        Ok(())
    } else {
        Err(Error::Domain {
            field: "incidence",
            value: incidence,
            lo: 0.0,
            hi: max,
        })
    }
}

pub fn fresnel_emissivity(eps: Permittivity, incidence: f64, pol: Polarization) -> Result<f64> {
    check_incidence(incidence, 90.0)?;
    let (r_h, r_v) = reflection_coefficients(eps.to_complex(), incidence);
    let r = match pol {
        Polarization::H => r_h,
        Polarization::V => r_v,
    };
    Ok(1.0 - r.norm_sqr())
}

/// `(e_H, e_V)` in one pass.
pub fn emissivity_pair(eps: Permittivity, incidence: f64) -> Result<(f64, f64)> {
    check_incidence(incidence, 90.0)?;
    let (r_h, r_v) = reflection_coefficients(eps.to_complex(), incidence);
    Ok((1.0 - r_h.norm_sqr(), 1.0 - r_v.norm_sqr()))
}

fn tb_unchecked(sss: f64, sst: f64, wind: f64, incidence: f64, spec: &RadiometerSpec) -> Result<f64> {
    let eps = permittivity_klein_swift(sst, sss, spec.frequency)?;
    let (e_h, e_v) = emissivity_pair(eps, incidence)?;
    Ok((e_h + e_v) * (sst + KELVIN_OFFSET) + spec.wind_coeff * wind)
}

/// First Stokes brightness temperature `TB_H + TB_V` (K).
pub fn first_stokes_tb(state: &SeaState, incidence: f64, spec: &RadiometerSpec) -> Result<f64> {
    state.validate()?;
    check_range("incidence", incidence, 0.0, MAX_INCIDENCE)?;
    tb_unchecked(state.sss, state.sst, state.wind, incidence, spec)
}

/// TBs of one state at several angles.
pub fn first_stokes_profile(
    state: &SeaState,
    angles: &[f64],
    spec: &RadiometerSpec,
) -> Result<Vec<f64>> {
    state.validate()?;
    let eps = permittivity_klein_swift(state.sst, state.sss, spec.frequency)?;
    let t_phys = state.sst + KELVIN_OFFSET;
    angles
        .iter()
        .map(|&a| {
            check_range("incidence", a, 0.0, MAX_INCIDENCE)?;
            let (e_h, e_v) = emissivity_pair(eps, a)?;
            Ok((e_h + e_v) * t_phys + spec.wind_coeff * state.wind)
        })
        .collect()
}

pub const SENSITIVITY_STEP: f64 = 0.01;

/// `dTB/dSSS` (K/psu) by central difference with the given salinity step.
pub fn sss_sensitivity_step(
    state: &SeaState,
    incidence: f64,
    spec: &RadiometerSpec,
    step: f64,
) -> Result<f64> {
    state.validate()?;
    check_range("incidence", incidence, 0.0, MAX_INCIDENCE)?;
    // one-sided room at the salinity bounds is not needed inside the model range
    let hi = tb_unchecked(state.sss + step, state.sst, state.wind, incidence, spec)?;
    let lo = tb_unchecked(state.sss - step, state.sst, state.wind, incidence, spec)?;
    Ok((hi - lo) / (2.0 * step))
}

pub fn sss_sensitivity(state: &SeaState, incidence: f64, spec: &RadiometerSpec) -> Result<f64> {
    sss_sensitivity_step(state, incidence, spec, SENSITIVITY_STEP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(sss: f64, sst: f64, wind: f64) -> SeaState {
        SeaState::new(sss, sst, wind).unwrap()
    }

    #[test]
    fn zero_salinity_has_no_conductivity_loss() {
        assert_eq!(ionic_conductivity(20.0, 0.0), 0.0);
        let eps = permittivity_klein_swift(20.0, 0.0, 1.413e9).unwrap();
        let debye = debye_term(20.0, 0.0, 1.413e9);
        assert_eq!(eps.real_part, debye.re);
        assert_eq!(eps.imag_part, debye.im);
        assert!(eps.imag_part < 0.0);
    }

    #[test]
    fn loss_grows_with_salinity() {
        let a = permittivity_klein_swift(20.0, 30.0, 1.413e9).unwrap();
        let b = permittivity_klein_swift(20.0, 36.0, 1.413e9).unwrap();
        assert!(b.imag_part.abs() > a.imag_part.abs());
        for s in 1..45 {
            let lo = permittivity_klein_swift(10.0, s as f64 - 1.0, 1.413e9).unwrap();
            let hi = permittivity_klein_swift(10.0, s as f64, 1.413e9).unwrap();
            assert!(hi.loss() > lo.loss(), "sss {s}");
        }
    }

    #[test]
    fn domain_errors_name_the_field() {
        match permittivity_klein_swift(40.0, 35.0, 1.413e9) {
            Err(Error::Domain { field, .. }) => assert_eq!(field, "sst"),
            other => panic!("{other:?}"),
        }
        match permittivity_klein_swift(20.0, 50.0, 1.413e9) {
            Err(Error::Domain { field, .. }) => assert_eq!(field, "sss"),
            other => panic!("{other:?}"),
        }
        assert!(permittivity_klein_swift(20.0, 35.0, 5e9).is_err());
        assert!(SeaState::new(35.0, 20.0, -1.0).is_err());
    }

    #[test]
    fn nadir_polarizations_coincide() {
        let eps = permittivity_klein_swift(20.0, 35.0, 1.413e9).unwrap();
        let h = fresnel_emissivity(eps, 0.0, Polarization::H).unwrap();
        let v = fresnel_emissivity(eps, 0.0, Polarization::V).unwrap();
        assert!((h - v).abs() < 1e-12);
    }

    #[test]
    fn vacuum_is_a_blackbody() {
        let eps = Permittivity {
            real_part: 1.0,
            imag_part: 0.0,
        };
        for inc in [0.0, 20.0, 45.0, 70.0, 89.0] {
            for pol in [Polarization::H, Polarization::V] {
                assert_relative_eq!(fresnel_emissivity(eps, inc, pol).unwrap(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vertical_exceeds_horizontal_off_nadir() {
        let eps = permittivity_klein_swift(20.0, 35.0, 1.413e9).unwrap();
        let (h, v) = emissivity_pair(eps, 40.0).unwrap();
        assert!(v > h);
        assert!(fresnel_emissivity(eps, 90.0, Polarization::H).is_err());
    }

    #[test]
    fn nadir_tb_without_wind() {
        let s = state(35.0, 20.0, 0.0);
        let spec = RadiometerSpec::default();
        let eps = permittivity_klein_swift(20.0, 35.0, spec.frequency).unwrap();
        let e = fresnel_emissivity(eps, 0.0, Polarization::H).unwrap();
        let tb = first_stokes_tb(&s, 0.0, &spec).unwrap();
        assert_relative_eq!(tb, 2.0 * e * (20.0 + KELVIN_OFFSET), max_relative = 1e-14);
        assert!(first_stokes_tb(&s, 66.0, &spec).is_err());
    }

    #[test]
    fn step_halving_is_stable() {
        let s = state(35.0, 15.0, 0.0);
        let spec = RadiometerSpec::default();
        let a = sss_sensitivity_step(&s, 0.0, &spec, 0.01).unwrap();
        let b = sss_sensitivity_step(&s, 0.0, &spec, 0.005).unwrap();
        assert!((a - b).abs() < 1e-4);
    }

    #[test]
    fn profile_matches_pointwise() {
        let s = state(34.0, 12.0, 6.0);
        let spec = RadiometerSpec::default();
        let angles = [0.0, 10.0, 33.3, 64.9];
        let p = first_stokes_profile(&s, &angles, &spec).unwrap();
        for (a, tb) in angles.iter().zip(&p) {
            assert_eq!(*tb, first_stokes_tb(&s, *a, &spec).unwrap());
        }
    }
}
