//! Swath partition into pixel classes and synthetic raw observation sets.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{first_stokes_profile, RadiometerSpec, SeaState};
use crate::seed;

pub const SWATH_HALF_WIDTH_KM: f64 = 550.0;
pub const N_CLASSES: u8 = 10;

/// (class_id, n_angles, lo_km, hi_km)
const CLASS_LAYOUT: [(u8, usize, f64, f64); 10] = [
    (1, 23, 0.0, 100.0),
    (2, 21, 100.0, 150.0),
    (3, 18, 150.0, 200.0),
    (4, 16, 200.0, 250.0),
    (5, 13, 250.0, 300.0),
    (6, 10, 300.0, 330.0),
    (7, 5, 330.0, 400.0),
    (8, 3, 400.0, 470.0),
    (9, 1, 470.0, 540.0),
    (10, 1, 540.0, 550.0),
];

/// Default incidence span observed by each class (degrees). The span narrows
/// and moves to higher angles toward the swath edge.
const DEFAULT_SPANS: [(f64, f64); 10] = [
    (0.0, 52.0),
    (4.0, 52.0),
    (8.0, 52.0),
    (12.0, 52.0),
    (16.0, 52.0),
    (20.0, 52.0),
    (28.0, 52.0),
    (34.0, 52.0),
    (38.0, 50.0),
    (40.0, 48.0),
];

const DEFAULT_RAW_SIGMA: [f64; 10] = [2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.5, 2.2, 2.0];

pub const DEFAULT_DENSITY: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelClassSpec {
    pub class_id: u8,
    /// Half-open across-track interval `[lo, hi)` in km.
    pub across_track: (f64, f64),
    pub n_angles: usize,
    /// Incidence span covered by raw observations (degrees).
    pub span: (f64, f64),
    /// Interpolation angles, ascending (degrees).
    pub angle_grid: Vec<f64>,
    /// Raw radiometric noise std (K).
    pub raw_sigma: f64,
}

impl PixelClassSpec {
    pub fn default_for(class_id: u8) -> Result<Self> {
        let i = class_index(class_id)?;
        let (_, n_angles, lo, hi) = CLASS_LAYOUT[i];
        let span = DEFAULT_SPANS[i];
        Ok(PixelClassSpec {
            class_id,
            across_track: (lo, hi),
            n_angles,
            span,
            angle_grid: even_grid(span, n_angles),
            raw_sigma: DEFAULT_RAW_SIGMA[i],
        })
    }

    /// Network input width: the interpolated TBs plus SST and wind.
    pub fn n_inputs(&self) -> usize {
        self.n_angles + 2
    }

    /// Mean spacing of raw observations for a given density multiplier.
    pub fn raw_spacing(&self, density: usize) -> f64 {
        (self.span.1 - self.span.0) / (density * self.n_angles) as f64
    }

    pub fn validate(&self) -> Result<()> {
        class_index(self.class_id)?;
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("class {}: {msg}", self.class_id)));
        if self.angle_grid.len() != self.n_angles {
            return bad("angle grid length differs from n_angles");
        }
        if self.angle_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("angle grid not strictly ascending");
        }
        if self.angle_grid.iter().any(|a| !(0.0..=65.0).contains(a)) {
            return bad("angle outside [0, 65]");
        }
        if !(self.span.0 >= 0.0 && self.span.1 <= 65.0 && self.span.0 < self.span.1) {
            return bad("invalid span");
        }
        if !(self.raw_sigma >= 0.0) {
            return bad("negative raw_sigma");
        }
        Ok(())
    }
}

fn class_index(class_id: u8) -> Result<usize> {
    if (1..=N_CLASSES).contains(&class_id) {
        Ok(usize::from(class_id - 1))
    } else {
        Err(Error::UnknownClass(class_id))
    }
}

/// `n` cell-centred angles over `span`; a single angle sits mid-span.
fn even_grid(span: (f64, f64), n: usize) -> Vec<f64> {
    let step = (span.1 - span.0) / n as f64;
    (0..n).map(|i| span.0 + (i as f64 + 0.5) * step).collect()
}

pub fn default_angle_grid(class_id: u8) -> Result<Vec<f64>> {
    Ok(PixelClassSpec::default_for(class_id)?.angle_grid)
}

pub fn classify_pixel(across_track_km: f64) -> Result<u8> {
    if !(0.0..SWATH_HALF_WIDTH_KM).contains(&across_track_km) {
        return Err(Error::OutOfSwath(across_track_km));
    }
    CLASS_LAYOUT
        .iter()
        .find(|(_, _, lo, hi)| across_track_km >= *lo && across_track_km < *hi)
        .map(|c| c.0)
        .ok_or(Error::OutOfSwath(across_track_km))
}

/// The full ten-class table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTable {
    pub classes: Vec<PixelClassSpec>,
}

impl Default for ClassTable {
    fn default() -> Self {
        ClassTable {
            classes: (1..=N_CLASSES)
                .map(|c| PixelClassSpec::default_for(c).expect("static class table"))
                .collect(),
        }
    }
}

impl ClassTable {
    pub fn get(&self, class_id: u8) -> Result<&PixelClassSpec> {
        self.classes
            .iter()
            .find(|c| c.class_id == class_id)
            .ok_or(Error::UnknownClass(class_id))
    }

    /// `class_id,lo_km,hi_km,n_angles,raw_sigma,angles` with angles `;`-joined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class_id,lo_km,hi_km,n_angles,raw_sigma,angles\n");
        for c in &self.classes {
            let angles: Vec<String> = c.angle_grid.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.class_id,
                c.across_track.0,
                c.across_track.1,
                c.n_angles,
                c.raw_sigma,
                angles.join(";")
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawObservationSet {
    pub angles: Vec<f64>,
    pub tbs: Vec<f64>,
}

impl RawObservationSet {
    pub fn new(angles: Vec<f64>, tbs: Vec<f64>) -> Result<Self> {
        if angles.len() != tbs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} angles vs {} TBs",
                angles.len(),
                tbs.len()
            )));
        }
        Ok(RawObservationSet { angles, tbs })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Minimum observation count for the class's smoother to be well posed.
    pub fn check_for(&self, class: &PixelClassSpec) -> Result<()> {
        let need = if class.n_angles > 1 { 2 * class.n_angles } else { 3 };
        if self.len() < need {
            return Err(Error::InsufficientData(format!(
                "class {} needs {need} raw observations, got {}",
                class.class_id,
                self.len()
            )));
        }
        Ok(())
    }

    /// Drop observations at the given indices (used for gap experiments).
    pub fn without(&self, drop: &[usize]) -> RawObservationSet {
        let (angles, tbs) = self
            .angles
            .iter()
            .zip(&self.tbs)
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, (a, t))| (*a, *t))
            .unzip();
        RawObservationSet { angles, tbs }
    }
}

/// Draw `density * n_angles` jittered-uniform angles over the class span,
/// evaluate the forward model there and add white Gaussian noise of
/// `raw_sigma`. Angles come back in a shuffled order.
pub fn simulate_raw_observations(
    class: &PixelClassSpec,
    state: &SeaState,
    spec: &RadiometerSpec,
    density: usize,
    rng_seed: u64,
) -> Result<RawObservationSet> {
    class.validate()?;
    state.validate()?;
    if density == 0 {
        return Err(Error::InvalidConfig("observation density must be >= 1".into()));
    }
    let m = density * class.n_angles.max(1);
    let m = if class.n_angles == 1 { m.max(3) } else { m };
    let mut rng = seed::rng(rng_seed);
    let width = (class.span.1 - class.span.0) / m as f64;
    let mut angles: Vec<f64> = (0..m)
        .map(|i| class.span.0 + (i as f64 + rng.random::<f64>()) * width)
        .collect();
    // Fisher-Yates so callers cannot rely on ordering
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        angles.swap(i, j);
    }
    let mut tbs = first_stokes_profile(state, &angles, spec)?;
    if class.raw_sigma > 0.0 {
        let normal = Normal::new(0.0, class.raw_sigma).expect("sigma > 0");
        for tb in &mut tbs {
            *tb += normal.sample(&mut rng);
        }
    }
    RawObservationSet::new(angles, tbs)
}
