//! Correlated residual noise, auxiliary-parameter noise, residual statistics
//! and the regression-dilution diagnostic.

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::forward::{SST_RANGE, WIND_RANGE};
use crate::seed;

/// Std of the additive error on the auxiliary SST input (°C).
pub const SST_NOISE_STD: f64 = 1.0;
/// Std of the additive error on the auxiliary wind input (m/s).
pub const WIND_NOISE_STD: f64 = 2.0;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("matrix rows must be square".into()));
        }
        Ok(Matrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `self * self^T`
    pub fn gram(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix { n, data: vec![0.0; n * n] };
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| self.get(i, k) * self.get(j, k)).sum();
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = m`.
pub fn cholesky_lower(m: &Matrix) -> Result<Matrix> {
    let n = m.n;
    let mut l = Matrix { n, data: vec![0.0; n * n] };
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Per-angle standard deviations plus a correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedNoiseSpec {
    sigmas: Vec<f64>,
    corr: Matrix,
    factor: Matrix,
}

impl CorrelatedNoiseSpec {
    pub fn new(sigmas: Vec<f64>, corr: Matrix) -> Result<Self> {
        if sigmas.len() != corr.n {
            return Err(Error::ShapeMismatch(format!(
                "{} sigmas vs {}x{} correlation",
                sigmas.len(),
                corr.n,
                corr.n
            )));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!("noise sigma {s} must be > 0")));
        }
        for i in 0..corr.n {
            if corr.get(i, i) != 1.0 {
                return Err(Error::InvalidConfig(format!("correlation diagonal {i} is not 1")));
            }
            for j in 0..i {
                let c = corr.get(i, j);
                if c != corr.get(j, i) || !(-1.0..=1.0).contains(&c) {
                    return Err(Error::InvalidConfig(format!(
                        "correlation ({i},{j}) not symmetric or outside [-1, 1]"
                    )));
                }
            }
        }
        let factor = cholesky_lower(&corr)?;
        Ok(CorrelatedNoiseSpec { sigmas, corr, factor })
    }

    pub fn independent(sigmas: Vec<f64>) -> Result<Self> {
        let n = sigmas.len();
        Self::new(sigmas, Matrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn corr(&self) -> &Matrix {
        &self.corr
    }

    /// Fill `out` with one draw using the supplied generator.
    pub fn draw_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(out.len(), n);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for i in 0..n {
            let row = &self.factor.data[i * n..i * n + i + 1];
            let s: f64 = row.iter().zip(&z).map(|(l, z)| l * z).sum();
            out[i] = self.sigmas[i] * s;
        }
    }

    /// One sigmas row, then the correlation rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let row = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}", row(&self.sigmas));
        for r in self.corr.rows() {
            let _ = writeln!(out, "{}", row(&r));
        }
        out
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    path: origin.to_string(),
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: 0,
                msg: "empty noise spec".into(),
            });
        }
        let sigmas = rows.remove(0);
        Self::new(sigmas, Matrix::from_rows(&rows)?)
    }
}

pub fn draw_correlated(spec: &CorrelatedNoiseSpec, rng_seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(rng_seed);
    let mut out = vec![0.0; spec.dim()];
    spec.draw_into(&mut rng, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxDraw {
    pub sst: f64,
    pub wind: f64,
    pub sst_clamped: bool,
    pub wind_clamped: bool,
}

pub fn perturb_aux_with<R: rand::Rng + ?Sized>(sst: f64, wind: f64, rng: &mut R) -> AuxDraw {
    let ns = Normal::new(0.0, SST_NOISE_STD).expect("constant std");
    let nw = Normal::new(0.0, WIND_NOISE_STD).expect("constant std");
    let raw_sst = sst + ns.sample(rng);
    let raw_wind = wind + nw.sample(rng);
    let s = raw_sst.clamp(SST_RANGE.0, SST_RANGE.1);
    let w = raw_wind.clamp(WIND_RANGE.0, WIND_RANGE.1);
    AuxDraw {
        sst: s,
        wind: w,
        sst_clamped: s != raw_sst,
        wind_clamped: w != raw_wind,
    }
}

/// Additive Gaussian error on SST (1 °C) and wind (2 m/s), clamped to the
/// valid sea-state bounds.
pub fn perturb_aux(sst: f64, wind: f64, rng_seed: u64) -> AuxDraw {
    perturb_aux_with(sst, wind, &mut seed::rng(rng_seed))
}

/// Statistics of `interpolated - truth` per interpolation angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub bias: Vec<f64>,
    pub std: Vec<f64>,
    pub corr: Matrix,
    pub n: usize,
}

impl ResidualStats {
    /// Noise spec with the measured stds and correlations.
    pub fn to_noise_spec(&self) -> Result<CorrelatedNoiseSpec> {
        CorrelatedNoiseSpec::new(self.std.clone(), self.corr.clone())
    }
}

pub fn estimate_residual_stats(interpolated: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<ResidualStats> {
    if interpolated.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} interpolated rows vs {} truth rows",
            interpolated.len(),
            truth.len()
        )));
    }
    let n = interpolated.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} samples; need at least 2")));
    }
    let dim = interpolated[0].len();
    let mut residuals = Vec::with_capacity(n);
    for (a, b) in interpolated.iter().zip(truth) {
        if a.len() != dim || b.len() != dim {
            return Err(Error::ShapeMismatch("ragged residual rows".into()));
        }
        residuals.push(a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>());
    }
    let mut mean = vec![0.0; dim];
    for r in &residuals {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; dim * dim];
    for r in &residuals {
        for i in 0..dim {
            let di = r[i] - mean[i];
            for j in 0..=i {
                cov[i * dim + j] += di * (r[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    let std: Vec<f64> = (0..dim).map(|i| (cov[i * dim + i] / denom).sqrt()).collect();
    let mut corr = Matrix::identity(dim);
    for i in 0..dim {
        for j in 0..i {
            let c = if std[i] > 0.0 && std[j] > 0.0 {
                (cov[i * dim + j] / denom) / (std[i] * std[j])
            } else {
                0.0
            };
            let c = c.clamp(-1.0, 1.0);
            corr.set(i, j, c);
            corr.set(j, i, c);
        }
    }
    Ok(ResidualStats {
        bias: mean,
        std,
        corr,
        n,
    })
}

/// Attenuated regression slope `a / (1 + var_noise / var_signal)`.
pub fn diluted_slope(a: f64, var_noise: f64, var_signal: f64) -> Result<f64> {
    if !(var_signal > 0.0) {
        return Err(Error::Domain {
            field: "var_signal",
            value: var_signal,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if !(var_noise >= 0.0) {
        return Err(Error::Domain {
            field: "var_noise",
            value: var_noise,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(a / (1.0 + var_noise / var_signal))
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// The class-8 residual correlation matrix.
pub fn class8_correlation() -> Matrix {
    Matrix::from_rows(&[
        vec![1.0, 0.57, -0.01],
        vec![0.57, 1.0, 0.65],
        vec![-0.01, 0.65, 1.0],
    ])
    .expect("static 3x3")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_factor() {
        let l = cholesky_lower(&Matrix::identity(4)).unwrap();
        assert_eq!(l, Matrix::identity(4));
    }

    #[test]
    fn two_by_two_by_hand() {
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = cholesky_lower(&m).unwrap();
        assert_relative_eq!(l.get(0, 0), 1.0);
        assert_eq!(l.get(0, 1), 0.0);
        assert_relative_eq!(l.get(1, 0), 0.5);
        assert_relative_eq!(l.get(1, 1), 0.75_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn class8_factorizes() {
        let c = class8_correlation();
        let l = cholesky_lower(&c).unwrap();
        assert!(l.gram().max_abs_diff(&c) < 1e-10);
    }

    #[test]
    fn failing_pivot_is_reported() {
        let m = Matrix::from_rows(&[
            vec![1.0, 0.9, 0.9],
            vec![0.9, 1.0, -0.9],
            vec![0.9, -0.9, 1.0],
        ])
        .unwrap();
        assert!(matches!(cholesky_lower(&m), Err(Error::NotPositiveDefinite { pivot: 2 })));
        let m = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky_lower(&m), Err(Error::NotPositiveDefinite { pivot: 0 })));
    }

    #[test]
    fn spec_validation() {
        let c = class8_correlation();
        assert!(CorrelatedNoiseSpec::new(vec![1.0, 1.0], c.clone()).is_err());
        assert!(CorrelatedNoiseSpec::new(vec![1.0, 0.0, 1.0], c.clone()).is_err());
        let mut asym = c.clone();
        asym.set(0, 1, 0.5);
        assert!(CorrelatedNoiseSpec::new(vec![1.0; 3], asym).is_err());
        let spec = CorrelatedNoiseSpec::new(vec![1.2, 1.5, 1.9], c).unwrap();
        let back = CorrelatedNoiseSpec::from_csv(&spec.to_csv(), "mem").unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn draws_are_deterministic() {
        let spec = CorrelatedNoiseSpec::new(vec![1.2, 1.5, 1.9], class8_correlation()).unwrap();
        let a = draw_correlated(&spec, 42);
        let b = draw_correlated(&spec, 42);
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, draw_correlated(&spec, 43));
    }

    #[test]
    fn aux_clamps_at_bounds() {
        for s in 0..200 {
            let d = perturb_aux(35.0, 0.0, s);
            assert!(d.sst <= 35.0 && d.wind >= 0.0);
        }
        assert_eq!(perturb_aux(20.0, 7.0, 9), perturb_aux(20.0, 7.0, 9));
    }

    #[test]
    fn perfect_interpolation_has_zero_residual() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let st = estimate_residual_stats(&rows, &rows).unwrap();
        assert_eq!(st.bias, vec![0.0, 0.0]);
        assert_eq!(st.std, vec![0.0, 0.0]);
        assert_eq!(st.corr, Matrix::identity(2));
        assert!(estimate_residual_stats(&rows[..1], &rows[..1]).is_err());
        assert!(estimate_residual_stats(&rows, &rows[..5]).is_err());
    }

    #[test]
    fn dilution_formula() {
        assert_eq!(diluted_slope(1.7, 0.0, 3.0).unwrap(), 1.7);
        assert_relative_eq!(diluted_slope(2.0, 5.0, 5.0).unwrap(), 1.0);
        assert_relative_eq!(diluted_slope(1.0, 3.0, 1.0).unwrap(), 0.25);
        assert!(diluted_slope(1.0, 1.0, 0.0).is_err());
        assert!(diluted_slope(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn ols_on_exact_line() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + 3.0).collect();
        assert_relative_eq!(ols_slope(&x, &y).unwrap(), 0.5, epsilon = 1e-12);
        assert!(ols_slope(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
