//! Retrieval over the noisy test set, 1° bias maps and global statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::database::TrainingRecord;
use crate::error::{Error, Result};
use crate::net::{forward_batch, NetworkParams};
use crate::noise::ols_slope;

pub const MAP_LAT_LIMIT: f64 = 65.0;
pub const BIAS_THRESHOLD: f64 = 0.2;
/// Southern edge of the band used by the banded statistics.
pub const BAND_SOUTH: f64 = -45.0;
/// Upper edges of the SST bins; the last bin is open.
pub const SST_BIN_EDGES: [f64; 5] = [5.0, 10.0, 15.0, 20.0, 25.0];
pub const SST_BIN_LABELS: [&str; 6] = ["lt5", "5to10", "10to15", "15to20", "20to25", "gt25"];

pub fn retrieve_field(params: &NetworkParams, records: &[TrainingRecord]) -> Result<Vec<f64>> {
    if let Some(r) = records.iter().find(|r| r.inputs.len() != params.n_inputs) {
        return Err(Error::ShapeMismatch(format!(
            "record with {} inputs for a {}-input class-{} network",
            r.inputs.len(),
            params.n_inputs,
            params.class_id
        )));
    }
    forward_batch(params, records)
}

/// Mean retrieval error per 1° box over [-65, 65] latitude.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasMap {
    pub n_lat: usize,
    pub n_lon: usize,
    pub sum: Vec<f64>,
    pub count: Vec<u32>,
}

impl BiasMap {
    pub fn new() -> Self {
        let n_lat = (2.0 * MAP_LAT_LIMIT) as usize;
        BiasMap {
            n_lat,
            n_lon: 360,
            sum: vec![0.0; n_lat * 360],
            count: vec![0; n_lat * 360],
        }
    }

    /// Cell index, or `None` outside the mapped band.
    pub fn cell(&self, lat: f64, lon: f64) -> Option<usize> {
        if !(-MAP_LAT_LIMIT..MAP_LAT_LIMIT).contains(&lat) || !lon.is_finite() {
            return None;
        }
        let i = ((lat + MAP_LAT_LIMIT).floor() as usize).min(self.n_lat - 1);
        let j = ((lon + 180.0).rem_euclid(360.0).floor() as usize).min(self.n_lon - 1);
        Some(i * self.n_lon + j)
    }

    pub fn add(&mut self, lat: f64, lon: f64, error: f64) {
        if let Some(k) = self.cell(lat, lon) {
            self.sum[k] += error;
            self.count[k] += 1;
        }
    }

    pub fn merge(&mut self, other: &BiasMap) {
        self.sum.iter_mut().zip(&other.sum).for_each(|(a, b)| *a += b);
        self.count.iter_mut().zip(&other.count).for_each(|(a, b)| *a += b);
    }

    pub fn mean(&self, k: usize) -> Option<f64> {
        (self.count[k] > 0).then(|| self.sum[k] / f64::from(self.count[k]))
    }

    /// South-west corner of cell `k`.
    pub fn corner(&self, k: usize) -> (f64, f64) {
        ((k / self.n_lon) as f64 - MAP_LAT_LIMIT, (k % self.n_lon) as f64 - 180.0)
    }

    pub fn populated(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.sum.len()).filter_map(|k| self.mean(k).map(|m| (k, m)))
    }

    /// Percent of populated boxes with mean error below `-threshold` and
    /// above `threshold`, restricted to boxes whose southern edge is at or
    /// north of `south`.
    pub fn percentages(&self, threshold: f64, south: f64) -> (f64, f64) {
        let (mut n, mut lo, mut hi) = (0usize, 0usize, 0usize);
        for (k, m) in self.populated() {
            if self.corner(k).0 < south {
                continue;
            }
            n += 1;
            lo += usize::from(m < -threshold);
            hi += usize::from(m > threshold);
        }
        if n == 0 {
            return (0.0, 0.0);
        }
        (100.0 * lo as f64 / n as f64, 100.0 * hi as f64 / n as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lat,lon,count,mean_error\n");
        for (k, m) in self.populated() {
            let (lat, lon) = self.corner(k);
            let _ = writeln!(out, "{},{},{},{}", lat + 0.5, lon + 0.5, self.count[k], m);
        }
        out
    }

    /// Binary PPM, blue (-1 psu) through white to red (+1 psu); land and
    /// empty boxes are grey. North is up.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.n_lon, self.n_lat).into_bytes();
        for i in (0..self.n_lat).rev() {
            for j in 0..self.n_lon {
                let px = match self.mean(i * self.n_lon + j) {
                    None => [128, 128, 128],
                    Some(m) => {
                        let t = m.clamp(-1.0, 1.0);
                        let fade = (255.0 * (1.0 - t.abs())).round() as u8;
                        if t >= 0.0 {
                            [255, fade, fade]
                        } else {
                            [fade, fade, 255]
                        }
                    }
                };
                out.extend_from_slice(&px);
            }
        }
        out
    }
}

impl Default for BiasMap {
    fn default() -> Self {
        Self::new()
    }
}

pub fn bias_map(retrieved: &[f64], reference: &[f64], lats: &[f64], lons: &[f64]) -> Result<BiasMap> {
    aligned(&[retrieved.len(), reference.len(), lats.len(), lons.len()])?;
    let mut map = BiasMap::new();
    for k in 0..retrieved.len() {
        map.add(lats[k], lons[k], retrieved[k] - reference[k]);
    }
    Ok(map)
}

fn aligned(lens: &[usize]) -> Result<()> {
    if lens.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::ShapeMismatch(format!("array lengths differ: {lens:?}")));
    }
    Ok(())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

pub fn sst_bin(sst: f64) -> usize {
    SST_BIN_EDGES.iter().take_while(|e| sst >= **e).count()
}

/// OLS slope of retrieved on reference per SST bin; `None` where a bin has
/// fewer than 2 records or no reference spread.
pub fn slope_by_sst(retrieved: &[f64], reference: &[f64], sst: &[f64]) -> Result<[Option<f64>; 6]> {
    aligned(&[retrieved.len(), reference.len(), sst.len()])?;
    let mut xs: [Vec<f64>; 6] = Default::default();
    let mut ys: [Vec<f64>; 6] = Default::default();
    for k in 0..retrieved.len() {
        let b = sst_bin(sst[k]);
        xs[b].push(reference[k]);
        ys[b].push(retrieved[k]);
    }
    let mut out = [None; 6];
    for b in 0..6 {
        if xs[b].len() >= 2 {
            out[b] = ols_slope(&xs[b], &ys[b]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalStats {
    pub n: usize,
    pub bias: f64,
    pub std: f64,
    pub slope: f64,
    pub slope_by_sst: [Option<f64>; 6],
    pub pct_below: f64,
    pub pct_above: f64,
    pub band_bias: f64,
    pub band_std: f64,
    pub band_pct_below: f64,
    pub band_pct_above: f64,
}

pub fn global_stats(
    retrieved: &[f64],
    reference: &[f64],
    sst: &[f64],
    lats: &[f64],
    map: &BiasMap,
) -> Result<GlobalStats> {
    aligned(&[retrieved.len(), reference.len(), sst.len(), lats.len()])?;
    if retrieved.len() < 2 {
        return Err(Error::InsufficientData("global statistics need >= 2 records".into()));
    }
    let err: Vec<f64> = retrieved.iter().zip(reference).map(|(r, t)| r - t).collect();
    let (bias, std) = mean_std(&err);
    let band: Vec<f64> = err.iter().zip(lats).filter(|(_, l)| **l >= BAND_SOUTH).map(|(e, _)| *e).collect();
    let (band_bias, band_std) = if band.len() >= 2 { mean_std(&band) } else { (f64::NAN, f64::NAN) };
    let (pct_below, pct_above) = map.percentages(BIAS_THRESHOLD, -MAP_LAT_LIMIT);
    let (band_pct_below, band_pct_above) = map.percentages(BIAS_THRESHOLD, BAND_SOUTH);
    Ok(GlobalStats {
        n: retrieved.len(),
        bias,
        std,
        slope: ols_slope(reference, retrieved).unwrap_or(f64::NAN),
        slope_by_sst: slope_by_sst(retrieved, reference, sst)?,
        pct_below,
        pct_above,
        band_bias,
        band_std,
        band_pct_below,
        band_pct_above,
    })
}

impl GlobalStats {
    /// `(name, value)` pairs in report order; undefined values are NaN.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut m = vec![
            ("n".to_string(), self.n as f64),
            ("bias".into(), self.bias),
            ("std".into(), self.std),
            ("slope".into(), self.slope),
        ];
        for (label, s) in SST_BIN_LABELS.iter().zip(&self.slope_by_sst) {
            m.push((format!("slope_sst_{label}"), s.unwrap_or(f64::NAN)));
        }
        m.extend([
            ("pct_below".into(), self.pct_below),
            ("pct_above".into(), self.pct_above),
            ("band_bias".into(), self.band_bias),
            ("band_std".into(), self.band_std),
            ("band_pct_below".into(), self.band_pct_below),
            ("band_pct_above".into(), self.band_pct_above),
        ]);
        m
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (k, v) in self.metrics() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

/// Linear latitude blend: `out_a` at and north of `hi`, `out_b` at and
/// south of `lo`.
pub fn blend_outputs(out_a: f64, out_b: f64, lat: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidConfig(format!("blend needs lo < hi, got {lo} and {hi}")));
    }
    Ok(if lat >= hi {
        out_a
    } else if lat <= lo {
        out_b
    } else {
        let w = (lat - lo) / (hi - lo);
        w * out_a + (1.0 - w) * out_b
    })
}

/// Mean retrieval error per (SSS, SST, W) box, for boosting.
pub fn box_bias(records: &[TrainingRecord], retrieved: &[f64]) -> Result<BTreeMap<u64, f64>> {
    aligned(&[records.len(), retrieved.len()])?;
    let mut acc: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (r, y) in records.iter().zip(retrieved) {
        let w = f64::from(r.weight);
        let e = acc.entry(r.box_id).or_default();
        e.0 += w * (y - r.target_sss);
        e.1 += w;
    }
    Ok(acc.into_iter().map(|(k, (s, w))| (k, s / w)).collect())
}

/// Everything an evaluation run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub stats: GlobalStats,
    pub map: BiasMap,
}

pub fn evaluate(retrieved: &[f64], records: &[TrainingRecord]) -> Result<EvalReport> {
    let reference: Vec<f64> = records.iter().map(|r| r.target_sss).collect();
    let sst: Vec<f64> = records.iter().map(|r| r.true_sst).collect();
    let lats: Vec<f64> = records.iter().map(|r| r.lat).collect();
    let lons: Vec<f64> = records.iter().map(|r| r.lon).collect();
    let map = bias_map(retrieved, &reference, &lats, &lons)?;
    let stats = global_stats(retrieved, &reference, &sst, &lats, &map)?;
    Ok(EvalReport { stats, map })
}

impl EvalReport {
    /// Writes `<stem>_stats.csv`, `<stem>_biasmap.csv` and `<stem>_biasmap.ppm`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}_stats.csv")), self.stats.to_csv())?;
        fs::write(dir.join(format!("{stem}_biasmap.csv")), self.map.to_csv())?;
        fs::write(dir.join(format!("{stem}_biasmap.ppm")), self.map.to_ppm())?;
        Ok(())
    }
}

pub fn parse_metrics(text: &str, origin: &str) -> Result<Vec<(String, f64)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "metric,value" => {}
        _ => return Err(Error::Schema(format!("{origin}: expected a metric,value header"))),
    }
    lines
        .map(|(i, l)| {
            let (k, v) = l.split_once(',').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                msg: "expected metric,value".into(),
            })?;
            let v = v.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Side-by-side metric table with deltas `b - a`.
pub fn report_diff(a: &[(String, f64)], b: &[(String, f64)]) -> Result<String> {
    let names_a: Vec<&str> = a.iter().map(|(k, _)| k.as_str()).collect();
    let names_b: Vec<&str> = b.iter().map(|(k, _)| k.as_str()).collect();
    if names_a != names_b {
        let missing: Vec<&&str> = names_a
            .iter()
            .filter(|n| !names_b.contains(n))
            .chain(names_b.iter().filter(|n| !names_a.contains(n)))
            .collect();
        return Err(Error::Schema(format!("metric sets differ: {missing:?}")));
    }
    let mut out = format!("{:<18} {:>12} {:>12} {:>12}\n", "metric", "a", "b", "delta");
    for ((k, va), (_, vb)) in a.iter().zip(b) {
        let _ = writeln!(out, "{k:<18} {va:>12.4} {vb:>12.4} {:>12.4}", vb - va);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_cells() {
        let mut m = BiasMap::new();
        assert_eq!(m.cell(-65.0, -180.0), Some(0));
        assert_eq!(m.cell(65.0, 0.0), None);
        m.add(10.2, 20.7, 0.5);
        m.add(10.9, 20.1, -0.5);
        let k = m.cell(10.5, 20.5).unwrap();
        assert_eq!(m.count[k], 2);
        assert_eq!(m.mean(k), Some(0.0));
        assert_eq!(m.corner(k), (10.0, 20.0));
    }

    #[test]
    fn perfect_retrieval() {
        let r: Vec<f64> = (0..100).map(|i| 30.0 + i as f64 * 0.07).collect();
        let sst: Vec<f64> = (0..100).map(|i| i as f64 * 0.3).collect();
        let lat: Vec<f64> = (0..100).map(|i| -60.0 + i as f64).collect();
        let lon = vec![0.0; 100];
        let map = bias_map(&r, &r, &lat, &lon).unwrap();
        let s = global_stats(&r, &r, &sst, &lat, &map).unwrap();
        assert_eq!((s.bias, s.std, s.pct_above, s.pct_below), (0.0, 0.0, 0.0, 0.0));
        assert!((s.slope - 1.0).abs() < 1e-12);
        assert!(s.slope_by_sst.iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn half_slope() {
        let x: Vec<f64> = (0..50).map(|i| 32.0 + i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + 17.0).collect();
        let z = vec![0.0; 50];
        let map = bias_map(&y, &x, &z, &z).unwrap();
        let s = global_stats(&y, &x, &z, &z, &map).unwrap();
        assert!((s.slope - 0.5).abs() < 1e-12);
        assert_eq!(s.slope_by_sst[1], None);
    }

    #[test]
    fn percentages_cover_all_boxes() {
        let mut m = BiasMap::new();
        m.add(0.5, 0.5, 0.3);
        m.add(1.5, 0.5, -0.3);
        m.add(2.5, 0.5, 0.1);
        m.add(-50.5, 0.5, 0.3);
        let (lo, hi) = m.percentages(0.2, -65.0);
        assert_eq!((lo, hi), (25.0, 50.0));
        let (lo, hi) = m.percentages(0.2, BAND_SOUTH);
        assert!((lo - 100.0 / 3.0).abs() < 1e-12 && (hi - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn blend_rules() {
        assert_eq!(blend_outputs(1.0, 3.0, -40.0, -50.0, -45.0).unwrap(), 1.0);
        assert_eq!(blend_outputs(1.0, 3.0, -60.0, -50.0, -45.0).unwrap(), 3.0);
        assert_eq!(blend_outputs(1.0, 3.0, -47.5, -50.0, -45.0).unwrap(), 2.0);
        assert_eq!(blend_outputs(1.0, 3.0, -45.0, -50.0, -45.0).unwrap(), 1.0);
        assert_eq!(blend_outputs(1.0, 3.0, -50.0, -50.0, -45.0).unwrap(), 3.0);
        assert!(blend_outputs(1.0, 3.0, 0.0, -45.0, -50.0).is_err());
    }

    #[test]
    fn sst_bins_partition() {
        assert_eq!(sst_bin(-2.0), 0);
        assert_eq!(sst_bin(5.0), 1);
        assert_eq!(sst_bin(24.99), 4);
        assert_eq!(sst_bin(25.0), 5);
    }

    #[test]
    fn diff_tables() {
        let a = vec![("slope".to_string(), 0.8), ("std".to_string(), 0.5)];
        let b = vec![("slope".to_string(), 1.0), ("std".to_string(), 0.6)];
        let same = report_diff(&a, &a).unwrap();
        assert!(same.lines().skip(1).all(|l| l.trim_end().ends_with("0.0000")));
        assert!(report_diff(&a, &b).unwrap().contains("0.2000"));
        assert!(matches!(report_diff(&a, &b[..1]), Err(Error::Schema(_))));
        let csv = "metric,value\nslope,0.8\nstd,0.5\n";
        assert_eq!(parse_metrics(csv, "mem").unwrap(), a);
    }

    #[test]
    fn ppm_size() {
        let m = BiasMap::new();
        let img = m.to_ppm();
        let header = "P6\n360 130\n255\n".to_string();
        assert_eq!(img.len(), header.len() + 360 * 130 * 3);
    }
}
