//! Text formats for worlds and databases.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is bit-exact and equal inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::SeaState;

use super::{Database, OceanField, Provenance, TrainingRecord};

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(raw: &str, path: &str, line: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e: T::Err| parse_err(path, line, format!("{name}: {e}")))
}

pub const WORLD_HEADER: &str = "month,lat,lon,sss,sst,wind";

pub fn world_to_csv(fields: &[OceanField]) -> String {
    let mut out = String::from(WORLD_HEADER);
    out.push('\n');
    for f in fields {
        for c in &f.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                f.month,
                c.lat.unwrap_or(f64::NAN),
                c.lon.unwrap_or(f64::NAN),
                c.sss,
                c.sst,
                c.wind
            );
        }
    }
    out
}

/// Parse a world file. The resolution is not stored and must be supplied.
pub fn world_from_csv(text: &str, resolution: f64, path: &str) -> Result<Vec<OceanField>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == WORLD_HEADER => {}
        _ => return Err(Error::Schema(format!("{path}: expected header {WORLD_HEADER:?}"))),
    }
    let mut fields: Vec<OceanField> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(parse_err(path, n, format!("expected 6 columns, found {}", cols.len())));
        }
        let month: usize = field(cols[0], path, n, "month")?;
        let state = SeaState::new(
            field(cols[3], path, n, "sss")?,
            field(cols[4], path, n, "sst")?,
            field(cols[5], path, n, "wind")?,
        )
        .and_then(|s| s.with_geo(field(cols[1], path, n, "lat")?, field(cols[2], path, n, "lon")?))
        .map_err(|e| parse_err(path, n, e.to_string()))?;
        match fields.last_mut() {
            Some(f) if f.month == month => f.cells.push(state),
            _ => fields.push(OceanField {
                month,
                resolution,
                cells: vec![state],
            }),
        }
    }
    Ok(fields)
}

pub fn database_to_csv(db: &Database) -> String {
    let n_tb = db.n_inputs().map_or(0, |n| n - 2);
    let mut out = String::from("class_id,provenance,seed\n");
    let _ = writeln!(out, "{},{},{}", db.class_id, db.provenance, db.build_seed);
    out.push_str("lat,lon,box_id,weight");
    for k in 1..=n_tb {
        let _ = write!(out, ",tb_{k}");
    }
    out.push_str(",noisy_sst,noisy_wind,target_sss,true_sst,true_wind\n");
    for r in &db.records {
        let _ = write!(out, "{},{},{},{}", r.lat, r.lon, r.box_id, r.weight);
        for v in &r.inputs {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{},{}", r.target_sss, r.true_sst, r.true_wind);
    }
    out
}

pub fn database_from_csv(text: &str, path: &str) -> Result<Database> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let schema = |msg: &str| Error::Schema(format!("{path}: {msg}"));
    match lines.next() {
        Some((_, h)) if h.trim() == "class_id,provenance,seed" => {}
        _ => return Err(schema("missing database meta header")),
    }
    let (i, meta) = lines.next().ok_or_else(|| schema("missing meta row"))?;
    let meta: Vec<&str> = meta.split(',').collect();
    if meta.len() != 3 {
        return Err(parse_err(path, i + 1, "meta row needs class_id,provenance,seed"));
    }
    let class_id: u8 = field(meta[0], path, i + 1, "class_id")?;
    let provenance: Provenance = meta[1].trim().parse()?;
    let build_seed: u64 = field(meta[2], path, i + 1, "seed")?;
    let (_, header) = lines.next().ok_or_else(|| schema("missing record header"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let n_tb = cols.len().checked_sub(9).ok_or_else(|| schema("record header too short"))?;
    let expected_tail = ["noisy_sst", "noisy_wind", "target_sss", "true_sst", "true_wind"];
    let tb_ok = (0..n_tb).all(|k| cols[4 + k] == format!("tb_{}", k + 1));
    if cols[..4] != ["lat", "lon", "box_id", "weight"] || !tb_ok || cols[4 + n_tb..] != expected_tail {
        return Err(schema("unexpected record columns"));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != cols.len() {
            return Err(parse_err(path, n, format!("expected {} columns, found {}", cols.len(), vals.len())));
        }
        let inputs = vals[4..6 + n_tb]
            .iter()
            .map(|v| field::<f64>(v, path, n, "input"))
            .collect::<Result<Vec<_>>>()?;
        let weight: u32 = field(vals[3], path, n, "weight")?;
        if weight == 0 {
            return Err(parse_err(path, n, "weight must be >= 1"));
        }
        records.push(TrainingRecord {
            lat: field(vals[0], path, n, "lat")?,
            lon: field(vals[1], path, n, "lon")?,
            box_id: field(vals[2], path, n, "box_id")?,
            weight,
            inputs,
            target_sss: field(vals[6 + n_tb], path, n, "target_sss")?,
            true_sst: field(vals[7 + n_tb], path, n, "true_sst")?,
            true_wind: field(vals[8 + n_tb], path, n, "true_wind")?,
        });
    }
    Ok(Database {
        class_id,
        provenance,
        build_seed,
        records,
    })
}

pub fn write_database(db: &Database, path: &Path) -> Result<()> {
    fs::write(path, database_to_csv(db))?;
    Ok(())
}

pub fn read_database(path: &Path) -> Result<Database> {
    let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
    database_from_csv(&text, &path.display().to_string())
}

pub fn write_world(fields: &[OceanField], path: &Path) -> Result<()> {
    fs::write(path, world_to_csv(fields))?;
    Ok(())
}

pub fn read_world(path: &Path, resolution: f64) -> Result<Vec<OceanField>> {
    let text = fs::read_to_string(path).map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
    world_from_csv(&text, resolution, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::database::{generate_world, WorldConfig};

    fn sample_db() -> Database {
        Database {
            class_id: 8,
            provenance: Provenance::B2,
            build_seed: 42,
            records: vec![
                TrainingRecord {
                    inputs: vec![201.123456789, 0.1 + 0.2, 1.0 / 3.0, 12.5, 7.25],
                    target_sss: 35.000000000000007,
                    box_id: 175_044_007,
                    lat: -47.5,
                    lon: 12.5,
                    weight: 3,
                    true_sst: 12.0,
                    true_wind: 7.5,
                },
                TrainingRecord {
                    inputs: vec![1e-300, -0.0, 5e10, -1.5, 0.0],
                    target_sss: 31.0,
                    box_id: 0,
                    lat: 1.0,
                    lon: -179.5,
                    weight: 1,
                    true_sst: -1.5,
                    true_wind: 0.0,
                },
            ],
        }
    }

    #[test]
    fn database_round_trip_is_bit_exact() {
        let db = sample_db();
        let text = database_to_csv(&db);
        let back = database_from_csv(&text, "mem").unwrap();
        assert_eq!(back, db);
        assert_eq!(database_to_csv(&back), text);
        assert!(text.starts_with("class_id,provenance,seed\n8,B2,42\nlat,lon,box_id,weight,tb_1,tb_2,tb_3,"));
    }

    #[test]
    fn database_schema_errors() {
        let text = database_to_csv(&sample_db()).replace("tb_2", "tb_x");
        assert!(matches!(database_from_csv(&text, "mem"), Err(Error::Schema(_))));
        let text = database_to_csv(&sample_db()).replace(",3,", ",0,");
        assert!(database_from_csv(&text, "mem").is_err());
    }

    #[test]
    fn world_round_trip() {
        let c = WorldConfig {
            resolution: 10.0,
            months: 3,
            ..WorldConfig::default()
        };
        let w = generate_world(&c, 5).unwrap();
        let back = world_from_csv(&world_to_csv(&w), 10.0, "mem").unwrap();
        assert_eq!(back, w);
    }
}
