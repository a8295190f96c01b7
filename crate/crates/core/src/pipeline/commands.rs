//! Commands over on-disk artifacts. Each command reads its prerequisites
//! from the output directory, so any stage can be re-run on its own.
//!
//! Layout under the output directory:
//! `config.resolved.toml`, `class_table.csv`, `calibration.csv`,
//! `noise/class{c}.csv`, `world.csv`, `db/{name}_class{c}.csv`,
//! `nets/{name}_class{c}.txt`, `reports/{name}_class{c}_*`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::database::io::{read_database, read_world, write_database, write_world};
use crate::database::{flatten, Database};
use crate::error::{Error, Result};
use crate::eval::{parse_metrics, report_diff, EvalReport};
use crate::forward::SeaState;
use crate::geometry::ClassTable;
use crate::net::{read_params, write_params, NetworkParams, TrainHistory};
use crate::noise::CorrelatedNoiseSpec;

use super::{build_world, calibrate_class, Calibration, ClassContext, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    B1,
    B2,
    B2B3,
    Bm,
    Blend,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "b1" => Scenario::B1,
            "b2" => Scenario::B2,
            "b2+b3" | "b3" => Scenario::B2B3,
            "bm" => Scenario::Bm,
            "blend" => Scenario::Blend,
            other => return Err(Error::InvalidConfig(format!("unknown scenario {other:?}"))),
        })
    }
}

/// Learning databases and networks by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbKind {
    B1,
    B2,
    B3,
    Bm,
}

impl DbKind {
    pub fn name(self) -> &'static str {
        match self {
            DbKind::B1 => "b1",
            DbKind::B2 => "b2",
            DbKind::B3 => "b3",
            DbKind::Bm => "bm",
        }
    }
}

impl FromStr for DbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "b1" => DbKind::B1,
            "b2" => DbKind::B2,
            "b3" => DbKind::B3,
            "bm" => DbKind::Bm,
            other => return Err(Error::InvalidConfig(format!("unknown database {other:?}"))),
        })
    }
}

/// Paths of every artifact under one output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Artifacts { root: root.into() }
    }

    fn sub(&self, dir: &str, file: String) -> Result<PathBuf> {
        let d = self.root.join(dir);
        fs::create_dir_all(&d)?;
        Ok(d.join(file))
    }

    pub fn noise(&self, class_id: u8) -> Result<PathBuf> {
        self.sub("noise", format!("class{class_id}.csv"))
    }

    pub fn world(&self) -> PathBuf {
        self.root.join("world.csv")
    }

    pub fn db(&self, name: &str, class_id: u8) -> Result<PathBuf> {
        self.sub("db", format!("{name}_class{class_id}.csv"))
    }

    pub fn net(&self, name: &str, class_id: u8) -> Result<PathBuf> {
        self.sub("nets", format!("{name}_class{class_id}.txt"))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn report_stem(name: &str, class_id: u8) -> String {
        format!("{name}_class{class_id}")
    }

    pub fn stats(&self, name: &str, class_id: u8) -> PathBuf {
        self.reports().join(format!("{}_stats.csv", Self::report_stem(name, class_id)))
    }

    pub fn write_config(&self, cfg: &ExperimentConfig) -> Result<()> {
        fs::create_dir_all(&self.root)?;
        fs::write(self.root.join("config.resolved.toml"), cfg.to_toml())?;
        Ok(())
    }

    pub fn read_noise(&self, class_id: u8) -> Result<CorrelatedNoiseSpec> {
        let path = self.noise(class_id)?;
        let text = fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.clone()))?;
        CorrelatedNoiseSpec::from_csv(&text, &path.display().to_string())
    }

    pub fn read_b0(&self, cfg: &ExperimentConfig) -> Result<Vec<SeaState>> {
        Ok(flatten(&read_world(&self.world(), cfg.world_resolution)?))
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

pub fn cmd_calibrate(cfg: &ExperimentConfig, art: &Artifacts) -> Result<Vec<Calibration>> {
    art.write_config(cfg)?;
    let table = ClassTable::default();
    fs::write(art.root.join("class_table.csv"), table.to_csv())?;
    let mut summary = String::from("class_id,angle,bias,std,ratio\n");
    let mut out = Vec::new();
    for &c in &cfg.classes {
        let cal = stage("calibrate", calibrate_class(cfg, c))?;
        let class = cfg.class_spec(c)?;
        for (k, angle) in class.angle_grid.iter().enumerate() {
            let _ = writeln!(
                summary,
                "{c},{angle},{},{},{}",
                cal.stats.bias[k], cal.stats.std[k], cal.ratios[k]
            );
        }
        fs::write(art.noise(c)?, cal.spec.to_csv())?;
        log::info!("class {c}: residual/raw std in {:?}", cal.ratio_range());
        out.push(cal);
    }
    fs::write(art.root.join("calibration.csv"), summary)?;
    Ok(out)
}

pub fn cmd_build_world(cfg: &ExperimentConfig, art: &Artifacts) -> Result<usize> {
    art.write_config(cfg)?;
    let world = stage("build-world", build_world(cfg))?;
    write_world(&world, &art.world())?;
    Ok(world.iter().map(|f| f.cells.len()).sum())
}

fn ensure_world(cfg: &ExperimentConfig, art: &Artifacts) -> Result<Vec<SeaState>> {
    if !art.world().exists() {
        cmd_build_world(cfg, art)?;
    }
    art.read_b0(cfg)
}

/// Builds a learning database. `b1` also writes the validation database;
/// `bm` is sized like the class's B2 database.
pub fn cmd_build_db(cfg: &ExperimentConfig, art: &Artifacts, kind: DbKind, class_id: u8) -> Result<Database> {
    art.write_config(cfg)?;
    let b0 = ensure_world(cfg, art)?;
    let ctx = ClassContext::new(cfg, class_id, art.read_noise(class_id)?, &b0)?;
    let db = match kind {
        DbKind::B1 => {
            let (b1, valid) = stage("build-db", ctx.build_b1())?;
            write_database(&valid, &art.db("validation", class_id)?)?;
            b1
        }
        DbKind::B2 => {
            write_database(&stage("build-db", ctx.build_valid_equalized())?, &art.db("validation_eq", class_id)?)?;
            stage("build-db", ctx.build_b2())?
        }
        DbKind::Bm => {
            let b2 = match read_database(&art.db("b2", class_id)?) {
                Ok(db) => db,
                Err(_) => cmd_build_db(cfg, art, DbKind::B2, class_id)?,
            };
            stage("build-db", ctx.build_bm(b2.total_weight()))?
        }
        DbKind::B3 => {
            return Err(Error::InvalidConfig("b3 is built by the boost command".into()));
        }
    };
    write_database(&db, &art.db(kind.name(), class_id)?)?;
    Ok(db)
}

fn write_history(art: &Artifacts, name: &str, class_id: u8, h: &TrainHistory) -> Result<()> {
    let mut out = String::from("epoch,train_rmse,valid_rmse\n");
    let _ = writeln!(out, "0,,{}", h.initial_valid_rmse);
    for e in &h.epochs {
        let _ = writeln!(out, "{},{},{}", e.epoch, e.train_rmse, e.valid_rmse);
    }
    fs::write(art.sub("nets", format!("{name}_class{class_id}_history.csv"))?, out)?;
    Ok(())
}

fn load_or_build(cfg: &ExperimentConfig, art: &Artifacts, kind: DbKind, class_id: u8) -> Result<Database> {
    let path = art.db(kind.name(), class_id)?;
    if path.exists() {
        read_database(&path)
    } else {
        cmd_build_db(cfg, art, kind, class_id)
    }
}

/// Validation database for a learning database: the random split for B1,
/// an equalized draw for the equalized and mixed databases.
fn validation(cfg: &ExperimentConfig, art: &Artifacts, kind: DbKind, class_id: u8) -> Result<Database> {
    if kind == DbKind::B1 {
        let path = art.db("validation", class_id)?;
        if !path.exists() {
            cmd_build_db(cfg, art, DbKind::B1, class_id)?;
        }
        return read_database(&path);
    }
    let path = art.db("validation_eq", class_id)?;
    if path.exists() {
        return read_database(&path);
    }
    let b0 = ensure_world(cfg, art)?;
    let ctx = ClassContext::new(cfg, class_id, art.read_noise(class_id)?, &b0)?;
    let db = stage("build-db", ctx.build_valid_equalized())?;
    write_database(&db, &path)?;
    Ok(db)
}

pub fn cmd_train(cfg: &ExperimentConfig, art: &Artifacts, kind: DbKind, class_id: u8) -> Result<(NetworkParams, TrainHistory)> {
    if kind == DbKind::B3 {
        return Err(Error::InvalidConfig("b3 networks come from the boost command".into()));
    }
    art.write_config(cfg)?;
    let b0 = ensure_world(cfg, art)?;
    let ctx = ClassContext::new(cfg, class_id, art.read_noise(class_id)?, &b0)?;
    let learn = load_or_build(cfg, art, kind, class_id)?;
    let valid = validation(cfg, art, kind, class_id)?;
    let (net, hist) = stage("train", ctx.train(kind.name(), &learn, &valid))?;
    write_params(&net, &art.net(kind.name(), class_id)?)?;
    write_history(art, kind.name(), class_id, &hist)?;
    Ok((net, hist))
}

fn load_or_train(cfg: &ExperimentConfig, art: &Artifacts, kind: DbKind, class_id: u8) -> Result<NetworkParams> {
    let path = art.net(kind.name(), class_id)?;
    if path.exists() {
        read_params(&path)
    } else {
        Ok(cmd_train(cfg, art, kind, class_id)?.0)
    }
}

#[derive(Debug, Clone)]
pub struct BoostSummary {
    pub retained_fraction: f64,
    pub b3_records: usize,
    pub start_rmse: f64,
    pub best_rmse: f64,
    pub normalization_frozen: bool,
}

pub fn cmd_boost(cfg: &ExperimentConfig, art: &Artifacts, class_id: u8) -> Result<(NetworkParams, BoostSummary)> {
    art.write_config(cfg)?;
    let b0 = ensure_world(cfg, art)?;
    let ctx = ClassContext::new(cfg, class_id, art.read_noise(class_id)?, &b0)?;
    let b2 = load_or_build(cfg, art, DbKind::B2, class_id)?;
    let b2_net = load_or_train(cfg, art, DbKind::B2, class_id)?;
    let valid = validation(cfg, art, DbKind::B2, class_id)?;
    let out = stage("boost", ctx.boost(&b2, &b2_net, &valid))?;
    write_database(&out.b3, &art.db("b3", class_id)?)?;
    write_params(&out.net, &art.net("b3", class_id)?)?;
    write_history(art, "b3", class_id, &out.history)?;
    let summary = BoostSummary {
        retained_fraction: out.retained_fraction,
        b3_records: out.b3.len(),
        start_rmse: out.start_rmse,
        best_rmse: out.history.best_valid_rmse,
        normalization_frozen: out.net.norm == b2_net.norm,
    };
    Ok((out.net, summary))
}

/// Evaluate stored networks on the noisy test world and write one report
/// per network under `reports/`.
pub fn cmd_evaluate(cfg: &ExperimentConfig, art: &Artifacts, names: &[&str], class_id: u8) -> Result<Vec<EvalReport>> {
    art.write_config(cfg)?;
    let b0 = ensure_world(cfg, art)?;
    let ctx = ClassContext::new(cfg, class_id, art.read_noise(class_id)?, &b0)?;
    let nets = names
        .iter()
        .map(|n| read_params(&art.net(n, class_id)?))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&NetworkParams> = nets.iter().collect();
    let out = stage("evaluate", ctx.test_outputs(&refs))?;
    let mut reports = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let rep = out.report(k)?;
        rep.write(&art.reports(), &Artifacts::report_stem(name, class_id))?;
        reports.push(rep);
    }
    Ok(reports)
}

/// Reports for the B1 network, the B3 network and their latitude blend
/// (B3 north of `blend_hi`, B1 south of `blend_lo`).
pub fn cmd_blend(cfg: &ExperimentConfig, art: &Artifacts, class_id: u8) -> Result<[EvalReport; 3]> {
    art.write_config(cfg)?;
    let b0 = ensure_world(cfg, art)?;
    let ctx = ClassContext::new(cfg, class_id, art.read_noise(class_id)?, &b0)?;
    let b1 = read_params(&art.net("b1", class_id)?)?;
    let b3 = read_params(&art.net("b3", class_id)?)?;
    let out = stage("blend", ctx.test_outputs(&[&b1, &b3]))?;
    let reports = [
        out.report(0)?,
        out.report(1)?,
        out.blend_report(1, 0, cfg.blend_lo, cfg.blend_hi)?,
    ];
    for (rep, name) in reports.iter().zip(["b1", "b3", "blend"]) {
        rep.write(&art.reports(), &Artifacts::report_stem(name, class_id))?;
    }
    Ok(reports)
}

/// Build, train and evaluate everything a scenario needs. Requires the
/// calibration artifacts; the world is generated when absent.
pub fn cmd_run_experiment(
    cfg: &ExperimentConfig,
    art: &Artifacts,
    scenario: Scenario,
    class_id: u8,
) -> Result<Vec<(String, EvalReport)>> {
    art.read_noise(class_id)?;
    art.write_config(cfg)?;
    ensure_world(cfg, art)?;
    let names: Vec<&str> = match scenario {
        Scenario::B1 => {
            cmd_train(cfg, art, DbKind::B1, class_id)?;
            vec!["b1"]
        }
        Scenario::B2 => {
            cmd_train(cfg, art, DbKind::B2, class_id)?;
            vec!["b2"]
        }
        Scenario::B2B3 => {
            cmd_train(cfg, art, DbKind::B2, class_id)?;
            cmd_boost(cfg, art, class_id)?;
            vec!["b2", "b3"]
        }
        Scenario::Bm => {
            cmd_train(cfg, art, DbKind::Bm, class_id)?;
            vec!["bm"]
        }
        Scenario::Blend => {
            cmd_train(cfg, art, DbKind::B1, class_id)?;
            cmd_train(cfg, art, DbKind::B2, class_id)?;
            cmd_boost(cfg, art, class_id)?;
            let reports = cmd_blend(cfg, art, class_id)?;
            return Ok(["b1", "b3", "blend"].iter().map(|s| s.to_string()).zip(reports).collect());
        }
    };
    let reports = cmd_evaluate(cfg, art, &names, class_id)?;
    Ok(names.iter().map(|s| s.to_string()).zip(reports).collect())
}

pub fn cmd_report_diff(a: &Path, b: &Path) -> Result<String> {
    let read = |p: &Path| -> Result<Vec<(String, f64)>> {
        let text = fs::read_to_string(p).map_err(|_| Error::MissingArtifact(p.to_path_buf()))?;
        parse_metrics(&text, &p.display().to_string())
    };
    report_diff(&read(a)?, &read(b)?)
}
