use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use salinity::eval::EvalReport;
use salinity::pipeline::commands::{
    cmd_blend, cmd_boost, cmd_build_db, cmd_build_world, cmd_calibrate, cmd_evaluate, cmd_report_diff,
    cmd_run_experiment, cmd_train, Artifacts, DbKind, Scenario,
};
use salinity::pipeline::ExperimentConfig;
use salinity::Result;

#[derive(Parser, Debug)]
#[command(name = "salinity", version, about = "Salinity retrieval experiments on a synthetic ocean")]
struct Cli {
    /// Flat TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (overrides the config file; 0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Pixel class; defaults to every configured class.
    #[arg(long, global = true)]
    class: Option<u8>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate residual noise specs per class from simulated smoothing.
    Calibrate,
    /// Generate the synthetic ocean (B0).
    BuildWorld,
    /// Build a learning database: b1 (plus validation), b2 or bm.
    BuildDb {
        #[arg(long, default_value = "b1")]
        kind: String,
    },
    /// Train a network on a learning database.
    Train {
        #[arg(long, default_value = "b1")]
        kind: String,
    },
    /// Extract biased boxes from B2 and continue training on them (B3).
    Boost,
    /// Evaluate stored networks on the noisy test world.
    Evaluate {
        /// Network names (b1, b2, b3, bm).
        #[arg(long = "net", default_values_t = ["b1".to_string()])]
        nets: Vec<String>,
    },
    /// Latitude blend of the B3 (north) and B1 (south) networks.
    Blend,
    /// Run a whole scenario: b1, b2, b2+b3, bm or blend.
    RunExperiment {
        #[arg(long, default_value = "b2+b3")]
        scenario: String,
    },
    /// Side-by-side comparison of two stats reports.
    ReportDiff { a: PathBuf, b: PathBuf },
}

fn print_report(name: &str, class_id: u8, rep: &EvalReport) {
    let s = &rep.stats;
    println!(
        "{name} class {class_id}: bias {:.3} std {:.3} slope {:.3} below {:.1}% above {:.1}% (band {:.1}% / {:.1}%)",
        s.bias, s.std, s.slope, s.pct_below, s.pct_above, s.band_pct_below, s.band_pct_above
    );
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(c) = cli.class {
        cfg.classes = vec![c];
    }
    cfg.validate()?;
    if cfg.workers > 0 {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    let art = Artifacts::new(&cli.out_dir);
    let classes = cfg.classes.clone();
    match cli.cmd {
        Command::Calibrate => {
            for cal in cmd_calibrate(&cfg, &art)? {
                let (lo, hi) = cal.ratio_range();
                println!("class {}: residual/raw std {lo:.3} .. {hi:.3}", cal.class_id);
            }
        }
        Command::BuildWorld => {
            let n = cmd_build_world(&cfg, &art)?;
            println!("world: {n} ocean pixels -> {}", art.world().display());
        }
        Command::BuildDb { kind } => {
            let kind: DbKind = kind.parse()?;
            for c in classes {
                let db = cmd_build_db(&cfg, &art, kind, c)?;
                println!("{} class {c}: {} records, weight {}", kind.name(), db.len(), db.total_weight());
            }
        }
        Command::Train { kind } => {
            let kind: DbKind = kind.parse()?;
            for c in classes {
                let (_, h) = cmd_train(&cfg, &art, kind, c)?;
                println!(
                    "{} class {c}: best epoch {} validation rmse {:.4} psu",
                    kind.name(),
                    h.best_epoch,
                    h.best_valid_rmse
                );
            }
        }
        Command::Boost => {
            for c in classes {
                let (_, s) = cmd_boost(&cfg, &art, c)?;
                println!(
                    "b3 class {c}: {:.1}% of B2 kept, rmse {:.4} -> {:.4} psu",
                    100.0 * s.retained_fraction,
                    s.start_rmse,
                    s.best_rmse
                );
            }
        }
        Command::Evaluate { nets } => {
            let names: Vec<&str> = nets.iter().map(String::as_str).collect();
            for c in classes {
                for (name, rep) in names.iter().zip(cmd_evaluate(&cfg, &art, &names, c)?) {
                    print_report(name, c, &rep);
                }
            }
        }
        Command::Blend => {
            for c in classes {
                for (name, rep) in ["b1", "b3", "blend"].iter().zip(cmd_blend(&cfg, &art, c)?) {
                    print_report(name, c, &rep);
                }
            }
        }
        Command::RunExperiment { scenario } => {
            let scenario: Scenario = scenario.parse()?;
            for c in classes {
                for (name, rep) in cmd_run_experiment(&cfg, &art, scenario, c)? {
                    print_report(&name, c, &rep);
                }
            }
        }
        Command::ReportDiff { a, b } => print!("{}", cmd_report_diff(&a, &b)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
