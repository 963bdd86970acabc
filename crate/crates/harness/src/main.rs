use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use phpmht_core::gospa::gospa;
use phpmht_harness::config::{FilterKind, ScenarioConfig};
use phpmht_harness::frames::write_frames;
use phpmht_harness::output::emit_outputs;
use phpmht_harness::runner::{render, run_experiment};

#[derive(Parser)]
#[command(name = "phpmht", version, about = "Track-before-detect benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo trials of one filter and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        filter: Option<FilterKind>,
    },
    /// Per-step GOSPA between two `step px py` point files.
    Gospa {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        c: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
    },
    /// Write the first run's frames and truth of a scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            runs,
            seed,
            out,
            filter,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let kind = filter.unwrap_or(cfg.filter);
            let e = run_experiment(&cfg, kind)?;
            emit_outputs(&cfg, std::slice::from_ref(&e), &out)?;
            let a = e.summary.average;
            println!(
                "{} {} runs={} total={:.4} loc={:.4} missed={:.4} false={:.4} step_s={:.5}",
                kind.name(),
                cfg.scenario.name(),
                cfg.runs,
                a.total,
                a.localisation,
                a.missed,
                a.false_targets,
                e.mean_step_seconds
            );
        }
        Command::Gospa { truth, est, c, l } => {
            let truth = read_points(&truth)?;
            let est = read_points(&est)?;
            let steps: std::collections::BTreeSet<usize> = truth.keys().chain(est.keys()).copied().collect();
            println!("step,total,loc,missed,false");
            for k in steps {
                let t = truth.get(&k).map(Vec::as_slice).unwrap_or(&[]);
                let e = est.get(&k).map(Vec::as_slice).unwrap_or(&[]);
                let d = gospa(t, e, c, l);
                println!("{k},{},{},{},{}", d.total, d.localisation, d.missed, d.false_targets);
            }
        }
        Command::Simulate { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let truth = cfg.truth()?;
            std::fs::create_dir_all(&out)?;
            let frames: Vec<_> = (1..=truth.steps).map(|k| render(&cfg, &truth, cfg.seed, k)).collect();
            write_frames(&out.join("frames.bin"), &cfg.grid(), &frames)?;
            std::fs::write(out.join("truth.txt"), truth.to_text())?;
            println!("wrote {} frames to {}", frames.len(), out.display());
        }
    }
    Ok(())
}

fn read_points(path: &Path) -> Result<BTreeMap<usize, Vec<[f64; 2]>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out: BTreeMap<usize, Vec<[f64; 2]>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        anyhow::ensure!(f.len() == 3, "{}:{}: expected 'step px py'", path.display(), n + 1);
        let k: usize = f[0].parse()?;
        out.entry(k).or_default().push([f[1].parse()?, f[2].parse()?]);
    }
    Ok(out)
}
