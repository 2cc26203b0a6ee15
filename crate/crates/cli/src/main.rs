use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nlsg::experiment::{
    compare_runs, load_config, preset, run_experiment, verify_report, ExperimentConfig, Mode,
    RunReport, SyntheticSpec, REPORT_FILE,
};
use nlsg::models::{catalog_pair, verify_assumption2, PairOptions, PAIR_NAMES};
use nlsg::Assumption2Constants;

#[derive(Parser)]
#[command(
    name = "nlsg",
    version,
    about = "Adaptive prediction and control experiments"
)]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Seeds to run, e.g. `0,1,5` or `0..10` (end exclusive).
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory for traces and the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop parameter identification.
    Identify(RunArgs),
    /// Certainty-equivalence closed-loop control.
    Control(RunArgs),
    /// Streaming prediction over a CSV dataset.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Reject malformed rows.
        #[arg(long, conflicts_with = "lenient_csv")]
        strict_csv: bool,
        /// Skip malformed rows and report how many were skipped.
        #[arg(long)]
        lenient_csv: bool,
    },
    /// Compare the final metrics of two reports.
    Compare { a: PathBuf, b: PathBuf },
    /// Recompute a report from its traces.
    VerifyReport { report: PathBuf },
    /// Check the weak-convexity inequalities of a catalog pair by sampling.
    #[command(name = "verify-assumption2")]
    VerifyAssumption2 {
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the catalog's delta.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        c2: Option<f64>,
    },
    /// Write a synthetic positive-target dataset for `replay`.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a bundled preset (`paper_sim.cfg` or `paper_replay.cfg`).
    Preset { name: String },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range {s}");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed `{p}`"))
        })
        .collect()
}

fn prepare(args: &RunArgs, mode: Mode) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&args.config)?;
    if cfg.mode != mode {
        bail!(
            "{} is a {} config; use `nlsg {}`",
            args.config.display(),
            cfg.mode.as_str(),
            cfg.mode.as_str()
        );
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig) -> Result<ExitCode> {
    cfg.validate()?;
    let report = run_experiment(cfg)?;
    for r in &report.runs {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "seed {:>4} {:<9} steps {:>6}  avg_regret {}  tracking {}  theta_err {}  rel_err {}",
            r.seed,
            r.rule.as_str(),
            r.steps,
            show(r.final_avg_regret),
            show(r.final_tracking_error),
            show(r.final_theta_err),
            show(r.relative_error),
        );
    }
    if let Some(w) = &report.wins {
        println!(
            "{}: modified lower on {} seeds, classical on {}, ties {}",
            w.metric, w.modified, w.classical, w.ties
        );
    }
    for c in &report.checks {
        println!(
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("report: {}", cfg.output_dir.join(REPORT_FILE).display());
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn report_dir(path: &Path) -> PathBuf {
    nlsg::experiment::report_dir(path)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Identify(args) => execute(&prepare(&args, Mode::Identify)?),
        Command::Control(args) => execute(&prepare(&args, Mode::Control)?),
        Command::Replay {
            run,
            data,
            strict_csv,
            lenient_csv,
        } => {
            let mut cfg = prepare(&run, Mode::Replay)?;
            let replay = cfg
                .replay
                .as_mut()
                .context("config has no [replay] section")?;
            if let Some(d) = data {
                replay.data = Some(d);
            }
            if strict_csv {
                replay.strict = true;
            }
            if lenient_csv {
                replay.strict = false;
            }
            execute(&cfg)
        }
        Command::Compare { a, b } => {
            let ra = RunReport::load(&a)?;
            let rb = RunReport::load(&b)?;
            println!("a = {}\nb = {}", a.display(), b.display());
            println!("{}", compare_runs(&ra, &rb)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyReport { report } => {
            let r = RunReport::load(&report)?;
            let bad = verify_report(&r, &report_dir(&report))?;
            if bad.is_empty() {
                println!("PASS {} runs reproduce from their traces", r.runs.len());
                Ok(ExitCode::SUCCESS)
            } else {
                for m in &bad {
                    println!("FAIL {m}");
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::VerifyAssumption2 {
            pair,
            samples,
            seed,
            delta,
            c1,
            c2,
        } => {
            if !PAIR_NAMES.contains(&pair.as_str()) {
                bail!(
                    "unknown pair `{pair}`; choose one of {}",
                    PAIR_NAMES.join(", ")
                );
            }
            let entry = catalog_pair(&pair, &PairOptions::default())?;
            let constants = Assumption2Constants {
                delta: delta.unwrap_or(entry.constants.delta),
                c1: c1.unwrap_or(entry.constants.c1),
                c2: c2.unwrap_or(entry.constants.c2),
            };
            let mut sampler = entry.sampler(seed);
            let report = verify_assumption2(&entry.pair, constants, &mut sampler, samples);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::SynthData { out, rows, seed } => {
            let spec = SyntheticSpec {
                rows,
                seed,
                ..Default::default()
            };
            spec.save(&out)?;
            println!("wrote {rows} rows to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset { name } => {
            preset(&name)?;
            let text = match name.as_str() {
                "paper_sim.cfg" => nlsg::experiment::PAPER_SIM_PRESET,
                _ => nlsg::experiment::PAPER_REPLAY_PRESET,
            };
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // clap would exit with 2 on a usage error, which here means "checks failed"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
