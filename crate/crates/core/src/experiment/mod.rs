//! Experiment orchestration: configs, datasets, seed sweeps, persisted traces
//! and reports.

mod config;
mod ingest;
mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{
    load_config, parse_config, preset, Checks, ExperimentConfig, Mode, PairConfig, PlantConfig,
    ReplayConfig, PAPER_REPLAY_PRESET, PAPER_SIM_PRESET,
};
pub use ingest::{ingest_csv, ingest_reader, ColumnMap, Dataset, SyntheticSpec};
pub use report::{
    compare_runs, verify_report, CheckResult, Comparison, MetricDelta, Mismatch, RunReport,
    SeedSummary, WinTally, REPORT_FILE, VERIFY_TOLERANCE,
};

use crate::control::{run_closed_loop, LagBuffer, NoiseLaw, NoiseSource, Plant, RunOutcome};
use crate::error::{Error, Result};
use crate::model::ModelLossPair;
use crate::models::{CatalogEntry, Observation};
use crate::numeric::{dot, CompensatedSum};
use crate::sg::{classical_sg_init, sg_init, EstimatorState, StepRule};
use crate::trace::{save_trace, StepFlags, StepRecord};
use crate::types::ParameterVector;

/// Fresh estimator for `rule`, starting at the configured `theta0`.
pub fn build_estimator(
    cfg: &ExperimentConfig,
    rule: StepRule,
    dim: usize,
) -> Result<EstimatorState> {
    let theta0 = ParameterVector::estimate(cfg.theta0(dim))?;
    match rule {
        StepRule::Modified => sg_init(theta0, cfg.hyper),
        StepRule::Classical => classical_sg_init(theta0, cfg.hyper.mu, cfg.classical_r0),
    }
}

/// Open-loop identification: regressors from the pair's operating set,
/// observations from `theta_star` through the pair's observation model.
pub fn run_identification(
    entry: &CatalogEntry,
    theta_star: &ParameterVector,
    noise: NoiseLaw,
    estimator: EstimatorState,
    n_steps: u64,
    seed: u64,
) -> RunOutcome {
    let pair = &entry.pair;
    let mut sampler = entry.sampler(seed);
    let mut noise = match entry.observation {
        Observation::Censored(spec) => NoiseSource::new(
            NoiseLaw::Gaussian {
                std: spec.noise_std,
            },
            seed,
        ),
        _ => NoiseSource::new(noise, seed),
    };
    let truth = theta_star.as_slice();
    let mut state = estimator;
    let mut trace = Vec::with_capacity(n_steps as usize);
    let mut regret_sum = CompensatedSum::default();
    for k in 0..n_steps {
        let phi = sampler().phi;
        let f_true = pair.predictor.value(&phi, truth);
        let y = match entry.observation {
            Observation::Additive { .. } => f_true + noise.draw(),
            Observation::Censored(spec) => spec.censor(dot(&phi, truth) + noise.draw()),
            Observation::Label => {
                if dot(&phi, truth) >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let next = match state.step(pair, &phi, y) {
            Ok(next) => next,
            Err(e) => {
                return RunOutcome {
                    trace,
                    final_state: state,
                    error: Some(e.at_step(k)),
                }
            }
        };
        let regret = pair.loss.excess(f_true, next.last_prediction);
        regret_sum.add(regret);
        let noise_value = match entry.observation {
            Observation::Label => None,
            _ => Some(y - f_true),
        };
        trace.push(StepRecord {
            k,
            y,
            u: None,
            y_star: None,
            f_true: Some(f_true),
            f_est: next.last_prediction,
            loss: pair.loss.value(y, next.last_prediction),
            regret: Some(regret),
            regret_avg: Some(regret_sum.value() / (k + 1) as f64),
            theta_err: Some(next.theta.distance_to(theta_star)),
            mu_k: next.last_mu,
            r_k: next.gain.r(),
            grad_norm_sq: next.last_grad_norm_sq,
            noise: noise_value,
            flags: StepFlags {
                diverged: next.diverged(),
                ..StepFlags::default()
            },
        });
        state = next;
    }
    RunOutcome {
        trace,
        final_state: state,
        error: None,
    }
}

/// One streaming pass over `data`; `f_est` is the prediction made before the
/// target is revealed.
pub fn run_replay(
    data: &Dataset,
    pair: &ModelLossPair,
    estimator: EstimatorState,
    n_steps: Option<u64>,
) -> RunOutcome {
    let n = n_steps.map_or(data.len(), |n| (n as usize).min(data.len()));
    let mut state = estimator;
    let mut trace = Vec::with_capacity(n);
    for (k, (phi, y)) in data.rows[..n].iter().enumerate() {
        let k = k as u64;
        let next = match state.step(pair, phi.as_slice(), *y) {
            Ok(next) => next,
            Err(e) => {
                return RunOutcome {
                    trace,
                    final_state: state,
                    error: Some(e.at_step(k)),
                }
            }
        };
        trace.push(StepRecord {
            k,
            y: *y,
            u: None,
            y_star: None,
            f_true: None,
            f_est: next.last_prediction,
            loss: pair.loss.value(*y, next.last_prediction),
            regret: None,
            regret_avg: None,
            theta_err: None,
            mu_k: next.last_mu,
            r_k: next.gain.r(),
            grad_norm_sq: next.last_grad_norm_sq,
            noise: None,
            flags: StepFlags {
                diverged: next.diverged(),
                ..StepFlags::default()
            },
        });
        state = next;
    }
    RunOutcome {
        trace,
        final_state: state,
        error: None,
    }
}

/// Run one `(seed, rule)` job of `cfg`. `data` is required in replay mode.
pub fn run_seed(
    cfg: &ExperimentConfig,
    entry: &CatalogEntry,
    data: Option<&Dataset>,
    seed: u64,
    rule: StepRule,
) -> Result<RunOutcome> {
    let estimator = build_estimator(cfg, rule, entry.pair.dim())?;
    match cfg.mode {
        Mode::Identify => {
            let plant = cfg
                .plant
                .as_ref()
                .ok_or_else(|| Error::config("plant", "missing"))?;
            let theta_star = ParameterVector::truth(plant.theta_star.clone())?;
            Ok(run_identification(
                entry,
                &theta_star,
                plant.noise,
                estimator,
                cfg.n_steps.unwrap_or(1),
                seed,
            ))
        }
        Mode::Control => {
            let plant_cfg = cfg
                .plant
                .as_ref()
                .ok_or_else(|| Error::config("plant", "missing"))?;
            let theta_star = ParameterVector::truth(plant_cfg.theta_star.clone())?;
            let mut plant = Plant::new(
                entry.pair.predictor.clone(),
                theta_star,
                plant_cfg.noise,
                seed,
            )?;
            let opts = &cfg.pair.options;
            let lags = LagBuffer::new(opts.p, opts.q)?;
            Ok(run_closed_loop(
                &mut plant,
                estimator,
                &entry.pair,
                lags,
                &cfg.control_config(),
                cfg.n_steps.unwrap_or(1),
                seed,
            ))
        }
        Mode::Replay => {
            let data = data.ok_or_else(|| Error::config("replay.data", "no dataset loaded"))?;
            Ok(run_replay(data, &entry.pair, estimator, cfg.n_steps))
        }
    }
}

pub fn trace_file_name(seed: u64, rule: StepRule) -> String {
    format!("trace_seed{seed}_{}.csv", rule.as_str())
}

/// Load the replay dataset named by the config.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let replay = cfg
        .replay
        .as_ref()
        .ok_or_else(|| Error::config("replay", "missing"))?;
    let path = replay
        .data
        .as_ref()
        .ok_or_else(|| Error::config("replay.data", "no data file given"))?;
    let map = ColumnMap {
        features: replay.features.clone(),
        target: replay.target.clone(),
        intercept: replay.intercept,
    };
    let data = ingest_csv(path, &map, replay.strict)?;
    log::info!(
        "{}: {} rows, {} skipped",
        path.display(),
        data.len(),
        data.skipped.len()
    );
    Ok(data)
}

/// Run every seed (and the classical comparator when enabled), persist one
/// trace per run plus `report.json` under `cfg.output_dir`.
///
/// Seeds run in parallel; each run is sequential. When a run fails, all
/// traces (including the partial one) are written before the error returns.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let entry = cfg.catalog_entry()?;
    let data = match cfg.mode {
        Mode::Replay => Some(load_dataset(cfg)?),
        _ => None,
    };
    let out_dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let mut rules = vec![StepRule::Modified];
    if cfg.compare_classical {
        rules.push(StepRule::Classical);
    }
    let jobs: Vec<(u64, StepRule)> = cfg
        .seeds
        .iter()
        .flat_map(|s| rules.iter().map(move |r| (*s, *r)))
        .collect();

    let results: Vec<(u64, StepRule, Result<RunOutcome>)> = jobs
        .par_iter()
        .map(|&(seed, rule)| {
            let run = run_seed(cfg, &entry, data.as_ref(), seed, rule).and_then(|run| {
                save_trace(&out_dir.join(trace_file_name(seed, rule)), &run.trace)?;
                Ok(run)
            });
            (seed, rule, run)
        })
        .collect();

    let mut runs = Vec::with_capacity(results.len());
    for (seed, rule, run) in results {
        let run = run.map_err(|e| Error::Run {
            seed,
            step: 0,
            source: Box::new(e),
        })?;
        if let Some(e) = run.error {
            return Err(Error::Run {
                seed,
                step: run.trace.len() as u64,
                source: Box::new(e),
            });
        }
        runs.push((seed, rule, run.trace));
    }

    let report = RunReport::build(cfg, &entry, &runs)?;
    report.save(&out_dir.join(REPORT_FILE))?;
    Ok(report)
}

/// Directory holding the traces of a report saved at `report_path`.
pub fn report_dir(report_path: &Path) -> PathBuf {
    report_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sim(dir: &Path, n: u64) -> ExperimentConfig {
        let mut cfg = preset("paper_sim.cfg").unwrap();
        cfg.n_steps = Some(n);
        cfg.seeds = vec![3, 4];
        cfg.output_dir = dir.to_path_buf();
        cfg.checks.regret_checkpoint = Some(n.min(50));
        cfg
    }

    #[test]
    fn one_step_run_has_one_record() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&small_sim(dir.path(), 1)).unwrap();
        for s in &report.runs {
            assert_eq!(s.steps, 1);
            let rows = crate::trace::load_trace(&dir.path().join(&s.trace_file)).unwrap();
            assert_eq!(rows.len(), 1);
        }
    }

    #[test]
    fn rerun_is_byte_identical_and_verifies() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_experiment(&small_sim(a.path(), 300)).unwrap();
        run_experiment(&small_sim(b.path(), 300)).unwrap();
        for s in &ra.runs {
            let x = std::fs::read(a.path().join(&s.trace_file)).unwrap();
            let y = std::fs::read(b.path().join(&s.trace_file)).unwrap();
            assert_eq!(x, y, "{}", s.trace_file);
        }
        let loaded = RunReport::load(&a.path().join(REPORT_FILE)).unwrap();
        assert_eq!(loaded, ra);
        let bad = verify_report(&loaded, a.path()).unwrap();
        assert!(bad.is_empty(), "{bad:?}");
        assert_eq!(ra.runs.len(), 4);
        assert!(ra.wins.is_some());
    }

    #[test]
    fn tampered_report_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = run_experiment(&small_sim(dir.path(), 100)).unwrap();
        r.runs[0].final_avg_regret = r.runs[0].final_avg_regret.map(|v| v * 1.01);
        let bad = verify_report(&r, dir.path()).unwrap();
        assert!(bad.iter().any(|m| m.field == "final_avg_regret"), "{bad:?}");
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&small_sim(dir.path(), 50)).unwrap();
        let c = compare_runs(&r, &r).unwrap();
        assert!(c.metrics.iter().all(|m| m.delta == 0.0));
        assert_eq!((c.a_wins, c.b_wins, c.ties), (0, 0, r.runs.len()));
    }

    #[test]
    fn replay_reports_relative_error_for_both_rules() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("synthetic.csv");
        SyntheticSpec {
            rows: 400,
            ..Default::default()
        }
        .save(&data)
        .unwrap();
        let mut cfg = preset("paper_replay.cfg").unwrap();
        cfg.replay.as_mut().unwrap().data = Some(data);
        cfg.output_dir = dir.path().join("out");
        cfg.checks.regret_checkpoint = Some(100);
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.runs.len(), 2);
        assert!(r
            .runs
            .iter()
            .all(|s| s.relative_error.is_some() && s.steps == 400));
        let c = compare_runs(&r, &r).unwrap();
        assert!(c.metrics.iter().any(|m| m.name == "relative_error"));
        assert!(verify_report(&r, &cfg.output_dir).unwrap().is_empty());
    }

    #[test]
    fn identification_converges_on_linear_pair() {
        let text = r#"
            mode = "identify"
            n_steps = 4000
            seeds = [1]
            theta0 = [0.0, 0.0, 0.0]
            [pair]
            name = "linear-mse"
            [hyper]
            mu = 0.5
            beta1 = 0.5
            beta2 = 0.51
            beta3 = 2.0
            [plant]
            theta_star = [1.0, -2.0, 0.5]
            noise = { law = "gaussian", std = 0.1 }
        "#;
        let cfg = parse_config(text, Path::new("inline.cfg")).unwrap();
        let entry = cfg.catalog_entry().unwrap();
        let run = run_seed(&cfg, &entry, None, 1, StepRule::Modified).unwrap();
        assert!(run.error.is_none());
        let first = run.trace[0].theta_err.unwrap();
        let last = run.trace.last().unwrap().theta_err.unwrap();
        assert!(last < 0.2 * first, "{first} -> {last}");
    }

    #[test]
    fn mismatched_modes_do_not_compare() {
        let dir = tempfile::tempdir().unwrap();
        let a = run_experiment(&small_sim(dir.path(), 5)).unwrap();
        let mut b = a.clone();
        b.mode = Mode::Identify;
        assert!(compare_runs(&a, &b).is_err());
    }
}
