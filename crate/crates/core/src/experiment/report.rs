//! Run reports, their pass/fail checks, an independent recomputation from
//! persisted traces, and side-by-side comparison of two reports.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::metrics::{
    gradient_noise, relative_error_series, robbins_siegmund_diag, tracking_error,
};
use crate::model::{Assumption2Constants, LossFunction};
use crate::models::CatalogEntry;
use crate::rng::GENERATOR_ID;
use crate::sg::StepRule;
use crate::trace::{load_trace, StepRecord, TraceRow};

pub const REPORT_FILE: &str = "report.json";

/// Agreement required between a report and its recomputation.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

/// Final metrics of one `(seed, rule)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub rule: StepRule,
    pub trace_file: String,
    pub steps: u64,
    pub final_avg_regret: Option<f64>,
    pub checkpoint_avg_regret: Option<f64>,
    /// Final running mean of `(y_{k+1} - y*)^2`.
    pub final_tracking_error: Option<f64>,
    /// Final running mean of `(f(phi_k, theta*) - y*)^2`.
    pub final_tracking_conditional: Option<f64>,
    pub final_theta_err: Option<f64>,
    /// `max - min` of `||theta_k - theta*||` over the last tenth of the run.
    pub theta_err_decile_range: Option<f64>,
    pub relative_error: Option<f64>,
    pub checkpoint_relative_error: Option<f64>,
    pub gradient_noise_second_moment: Option<f64>,
    /// `max_k mu_k ||grad f_k||^2`.
    pub max_step_product: f64,
    /// `max_k ||grad f_k||^2`, an empirical envelope of the gradient growth.
    pub max_grad_norm_sq: f64,
    pub summability_tail_fraction: f64,
    pub flagged_steps: u64,
}

/// Seeds on which each rule achieved the lower primary metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinTally {
    pub metric: String,
    pub modified: usize,
    pub classical: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub generator: String,
    pub version: String,
    pub mode: Mode,
    pub pair: String,
    pub constants: Assumption2Constants,
    pub config: ExperimentConfig,
    pub runs: Vec<SeedSummary>,
    pub wins: Option<WinTally>,
    pub checks: Vec<CheckResult>,
    /// All enabled checks passed.
    pub pass: bool,
}

fn primary_metric(mode: Mode) -> &'static str {
    match mode {
        Mode::Replay => "relative_error",
        _ => "final_avg_regret",
    }
}

fn metric(s: &SeedSummary, name: &str) -> Option<f64> {
    match name {
        "final_avg_regret" => s.final_avg_regret,
        "final_tracking_error" => s.final_tracking_error,
        "final_tracking_conditional" => s.final_tracking_conditional,
        "final_theta_err" => s.final_theta_err,
        "relative_error" => s.relative_error,
        "gradient_noise_second_moment" => s.gradient_noise_second_moment,
        _ => None,
    }
}

const COMPARED_METRICS: [&str; 6] = [
    "final_avg_regret",
    "final_tracking_error",
    "final_tracking_conditional",
    "final_theta_err",
    "relative_error",
    "gradient_noise_second_moment",
];

fn decile_range(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let tail = &values[values.len() - values.len().div_ceil(10)..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    Some(hi - lo)
}

/// Summary of an in-memory run.
fn summarize(
    mode: Mode,
    entry: &CatalogEntry,
    checkpoint: Option<u64>,
    seed: u64,
    rule: StepRule,
    rows: &[StepRecord],
) -> Result<SeedSummary> {
    let at = |n: Option<u64>| {
        n.filter(|n| *n >= 1 && *n as usize <= rows.len())
            .map(|n| n as usize - 1)
    };
    let cp = at(checkpoint);
    let has_truth = rows.first().is_some_and(|r| r.f_true.is_some());
    let has_reference = rows.first().is_some_and(|r| r.y_star.is_some());
    let tracking = if has_truth && has_reference {
        Some(tracking_error(rows)?)
    } else {
        None
    };
    let relative = if mode == Mode::Replay {
        let preds: Vec<f64> = rows.iter().map(|r| r.f_est).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.y).collect();
        Some(relative_error_series(&preds, &ys)?)
    } else {
        None
    };
    let theta_err: Vec<f64> = rows.iter().filter_map(|r| r.theta_err).collect();
    Ok(SeedSummary {
        seed,
        rule,
        trace_file: super::trace_file_name(seed, rule),
        steps: rows.len() as u64,
        final_avg_regret: rows.last().and_then(|r| r.regret_avg),
        checkpoint_avg_regret: cp.and_then(|i| rows[i].regret_avg),
        final_tracking_error: tracking.as_ref().and_then(|t| t.observed.last()),
        final_tracking_conditional: tracking.as_ref().and_then(|t| t.conditional.last()),
        final_theta_err: theta_err.last().copied(),
        theta_err_decile_range: decile_range(&theta_err),
        relative_error: relative.as_ref().and_then(|s| s.last()),
        checkpoint_relative_error: relative.as_ref().zip(cp).map(|(s, i)| s.values[i]),
        gradient_noise_second_moment: if has_truth {
            Some(gradient_noise(rows, &entry.pair)?.second_moment)
        } else {
            None
        },
        max_step_product: rows
            .iter()
            .map(|r| r.mu_k * r.grad_norm_sq)
            .fold(0.0, f64::max),
        max_grad_norm_sq: rows.iter().map(|r| r.grad_norm_sq).fold(0.0, f64::max),
        summability_tail_fraction: robbins_siegmund_diag(rows).tail_fraction,
        flagged_steps: rows.iter().filter(|r| r.flags.any()).count() as u64,
    })
}

/// Summary recomputed from a persisted trace with plain summation. Shares no
/// code with [`summarize`] beyond the loss itself.
fn summarize_persisted(
    mode: Mode,
    loss: &dyn LossFunction,
    checkpoint: Option<u64>,
    r0: f64,
    template: &SeedSummary,
    rows: &[TraceRow],
    mismatches: &mut Vec<Mismatch>,
) -> SeedSummary {
    let n = rows.len();
    let cp = checkpoint
        .filter(|c| *c >= 1 && *c as usize <= n)
        .map(|c| c as usize - 1);
    let has_truth = rows.first().is_some_and(|r| r.f_true.is_some());

    let mut avg_regret = Vec::new();
    if has_truth {
        let mut sum = 0.0;
        for (i, r) in rows.iter().enumerate() {
            sum += loss.excess(r.f_true.unwrap_or(f64::NAN), r.f_est);
            let avg = sum / (i + 1) as f64;
            if !close(r.regret_avg, Some(avg))
                && mismatches.iter().all(|m| m.field != "regret_avg column")
            {
                mismatches.push(Mismatch {
                    seed: template.seed,
                    rule: template.rule,
                    field: "regret_avg column".into(),
                    reported: r.regret_avg,
                    recomputed: Some(avg),
                });
            }
            avg_regret.push(avg);
        }
    }

    let mean_of = |f: &dyn Fn(&TraceRow) -> Option<f64>| -> Option<f64> {
        let mut sum = 0.0;
        for r in rows {
            sum += f(r)?;
        }
        if n == 0 {
            None
        } else {
            Some(sum / n as f64)
        }
    };
    let tracking = mean_of(&|r| r.y_star.map(|ys| (r.y - ys).powi(2)));
    let tracking_cond = mean_of(&|r| Some((r.f_true? - r.y_star?).powi(2)));
    let relative_at = |upto: usize| -> f64 {
        rows[..upto]
            .iter()
            .map(|r| (r.y - r.f_est).abs() / r.y)
            .sum::<f64>()
            / upto as f64
    };
    let noise_sq = if has_truth {
        mean_of(&|r| {
            let w =
                loss.grad_x(r.y, r.f_est) - loss.grad_x(loss.reference_target(r.f_true?), r.f_est);
            Some(w * w)
        })
    } else {
        None
    };

    // ||grad f_k||^2 is the increment of the accumulator
    let mut prev_r = r0;
    let mut terms = Vec::with_capacity(n);
    let mut max_step = 0.0f64;
    let mut max_g = 0.0f64;
    for r in rows {
        let g = r.r_k - prev_r;
        prev_r = r.r_k;
        max_step = max_step.max(r.mu_k * g);
        max_g = max_g.max(g);
        terms.push(r.mu_k * r.mu_k * g);
    }
    let total: f64 = terms.iter().sum();
    let tail: f64 = terms[n / 2..].iter().sum();

    let theta_err: Vec<f64> = rows.iter().filter_map(|r| r.theta_err).collect();
    SeedSummary {
        seed: template.seed,
        rule: template.rule,
        trace_file: template.trace_file.clone(),
        steps: n as u64,
        final_avg_regret: avg_regret.last().copied(),
        checkpoint_avg_regret: cp.and_then(|i| avg_regret.get(i).copied()),
        final_tracking_error: tracking,
        final_tracking_conditional: tracking_cond,
        final_theta_err: theta_err.last().copied(),
        theta_err_decile_range: decile_range(&theta_err),
        relative_error: (mode == Mode::Replay && n > 0).then(|| relative_at(n)),
        checkpoint_relative_error: if mode == Mode::Replay {
            cp.map(|i| relative_at(i + 1))
        } else {
            None
        },
        gradient_noise_second_moment: noise_sq,
        max_step_product: max_step,
        max_grad_norm_sq: max_g,
        summability_tail_fraction: if total > 0.0 { tail / total } else { 0.0 },
        flagged_steps: rows.iter().filter(|r| r.flags.any()).count() as u64,
    }
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= VERIFY_TOLERANCE * (1.0 + x.abs().max(y.abs())),
        _ => false,
    }
}

fn tally(mode: Mode, runs: &[SeedSummary]) -> Option<WinTally> {
    let name = primary_metric(mode);
    let mut t = WinTally {
        metric: name.into(),
        modified: 0,
        classical: 0,
        ties: 0,
    };
    let mut any = false;
    for m in runs.iter().filter(|r| r.rule == StepRule::Modified) {
        let Some(c) = runs
            .iter()
            .find(|r| r.rule == StepRule::Classical && r.seed == m.seed)
        else {
            continue;
        };
        any = true;
        match (metric(m, name), metric(c, name)) {
            (Some(a), Some(b)) if a < b => t.modified += 1,
            (Some(a), Some(b)) if b < a => t.classical += 1,
            _ => t.ties += 1,
        }
    }
    any.then_some(t)
}

fn evaluate_checks(
    cfg: &ExperimentConfig,
    runs: &[SeedSummary],
    wins: Option<&WinTally>,
) -> Vec<CheckResult> {
    let c = &cfg.checks;
    let modified: Vec<&SeedSummary> = runs
        .iter()
        .filter(|r| r.rule == StepRule::Modified)
        .collect();
    let mut out = Vec::new();
    let mut per_seed =
        |name: &str,
         rows: &[&SeedSummary],
         test: &dyn Fn(&SeedSummary) -> Option<(bool, String)>| {
            let mut failures = Vec::new();
            for r in rows {
                match test(r) {
                    Some((true, _)) => {}
                    Some((false, why)) => {
                        failures.push(format!("seed {} {}: {why}", r.seed, r.rule))
                    }
                    None => {
                        failures.push(format!("seed {} {}: metric unavailable", r.seed, r.rule))
                    }
                }
            }
            out.push(CheckResult {
                name: name.into(),
                pass: failures.is_empty(),
                detail: if failures.is_empty() {
                    format!("all {} runs pass", rows.len())
                } else {
                    format!(
                        "{}/{} runs fail; {}",
                        failures.len(),
                        rows.len(),
                        failures.join("; ")
                    )
                },
            });
        };

    if let (Some(ratio), Some(cp)) = (c.regret_ratio, c.regret_checkpoint) {
        per_seed(
            &format!("regret_ratio(n={cp}) < {ratio}"),
            &modified,
            &|r| {
                let q = r.final_avg_regret? / r.checkpoint_avg_regret?;
                Some((q < ratio, format!("ratio {q:.4}")))
            },
        );
    }
    if let Some([lo, hi]) = c.tracking_band {
        per_seed(
            &format!("tracking_error in [{lo}, {hi}]"),
            &modified,
            &|r| {
                let t = r.final_tracking_error?;
                Some(((lo..=hi).contains(&t), format!("tracking {t:.5}")))
            },
        );
    }
    if let Some(f) = c.settle_factor {
        per_seed(&format!("theta_err settles ({f})"), &modified, &|r| {
            let (range, last) = (r.theta_err_decile_range?, r.final_theta_err?);
            Some((
                range < f * (1.0 + last),
                format!("range {range:.4} vs final {last:.4}"),
            ))
        });
    }
    if c.step_size_law {
        let mu = cfg.hyper.mu;
        let all: Vec<&SeedSummary> = runs.iter().collect();
        per_seed("step_size_law", &all, &|r| {
            Some((
                r.max_step_product <= mu,
                format!("max {:.6} > mu = {mu}", r.max_step_product),
            ))
        });
    }
    if c.relative_error_decreases {
        let all: Vec<&SeedSummary> = runs.iter().collect();
        per_seed("relative_error decreases", &all, &|r| {
            let (early, last) = (r.checkpoint_relative_error?, r.relative_error?);
            Some((last < early, format!("{early:.5} -> {last:.5}")))
        });
    }
    if let Some(min) = c.min_wins {
        let (pass, detail) = match wins {
            Some(w) => (
                w.modified >= min,
                format!(
                    "modified wins {}/{} on {} (classical {}, ties {})",
                    w.modified,
                    w.modified + w.classical + w.ties,
                    w.metric,
                    w.classical,
                    w.ties
                ),
            ),
            None => (false, "classical comparator not run".into()),
        };
        out.push(CheckResult {
            name: format!("modified beats classical on >= {min} seeds"),
            pass,
            detail,
        });
    }
    out
}

impl RunReport {
    pub(super) fn build(
        cfg: &ExperimentConfig,
        entry: &CatalogEntry,
        runs: &[(u64, StepRule, Vec<StepRecord>)],
    ) -> Result<RunReport> {
        let checkpoint = cfg.checks.regret_checkpoint;
        let summaries = runs
            .iter()
            .map(|(seed, rule, rows)| summarize(cfg.mode, entry, checkpoint, *seed, *rule, rows))
            .collect::<Result<Vec<_>>>()?;
        let wins = tally(cfg.mode, &summaries);
        let checks = evaluate_checks(cfg, &summaries, wins.as_ref());
        Ok(RunReport {
            generator: GENERATOR_ID.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode: cfg.mode,
            pair: cfg.pair.name.clone(),
            constants: entry.constants,
            config: cfg.clone(),
            pass: checks.iter().all(|c| c.pass),
            runs: summaries,
            wins,
            checks,
        })
    }

    /// 0 when every enabled check passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }

    pub fn find(&self, seed: u64, rule: StepRule) -> Option<&SeedSummary> {
        self.runs.iter().find(|r| r.seed == seed && r.rule == rule)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            what: "report".into(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<RunReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            what: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// A report value that its trace does not reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub seed: u64,
    pub rule: StepRule,
    pub field: String,
    pub reported: Option<f64>,
    pub recomputed: Option<f64>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed {} {}: {} reported {:?}, recomputed {:?}",
            self.seed, self.rule, self.field, self.reported, self.recomputed
        )
    }
}

/// Recompute every report number from the traces in `dir` and list the ones
/// that disagree by more than [`VERIFY_TOLERANCE`]. Check outcomes and the
/// win tally are re-derived from the recomputed values as well.
pub fn verify_report(report: &RunReport, dir: &Path) -> Result<Vec<Mismatch>> {
    let cfg = &report.config;
    let entry = cfg.catalog_entry()?;
    let loss = entry.pair.loss.as_ref();
    let mut mismatches = Vec::new();
    let mut recomputed = Vec::with_capacity(report.runs.len());
    for s in &report.runs {
        let rows = load_trace(&dir.join(&s.trace_file))?;
        let r0 = match s.rule {
            StepRule::Modified => cfg.hyper.beta3,
            StepRule::Classical => cfg.classical_r0,
        };
        let mine = summarize_persisted(
            cfg.mode,
            loss,
            cfg.checks.regret_checkpoint,
            r0,
            s,
            &rows,
            &mut mismatches,
        );
        let fields: [(&str, Option<f64>, Option<f64>); 14] = [
            ("steps", Some(s.steps as f64), Some(mine.steps as f64)),
            (
                "final_avg_regret",
                s.final_avg_regret,
                mine.final_avg_regret,
            ),
            (
                "checkpoint_avg_regret",
                s.checkpoint_avg_regret,
                mine.checkpoint_avg_regret,
            ),
            (
                "final_tracking_error",
                s.final_tracking_error,
                mine.final_tracking_error,
            ),
            (
                "final_tracking_conditional",
                s.final_tracking_conditional,
                mine.final_tracking_conditional,
            ),
            ("final_theta_err", s.final_theta_err, mine.final_theta_err),
            (
                "theta_err_decile_range",
                s.theta_err_decile_range,
                mine.theta_err_decile_range,
            ),
            ("relative_error", s.relative_error, mine.relative_error),
            (
                "checkpoint_relative_error",
                s.checkpoint_relative_error,
                mine.checkpoint_relative_error,
            ),
            (
                "gradient_noise_second_moment",
                s.gradient_noise_second_moment,
                mine.gradient_noise_second_moment,
            ),
            (
                "max_step_product",
                Some(s.max_step_product),
                Some(mine.max_step_product),
            ),
            (
                "max_grad_norm_sq",
                Some(s.max_grad_norm_sq),
                Some(mine.max_grad_norm_sq),
            ),
            (
                "summability_tail_fraction",
                Some(s.summability_tail_fraction),
                Some(mine.summability_tail_fraction),
            ),
            (
                "flagged_steps",
                Some(s.flagged_steps as f64),
                Some(mine.flagged_steps as f64),
            ),
        ];
        for (field, a, b) in fields {
            if !close(a, b) {
                mismatches.push(Mismatch {
                    seed: s.seed,
                    rule: s.rule,
                    field: field.into(),
                    reported: a,
                    recomputed: b,
                });
            }
        }
        recomputed.push(mine);
    }
    let wins = tally(cfg.mode, &recomputed);
    if wins != report.wins {
        mismatches.push(Mismatch {
            seed: 0,
            rule: StepRule::Modified,
            field: format!("wins {:?} vs {:?}", report.wins, wins),
            reported: None,
            recomputed: None,
        });
    }
    let checks = evaluate_checks(cfg, &recomputed, wins.as_ref());
    for (a, b) in report.checks.iter().zip(&checks) {
        if a.pass != b.pass || a.name != b.name {
            mismatches.push(Mismatch {
                seed: 0,
                rule: StepRule::Modified,
                field: format!("check `{}`", a.name),
                reported: Some(f64::from(u8::from(a.pass))),
                recomputed: Some(f64::from(u8::from(b.pass))),
            });
        }
    }
    Ok(mismatches)
}

/// Mean of one metric in two reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub name: String,
    pub a: f64,
    pub b: f64,
    /// `b - a`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub mode: Mode,
    pub primary_metric: String,
    pub metrics: Vec<MetricDelta>,
    /// Runs matched by seed and rule where `a` had the lower primary metric.
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<30} {:>14} {:>14} {:>14}",
            "metric (mean over runs)", "a", "b", "b - a"
        )?;
        for m in &self.metrics {
            writeln!(
                f,
                "{:<30} {:>14.6e} {:>14.6e} {:>14.6e}",
                m.name, m.a, m.b, m.delta
            )?;
        }
        write!(
            f,
            "{}: a lower on {} runs, b lower on {}, ties {}",
            self.primary_metric, self.a_wins, self.b_wins, self.ties
        )
    }
}

/// Side-by-side final metrics of two reports of the same mode.
pub fn compare_runs(a: &RunReport, b: &RunReport) -> Result<Comparison> {
    if a.mode != b.mode {
        return Err(Error::config(
            "mode",
            format!(
                "cannot compare a {} report with a {} report",
                a.mode.as_str(),
                b.mode.as_str()
            ),
        ));
    }
    let mean = |r: &RunReport, name: &str| -> Option<f64> {
        let vals: Vec<f64> = r.runs.iter().filter_map(|s| metric(s, name)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let mut metrics = Vec::new();
    for name in COMPARED_METRICS {
        match (mean(a, name), mean(b, name)) {
            (Some(x), Some(y)) => metrics.push(MetricDelta {
                name: name.into(),
                a: x,
                b: y,
                delta: y - x,
            }),
            (None, None) => {}
            _ => {
                return Err(Error::config(
                    "metrics",
                    format!("`{name}` is present in only one report"),
                ))
            }
        }
    }
    let primary = primary_metric(a.mode);
    let (mut a_wins, mut b_wins, mut ties) = (0, 0, 0);
    for s in &a.runs {
        if let Some(t) = b.find(s.seed, s.rule) {
            match (metric(s, primary), metric(t, primary)) {
                (Some(x), Some(y)) if x < y => a_wins += 1,
                (Some(x), Some(y)) if y < x => b_wins += 1,
                _ => ties += 1,
            }
        }
    }
    Ok(Comparison {
        mode: a.mode,
        primary_metric: primary.into(),
        metrics,
        a_wins,
        b_wins,
        ties,
    })
}
