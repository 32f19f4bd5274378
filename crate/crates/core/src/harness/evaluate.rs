use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::baselines::{central_pi_forecast, deterministic_forecast, naive_pi_forecast, BaselineKind};
use crate::data::Dataset;
use crate::metrics::{evaluate, EvaluationReport};
use crate::{Error, Result};

use super::config::RunConfig;
use super::train::Artifacts;

/// One evaluated forecaster and its metrics.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    pub report: EvaluationReport,
}

/// Accumulated monetary-score reduction of the proposed method versus one
/// comparison forecaster: `sum_t (baseline score_t - proposed score_t)`.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionRow {
    pub method: String,
    pub accumulative_reduction: f64,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub reports: Vec<MethodReport>,
    pub reductions: Vec<ReductionRow>,
}

/// Evaluate the trained artifacts and every enabled baseline on the test
/// partition with greedy (epsilon = 0) action selection, then write
/// per-sample CSVs, the summary tables, and the reduction table.
pub fn evaluate_run(
    config: &RunConfig,
    artifacts: &Artifacts,
    train_data: &Dataset,
    test_data: &Dataset,
) -> Result<EvalOutput> {
    let output = evaluate_methods(config, artifacts, train_data, test_data)?;
    let out_dir = config.resolved_out_dir();
    std::fs::create_dir_all(&out_dir)?;
    write_eval_files(&out_dir, &output)?;
    Ok(output)
}

/// The evaluation itself, without file I/O.
pub fn evaluate_methods(
    config: &RunConfig,
    artifacts: &Artifacts,
    train_data: &Dataset,
    test_data: &Dataset,
) -> Result<EvalOutput> {
    if test_data.is_empty() {
        return Err(Error::InvalidArgument("test partition is empty".into()));
    }
    let beta = config.beta();
    let capacity = test_data.capacity;
    let mut reports = Vec::new();

    // Proposed: greedy proportion choice per state, interval from the bank.
    let proposed = evaluate(
        |_, sample| {
            let action = artifacts.agent.greedy_action(&sample.features);
            let pair = artifacts.space.pair(action)?;
            artifacts.bank.predict_interval(&pair, &sample.features, capacity)
        },
        test_data,
        &config.vpp,
        config.ncp,
    )?;
    reports.push(MethodReport {
        method: "proposed".into(),
        report: proposed,
    });

    for baseline in &config.baselines {
        let report = match baseline {
            BaselineKind::CentralQmlp => {
                let bank = artifacts.central.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("central baseline requested but not trained".into())
                })?;
                evaluate(
                    |_, sample| central_pi_forecast(bank, &sample.features, beta, capacity),
                    test_data,
                    &config.vpp,
                    config.ncp,
                )?
            }
            BaselineKind::NaivePersistence => {
                // Rolling realized-power window, seeded from the train tail.
                let mut history: VecDeque<f64> = train_data
                    .samples
                    .iter()
                    .rev()
                    .take(config.naive_window)
                    .rev()
                    .map(|s| s.power)
                    .collect();
                evaluate(
                    |_, sample| {
                        let recent: Vec<f64> = history.iter().copied().collect();
                        let interval = naive_pi_forecast(&recent, beta, capacity)?;
                        if history.len() == config.naive_window {
                            history.pop_front();
                        }
                        history.push_back(sample.power);
                        Ok(interval)
                    },
                    test_data,
                    &config.vpp,
                    config.ncp,
                )?
            }
            BaselineKind::Deterministic => {
                let median = artifacts.median.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("deterministic baseline requested but not trained".into())
                })?;
                evaluate(
                    |_, sample| deterministic_forecast(median, &sample.features, beta, capacity),
                    test_data,
                    &config.vpp,
                    config.ncp,
                )?
            }
        };
        reports.push(MethodReport {
            method: baseline.name().into(),
            report,
        });
    }

    let proposed_report = &reports[0].report;
    let reductions = reports
        .iter()
        .map(|m| ReductionRow {
            method: m.method.clone(),
            accumulative_reduction: m
                .report
                .samples
                .iter()
                .zip(&proposed_report.samples)
                .map(|(b, p)| b.monetary - p.monetary)
                .sum(),
        })
        .collect();

    Ok(EvalOutput { reports, reductions })
}

/// Write `eval_<method>.csv` per method, `summary.csv`, `summary.md`, and
/// `reduction.csv` into `dir`.
pub fn write_eval_files(dir: &Path, output: &EvalOutput) -> Result<()> {
    for m in &output.reports {
        m.report.write_csv(dir.join(format!("eval_{}.csv", m.method)))?;
    }

    let mut summary = String::from("method,winkler,width,acd,monetary,monetary_da,monetary_rt\n");
    for m in &output.reports {
        let r = &m.report;
        writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            m.method, r.winkler_avg, r.width_avg, r.acd, r.monetary_avg, r.monetary_da_avg, r.monetary_rt_avg
        )
        .expect("string write");
    }
    std::fs::write(dir.join("summary.csv"), &summary)?;
    std::fs::write(dir.join("summary.md"), render_summary_markdown(output))?;

    let mut reduction = String::from("method,accumulative_reduction\n");
    for row in &output.reductions {
        writeln!(reduction, "{},{}", row.method, row.accumulative_reduction).expect("string write");
    }
    std::fs::write(dir.join("reduction.csv"), reduction)?;
    Ok(())
}

/// Markdown summary: a quality/value table, the monetary decomposition, and
/// the accumulative reduction versus each comparison forecaster.
pub fn render_summary_markdown(output: &EvalOutput) -> String {
    let mut md = String::new();
    md.push_str("# Evaluation summary\n\n");
    md.push_str("## Forecast quality and value\n\n");
    md.push_str("| method | winkler/MW | width/MW | acd/% | monetary/$ |\n");
    md.push_str("|---|---|---|---|---|\n");
    for m in &output.reports {
        let r = &m.report;
        writeln!(
            md,
            "| {} | {:.2} | {:.2} | {:.2} | {:.2} |",
            m.method, r.winkler_avg, r.width_avg, r.acd, r.monetary_avg
        )
        .expect("string write");
    }
    md.push_str("\n## Monetary decomposition\n\n");
    md.push_str("| method | monetary/$ | day-ahead/$ | real-time/$ |\n");
    md.push_str("|---|---|---|---|\n");
    for m in &output.reports {
        let r = &m.report;
        writeln!(
            md,
            "| {} | {:.2} | {:.2} | {:.2} |",
            m.method, r.monetary_avg, r.monetary_da_avg, r.monetary_rt_avg
        )
        .expect("string write");
    }
    md.push_str("\n## Accumulative monetary reduction vs proposed\n\n");
    md.push_str("| method | reduction/$ |\n");
    md.push_str("|---|---|\n");
    for row in &output.reductions {
        writeln!(md, "| {} | {:.2} |", row.method, row.accumulative_reduction).expect("string write");
    }
    md
}
