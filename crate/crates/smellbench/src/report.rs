//! Leaderboard and report emission: CSV/Markdown tables plus the ranking
//! robustness analysis across alternative weighting configurations.
//!
//! All aggregation runs in full precision; rounding (half away from zero,
//! three decimals) happens only at presentation time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{diff_reports, evaluate_run, EffectivenessReport, ScoringError, TaskScore};
use crate::sim::SimulationOutput;
use crate::smell::SmellType;
use crate::stats::{kendall_w, ranks_from_scores, RankTable, StatsError};

/// One leaderboard line; rows sort by weighted effectiveness descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub agent_id: String,
    pub e: f64,
    pub tp: f64,
    pub fp: f64,
    pub partial: f64,
}

/// Everything the report emitter needs: per-agent effectiveness reports,
/// per-task scores, and the per-type resolution counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoredBundle {
    pub reports: Vec<EffectivenessReport>,
    /// agent id -> per-task scores (aligned across agents by task id).
    pub per_task_scores: BTreeMap<String, Vec<TaskScore>>,
    /// agent id -> smell type -> resolved count.
    pub resolved_by_type: BTreeMap<String, BTreeMap<SmellType, usize>>,
    /// smell type -> number of benchmark tasks of that type.
    pub tasks_by_type: BTreeMap<SmellType, usize>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no agent reports to emit")]
    NoReports,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Score agent-run records into a [`ScoredBundle`]. Net impact per agent
/// comes from diffing the pre-fix report against that agent's post-fix
/// report; agents without a post report get a zero net.
pub fn score_records(
    records: &[crate::scoring::AgentRunRecord],
    verdicts: &BTreeMap<String, crate::smell::Verdict>,
    benchmark: &[crate::smell::SmellInstance],
    pre_report: &crate::smell::DetectionReport,
    post_reports: &BTreeMap<String, crate::smell::DetectionReport>,
) -> Result<ScoredBundle, ReportError> {
    let mut bundle = ScoredBundle::default();
    for instance in benchmark {
        *bundle.tasks_by_type.entry(instance.smell_type).or_insert(0) += 1;
    }
    let type_of: BTreeMap<&str, SmellType> = benchmark
        .iter()
        .map(|i| (i.id.as_str(), i.smell_type))
        .collect();
    for record in records {
        let net = post_reports
            .get(&record.agent_id)
            .map(|post| diff_reports(pre_report, post))
            .unwrap_or(crate::scoring::NetImpact {
                resolved: 0,
                introduced: 0,
                net: 0,
                negatives: 0,
            });
        let (report, scores) = evaluate_run(record, verdicts, net)?;
        let mut resolved = BTreeMap::new();
        for task in &record.tasks {
            if task.resolved {
                if let Some(smell_type) = type_of.get(task.task_id.as_str()) {
                    *resolved.entry(*smell_type).or_insert(0) += 1;
                }
            }
        }
        bundle
            .resolved_by_type
            .insert(record.agent_id.clone(), resolved);
        bundle
            .per_task_scores
            .insert(record.agent_id.clone(), scores);
        bundle.reports.push(report);
    }
    Ok(bundle)
}

/// Score every agent in a simulation output into a [`ScoredBundle`].
pub fn score_simulation(output: &SimulationOutput) -> Result<ScoredBundle, ReportError> {
    let records: Vec<crate::scoring::AgentRunRecord> = output
        .agents
        .values()
        .map(|artifacts| artifacts.record.clone())
        .collect();
    let post_reports: BTreeMap<String, crate::smell::DetectionReport> = output
        .agents
        .iter()
        .map(|(agent, artifacts)| (agent.clone(), artifacts.post_report.clone()))
        .collect();
    score_records(
        &records,
        &output.verdicts,
        &output.benchmark,
        &output.pre_report,
        &post_reports,
    )
}

/// Sort reports into leaderboard order: weighted effectiveness descending,
/// ties by true-positive component descending, then agent id.
pub fn emit_leaderboard(reports: &[EffectivenessReport]) -> Vec<LeaderboardRow> {
    let mut sorted: Vec<&EffectivenessReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        b.e.partial_cmp(&a.e)
            .expect("finite scores")
            .then(
                b.components
                    .tp
                    .partial_cmp(&a.components.tp)
                    .expect("finite scores"),
            )
            .then(a.agent_id.cmp(&b.agent_id))
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, report)| LeaderboardRow {
            rank: i + 1,
            agent_id: report.agent_id.clone(),
            e: report.e,
            tp: report.components.tp,
            fp: report.components.fp,
            partial: report.components.partial,
        })
        .collect()
}

/// One ranking-robustness weighting configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightScheme {
    /// Weighted combination of the three expert-category components.
    Components {
        label: String,
        tp: f64,
        fp: f64,
        partial: f64,
    },
    /// Mean of per-task scores over all tasks, bypassing components.
    PerTaskMean,
}

impl WeightScheme {
    pub fn label(&self) -> String {
        match self {
            WeightScheme::Components { label, .. } => label.clone(),
            WeightScheme::PerTaskMean => "unweighted per-task mean".to_string(),
        }
    }
}

/// The seven configurations of the robustness analysis: the primary
/// weights, equal thirds, repair-dominant, repair-only, false-positive-
/// excluded, no-partial, and the unweighted per-task mean.
pub fn default_weight_schemes() -> Vec<WeightScheme> {
    let components = |label: &str, tp: f64, fp: f64, partial: f64| WeightScheme::Components {
        label: label.to_string(),
        tp,
        fp,
        partial,
    };
    vec![
        components("primary 60/20/20", 0.60, 0.20, 0.20),
        components("equal thirds", 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        components("repair-dominant 70/15/15", 0.70, 0.15, 0.15),
        components("repair-only 100/0/0", 1.0, 0.0, 0.0),
        components("false-positive-excluded 50/0/50", 0.50, 0.0, 0.50),
        components("no-partial 50/50/0", 0.50, 0.50, 0.0),
        WeightScheme::PerTaskMean,
    ]
}

fn scheme_score(
    scheme: &WeightScheme,
    report: &EffectivenessReport,
    per_task: &[TaskScore],
) -> f64 {
    match scheme {
        WeightScheme::Components { tp, fp, partial, .. } => {
            tp * report.components.tp
                + fp * report.components.fp
                + partial * report.components.partial
        }
        WeightScheme::PerTaskMean => {
            if per_task.is_empty() {
                0.0
            } else {
                per_task.iter().map(|s| s.s).sum::<f64>() / per_task.len() as f64
            }
        }
    }
}

/// Rankings under every scheme plus Kendall's W over the rank matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessAnalysis {
    pub agent_ids: Vec<String>,
    pub scheme_labels: Vec<String>,
    /// scheme x agent score matrix.
    pub scores: Vec<Vec<f64>>,
    /// scheme x agent rank matrix (rank 1 = best, ties as mid-ranks).
    pub ranks: Vec<Vec<f64>>,
    pub w: f64,
    pub chi2: f64,
    pub df: usize,
}

/// Compute the robustness analysis over the given schemes.
pub fn robustness_analysis(
    bundle: &ScoredBundle,
    schemes: &[WeightScheme],
) -> Result<RobustnessAnalysis, ReportError> {
    if bundle.reports.is_empty() {
        return Err(ReportError::NoReports);
    }
    let mut agent_ids: Vec<String> = bundle.reports.iter().map(|r| r.agent_id.clone()).collect();
    agent_ids.sort();
    let empty = Vec::new();
    let scores: Vec<Vec<f64>> = schemes
        .iter()
        .map(|scheme| {
            agent_ids
                .iter()
                .map(|agent| {
                    let report = bundle
                        .reports
                        .iter()
                        .find(|r| &r.agent_id == agent)
                        .expect("agent id from reports");
                    let per_task = bundle.per_task_scores.get(agent).unwrap_or(&empty);
                    scheme_score(scheme, report, per_task)
                })
                .collect()
        })
        .collect();
    let ranks: Vec<Vec<f64>> = scores.iter().map(|row| ranks_from_scores(row)).collect();
    let table = RankTable::new(ranks.clone())?;
    let result = kendall_w(&table);
    Ok(RobustnessAnalysis {
        agent_ids,
        scheme_labels: schemes.iter().map(WeightScheme::label).collect(),
        scores,
        ranks,
        w: result.w,
        chi2: result.chi2,
        df: result.df,
    })
}

/// Presentation rounding: half away from zero, three decimals.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn fmt3(x: f64) -> String {
    format!("{:.3}", round3(x))
}

fn fmt_opt3(x: Option<f64>) -> String {
    x.map(fmt3).unwrap_or_default()
}

/// Write the report files into `out`: `leaderboard.csv`, `leaderboard.md`
/// (leaderboard plus per-type resolution counts with PIR),
/// `fp_metrics.csv`, `net_impact.csv` (sorted by net delta), and
/// `robustness.md`. Fails before writing anything when there are no
/// reports.
pub fn emit_report(bundle: &ScoredBundle, out: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if bundle.reports.is_empty() {
        return Err(ReportError::NoReports);
    }
    std::fs::create_dir_all(out)?;
    let rows = emit_leaderboard(&bundle.reports);
    let robustness = robustness_analysis(bundle, &default_weight_schemes())?;
    let mut written = Vec::new();

    let mut leaderboard_csv = String::from("rank,agent_id,E,tp,fp,partial\n");
    for row in &rows {
        leaderboard_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.rank,
            row.agent_id,
            fmt3(row.e),
            fmt3(row.tp),
            fmt3(row.fp),
            fmt3(row.partial),
        ));
    }
    written.push(write_file(out, "leaderboard.csv", &leaderboard_csv)?);

    written.push(write_file(
        out,
        "leaderboard.md",
        &leaderboard_markdown(bundle, &rows),
    )?);

    let mut fp_csv = String::from("agent_id,flagged,precision,recall,f1,kappa\n");
    for row in &rows {
        let report = report_of(bundle, &row.agent_id);
        let m = &report.fp_metrics;
        fp_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            report.agent_id,
            m.flagged,
            fmt_opt3(m.precision),
            fmt3(m.recall),
            fmt_opt3(m.f1),
            fmt3(m.kappa),
        ));
    }
    written.push(write_file(out, "fp_metrics.csv", &fp_csv)?);

    let mut by_net: Vec<&EffectivenessReport> = bundle.reports.iter().collect();
    by_net.sort_by(|a, b| b.net.net.cmp(&a.net.net).then(a.agent_id.cmp(&b.agent_id)));
    let mut net_csv = String::from("agent_id,resolved,introduced,net,negatives\n");
    for report in by_net {
        net_csv.push_str(&format!(
            "{},{},{},{:+},{}\n",
            report.agent_id,
            report.net.resolved,
            report.net.introduced,
            report.net.net,
            report.net.negatives,
        ));
    }
    written.push(write_file(out, "net_impact.csv", &net_csv)?);

    written.push(write_file(
        out,
        "robustness.md",
        &robustness_markdown(&robustness),
    )?);
    Ok(written)
}

fn report_of<'a>(bundle: &'a ScoredBundle, agent_id: &str) -> &'a EffectivenessReport {
    bundle
        .reports
        .iter()
        .find(|r| r.agent_id == agent_id)
        .expect("row agent comes from reports")
}

fn write_file(out: &Path, name: &str, contents: &str) -> Result<PathBuf, ReportError> {
    let path = out.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn leaderboard_markdown(bundle: &ScoredBundle, rows: &[LeaderboardRow]) -> String {
    let mut md = String::from("# Leaderboard\n\n");
    md.push_str("| Rank | Agent | E | TP | FP | Partial |\n");
    md.push_str("|---:|---|---:|---:|---:|---:|\n");
    for row in rows {
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            row.rank,
            row.agent_id,
            fmt3(row.e),
            fmt3(row.tp),
            fmt3(row.fp),
            fmt3(row.partial),
        ));
    }

    md.push_str("\n# Resolution by smell type\n\n");
    let types: Vec<SmellType> = bundle.tasks_by_type.keys().copied().collect();
    md.push_str("| Agent |");
    for smell_type in &types {
        md.push_str(&format!(
            " {} ({}) |",
            smell_type, bundle.tasks_by_type[smell_type]
        ));
    }
    md.push_str(" Rate % | PIR % |\n");
    md.push_str("|---|");
    for _ in &types {
        md.push_str("---:|");
    }
    md.push_str("---:|---:|\n");
    let total_tasks: usize = bundle.tasks_by_type.values().sum();
    for row in rows {
        let report = report_of(bundle, &row.agent_id);
        let resolved = bundle
            .resolved_by_type
            .get(&row.agent_id)
            .cloned()
            .unwrap_or_default();
        let resolved_total: usize = resolved.values().sum();
        md.push_str(&format!("| {} |", row.agent_id));
        for smell_type in &types {
            md.push_str(&format!(" {} |", resolved.get(smell_type).unwrap_or(&0)));
        }
        let rate = if total_tasks == 0 {
            0.0
        } else {
            100.0 * resolved_total as f64 / total_tasks as f64
        };
        let pir = report
            .pir
            .map(|p| format!("{:.1}", (p * 1000.0).round() / 10.0))
            .unwrap_or_else(|| "-".to_string());
        md.push_str(&format!(" {rate:.1} | {pir} |\n"));
    }
    md
}

fn robustness_markdown(analysis: &RobustnessAnalysis) -> String {
    let mut md = String::from("# Ranking robustness\n\n");
    md.push_str(&format!(
        "Kendall's W = {:.3} (chi-square = {:.2}, df = {}) across {} weighting configurations.\n\n",
        analysis.w,
        analysis.chi2,
        analysis.df,
        analysis.scheme_labels.len()
    ));
    md.push_str("| Configuration |");
    for agent in &analysis.agent_ids {
        md.push_str(&format!(" {agent} |"));
    }
    md.push('\n');
    md.push_str("|---|");
    for _ in &analysis.agent_ids {
        md.push_str("---:|");
    }
    md.push('\n');
    for (label, ranks) in analysis.scheme_labels.iter().zip(&analysis.ranks) {
        md.push_str(&format!("| {label} |"));
        for rank in ranks {
            if rank.fract() == 0.0 {
                md.push_str(&format!(" {rank:.0} |"));
            } else {
                md.push_str(&format!(" {rank:.1} |"));
            }
        }
        md.push('\n');
    }
    md
}
