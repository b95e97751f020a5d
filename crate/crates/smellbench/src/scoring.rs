//! Evaluation methodology: per-task scores, component averaging, weighted
//! effectiveness, false-positive identification metrics, flag patterns,
//! partial improvement rate, and net-impact diffing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smell::{identity_key, DetectionReport, IdentityKey, SmellInstance, Verdict};
use crate::stats::{cohen_kappa, OrdinalScale, Weighting};
use crate::store::{HistoryEntry, TerminalStatus};

/// What the agent did with a task: attempted a repair, or flagged the
/// detection as a false positive (terminal status Accepted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentAction {
    AttemptedFix,
    FlaggedFalsePositive,
}

/// Objective outcome of a repair attempt, read from detector report deltas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepairOutcome {
    Resolved { sev_old: f64 },
    Improved { sev_old: f64, sev_new: f64 },
    Unchanged { sev_old: f64, sev_new: f64 },
    Worsened { sev_old: f64, sev_new: f64 },
}

impl RepairOutcome {
    /// Classify from severities. `None` for the new severity means the
    /// instance vanished from the post-fix report.
    pub fn from_severities(sev_old: f64, sev_new: Option<f64>) -> Result<Self, ScoringError> {
        if sev_old <= 0.0 {
            return Err(ScoringError::NonPositiveBaseline(sev_old));
        }
        Ok(match sev_new {
            None => RepairOutcome::Resolved { sev_old },
            Some(new) if new < sev_old => RepairOutcome::Improved {
                sev_old,
                sev_new: new,
            },
            Some(new) if new > sev_old => RepairOutcome::Worsened {
                sev_old,
                sev_new: new,
            },
            Some(new) => RepairOutcome::Unchanged {
                sev_old,
                sev_new: new,
            },
        })
    }

    pub fn is_resolved(&self) -> bool {
        matches!(self, RepairOutcome::Resolved { .. })
    }
}

/// Per-task score in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub s: f64,
    pub action: AgentAction,
}

/// Mean per-task score within each expert category, with category counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub tp: f64,
    pub fp: f64,
    pub partial: f64,
    pub counts: (usize, usize, usize),
}

/// False-positive identification metrics.
///
/// Precision and F1 are absent when the agent flagged nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpMetrics {
    pub flagged: usize,
    pub precision: Option<f64>,
    pub recall: f64,
    pub f1: Option<f64>,
    pub kappa: f64,
}

/// Net codebase impact: smells that disappeared minus smells that appeared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetImpact {
    pub resolved: usize,
    pub introduced: usize,
    pub net: i64,
    /// Tasks with strictly negative per-task scores.
    pub negatives: usize,
}

/// How a false-positive claim was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagPattern {
    /// Concluded false positive without any code changes along the way.
    PureFlag,
    /// Made code changes before concluding false positive.
    PartialFixFlag,
    /// Iterated through NeedMoreWork (changing nothing) before concluding.
    InvestigatedFlag,
}

/// Per-agent evaluation rollup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivenessReport {
    pub agent_id: String,
    pub components: ComponentScores,
    pub e: f64,
    pub fp_metrics: FpMetrics,
    pub net: NetImpact,
    pub pir: Option<f64>,
}

/// One scored task in an agent-run record (the scoring input format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcomeRecord {
    pub task_id: String,
    pub action: AgentAction,
    pub sev_old: f64,
    pub sev_new: Option<f64>,
    pub resolved: bool,
    pub claimed_fp: bool,
}

/// A full agent run over the benchmark, ready for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRunRecord {
    pub agent_id: String,
    pub tasks: Vec<TaskOutcomeRecord>,
}

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("baseline severity must be positive (got {0})")]
    NonPositiveBaseline(f64),
    #[error("{count} post-fix instances share the identity key of {target_id}; manual mapping required")]
    AmbiguousMatch { target_id: String, count: usize },
    #[error("task {0} has no expert verdict")]
    MissingVerdict(String),
    #[error("attempted-fix score requires a repair outcome")]
    MissingOutcome,
    #[error("flagged-false-positive score requires an expert verdict")]
    MissingFlagVerdict,
    #[error("task {0}: flag-pattern history must end in accepted")]
    HistoryNotAccepted(String),
    #[error("claimed task {0} is outside the scoring scope")]
    ClaimOutsideScope(String),
}

/// Severity-proportional score: `s = -(sev_new - sev_old) / sev_old`,
/// clamped to `[-1, 1]`. Positive iff severity decreased.
pub fn severity_score(sev_old: f64, sev_new: f64) -> Result<f64, ScoringError> {
    if sev_old <= 0.0 {
        return Err(ScoringError::NonPositiveBaseline(sev_old));
    }
    let delta = sev_new - sev_old;
    Ok((-delta / sev_old).clamp(-1.0, 1.0))
}

/// Derive the scored action from a task's final terminal status.
///
/// Accepted means the agent flagged a false positive; everything else is
/// treated as a fix attempt (Blocked scores as an unchanged attempt).
pub fn action_for_status(status: TerminalStatus) -> AgentAction {
    match status {
        TerminalStatus::Accepted => AgentAction::FlaggedFalsePositive,
        TerminalStatus::Done | TerminalStatus::NeedMoreWork | TerminalStatus::Blocked => {
            AgentAction::AttemptedFix
        }
    }
}

/// Classify the repair outcome for a pre-report instance against the
/// post-fix report. Matching prefers the stable instance id and falls back
/// to the identity key; multiple key matches are ambiguous.
pub fn classify_repair_outcome(
    target: &SmellInstance,
    post: &DetectionReport,
) -> Result<RepairOutcome, ScoringError> {
    if let Some(matched) = post.instances.iter().find(|i| i.id == target.id) {
        return RepairOutcome::from_severities(target.severity, Some(matched.severity));
    }
    let key = identity_key(target);
    let matches: Vec<&SmellInstance> = post
        .instances
        .iter()
        .filter(|i| identity_key(i) == key)
        .collect();
    match matches.len() {
        0 => RepairOutcome::from_severities(target.severity, None),
        1 => RepairOutcome::from_severities(target.severity, Some(matches[0].severity)),
        count => Err(ScoringError::AmbiguousMatch {
            target_id: target.id.clone(),
            count,
        }),
    }
}

/// The per-task scoring function.
///
/// Attempted fixes score 1.0 when resolved and the severity-proportional
/// score otherwise. False-positive flags score +1 / 0 / -1 against the
/// expert verdict (FP / partially valid / TP).
pub fn score_task(
    task_id: &str,
    action: AgentAction,
    outcome: Option<&RepairOutcome>,
    verdict: Option<Verdict>,
) -> Result<TaskScore, ScoringError> {
    let s = match action {
        AgentAction::AttemptedFix => match outcome.ok_or(ScoringError::MissingOutcome)? {
            RepairOutcome::Resolved { .. } => 1.0,
            RepairOutcome::Improved { sev_old, sev_new }
            | RepairOutcome::Unchanged { sev_old, sev_new }
            | RepairOutcome::Worsened { sev_old, sev_new } => {
                severity_score(*sev_old, *sev_new)?
            }
        },
        AgentAction::FlaggedFalsePositive => {
            match verdict.ok_or(ScoringError::MissingFlagVerdict)? {
                Verdict::FalsePositive => 1.0,
                Verdict::PartiallyValid => 0.0,
                Verdict::TruePositive => -1.0,
            }
        }
    };
    Ok(TaskScore {
        task_id: task_id.to_string(),
        s,
        action,
    })
}

/// Average per-task scores within each expert category. An empty category
/// contributes component 0 with count 0. Every scored task must have a
/// verdict.
pub fn component_scores(
    scores: &[TaskScore],
    verdicts: &BTreeMap<String, Verdict>,
) -> Result<ComponentScores, ScoringError> {
    let mut sums = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for score in scores {
        let verdict = verdicts
            .get(&score.task_id)
            .ok_or_else(|| ScoringError::MissingVerdict(score.task_id.clone()))?;
        *sums.entry(*verdict).or_insert(0.0) += score.s;
        *counts.entry(*verdict).or_insert(0usize) += 1;
    }
    let mean = |v: Verdict| {
        let n = counts.get(&v).copied().unwrap_or(0);
        if n == 0 {
            0.0
        } else {
            sums[&v] / n as f64
        }
    };
    Ok(ComponentScores {
        tp: mean(Verdict::TruePositive),
        fp: mean(Verdict::FalsePositive),
        partial: mean(Verdict::PartiallyValid),
        counts: (
            counts.get(&Verdict::TruePositive).copied().unwrap_or(0),
            counts.get(&Verdict::FalsePositive).copied().unwrap_or(0),
            counts.get(&Verdict::PartiallyValid).copied().unwrap_or(0),
        ),
    })
}

/// Weighted effectiveness: `E = 0.60*TP + 0.20*FP + 0.20*Partial`.
pub fn weighted_effectiveness(c: &ComponentScores) -> f64 {
    0.60 * c.tp + 0.20 * c.fp + 0.20 * c.partial
}

/// False-positive identification metrics over the claim set.
///
/// Precision credits confirmed false positives fully and partially valid
/// claims at 0.5. Recall is measured against the expert false positives.
/// Kappa is unweighted Cohen's kappa of the binary classifications
/// restricted to the unambiguous FP/TP subset.
pub fn fp_metrics(
    claims: &BTreeSet<String>,
    verdicts: &BTreeMap<String, Verdict>,
    scope: &[String],
) -> Result<FpMetrics, ScoringError> {
    for claim in claims {
        if !scope.contains(claim) {
            return Err(ScoringError::ClaimOutsideScope(claim.clone()));
        }
    }
    let flagged = claims.len();
    let expert_fp: BTreeSet<&String> = scope
        .iter()
        .filter(|id| verdicts.get(*id) == Some(&Verdict::FalsePositive))
        .collect();

    let precision = if flagged == 0 {
        None
    } else {
        let credit: f64 = claims
            .iter()
            .map(|id| match verdicts.get(id) {
                Some(Verdict::FalsePositive) => 1.0,
                Some(Verdict::PartiallyValid) => 0.5,
                _ => 0.0,
            })
            .sum();
        Some(credit / flagged as f64)
    };
    let recall = if expert_fp.is_empty() {
        0.0
    } else {
        claims.iter().filter(|id| expert_fp.contains(id)).count() as f64 / expert_fp.len() as f64
    };
    let f1 = precision.map(|p| {
        if p + recall == 0.0 {
            0.0
        } else {
            2.0 * p * recall / (p + recall)
        }
    });

    // binary agreement on the unambiguous subset
    let binary = OrdinalScale::new(vec!["not_fp".into(), "fp".into()]).expect("two categories");
    let mut agent = Vec::new();
    let mut expert = Vec::new();
    for id in scope {
        match verdicts.get(id) {
            Some(Verdict::FalsePositive) => {
                agent.push(usize::from(claims.contains(id)));
                expert.push(1);
            }
            Some(Verdict::TruePositive) => {
                agent.push(usize::from(claims.contains(id)));
                expert.push(0);
            }
            _ => {}
        }
    }
    let kappa = if agent.is_empty() {
        0.0
    } else {
        cohen_kappa(&agent, &expert, Weighting::None, &binary)
            .expect("aligned binary ratings")
            .value
    };

    Ok(FpMetrics {
        flagged,
        precision,
        recall,
        f1,
        kappa,
    })
}

/// Classify how each false-positive claim was reached, from the task
/// histories of claimed tasks. Each history must end in Accepted.
pub fn flag_patterns(
    claim_histories: &BTreeMap<String, Vec<HistoryEntry>>,
) -> Result<BTreeMap<FlagPattern, usize>, ScoringError> {
    let mut counts = BTreeMap::new();
    for (task_id, history) in claim_histories {
        let ends_accepted = history
            .last()
            .is_some_and(|e| e.report.status == TerminalStatus::Accepted);
        if !ends_accepted {
            return Err(ScoringError::HistoryNotAccepted(task_id.clone()));
        }
        let any_changed_files = history.iter().any(|e| !e.report.changed_files.is_empty());
        let pattern = if any_changed_files {
            FlagPattern::PartialFixFlag
        } else if history.len() > 1 {
            FlagPattern::InvestigatedFlag
        } else {
            FlagPattern::PureFlag
        };
        *counts.entry(pattern).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Share of attempted-but-unresolved smells whose severity decreased.
/// Absent when every attempt resolved (empty denominator).
pub fn partial_improvement_rate(outcomes: &[RepairOutcome]) -> Option<f64> {
    let unresolved: Vec<&RepairOutcome> =
        outcomes.iter().filter(|o| !o.is_resolved()).collect();
    if unresolved.is_empty() {
        return None;
    }
    let improved = unresolved
        .iter()
        .filter(|o| matches!(o, RepairOutcome::Improved { .. }))
        .count();
    Some(improved as f64 / unresolved.len() as f64)
}

/// Net smell delta between two reports over the same codebase, keyed by
/// [`IdentityKey`]: `resolved = |pre \ post|`, `introduced = |post \ pre|`,
/// `net = resolved - introduced`. `negatives` is left at zero; callers with
/// per-task scores fill it in.
pub fn diff_reports(pre: &DetectionReport, post: &DetectionReport) -> NetImpact {
    let pre_keys: BTreeSet<IdentityKey> = pre.instances.iter().map(identity_key).collect();
    let post_keys: BTreeSet<IdentityKey> = post.instances.iter().map(identity_key).collect();
    let resolved = pre_keys.difference(&post_keys).count();
    let introduced = post_keys.difference(&pre_keys).count();
    NetImpact {
        resolved,
        introduced,
        net: resolved as i64 - introduced as i64,
        negatives: 0,
    }
}

/// Score a single task from its run record.
pub fn score_record_task(
    record: &TaskOutcomeRecord,
    verdicts: &BTreeMap<String, Verdict>,
) -> Result<(TaskScore, Option<RepairOutcome>), ScoringError> {
    if record.claimed_fp {
        let verdict = verdicts
            .get(&record.task_id)
            .copied()
            .ok_or_else(|| ScoringError::MissingVerdict(record.task_id.clone()))?;
        let score = score_task(
            &record.task_id,
            AgentAction::FlaggedFalsePositive,
            None,
            Some(verdict),
        )?;
        Ok((score, None))
    } else {
        let sev_new = if record.resolved {
            None
        } else {
            // a blocked or metric-free attempt counts as unchanged
            Some(record.sev_new.unwrap_or(record.sev_old))
        };
        let outcome = RepairOutcome::from_severities(record.sev_old, sev_new)?;
        let score = score_task(
            &record.task_id,
            AgentAction::AttemptedFix,
            Some(&outcome),
            None,
        )?;
        Ok((score, Some(outcome)))
    }
}

/// Full per-agent evaluation of a run record: per-task scores, component
/// averages, weighted effectiveness, FP metrics, PIR, and net impact (with
/// the negative-score count filled in).
pub fn evaluate_run(
    record: &AgentRunRecord,
    verdicts: &BTreeMap<String, Verdict>,
    net: NetImpact,
) -> Result<(EffectivenessReport, Vec<TaskScore>), ScoringError> {
    let mut scores = Vec::with_capacity(record.tasks.len());
    let mut outcomes = Vec::new();
    let mut claims = BTreeSet::new();
    for task in &record.tasks {
        let (score, outcome) = score_record_task(task, verdicts)?;
        if task.claimed_fp {
            claims.insert(task.task_id.clone());
        }
        if let Some(outcome) = outcome {
            outcomes.push(outcome);
        }
        scores.push(score);
    }
    let components = component_scores(&scores, verdicts)?;
    let scope: Vec<String> = record.tasks.iter().map(|t| t.task_id.clone()).collect();
    let fp = fp_metrics(&claims, verdicts, &scope)?;
    let negatives = scores.iter().filter(|s| s.s < 0.0).count();
    let report = EffectivenessReport {
        agent_id: record.agent_id.clone(),
        e: weighted_effectiveness(&components),
        components,
        fp_metrics: fp,
        net: NetImpact { negatives, ..net },
        pir: partial_improvement_rate(&outcomes),
    };
    Ok((report, scores))
}
