//! Rule-based static validation of prompt candidates.
//!
//! Eight deterministic structural checks, equally weighted. The command and
//! caution denylists are configurable; the shipped defaults are engineering
//! choices, not fixed by the methodology.

use serde::{Deserialize, Serialize};

use super::PromptCandidate;

/// Outcome of the static check: `score = rules passed / rules total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatorReport {
    pub score: f64,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatorConfig {
    /// Overly broad test-command patterns the playbook must not suggest.
    pub test_command_denylist: Vec<String>,
    /// Vague caution phrases that dilute the instructions.
    pub vague_phrase_denylist: Vec<String>,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        Self {
            test_command_denylist: vec![
                "run the full test suite".into(),
                "run all tests".into(),
                "run every test".into(),
                "make test-all".into(),
            ],
            vague_phrase_denylist: vec![
                "be careful".into(),
                "use caution".into(),
                "as appropriate".into(),
                "where applicable".into(),
            ],
        }
    }
}

pub const RULE_COUNT: usize = 8;

/// Evaluate the rule set against a candidate.
///
/// Rules over the playbook text: (1) explicit baseline-and-final metric
/// evidence requirement, (2) all four terminal status labels, (3) an
/// anti-loop rule for Need More Work, (4) continuation logic for resumed
/// tasks, (5) no denylisted test commands, (6) no denylisted caution
/// phrases. Rules over the demonstrations: (7) exactly three, (8) each with
/// a non-empty evidence chain.
pub fn static_validate(candidate: &PromptCandidate, config: &ValidatorConfig) -> ValidatorReport {
    let text = candidate.playbook.full_text().to_lowercase();
    let mut violations = Vec::new();
    let mut check = |ok: bool, rule_id: &str, message: &str| {
        if !ok {
            violations.push(Violation {
                rule_id: rule_id.to_string(),
                message: message.to_string(),
            });
        }
    };

    check(
        text.contains("baseline") && text.contains("final"),
        "evidence-metrics",
        "playbook must require baseline and final metric evidence",
    );
    let statuses = ["done", "accepted", "need more work", "blocked"];
    check(
        statuses.iter().all(|s| text.contains(s)),
        "status-labels",
        "playbook must name all terminal statuses with their gating conditions",
    );
    check(
        text.contains("anti-loop"),
        "anti-loop",
        "playbook must carry an anti-loop rule for need more work",
    );
    check(
        text.contains("continuation") || text.contains("resume"),
        "continuation",
        "playbook must explain how to continue a resumed task",
    );
    let broad_command = config
        .test_command_denylist
        .iter()
        .find(|p| text.contains(&p.to_lowercase()));
    check(
        broad_command.is_none(),
        "broad-test-command",
        &broad_command
            .map(|p| format!("playbook suggests an overly broad test command: {p:?}"))
            .unwrap_or_default(),
    );
    let vague = config
        .vague_phrase_denylist
        .iter()
        .find(|p| text.contains(&p.to_lowercase()));
    check(
        vague.is_none(),
        "vague-caution",
        &vague
            .map(|p| format!("playbook uses vague caution language: {p:?}"))
            .unwrap_or_default(),
    );
    check(
        candidate.demonstrations.len() == 3,
        "demo-count",
        &format!(
            "expected exactly 3 demonstrations, found {}",
            candidate.demonstrations.len()
        ),
    );
    check(
        candidate
            .demonstrations
            .iter()
            .all(|d| !d.evidence_chain.is_empty()),
        "demo-evidence",
        "every demonstration needs a non-empty evidence chain",
    );

    ValidatorReport {
        score: (RULE_COUNT - violations.len()) as f64 / RULE_COUNT as f64,
        violations,
    }
}
