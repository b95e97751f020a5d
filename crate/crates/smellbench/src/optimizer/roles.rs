//! Generator / judge / reflector role interfaces with deterministic mock
//! implementations and a transcript-replay judge for offline reproduction.
//!
//! Live LLM backends are deliberately out of scope; anything implementing
//! these traits plugs into the evolution loop.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{JudgeVerdict, OptimizerError, PromptCandidate, ValidatorReport};
use crate::packet::PlaybookSection;

/// Produces candidate mutations of the current best, seeded with the
/// reflector's feedback digest.
pub trait GeneratorRole {
    fn generate(
        &self,
        base: &PromptCandidate,
        feedback: &str,
        count: usize,
        generation: u32,
    ) -> Vec<PromptCandidate>;
}

/// Scores a candidate on a normalized `[0, 1]` scale with free-text
/// feedback.
pub trait JudgeRole {
    fn judge(&self, candidate: &PromptCandidate) -> Result<JudgeVerdict, OptimizerError>;
}

/// Diagnoses weaknesses of the current best and digests them into feedback
/// for the generator.
pub trait ReflectorRole {
    fn reflect(
        &self,
        best: &PromptCandidate,
        validator: &ValidatorReport,
        judge: &JudgeVerdict,
    ) -> String;
}

/// Content digest of a candidate (playbook and demonstrations, not its id),
/// used to key transcript-replay judging.
pub fn candidate_digest(candidate: &PromptCandidate) -> String {
    let mut hasher = Sha256::new();
    hasher.update(candidate.playbook.full_text().as_bytes());
    for demo in &candidate.demonstrations {
        hasher.update(demo.narrative.as_bytes());
        for step in &demo.evidence_chain {
            hasher.update(step.as_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

fn missing_tokens<'a>(candidate: &PromptCandidate, tokens: &'a [String]) -> Vec<&'a String> {
    let text = candidate.playbook.full_text();
    tokens.iter().filter(|t| !text.contains(t.as_str())).collect()
}

/// Deterministic judge rewarding the presence of a token set: the score is
/// the fraction of tokens present, feedback lists missing ones.
pub struct TokenJudge {
    tokens: Vec<String>,
}

impl TokenJudge {
    pub fn new(tokens: Vec<String>) -> Self {
        Self { tokens }
    }
}

impl JudgeRole for TokenJudge {
    fn judge(&self, candidate: &PromptCandidate) -> Result<JudgeVerdict, OptimizerError> {
        let missing = missing_tokens(candidate, &self.tokens);
        let present = self.tokens.len() - missing.len();
        let feedback = if missing.is_empty() {
            "all required guidance present".to_string()
        } else {
            format!(
                "missing: {}",
                missing
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        };
        Ok(JudgeVerdict {
            score: present as f64 / self.tokens.len().max(1) as f64,
            feedback,
            dimensions: BTreeMap::new(),
        })
    }
}

/// Deterministic reflector that forwards the judge's feedback, prefixed
/// with the static violations.
pub struct EchoReflector;

impl ReflectorRole for EchoReflector {
    fn reflect(
        &self,
        _best: &PromptCandidate,
        validator: &ValidatorReport,
        judge: &JudgeVerdict,
    ) -> String {
        let mut parts: Vec<String> = validator
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.rule_id, v.message))
            .collect();
        parts.push(judge.feedback.clone());
        parts.join("; ")
    }
}

/// Deterministic generator that inserts one missing token per mutation,
/// parsed from the `missing: a, b` feedback digest. When nothing is
/// missing it echoes the base candidate.
pub struct TokenInsertingGenerator;

impl TokenInsertingGenerator {
    fn parse_missing(feedback: &str) -> Vec<String> {
        feedback
            .rsplit("missing:")
            .next()
            .filter(|_| feedback.contains("missing:"))
            .map(|rest| {
                rest.split(',')
                    .map(|t| t.trim().trim_end_matches(';').to_string())
                    .filter(|t| !t.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }
}

impl GeneratorRole for TokenInsertingGenerator {
    fn generate(
        &self,
        base: &PromptCandidate,
        feedback: &str,
        count: usize,
        generation: u32,
    ) -> Vec<PromptCandidate> {
        let missing = Self::parse_missing(feedback);
        (0..count)
            .map(|i| {
                let mut candidate = base.clone();
                candidate.generation = generation;
                candidate.lineage = Some(base.id);
                if let Some(token) = missing.get(i % missing.len().max(1)) {
                    candidate.playbook.sections.push(PlaybookSection {
                        heading: "Refinement".into(),
                        body: token.clone(),
                    });
                }
                candidate
            })
            .collect()
    }
}

/// Generator that returns the base unchanged — the warm-start fixed point.
pub struct EchoGenerator;

impl GeneratorRole for EchoGenerator {
    fn generate(
        &self,
        base: &PromptCandidate,
        _feedback: &str,
        count: usize,
        generation: u32,
    ) -> Vec<PromptCandidate> {
        (0..count)
            .map(|_| {
                let mut candidate = base.clone();
                candidate.generation = generation;
                candidate.lineage = Some(base.id);
                candidate
            })
            .collect()
    }
}

/// Replays recorded judge verdicts keyed by candidate content digest, for
/// offline reproduction of an optimization run.
pub struct TranscriptJudge {
    verdicts: BTreeMap<String, JudgeVerdict>,
}

impl TranscriptJudge {
    pub fn new(verdicts: BTreeMap<String, JudgeVerdict>) -> Self {
        Self { verdicts }
    }
}

impl JudgeRole for TranscriptJudge {
    fn judge(&self, candidate: &PromptCandidate) -> Result<JudgeVerdict, OptimizerError> {
        let digest = candidate_digest(candidate);
        self.verdicts
            .get(&digest)
            .cloned()
            .ok_or(OptimizerError::JudgeFailure {
                candidate_id: candidate.id,
                message: format!("no transcript entry for candidate digest {digest}"),
            })
    }
}
