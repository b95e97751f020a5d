//! Reflective playbook evolution: a warm-start template is mutated by a
//! generator role, scored by a rule-based static validator (30%) combined
//! with a judge role (70%), and steered by a reflector role's feedback.

mod roles;
mod validator;

pub use roles::{
    candidate_digest, EchoGenerator, EchoReflector, GeneratorRole, JudgeRole, ReflectorRole,
    TokenInsertingGenerator, TokenJudge, TranscriptJudge,
};
pub use validator::{static_validate, ValidatorConfig, ValidatorReport, Violation, RULE_COUNT};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::{validate_demonstrations, Demonstration, Playbook};
use crate::smell::SmellType;

/// Train share of the example split; the remainder validates.
pub const TRAIN_SPLIT_RATIO: f64 = 0.7;

/// Static score below which a candidate is filtered before judging.
pub const DEFAULT_STATIC_FLOOR: f64 = 0.5;

/// Weight of the static validator in the compound score; the judge carries
/// the rest.
pub const STATIC_WEIGHT: f64 = 0.3;
pub const JUDGE_WEIGHT: f64 = 0.7;

/// A playbook-plus-demonstrations candidate in the evolutionary search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCandidate {
    pub id: u64,
    pub smell_type: SmellType,
    pub playbook: Playbook,
    pub demonstrations: Vec<Demonstration>,
    pub lineage: Option<u64>,
    pub generation: u32,
}

/// A judge's normalized score and free-text feedback. The five-dimension
/// rubric (goal alignment, execution quality, status discipline, demo
/// quality, output discipline) travels as metadata when the judge reports
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub score: f64,
    pub feedback: String,
    #[serde(default)]
    pub dimensions: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub generations: u32,
    pub candidates_per_generation: u32,
}

/// Structural constraints the generated playbooks must satisfy; carried in
/// the config for role implementations that want them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub required_sections: Vec<String>,
}

/// A training example sampled from the easy/medium difficulty tiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingItem {
    pub id: String,
    pub smell_type: SmellType,
    pub description: String,
}

pub struct OptimizerConfig {
    pub baseline_template: PromptCandidate,
    pub status_policy: String,
    pub output_schema: OutputSchema,
    pub examples: Vec<TrainingItem>,
    pub budget: Budget,
    pub seed: u64,
    pub static_floor: f64,
    pub validator: ValidatorConfig,
}

impl OptimizerConfig {
    pub fn new(baseline_template: PromptCandidate, budget: Budget, seed: u64) -> Self {
        Self {
            baseline_template,
            status_policy: String::new(),
            output_schema: OutputSchema::default(),
            examples: Vec::new(),
            budget,
            seed,
            static_floor: DEFAULT_STATIC_FLOOR,
            validator: ValidatorConfig::default(),
        }
    }
}

/// The light preset: a small budget that favors quick convergence.
pub fn light_budget() -> Budget {
    Budget {
        generations: 4,
        candidates_per_generation: 4,
    }
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("need at least 2 examples to split, got {0}")]
    TooFewExamples(usize),
    #[error("generation {generation} produced zero candidates")]
    NoCandidates { generation: u32 },
    #[error("judge failed on candidate {candidate_id}: {message}")]
    JudgeFailure { candidate_id: u64, message: String },
    #[error("baseline template is structurally invalid: {0}")]
    InvalidBaseline(#[from] crate::packet::PacketError),
}

/// One scored (or filtered) candidate in the optimization log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub generation: u32,
    pub candidate_id: u64,
    #[serde(rename = "static")]
    pub static_score: f64,
    /// Absent when the candidate was filtered before judging.
    pub judge: Option<f64>,
    pub compound: Option<f64>,
}

/// Deterministic train/validation split: shuffle under the seed, then take
/// `round(ratio * n)` for training and the remainder for validation.
pub fn split_examples<T: Clone>(
    examples: &[T],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), OptimizerError> {
    if examples.len() < 2 {
        return Err(OptimizerError::TooFewExamples(examples.len()));
    }
    let mut shuffled: Vec<T> = examples.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let train_len = (ratio * examples.len() as f64).round() as usize;
    let train_len = train_len.clamp(1, examples.len() - 1);
    let validation = shuffled.split_off(train_len);
    Ok((shuffled, validation))
}

/// Compound proxy score: 30% static validator, 70% judge.
pub fn compound_score(
    candidate: &PromptCandidate,
    judge_role: &dyn JudgeRole,
    config: &ValidatorConfig,
) -> Result<f64, OptimizerError> {
    let static_score = static_validate(candidate, config).score;
    let verdict = judge_role.judge(candidate)?;
    Ok(STATIC_WEIGHT * static_score + JUDGE_WEIGHT * verdict.score)
}

/// Result of an evolution run: the best candidate and the full scored
/// lineage.
pub struct EvolveOutcome {
    pub best: PromptCandidate,
    pub best_score: f64,
    pub history: Vec<ScoredCandidate>,
}

/// Run the evolutionary loop.
///
/// Each generation mutates the reigning best via the generator (seeded with
/// the reflector's feedback digest), filters structurally invalid and
/// static-floor failures before judging, scores the rest, and keeps the
/// argmax with ties broken toward the lowest candidate id. Elitism makes
/// the best score non-decreasing.
pub fn evolve(
    config: &OptimizerConfig,
    generator: &dyn GeneratorRole,
    judge: &dyn JudgeRole,
    reflector: &dyn ReflectorRole,
) -> Result<EvolveOutcome, OptimizerError> {
    let mut next_id = 1u64;
    let mut best = config.baseline_template.clone();
    best.id = 0;
    validate_demonstrations(best.smell_type, &best.demonstrations)?;

    let mut best_validator = static_validate(&best, &config.validator);
    let mut best_verdict = judge.judge(&best)?;
    let mut best_score = STATIC_WEIGHT * best_validator.score + JUDGE_WEIGHT * best_verdict.score;
    let mut history = vec![ScoredCandidate {
        generation: 0,
        candidate_id: best.id,
        static_score: best_validator.score,
        judge: Some(best_verdict.score),
        compound: Some(best_score),
    }];

    for generation in 1..=config.budget.generations {
        let feedback = reflector.reflect(&best, &best_validator, &best_verdict);
        let mut candidates = generator.generate(
            &best,
            &feedback,
            config.budget.candidates_per_generation as usize,
            generation,
        );
        if candidates.is_empty() {
            return Err(OptimizerError::NoCandidates { generation });
        }
        for candidate in &mut candidates {
            candidate.id = next_id;
            next_id += 1;
            candidate.generation = generation;
        }
        for candidate in &candidates {
            let validator_report = static_validate(candidate, &config.validator);
            let structurally_valid =
                validate_demonstrations(candidate.smell_type, &candidate.demonstrations).is_ok();
            if !structurally_valid || validator_report.score < config.static_floor {
                history.push(ScoredCandidate {
                    generation,
                    candidate_id: candidate.id,
                    static_score: validator_report.score,
                    judge: None,
                    compound: None,
                });
                continue;
            }
            let verdict = judge.judge(candidate)?;
            let compound =
                STATIC_WEIGHT * validator_report.score + JUDGE_WEIGHT * verdict.score;
            history.push(ScoredCandidate {
                generation,
                candidate_id: candidate.id,
                static_score: validator_report.score,
                judge: Some(verdict.score),
                compound: Some(compound),
            });
            // elitism with lowest-id tie-break: the incumbent has the
            // lowest id, so only a strictly better candidate displaces it
            if compound > best_score {
                best = candidate.clone();
                best_score = compound;
                best_validator = validator_report;
                best_verdict = verdict;
            }
        }
    }
    Ok(EvolveOutcome {
        best,
        best_score,
        history,
    })
}

/// Hand-authored warm-start template for a smell type: a structured
/// playbook plus one demonstration per terminal status. Passes every
/// static-validator rule so evolution starts from a sound floor.
pub fn baseline_candidate(smell_type: SmellType) -> PromptCandidate {
    use crate::packet::{DemoStatus, PlaybookSection};

    let goal = match smell_type {
        SmellType::ScatteredFunctionality => {
            "Consolidate the scattered functionality into a coherent owner module and shrink \
             the module count metric."
        }
        SmellType::RedundantAbstraction => {
            "Merge or remove the redundant abstraction so the similarity metric drops below \
             the detection threshold."
        }
        SmellType::UnstableDependency => {
            "Restructure imports so the module depends on stable base modules, reducing the \
             outgoing dependency count."
        }
        SmellType::ImproperApiUsage => {
            "Introduce a thin wrapper for the repeated call pattern and migrate call sites, \
             reducing the repeat count."
        }
        SmellType::GodObject => {
            "Split responsibilities out of the oversized object until the public function \
             count falls."
        }
        SmellType::HubLikeDependency | SmellType::CyclicDependency => {
            "Reduce the dependency structure metric."
        }
    };
    let playbook = Playbook {
        smell_type,
        sections: vec![
            PlaybookSection {
                heading: "Goal".into(),
                body: goal.into(),
            },
            PlaybookSection {
                heading: "Procedure".into(),
                body: "Measure the baseline metric first. Apply one focused refactoring at a \
                       time, re-measure, and stop when the final metric cannot be reduced \
                       further. Validate only the modules you touched."
                    .into(),
            },
            PlaybookSection {
                heading: "Status policy".into(),
                body: "Done requires baseline and final metric values with a stopping \
                       rationale. Accepted requires evidence that the detection is an \
                       intentional design and every probe reverted. Need More Work requires \
                       one completed mini-task plus explicit next steps. Blocked requires \
                       naming the external blocker."
                    .into(),
            },
            PlaybookSection {
                heading: "Anti-loop rules".into(),
                body: "anti-loop: never report Need More Work twice with the same next-steps \
                       list; each iteration must complete a mini-task and shrink the list, \
                       otherwise choose Done or Accepted on the evidence gathered."
                    .into(),
            },
            PlaybookSection {
                heading: "Continuation".into(),
                body: "On continuation, resume from the previous summary and changed files \
                       instead of restarting the analysis."
                    .into(),
            },
        ],
    };
    let demonstrations = vec![
        Demonstration {
            terminal_status: DemoStatus::Done,
            narrative: "Measured the baseline, moved the shared helpers, re-measured, and \
                        reported the reduced final metric."
                .into(),
            evidence_chain: vec![
                "baseline metric recorded before any edit".into(),
                "each move validated by importing the touched modules".into(),
                "final metric re-measured after the last edit".into(),
            ],
        },
        Demonstration {
            terminal_status: DemoStatus::Accepted,
            narrative: "Probed a consolidation, found the pattern is a deliberate facade, \
                        reverted every change, and flagged the detection."
                .into(),
            evidence_chain: vec![
                "baseline measurement shows the metric cannot drop without breaking the \
                 public API"
                    .into(),
                "working tree verified clean after revert".into(),
            ],
        },
        Demonstration {
            terminal_status: DemoStatus::NeedMoreWork,
            narrative: "Completed the first mini-task of the plan and handed back a shrinking \
                        list of concrete next steps."
                .into(),
            evidence_chain: vec![
                "mini-task one finished and validated".into(),
                "remaining steps enumerated explicitly".into(),
            ],
        },
    ];
    PromptCandidate {
        id: 0,
        smell_type,
        playbook,
        demonstrations,
        lineage: None,
        generation: 0,
    }
}

/// Serialize an optimization log as newline-delimited JSON.
pub fn history_to_ndjson(history: &[ScoredCandidate]) -> String {
    history
        .iter()
        .map(|record| {
            crate::canonical::to_canonical_string(record).expect("history record serializes")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
