//! Domain model for architectural smells: detection reports, difficulty
//! classification, expert verdicts, and benchmark selection.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The seven architectural smell types a detection report may carry.
///
/// Only the first five are benchmark-eligible; hub-like and cyclic
/// dependencies are excluded for lack of instances in the target codebase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmellType {
    ScatteredFunctionality,
    RedundantAbstraction,
    UnstableDependency,
    ImproperApiUsage,
    GodObject,
    HubLikeDependency,
    CyclicDependency,
}

impl SmellType {
    pub const ALL: [SmellType; 7] = [
        SmellType::ScatteredFunctionality,
        SmellType::RedundantAbstraction,
        SmellType::UnstableDependency,
        SmellType::ImproperApiUsage,
        SmellType::GodObject,
        SmellType::HubLikeDependency,
        SmellType::CyclicDependency,
    ];

    /// The five types with enough instances for meaningful evaluation.
    pub const BENCHMARK_ELIGIBLE: [SmellType; 5] = [
        SmellType::ScatteredFunctionality,
        SmellType::RedundantAbstraction,
        SmellType::UnstableDependency,
        SmellType::ImproperApiUsage,
        SmellType::GodObject,
    ];

    pub fn is_benchmark_eligible(self) -> bool {
        Self::BENCHMARK_ELIGIBLE.contains(&self)
    }

    /// Wire identifier, identical to the serde representation.
    pub fn as_str(self) -> &'static str {
        match self {
            SmellType::ScatteredFunctionality => "scattered_functionality",
            SmellType::RedundantAbstraction => "redundant_abstraction",
            SmellType::UnstableDependency => "unstable_dependency",
            SmellType::ImproperApiUsage => "improper_api_usage",
            SmellType::GodObject => "god_object",
            SmellType::HubLikeDependency => "hub_like_dependency",
            SmellType::CyclicDependency => "cyclic_dependency",
        }
    }
}

impl fmt::Display for SmellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The single numeric metric the difficulty scheme reads for an instance.
///
/// Counts are unbounded above; similarity metrics are percentages in
/// `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityMetric {
    pub name: String,
    pub value: f64,
}

impl SeverityMetric {
    /// Similarity metrics are percentages and live in `[0, 100]`.
    pub fn is_similarity(&self) -> bool {
        self.name.to_ascii_lowercase().contains("similarity")
    }
}

/// One detected architectural smell, normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmellInstance {
    pub id: String,
    pub smell_type: SmellType,
    pub name: String,
    pub description: String,
    pub metric: SeverityMetric,
    /// Defaults to `metric.value` when the source report lacks an explicit
    /// severity.
    pub severity: f64,
    pub modules: Vec<String>,
    pub files: Vec<String>,
}

/// A normalized detection report from a smell-detection tool run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub tool_id: String,
    pub codebase_ref: String,
    pub generated_at: String,
    pub instances: Vec<SmellInstance>,
}

/// Difficulty tier, totally ordered `Easy < Medium < Hard`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        })
    }
}

/// Expert verdict category for a detected smell. Ordinal:
/// `FalsePositive < PartiallyValid < TruePositive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FalsePositive,
    PartiallyValid,
    TruePositive,
}

/// One annotator's verdict on one smell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertVerdict {
    pub smell_id: String,
    pub verdict: Verdict,
    pub justification: String,
    pub annotator: String,
}

/// Identity of a smell that survives detector re-runs: the type plus a
/// canonical digest of the module set. Invariant under module-list
/// permutation and duplication, and independent of file lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdentityKey {
    pub smell_type: SmellType,
    pub module_set_digest: String,
}

/// Compute the stable identity key for an instance.
///
/// The digest is the hex SHA-256 of the sorted, deduplicated module list
/// joined with `\n`.
pub fn identity_key(instance: &SmellInstance) -> IdentityKey {
    let modules: BTreeSet<&str> = instance.modules.iter().map(String::as_str).collect();
    let joined = modules.into_iter().collect::<Vec<_>>().join("\n");
    let digest = Sha256::digest(joined.as_bytes());
    IdentityKey {
        smell_type: instance.smell_type,
        module_set_digest: hex::encode(digest),
    }
}

#[derive(Debug, Error)]
pub enum SmellError {
    #[error("malformed detection report: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("instance {id}: metric {name} is negative ({value})")]
    NegativeMetric { id: String, name: String, value: f64 },
    #[error("instance {id}: similarity metric {name} exceeds 100 ({value})")]
    SimilarityOutOfRange { id: String, name: String, value: f64 },
    #[error("instance {id}: severity is negative ({severity})")]
    NegativeSeverity { id: String, severity: f64 },
    #[error("instance {id}: module list is empty")]
    EmptyModules { id: String },
    #[error("duplicate instance id {0}")]
    DuplicateInstanceId(String),
    #[error("smell type {0} is not benchmark-eligible")]
    IneligibleSmellType(SmellType),
    #[error("duplicate verdict for smell {smell_id} by annotator {annotator}")]
    DuplicateVerdict { smell_id: String, annotator: String },
}

// Raw schema as emitted by the detector adapter; `severity` may be absent.
#[derive(Deserialize)]
struct RawInstance {
    id: String,
    smell_type: SmellType,
    name: String,
    description: String,
    metric: SeverityMetric,
    severity: Option<f64>,
    modules: Vec<String>,
    files: Vec<String>,
}

#[derive(Deserialize)]
struct RawReport {
    tool_id: String,
    codebase_ref: String,
    generated_at: String,
    instances: Vec<RawInstance>,
}

/// Parse and normalize a serialized detection report.
///
/// File paths are deduplicated and made repository-relative, a missing
/// severity falls back to the metric value, and instance ids must be unique.
pub fn parse_detection_report(document: &[u8]) -> Result<DetectionReport, SmellError> {
    let raw: RawReport = serde_json::from_slice(document)?;
    let mut seen = BTreeSet::new();
    let mut instances = Vec::with_capacity(raw.instances.len());
    for inst in raw.instances {
        if !seen.insert(inst.id.clone()) {
            return Err(SmellError::DuplicateInstanceId(inst.id));
        }
        if inst.metric.value < 0.0 {
            return Err(SmellError::NegativeMetric {
                id: inst.id,
                name: inst.metric.name,
                value: inst.metric.value,
            });
        }
        if inst.metric.is_similarity() && inst.metric.value > 100.0 {
            return Err(SmellError::SimilarityOutOfRange {
                id: inst.id,
                name: inst.metric.name,
                value: inst.metric.value,
            });
        }
        let severity = inst.severity.unwrap_or(inst.metric.value);
        if severity < 0.0 {
            return Err(SmellError::NegativeSeverity {
                id: inst.id,
                severity,
            });
        }
        if inst.modules.is_empty() {
            return Err(SmellError::EmptyModules { id: inst.id });
        }
        instances.push(SmellInstance {
            id: inst.id,
            smell_type: inst.smell_type,
            name: inst.name,
            description: inst.description,
            metric: inst.metric,
            severity,
            modules: inst.modules,
            files: normalize_files(&inst.files),
        });
    }
    Ok(DetectionReport {
        tool_id: raw.tool_id,
        codebase_ref: raw.codebase_ref,
        generated_at: raw.generated_at,
        instances,
    })
}

/// Strip absolute and `./` prefixes and drop duplicates, preserving first
/// occurrence order.
fn normalize_files(files: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for file in files {
        let mut path = file.as_str();
        loop {
            if let Some(rest) = path.strip_prefix("./") {
                path = rest;
            } else if let Some(rest) = path.strip_prefix('/') {
                path = rest;
            } else {
                break;
            }
        }
        if !path.is_empty() && seen.insert(path.to_string()) {
            out.push(path.to_string());
        }
    }
    out
}

/// Parse a verdict file: a JSON array of expert verdicts, at most one per
/// `(smell_id, annotator)` pair.
pub fn parse_verdicts(document: &[u8]) -> Result<Vec<ExpertVerdict>, SmellError> {
    let verdicts: Vec<ExpertVerdict> = serde_json::from_slice(document)?;
    let mut seen = BTreeSet::new();
    for v in &verdicts {
        if !seen.insert((v.smell_id.clone(), v.annotator.clone())) {
            return Err(SmellError::DuplicateVerdict {
                smell_id: v.smell_id.clone(),
                annotator: v.annotator.clone(),
            });
        }
    }
    Ok(verdicts)
}

/// Difficulty thresholds per smell type: the tier is `Hard` at or above
/// `hard_lo`, `Medium` at or above `medium_lo`, `Easy` below.
///
/// | type                     | metric           | easy   | medium  | hard  |
/// |--------------------------|------------------|--------|---------|-------|
/// | scattered functionality  | # modules        | <=4    | 5-7     | >=8   |
/// | redundant abstraction    | similarity %     | <70    | 70-89   | >=90  |
/// | unstable dependency      | outgoing deps    | <=8    | 9-19    | >=20  |
/// | improper API usage       | total repeats    | <=40   | 41-129  | >=130 |
/// | god object               | public functions | <=40   | 41-59   | >=60  |
fn tier_thresholds(smell_type: SmellType) -> Option<(f64, f64)> {
    match smell_type {
        SmellType::ScatteredFunctionality => Some((5.0, 8.0)),
        SmellType::RedundantAbstraction => Some((70.0, 90.0)),
        SmellType::UnstableDependency => Some((9.0, 20.0)),
        SmellType::ImproperApiUsage => Some((41.0, 130.0)),
        SmellType::GodObject => Some((41.0, 60.0)),
        SmellType::HubLikeDependency | SmellType::CyclicDependency => None,
    }
}

/// Classify a benchmark-eligible smell into its difficulty tier.
pub fn classify_difficulty(
    smell_type: SmellType,
    metric_value: f64,
) -> Result<Difficulty, SmellError> {
    let (medium_lo, hard_lo) =
        tier_thresholds(smell_type).ok_or(SmellError::IneligibleSmellType(smell_type))?;
    Ok(if metric_value >= hard_lo {
        Difficulty::Hard
    } else if metric_value >= medium_lo {
        Difficulty::Medium
    } else {
        Difficulty::Easy
    })
}

/// Select the benchmark slice of a report: instances whose type is allowed
/// (and benchmark-eligible) and whose difficulty matches `tier`, in stable
/// id order.
pub fn select_benchmark(
    report: &DetectionReport,
    tier: Difficulty,
    allowed_types: &BTreeSet<SmellType>,
) -> Vec<SmellInstance> {
    let mut selected: Vec<SmellInstance> = report
        .instances
        .iter()
        .filter(|inst| {
            inst.smell_type.is_benchmark_eligible()
                && allowed_types.contains(&inst.smell_type)
                && classify_difficulty(inst.smell_type, inst.metric.value)
                    .is_ok_and(|t| t == tier)
        })
        .cloned()
        .collect();
    selected.sort_by(|a, b| a.id.cmp(&b.id));
    selected
}
