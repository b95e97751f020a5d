//! Task packet assembly: the per-iteration context bundle served to an
//! agent — smell data, the smell-type playbook, three demonstrations, and
//! (on resumed tasks) the continuation context.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::to_canonical_string;
use crate::smell::{SmellInstance, SmellType};
use crate::store::{TaskRecord, TaskState, TerminalStatus};

/// Smell-type-specific execution playbook: ordered sections covering the
/// goal, the step-by-step procedure, the status policy, and anti-loop rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playbook {
    pub smell_type: SmellType,
    pub sections: Vec<PlaybookSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybookSection {
    pub heading: String,
    pub body: String,
}

impl Playbook {
    /// All section bodies concatenated, for textual rule checks.
    pub fn full_text(&self) -> String {
        self.sections
            .iter()
            .map(|s| format!("{}\n{}", s.heading, s.body))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A worked example of expected agent behaviour for one terminal status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub terminal_status: DemoStatus,
    pub narrative: String,
    pub evidence_chain: Vec<String>,
}

/// The statuses demonstrations cover: one each of Done, Accepted, and
/// NeedMoreWork.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoStatus {
    Done,
    Accepted,
    NeedMoreWork,
}

impl DemoStatus {
    pub const ALL: [DemoStatus; 3] = [DemoStatus::Done, DemoStatus::Accepted, DemoStatus::NeedMoreWork];
}

/// Prior-iteration context attached when a task resumes after
/// NeedMoreWork.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationContext {
    pub previous_status: TaskState,
    pub previous_summary: String,
    pub previous_changed_files: Vec<String>,
    pub iteration: u32,
}

/// The full context bundle for one task iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPacket {
    pub task_id: String,
    pub smell_type: SmellType,
    pub smell_name: String,
    pub detection_excerpt: SmellInstance,
    pub affected_files: Vec<String>,
    pub modules: Vec<String>,
    pub playbook: Playbook,
    pub demonstrations: Vec<Demonstration>,
    pub continuation: Option<ContinuationContext>,
}

impl TaskPacket {
    /// Canonical (sorted-key) JSON, the form used on the wire and in golden
    /// transcripts.
    pub fn to_canonical_json(&self) -> String {
        to_canonical_string(self).expect("packet serializes")
    }
}

/// Playbook plus its three demonstrations for one smell type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaybookEntry {
    pub playbook: Playbook,
    pub demonstrations: Vec<Demonstration>,
}

/// The library of playbooks for the five benchmark-eligible smell types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlaybookLibrary {
    entries: BTreeMap<SmellType, PlaybookEntry>,
}

#[derive(Debug, Error)]
pub enum PacketError {
    #[error("cannot read playbook library: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed playbook library: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("playbook library missing smell type {0}")]
    MissingType(SmellType),
    #[error("{smell_type}: expected exactly 3 demonstrations, found {found}")]
    DemonstrationCount { smell_type: SmellType, found: usize },
    #[error("{smell_type}: demonstrations must cover done/accepted/need_more_work exactly once")]
    DemonstrationStatuses { smell_type: SmellType },
    #[error("{smell_type}: demonstration for {status:?} has an empty evidence chain")]
    EmptyEvidenceChain {
        smell_type: SmellType,
        status: DemoStatus,
    },
    #[error("{smell_type}: playbook entry declares mismatched type {declared}")]
    TypeMismatch {
        smell_type: SmellType,
        declared: SmellType,
    },
    #[error("task {task_id} is {state:?}; packets are assembled for leased tasks")]
    NotLeased { task_id: String, state: TaskState },
}

impl PlaybookLibrary {
    /// Validate a parsed library: complete over the five eligible types,
    /// exactly three demonstrations per type (one per status), every
    /// evidence chain non-empty.
    pub fn new(entries: BTreeMap<SmellType, PlaybookEntry>) -> Result<Self, PacketError> {
        for smell_type in SmellType::BENCHMARK_ELIGIBLE {
            let entry = entries
                .get(&smell_type)
                .ok_or(PacketError::MissingType(smell_type))?;
            if entry.playbook.smell_type != smell_type {
                return Err(PacketError::TypeMismatch {
                    smell_type,
                    declared: entry.playbook.smell_type,
                });
            }
            validate_demonstrations(smell_type, &entry.demonstrations)?;
        }
        Ok(Self { entries })
    }

    pub fn get(&self, smell_type: SmellType) -> Option<&PlaybookEntry> {
        self.entries.get(&smell_type)
    }
}

pub(crate) fn validate_demonstrations(
    smell_type: SmellType,
    demonstrations: &[Demonstration],
) -> Result<(), PacketError> {
    if demonstrations.len() != 3 {
        return Err(PacketError::DemonstrationCount {
            smell_type,
            found: demonstrations.len(),
        });
    }
    let mut statuses: Vec<DemoStatus> = demonstrations.iter().map(|d| d.terminal_status).collect();
    statuses.sort();
    statuses.dedup();
    if statuses.len() != 3 {
        return Err(PacketError::DemonstrationStatuses { smell_type });
    }
    for demo in demonstrations {
        if demo.evidence_chain.is_empty() {
            return Err(PacketError::EmptyEvidenceChain {
                smell_type,
                status: demo.terminal_status,
            });
        }
    }
    Ok(())
}

/// Load and validate a playbook library from a JSON file keyed by smell
/// type.
pub fn load_playbook_library(location: &Path) -> Result<PlaybookLibrary, PacketError> {
    let bytes = std::fs::read(location)?;
    parse_playbook_library(&bytes)
}

pub fn parse_playbook_library(bytes: &[u8]) -> Result<PlaybookLibrary, PacketError> {
    let entries: BTreeMap<SmellType, PlaybookEntry> = serde_json::from_slice(bytes)?;
    PlaybookLibrary::new(entries)
}

/// Assemble the packet for a leased task.
///
/// Pure in (task, library): identical inputs produce byte-identical
/// canonical serializations. The continuation context is attached iff the
/// task's last history entry has status NeedMoreWork, carrying that entry's
/// status, summary, and changed files.
pub fn assemble_packet(
    task: &TaskRecord,
    library: &PlaybookLibrary,
) -> Result<TaskPacket, PacketError> {
    if task.state != TaskState::Leased {
        return Err(PacketError::NotLeased {
            task_id: task.task_id.clone(),
            state: task.state,
        });
    }
    let entry = library
        .get(task.smell.smell_type)
        .ok_or(PacketError::MissingType(task.smell.smell_type))?;
    let continuation = task.history.last().and_then(|last| {
        (last.report.status == TerminalStatus::NeedMoreWork).then(|| ContinuationContext {
            previous_status: TaskState::NeedMoreWork,
            previous_summary: last.report.summary.clone(),
            previous_changed_files: last.report.changed_files.clone(),
            iteration: last.iteration + 1,
        })
    });
    Ok(TaskPacket {
        task_id: task.task_id.clone(),
        smell_type: task.smell.smell_type,
        smell_name: task.smell.name.clone(),
        detection_excerpt: task.smell.clone(),
        affected_files: task.smell.files.clone(),
        modules: task.smell.modules.clone(),
        playbook: entry.playbook.clone(),
        demonstrations: entry.demonstrations.clone(),
        continuation,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn demo(status: DemoStatus) -> Demonstration {
        Demonstration {
            terminal_status: status,
            narrative: format!("{status:?} walkthrough"),
            evidence_chain: vec!["measured baseline".into(), "verified final".into()],
        }
    }

    pub fn playbook_for(smell_type: SmellType) -> Playbook {
        Playbook {
            smell_type,
            sections: vec![
                PlaybookSection {
                    heading: "Goal".into(),
                    body: format!("Reduce the {smell_type} metric."),
                },
                PlaybookSection {
                    heading: "Procedure".into(),
                    body: "Record the baseline metric, refactor, record the final metric.".into(),
                },
                PlaybookSection {
                    heading: "Status policy".into(),
                    body: "Select Done, Accepted, Need More Work, or Blocked; each status \
                           gates on its evidence."
                        .into(),
                },
                PlaybookSection {
                    heading: "Anti-loop rules".into(),
                    body: "anti-loop: Need More Work requires one completed mini-task and a \
                           shrinking next-steps list. On continuation, resume from the previous \
                           summary instead of restarting."
                        .into(),
                },
            ],
        }
    }

    pub fn full_library() -> PlaybookLibrary {
        let entries = SmellType::BENCHMARK_ELIGIBLE
            .into_iter()
            .map(|st| {
                (
                    st,
                    PlaybookEntry {
                        playbook: playbook_for(st),
                        demonstrations: DemoStatus::ALL.into_iter().map(demo).collect(),
                    },
                )
            })
            .collect();
        PlaybookLibrary::new(entries).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::store::test_support::{bench_instance, blocked_report, nmw_report};
    use crate::store::{CreateOptions, TaskStore};

    fn leased_store() -> TaskStore {
        let mut store =
            TaskStore::create_tasks(&[bench_instance("t1")], CreateOptions::default(), 0).unwrap();
        store.claim_next("agent-a", 0).unwrap();
        store
    }

    #[test]
    fn library_fixture_covers_five_types() {
        let library = full_library();
        for st in SmellType::BENCHMARK_ELIGIBLE {
            assert!(library.get(st).is_some());
        }
    }

    #[test]
    fn library_missing_type_is_rejected() {
        let mut entries: BTreeMap<SmellType, PlaybookEntry> = SmellType::BENCHMARK_ELIGIBLE
            .into_iter()
            .map(|st| {
                (
                    st,
                    PlaybookEntry {
                        playbook: playbook_for(st),
                        demonstrations: DemoStatus::ALL.into_iter().map(demo).collect(),
                    },
                )
            })
            .collect();
        entries.remove(&SmellType::GodObject);
        let err = PlaybookLibrary::new(entries).unwrap_err();
        assert!(matches!(err, PacketError::MissingType(SmellType::GodObject)));
    }

    #[test]
    fn library_with_two_demos_is_rejected() {
        let mut entries: BTreeMap<SmellType, PlaybookEntry> = SmellType::BENCHMARK_ELIGIBLE
            .into_iter()
            .map(|st| {
                (
                    st,
                    PlaybookEntry {
                        playbook: playbook_for(st),
                        demonstrations: DemoStatus::ALL.into_iter().map(demo).collect(),
                    },
                )
            })
            .collect();
        entries
            .get_mut(&SmellType::GodObject)
            .unwrap()
            .demonstrations
            .pop();
        let err = PlaybookLibrary::new(entries).unwrap_err();
        assert!(matches!(
            err,
            PacketError::DemonstrationCount {
                smell_type: SmellType::GodObject,
                found: 2
            }
        ));
    }

    #[test]
    fn fresh_task_has_no_continuation() {
        let store = leased_store();
        let packet = assemble_packet(store.task("t1").unwrap(), &full_library()).unwrap();
        assert!(packet.continuation.is_none());
        assert_eq!(packet.task_id, "t1");
        assert_eq!(packet.demonstrations.len(), 3);
    }

    #[test]
    fn continuation_carries_previous_nmw_entry() {
        let mut store = leased_store();
        let lease = store.task("t1").unwrap().lease.clone().unwrap();
        store
            .record_outcome("t1", &lease.lease_id, nmw_report(), 1)
            .unwrap();
        store.claim_next("agent-b", 2).unwrap();
        let packet = assemble_packet(store.task("t1").unwrap(), &full_library()).unwrap();
        let cont = packet.continuation.expect("continuation present");
        assert_eq!(cont.iteration, 2);
        assert_eq!(cont.previous_summary, "moved one helper");
        assert_eq!(cont.previous_changed_files, vec!["m/a.py"]);
        assert_eq!(cont.previous_status, TaskState::NeedMoreWork);
    }

    #[test]
    fn blocked_then_reset_task_has_no_continuation() {
        let mut store = leased_store();
        let lease = store.task("t1").unwrap().lease.clone().unwrap();
        store
            .record_outcome("t1", &lease.lease_id, blocked_report(), 1)
            .unwrap();
        store.reset_blocked("t1", 2).unwrap();
        store.claim_next("agent-b", 3).unwrap();
        let packet = assemble_packet(store.task("t1").unwrap(), &full_library()).unwrap();
        assert!(packet.continuation.is_none());
    }

    #[test]
    fn packet_requires_leased_task() {
        let store =
            TaskStore::create_tasks(&[bench_instance("t1")], CreateOptions::default(), 0).unwrap();
        let err = assemble_packet(store.task("t1").unwrap(), &full_library()).unwrap_err();
        assert!(matches!(err, PacketError::NotLeased { .. }));
    }

    #[test]
    fn assembly_is_deterministic() {
        let store = leased_store();
        let library = full_library();
        let a = assemble_packet(store.task("t1").unwrap(), &library)
            .unwrap()
            .to_canonical_json();
        let b = assemble_packet(store.task("t1").unwrap(), &library)
            .unwrap()
            .to_canonical_json();
        assert_eq!(a, b);
    }

    #[test]
    fn affected_files_come_from_the_instance() {
        let store = leased_store();
        let packet = assemble_packet(store.task("t1").unwrap(), &full_library()).unwrap();
        let instance_files = &store.task("t1").unwrap().smell.files;
        assert!(packet.affected_files.iter().all(|f| instance_files.contains(f)));
    }

    #[test]
    fn packets_never_leak_verdicts() {
        let store = leased_store();
        let packet = assemble_packet(store.task("t1").unwrap(), &full_library()).unwrap();
        assert!(!packet.to_canonical_json().contains("verdict"));
    }
}
