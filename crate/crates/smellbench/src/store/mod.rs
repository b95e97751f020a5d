//! Persistent task repository: lifecycle state machine, atomic leasing,
//! append-only history.
//!
//! The store is a linearizable single-writer component. [`TaskStore`] holds
//! the state machine itself; [`SharedStore`] wraps it in a mutex so any
//! number of protocol connections can funnel their mutations through one
//! serialization point.

mod journal;

pub use journal::{Journal, JournalEvent, read_events, replay};

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::to_canonical_string;
use crate::clock::TimestampMs;
use crate::smell::SmellInstance;

/// Default lease TTL: 30 minutes.
pub const DEFAULT_LEASE_TTL_MS: i64 = 30 * 60 * 1000;

/// Lifecycle state of a task.
///
/// Legal transitions: `NotHandled -> Leased`, `NeedMoreWork -> Leased`,
/// `Leased -> {Done, Accepted, NeedMoreWork, Blocked}`, and lease expiry
/// reverts `Leased` to the prior actionable state. `Done` and `Accepted`
/// are terminal. `Blocked` is terminal for agents but administratively
/// resettable to `NotHandled`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    NotHandled,
    Leased,
    Done,
    Accepted,
    NeedMoreWork,
    Blocked,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Done | TaskState::Accepted)
    }

    fn is_claimable(self) -> bool {
        matches!(self, TaskState::NotHandled | TaskState::NeedMoreWork)
    }
}

/// Terminal status an agent reports at the end of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Done,
    Accepted,
    NeedMoreWork,
    Blocked,
}

impl TerminalStatus {
    pub fn task_state(self) -> TaskState {
        match self {
            TerminalStatus::Done => TaskState::Done,
            TerminalStatus::Accepted => TaskState::Accepted,
            TerminalStatus::NeedMoreWork => TaskState::NeedMoreWork,
            TerminalStatus::Blocked => TaskState::Blocked,
        }
    }
}

/// Exclusive, time-limited claim of a task by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lease {
    pub lease_id: String,
    pub agent_id: String,
    pub acquired_at: TimestampMs,
    pub ttl_ms: i64,
}

impl Lease {
    pub fn expired(&self, now: TimestampMs) -> bool {
        self.acquired_at + self.ttl_ms < now
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub baseline_metric: Option<f64>,
    pub final_metric: Option<f64>,
    pub rationale: String,
}

/// An agent's end-of-iteration submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub status: TerminalStatus,
    pub summary: String,
    pub changed_files: Vec<String>,
    pub evidence: Evidence,
    pub next_steps: Vec<String>,
}

impl StatusReport {
    /// Enforce the per-status evidence rules: Done must carry baseline and
    /// final metrics, Accepted must carry a rationale and revert all
    /// changes, NeedMoreWork must list remaining steps, Blocked must name
    /// the blocker.
    pub fn validate(&self) -> Result<(), StoreError> {
        let fail = |msg: &str| {
            Err(StoreError::InvalidReport {
                status: self.status,
                reason: msg.to_string(),
            })
        };
        match self.status {
            TerminalStatus::Done => {
                if self.evidence.baseline_metric.is_none() || self.evidence.final_metric.is_none()
                {
                    return fail("done requires baseline and final metric values");
                }
            }
            TerminalStatus::Accepted => {
                if self.evidence.rationale.trim().is_empty() {
                    return fail("accepted requires a rationale");
                }
                if !self.changed_files.is_empty() {
                    return fail("accepted requires all changes reverted (no changed files)");
                }
            }
            TerminalStatus::NeedMoreWork => {
                if self.next_steps.is_empty() {
                    return fail("need_more_work requires explicit next steps");
                }
            }
            TerminalStatus::Blocked => {
                if self.evidence.rationale.trim().is_empty() {
                    return fail("blocked requires a rationale naming the blocker");
                }
            }
        }
        Ok(())
    }
}

/// One recorded iteration on a task. Iterations are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: u32,
    pub agent_id: String,
    pub report: StatusReport,
    pub recorded_at: TimestampMs,
}

/// A benchmark task: smell instance, lifecycle state, lease, and history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub smell: SmellInstance,
    pub state: TaskState,
    pub lease: Option<Lease>,
    pub history: Vec<HistoryEntry>,
    /// The lease consumed by the most recent accepted mark, kept so a
    /// retransmitted mark can be told apart from a stale one.
    pub last_consumed_lease: Option<String>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("benchmark is empty")]
    EmptyBenchmark,
    #[error("duplicate task id {0}")]
    DuplicateTaskId(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {task_id}: lease {lease_id} is stale or unknown")]
    StaleLease { task_id: String, lease_id: String },
    #[error("task {task_id}: outcome already recorded under lease {lease_id}")]
    DuplicateMark { task_id: String, lease_id: String },
    #[error("invalid {status:?} report: {reason}")]
    InvalidReport {
        status: TerminalStatus,
        reason: String,
    },
    #[error("task {task_id} is {state:?}, not blocked")]
    NotBlocked { task_id: String, state: TaskState },
    #[error("journal replay failed at line {line}: {reason}")]
    Replay { line: usize, reason: String },
}

/// A successful claim: the task id and the fresh lease on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimGrant {
    pub task_id: String,
    pub lease_id: String,
}

#[derive(Debug, Clone, Copy)]
pub struct CreateOptions {
    pub allow_empty: bool,
    pub lease_ttl_ms: i64,
}

impl Default for CreateOptions {
    fn default() -> Self {
        Self {
            allow_empty: false,
            lease_ttl_ms: DEFAULT_LEASE_TTL_MS,
        }
    }
}

/// The task repository state machine. Not thread-safe by itself; wrap in
/// [`SharedStore`] for concurrent use.
#[derive(Debug)]
pub struct TaskStore {
    tasks: BTreeMap<String, TaskRecord>,
    lease_counter: u64,
    lease_ttl_ms: i64,
    journal: Option<Journal>,
}

impl TaskStore {
    /// Create one `NotHandled` task per benchmark instance, using the
    /// instance id as the task id.
    pub fn create_tasks(
        benchmark: &[SmellInstance],
        options: CreateOptions,
        now: TimestampMs,
    ) -> Result<Self, StoreError> {
        if benchmark.is_empty() && !options.allow_empty {
            return Err(StoreError::EmptyBenchmark);
        }
        let mut store = Self {
            tasks: BTreeMap::new(),
            lease_counter: 0,
            lease_ttl_ms: options.lease_ttl_ms,
            journal: None,
        };
        for instance in benchmark {
            if store.tasks.contains_key(&instance.id) {
                return Err(StoreError::DuplicateTaskId(instance.id.clone()));
            }
            store.tasks.insert(
                instance.id.clone(),
                TaskRecord {
                    task_id: instance.id.clone(),
                    smell: instance.clone(),
                    state: TaskState::NotHandled,
                    lease: None,
                    history: Vec::new(),
                    last_consumed_lease: None,
                },
            );
        }
        // Journal the creation events once a journal is attached via
        // `create_tasks_journaled`; a bare store keeps no journal.
        let _ = now;
        Ok(store)
    }

    /// As [`TaskStore::create_tasks`], additionally journaling one create
    /// event per task to `journal`.
    pub fn create_tasks_journaled(
        benchmark: &[SmellInstance],
        options: CreateOptions,
        now: TimestampMs,
        journal: Journal,
    ) -> Result<Self, StoreError> {
        let mut store = Self::create_tasks(benchmark, options, now)?;
        store.journal = Some(journal);
        for instance in benchmark {
            store.append_event(&JournalEvent::Create {
                at: now,
                task_id: instance.id.clone(),
                smell: instance.clone(),
            });
        }
        Ok(store)
    }

    /// Attach a journal to an existing store. Subsequent mutations are
    /// appended; already-applied state is not re-journaled.
    pub fn attach_journal(&mut self, journal: Journal) {
        self.journal = Some(journal);
    }

    fn append_event(&mut self, event: &JournalEvent) {
        if let Some(journal) = &mut self.journal {
            journal
                .append(event)
                .expect("journal write failed; store would lose durability");
        }
    }

    fn next_lease_id(&mut self) -> String {
        self.lease_counter += 1;
        format!("lease-{:06}", self.lease_counter)
    }

    pub(crate) fn set_lease_counter_at_least(&mut self, floor: u64) {
        self.lease_counter = self.lease_counter.max(floor);
    }

    pub fn lease_ttl_ms(&self) -> i64 {
        self.lease_ttl_ms
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskRecord> {
        self.tasks.get(task_id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskRecord> {
        self.tasks.values()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Atomically lease the smallest claimable task id to `agent_id`.
    /// Returns `None` when nothing is claimable.
    pub fn claim_next(&mut self, agent_id: &str, now: TimestampMs) -> Option<ClaimGrant> {
        let task_id = self
            .tasks
            .values()
            .find(|t| t.state.is_claimable())
            .map(|t| t.task_id.clone())?;
        let lease_id = self.next_lease_id();
        let ttl_ms = self.lease_ttl_ms;
        let task = self.tasks.get_mut(&task_id).expect("task just found");
        task.state = TaskState::Leased;
        task.lease = Some(Lease {
            lease_id: lease_id.clone(),
            agent_id: agent_id.to_string(),
            acquired_at: now,
            ttl_ms,
        });
        self.append_event(&JournalEvent::Claim {
            at: now,
            task_id: task_id.clone(),
            lease_id: lease_id.clone(),
            agent: agent_id.to_string(),
            ttl_ms,
        });
        Some(ClaimGrant { task_id, lease_id })
    }

    /// Validate and record an agent's outcome for a task it holds leased.
    ///
    /// On success the report is appended to history, the lease is cleared,
    /// and the task state becomes the reported status (`NeedMoreWork`
    /// returns the task to the claimable pool). Errors never mutate the
    /// store.
    pub fn record_outcome(
        &mut self,
        task_id: &str,
        lease_id: &str,
        report: StatusReport,
        now: TimestampMs,
    ) -> Result<TaskState, StoreError> {
        let task = self
            .tasks
            .get(task_id)
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))?;
        match &task.lease {
            Some(lease) if lease.lease_id == lease_id => {}
            Some(_) | None => {
                if task.last_consumed_lease.as_deref() == Some(lease_id) {
                    return Err(StoreError::DuplicateMark {
                        task_id: task_id.to_string(),
                        lease_id: lease_id.to_string(),
                    });
                }
                return Err(StoreError::StaleLease {
                    task_id: task_id.to_string(),
                    lease_id: lease_id.to_string(),
                });
            }
        }
        report.validate()?;

        let agent_id = task.lease.as_ref().expect("checked above").agent_id.clone();
        let new_state = report.status.task_state();
        let event = JournalEvent::Record {
            at: now,
            task_id: task_id.to_string(),
            lease_id: lease_id.to_string(),
            agent: agent_id.clone(),
            report: report.clone(),
        };
        let task = self.tasks.get_mut(task_id).expect("checked above");
        let iteration = task.history.len() as u32 + 1;
        task.history.push(HistoryEntry {
            iteration,
            agent_id,
            report,
            recorded_at: now,
        });
        task.state = new_state;
        task.lease = None;
        task.last_consumed_lease = Some(lease_id.to_string());
        self.append_event(&event);
        Ok(new_state)
    }

    /// Revert every expired lease: back to `NotHandled` when the task has
    /// no history, otherwise to `NeedMoreWork`. Returns the reverted ids.
    pub fn reclaim_expired(&mut self, now: TimestampMs) -> Vec<String> {
        let expired: Vec<String> = self
            .tasks
            .values()
            .filter(|t| matches!(&t.lease, Some(lease) if lease.expired(now)))
            .map(|t| t.task_id.clone())
            .collect();
        for task_id in &expired {
            let task = self.tasks.get_mut(task_id).expect("listed above");
            task.state = if task.history.is_empty() {
                TaskState::NotHandled
            } else {
                TaskState::NeedMoreWork
            };
            task.lease = None;
            self.append_event(&JournalEvent::Reclaim {
                at: now,
                task_id: task_id.clone(),
            });
        }
        expired
    }

    /// Append-only, iteration-ordered history of a task.
    pub fn history(&self, task_id: &str) -> Result<&[HistoryEntry], StoreError> {
        self.tasks
            .get(task_id)
            .map(|t| t.history.as_slice())
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))
    }

    /// Administrative reset of a `Blocked` task back into the pool.
    pub fn reset_blocked(&mut self, task_id: &str, now: TimestampMs) -> Result<(), StoreError> {
        let task = self
            .tasks
            .get_mut(task_id)
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))?;
        if task.state != TaskState::Blocked {
            return Err(StoreError::NotBlocked {
                task_id: task_id.to_string(),
                state: task.state,
            });
        }
        task.state = TaskState::NotHandled;
        self.append_event(&JournalEvent::Reset {
            at: now,
            task_id: task_id.to_string(),
        });
        Ok(())
    }

    /// Canonical JSON snapshot: a map from task id to full task record.
    /// Two stores with equal state produce identical bytes.
    pub fn snapshot_json(&self) -> String {
        to_canonical_string(&self.tasks).expect("task records serialize")
    }
}

/// Thread-safe handle over a [`TaskStore`]; every operation takes the lock,
/// so mutations are atomic and totally ordered.
#[derive(Clone)]
pub struct SharedStore {
    inner: Arc<Mutex<TaskStore>>,
}

impl SharedStore {
    pub fn new(store: TaskStore) -> Self {
        Self {
            inner: Arc::new(Mutex::new(store)),
        }
    }

    pub fn claim_next(&self, agent_id: &str, now: TimestampMs) -> Option<ClaimGrant> {
        self.lock().claim_next(agent_id, now)
    }

    pub fn record_outcome(
        &self,
        task_id: &str,
        lease_id: &str,
        report: StatusReport,
        now: TimestampMs,
    ) -> Result<TaskState, StoreError> {
        self.lock().record_outcome(task_id, lease_id, report, now)
    }

    pub fn reclaim_expired(&self, now: TimestampMs) -> Vec<String> {
        self.lock().reclaim_expired(now)
    }

    pub fn reset_blocked(&self, task_id: &str, now: TimestampMs) -> Result<(), StoreError> {
        self.lock().reset_blocked(task_id, now)
    }

    /// Run `f` with the store locked; use for reads or compound operations
    /// that must observe a consistent state.
    pub fn with<R>(&self, f: impl FnOnce(&TaskStore) -> R) -> R {
        f(&self.lock())
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, TaskStore> {
        self.inner.lock().expect("store mutex poisoned")
    }
}
