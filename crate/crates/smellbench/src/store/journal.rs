//! Append-only journal: newline-delimited JSON events plus replay.
//!
//! Every store mutation appends exactly one event, so replaying a journal
//! prefix reconstructs the store state as of that point (the crash-recovery
//! contract). Snapshots are taken separately via
//! [`TaskStore::snapshot_json`](super::TaskStore::snapshot_json).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_string;
use crate::clock::TimestampMs;
use crate::smell::SmellInstance;
use crate::store::{
    CreateOptions, HistoryEntry, Lease, StatusReport, StoreError, TaskRecord, TaskState, TaskStore,
};

/// One journaled store mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalEvent {
    Create {
        at: TimestampMs,
        task_id: String,
        smell: SmellInstance,
    },
    Claim {
        at: TimestampMs,
        task_id: String,
        lease_id: String,
        agent: String,
        ttl_ms: i64,
    },
    Record {
        at: TimestampMs,
        task_id: String,
        lease_id: String,
        agent: String,
        report: StatusReport,
    },
    Reclaim {
        at: TimestampMs,
        task_id: String,
    },
    /// Administrative reset of a blocked task; not part of the agent-facing
    /// lifecycle but journaled so replay stays exact.
    Reset {
        at: TimestampMs,
        task_id: String,
    },
}

/// Writes events as canonical NDJSON, flushing after each append.
pub struct Journal {
    sink: Box<dyn Write + Send>,
}

impl std::fmt::Debug for Journal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Journal")
    }
}

impl Journal {
    pub fn new(sink: Box<dyn Write + Send>) -> Self {
        Self { sink }
    }

    pub fn append(&mut self, event: &JournalEvent) -> std::io::Result<()> {
        let line = to_canonical_string(event).expect("journal event serializes");
        self.sink.write_all(line.as_bytes())?;
        self.sink.write_all(b"\n")?;
        self.sink.flush()
    }
}

/// Parse a journal stream into events. Blank lines are skipped.
pub fn read_events(reader: impl BufRead) -> Result<Vec<JournalEvent>, StoreError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| StoreError::Replay {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event: JournalEvent = serde_json::from_str(&line).map_err(|e| StoreError::Replay {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Rebuild a store from journaled events. The resulting store state (and
/// lease counter) is identical to the one that wrote the journal.
pub fn replay(events: &[JournalEvent]) -> Result<TaskStore, StoreError> {
    let mut store = TaskStore::create_tasks(
        &[],
        CreateOptions {
            allow_empty: true,
            ..Default::default()
        },
        0,
    )?;
    let mut max_lease = 0u64;
    for (idx, event) in events.iter().enumerate() {
        apply(&mut store, event, idx + 1, &mut max_lease)?;
    }
    store.set_lease_counter_at_least(max_lease);
    Ok(store)
}

fn apply(
    store: &mut TaskStore,
    event: &JournalEvent,
    line: usize,
    max_lease: &mut u64,
) -> Result<(), StoreError> {
    let fail = |reason: String| StoreError::Replay { line, reason };
    match event {
        JournalEvent::Create { task_id, smell, .. } => {
            if store.tasks.contains_key(task_id) {
                return Err(fail(format!("duplicate create for {task_id}")));
            }
            store.tasks.insert(
                task_id.clone(),
                TaskRecord {
                    task_id: task_id.clone(),
                    smell: smell.clone(),
                    state: TaskState::NotHandled,
                    lease: None,
                    history: Vec::new(),
                    last_consumed_lease: None,
                },
            );
        }
        JournalEvent::Claim {
            at,
            task_id,
            lease_id,
            agent,
            ttl_ms,
        } => {
            if let Some(n) = lease_number(lease_id) {
                *max_lease = (*max_lease).max(n);
            }
            let task = store
                .tasks
                .get_mut(task_id)
                .ok_or_else(|| fail(format!("claim of unknown task {task_id}")))?;
            task.state = TaskState::Leased;
            task.lease = Some(Lease {
                lease_id: lease_id.clone(),
                agent_id: agent.clone(),
                acquired_at: *at,
                ttl_ms: *ttl_ms,
            });
        }
        JournalEvent::Record {
            at,
            task_id,
            lease_id,
            agent,
            report,
        } => {
            let task = store
                .tasks
                .get_mut(task_id)
                .ok_or_else(|| fail(format!("record for unknown task {task_id}")))?;
            let iteration = task.history.len() as u32 + 1;
            task.history.push(HistoryEntry {
                iteration,
                agent_id: agent.clone(),
                report: report.clone(),
                recorded_at: *at,
            });
            task.state = report.status.task_state();
            task.lease = None;
            task.last_consumed_lease = Some(lease_id.clone());
        }
        JournalEvent::Reclaim { task_id, .. } => {
            let task = store
                .tasks
                .get_mut(task_id)
                .ok_or_else(|| fail(format!("reclaim of unknown task {task_id}")))?;
            task.state = if task.history.is_empty() {
                TaskState::NotHandled
            } else {
                TaskState::NeedMoreWork
            };
            task.lease = None;
        }
        JournalEvent::Reset { task_id, .. } => {
            let task = store
                .tasks
                .get_mut(task_id)
                .ok_or_else(|| fail(format!("reset of unknown task {task_id}")))?;
            task.state = TaskState::NotHandled;
        }
    }
    Ok(())
}

fn lease_number(lease_id: &str) -> Option<u64> {
    lease_id.strip_prefix("lease-")?.parse().ok()
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::store::test_support::*;

    /// In-memory journal sink the test can read back.
    #[derive(Clone, Default)]
    pub struct SharedBuf(Arc<Mutex<Vec<u8>>>);

    impl SharedBuf {
        pub fn contents(&self) -> Vec<u8> {
            self.0.lock().unwrap().clone()
        }
    }

    impl Write for SharedBuf {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    fn journaled_store(ids: &[&str], buf: &SharedBuf) -> TaskStore {
        let instances: Vec<_> = ids.iter().map(|id| bench_instance(id)).collect();
        TaskStore::create_tasks_journaled(
            &instances,
            CreateOptions::default(),
            0,
            Journal::new(Box::new(buf.clone())),
        )
        .unwrap()
    }

    #[test]
    fn replay_reconstructs_full_run() {
        let buf = SharedBuf::default();
        let mut store = journaled_store(&["t1", "t2", "t3"], &buf);

        let g1 = store.claim_next("a", 10).unwrap();
        store
            .record_outcome(&g1.task_id, &g1.lease_id, nmw_report(), 20)
            .unwrap();
        let g2 = store.claim_next("b", 30).unwrap();
        store
            .record_outcome(&g2.task_id, &g2.lease_id, done_report(), 40)
            .unwrap();
        let g3 = store.claim_next("a", 50).unwrap();
        store
            .record_outcome(&g3.task_id, &g3.lease_id, accepted_report(), 60)
            .unwrap();
        store.claim_next("c", 70).unwrap();
        store.reclaim_expired(crate::store::DEFAULT_LEASE_TTL_MS + 100);

        let events = read_events(Cursor::new(buf.contents())).unwrap();
        let replayed = replay(&events).unwrap();
        assert_eq!(replayed.snapshot_json(), store.snapshot_json());

        // fresh leases after replay do not reuse ids
        let mut replayed = replayed;
        let g = replayed.claim_next("d", 200).unwrap();
        assert_eq!(g.lease_id, "lease-000005");
    }

    #[test]
    fn replay_of_every_prefix_matches_a_crash_point() {
        let buf = SharedBuf::default();
        let mut store = journaled_store(&["t1", "t2"], &buf);
        let mut snapshots = vec![store.snapshot_json()];

        let g = store.claim_next("a", 1).unwrap();
        snapshots.push(store.snapshot_json());
        store
            .record_outcome(&g.task_id, &g.lease_id, nmw_report(), 2)
            .unwrap();
        snapshots.push(store.snapshot_json());
        let g = store.claim_next("a", 3).unwrap();
        snapshots.push(store.snapshot_json());
        store
            .record_outcome(&g.task_id, &g.lease_id, blocked_report(), 4)
            .unwrap();
        snapshots.push(store.snapshot_json());
        store.reset_blocked(&g.task_id, 5).unwrap();
        snapshots.push(store.snapshot_json());

        let events = read_events(Cursor::new(buf.contents())).unwrap();
        // two create events precede the five mutations above
        assert_eq!(events.len(), 2 + 5);
        for (prefix_len, want) in (2..=events.len()).zip(snapshots) {
            let replayed = replay(&events[..prefix_len]).unwrap();
            assert_eq!(replayed.snapshot_json(), want, "prefix {prefix_len}");
        }
    }

    #[test]
    fn read_events_rejects_garbage() {
        let err = read_events(Cursor::new(b"{\"event\":\"nope\"}\n".to_vec())).unwrap_err();
        assert!(matches!(err, StoreError::Replay { line: 1, .. }));
    }
}
