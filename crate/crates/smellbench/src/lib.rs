//! SmellBench: benchmark orchestration and evaluation for agents that repair
//! architectural code smells.
//!
//! The crate is organized around the benchmark pipeline:
//!
//! - [`smell`] — detection reports, difficulty classification, expert
//!   verdicts, and benchmark selection
//! - [`store`] — the task repository with its lifecycle state machine,
//!   atomic leasing, and append-only journal
//! - [`packet`] — per-iteration task packet assembly (playbooks,
//!   demonstrations, continuation context)
//! - [`protocol`] — the framed tool-invocation protocol served to agent
//!   clients (`next_task` / `get_task_packet` / `mark_task`)
//! - [`scoring`] — per-task scoring, weighted effectiveness, false-positive
//!   metrics, and net-impact diffing
//! - [`stats`] — bootstrap CIs, Cohen's/Fleiss' kappa, Kendall's W,
//!   Wilcoxon signed-rank with Holm correction, Cliff's delta
//! - [`optimizer`] — reflective playbook evolution with a rule-based static
//!   validator and pluggable generator/judge/reflector roles
//! - [`sim`] and [`report`] — the simulated-agent harness and the
//!   leaderboard/report emitters

pub mod canonical;
pub mod clock;
pub mod optimizer;
pub mod packet;
pub mod protocol;
pub mod report;
pub mod scoring;
pub mod sim;
pub mod smell;
pub mod stats;
pub mod store;
