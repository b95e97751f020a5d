//! Simulated-agent harness: scripted policies play the benchmark against an
//! in-process protocol server and emit agent-run records for scoring.
//!
//! Policies never see verdicts through the protocol (packets carry none);
//! verdict-aware behaviour is scripted from the fixture's ground truth,
//! standing in for real agents whose execution is out of scope.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::os::unix::net::UnixStream;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical::to_canonical_string;
use crate::clock::ManualClock;
use crate::packet::{load_playbook_library, PacketError, PlaybookLibrary, TaskPacket};
use crate::protocol::{serve_connection, ServerContext, TOOL_GET_TASK_PACKET, TOOL_MARK_TASK, TOOL_NEXT_TASK};
use crate::scoring::{AgentAction, AgentRunRecord, TaskOutcomeRecord};
use crate::smell::{
    parse_detection_report, parse_verdicts, select_benchmark, DetectionReport, Difficulty,
    ExpertVerdict, SmellError, SmellInstance, SmellType, Verdict,
};
use crate::store::{CreateOptions, HistoryEntry, SharedStore, StoreError, TaskState, TaskStore};

/// Scripted behaviour for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// Conclude false positive (terminal status Accepted), changing nothing.
    Flag,
    /// Fully eliminate the smell (Done, metric to zero).
    FixResolve,
    /// Reduce severity by the given fraction (Done).
    FixImprove { fraction: f64 },
    /// Increase severity by the given fraction (Done, a bad repair).
    FixWorsen { fraction: f64 },
    /// Report NeedMoreWork for `k` iterations, then apply the terminal
    /// behaviour.
    LoopNmw { k: u32, then: Box<Behavior> },
}

/// A selection rule: `None` fields match anything; first matching rule
/// wins, falling back to the policy default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRule {
    #[serde(default)]
    pub smell_type: Option<SmellType>,
    #[serde(default)]
    pub verdict: Option<Verdict>,
    pub behavior: Behavior,
}

/// A deterministic simulated agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPolicy {
    pub name: String,
    pub default: Behavior,
    #[serde(default)]
    pub rules: Vec<PolicyRule>,
    #[serde(default)]
    pub seed: u64,
}

impl SimPolicy {
    fn behavior_for(&self, smell_type: SmellType, verdict: Option<Verdict>) -> &Behavior {
        self.rules
            .iter()
            .find(|rule| {
                rule.smell_type.is_none_or(|t| t == smell_type)
                    && rule.verdict.is_none_or(|v| Some(v) == verdict)
            })
            .map(|rule| &rule.behavior)
            .unwrap_or(&self.default)
    }
}

/// Everything a simulation run needs; the `simulate` subcommand reads this
/// from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub fixture: PathBuf,
    pub verdicts: PathBuf,
    pub playbooks: PathBuf,
    #[serde(default = "default_transport")]
    pub transport: String,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
    pub policies: Vec<SimPolicy>,
    /// Optional robustness weight override; `None` uses the built-in seven
    /// configurations.
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
}

fn default_transport() -> String {
    "in-process".to_string()
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Smell(#[from] SmellError),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("policy {policy}: protocol error {code}: {message}")]
    Protocol {
        policy: String,
        code: String,
        message: String,
    },
    #[error("policy {policy}: unexpected response: {detail}")]
    BadResponse { policy: String, detail: String },
    #[error("benchmark selection is empty")]
    EmptyBenchmark,
}

/// Per-agent artifacts of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRunArtifacts {
    pub record: AgentRunRecord,
    pub post_report: DetectionReport,
    pub histories: BTreeMap<String, Vec<HistoryEntry>>,
    pub final_states: BTreeMap<String, TaskState>,
}

/// Output of [`run_simulation`]: the pre-fix report, the benchmark slice,
/// the verdict map, and one artifact set per policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub pre_report: DetectionReport,
    pub benchmark: Vec<SmellInstance>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub agents: BTreeMap<String, AgentRunArtifacts>,
}

/// Load a manifest, resolving its relative paths against the manifest's
/// own directory.
pub fn load_manifest(path: &Path) -> Result<RunManifest, SimError> {
    let bytes = std::fs::read(path)?;
    let mut manifest: RunManifest = serde_json::from_slice(&bytes)?;
    if let Some(base) = path.parent() {
        for field in [
            &mut manifest.fixture,
            &mut manifest.verdicts,
            &mut manifest.playbooks,
            &mut manifest.out,
        ] {
            if field.is_relative() {
                *field = base.join(&field);
            }
        }
    }
    Ok(manifest)
}

pub fn verdict_map(verdicts: &[ExpertVerdict]) -> BTreeMap<String, Verdict> {
    verdicts
        .iter()
        .map(|v| (v.smell_id.clone(), v.verdict))
        .collect()
}

/// Run every policy in the manifest concurrently, each against its own
/// store and in-process server, until its claim loop drains the benchmark.
/// Fully deterministic for a fixed manifest.
pub fn run_simulation(manifest: &RunManifest) -> Result<SimulationOutput, SimError> {
    let pre_report = parse_detection_report(&std::fs::read(&manifest.fixture)?)?;
    let verdicts = verdict_map(&parse_verdicts(&std::fs::read(&manifest.verdicts)?)?);
    let library = Arc::new(load_playbook_library(&manifest.playbooks)?);
    let benchmark = select_benchmark(
        &pre_report,
        Difficulty::Hard,
        &SmellType::BENCHMARK_ELIGIBLE.into_iter().collect(),
    );
    if benchmark.is_empty() {
        return Err(SimError::EmptyBenchmark);
    }

    let mut handles = Vec::new();
    for policy in &manifest.policies {
        let policy = policy.clone();
        let benchmark = benchmark.clone();
        let verdicts = verdicts.clone();
        let library = Arc::clone(&library);
        let pre_report = pre_report.clone();
        handles.push(thread::spawn(move || {
            run_policy(&policy, &benchmark, &verdicts, library, &pre_report)
        }));
    }
    let mut agents = BTreeMap::new();
    for (policy, handle) in manifest.policies.iter().zip(handles) {
        let artifacts = handle.join().expect("policy thread panicked")?;
        agents.insert(policy.name.clone(), artifacts);
    }
    Ok(SimulationOutput {
        pre_report,
        benchmark,
        verdicts,
        agents,
    })
}

/// Write the per-agent run records and post-fix reports under `out`.
pub fn write_run_artifacts(output: &SimulationOutput, out: &Path) -> Result<Vec<PathBuf>, SimError> {
    let runs_dir = out.join("runs");
    let posts_dir = out.join("post_reports");
    std::fs::create_dir_all(&runs_dir)?;
    std::fs::create_dir_all(&posts_dir)?;
    let mut written = Vec::new();
    for (agent, artifacts) in &output.agents {
        let run_path = runs_dir.join(format!("{agent}.json"));
        std::fs::write(
            &run_path,
            to_canonical_string(&artifacts.record).expect("record serializes"),
        )?;
        written.push(run_path);
        let post_path = posts_dir.join(format!("{agent}.json"));
        std::fs::write(
            &post_path,
            to_canonical_string(&artifacts.post_report).expect("report serializes"),
        )?;
        written.push(post_path);
    }
    Ok(written)
}

struct ProtocolClient {
    policy: String,
    stream: UnixStream,
    reader: BufReader<UnixStream>,
    clock: Arc<ManualClock>,
    next_id: u64,
}

impl ProtocolClient {
    fn call(&mut self, tool: &str, args: Value) -> Result<Value, SimError> {
        self.next_id += 1;
        self.clock.advance(1_000);
        let frame = serde_json::json!({
            "id": format!("c-{:04}", self.next_id),
            "tool": tool,
            "args": args,
        });
        self.stream.write_all(frame.to_string().as_bytes())?;
        self.stream.write_all(b"\n")?;
        let mut line = String::new();
        self.reader.read_line(&mut line)?;
        let response: Value = serde_json::from_str(&line).map_err(|e| SimError::BadResponse {
            policy: self.policy.clone(),
            detail: format!("unparseable response {line:?}: {e}"),
        })?;
        if response["ok"].as_bool() == Some(true) {
            Ok(response["result"].clone())
        } else {
            Err(SimError::Protocol {
                policy: self.policy.clone(),
                code: response["error"]["code"]
                    .as_str()
                    .unwrap_or("UNKNOWN")
                    .to_string(),
                message: response["error"]["message"]
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
            })
        }
    }
}

fn run_policy(
    policy: &SimPolicy,
    benchmark: &[SmellInstance],
    verdicts: &BTreeMap<String, Verdict>,
    library: Arc<PlaybookLibrary>,
    pre_report: &DetectionReport,
) -> Result<AgentRunArtifacts, SimError> {
    let store = SharedStore::new(TaskStore::create_tasks(
        benchmark,
        CreateOptions::default(),
        0,
    )?);
    let clock = Arc::new(ManualClock::new(0));
    let ctx = ServerContext::new(store.clone(), library, clock.clone());

    let (client_stream, server_stream) = UnixStream::pair()?;
    let server = {
        let ctx = ctx.clone();
        thread::spawn(move || {
            let reader = BufReader::new(server_stream.try_clone().expect("clone sim stream"));
            serve_connection(reader, server_stream, &ctx)
        })
    };

    let mut client = ProtocolClient {
        policy: policy.name.clone(),
        reader: BufReader::new(client_stream.try_clone()?),
        stream: client_stream,
        clock,
        next_id: 0,
    };

    // behaviour effects per task, recorded as the client acts
    let mut effects: BTreeMap<String, TaskEffect> = BTreeMap::new();
    loop {
        let claim = client.call(TOOL_NEXT_TASK, serde_json::json!({"agent": policy.name}))?;
        let Some(task_id) = claim["task_id"].as_str().map(str::to_string) else {
            break;
        };
        let lease_id = claim["lease_id"]
            .as_str()
            .ok_or_else(|| SimError::BadResponse {
                policy: policy.name.clone(),
                detail: "claim without lease_id".into(),
            })?
            .to_string();
        let packet_value = client.call(
            TOOL_GET_TASK_PACKET,
            serde_json::json!({"task_id": task_id, "lease_id": lease_id}),
        )?;
        let packet: TaskPacket =
            serde_json::from_value(packet_value).map_err(|e| SimError::BadResponse {
                policy: policy.name.clone(),
                detail: format!("unparseable packet: {e}"),
            })?;

        let verdict = verdicts.get(&task_id).copied();
        let behavior = policy.behavior_for(packet.smell_type, verdict);
        let step = next_step(behavior, &packet);
        let (mark, effect) = mark_for_step(&step, &packet, &lease_id);
        client.call(TOOL_MARK_TASK, mark)?;
        if let Some(effect) = effect {
            effects.insert(task_id, effect);
        }
    }
    // EOF for the server loop
    client.stream.shutdown(std::net::Shutdown::Write)?;
    server.join().expect("server thread panicked")?;

    let (histories, final_states) = store.with(|s| {
        let histories = s
            .tasks()
            .map(|t| (t.task_id.clone(), t.history.clone()))
            .collect::<BTreeMap<_, _>>();
        let states = s
            .tasks()
            .map(|t| (t.task_id.clone(), t.state))
            .collect::<BTreeMap<_, _>>();
        (histories, states)
    });

    let record = build_run_record(policy, benchmark, &final_states, &effects);
    let post_report = synthesize_post_report(pre_report, benchmark, &effects, &policy.name);
    Ok(AgentRunArtifacts {
        record,
        post_report,
        histories,
        final_states,
    })
}

/// The terminal effect a behaviour had on a task's smell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TaskEffect {
    resolved: bool,
    sev_new: Option<f64>,
    claimed_fp: bool,
}

enum Step {
    NeedMoreWork { with_files: bool },
    Terminal(TerminalKind),
}

enum TerminalKind {
    Flag,
    Resolve,
    Improve(f64),
    Worsen(f64),
}

fn terminal_kind(behavior: &Behavior) -> TerminalKind {
    match behavior {
        Behavior::Flag => TerminalKind::Flag,
        Behavior::FixResolve => TerminalKind::Resolve,
        Behavior::FixImprove { fraction } => TerminalKind::Improve(*fraction),
        Behavior::FixWorsen { fraction } => TerminalKind::Worsen(*fraction),
        Behavior::LoopNmw { then, .. } => terminal_kind(then),
    }
}

/// Decide this iteration's step: within the first `k` iterations of a
/// LoopNmw behaviour report NeedMoreWork, afterwards apply the terminal.
fn next_step(behavior: &Behavior, packet: &TaskPacket) -> Step {
    let iteration = packet.continuation.as_ref().map_or(1, |c| c.iteration);
    match behavior {
        Behavior::LoopNmw { k, then } => {
            if iteration <= *k {
                // investigations (flag-bound loops) change nothing
                let with_files = !matches!(terminal_kind(then), TerminalKind::Flag);
                Step::NeedMoreWork { with_files }
            } else {
                Step::Terminal(terminal_kind(then))
            }
        }
        other => Step::Terminal(terminal_kind(other)),
    }
}

fn mark_for_step(step: &Step, packet: &TaskPacket, lease_id: &str) -> (Value, Option<TaskEffect>) {
    let severity = packet.detection_excerpt.severity;
    let first_file = packet.affected_files.first().cloned();
    let args = |status: &str,
                summary: String,
                changed: Vec<String>,
                baseline: Option<f64>,
                fin: Option<f64>,
                rationale: String,
                steps: Vec<String>| {
        serde_json::json!({
            "task_id": packet.task_id,
            "lease_id": lease_id,
            "status": status,
            "summary": summary,
            "changed_files": changed,
            "evidence": {
                "baseline_metric": baseline,
                "final_metric": fin,
                "rationale": rationale,
            },
            "next_steps": steps,
        })
    };
    match step {
        Step::NeedMoreWork { with_files } => {
            let changed = if *with_files {
                first_file.into_iter().collect()
            } else {
                Vec::new()
            };
            (
                args(
                    "need_more_work",
                    format!("completed one mini-task on {}", packet.smell_name),
                    changed,
                    Some(severity),
                    None,
                    String::new(),
                    vec![format!("continue reducing {}", packet.smell_name)],
                ),
                None,
            )
        }
        Step::Terminal(TerminalKind::Flag) => (
            args(
                "accepted",
                format!("{} reflects intentional design", packet.smell_name),
                vec![],
                Some(severity),
                None,
                "pattern matches an established design convention; reverted all probes".into(),
                vec![],
            ),
            Some(TaskEffect {
                resolved: false,
                sev_new: None,
                claimed_fp: true,
            }),
        ),
        Step::Terminal(TerminalKind::Resolve) => (
            args(
                "done",
                format!("eliminated {}", packet.smell_name),
                first_file.into_iter().collect(),
                Some(severity),
                Some(0.0),
                "metric fully reduced".into(),
                vec![],
            ),
            Some(TaskEffect {
                resolved: true,
                sev_new: None,
                claimed_fp: false,
            }),
        ),
        Step::Terminal(TerminalKind::Improve(fraction)) => {
            let sev_new = severity * (1.0 - fraction).max(0.0);
            (
                args(
                    "done",
                    format!("reduced {}", packet.smell_name),
                    first_file.into_iter().collect(),
                    Some(severity),
                    Some(sev_new),
                    "no further concrete reduction path".into(),
                    vec![],
                ),
                Some(TaskEffect {
                    resolved: false,
                    sev_new: Some(sev_new),
                    claimed_fp: false,
                }),
            )
        }
        Step::Terminal(TerminalKind::Worsen(fraction)) => {
            // similarity metrics saturate at 100%
            let cap = if packet.detection_excerpt.metric.is_similarity() {
                100.0
            } else {
                f64::INFINITY
            };
            let sev_new = (severity * (1.0 + fraction)).min(cap);
            (
                args(
                    "done",
                    format!("restructured {}", packet.smell_name),
                    first_file.into_iter().collect(),
                    Some(severity),
                    Some(sev_new),
                    "believed complete".into(),
                    vec![],
                ),
                Some(TaskEffect {
                    resolved: false,
                    sev_new: Some(sev_new),
                    claimed_fp: false,
                }),
            )
        }
    }
}

fn build_run_record(
    policy: &SimPolicy,
    benchmark: &[SmellInstance],
    final_states: &BTreeMap<String, TaskState>,
    effects: &BTreeMap<String, TaskEffect>,
) -> AgentRunRecord {
    let tasks = benchmark
        .iter()
        .map(|instance| {
            let effect = effects.get(&instance.id);
            let state = final_states.get(&instance.id).copied();
            let claimed_fp = effect.map_or(state == Some(TaskState::Accepted), |e| e.claimed_fp);
            TaskOutcomeRecord {
                task_id: instance.id.clone(),
                action: if claimed_fp {
                    AgentAction::FlaggedFalsePositive
                } else {
                    AgentAction::AttemptedFix
                },
                sev_old: instance.severity,
                sev_new: effect.and_then(|e| e.sev_new),
                resolved: effect.is_some_and(|e| e.resolved),
                claimed_fp,
            }
        })
        .collect();
    AgentRunRecord {
        agent_id: policy.name.clone(),
        tasks,
    }
}

/// Project the behaviour effects onto the pre-fix report: resolved
/// instances vanish, improved/worsened ones carry their new severity, and
/// untouched instances pass through unchanged. A worsened repair also
/// surfaces one new detection (the restructuring spilled into a fresh
/// violation), so net impact can go negative.
fn synthesize_post_report(
    pre_report: &DetectionReport,
    benchmark: &[SmellInstance],
    effects: &BTreeMap<String, TaskEffect>,
    agent: &str,
) -> DetectionReport {
    let benchmark_ids: BTreeSet<&str> = benchmark.iter().map(|i| i.id.as_str()).collect();
    let mut instances: Vec<SmellInstance> = pre_report
        .instances
        .iter()
        .filter_map(|instance| {
            if !benchmark_ids.contains(instance.id.as_str()) {
                return Some(instance.clone());
            }
            match effects.get(&instance.id) {
                Some(effect) if effect.resolved => None,
                Some(TaskEffect {
                    sev_new: Some(sev_new),
                    ..
                }) => {
                    let mut updated = instance.clone();
                    updated.severity = *sev_new;
                    updated.metric.value = *sev_new;
                    Some(updated)
                }
                _ => Some(instance.clone()),
            }
        })
        .collect();
    for instance in benchmark {
        let worsened = effects
            .get(&instance.id)
            .is_some_and(|e| e.sev_new.is_some_and(|s| s > instance.severity));
        if worsened {
            let mut introduced = instance.clone();
            introduced.id = format!("intro-{}", instance.id);
            introduced.name = format!("spillover from {}", instance.name);
            introduced.description =
                "new violation surfaced by the restructuring of a neighboring smell".into();
            introduced.modules.push("sklearn.utils._bridge".into());
            instances.push(introduced);
        }
    }
    DetectionReport {
        tool_id: pre_report.tool_id.clone(),
        codebase_ref: format!("{}+{agent}", pre_report.codebase_ref),
        generated_at: "post-run".to_string(),
        instances,
    }
}
