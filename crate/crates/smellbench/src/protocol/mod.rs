//! The framed tool-invocation protocol agents speak to the harness.
//!
//! Three tools implement a pull-based task scheduling loop: `next_task`
//! claims the next available task, `get_task_packet` assembles the context
//! bundle for a leased task, and `mark_task` records the agent's outcome.
//! Frames are one UTF-8 JSON object per line; responses use canonical
//! (sorted) key order so recorded transcripts are byte-stable.

mod server;

pub use server::{serve_connection, serve_stdio, serve_unix, ShutdownFlag, Transport};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::to_canonical_string;
use crate::clock::Clock;
use crate::packet::{assemble_packet, PacketError, PlaybookLibrary};
use crate::store::{Evidence, SharedStore, StatusReport, StoreError, TerminalStatus};

pub const TOOL_NEXT_TASK: &str = "next_task";
pub const TOOL_MARK_TASK: &str = "mark_task";
pub const TOOL_GET_TASK_PACKET: &str = "get_task_packet";

/// Protocol-level error codes, a closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    UnknownTool,
    InvalidArgs,
    TaskNotFound,
    StaleLease,
    StateConflict,
    MalformedFrame,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorCode::UnknownTool => "UNKNOWN_TOOL",
            ErrorCode::InvalidArgs => "INVALID_ARGS",
            ErrorCode::TaskNotFound => "TASK_NOT_FOUND",
            ErrorCode::StaleLease => "STALE_LEASE",
            ErrorCode::StateConflict => "STATE_CONFLICT",
            ErrorCode::MalformedFrame => "MALFORMED_FRAME",
        };
        f.write_str(s)
    }
}

/// A parsed tool invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRequest {
    pub id: String,
    pub tool: String,
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

/// Response frame: exactly one of `result` / `error` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub id: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl ToolResponse {
    pub fn ok(id: &str, result: Value) -> Self {
        Self {
            id: id.to_string(),
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    pub fn err(id: &str, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            id: id.to_string(),
            ok: false,
            result: None,
            error: Some(ErrorBody {
                code,
                message: message.into(),
            }),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        to_canonical_string(self).expect("response serializes")
    }
}

/// Everything a connection handler needs; cheap to clone across connection
/// threads.
#[derive(Clone)]
pub struct ServerContext {
    pub store: SharedStore,
    pub library: Arc<PlaybookLibrary>,
    pub clock: Arc<dyn Clock>,
}

impl ServerContext {
    pub fn new(store: SharedStore, library: Arc<PlaybookLibrary>, clock: Arc<dyn Clock>) -> Self {
        Self {
            store,
            library,
            clock,
        }
    }
}

#[derive(Deserialize)]
struct NextTaskArgs {
    agent: String,
}

#[derive(Deserialize)]
struct GetPacketArgs {
    task_id: String,
    lease_id: String,
}

#[derive(Deserialize)]
struct MarkTaskArgs {
    task_id: String,
    lease_id: String,
    status: TerminalStatus,
    summary: String,
    #[serde(default)]
    changed_files: Vec<String>,
    #[serde(default)]
    evidence: Evidence,
    #[serde(default)]
    next_steps: Vec<String>,
}

/// Handle one raw frame and render the canonical response line.
///
/// Malformed frames are answered (never dropped) so the connection can
/// continue; the request id is echoed when it could be salvaged.
pub fn handle_line(line: &str, ctx: &ServerContext) -> String {
    handle_frame(line, ctx).to_canonical_json()
}

fn handle_frame(line: &str, ctx: &ServerContext) -> ToolResponse {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => {
            return ToolResponse::err(
                "",
                ErrorCode::MalformedFrame,
                format!("frame is not valid JSON: {e}"),
            )
        }
    };
    let Some(obj) = value.as_object() else {
        return ToolResponse::err("", ErrorCode::MalformedFrame, "frame is not a JSON object");
    };
    let id = match obj.get("id").and_then(Value::as_str) {
        Some(id) if !id.is_empty() => id.to_string(),
        _ => {
            return ToolResponse::err(
                "",
                ErrorCode::MalformedFrame,
                "frame is missing a non-empty string id",
            )
        }
    };
    let Some(tool) = obj.get("tool").and_then(Value::as_str) else {
        return ToolResponse::err(&id, ErrorCode::MalformedFrame, "frame is missing a tool name");
    };
    let args = obj.get("args").cloned().unwrap_or(Value::Null);
    handle_request(
        ToolRequest {
            id,
            tool: tool.to_string(),
            args,
        },
        ctx,
    )
}

/// Dispatch a parsed request to its tool handler. All store effects are
/// atomic per request; error responses never mutate the store.
pub fn handle_request(request: ToolRequest, ctx: &ServerContext) -> ToolResponse {
    match request.tool.as_str() {
        TOOL_NEXT_TASK => next_task(&request, ctx),
        TOOL_GET_TASK_PACKET => get_task_packet(&request, ctx),
        TOOL_MARK_TASK => mark_task(&request, ctx),
        other => ToolResponse::err(
            &request.id,
            ErrorCode::UnknownTool,
            format!("unknown tool {other}"),
        ),
    }
}

fn parse_args<T: serde::de::DeserializeOwned>(
    request: &ToolRequest,
) -> Result<T, ToolResponse> {
    serde_json::from_value(request.args.clone()).map_err(|e| {
        ToolResponse::err(
            &request.id,
            ErrorCode::InvalidArgs,
            format!("invalid args for {}: {e}", request.tool),
        )
    })
}

fn next_task(request: &ToolRequest, ctx: &ServerContext) -> ToolResponse {
    let args: NextTaskArgs = match parse_args(request) {
        Ok(a) => a,
        Err(resp) => return resp,
    };
    let now = ctx.clock.now_ms();
    match ctx.store.claim_next(&args.agent, now) {
        Some(grant) => ToolResponse::ok(
            &request.id,
            serde_json::json!({"task_id": grant.task_id, "lease_id": grant.lease_id}),
        ),
        None => ToolResponse::ok(&request.id, serde_json::json!({"task_id": null})),
    }
}

fn get_task_packet(request: &ToolRequest, ctx: &ServerContext) -> ToolResponse {
    let args: GetPacketArgs = match parse_args(request) {
        Ok(a) => a,
        Err(resp) => return resp,
    };
    let assembled = ctx.store.with(|store| {
        let Some(task) = store.task(&args.task_id) else {
            return Err((
                ErrorCode::TaskNotFound,
                format!("unknown task {}", args.task_id),
            ));
        };
        match &task.lease {
            Some(lease) if lease.lease_id == args.lease_id => {
                assemble_packet(task, &ctx.library).map_err(|e| match e {
                    PacketError::MissingType(st) => (
                        ErrorCode::InvalidArgs,
                        format!("no playbook for smell type {st}"),
                    ),
                    other => (ErrorCode::StateConflict, other.to_string()),
                })
            }
            Some(_) => Err((
                ErrorCode::StaleLease,
                format!("task {} is leased to another agent", args.task_id),
            )),
            None => Err((
                ErrorCode::StateConflict,
                format!("task {} is not leased", args.task_id),
            )),
        }
    });
    match assembled {
        Ok(packet) => ToolResponse::ok(
            &request.id,
            serde_json::to_value(&packet).expect("packet serializes"),
        ),
        Err((code, message)) => ToolResponse::err(&request.id, code, message),
    }
}

fn mark_task(request: &ToolRequest, ctx: &ServerContext) -> ToolResponse {
    let args: MarkTaskArgs = match parse_args(request) {
        Ok(a) => a,
        Err(resp) => return resp,
    };
    let report = StatusReport {
        status: args.status,
        summary: args.summary,
        changed_files: args.changed_files,
        evidence: args.evidence,
        next_steps: args.next_steps,
    };
    let now = ctx.clock.now_ms();
    match ctx
        .store
        .record_outcome(&args.task_id, &args.lease_id, report, now)
    {
        Ok(state) => ToolResponse::ok(
            &request.id,
            serde_json::json!({"state": state, "task_id": args.task_id}),
        ),
        Err(err) => {
            let code = store_error_code(&err);
            ToolResponse::err(&request.id, code, err.to_string())
        }
    }
}

fn store_error_code(err: &StoreError) -> ErrorCode {
    match err {
        StoreError::UnknownTask(_) => ErrorCode::TaskNotFound,
        StoreError::StaleLease { .. } => ErrorCode::StaleLease,
        StoreError::DuplicateMark { .. } => ErrorCode::StateConflict,
        StoreError::InvalidReport { .. } => ErrorCode::InvalidArgs,
        StoreError::NotBlocked { .. } => ErrorCode::StateConflict,
        StoreError::EmptyBenchmark
        | StoreError::DuplicateTaskId(_)
        | StoreError::Replay { .. } => ErrorCode::StateConflict,
    }
}

/// Render a `mark_task` request frame from a status report.
pub fn mark_task_frame(
    id: &str,
    task_id: &str,
    lease_id: &str,
    report: &StatusReport,
) -> Value {
    serde_json::json!({
        "id": id,
        "tool": TOOL_MARK_TASK,
        "args": {
            "task_id": task_id,
            "lease_id": lease_id,
            "status": report.status,
            "summary": report.summary,
            "changed_files": report.changed_files,
            "evidence": report.evidence,
            "next_steps": report.next_steps,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::packet::test_support::full_library;
    use crate::store::test_support::*;
    use crate::store::{CreateOptions, TaskStore};

    fn ctx_with(ids: &[&str]) -> ServerContext {
        let instances: Vec<_> = ids.iter().map(|id| bench_instance(id)).collect();
        let store = TaskStore::create_tasks(&instances, CreateOptions::default(), 0).unwrap();
        ServerContext::new(
            SharedStore::new(store),
            Arc::new(full_library()),
            Arc::new(ManualClock::new(1_000)),
        )
    }

    fn request(id: &str, tool: &str, args: Value) -> ToolRequest {
        ToolRequest {
            id: id.to_string(),
            tool: tool.to_string(),
            args,
        }
    }

    #[test]
    fn next_task_on_exhausted_store_returns_null_task() {
        let ctx = ctx_with(&["t1"]);
        let r1 = handle_request(
            request("1", TOOL_NEXT_TASK, serde_json::json!({"agent": "a"})),
            &ctx,
        );
        assert!(r1.ok);
        let r2 = handle_request(
            request("2", TOOL_NEXT_TASK, serde_json::json!({"agent": "b"})),
            &ctx,
        );
        assert_eq!(r2.result.unwrap()["task_id"], Value::Null);
    }

    #[test]
    fn mark_with_foreign_lease_is_stale() {
        let ctx = ctx_with(&["t1"]);
        handle_request(
            request("1", TOOL_NEXT_TASK, serde_json::json!({"agent": "a"})),
            &ctx,
        );
        let resp = handle_frame(
            &mark_task_frame("2", "t1", "lease-999999", &done_report()).to_string(),
            &ctx,
        );
        assert!(!resp.ok);
        assert_eq!(resp.error.unwrap().code, ErrorCode::StaleLease);
    }

    #[test]
    fn duplicate_mark_is_a_state_conflict() {
        let ctx = ctx_with(&["t1"]);
        let grant = ctx.store.claim_next("a", 0).unwrap();
        let frame = mark_task_frame("2", &grant.task_id, &grant.lease_id, &done_report());
        let first = handle_frame(&frame.to_string(), &ctx);
        assert!(first.ok);
        let second = handle_frame(&frame.to_string(), &ctx);
        assert_eq!(second.error.unwrap().code, ErrorCode::StateConflict);
        ctx.store
            .with(|s| assert_eq!(s.task("t1").unwrap().history.len(), 1));
    }

    #[test]
    fn get_task_packet_requires_the_lease_holder() {
        let ctx = ctx_with(&["t1"]);
        let grant = ctx.store.claim_next("a", 0).unwrap();
        let ok = handle_request(
            request(
                "1",
                TOOL_GET_TASK_PACKET,
                serde_json::json!({"task_id": grant.task_id, "lease_id": grant.lease_id}),
            ),
            &ctx,
        );
        assert!(ok.ok);
        let stale = handle_request(
            request(
                "2",
                TOOL_GET_TASK_PACKET,
                serde_json::json!({"task_id": "t1", "lease_id": "lease-000099"}),
            ),
            &ctx,
        );
        assert_eq!(stale.error.unwrap().code, ErrorCode::StaleLease);
        let missing = handle_request(
            request(
                "3",
                TOOL_GET_TASK_PACKET,
                serde_json::json!({"task_id": "zz", "lease_id": "lease-000001"}),
            ),
            &ctx,
        );
        assert_eq!(missing.error.unwrap().code, ErrorCode::TaskNotFound);
    }

    #[test]
    fn unknown_tool_and_malformed_frames_are_reported() {
        let ctx = ctx_with(&["t1"]);
        let resp = handle_request(request("1", "rm_rf", Value::Null), &ctx);
        assert_eq!(resp.error.unwrap().code, ErrorCode::UnknownTool);

        let garbage = handle_frame("not json at all", &ctx);
        assert_eq!(garbage.error.unwrap().code, ErrorCode::MalformedFrame);
        assert_eq!(garbage.id, "");

        let no_tool = handle_frame(r#"{"id":"7"}"#, &ctx);
        assert_eq!(no_tool.id, "7");
        assert_eq!(no_tool.error.unwrap().code, ErrorCode::MalformedFrame);
    }

    #[test]
    fn invalid_args_do_not_mutate_the_store() {
        let ctx = ctx_with(&["t1"]);
        let resp = handle_request(
            request("1", TOOL_NEXT_TASK, serde_json::json!({"nope": true})),
            &ctx,
        );
        assert_eq!(resp.error.unwrap().code, ErrorCode::InvalidArgs);
        ctx.store.with(|s| {
            assert_eq!(
                s.task("t1").unwrap().state,
                crate::store::TaskState::NotHandled
            )
        });
    }

    #[test]
    fn invalid_report_payload_is_invalid_args() {
        let ctx = ctx_with(&["t1"]);
        let grant = ctx.store.claim_next("a", 0).unwrap();
        let mut report = nmw_report();
        report.next_steps.clear();
        let frame = mark_task_frame("1", &grant.task_id, &grant.lease_id, &report);
        let resp = handle_frame(&frame.to_string(), &ctx);
        assert_eq!(resp.error.unwrap().code, ErrorCode::InvalidArgs);
        ctx.store.with(|s| {
            assert_eq!(s.task("t1").unwrap().state, crate::store::TaskState::Leased)
        });
    }
}
