#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "cachesub/lagrangian.hpp"

namespace cachesub {

// Round-based message-passing enactment of the distributed optimization:
// ANO agents own and update the shadow prices of their capacity-limited
// resources, CP agents own the demand tables and solve their placement
// subproblems, and an orchestrator tracks bounds, step sizes and stopping.
// Every datum crossing agent boundaries travels as a logged message, so the
// transcript is the complete information-flow record: per-content demand
// never leaves a CP agent, only the per-node / per-ANO aggregates do.
//
// The bus is an in-process round barrier (the real exchange would be a
// daily batch job; determinism and testability beat wire realism here).
// Within a round, agents act in a fixed order: ANO announcements by id, CP
// reports by id, projection directives and replies by CP id, then the
// orchestrator's verdict. Rerunning a scenario reproduces the transcript
// bit for bit, and the final result matches the monolithic driver exactly.

enum class MsgKind {
  prices_announce,    // ANO -> *        sigma/beta for its capped resources
  primal_report,      // CP -> *         placement summary (no demand data)
  project_directive,  // orchestrator -> CP   per-resource quotas
  project_report,     // CP -> orchestrator   summary after applying quotas
  step_announce,      // orchestrator -> *    delta, bounds, incumbent flag
  placement_commit,   // CP -> *         final placement to deploy
  stop,               // orchestrator -> *    reason and incumbent round
  error,              // bus -> *        protocol violation note
};

std::string to_string(MsgKind k);

struct ProtocolMessage {
  int round = 0;
  MsgKind kind = MsgKind::error;
  std::string sender;    // "ano:2", "cp:0", "orchestrator", "bus"
  std::string receiver;  // "*" for broadcast or an agent name
  nlohmann::json payload;
};

// Deliberate misbehavior for testing the failure paths: at round
// `at_round`, CP `drop_cp` either stays silent (missing report) or, with
// `stale_round`, answers with the previous round's tag (out-of-round
// message, which the bus rejects and logs).
struct FaultPlan {
  CpId drop_cp = -1;
  int at_round = 0;  // 0 disables the fault
  bool stale_round = false;
};

struct ProtocolRun {
  OptimizationResult result;
  std::vector<ProtocolMessage> transcript;
  bool completed = false;  // false when a fault or violation aborted the run
  std::string fault;       // note describing the abort, empty otherwise
};

// Runs the protocol to completion (or abort). On completion the result is
// identical to orchestrate(net, demand, params): same trace, same duals,
// same incumbent placements. Message payloads hold binary doubles, so no
// precision is lost crossing the bus.
ProtocolRun run_protocol(const TreeNetwork& net, const DemandModel& demand,
                         const OptimizeParams& params, const FaultPlan& fault = {});

struct AuditFinding {
  std::size_t message_index = 0;
  std::string key;  // offending payload key, or a shape complaint
};

// Confidentiality check over a transcript: every payload key must belong
// to the fixed aggregate schema of its message kind and carry the expected
// value shape. Per-content entries are legal only in placement commits
// (they instruct caches what to store; they are not demand data). Returns
// the violations; an empty vector means the transcript is clean.
std::vector<AuditFinding> audit_privacy(const std::vector<ProtocolMessage>& transcript);

// One compact JSON object per line, in transmission order.
std::string transcript_to_jsonl(const std::vector<ProtocolMessage>& transcript);

}  // namespace cachesub
