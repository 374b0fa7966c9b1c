#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmrt {

enum class TraceKind { RunStart, OpEnter, OpExit, TransitionTaken, CallEnter, CallExit, Adaptation, RunEnd, Fault };

std::string_view to_string(TraceKind k);

/// One interpreter event. Field use per kind:
///   op_enter/op_exit   op = operation id, status = exit status (op_exit)
///   transition_taken   op = transition id
///   call_enter/exit    op = call id, status = mapped status (call_exit)
///   adaptation         op = mutated element id, status = description
///   run_end            op = final operation id
///   fault              op = current operation (if any), status = ERR_* code
struct TraceEvent {
  std::uint64_t seq = 0;
  TraceKind kind = TraceKind::RunStart;
  std::string megamodel;
  std::optional<std::string> op;
  std::optional<std::string> status;
  std::int64_t clock = 0;

  bool operator==(const TraceEvent&) const = default;
};

struct RunResult {
  std::optional<std::string> final_op;
  std::optional<std::string> fault;
  std::string fault_message;
  std::vector<TraceEvent> trace;

  bool ok() const { return final_op.has_value(); }
};

/// One JSON object per line, keys in the order
/// seq, kind, megamodel, op, status, clock.
std::string export_trace(const std::vector<TraceEvent>& trace);
inline std::string export_trace(const RunResult& r) { return export_trace(r.trace); }

}  // namespace mmrt
