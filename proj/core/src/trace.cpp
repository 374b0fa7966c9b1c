#include "mmrt/trace.hpp"

#include <nlohmann/json.hpp>

namespace mmrt {

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::RunStart: return "run_start";
    case TraceKind::OpEnter: return "op_enter";
    case TraceKind::OpExit: return "op_exit";
    case TraceKind::TransitionTaken: return "transition_taken";
    case TraceKind::CallEnter: return "call_enter";
    case TraceKind::CallExit: return "call_exit";
    case TraceKind::Adaptation: return "adaptation";
    case TraceKind::RunEnd: return "run_end";
    case TraceKind::Fault: return "fault";
  }
  return "unknown";
}

std::string export_trace(const std::vector<TraceEvent>& trace) {
  std::string out;
  auto opt = [](const std::optional<std::string>& s) -> nlohmann::ordered_json {
    return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr);
  };
  for (const auto& e : trace) {
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["kind"] = to_string(e.kind);
    j["megamodel"] = e.megamodel;
    j["op"] = opt(e.op);
    j["status"] = opt(e.status);
    j["clock"] = e.clock;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace mmrt
